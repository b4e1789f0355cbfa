"""Single-state propagation: fixed-step RK4 and the closed-form spin-boson solution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .core import ValidationError, from_coords, hermitian_basis
from .flow import AffineFlow, FlowField

VALIDITY_DRIFT = 1e-6


class IntegrationError(RuntimeError):
    """Integrated state left the state body beyond the allowed drift."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray  # shape (len(times), n_coords)
    field: AffineFlow | None = field(default=None, repr=False)

    def at(self, t: float) -> np.ndarray:
        """Recorded point nearest to time ``t``."""
        return self.points[int(np.argmin(np.abs(self.times - t)))]


def default_dt(omega: float) -> float:
    return 1e-3 / abs(omega)


def min_eigenvalues(points, dim: int) -> np.ndarray:
    """Smallest eigenvalue of ``from_coords(c)`` for each row of ``points``."""
    points = np.asarray(points, dtype=float)
    if dim == 2:
        return 0.5 * (1.0 - np.linalg.norm(points, axis=-1))
    mats = from_coords(points, hermitian_basis(dim))
    return np.linalg.eigvalsh(mats)[..., 0]


def _step_count(t_end: float, dt: float) -> tuple[int, float]:
    if t_end < 0:
        raise ValidationError(f"t_end must be >= 0, got {t_end}")
    if dt <= 0:
        raise ValidationError(f"dt must be > 0, got {dt}")
    nsteps = max(int(math.ceil(t_end / dt - 1e-9)), 0)
    return nsteps, (t_end / nsteps if nsteps else 0.0)


def integrate_batch(fld: AffineFlow, C0, t_end: float, dt: float, stride: int = 1,
                    check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """RK4 for many initial states at once.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so the last record lands
    on ``t_end``. Returns ``(times, states)`` with states shaped ``(n_t, m, d)``.
    """
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    nsteps, h = _step_count(t_end, dt)
    stride = max(int(stride), 1)
    states = kernels.rk4_affine(fld.linear, fld.offset, C0, h, nsteps, stride)
    times = np.arange(states.shape[0]) * stride * h
    if check and isinstance(fld, FlowField):
        worst = float(min_eigenvalues(states.reshape(-1, states.shape[-1]), fld.dim).min())
        if worst < -VALIDITY_DRIFT:
            raise IntegrationError(f"state left the state body (min eigenvalue {worst:.3e})")
    return times, states


def integrate(fld: AffineFlow, c0, t_end: float, dt: float, stride: int = 1,
              check: bool = True) -> Trajectory:
    """Fixed-step classical RK4 along an affine flow field."""
    times, states = integrate_batch(fld, [c0], t_end, dt, stride, check)
    return Trajectory(times, states[:, 0, :], fld)


def integrate_rhs(rhs: Callable[[float, np.ndarray], np.ndarray], c0, t_end: float,
                  dt: float) -> Trajectory:
    """RK4 for a general, possibly time-dependent right-hand side ``rhs(t, c)``."""
    nsteps, h = _step_count(t_end, dt)
    c = np.asarray(c0, dtype=float)
    pts = [c]
    for k in range(nsteps):
        t = k * h
        k1 = rhs(t, c)
        k2 = rhs(t + h / 2, c + h / 2 * k1)
        k3 = rhs(t + h / 2, c + h / 2 * k2)
        k4 = rhs(t + h, c + h * k3)
        c = c + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        pts.append(c)
    return Trajectory(np.arange(nsteps + 1) * h, np.array(pts))


def spin_boson_analytic(c0, omega: float, gamma_phi: float, Gamma: float, t) -> np.ndarray:
    """Closed-form spin-boson state at time(s) ``t``.

    ``c0[..., :3]`` and ``t`` broadcast against each other, so one state with
    many times or many states at one time both work.
    """
    c0 = np.asarray(c0, dtype=float)
    t = np.asarray(t, dtype=float)
    x0, y0, z0 = c0[..., 0], c0[..., 1], c0[..., 2]
    decay = np.exp(-(gamma_phi + 0.5 * Gamma) * t)
    cos, sin = np.cos(omega * t), np.sin(omega * t)
    x = decay * (x0 * cos - y0 * sin)
    y = decay * (y0 * cos + x0 * sin)
    z = np.exp(-Gamma * t) * (1.0 + z0) - 1.0
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def purity(sigma) -> float:
    """``Tr(sigma^2)``."""
    sigma = np.asarray(sigma)
    return float(np.vdot(sigma.conj().T, sigma).real)
