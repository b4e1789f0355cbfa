"""Classical phase-space analog: (damped) harmonic oscillators in symmetrized coordinates.

Coordinates are ``x = [q~_1..q~_n, p~_1..p~_n]`` with ``q~ = q sqrt(m w)`` and
``p~ = p / sqrt(m w)``. Hamilton's equations then read ``q~' = w p~``,
``p~' = -w q~``; linear dissipation subtracts ``Gamma_hat x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError
from .ensemble import SampleEnsemble, TruncatedGaussian, pullback_density
from .flow import AffineFlow


@dataclass(frozen=True)
class PhaseState:
    q: np.ndarray
    p: np.ndarray
    symmetrized: bool = False

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape:
            raise ValidationError(f"q and p shapes differ: {q.shape} vs {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def symmetrize(self, m: float, omega: float) -> "PhaseState":
        if self.symmetrized:
            return self
        s = math.sqrt(m * omega)
        return PhaseState(self.q * s, self.p / s, True)

    def unsymmetrize(self, m: float, omega: float) -> "PhaseState":
        if not self.symmetrized:
            return self
        s = math.sqrt(m * omega)
        return PhaseState(self.q / s, self.p * s, False)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


class ClassicalFlow(AffineFlow):
    """Affine phase-space flow; ``kappa = -Tr(linear) = Tr(Gamma_hat)``."""


def _check_positive(m: float, omega: float) -> None:
    if not (m > 0 and omega > 0):
        raise ValidationError(f"mass and frequency must be positive, got m={m}, omega={omega}")


def harmonic_flow(m: float, omega: float, n_dof: int = 1) -> ClassicalFlow:
    _check_positive(m, omega)
    I = np.eye(n_dof)
    Z = np.zeros((n_dof, n_dof))
    A = np.block([[Z, omega * I], [-omega * I, Z]])
    return ClassicalFlow(A, np.zeros(2 * n_dof))


def damped_harmonic_flow(m: float, omega: float, gamma: float, n_dof: int = 1,
                         dissipator: np.ndarray | None = None) -> ClassicalFlow:
    """Harmonic flow minus ``Gamma_hat x``.

    Default ``Gamma_hat = diag(0, gamma)``: friction on momentum only. Pass
    ``dissipator`` (a ``2n x 2n`` positive semidefinite matrix) to override.
    """
    if gamma < 0:
        raise ValidationError(f"damping must be >= 0, got {gamma}")
    base = harmonic_flow(m, omega, n_dof)
    if dissipator is None:
        dissipator = np.diag(np.r_[np.zeros(n_dof), np.full(n_dof, gamma)])
    dissipator = np.asarray(dissipator, dtype=float)
    if dissipator.shape != base.linear.shape:
        raise ValidationError(f"dissipator must be {base.linear.shape}")
    if np.linalg.eigvalsh((dissipator + dissipator.T) / 2).min() < -1e-12:
        raise ValidationError("dissipator must be positive semidefinite")
    return ClassicalFlow(base.linear - dissipator, base.offset)


def classical_pushforward(ens: SampleEnsemble | np.ndarray, fld: AffineFlow, t: float):
    """Exact matrix-exponential transport of phase-space samples."""
    if isinstance(ens, SampleEnsemble):
        return SampleEnsemble(fld.evolve(ens.points, t), ens.seed, ens.acceptance)
    return fld.evolve(ens, t)


def classical_density_at(dist0: TruncatedGaussian, fld: AffineFlow, x, t: float):
    """``P(x; t) = exp(kappa t) P0(x(-t | x))``."""
    return pullback_density(dist0, fld, x, t)


def phase_gaussian(mean, covariance) -> TruncatedGaussian:
    """Untruncated Gaussian over phase space."""
    return TruncatedGaussian(mean, covariance, truncated=False)
