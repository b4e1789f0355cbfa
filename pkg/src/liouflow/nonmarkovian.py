"""Nakajima-Zwanzig projection machinery for finite system-bath composites.

Conventions (hbar = 1):

* composite basis index ``i * n_bath + alpha`` (system-major, ``kron(sys, bath)``);
* superoperators act on column-stacked composite operators, so the matrix
  element ``K[a + b*D, c + d*D]`` maps input entry ``(c, d)`` to output entry
  ``(a, b)``, ``D = n_sys * n_bath``;
* the interaction-picture Liouvillian is ``L(t) = -i [V(t), .]``; pass
  ``prefactor=False`` for the bare commutator ``[V(t), .]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .core import (
    STATE_TOL,
    Superoperator,
    ValidationError,
    check_density,
    commutator_superop,
    partial_trace_bath,
    random_hermitian,
)

IMAG_TOL = 1e-8


class ConventionError(RuntimeError):
    """A contraction that must be real came out complex."""


@dataclass(frozen=True)
class CompositeModel:
    n_sys: int
    n_bath: int
    H_S: np.ndarray = field(repr=False)
    H_B: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    rho_B: np.ndarray = field(repr=False)

    def __post_init__(self):
        ns, nb = self.n_sys, self.n_bath
        D = ns * nb
        for name, shape in (("H_S", (ns, ns)), ("H_B", (nb, nb)), ("V", (D, D)), ("rho_B", (nb, nb))):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != shape:
                raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
            if np.max(np.abs(arr - arr.conj().T)) > STATE_TOL:
                raise ValidationError(f"{name} is not Hermitian")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not check_density(self.rho_B).passed:
            raise ValidationError("rho_B is not a valid density matrix")
        comm = self.H_B @ self.rho_B - self.rho_B @ self.H_B
        if np.max(np.abs(comm)) > STATE_TOL:
            raise ValidationError("rho_B is not stationary under H_B")

    @property
    def dim(self) -> int:
        return self.n_sys * self.n_bath

    @cached_property
    def _free_eig(self):
        H0 = np.kron(self.H_S, np.eye(self.n_bath)) + np.kron(np.eye(self.n_sys), self.H_B)
        return np.linalg.eigh(H0)

    def V_at(self, t: float) -> np.ndarray:
        """Interaction picture ``exp(i H0 t) V exp(-i H0 t)``."""
        if t == 0:
            return np.array(self.V)
        E, U = self._free_eig
        Vt = U.conj().T @ self.V @ U
        phase = np.exp(1j * (E[:, None] - E[None, :]) * t)
        return U @ (phase * Vt) @ U.conj().T

    def mean_field(self) -> np.ndarray:
        """``Tr_B{V (I_S x rho_B)}``, a system operator."""
        return partial_trace_bath(self.V @ np.kron(np.eye(self.n_sys), self.rho_B),
                                  self.n_sys, self.n_bath)

    def centered(self) -> "CompositeModel":
        """Shift ``V -> V - mean_field x I_B`` so that ``Tr_B{V rho_B} = 0``."""
        Vc = self.V - np.kron(self.mean_field(), np.eye(self.n_bath))
        return CompositeModel(self.n_sys, self.n_bath, self.H_S, self.H_B, (Vc + Vc.conj().T) / 2,
                              self.rho_B)

    def scaled(self, lam: float) -> "CompositeModel":
        return CompositeModel(self.n_sys, self.n_bath, self.H_S, self.H_B, lam * self.V, self.rho_B)


def thermal_state(H, beta: float) -> np.ndarray:
    E, U = np.linalg.eigh(H)
    w = np.exp(-beta * (E - E.min()))
    return (U * (w / w.sum())) @ U.conj().T


def random_model(n_sys: int, n_bath: int, rng: np.random.Generator, beta: float = 1.0,
                 coupling: float = 1.0, center: bool = True) -> CompositeModel:
    H_S = random_hermitian(n_sys, rng)
    H_B = random_hermitian(n_bath, rng)
    V = random_hermitian(n_sys * n_bath, rng, coupling)
    model = CompositeModel(n_sys, n_bath, H_S, H_B, V, thermal_state(H_B, beta))
    return model.centered() if center else model


def projector_P(model: CompositeModel) -> Superoperator:
    """``P sigma = Tr_B{sigma} x rho_B``."""
    ns, nb, rho_B = model.n_sys, model.n_bath, model.rho_B
    return Superoperator.from_map(lambda s: np.kron(partial_trace_bath(s, ns, nb), rho_B), model.dim)


def projector_Q(model: CompositeModel) -> Superoperator:
    return Superoperator.identity(model.dim) - projector_P(model)


def interaction_liouvillian(model: CompositeModel, t: float, prefactor: bool = True) -> Superoperator:
    C = commutator_superop(model.V_at(t))
    return Superoperator(model.dim, -1j * C if prefactor else C)


def default_dt(model: CompositeModel) -> float:
    norm = np.linalg.norm(model.V, 2)
    return 1e-3 / norm if norm > 0 else 1.0


def propagator_G(model: CompositeModel, t: float, s: float, dt: float | None = None,
                 prefactor: bool = True) -> Superoperator:
    """Time-ordered ``G(t, s)`` from ``dG/dt = Q L(t) G``, ``G(s, s) = 1``, by RK4."""
    if t < s:
        raise ValidationError(f"need t >= s, got t={t}, s={s}")
    D2 = model.dim**2
    G = np.eye(D2, dtype=complex)
    if t == s:
        return Superoperator(model.dim, G)
    dt = default_dt(model) if dt is None else dt
    if dt <= 0:
        raise ValidationError("dt must be positive")
    nsteps = int(math.ceil((t - s) / dt - 1e-9))
    h = (t - s) / nsteps
    Q = projector_Q(model).matrix

    def QL(tau):
        return Q @ interaction_liouvillian(model, tau, prefactor).matrix

    tau = s
    A_next = QL(tau)
    for _ in range(nsteps):
        A0 = A_next
        Am = QL(tau + h / 2)
        A_next = QL(tau + h)
        k1 = A0 @ G
        k2 = Am @ (G + h / 2 * k1)
        k3 = Am @ (G + h / 2 * k2)
        k4 = A_next @ (G + h * k3)
        G = G + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        tau += h
    return Superoperator(model.dim, G)


def kernel_contraction(K: Superoperator, model: CompositeModel) -> complex:
    """``sum_{i,j,alpha,delta,gamma} K_{i alpha, j alpha; i delta, j gamma} rho_B[delta, gamma]``."""
    ns, nb = model.n_sys, model.n_bath
    # column-stacked rows/cols split as (col_sys, col_bath, row_sys, row_bath)
    K8 = K.matrix.reshape(ns, nb, ns, nb, ns, nb, ns, nb)
    return complex(np.einsum("jaiajgid,dg->", K8, model.rho_B))


@dataclass(frozen=True)
class KernelEvaluation:
    t: float
    s: float
    K: Superoperator = field(repr=False)
    compressibility: float


def _real_or_raise(val: complex, scale: float) -> float:
    if abs(val.imag) > IMAG_TOL * max(1.0, scale):
        raise ConventionError(f"contraction has imaginary part {val.imag:.3e}")
    return val.real


def kernel_K(model: CompositeModel, t: float, s: float, dt: float | None = None,
             prefactor: bool = True) -> KernelEvaluation:
    """``K(t, s) = P L(t) G(t, s) Q L(s) P``."""
    if t < s:
        raise ValidationError(f"need t >= s, got t={t}, s={s}")
    P = projector_P(model)
    Q = Superoperator.identity(model.dim) - P
    Lt = interaction_liouvillian(model, t, prefactor)
    Ls = Lt if t == s else interaction_liouvillian(model, s, prefactor)
    if t == s:
        K = P @ Lt @ Q @ Ls @ P
    else:
        K = P @ Lt @ propagator_G(model, t, s, dt, prefactor) @ Q @ Ls @ P
    val = kernel_contraction(K, model)
    kappa = -_real_or_raise(val, float(np.abs(K.matrix).max()))
    return KernelEvaluation(t, s, K, kappa)


def nz_compressibility(model: CompositeModel, t: float, prefactor: bool = True) -> float:
    """Equal-time kernel compressibility ``kappa = -(index contraction of K(t, t))``."""
    return kernel_K(model, t, t, prefactor=prefactor).compressibility


def reduced_kernel_map(model: CompositeModel, t: float, prefactor: bool = True):
    """``sigma_S -> Tr_B{K(t, t)(sigma_S x rho_B)}`` as a function on matrices."""
    K = kernel_K(model, t, t, prefactor=prefactor).K
    ns, nb, rho_B = model.n_sys, model.n_bath, model.rho_B
    return lambda sig: partial_trace_bath(K.apply(np.kron(sig, rho_B)), ns, nb)


def nz_compressibility_series(model: CompositeModel, times, prefactor: bool = True) -> np.ndarray:
    return np.array([nz_compressibility(model, float(t), prefactor) for t in times])
