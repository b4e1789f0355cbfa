"""Closed (Liouville-von Neumann) and open (GKSL) flow fields on state coordinates.

Every generator considered here is affine in the real coordinates of
:mod:`liouflow.core`, so a flow field is stored as ``c_dot = A c + b`` together
with its compressibility ``kappa = -div(c_dot) = -Tr(A)``. Units: hbar = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .core import (
    ALGEBRA_TOL,
    HermitianBasis,
    ShapeError,
    Superoperator,
    ValidationError,
    commutator_superop,
    hermitian_basis,
    left_superop,
    operator_coords,
    right_superop,
)

FD_STEP = 1e-5


@dataclass(frozen=True)
class AffineFlow:
    """Affine vector field ``x_dot = linear @ x + offset`` on a real coordinate space."""

    linear: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        A = np.array(self.linear, dtype=float)
        b = np.array(self.offset, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise ShapeError(f"inconsistent affine flow shapes {A.shape}, {b.shape}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "linear", A)
        object.__setattr__(self, "offset", b)

    @property
    def n_coords(self) -> int:
        return self.linear.shape[0]

    @property
    def kappa(self) -> float:
        return 0.0 - float(np.trace(self.linear))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.offset

    def flow_map(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Exact time-``t`` map ``x -> M x + d`` via the augmented matrix exponential."""
        n = self.n_coords
        aug = np.zeros((n + 1, n + 1))
        aug[:n, :n] = self.linear
        aug[:n, n] = self.offset
        E = expm(aug * t)
        return E[:n, :n], E[:n, n]

    def evolve(self, x, t: float) -> np.ndarray:
        M, d = self.flow_map(t)
        return np.asarray(x, dtype=float) @ M.T + d


@dataclass(frozen=True)
class FlowField(AffineFlow):
    """Quantum flow field on the traceless coordinates of an ``dim``-level system."""

    dim: int = 2

    def __post_init__(self):
        super().__post_init__()
        if self.linear.shape[0] != self.dim**2 - 1:
            raise ShapeError(f"flow for N={self.dim} needs {self.dim**2 - 1} coordinates")


@dataclass(frozen=True)
class LindbladTerm:
    operator: np.ndarray = field(repr=False)
    rate: float

    def __post_init__(self):
        op = np.array(self.operator, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ShapeError(f"Lindblad operator must be square, got {op.shape}")
        if not np.isfinite(self.rate) or self.rate < 0:
            raise ValidationError(f"Lindblad rate must be >= 0, got {self.rate}")
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "rate", float(self.rate))

    def is_canonical(self, tol: float = 1e-10) -> bool:
        L = self.operator
        return abs(np.trace(L)) <= tol and abs(np.vdot(L, L).real - 1.0) <= tol


def _check_hamiltonian(H, N: int | None = None) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError(f"Hamiltonian must be square, got {H.shape}")
    if N is not None and H.shape[0] != N:
        raise ShapeError(f"Hamiltonian is {H.shape[0]}x{H.shape[0]}, basis has N={N}")
    dev = np.max(np.abs(H - H.conj().T))
    if dev > 1e-10:
        raise ValidationError(f"Hamiltonian is not Hermitian (deviation {dev:.3e})")
    return H


def _check_terms(terms: Sequence[LindbladTerm], N: int) -> list[LindbladTerm]:
    out = []
    for term in terms:
        if not isinstance(term, LindbladTerm):
            term = LindbladTerm(*term)
        if term.operator.shape != (N, N):
            raise ShapeError(f"Lindblad operator shape {term.operator.shape} != {(N, N)}")
        out.append(term)
    return out


def apply_generator(H, terms: Sequence[LindbladTerm], sigma) -> np.ndarray:
    """``-i[H, sigma] + sum_a rate_a D[L_a] sigma`` on a matrix."""
    out = -1j * (H @ sigma - sigma @ H)
    for term in terms:
        L = term.operator
        LdL = L.conj().T @ L
        out = out + term.rate * (L @ sigma @ L.conj().T - 0.5 * (LdL @ sigma + sigma @ LdL))
    return out


def gksl_superop(H, terms: Sequence[LindbladTerm] = ()) -> Superoperator:
    """Generator as a column-stacked superoperator (Kronecker assembly)."""
    H = _check_hamiltonian(H)
    N = H.shape[0]
    M = -1j * commutator_superop(H)
    for term in _check_terms(terms, N):
        L = term.operator
        LdL = L.conj().T @ L
        M = M + term.rate * (left_superop(L) @ right_superop(L.conj().T)
                             - 0.5 * (left_superop(LdL) + right_superop(LdL)))
    return Superoperator(N, M)


def _field_from_generator(gen: Callable[[np.ndarray], np.ndarray], basis: HermitianBasis) -> FlowField:
    N = basis.dim
    rootN = np.sqrt(N)
    b = operator_coords(gen(np.eye(N, dtype=complex) / N), basis)
    A = np.empty((N * N - 1, N * N - 1))
    for l, B in enumerate(basis.traceless):
        A[:, l] = operator_coords(gen(B / rootN), basis)
    return FlowField(A, b, dim=N)


def closed_flow(H, basis: HermitianBasis | None = None) -> FlowField:
    """Liouville-von Neumann flow ``sigma_dot = -i[H, sigma]``; offset 0, kappa 0."""
    H = _check_hamiltonian(H)
    basis = basis or hermitian_basis(H.shape[0])
    _check_hamiltonian(H, basis.dim)
    return _field_from_generator(lambda s: apply_generator(H, (), s), basis)


def gksl_flow(H, terms: Sequence[LindbladTerm] = (), basis: HermitianBasis | None = None) -> FlowField:
    """GKSL flow field. For traceless unit-norm operators ``kappa = N * sum(rates)``."""
    H = _check_hamiltonian(H)
    basis = basis or hermitian_basis(H.shape[0])
    _check_hamiltonian(H, basis.dim)
    terms = _check_terms(terms, basis.dim)
    return _field_from_generator(lambda s: apply_generator(H, terms, s), basis)


def gksl_rhs(H, terms: Sequence[LindbladTerm] = (), basis: HermitianBasis | None = None):
    """Return ``f(t, c)`` for a possibly time-dependent Hamiltonian ``H(t)``.

    ``H`` may be a matrix or a callable of time; a matrix gives an autonomous field.
    """
    if callable(H):
        H0 = _check_hamiltonian(H(0.0))
        basis = basis or hermitian_basis(H0.shape[0])
        terms = _check_terms(terms, basis.dim)

        def rhs(t, c):
            return gksl_flow(H(t), terms, basis)(c)

        return rhs
    fld = gksl_flow(H, terms, basis)
    return lambda t, c: fld(c)


def identity_component(H, terms: Sequence[LindbladTerm], sigma) -> float:
    """Component of ``L sigma`` along ``I/sqrt(N)``; zero for trace-preserving dynamics."""
    H = _check_hamiltonian(H)
    N = H.shape[0]
    return float(np.trace(apply_generator(H, _check_terms(terms, N), sigma)).real / np.sqrt(N))


# -- spin-boson model ---------------------------------------------------------

def spin_boson_hamiltonian(omega: float) -> np.ndarray:
    """Two-level Hamiltonian whose precession sense matches :func:`spin_boson_flow`.

    This is ``-omega S_z / sqrt(2)`` with ``S_z = (|2><2| - |1><1|)/sqrt(2)``:
    the flow ``x_dot = -omega y, y_dot = omega x`` (counterclockwise in x, y)
    used throughout the spin-boson model requires this sign.
    """
    Sz = hermitian_basis(2).elements[3]
    return -omega * Sz / np.sqrt(2)


def spin_boson_terms(gamma_phi: float, Gamma: float) -> list[LindbladTerm]:
    """Relaxation ``|1><2|`` at rate Gamma and dephasing ``S_z`` at rate gamma_phi."""
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    Sz = hermitian_basis(2).elements[3]
    return [LindbladTerm(lower, Gamma), LindbladTerm(Sz, gamma_phi)]


def spin_boson_flow(omega: float, gamma_phi: float, Gamma: float) -> FlowField:
    """Closed-form spin-boson field on the Bloch ball.

    ``[-omega y - g x, omega x - g y, -Gamma (1 + z)]`` with ``g = gamma_phi + Gamma/2``.
    """
    if gamma_phi < 0 or Gamma < 0:
        raise ValidationError("spin-boson rates must be >= 0")
    g = gamma_phi + 0.5 * Gamma
    A = np.array([[-g, -omega, 0.0],
                  [omega, -g, 0.0],
                  [0.0, 0.0, -Gamma]])
    b = np.array([0.0, 0.0, -Gamma])
    return FlowField(A, b, dim=2)


# -- compressibility ----------------------------------------------------------

def compressibility_numeric(fld, c, h: float = FD_STEP) -> float:
    """Central-difference ``kappa = -sum_k d c_dot_k / d c_k`` at point ``c``.

    ``fld`` is any callable mapping coordinates to velocities (a FlowField works).
    """
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    c = np.asarray(c, dtype=float)
    div = 0.0
    for k in range(c.size):
        e = np.zeros_like(c)
        e[k] = h
        div += (np.asarray(fld(c + e))[k] - np.asarray(fld(c - e))[k]) / (2 * h)
    return -float(div)


def random_canonical_terms(N: int, rates: Sequence[float], rng: np.random.Generator) -> list[LindbladTerm]:
    """Random traceless, trace-norm-one Lindblad operators with the given rates."""
    terms = []
    for rate in rates:
        X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        X -= np.trace(X) / N * np.eye(N)
        X /= np.sqrt(np.vdot(X, X).real)
        terms.append(LindbladTerm(X, rate))
    return terms


def canonical_kappa(terms: Sequence[LindbladTerm], N: int) -> float:
    if not all(t.is_canonical() for t in terms):
        raise ValidationError("kappa = N*sum(rates) only holds for traceless unit-norm operators")
    return N * sum(t.rate for t in terms)


__all__ = [
    "ALGEBRA_TOL",
    "AffineFlow",
    "FlowField",
    "LindbladTerm",
    "apply_generator",
    "canonical_kappa",
    "closed_flow",
    "compressibility_numeric",
    "gksl_flow",
    "gksl_rhs",
    "gksl_superop",
    "identity_component",
    "random_canonical_terms",
    "spin_boson_flow",
    "spin_boson_hamiltonian",
    "spin_boson_terms",
]
