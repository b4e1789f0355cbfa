"""Operator-space foundations.

Hermitian operator bases, the trace inner product, real coordinate charts on
density matrices, column-stacking vectorization and density-matrix checks.

Coordinates: for an N-level system with orthonormal Hermitian basis
``B_0 = I/sqrt(N), B_1 ... B_{N^2-1}`` a Hermitian unit-trace operator is

    sigma = I/N + sum_k c_k B_k / sqrt(N)

so ``c_k = sqrt(N) Tr(B_k sigma)``. For N = 2 this is the Bloch vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

ALGEBRA_TOL = 1e-12
STATE_TOL = 1e-10


class ValidationError(ValueError):
    """Input violates a physical or structural precondition."""


class ShapeError(ValueError):
    """Array dimensions are inconsistent."""


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal Hermitian basis of operator space, identity element first."""

    dim: int
    elements: np.ndarray = field(repr=False)  # shape (N^2, N, N)

    @property
    def traceless(self) -> np.ndarray:
        return self.elements[1:]

    @property
    def n_coords(self) -> int:
        return self.dim**2 - 1

    def gram(self) -> np.ndarray:
        B = self.elements.reshape(len(self.elements), -1)
        return B.conj() @ B.T


@lru_cache(maxsize=None)
def _gell_mann(N: int) -> np.ndarray:
    elems = [np.eye(N, dtype=complex) / np.sqrt(N)]
    pairs = [(j, k) for j in range(N) for k in range(j + 1, N)]
    for j, k in pairs:
        S = np.zeros((N, N), dtype=complex)
        S[j, k] = S[k, j] = 1.0
        elems.append(S / np.sqrt(2))
    for j, k in pairs:
        A = np.zeros((N, N), dtype=complex)
        A[j, k] = -1j
        A[k, j] = 1j
        elems.append(A / np.sqrt(2))
    # sign chosen so N=2 gives S_z = (|2><2| - |1><1|)/sqrt(2)
    for l in range(1, N):
        d = np.zeros(N)
        d[:l] = -1.0
        d[l] = l
        elems.append(np.diag(d / np.sqrt(l * (l + 1))).astype(complex))
    out = np.array(elems)
    out.setflags(write=False)
    return out


def hermitian_basis(N: int) -> HermitianBasis:
    """Generalized Gell-Mann basis normalized under the trace inner product.

    Order: ``I/sqrt(N)``, symmetric pairs, antisymmetric pairs, diagonal
    generators; pairs ``(j, k), j < k`` in lexicographic order. For ``N = 2``
    this is ``[I/sqrt2, S_x, S_y, S_z]``.
    """
    if int(N) != N or N < 2:
        raise ValidationError(f"Hilbert dimension must be an integer >= 2, got {N!r}")
    return HermitianBasis(int(N), _gell_mann(int(N)))


def trace_inner(A, B) -> complex:
    """``Tr(A^dagger B) = sum_ij conj(A_ij) B_ij``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"trace_inner needs equal square matrices, got {A.shape} and {B.shape}")
    return complex(np.vdot(A, B))


def _check_dim(mat: np.ndarray, basis: HermitianBasis) -> None:
    if mat.shape != (basis.dim, basis.dim):
        raise ShapeError(f"expected {basis.dim}x{basis.dim} matrix, got {mat.shape}")


def operator_coords(A, basis: HermitianBasis) -> np.ndarray:
    """Coordinates ``sqrt(N) Tr(B_k A)`` of a Hermitian operator on the traceless elements.

    Unlike :func:`to_coords` no unit trace is assumed; used for velocities.
    """
    A = np.asarray(A, dtype=complex)
    _check_dim(A, basis)
    N = basis.dim
    flat = basis.traceless.reshape(N * N - 1, -1).conj()
    return np.sqrt(N) * (flat @ A.reshape(-1)).real


def to_coords(sigma, basis: HermitianBasis, tol: float = STATE_TOL) -> np.ndarray:
    """Map a density matrix to its real coordinate vector (Bloch vector for N=2)."""
    sigma = np.asarray(sigma, dtype=complex)
    _check_dim(sigma, basis)
    herm = np.max(np.abs(sigma - sigma.conj().T))
    if herm > tol:
        raise ValidationError(f"matrix is not Hermitian (deviation {herm:.3e})")
    return operator_coords(sigma, basis)


def from_coords(c, basis: HermitianBasis) -> np.ndarray:
    """Inverse chart: ``I/N + sum_k c_k B_k / sqrt(N)``.

    Always Hermitian with unit trace; positivity holds only inside the state body.
    """
    c = np.asarray(c, dtype=float)
    N = basis.dim
    if c.shape[-1] != N * N - 1:
        raise ShapeError(f"expected {N * N - 1} coordinates, got {c.shape[-1]}")
    return np.eye(N) / N + np.tensordot(c, basis.traceless, axes=(-1, 0)) / np.sqrt(N)


def vec(A) -> np.ndarray:
    """Column-stacking vectorization, ``vec(A)[i + j*n] = A[i, j]``.

    With this convention ``vec(X A Y) = kron(Y.T, X) @ vec(A)``.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise ShapeError(f"vec expects a matrix, got shape {A.shape}")
    return A.reshape(-1, order="F")


def unvec(v) -> np.ndarray:
    v = np.asarray(v)
    n = int(round(np.sqrt(v.size)))
    if v.ndim != 1 or n * n != v.size:
        raise ShapeError(f"length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


def left_superop(X) -> np.ndarray:
    """Superoperator of ``A -> X A``."""
    X = np.asarray(X)
    return np.kron(np.eye(X.shape[0]), X)


def right_superop(Y) -> np.ndarray:
    """Superoperator of ``A -> A Y``."""
    Y = np.asarray(Y)
    return np.kron(Y.T, np.eye(Y.shape[0]))


def commutator_superop(X) -> np.ndarray:
    """Superoperator of ``A -> [X, A]``."""
    return left_superop(X) - right_superop(X)


@dataclass(frozen=True)
class Superoperator:
    """Linear map on ``dim x dim`` operators, stored as a ``dim^2 x dim^2`` matrix
    acting on column-stacked operators."""

    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.matrix.shape != (self.dim**2, self.dim**2):
            raise ShapeError(f"superoperator on dim {self.dim} needs shape "
                             f"{(self.dim**2,) * 2}, got {self.matrix.shape}")

    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        return cls(dim, np.eye(dim * dim, dtype=complex))

    @classmethod
    def from_map(cls, fn, dim: int) -> "Superoperator":
        """Tabulate an arbitrary linear map by applying it to matrix units."""
        M = np.zeros((dim * dim, dim * dim), dtype=complex)
        for col in range(dim * dim):
            E = np.zeros(dim * dim, dtype=complex)
            E[col] = 1.0
            M[:, col] = vec(fn(unvec(E)))
        return cls(dim, M)

    def __matmul__(self, other):
        if isinstance(other, Superoperator):
            if other.dim != self.dim:
                raise ShapeError("superoperator dimensions differ")
            return Superoperator(self.dim, self.matrix @ other.matrix)
        return NotImplemented

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.dim, self.matrix - other.matrix)

    def __rmul__(self, scalar) -> "Superoperator":
        return Superoperator(self.dim, scalar * self.matrix)

    def apply(self, A) -> np.ndarray:
        return unvec(self.matrix @ vec(np.asarray(A, dtype=complex)))


@dataclass(frozen=True)
class DensityCheck:
    hermiticity: float
    trace_deviation: float
    min_eigenvalue: float
    passed: bool


def check_density(sigma, tol: float = STATE_TOL) -> DensityCheck:
    """Diagnose the three density-matrix conditions; never raises on bad states."""
    sigma = np.asarray(sigma, dtype=complex)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeError(f"square matrix required, got {sigma.shape}")
    herm = float(np.max(np.abs(sigma - sigma.conj().T)))
    trace_dev = float(abs(np.trace(sigma) - 1.0))
    min_eig = float(np.linalg.eigvalsh((sigma + sigma.conj().T) / 2).min())
    ok = herm <= tol and trace_dev <= tol and min_eig >= -tol
    return DensityCheck(herm, trace_dev, min_eig, ok)


def random_hermitian(N: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
    return scale * (X + X.conj().T) / 2


def random_density(N: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state ``G G^dagger / Tr``; full rank unless ``rank`` is given."""
    k = N if rank is None else rank
    G = rng.normal(size=(N, k)) + 1j * rng.normal(size=(N, k))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def partial_trace_bath(A, n_sys: int, n_bath: int) -> np.ndarray:
    """Trace out the second (bath) factor; composite index is ``i*n_bath + alpha``."""
    A = np.asarray(A).reshape(n_sys, n_bath, n_sys, n_bath)
    return np.einsum("iaja->ij", A)
