import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from liouflow.core import (
    ShapeError,
    Superoperator,
    ValidationError,
    check_density,
    from_coords,
    hermitian_basis,
    operator_coords,
    random_density,
    to_coords,
    trace_inner,
    unvec,
    vec,
)

finite = st.floats(-10, 10, allow_nan=False)


@pytest.mark.parametrize("N", [2, 3, 4, 5])
def test_basis_orthonormal_hermitian(N):
    basis = hermitian_basis(N)
    assert basis.elements.shape == (N * N, N, N)
    assert np.allclose(basis.gram(), np.eye(N * N), atol=1e-12, rtol=0)
    for B in basis.elements:
        assert np.allclose(B, B.conj().T, atol=0)
    assert np.allclose(basis.elements[0], np.eye(N) / np.sqrt(N))
    assert np.allclose([np.trace(B) for B in basis.traceless], 0, atol=1e-15)


def test_pauli_basis_matches_normalized_pauli():
    I, Sx, Sy, Sz = hermitian_basis(2).elements
    r = 1 / np.sqrt(2)
    assert np.allclose(Sx, r * np.array([[0, 1], [1, 0]]))
    assert np.allclose(Sy, r * np.array([[0, -1j], [1j, 0]]))
    # (|2><2| - |1><1|)/sqrt2 with |1> the first basis vector
    assert np.allclose(Sz, r * np.array([[-1, 0], [0, 1]]))


def test_three_level_order():
    E = hermitian_basis(3).elements
    r = 1 / np.sqrt(2)
    # symmetric (0,1),(0,2),(1,2) then antisymmetric, then diagonal
    assert E[1][0, 1] == r and E[2][0, 2] == r and E[3][1, 2] == r
    assert E[4][0, 1] == -1j * r and E[6][1, 2] == -1j * r
    assert np.allclose(np.diag(E[8]).real, np.array([-1, -1, 2]) / np.sqrt(6))


@pytest.mark.parametrize("N", [1, 0, -3, 2.5])
def test_basis_rejects_bad_dimension(N):
    with pytest.raises(ValidationError):
        hermitian_basis(N)


def test_trace_inner_examples():
    _, Sx, Sy, _ = hermitian_basis(2).elements
    assert trace_inner(Sx, Sx) == pytest.approx(1)
    assert trace_inner(Sx, Sy) == pytest.approx(0)
    sigma = random_density(2, np.random.default_rng(0))
    assert trace_inner(np.eye(2) / np.sqrt(2), sigma) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ShapeError):
        trace_inner(np.eye(2), np.eye(3))


@given(arrays(complex, (3, 3), elements=st.complex_numbers(max_magnitude=5, allow_nan=False)),
       arrays(complex, (3, 3), elements=st.complex_numbers(max_magnitude=5, allow_nan=False)))
def test_trace_inner_conjugate_symmetric(A, B):
    assert trace_inner(A, B) == pytest.approx(np.conj(trace_inner(B, A)), abs=1e-9)


def test_to_coords_examples():
    b = hermitian_basis(2)
    assert np.allclose(to_coords(np.diag([1, 0]), b), [0, 0, -1])
    assert np.allclose(to_coords(np.eye(2) / 2, b), [0, 0, 0])
    plus = np.array([1, 1]) / np.sqrt(2)
    # (|1>+|2>)(<1|+<2|)/2 = (I + X)/2 by direct expansion
    assert np.allclose(to_coords(np.outer(plus, plus), b), [1, 0, 0], atol=1e-15)
    with pytest.raises(ValidationError):
        to_coords(np.array([[1, 1], [0, 0]]), b)


def test_from_coords_examples():
    b = hermitian_basis(2)
    assert np.allclose(from_coords([0, 0, 0], b), np.eye(2) / 2)
    assert np.allclose(from_coords([0, 0, 1], b), np.diag([0, 1]))
    out = from_coords([2, 0, 0], b)
    assert np.allclose(out, out.conj().T) and np.trace(out) == pytest.approx(1)
    # eigenvalues (1 +- 2)/2
    assert np.allclose(np.linalg.eigvalsh(out), [-0.5, 1.5])
    assert not check_density(out).passed


@pytest.mark.parametrize("N", [2, 3, 4])
def test_round_trip_on_random_states(N, rng):
    b = hermitian_basis(N)
    for _ in range(20):
        rho = random_density(N, rng)
        assert np.allclose(from_coords(to_coords(rho, b), b), rho, atol=1e-12, rtol=0)
        c = to_coords(rho, b)
        assert np.allclose(to_coords(from_coords(c, b), b), c, atol=1e-12, rtol=0)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_coordinate_isometry(N, rng):
    b = hermitian_basis(N)
    for _ in range(10):
        a, c = rng.normal(size=(2, N * N - 1))
        A = from_coords(a, b) - np.eye(N) / N
        C = from_coords(c, b) - np.eye(N) / N
        assert trace_inner(A, C).real == pytest.approx(a @ c / N, abs=1e-12)


def test_bloch_ball_validity():
    b = hermitian_basis(2)
    for c in ([0.6, 0, 0.8], [0, 0, -1], [0.1, 0.2, 0.3]):
        assert check_density(from_coords(c, b)).passed
    assert not check_density(from_coords([0.6, 0.1, 0.8], b)).passed


def test_vec_examples(rng):
    assert np.array_equal(vec(np.eye(2)), [1, 0, 0, 1])
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.array_equal(unvec(vec(A)), A)
    # column stacking: vec(A)[i + j*n] == A[i, j]
    assert vec(A)[1 + 2 * 3] == A[1, 2]
    with pytest.raises(ShapeError):
        unvec(np.arange(5))


@settings(max_examples=50)
@given(arrays(float, (3, 2, 2), elements=finite))
def test_vec_kronecker_identity(mats):
    X, A, Y = mats
    assert np.allclose(vec(X @ A @ Y), np.kron(Y.T, X) @ vec(A), atol=1e-12 * max(1, np.abs(mats).max() ** 3))


def test_vec_kronecker_identity_complex(rng):
    X, A, Y = rng.normal(size=(3, 4, 4)) + 1j * rng.normal(size=(3, 4, 4))
    assert np.abs(vec(X @ A @ Y) - np.kron(Y.T, X) @ vec(A)).max() < 1e-12


def test_superoperator_algebra(rng):
    X, Y = rng.normal(size=(2, 3, 3))
    SX = Superoperator.from_map(lambda a: X @ a, 3)
    SY = Superoperator.from_map(lambda a: a @ Y, 3)
    A = rng.normal(size=(3, 3))
    assert np.allclose((SX @ SY).apply(A), X @ A @ Y)
    assert np.array_equal(Superoperator.identity(3).matrix, np.eye(9))
    with pytest.raises(ShapeError):
        Superoperator(2, np.eye(3))


def test_check_density_diagnostics():
    ok = check_density(np.eye(2) / 2)
    assert ok.passed and ok.min_eigenvalue == pytest.approx(0.5)
    bad = check_density(np.diag([1.5, -0.5]))
    assert not bad.passed and bad.trace_deviation == 0 and bad.min_eigenvalue == pytest.approx(-0.5)
    nonherm = check_density(np.array([[0.5, 0.1], [0.0, 0.5]]))
    assert not nonherm.passed and nonherm.hermiticity == pytest.approx(0.1)


def test_operator_coords_traceless_part(rng):
    b = hermitian_basis(3)
    c = rng.normal(size=8)
    A = from_coords(c, b) - np.eye(3) / 3
    assert np.allclose(operator_coords(A, b), c)
