import math

import numpy as np
import pytest

from liouflow.core import (
    Superoperator,
    ValidationError,
    from_coords,
    hermitian_basis,
    operator_coords,
    partial_trace_bath,
    random_density,
    random_hermitian,
    unvec,
    vec,
)
from liouflow.flow import compressibility_numeric
from liouflow.nonmarkovian import (
    CompositeModel,
    interaction_liouvillian,
    kernel_K,
    kernel_contraction,
    nz_compressibility,
    nz_compressibility_series,
    projector_P,
    projector_Q,
    propagator_G,
    random_model,
    reduced_kernel_map,
    thermal_state,
)

ALG = 1e-12


def fd_oracle(model, t):
    """-div of sigma_S -> Tr_B{P L Q L P (sigma_S x rho_B)} built from plain matrix commutators."""
    ns, nb, rho_B = model.n_sys, model.n_bath, model.rho_B
    V = model.V_at(t)
    basis = hermitian_basis(ns)

    def reduced(sig):
        X = -1j * (V @ np.kron(sig, rho_B) - np.kron(sig, rho_B) @ V)
        Y = X - np.kron(partial_trace_bath(X, ns, nb), rho_B)
        Z = -1j * (V @ Y - Y @ V)
        return partial_trace_bath(Z, ns, nb)

    def velocity(c):
        return operator_coords(reduced(from_coords(c, basis)), basis)

    # the map is linear, so a large step is exact up to rounding
    return compressibility_numeric(velocity, np.zeros(ns * ns - 1), h=0.1)


def dephasing_model(rng, nb=3):
    H_B = random_hermitian(nb, rng)
    rho_B = thermal_state(H_B, 0.7)
    B = random_hermitian(nb, rng)
    B -= np.trace(B @ rho_B).real * np.eye(nb)
    Sz = hermitian_basis(2).elements[3]
    return CompositeModel(2, nb, random_hermitian(2, rng), H_B, np.kron(Sz, B), rho_B)


def zero_coupling(rng, ns=2, nb=2):
    H_B = random_hermitian(nb, rng)
    return CompositeModel(ns, nb, random_hermitian(ns, rng), H_B, np.zeros((ns * nb,) * 2),
                          thermal_state(H_B, 1.0))


# -- model construction -------------------------------------------------------

def test_model_validation(rng):
    H_B = random_hermitian(2, rng)
    rho = thermal_state(H_B, 1.0)
    with pytest.raises(ValidationError):
        CompositeModel(2, 2, np.eye(2), H_B, np.zeros((3, 3)), rho)
    with pytest.raises(ValidationError):
        CompositeModel(2, 2, np.eye(2), H_B, np.zeros((4, 4)), np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        # not stationary: random density does not commute with a random H_B
        CompositeModel(2, 2, np.eye(2), H_B, np.zeros((4, 4)), random_density(2, rng))
    with pytest.raises(ValidationError):
        CompositeModel(2, 2, np.array([[0, 1], [0, 0]]), H_B, np.zeros((4, 4)), rho)


def test_thermal_state_properties(rng):
    H = random_hermitian(4, rng)
    rho = thermal_state(H, 2.0)
    assert np.isclose(np.trace(rho), 1)
    assert np.allclose(H @ rho, rho @ H, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > 0


def test_centering_removes_mean_field(rng):
    model = random_model(2, 3, rng, center=False)
    assert np.abs(model.mean_field()).max() > 1e-3
    assert np.abs(model.centered().mean_field()).max() < 1e-12


def test_interaction_picture(rng):
    model = random_model(2, 2, rng)
    H0 = np.kron(model.H_S, np.eye(2)) + np.kron(np.eye(2), model.H_B)
    E, U = np.linalg.eigh(H0)
    t = 0.37
    Ut = U @ np.diag(np.exp(-1j * E * t)) @ U.conj().T
    assert np.allclose(model.V_at(t), Ut.conj().T @ model.V @ Ut, atol=1e-12)
    assert np.array_equal(model.V_at(0.0), model.V)


# -- projectors ---------------------------------------------------------------

@pytest.mark.parametrize("ns, nb", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_projector_algebra(rng, ns, nb):
    model = random_model(ns, nb, rng)
    P, Q = projector_P(model).matrix, projector_Q(model).matrix
    I = np.eye(P.shape[0])
    assert np.abs(P @ P - P).max() < ALG
    assert np.abs(Q @ Q - Q).max() < ALG
    assert np.abs(P @ Q).max() < ALG
    assert np.abs(Q @ P).max() < ALG
    assert np.abs(P + Q - I).max() < ALG


def test_product_state_fixed_point(rng):
    model = random_model(2, 3, rng)
    sigma = np.kron(random_density(2, rng), model.rho_B)
    assert np.allclose(projector_P(model).apply(sigma), sigma, atol=ALG)


def test_projector_replaces_bath_state(rng):
    model = random_model(2, 3, rng)
    sig_S = random_density(2, rng)
    other = random_density(3, rng)
    out = projector_P(model).apply(np.kron(sig_S, other))
    assert np.allclose(out, np.kron(sig_S, model.rho_B), atol=ALG)


def test_projector_preserves_trace(rng):
    model = random_model(3, 2, rng)
    sigma = random_density(6, rng)
    assert math.isclose(np.trace(projector_P(model).apply(sigma)).real, 1.0, rel_tol=1e-12)


# -- Liouvillian and propagator ----------------------------------------------

def test_liouvillian_zero_and_identity(rng):
    assert np.all(interaction_liouvillian(zero_coupling(rng), 0.5).matrix == 0)
    model = random_model(2, 2, rng)
    for t in (0.0, 0.8, 3.1):
        L = interaction_liouvillian(model, t)
        assert np.abs(L.apply(np.eye(4))).max() < ALG


def test_liouvillian_at_zero_is_bare_commutator(rng):
    model = random_model(2, 2, rng)
    sigma = random_density(4, rng)
    expected = -1j * (model.V @ sigma - sigma @ model.V)
    assert np.allclose(interaction_liouvillian(model, 0.0).apply(sigma), expected, atol=ALG)
    bare = interaction_liouvillian(model, 0.0, prefactor=False).apply(sigma)
    assert np.allclose(bare, model.V @ sigma - sigma @ model.V, atol=ALG)


def test_centered_PLP_vanishes(rng):
    model = random_model(2, 3, rng)
    P = projector_P(model)
    for t in (0.0, 0.6):
        assert np.abs((P @ interaction_liouvillian(model, t) @ P).matrix).max() < 1e-12


def test_propagator_trivial_cases(rng):
    model = random_model(2, 2, rng)
    assert np.array_equal(propagator_G(model, 0.4, 0.4).matrix, np.eye(16))
    assert np.allclose(propagator_G(zero_coupling(rng), 1.0, 0.0, dt=0.05).matrix, np.eye(16))
    with pytest.raises(ValidationError):
        propagator_G(model, 0.1, 0.2)


def test_propagator_composition_fourth_order(rng):
    model = random_model(2, 2, rng, coupling=0.5)
    s, r, t = 0.0, 0.3, 0.7
    errs = []
    for dt in (0.05, 0.025):
        two = propagator_G(model, t, r, dt) @ propagator_G(model, r, s, dt)
        one = propagator_G(model, t, s, dt)
        errs.append(np.abs((two - one).matrix).max())
    ref = propagator_G(model, t, s, 1e-3).matrix
    conv = [np.abs(propagator_G(model, t, s, dt).matrix - ref).max() for dt in (0.1, 0.05)]
    assert conv[0] / conv[1] > 12  # 2^4 = 16 for fourth order
    assert errs[1] < 1e-5


# -- kernel -------------------------------------------------------------------

def test_zero_coupling_kernel(rng):
    model = zero_coupling(rng)
    ev = kernel_K(model, 0.5, 0.2, dt=0.05)
    assert np.all(ev.K.matrix == 0)
    assert ev.compressibility == 0.0
    assert nz_compressibility(model, 0.3) == 0.0


def test_equal_time_kernel_is_direct_product(rng):
    model = random_model(2, 2, rng)
    t = 0.4
    P = projector_P(model)
    Q = projector_Q(model)
    L = interaction_liouvillian(model, t)
    assert np.allclose(kernel_K(model, t, t).K.matrix, (P @ L @ Q @ L @ P).matrix, atol=ALG)


def test_kernel_projector_sandwich(rng):
    model = random_model(2, 2, rng)
    P = projector_P(model)
    K = kernel_K(model, 0.5, 0.1, dt=0.01).K
    assert np.abs((P @ K @ P - K).matrix).max() < 1e-12


def test_contraction_matches_reduced_trace(rng):
    # the index contraction is the superoperator trace of the reduced map
    model = random_model(2, 3, rng)
    K = kernel_K(model, 0.3, 0.3).K
    R = reduced_kernel_map(model, 0.3)
    total = sum(R(np.outer(np.eye(2)[i], np.eye(2)[j]))[i, j] for i in range(2) for j in range(2))
    assert np.isclose(kernel_contraction(K, model), total, atol=1e-12)


def test_dephasing_matches_oracle(rng):
    model = dephasing_model(rng)
    for t in (0.0, 0.5, 1.3):
        val = nz_compressibility(model, t)
        assert abs(val - fd_oracle(model, t)) <= 1e-8 * max(1.0, abs(val))


def test_random_models_match_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        model = random_model(2, 2, rng)
        t = float(rng.uniform(0, 2))
        val = nz_compressibility(model, t)
        assert abs(val - fd_oracle(model, t)) <= 1e-6 * abs(val)


def test_larger_system_matches_oracle(rng):
    model = random_model(3, 2, rng)
    val = nz_compressibility(model, 0.2)
    assert abs(val - fd_oracle(model, 0.2)) <= 1e-6 * abs(val)


def test_quadratic_coupling_scaling(rng):
    model = random_model(2, 2, rng)
    base = nz_compressibility(model, 0.7)
    for lam in (2.0, 0.3):
        scaled = nz_compressibility(model.scaled(lam), 0.7)
        assert math.isclose(scaled, lam**2 * base, rel_tol=1e-8)


def test_prefactor_flag_flips_sign(rng):
    # two factors of -i give -1
    model = random_model(2, 2, rng)
    with_i = nz_compressibility(model, 0.2, prefactor=True)
    without = nz_compressibility(model, 0.2, prefactor=False)
    assert math.isclose(with_i, -without, rel_tol=1e-12)


def test_series(rng):
    model = random_model(2, 2, rng)
    out = nz_compressibility_series(model, [0.0, 0.5])
    assert out.shape == (2,)
    assert math.isclose(out[1], nz_compressibility(model, 0.5))


def test_superoperator_vec_roundtrip(rng):
    A = random_hermitian(4, rng)
    assert np.array_equal(unvec(vec(A)), A)
    S = Superoperator.from_map(lambda X: 2 * X, 4)
    assert np.allclose(S.matrix, 2 * np.eye(16))
