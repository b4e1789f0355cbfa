import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liouflow.classical import (
    PhaseState,
    classical_density_at,
    classical_pushforward,
    damped_harmonic_flow,
    harmonic_flow,
    phase_gaussian,
)
from liouflow.core import ValidationError
from liouflow.ensemble import sample
from liouflow.flow import compressibility_numeric

W = 1.3


def test_harmonic_velocity():
    assert np.allclose(harmonic_flow(1.0, W)([1.0, 0.0]), [0.0, -W])


def test_damped_velocity():
    assert np.allclose(damped_harmonic_flow(1.0, W, W / 2)([0.0, 1.0]), [W, -W / 2])


def test_kappa_values_and_fd_oracle():
    assert harmonic_flow(2.0, W).kappa == 0.0
    fld = damped_harmonic_flow(2.0, W, W / 2)
    assert math.isclose(fld.kappa, W / 2, rel_tol=1e-15)
    for x in ([0.3, -0.2], [1.5, 2.0], [0.0, 0.0]):
        assert math.isclose(compressibility_numeric(fld, x), W / 2, rel_tol=1e-9)


def test_multi_dof_kappa():
    fld = damped_harmonic_flow(1.0, W, 0.2, n_dof=3)
    assert fld.n_coords == 6
    assert math.isclose(fld.kappa, 0.6, rel_tol=1e-14)


def test_full_period_identity():
    fld = harmonic_flow(1.0, W)
    M, d = fld.flow_map(2 * math.pi / W)
    assert np.allclose(M, np.eye(2), atol=1e-12)
    assert np.all(d == 0)


def test_pushforward_is_exact_rotation():
    fld = harmonic_flow(1.0, W)
    pts = np.array([[1.0, 0.0], [0.3, -0.4]])
    t = 0.7
    wt = W * t
    R = np.array([[math.cos(wt), math.sin(wt)], [-math.sin(wt), math.cos(wt)]])
    assert np.allclose(classical_pushforward(pts, fld, t), pts @ R.T, atol=1e-14)


def test_damped_spiral_converges_to_origin():
    fld = damped_harmonic_flow(1.0, W, W / 2)
    x = classical_pushforward(np.array([[1.0, 0.0]]), fld, 60.0)
    assert np.linalg.norm(x) < 1e-6


def test_damped_matches_closed_form():
    # underdamped solution with friction on the momentum coordinate only
    g = W / 2
    fld = damped_harmonic_flow(1.0, W, g)
    wd = math.sqrt(W**2 - g**2 / 4)
    t = 1.9
    q0, p0 = 0.4, -0.7
    # q'' + g q' + W^2 q = 0 with q'(0) = W p0
    A = q0
    B = (W * p0 + g / 2 * q0) / wd
    env = math.exp(-g * t / 2)
    q = env * (A * math.cos(wd * t) + B * math.sin(wd * t))
    qdot = env * (-g / 2 * (A * math.cos(wd * t) + B * math.sin(wd * t))
                  + wd * (-A * math.sin(wd * t) + B * math.cos(wd * t)))
    assert np.allclose(fld.evolve([q0, p0], t), [q, qdot / W], atol=1e-12)


@pytest.mark.parametrize("t", [0.5, 2.0, 4.8])
def test_harmonic_density_constant(t):
    fld = harmonic_flow(1.0, W)
    dist = phase_gaussian([0.5, 0.1], [[0.2, 0.05], [0.05, 0.1]])
    x0 = np.array([[0.3, 0.2], [-0.5, 0.9]])
    xt = fld.evolve(x0, t)
    assert np.allclose(classical_density_at(dist, fld, xt, t), dist.pdf(x0), rtol=1e-10)


@pytest.mark.parametrize("t", [0.5, 2.0, 4.8])
def test_damped_density_grows(t):
    g = W / 2
    fld = damped_harmonic_flow(1.0, W, g)
    dist = phase_gaussian([0.5, 0.1], [[0.2, 0.05], [0.05, 0.1]])
    x0 = np.array([[0.3, 0.2], [-0.5, 0.9]])
    xt = fld.evolve(x0, t)
    ratio = classical_density_at(dist, fld, xt, t) / dist.pdf(x0)
    assert np.allclose(ratio, math.exp(g * t), rtol=1e-8)


def test_sample_ensemble_pushforward():
    fld = damped_harmonic_flow(1.0, W, 0.3)
    ens = sample(phase_gaussian([1.0, 0.0], 0.01 * np.eye(2)), 1000, seed=0)
    out = classical_pushforward(ens, fld, 1.0)
    assert np.allclose(out.points, fld.evolve(ens.points, 1.0))
    assert out.seed == ens.seed


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5))
def test_symmetrize_roundtrip(m, w, q, p):
    s = PhaseState(q, p)
    back = s.symmetrize(m, w).unsymmetrize(m, w)
    assert np.allclose(back.q, s.q) and np.allclose(back.p, s.p)
    sym = s.symmetrize(m, w)
    # energy becomes w (q~^2 + p~^2) / 2
    energy = p**2 / (2 * m) + m * w**2 * q**2 / 2
    assert math.isclose(w * (sym.q[0] ** 2 + sym.p[0] ** 2) / 2, energy, rel_tol=1e-10, abs_tol=1e-12)


def test_phase_state_shapes():
    with pytest.raises(ValidationError):
        PhaseState([1.0, 2.0], [1.0])
    assert np.array_equal(PhaseState([1.0], [2.0]).as_vector(), [1.0, 2.0])


@pytest.mark.parametrize("m, w", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_bad_parameters(m, w):
    with pytest.raises(ValidationError):
        harmonic_flow(m, w)


def test_bad_damping():
    with pytest.raises(ValidationError):
        damped_harmonic_flow(1.0, 1.0, -0.1)
    with pytest.raises(ValidationError):
        damped_harmonic_flow(1.0, 1.0, 0.1, dissipator=np.diag([-1.0, 0.0]))
    with pytest.raises(ValidationError):
        damped_harmonic_flow(1.0, 1.0, 0.1, dissipator=np.eye(3))


def test_custom_dissipator_kappa():
    fld = damped_harmonic_flow(1.0, 1.0, 0.0, dissipator=np.diag([0.2, 0.3]))
    assert math.isclose(fld.kappa, 0.5)
