"""Test Lindblad generators, steady states and time evolution"""
import sys
from pathlib import Path

# Add jcdyn to path
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

from jcdyn.errors import DegenerateSteadyStateError
from jcdyn.liouville import (
    Superoperator,
    dissipator,
    effective_hamiltonian,
    evolve,
    full_liouvillian,
    is_phase_covariant,
    no_gain_liouvillian,
    number_superop,
    sector_indices,
    steady_state,
    trace_distance,
    unvec,
    vec,
)
from jcdyn.operators import DensityMatrix, SystemParams, bare_operators, build_space
from jcdyn.thermal import DEVICE_MODEL, system_params_at

DEVICE = SystemParams(g=0.3, kappa=0.1, gamma_x=0.001, P_x=0.06, P_theta=0.0, omega_x=0.0, omega_c=0.0)


def rotating(params: SystemParams) -> SystemParams:
    """Same physics with omega_c moved to zero"""
    return params.replace(omega_x=params.delta, omega_c=0.0)


def device_at(T: float) -> SystemParams:
    return system_params_at(T, DEVICE, DEVICE_MODEL)


def match_error(a: np.ndarray, b: np.ndarray) -> float:
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def test_vectorization_is_column_stacking():
    rng = np.random.default_rng(1)
    a, rho, b = (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) for _ in range(3))
    assert np.allclose(vec(a @ rho @ b), np.kron(b.T, a) @ vec(rho))
    assert np.array_equal(unvec(vec(rho), 4), rho)
    assert vec(np.array([[1, 2], [3, 4]])).tolist() == [1, 3, 2, 4]


def test_cavity_dissipator_on_one_photon():
    space = build_space(1)
    ops = bare_operators(space)
    rho = DensityMatrix.pure(space, 1, 0).mat
    out = dissipator(ops.a).apply(rho)
    expected = np.zeros((4, 4))
    expected[space.index(0, 0), space.index(0, 0)] = 2
    expected[space.index(1, 0), space.index(1, 0)] = -2
    assert np.allclose(out, expected)


def test_phonon_dissipator_gain_term():
    space = build_space(2)
    ops = bare_operators(space)
    x = ops.sigma @ ops.a.dag()
    rho = DensityMatrix.pure(space, 1, 1).mat
    out = dissipator(x).apply(rho)
    expected = np.zeros((space.dim, space.dim))
    expected[space.index(2, 0), space.index(2, 0)] = 4
    expected[space.index(1, 1), space.index(1, 1)] = -4
    assert np.allclose(out, expected)


@given(seed=st.integers(0, 2 ** 32 - 1), which=st.sampled_from(["a", "sigma", "phonon", "random"]))
@settings(max_examples=30, deadline=None)
def test_dissipator_is_traceless(seed, which):
    space = build_space(3)
    ops = bare_operators(space)
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(space.dim, space.dim)) + 1j * rng.normal(size=(space.dim, space.dim))
    x = {
        "a": ops.a,
        "sigma": ops.sigma,
        "phonon": ops.sigma @ ops.a.dag(),
        "random": type(ops.a)(space, m),
    }[which]
    rho = m + m.conj().T
    assert abs(np.trace(dissipator(x).apply(rho))) < 1e-10 * max(1.0, np.abs(m).max() ** 3)


def test_full_liouvillian_preserves_trace_and_hermiticity():
    space = build_space(6)
    gen = full_liouvillian(space, device_at(20.0))
    norm = np.abs(gen.mat).max()
    assert np.abs(gen.trace_row()).max() <= 1e-10 * norm
    s = gen.swap()
    assert np.allclose(gen.mat, s @ gen.mat.conj() @ s, atol=1e-12 * norm)
    assert is_phase_covariant(gen)


def test_closed_system_has_imaginary_spectrum():
    space = build_space(3)
    params = SystemParams(g=0.0, kappa=0.0, gamma_x=0.0, P_x=0.0, P_theta=0.0, omega_x=1.1, omega_c=1.0)
    gen = full_liouvillian(space, params)
    assert np.abs(gen.eigvals().real).max() < 1e-12


def test_cavity_decay_under_evolution():
    space = build_space(3)
    params = SystemParams(g=0.0, kappa=0.1, gamma_x=0.0, P_x=0.0, P_theta=0.0, omega_x=0.5, omega_c=0.0)
    gen = full_liouvillian(space, params)
    n_phot = bare_operators(space).n_phot
    rho0 = DensityMatrix.pure(space, 2, 0)
    for t in (0.0, 1.0, 5.0, 20.0):
        rho = evolve(gen, rho0, t)
        assert n_phot.expect(rho).real == pytest.approx(2 * np.exp(-0.1 * t), abs=1e-8)


def test_evolve_identity_and_semigroup():
    space = build_space(4)
    gen = full_liouvillian(space, rotating(device_at(30.0)))
    rho0 = DensityMatrix.random(space, np.random.default_rng(7))
    assert evolve(gen, rho0, 0.0) is rho0
    once = evolve(gen, rho0, 3.5)
    twice = evolve(gen, evolve(gen, rho0, 1.5), 2.0)
    assert np.abs(once.mat - twice.mat).max() < 1e-8
    with pytest.raises(ValueError):
        evolve(gen, rho0, -1.0)


def test_trace_and_hermiticity_over_long_times():
    space = build_space(4)
    gen = full_liouvillian(space, rotating(device_at(20.0)))
    rho0 = DensityMatrix.random(space, np.random.default_rng(3))
    for t in (10.0, 100.0, 1000.0):
        rho = evolve(gen, rho0, t)
        assert abs(np.trace(rho.mat) - 1) < 1e-10


def test_steady_state_empty_cavity():
    space = build_space(3)
    params = SystemParams(g=0.0, kappa=0.1, gamma_x=0.001, P_x=0.0, P_theta=0.0, omega_x=0.2, omega_c=0.0)
    rho = steady_state(full_liouvillian(space, params))
    assert np.allclose(rho.mat, DensityMatrix.ground(space).mat, atol=1e-12)


def test_steady_state_two_level_balance():
    space = build_space(2)
    params = SystemParams(g=0.0, kappa=0.1, gamma_x=0.001, P_x=0.06, P_theta=0.0, omega_x=0.2, omega_c=0.0)
    rho = steady_state(full_liouvillian(space, params))
    excited = bare_operators(space).n_exciton.expect(rho).real
    assert excited == pytest.approx(0.06 / 0.061, abs=1e-10)


def test_steady_state_device_point_is_unique_and_stationary():
    space = build_space(10)
    gen = full_liouvillian(space, device_at(20.0))
    rho = steady_state(gen)
    residual = gen.mat @ vec(rho.mat)
    assert np.abs(residual).max() < 1e-10 * np.abs(gen.mat).max()
    n_mean = bare_operators(space).n_phot.expect(rho).real
    assert 0 < n_mean < 2


def test_steady_state_frame_independent():
    space = build_space(5)
    lab = steady_state(full_liouvillian(space, device_at(25.0)))
    rot = steady_state(full_liouvillian(space, rotating(device_at(25.0))))
    assert trace_distance(lab, rot) < 1e-8


def test_steady_state_attracts_random_states():
    space = build_space(5)
    params = rotating(device_at(20.0))
    gen = full_liouvillian(space, params)
    rho_ss = steady_state(gen)
    t = 50.0 / min(params.kappa, params.gamma_x + params.P_x)
    rng = np.random.default_rng(11)
    for _ in range(2):
        rho = evolve(gen, DensityMatrix.random(space, rng), t)
        assert trace_distance(rho, rho_ss) < 1e-6


def test_degenerate_steady_state_is_an_error():
    space = build_space(2)
    params = SystemParams(g=0.0, kappa=0.0, gamma_x=0.0, P_x=0.0, P_theta=0.0, omega_x=0.2, omega_c=0.0)
    with pytest.raises(DegenerateSteadyStateError):
        steady_state(full_liouvillian(space, params))


def test_no_gain_spectrum_from_effective_hamiltonian():
    space = build_space(2)
    params = SystemParams(g=0.3, kappa=0.1, gamma_x=0.02, P_x=0.0, P_theta=0.0, omega_x=0.15, omega_c=0.0)
    gen = no_gain_liouvillian(space, params)
    energies = np.linalg.eigvals(effective_hamiltonian(space, params).mat)
    expected = np.array([-1j * (ej - np.conj(ek)) for ej in energies for ek in energies])
    assert match_error(gen.eigvals(), expected) < 1e-10


def test_no_gain_is_block_diagonal_and_decaying():
    space = build_space(4)
    params = SystemParams(g=0.3, kappa=0.1, gamma_x=0.001, P_x=0.06, P_theta=0.4, omega_x=0.1, omega_c=0.0)
    gen = no_gain_liouvillian(space, params)
    n_sup = number_superop(space).mat
    assert np.abs(gen.mat @ n_sup - n_sup @ gen.mat).max() < 1e-12
    assert is_phase_covariant(gen)
    assert gen.eigvals().real.max() <= 1e-12


def test_no_gain_sector_sizes():
    space = build_space(4)
    d = space.dim
    for n in range(1, space.n_max + 1):
        rung_n = [space.index(n, 0), space.index(n - 1, 1)]
        rung_m = [space.index(n - 1, 0)] + ([space.index(n - 2, 1)] if n >= 2 else [])
        idx = {i + j * d for i in rung_n for j in rung_m}
        assert len(idx) == (2 if n == 1 else 4)
        assert idx <= set(sector_indices(space, 1).tolist())


def test_superoperator_shape_is_checked():
    with pytest.raises(ValueError):
        Superoperator(build_space(1), np.eye(4))
