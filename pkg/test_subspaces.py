"""Test one-photon transition sectors, branch labels and exceptional points"""
import sys
from pathlib import Path

# Add jcdyn to path
sys.path.insert(0, str(Path(__file__).parent))

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jcdyn.errors import LabelAmbiguityError
from jcdyn.liouville import effective_hamiltonian, no_gain_liouvillian
from jcdyn.operators import SystemParams, build_space
from jcdyn.subspaces import (
    EP_PAIR,
    SubspaceParams,
    bare_coefficients,
    classify_discrepancy,
    coherence_components,
    compare_printed_vs_oracle,
    exceptional_point,
    find_coalescence,
    ngl_eigen,
    ngl_matrix,
    oracle_block,
    resonance_state_position,
    toy_ep_matrix,
    track_branches,
)

G, KAPPA, GAMMA = 0.3, 0.1, 0.001


def block_params(n: int, P_theta: float = 0.0, Delta: float = 0.0) -> SubspaceParams:
    return SubspaceParams(n=n, g=G, kappa=KAPPA, gamma_x=GAMMA, P_theta=P_theta, Delta=Delta)


def nearest_distance(values: np.ndarray, pool: np.ndarray) -> float:
    return float(max(np.abs(pool - v).min() for v in values))


def test_params_validation():
    with pytest.raises(ValueError):
        block_params(0)
    with pytest.raises(ValueError):
        replace(block_params(1), kappa=-0.1)
    sp = SubspaceParams.from_system(
        2, SystemParams(g=0.3, kappa=0.1, gamma_x=0.001, P_x=0.06, P_theta=0.2, omega_x=1.25, omega_c=1.0)
    )
    assert sp.Delta == pytest.approx(0.25)
    assert sp.P_theta == 0.2 and sp.n == 2


def test_coherence_components():
    assert coherence_components(1) == [((1, 0), (0, 0)), ((0, 1), (0, 0))]
    assert coherence_components(3) == [
        ((3, 0), (2, 0)), ((2, 1), (2, 0)), ((3, 0), (1, 1)), ((2, 1), (1, 1)),
    ]


def test_printed_matrix_uncoupled_is_diagonal():
    p = SubspaceParams(n=1, g=0.0, kappa=KAPPA, gamma_x=GAMMA, P_theta=0.2, Delta=0.0)
    m = ngl_matrix(p)
    expected = [(KAPPA - 0.2) / 2, (GAMMA - 0.2) / 2, (2 * KAPPA - GAMMA) / 2, KAPPA / 2]
    assert np.allclose(m, np.diag(expected), atol=1e-15)


def test_printed_matrix_corner_term():
    m = ngl_matrix(block_params(2, P_theta=0.4))
    assert m[3, 0] == pytest.approx(math.sqrt(2) * 0.4)
    assert ngl_matrix(block_params(1, P_theta=0.4))[3, 0] == 0


def test_printed_matrix_first_rung_splitting():
    lam = np.linalg.eigvals(ngl_matrix(block_params(1)))
    assert np.allclose(np.abs(lam.imag), G, atol=0.01)


def test_oracle_first_rung_closed_form():
    P = 0.4
    block = oracle_block(block_params(1, P_theta=P))
    assert block.shape == (2, 2)
    assert block[0, 0] == pytest.approx(KAPPA / 2)
    assert block[1, 1] == pytest.approx((GAMMA + P) / 2)
    assert abs(block[0, 1]) == pytest.approx(G)
    assert abs(block[1, 0]) == pytest.approx(G)


def test_oracle_uncoupled_rates():
    p = SubspaceParams(n=1, g=0.0, kappa=KAPPA, gamma_x=GAMMA, P_theta=0.3, Delta=0.0)
    lam = np.sort(np.linalg.eigvals(oracle_block(p)).real)
    assert np.allclose(lam, sorted([KAPPA / 2, (GAMMA + 0.3) / 2]), atol=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_oracle_independent_of_cutoff(n):
    p = block_params(n, P_theta=0.7, Delta=0.1)
    assert np.abs(oracle_block(p) - oracle_block(p, n_max=n + 3)).max() < 1e-12


def test_oracle_rejects_small_cutoff():
    with pytest.raises(ValueError):
        oracle_block(block_params(3), n_max=2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_oracle_without_phonons_is_dressed_energy_differences(n):
    Delta = 0.12
    p = block_params(n, Delta=Delta)
    space = build_space(n + 1)
    k = effective_hamiltonian(space, SystemParams(g=G, kappa=KAPPA, gamma_x=GAMMA, P_x=0.0, P_theta=0.0,
                                                  omega_x=Delta, omega_c=0.0)).mat

    def rung(m):
        idx = [space.index(m, 0)] + ([space.index(m - 1, 1)] if m >= 1 else [])
        return np.linalg.eigvals(k[np.ix_(idx, idx)])

    expected = np.array([1j * (ej - np.conj(ek)) for ej in rung(n) for ek in rung(n - 1)])
    lam = np.linalg.eigvals(oracle_block(p))
    assert lam.size == expected.size
    assert nearest_distance(lam, expected) < 1e-10
    assert nearest_distance(expected, lam) < 1e-10


@given(
    n=st.integers(1, 3),
    g=st.floats(0.05, 0.5),
    kappa=st.floats(0.0, 0.3),
    gamma_x=st.floats(0.0, 0.05),
    P_theta=st.floats(0.0, 2.0),
    Delta=st.floats(-0.5, 0.5),
)
@settings(max_examples=20, deadline=None)
def test_oracle_eigenvalues_belong_to_full_generator(n, g, kappa, gamma_x, P_theta, Delta):
    p = SubspaceParams(n=n, g=g, kappa=kappa, gamma_x=gamma_x, P_theta=P_theta, Delta=Delta)
    params = SystemParams(g=g, kappa=kappa, gamma_x=gamma_x, P_x=0.0, P_theta=P_theta,
                          omega_x=Delta, omega_c=0.0)
    full = -no_gain_liouvillian(build_space(n + 1), params).eigvals()
    assert nearest_distance(np.linalg.eigvals(oracle_block(p)), full) < 1e-6


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("P", [0.0, 0.5, 1.7])
def test_resonant_oracle_spectrum_is_mirror_symmetric(n, P):
    lam = np.linalg.eigvals(oracle_block(block_params(n, P_theta=P)))
    assert nearest_distance(lam, lam.conj()) < 1e-8


def test_first_rung_labels():
    e = ngl_eigen(block_params(1))
    assert e.labels == [("-", "+"), ("-", "-")]
    splitting = math.sqrt(G ** 2 - ((KAPPA - GAMMA) / 4) ** 2)
    assert e.eigenvalue(("-", "+")).imag == pytest.approx(-splitting, abs=1e-12)
    assert e.eigenvalue(("-", "-")).imag == pytest.approx(splitting, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_higher_rung_labels_follow_jc_frequencies(n):
    e = ngl_eigen(block_params(n))
    r_n, r_m = G * math.sqrt(n), G * math.sqrt(n - 1)
    sign = {"+": 1.0, "-": -1.0}
    for s, sp in e.labels:
        target = -sign[sp] * (r_n + sign[s] * r_m)
        assert e.eigenvalue((s, sp)).imag == pytest.approx(target, abs=5e-3)


@given(n=st.integers(1, 4), P=st.floats(0.0, 3.0), Delta=st.floats(-0.3, 0.3))
@settings(max_examples=25, deadline=None)
def test_linewidths_are_non_negative(n, P, Delta):
    lam = np.linalg.eigvals(oracle_block(block_params(n, P_theta=P, Delta=Delta)))
    assert lam.real.min() >= -1e-10


def test_labels_persist_along_sweep():
    sweep = track_branches([block_params(2, P_theta=P) for P in np.linspace(0.0, 0.1, 16)])
    assert all(e.labels == sweep[0].labels for e in sweep)
    for prev, cur in zip(sweep, sweep[1:]):
        for label in prev.labels:
            assert abs(cur.eigenvalue(label) - prev.eigenvalue(label)) < 0.05
    assert not any(e.ambiguous for e in sweep)


def test_label_ambiguity():
    p = SubspaceParams(n=1, g=0.0, kappa=0.1, gamma_x=0.0, P_theta=0.1, Delta=0.0)
    with pytest.raises(LabelAmbiguityError):
        ngl_eigen(p)
    sweep = track_branches([replace(p, P_theta=P) for P in (0.0, 0.05, 0.1)])
    assert sweep[-1].ambiguous and not sweep[0].ambiguous


def test_printed_source_is_labelled_too():
    e = ngl_eigen(block_params(2, P_theta=0.2), source="printed")
    assert e.source == "printed"
    assert len(e.labels) == 4


def test_first_rung_coefficients_split_evenly_below_ep():
    for P in (0.0, 0.3, 0.9):
        c = bare_coefficients(ngl_eigen(block_params(1, P_theta=P)))
        assert c.c00_sq == pytest.approx(0.5, abs=1e-12)
        assert c.c10_sq == pytest.approx(0.5, abs=1e-12)
        assert c.c11_sq == 0.0 and c.c01_sq == 0.0


@given(n=st.integers(1, 4), P=st.floats(0.0, 0.5), Delta=st.floats(0.05, 0.3))
@settings(max_examples=15, deadline=None)
def test_coefficients_are_normalized(n, P, Delta):
    c = bare_coefficients(ngl_eigen(block_params(n, P_theta=P, Delta=Delta)))
    assert c.c00_sq + c.c11_sq + c.c10_sq + c.c01_sq == pytest.approx(1.0, abs=1e-12)


def test_first_rung_exceptional_point():
    ep = exceptional_point(1, 0.0, G, KAPPA, GAMMA, interval=(0.0, 2.5))
    assert ep.coalesced
    assert ep.P_crit == pytest.approx(KAPPA - GAMMA + 4 * G, abs=1e-8)
    assert ep.omega_at_ep == pytest.approx(0.0, abs=1e-6)
    assert ep.residual_gap < 1e-6 * G
    assert ep.overlap > 1 - 1e-4


def test_detuned_first_rung_is_an_avoided_crossing():
    Delta = 0.3 * G
    ep = exceptional_point(1, Delta, G, KAPPA, GAMMA, interval=(0.0, 2.5))
    assert not ep.coalesced
    expected = KAPPA - GAMMA + 2 * math.sqrt(4 * G ** 2 - Delta ** 2)
    assert ep.P_crit == pytest.approx(expected, abs=1e-6)
    assert ep.P_crit < KAPPA - GAMMA + 4 * G


def test_minimum_on_interval_edge_is_not_an_ep():
    ep = exceptional_point(1, 0.0, G, KAPPA, GAMMA, interval=(0.0, 0.5), points=50)
    assert not ep.coalesced
    assert ep.P_crit == pytest.approx(0.5)


def test_toy_exceptional_point():
    found = find_coalescence(lambda x: toy_ep_matrix(x, 1.0), (0.1, 1.0))
    assert found.interior
    assert found.x == pytest.approx(0.5, abs=1e-8)
    assert found.overlap > 1 - 1e-4


def test_find_coalescence_rejects_empty_interval():
    with pytest.raises(ValueError):
        find_coalescence(lambda x: toy_ep_matrix(x, 1.0), (1.0, 1.0))


def test_ep_pair_labels():
    assert EP_PAIR == (("-", "-"), ("-", "+"))


@pytest.mark.parametrize("n", [1, 2])
def test_lossless_printed_and_oracle_agree(n):
    p = SubspaceParams(n=n, g=G, kappa=0.0, gamma_x=0.0, P_theta=0.0, Delta=0.0)
    report = compare_printed_vs_oracle(p)
    assert report.max_residual < 1e-12
    assert abs(report.shift) < 1e-12
    assert classify_discrepancy([report.max_residual], G) == "equivalent"


def test_classify_discrepancy():
    assert classify_discrepancy([1e-12, 0.0], G) == "equivalent"
    assert classify_discrepancy([1e-12, 1e-3], G) == "structured"
    assert classify_discrepancy([], G) == "equivalent"


def test_discrepancy_report_at_device_rates():
    report = compare_printed_vs_oracle(block_params(2, P_theta=1.08 * G))
    assert report.oracle.size == 4 and report.printed.size == 4
    assert sorted(report.permutation) == [0, 1, 2, 3]
    assert report.max_residual >= 0


def test_resonance_state_position():
    eigens = [ngl_eigen(block_params(n, P_theta=0.2)) for n in (1, 2, 3)]
    expected = np.mean([eigens[k].eigenvalue(("-", "-")).imag for k in (1, 2)])
    assert resonance_state_position(eigens) == pytest.approx(expected)
    with pytest.raises(ValueError):
        resonance_state_position(eigens[:1])


# ========== Scaled rates of the sector figures ==========

KAPPA_S, GAMMA_S = 0.33 * G, 0.003 * G


def scaled_params(n: int, P_over_g: float = 0.0, delta_over_g: float = 0.0) -> SubspaceParams:
    return SubspaceParams(n=n, g=G, kappa=KAPPA_S, gamma_x=GAMMA_S, P_theta=P_over_g * G, Delta=delta_over_g * G)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("P, Delta", [(0.0, 0.0), (0.6, 0.0), (0.6, 0.13), (1.7, 0.13)])
def test_oracle_eigenvalues_match_full_generator_to_rounding(n, P, Delta):
    params = SystemParams(g=G, kappa=KAPPA, gamma_x=GAMMA, P_x=0.0, P_theta=P, omega_x=Delta, omega_c=0.0)
    full = -no_gain_liouvillian(build_space(n + 1), params).eigvals()
    lam = np.linalg.eigvals(oracle_block(block_params(n, P_theta=P, Delta=Delta)))
    assert nearest_distance(lam, full) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_resonant_sector_solves_the_secular_quartic(n):
    p = scaled_params(n, P_over_g=1.35)
    k, gx, P = p.kappa, p.gamma_x, p.P_theta

    def s(m):
        return math.sqrt(m * G ** 2 - ((gx - k + P * m) / 4) ** 2)

    def weight(m):
        return G * math.sqrt(m) / (2 * s(m))

    center = (k * (4 * n - 4) + 2 * gx + P * (2 * n - 1)) / 4
    c = P * math.sqrt(n * (n - 1)) * weight(n) * weight(n - 1)
    w1, w2 = s(n) - s(n - 1), s(n) + s(n - 1)
    roots = np.roots([1.0, 0.0, w1 ** 2 + w2 ** 2, 2 * c * (w2 ** 2 - w1 ** 2), w1 ** 2 * w2 ** 2]) + center
    lam = np.linalg.eigvals(oracle_block(p))
    assert nearest_distance(lam, roots) < 1e-9
    assert nearest_distance(roots, lam) < 1e-9

    # past the coalescence the pair is real and (-,-) is its narrow member
    e = ngl_eigen(p)
    narrow, broad = e.eigenvalue(EP_PAIR[0]), e.eigenvalue(EP_PAIR[1])
    assert abs(narrow.imag) < 1e-8 and abs(broad.imag) < 1e-8
    assert narrow.real == pytest.approx(roots.real.min(), abs=1e-9)
    assert narrow.real < broad.real


def test_region_three_narrow_linewidth_grows_with_rung():
    widths = [ngl_eigen(scaled_params(n, P_over_g=1.35)).eigenvalue(EP_PAIR[0]).real for n in (1, 2, 3)]
    # below its own EP the first rung pair shares (kappa + gamma_x + P_theta) / 4
    assert widths[0] == pytest.approx((KAPPA_S + GAMMA_S + 1.35 * G) / 4, abs=1e-12)
    assert widths[0] < widths[1] < widths[2]
    assert widths[2] > 1.5 * widths[0]


def test_higher_rung_pair_broadens_faster_in_region_two():
    def width(n, P_over_g):
        return ngl_eigen(scaled_params(n, P_over_g=P_over_g)).eigenvalue(EP_PAIR[1]).real

    first = width(1, 0.675) - width(1, 0.225)
    second = width(2, 0.675) - width(2, 0.225)
    assert first == pytest.approx(0.45 * G / 4, abs=1e-12)
    assert second > first


@pytest.mark.parametrize("P_over_g", [8.0, 10.0])
def test_narrow_branch_is_photon_like_past_the_crossing(P_over_g):
    c00 = {}
    for n in (2, 3, 4):
        e = ngl_eigen(scaled_params(n, P_over_g=P_over_g, delta_over_g=0.33))
        assert e.eigenvalue(EP_PAIR[0]).real < e.eigenvalue(EP_PAIR[1]).real
        c = bare_coefficients(e, EP_PAIR[0])
        assert c.c00_sq > 0.9 and c.c11_sq < 0.1
        c00[n] = c.c00_sq
    assert c00[3] == pytest.approx(c00[4], rel=0.05)


@pytest.mark.parametrize("delta_over_g", [-0.33, 0.0, 0.33])
def test_narrow_label_does_not_depend_on_detuning_sign(delta_over_g):
    for n in (1, 2, 3, 4):
        e = ngl_eigen(scaled_params(n, P_over_g=5.0 if n > 1 else 7.0, delta_over_g=delta_over_g))
        assert e.eigenvalue(EP_PAIR[0]).real < e.eigenvalue(EP_PAIR[1]).real


def test_first_rung_coefficients_flat_below_threshold():
    reference = bare_coefficients(ngl_eigen(scaled_params(1, delta_over_g=0.33))).c00_sq
    for P_over_g in (0.25, 0.5, 0.75):
        c = bare_coefficients(ngl_eigen(scaled_params(1, P_over_g=P_over_g, delta_over_g=0.33)))
        assert c.c00_sq == pytest.approx(reference, rel=0.05)


def test_resonance_state_follows_the_narrow_branch():
    eigens = [ngl_eigen(scaled_params(n, P_over_g=5.0, delta_over_g=0.33)) for n in (1, 2, 3, 4)]
    narrow = [e.eigenvalue(EP_PAIR[int(np.argmin([e.eigenvalue(lb).real for lb in EP_PAIR]))]) for e in eigens[1:]]
    assert resonance_state_position(eigens) == pytest.approx(np.mean([z.imag for z in narrow]))


def test_resonant_exceptional_points_move_down_the_ladder():
    expected = [4.327, 1.014, 0.494, 0.302]
    found = [exceptional_point(n, 0.0, G, KAPPA_S, GAMMA_S, interval=(0.0, 8 * G)) for n in (1, 2, 3, 4)]
    assert all(ep.coalesced for ep in found)
    p_crit = [ep.P_crit / G for ep in found]
    assert p_crit == pytest.approx(expected, abs=2e-3)
    assert all(a > b for a, b in zip(p_crit, p_crit[1:]))


@pytest.mark.slow
@pytest.mark.parametrize("delta_over_g", [-0.3, 0.3])
def test_detuning_lowers_the_gap_minimum(delta_over_g):
    for n in (1, 2, 3, 4):
        resonant = exceptional_point(n, 0.0, G, KAPPA_S, GAMMA_S, interval=(0.0, 8 * G))
        detuned = exceptional_point(n, delta_over_g * G, G, KAPPA_S, GAMMA_S, interval=(0.0, 8 * G))
        assert detuned.P_crit < resonant.P_crit
