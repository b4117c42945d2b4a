import numpy as np
import pytest
from hypothesis import given, strategies as st

from emcris._linalg import rel_err
from emcris.multiport import (
    ChannelSet, CouplingModel, ReflectionState, RisGeometry, build_coupling_matrix, coupling_impedance,
    da_channels, decoupled_load, effective_channels_s, effective_channels_z, gamma_from_impedance,
    gamma_from_state, impedance_from_gamma, phase_grid, pmn_decoupling, s_from_z_coupling,
    s_links_from_z_links, uncoupled_model,
)
from emcris.sim.oracles import random_coupling, random_links, random_reflection

Z0 = 50.0


def test_single_element_has_no_coupling():
    cm = build_coupling_matrix(RisGeometry(1, 1, 0.03, 0.125))
    assert np.allclose(cm.Z_AA, [[Z0]])
    assert np.allclose(cm.S_AA, 0)


def test_printed_form_quarter_wave_pair():
    Z = coupling_impedance(RisGeometry(2, 1, 0.125 / 4, 0.125), Z0, form="printed")
    assert Z[0, 1] == pytest.approx(1j * 100 / np.pi, abs=1e-9)
    assert Z[0, 0] == Z0


def test_radiating_form_quarter_wave_pair():
    Z = coupling_impedance(RisGeometry(2, 1, 0.125 / 4, 0.125), Z0, efficiency=0.9)
    x = np.pi / 2
    assert Z[0, 1] == pytest.approx(0.9 * Z0 * 1j * np.exp(-1j * x) / x, abs=1e-12)


@pytest.mark.parametrize("frac", [0.125, 0.25, 0.5])
def test_hundred_element_array_is_realizable(frac):
    cm = build_coupling_matrix(RisGeometry(10, 10, 0.125 * frac, 0.125), Z0)
    assert np.linalg.eigvalsh(cm.Z_AA.real).min() > 0
    assert np.allclose(np.diag(cm.Z_AA), Z0)


def test_printed_form_dense_array_rejected():
    with pytest.raises(ValueError, match="not physically realizable"):
        build_coupling_matrix(RisGeometry(10, 10, 0.125 / 4, 0.125), Z0, form="printed")


def test_asymmetric_coupling_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        CouplingModel.from_impedance(np.array([[50, 1], [2, 50]], complex))


def test_reflection_state_examples():
    assert np.allclose(gamma_from_state(ReflectionState(np.ones(3), np.zeros(3))), 1)
    g = gamma_from_state(ReflectionState(np.array([2.0]), np.array([np.pi / 2])))
    assert g[0] == pytest.approx(-2)
    g = gamma_from_state(ReflectionState(np.ones(2), np.zeros(2), L_PS=0.9))
    assert np.allclose(g, 0.81)


def test_phase_grid():
    assert np.allclose(phase_grid(2), [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_impedance_examples():
    assert np.allclose(impedance_from_gamma(np.zeros(2), Z0), Z0)
    assert impedance_from_gamma(np.array([1j]), Z0)[0] == pytest.approx(50j)
    assert impedance_from_gamma(np.array([-2.0]), Z0)[0] == pytest.approx(-50 / 3)
    with pytest.raises(ValueError, match="open-circuit"):
        impedance_from_gamma(np.array([0.5, 1.0]), Z0)


@given(st.floats(0, 3), st.floats(0, 2 * np.pi))
def test_gamma_impedance_round_trip(mag, ph):
    if abs(mag - 1) < 1e-3:
        mag += 2e-3
    g = np.array([mag * np.exp(1j * ph)])
    assert abs(gamma_from_impedance(impedance_from_gamma(g, Z0), Z0)[0] - g[0]) < 1e-12 * max(1, mag)


def test_s_coupling_examples(rng):
    assert np.allclose(s_from_z_coupling(uncoupled_model(3)), 0)
    assert s_from_z_coupling(CouplingModel.from_impedance([[100.0]], Z0))[0, 0] == pytest.approx(1 / 3)
    cm = random_coupling(rng, 4)
    S = s_from_z_coupling(cm)
    lhs = (np.eye(4) - S) @ (cm.Z_AA + Z0 * np.eye(4)) - 2 * Z0 * np.eye(4)
    assert np.linalg.norm(lhs) < 1e-10 * np.linalg.norm(cm.Z_AA)


def test_s_form_limits(rng):
    cm = uncoupled_model(3)
    sl = random_links(rng, 3, 2, 2, 2, 1)
    eff = effective_channels_s(np.zeros(3), cm, sl)
    assert np.allclose(eff.H_E, sl.Z_BU)
    eff = effective_channels_s(np.ones(3), cm, sl)
    assert np.allclose(eff.H_E, sl.Z_BU + sl.Z_RU @ sl.Z_BR)


def test_z_form_without_ris_path(rng):
    cm = random_coupling(rng, 3)
    zl = random_links(rng, 3, 2, 2, 2, 1)
    zl = ChannelSet(zl.Z_BR, zl.Z_JR, np.zeros_like(zl.Z_RU), zl.Z_BU, zl.Z_JU)
    eff = effective_channels_z(np.full(3, 20.0 + 5j), cm, zl)
    assert np.allclose(eff.H_E, zl.Z_BU / (2 * Z0))


def test_oscillation_and_resonance_detected():
    cm = CouplingModel.from_impedance([[100.0]], Z0)   # S_AA = 1/3
    sl = ChannelSet(np.ones((1, 1)), np.ones((1, 1, 1)), np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1, 1)))
    with pytest.raises(np.linalg.LinAlgError, match="oscillation"):
        effective_channels_s(np.array([3.0]), cm, sl)
    with pytest.raises(np.linalg.LinAlgError, match="resonant"):
        effective_channels_z(np.array([-100.0]), cm, sl)


def test_link_conversion_uncoupled_limit(rng):
    cm = uncoupled_model(4)
    zl = random_links(rng, 4, 2, 2, 2, 1)
    sl = s_links_from_z_links(zl, cm)
    assert np.allclose(sl.Z_BR, zl.Z_BR / (2 * Z0))
    assert np.allclose(sl.Z_RU, zl.Z_RU / (2 * Z0))
    zl0 = ChannelSet(np.zeros_like(zl.Z_BR), zl.Z_JR, zl.Z_RU, zl.Z_BU, zl.Z_JU)
    sl0 = s_links_from_z_links(zl0, cm)
    assert np.allclose(sl0.Z_BR, 0)
    assert np.allclose(sl0.Z_BU, zl.Z_BU / (2 * Z0))


def test_matching_network_is_lossless_and_reciprocal(rng):
    cm = random_coupling(rng, 5)
    Z_D = pmn_decoupling(cm)
    assert np.linalg.norm(Z_D - Z_D.T) == 0
    assert np.max(np.abs(Z_D.real)) < 1e-12
    Z_D = pmn_decoupling(uncoupled_model(2))
    assert np.allclose(Z_D[:2, 2:], -1j * Z0 * np.eye(2))
    assert np.allclose(Z_D[2:, 2:], 0)


def test_decoupled_load_uncoupled(rng):
    cm = uncoupled_model(3)
    assert np.allclose(decoupled_load(np.full(3, Z0), cm), Z0 * np.eye(3))
    z = rng.uniform(10, 90, 3) + 1j * rng.uniform(-30, 30, 3)
    assert np.allclose(decoupled_load(z, cm), np.diag(Z0**2 / z))


def test_da_channels_limits(rng):
    cm = random_coupling(rng, 4)
    zl = random_links(rng, 4, 2, 2, 2, 1)
    assert np.allclose(da_channels(np.zeros(4), cm, zl).H_E, zl.Z_BU / (2 * Z0))
    cm0 = uncoupled_model(4)
    eff = da_channels(np.full(4, 2.0), cm0, zl)
    assert np.allclose(eff.H_E, (zl.Z_BU - zl.Z_RU @ zl.Z_BR / Z0) / (2 * Z0))
    assert eff.provenance == "DA"


@given(st.integers(0, 2**32 - 1))
def test_three_forms_agree(seed):
    r = np.random.default_rng(seed)
    M = int(r.integers(1, 7))
    cm = random_coupling(r, M)
    zl = random_links(r, M, 2, 2, 2, 2)
    gam = random_reflection(r, M)
    z_a = impedance_from_gamma(gam, Z0)
    ez = effective_channels_z(z_a, cm, zl)
    es = effective_channels_s(gam, cm, s_links_from_z_links(zl, cm))
    ed = da_channels(1 + gam, cm, zl)
    ezd = effective_channels_z(decoupled_load(z_a, cm), cm, zl)
    for a, b in zip(es.as_tuple(), ez.as_tuple()):
        assert rel_err(a, b) < 1e-10
    for a, b in zip(ed.as_tuple(), ezd.as_tuple()):
        assert rel_err(a, b) < 1e-10


def test_da_channels_are_affine_in_g(rng):
    cm = random_coupling(rng, 4)
    zl = random_links(rng, 4, 2, 2, 2, 1)
    g1, g2 = random_reflection(rng, 4), random_reflection(rng, 4)
    a, b, c = da_channels(g1, cm, zl), da_channels(g2, cm, zl), da_channels(0.3 * g1 + 0.7 * g2, cm, zl)
    for x, y, z in zip(a.as_tuple(), b.as_tuple(), c.as_tuple()):
        assert rel_err(z, 0.3 * x + 0.7 * y) < 1e-12


def test_batched_links_match_single(rng):
    cm = random_coupling(rng, 3)
    links = [random_links(rng, 3, 2, 2, 2, 1) for _ in range(3)]
    batch = ChannelSet(*(np.stack([getattr(l, f) for l in links]) for f in ("Z_BR", "Z_JR", "Z_RU", "Z_BU", "Z_JU")))
    g = random_reflection(rng, 3)
    eb = da_channels(g, cm, batch)
    for i, l in enumerate(links):
        for a, b in zip(da_channels(g, cm, l).as_tuple(), eb.as_tuple()):
            assert np.allclose(a, b[i])
