import numpy as np
import pytest
from hypothesis import given, strategies as st

from emcris._linalg import rel_err
from emcris.multiport import EffectiveChannels, da_channels, uncoupled_model
from emcris.sim.oracles import expectation_ok, expectation_terms, random_coupling, random_stats_set
from emcris.statistics import (
    DecoupledStats, JammerStrategy, SurrogateMatrices, amplification_power, build_surrogates,
    cascade_quadratic, ergodic_rate_bound, exact_rate_sample, gaussian_quadratic_expectation,
    link_gram, noise_quadratic, power_quadratic,
)

Z0 = 50.0


def _cn(rng, *s):
    return (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / np.sqrt(2)


def _setup(rng, M=3, N=2, NJ=2, K=2, Q=1, coupled=True):
    cm = random_coupling(rng, M) if coupled else uncoupled_model(M)
    stats = random_stats_set(rng, M, N, NJ, K, Q, Z0)
    return DecoupledStats.build(cm, stats)


def test_quadratic_expectation_examples(rng):
    n = 3
    assert np.allclose(gaussian_quadratic_expectation(np.zeros((n, n)), np.eye(n), np.eye(n), np.eye(n)),
                       n * np.eye(n))
    mu = _cn(rng, 3, 2)
    A = np.diag([1.0, 2.0, 3.0])
    assert np.allclose(gaussian_quadratic_expectation(mu, np.eye(3), np.zeros((2, 2)), A),
                       mu.conj().T @ A @ mu)
    with pytest.raises(ValueError):
        gaussian_quadratic_expectation(mu, np.eye(2), np.eye(2), A)


def test_zero_reflection_leaves_direct_link(rng):
    ds = _setup(rng)
    sm = build_surrogates(np.zeros(3), ds)
    for k, bu in enumerate(ds.stats.bu):
        assert rel_err(sm.C1[k], link_gram(bu) / (4 * Z0**2)) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_surrogates_factorize_and_are_psd(seed):
    r = np.random.default_rng(seed)
    ds = _setup(r, M=int(r.integers(1, 5)))
    M = ds.dims[0]
    g = 1 + 3 * _cn(r, M)
    sm = build_surrogates(g, ds)
    for k in range(sm.C1.shape[0]):
        HC = sm.H_C[k]
        assert HC.shape[0] == 2 * ds.dims[1] + M + 1
        assert rel_err(HC.conj().T @ HC, sm.C1[k]) < 1e-10
    for C in [*sm.C1, *sm.C2.reshape(-1, *sm.C2.shape[-2:]), *sm.C3, sm.C4, *sm.C5, sm.C6]:
        assert np.allclose(C, C.conj().T, atol=0)
        tr = np.real(np.trace(C))
        assert np.linalg.eigvalsh(C).min() >= -1e-9 * max(tr, 1e-300)


def test_closed_forms_match_sampling():
    terms = expectation_terms(np.random.default_rng(7), M=3, N=2, draws=200_000)
    for name, closed, mean, se in terms:
        assert expectation_ok(closed, mean, se), name


def test_uncoupled_signal_power_matches_sampling(rng):
    ds = _setup(rng, M=2, N=2, K=1, Q=0, coupled=False)
    g = 1 + 2 * _cn(rng, 2)
    sm = build_surrogates(g, ds)
    links = ds.stats.sample(rng, 200_000)
    H = da_channels(g, ds.cm, links).H_E[:, 0]
    for _ in range(10):
        w = _cn(rng, 2)
        x = np.abs(H @ w) ** 2
        closed = np.real(np.vdot(w, sm.C1[0] @ w))
        assert expectation_ok(closed, x.mean(), x.std() / np.sqrt(x.size))


def test_rate_bound_examples():
    C1 = np.eye(1)[None]
    z = np.zeros((0, 1, 1, 1))
    sm = SurrogateMatrices(C1, z, np.zeros((1, 1, 1)), np.eye(1), np.zeros((0, 1, 1)), np.eye(1),
                           np.ones((1, 1, 1)), np.zeros(1), np.ones(1))
    jam = JammerStrategy(np.zeros((0, 1, 1)))
    assert ergodic_rate_bound(np.ones((1, 1)), sm, jam, 0.0, 1.0)[0] == pytest.approx(1.0)
    assert ergodic_rate_bound(np.zeros((1, 1)), sm, jam, 0.0, 1.0)[0] == 0.0


def test_rate_bound_with_deterministic_denominator(rng):
    # Jensen applies exactly when only receiver noise sits in the denominator
    ds = _setup(rng, M=3, N=2, K=1, Q=0)
    g = 1 + _cn(rng, 3)
    sm = build_surrogates(g, ds)
    w = 0.01 * _cn(rng, 1, 2)
    jam = JammerStrategy.silent(0, 1, 2)
    bound = ergodic_rate_bound(w, sm, jam, 0.0, 1e-6)[0]
    rates = exact_rate_sample(da_channels(g, ds.cm, ds.stats.sample(rng, 100_000)), w, jam, 0.0, 1e-6)[1]
    assert bound >= rates.mean() - 3 * rates.std() / np.sqrt(rates.size)


def test_exact_rate_examples():
    H_E = np.array([[1.0, 0.0], [0.0, 1.0]], complex)
    eff = EffectiveChannels(H_E, np.zeros((0, 2, 1)), np.zeros((2, 1)), np.zeros((1, 2)),
                            np.zeros((0, 1, 1)), np.zeros((1, 1)), "Z")
    gam, rate = exact_rate_sample(eff, np.eye(2), JammerStrategy(np.zeros((0, 2, 1))), 0.0, 1.0)
    assert np.allclose(gam, 1.0)
    assert rate == pytest.approx(2.0)
    gam, _ = exact_rate_sample(eff, np.array([[1, 1], [0, 1]], complex), JammerStrategy(np.zeros((0, 2, 1))),
                               0.0, 1.0)
    assert np.allclose(gam, [1.0, 0.5])


def test_amplified_noise_floor(rng):
    ds = _setup(rng)
    sm = build_surrogates(1 + _cn(rng, 3), ds)
    pa = amplification_power(np.zeros((2, 2)), sm, JammerStrategy.silent(1, 2, 2), 1e-3)
    assert pa == pytest.approx(1e-3 * np.real(np.trace(sm.C6)))
    assert pa > 0


@given(st.integers(0, 2**32 - 1))
def test_quadratics_in_g_match_surrogates(seed):
    r = np.random.default_rng(seed)
    ds = _setup(r, M=3, N=2, K=2, Q=1)
    g = 1 + 2 * _cn(r, 3)
    sm = build_surrogates(g, ds)
    w = _cn(r, 2, 2)
    jam = JammerStrategy(_cn(r, 1, 2, 2))
    for k, cs in enumerate(ds.user):
        closed = np.real(np.vdot(w[0], sm.C1[k] @ w[0]))
        assert cascade_quadratic(cs, w[0], Z0).value(g) == pytest.approx(closed, rel=1e-9)
        assert noise_quadratic(ds, k).value(g) == pytest.approx(np.real(np.trace(sm.C3[k])), rel=1e-9)
        jq = cascade_quadratic(ds.jam[0][k], jam.w_J[0, k], Z0).value(g)
        assert jq == pytest.approx(np.real(np.vdot(jam.w_J[0, k], sm.C2[0, k] @ jam.w_J[0, k])), rel=1e-9)
    pa = amplification_power(w, sm, jam, 0.3)
    assert power_quadratic(ds, w, jam, 0.3).value(g) == pytest.approx(pa, rel=1e-9)


def test_jammer_budget_check():
    jam = JammerStrategy(np.full((2, 2, 2), 0.5, complex))
    assert np.allclose(jam.powers(), 1.0)
    jam.validate(1.0)
    with pytest.raises(ValueError):
        jam.validate(0.5)
