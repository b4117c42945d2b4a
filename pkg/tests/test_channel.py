import numpy as np
import pytest
from hypothesis import given, strategies as st

from emcris.channel import (
    ChannelParams, LinkStats, NodeGeometry, exp_correlation, link_statistics, path_gain, path_loss_db,
    sample_channel, sinc_correlation, ula_positions, ula_response, upa_response,
)
from emcris.multiport import RisGeometry
from emcris.statistics import gaussian_quadratic_expectation

LAM = 0.125


def test_ula_response_examples():
    x = ula_positions(4, LAM)
    assert np.allclose(ula_response(0.0, x, LAM), 1)
    assert np.allclose(ula_response(np.pi / 2, ula_positions(2, LAM), LAM), [1, -1])


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi / 2, np.pi / 2))
def test_steering_vectors_unit_modulus_and_rank_one(az, el):
    geom = RisGeometry(3, 2, LAM / 4, LAM)
    a = upa_response(az, el, geom)
    assert np.allclose(np.abs(a), 1)
    assert np.allclose(np.abs(ula_response(az, ula_positions(5, LAM), LAM)), 1)
    s = np.linalg.svd(a.reshape(geom.M_v, geom.M_h), compute_uv=False)
    assert s[1:].max(initial=0) < 1e-10 * s[0]


def test_upa_broadside_is_all_ones():
    assert np.allclose(upa_response(0.0, 0.0, RisGeometry(2, 2, LAM / 4, LAM)), 1)


def test_path_loss_examples():
    assert path_loss_db(1.0, 2.5) == pytest.approx(30.0)
    assert path_loss_db(10.0, 2.2, 30.0) == pytest.approx(52.0)
    assert path_loss_db(20.0, 2.0) - path_loss_db(10.0, 2.0) == pytest.approx(6.0206, abs=1e-4)
    assert path_gain(10.0, 2.2) == pytest.approx(10 ** -5.2)
    with pytest.raises(ValueError):
        path_loss_db(0.0, 2.0)


def test_exp_correlation_examples():
    assert np.allclose(exp_correlation(4, 0.0), np.eye(4))
    R = exp_correlation(2, 0.5)
    assert np.allclose(R, [[1, 0.5], [0.5, 1]])
    assert np.allclose(np.linalg.eigvalsh(R), [0.5, 1.5])
    with pytest.raises(ValueError):
        exp_correlation(3, 1.0)


@given(st.integers(1, 8), st.floats(0, 0.99), st.floats(-np.pi, np.pi))
def test_exp_correlation_is_a_correlation_matrix(n, r, phi):
    R = exp_correlation(n, r, phi)
    assert np.allclose(R, R.conj().T)
    assert np.allclose(np.diag(R), 1)
    assert np.linalg.eigvalsh(R).min() > 0


def test_sinc_correlation_examples():
    assert np.allclose(np.diag(sinc_correlation(RisGeometry(3, 3, LAM / 4, LAM))), 1)
    assert sinc_correlation(RisGeometry(2, 1, LAM / 2, LAM))[0, 1] == pytest.approx(0, abs=1e-15)
    assert sinc_correlation(RisGeometry(2, 1, LAM / 4, LAM))[0, 1] == pytest.approx(2 / np.pi)


@pytest.mark.parametrize("frac", [0.125, 0.25, 0.5])
def test_sinc_correlation_psd(frac):
    ev = np.linalg.eigvalsh(sinc_correlation(RisGeometry(6, 6, frac * LAM, LAM)))
    assert ev.min() >= -1e-10


def test_rician_power_split():
    s = LinkStats.rician(np.ones((1, 1)), 1.0, 3.0, np.eye(1), np.eye(1))
    assert s.eps_L**2 == pytest.approx(0.75)
    assert s.eps_N**2 == pytest.approx(0.25)
    s = LinkStats.rician(np.ones((2, 2)), 0.3, np.inf, np.eye(2), np.eye(2))
    assert s.eps_N == 0
    assert sample_channel(s, np.random.default_rng(0), 5) == pytest.approx(np.broadcast_to(s.mu, (5, 2, 2)))


def _nodes():
    return NodeGeometry([40, 0, 1], [0, 60, 2], [[20, 110, 1], [30, 125, 1]], [[25, 135, 0]], 3, 2)


def test_link_statistics_structure():
    ris = RisGeometry(2, 2, LAM / 4, LAM)
    st_ = link_statistics(_nodes(), ris, ChannelParams(lambda_c=LAM))
    assert st_.dims == (4, 3, 2, 2, 1)
    links = [st_.br] + st_.jr + st_.ru + st_.bu + [x for row in st_.ju for x in row]
    for s in links:
        assert s.eps_L**2 + s.eps_N**2 == pytest.approx(s.PL)
        for S in (s.Sigma_rx, s.Sigma_tx):
            assert np.allclose(np.diag(S), 1)
            assert np.linalg.eigvalsh(S).min() >= -1e-10
    assert np.allclose(st_.ru[0].Sigma_rx, [[1]])
    assert np.allclose(st_.ru[0].Sigma_tx, sinc_correlation(ris))


def test_coincident_nodes_rejected():
    with pytest.raises(ValueError, match="coincident"):
        NodeGeometry([0, 0, 0], [0, 0, 0], [[1, 1, 1]], [[2, 2, 2]], 2, 2)
    with pytest.raises(ValueError, match="coincident"):
        NodeGeometry([0, 0, 0], [5, 0, 0], [[1, 1, 1]], [[1, 1, 1]], 2, 2)
    NodeGeometry([0, 0, 0], [5, 0, 0], [[1, 1, 1], [1, 1, 1]], [[2, 2, 2]], 2, 2)


def _random_link(rng, rx, tx):
    return LinkStats.rician(np.exp(1j * rng.uniform(0, 6.3, (rx, tx))), 0.5, 2.0,
                            exp_correlation(rx, 0.6, 0.4), exp_correlation(tx, 0.3, -1.0))


def test_sample_mean_and_variance(rng):
    s = _random_link(rng, 4, 3)
    Z = sample_channel(s, rng, 100_000)
    assert np.linalg.norm(Z.mean(0) - s.mu) / np.linalg.norm(s.mu) < 0.02
    var = Z.var(axis=0)
    assert np.allclose(var, s.scale**2, rtol=0.03)


def test_second_moment_matches_closed_form(rng):
    s = _random_link(rng, 3, 2)
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    A = B @ B.conj().T
    Z = sample_channel(s, rng, 200_000)
    mc = np.einsum("bji,jk,bkl->bil", Z.conj(), A, Z)
    closed = gaussian_quadratic_expectation(s.mu, s.scale**2 * s.Sigma_rx, s.Sigma_tx, A)
    se = mc.std(0) / np.sqrt(mc.shape[0])
    assert np.all(np.abs(mc.mean(0) - closed) <= np.maximum(0.01 * np.abs(closed).max(), 4 * se))


def test_sampling_is_reproducible():
    s = _random_link(np.random.default_rng(0), 2, 2)
    a = sample_channel(s, np.random.default_rng(5), 3)
    b = sample_channel(s, np.random.default_rng(5), 3)
    assert np.array_equal(a, b)
