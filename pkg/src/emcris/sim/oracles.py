"""Independent verification suites shared by ``validate`` and the tests.

Each suite draws random instances from a seeded generator, compares a
library routine against an independent reference and returns
OracleResult records.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .._linalg import herm, rel_err
from ..channel import LinkStats, LinkStatsSet, exp_correlation
from ..multiport import (
    ChannelSet, CouplingModel, da_channels, decoupled_load, effective_channels_s, effective_channels_z,
    impedance_from_gamma, phase_grid, s_links_from_z_links,
)
from ..optimizer import discrete_phase_sweep, phase_objective, solve_qcqp_single
from ..statistics import (
    DecoupledStats, JammerStrategy, amplification_power, build_surrogates, output_power_sample,
)


@dataclass
class OracleResult:
    name: str
    passed: bool
    detail: str


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_coupling(rng, M, Z0=50.0) -> CouplingModel:
    """Symmetric Z_AA with PD real part and Z0-scale entries."""
    A = rng.standard_normal((M, M))
    R = A @ A.T / M + np.eye(M)
    X = rng.standard_normal((M, M))
    return CouplingModel.from_impedance(Z0 * (R + 0.5j * (X + X.T)), Z0)


def random_links(rng, M, N, NJ, K, Q, scale=50.0) -> ChannelSet:
    return ChannelSet(scale * _cn(rng, M, N), scale * _cn(rng, Q, M, NJ), scale * _cn(rng, K, M),
                      scale * _cn(rng, K, N), scale * _cn(rng, Q, K, NJ))


def random_reflection(rng, M, gmax=2.0):
    """Reflection coefficients with |Gamma| <= gmax, kept away from |Gamma| = 1."""
    mag = rng.uniform(0, gmax, M)
    mag = np.where(np.abs(mag - 1) < 1e-3, mag + 2e-3, mag)
    return mag * np.exp(1j * rng.uniform(0, 2 * np.pi, M))


def _random_dims(rng):
    return (int(rng.integers(1, 9)), int(rng.integers(1, 5)), int(rng.integers(1, 4)),
            int(rng.integers(1, 4)), int(rng.integers(1, 3)))


def channel_equivalence(rng, n=100):
    """Worst relative errors (S vs Z form, DA vs Z form with decoupled load)."""
    worst_s = worst_da = 0.0
    for _ in range(n):
        M, N, NJ, K, Q = _random_dims(rng)
        cm = random_coupling(rng, M)
        zl = random_links(rng, M, N, NJ, K, Q)
        gam = random_reflection(rng, M)
        z_a = impedance_from_gamma(gam, cm.Z0)
        ez = effective_channels_z(z_a, cm, zl)
        es = effective_channels_s(gam, cm, s_links_from_z_links(zl, cm))
        ed = da_channels(1 + gam, cm, zl)
        ezd = effective_channels_z(decoupled_load(z_a, cm), cm, zl)
        for a, b in zip(es.as_tuple(), ez.as_tuple()):
            worst_s = max(worst_s, rel_err(a, b))
        for a, b in zip(ed.as_tuple(), ezd.as_tuple()):
            worst_da = max(worst_da, rel_err(a, b))
    return worst_s, worst_da


def random_link_stats(rng, rx, tx, Z0=50.0, kappa=None):
    """Correlated Rician link with random LOS, exponential correlations and path gain."""
    kappa = rng.uniform(0.5, 5) if kappa is None else kappa
    los = np.exp(1j * rng.uniform(0, 2 * np.pi, (rx, tx)))
    S_rx = exp_correlation(rx, rng.uniform(0, 0.8), rng.uniform(0, np.pi))
    S_tx = exp_correlation(tx, rng.uniform(0, 0.8), rng.uniform(0, np.pi))
    return LinkStats.rician(los, rng.uniform(0.2, 1.0), kappa, S_rx, S_tx, Z0)


def random_stats_set(rng, M, N, NJ, K, Q, Z0=50.0):
    jr = [random_link_stats(rng, M, NJ, Z0) for _ in range(Q)]
    ju = [[random_link_stats(rng, 1, NJ, Z0) for _ in range(K)] for _ in range(Q)]
    ru = [random_link_stats(rng, 1, M, Z0) for _ in range(K)]
    bu = [random_link_stats(rng, 1, N, Z0) for _ in range(K)]
    return LinkStatsSet(random_link_stats(rng, M, N, Z0), jr, ru, bu, ju)


def expectation_terms(rng, M=4, N=2, NJ=2, K=2, Q=1, draws=200_000, chunk=20_000):
    """Closed-form expectations against sample means.

    Returns:
        list of (term name, closed form, sample mean, standard error)
    """
    cm = random_coupling(rng, M)
    stats = random_stats_set(rng, M, N, NJ, K, Q, cm.Z0)
    ds = DecoupledStats.build(cm, stats)
    g = 1 + random_reflection(rng, M, 3.0)
    sm = build_surrogates(g, ds)
    w = _cn(rng, K, N)
    jam = JammerStrategy(_cn(rng, Q, K, NJ))
    sigma_R2 = 1.0
    acc = {}
    left = draws
    while left > 0:
        b = min(chunk, left)
        eff = da_channels(g, cm, stats.sample(rng, b))
        HW = np.abs(eff.H_E @ w.T) ** 2                       # (b, K, K)
        terms = {}
        for k in range(K):
            terms[f"signal[{k}]"] = HW[:, k, k]
            terms[f"interference[{k}]"] = HW[:, k].sum(-1) - HW[:, k, k]
            terms[f"jamming[{k}]"] = np.sum(
                np.abs(np.einsum("bqn,qn->bq", eff.H_J[:, :, k], jam.w_J[:, k])) ** 2, -1)
            terms[f"ris_noise[{k}]"] = sigma_R2 * np.sum(np.abs(eff.H_N[:, k]) ** 2, -1)
        p_bs, p_j, p_n = output_power_sample(eff, w, jam, sigma_R2)
        terms["pa_bs"], terms["pa_jammer"], terms["pa_noise"] = p_bs, p_j, p_n
        for name, v in terms.items():
            acc.setdefault(name, []).append(v)
        left -= b
    closed = {}
    for k in range(K):
        qf = [np.real(np.vdot(w[j], sm.C1[k] @ w[j])) for j in range(K)]
        closed[f"signal[{k}]"] = qf[k]
        closed[f"interference[{k}]"] = sum(qf) - qf[k]
        closed[f"jamming[{k}]"] = sum(np.real(np.vdot(jam.w_J[q, k], sm.C2[q, k] @ jam.w_J[q, k]))
                                      for q in range(Q))
        closed[f"ris_noise[{k}]"] = sigma_R2 * np.real(np.trace(sm.C3[k]))
    closed["pa_bs"] = sum(np.real(np.vdot(w[j], sm.C4 @ w[j])) for j in range(K))
    closed["pa_jammer"] = amplification_power(np.zeros_like(w), sm, jam, 0.0)
    closed["pa_noise"] = sigma_R2 * np.real(np.trace(sm.C6))
    out = []
    for name, parts in acc.items():
        v = np.concatenate(parts)
        out.append((name, float(closed[name]), float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))))
    return out


def expectation_ok(closed, mean, se, rel=0.01, nse=3.0):
    return abs(closed - mean) <= max(rel * abs(closed), nse * se)


def random_qcqp(rng, n, complex_=True, active=None):
    """Random PD K1, PSD K2 and budget; ``active`` forces the constraint on or off."""
    mk = (lambda *s: _cn(rng, *s)) if complex_ else (lambda *s: rng.standard_normal(s))
    A = mk(n, n)
    K1 = herm(A @ A.conj().T / n + 0.1 * np.eye(n))
    B = mk(n, n)
    K2 = herm(B @ B.conj().T / n + 0.05 * np.eye(n))
    k = mk(n)
    x_free = np.linalg.solve(K1, k)
    p_free = float(np.real(np.vdot(x_free, K2 @ x_free)))
    if active is None:
        active = rng.uniform() < 0.7
    P = p_free * (rng.uniform(0.05, 0.9) if active else rng.uniform(1.1, 3.0))
    return K1, k, K2, P


def qcqp_objective(K1, k, x):
    return float(np.real(np.vdot(x, K1 @ x)) - 2 * np.real(np.vdot(k, x)))


def projected_gradient_qcqp(K1, k, K2, P, iters=20000, tol=1e-12):
    """Reference solver: accelerated projected gradient after whitening K2 to I.

    With y = K2^{1/2} x the feasible set is the ball ||y||^2 <= P, whose
    projection is a rescaling. Momentum restarts whenever it points uphill.
    """
    ev, U = np.linalg.eigh(K2)
    Si = (U / np.sqrt(ev)) @ U.conj().T
    H = herm(Si @ K1 @ Si)
    c = Si @ k
    L = 2 * np.linalg.eigvalsh(H).max()
    r = np.sqrt(P)

    def proj(y):
        nrm = np.linalg.norm(y)
        return y if nrm <= r else y * (r / nrm)

    y = proj(np.zeros_like(c))
    z, t = y, 1.0
    for _ in range(iters):
        grad = 2 * (H @ z) - 2 * c
        y_new = proj(z - grad / L)
        if np.real(np.vdot(grad, y_new - y)) > 0:
            t = 1.0
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = y_new + ((t - 1) / t_new) * (y_new - y)
        step = np.linalg.norm(y_new - y)
        y, t = y_new, t_new
        if step <= tol * max(np.linalg.norm(y), 1e-300):
            break
    return Si @ y


def qcqp_checks(rng, n_inst=200, max_dim=8):
    """Worst KKT residual, objective gap to the reference and active-root error, all relative."""
    worst_kkt = worst_gap = worst_root = 0.0
    for i in range(n_inst):
        n = int(rng.integers(1, max_dim + 1))
        K1, k, K2, P = random_qcqp(rng, n, complex_=bool(i % 2))
        x, lam = solve_qcqp_single(K1, k, K2, P)
        cons = float(np.real(np.vdot(x, K2 @ x)))
        grad = (K1 + lam * K2) @ x - k
        scale = np.linalg.norm(k) + np.linalg.norm(K1 @ x) + lam * np.linalg.norm(K2 @ x)
        kkt = max(np.linalg.norm(grad) / scale, max(cons - P, 0.0) / P, lam * abs(cons - P) / (P * (1 + lam)))
        worst_kkt = max(worst_kkt, kkt)
        ref = projected_gradient_qcqp(K1, k, K2, P)
        f, fr = qcqp_objective(K1, k, x), qcqp_objective(K1, k, ref)
        worst_gap = max(worst_gap, (f - fr) / max(abs(fr), 1e-12))
        if lam > 0:
            worst_root = max(worst_root, abs(cons - P) / P)
    return worst_kkt, worst_gap, worst_root


def random_phase_instance(rng, M):
    """PSD Y and complex t of the phase block."""
    A = _cn(rng, M, M)
    return herm(A @ A.conj().T), 2 * _cn(rng, M)


def exhaustive_phase(Y, t, bits):
    grid = phase_grid(bits)
    best = -np.inf
    for th in itertools.product(grid, repeat=len(t)):
        best = max(best, phase_objective(Y, t, np.exp(2j * np.asarray(th))))
    return best


def phase_checks(rng, n_inst=50, max_M=3, max_bits=2):
    """Number of instances where the sweep misses the exhaustive optimum, and the worst gap."""
    misses = 0
    worst = 0.0
    for _ in range(n_inst):
        M = int(rng.integers(1, max_M + 1))
        bits = int(rng.integers(1, max_bits + 1))
        Y, t = random_phase_instance(rng, M)
        th, _ = discrete_phase_sweep(Y, t, bits)
        f = phase_objective(Y, t, np.exp(2j * th))
        fb = exhaustive_phase(Y, t, bits)
        gap = (fb - f) / max(abs(fb), 1.0)
        worst = max(worst, gap)
        if gap > 1e-9:
            misses += 1
    return misses, worst


def run_validation(seed=0, draws=200_000):
    """Run every suite and return its OracleResult list."""
    rng = np.random.default_rng(seed)
    out = []
    s_err, da_err = channel_equivalence(rng)
    out.append(OracleResult("scattering vs impedance channels", s_err < 1e-10, f"worst rel err {s_err:.2e}"))
    out.append(OracleResult("decoupled vs impedance channels", da_err < 1e-10, f"worst rel err {da_err:.2e}"))
    terms = expectation_terms(rng, draws=draws)
    bad = [t for t in terms if not expectation_ok(*t[1:])]
    worst = max(abs(c - m) / max(abs(c), 1e-300) for _, c, m, _ in terms)
    out.append(OracleResult("closed-form expectations vs sampling", not bad,
                            f"{len(terms) - len(bad)}/{len(terms)} terms in band, worst rel dev {worst:.2e}"))
    kkt, gap, root = qcqp_checks(rng)
    out.append(OracleResult("quadratic program KKT", kkt < 1e-8 and gap < 1e-6 and root <= 1e-9,
                            f"kkt {kkt:.2e}, gap {gap:.2e}, root {root:.2e}"))
    misses, worst = phase_checks(rng)
    out.append(OracleResult("discrete phase sweep vs enumeration", misses == 0,
                            f"{misses} misses, worst gap {worst:.2e}"))
    return out
