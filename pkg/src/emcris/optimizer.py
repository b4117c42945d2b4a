"""Alternating optimization of precoders, amplitudes and discrete phases.

The sum of log(1 + SINR surrogates) is handled with the Lagrangian dual and
quadratic transforms, which introduce auxiliaries (omega, nu). At fixed
auxiliaries the objective f_OF is concave quadratic in the precoders and, up
to one SCA step on a norm term, concave quadratic in g = diag(Gamma_A + I).
Each block is solved (ADMM for the two-constraint problems, a coordinate
sweep for the discrete phases) and only accepted if f_OF does not drop, so
the outer trace is monotone.

Parametrization: g = 1 + L_PS^2 alpha e^{j 2 theta}; Lambda_bar = alpha + 1.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import herm, psd_sqrt
from .multiport import phase_grid
from .statistics import (
    DecoupledStats,
    GammaQuadratic,
    JammerStrategy,
    amplification_power,
    build_surrogates,
    cascade_quadratic,
    noise_quadratic,
    power_quadratic,
    sinr_terms,
)


class InfeasibleError(RuntimeError):
    """The scenario admits no point satisfying every power budget."""


@dataclass
class SolverOptions:
    """Iteration caps, tolerances and penalty settings.

    ``rho_w`` and ``rho_lam`` are relative to the largest eigenvalue of the
    quadratic term of their subproblem.
    """

    eta: float = 1e-3
    i_max: int = 200
    i1_max: int = 400
    i2_max: int = 400
    i3_max: int = 100
    rho_w: float = 1.0
    rho_lam: float = 1.0
    adaptive_rho: bool = True
    admm_tol: float = 1e-6
    bisect_tol: float = 1e-9
    feas_tol: float = 1e-9

    def __post_init__(self):
        for name in ("eta", "rho_w", "rho_lam", "admm_tol", "bisect_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("i_max", "i1_max", "i2_max", "i3_max"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


# Single-constraint QCQP.

@dataclass
class QcqpResult:
    x: np.ndarray
    lam: float
    residual: float   # constraint value minus budget at x


class QcqpFactor:
    """Reusable solver for min x^H K1 x - 2 Re{k^H x} s.t. x^H K2 x - 2 Re{b^H x} <= P.

    K1 must be Hermitian PD and K2 Hermitian PSD. Both are diagonalized
    together once, after which every multiplier trial costs O(n).
    """

    def __init__(self, K1, K2):
        K1 = herm(np.asarray(K1))
        K2 = herm(np.asarray(K2))
        try:
            L = np.linalg.cholesky(K1)
        except np.linalg.LinAlgError:
            raise ValueError("K1 must be positive definite") from None
        Linv = np.linalg.inv(L)
        xi, V = np.linalg.eigh(herm(Linv @ K2 @ Linv.conj().T))
        scale = max(np.max(np.abs(xi)), 1e-300)
        if xi.min() < -1e-10 * scale:
            raise ValueError("K2 must be positive semidefinite")
        self.xi = np.clip(xi, 0.0, None)
        self.T = V.conj().T @ Linv
        self.K1 = K1
        self.K2 = K2
        self.real = np.isrealobj(K1) and np.isrealobj(K2)

    def _x(self, yhat):
        x = self.T.conj().T @ yhat
        return x.real if self.real else x

    def solve(self, k, P, b=None, tol=1e-11, max_iter=300) -> QcqpResult:
        k = np.asarray(k)
        kh = self.T @ k
        bh = np.zeros_like(kh) if b is None else self.T @ np.asarray(b)
        xi = self.xi

        def y_of(lam):
            return (kh + lam * bh) / (1 + lam * xi)

        def g_of(y):
            return float(np.sum(xi * np.abs(y) ** 2) - 2 * np.real(np.vdot(bh, y)) - P)

        y0 = y_of(0.0)
        g0 = g_of(y0)
        if g0 <= 0:
            return QcqpResult(self._x(y0), 0.0, g0)
        atol = tol * max(abs(P), 1e-300)
        hi = 1.0 / max(xi.max(), 1e-300)
        while g_of(y_of(hi)) > 0:
            hi *= 2
            if hi > 1e300:
                raise InfeasibleError("quadratic constraint set is empty")
        lo = 0.0
        y_hi = y_of(hi)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            y = y_of(mid)
            gm = g_of(y)
            if gm > 0:
                lo = mid
            else:
                hi, y_hi = mid, y
                if -gm <= atol:
                    break
        return QcqpResult(self._x(y_hi), hi, g_of(y_hi))


def solve_qcqp_single(K1, k, K2, P, b=None, tol=1e-11):
    """Solve min x^H K1 x - 2 Re{k^H x} subject to x^H K2 x - 2 Re{b^H x} <= P.

    The KKT point x(lam) = (K1 + lam K2)^{-1}(k + lam b) is used with lam = 0
    when feasible, otherwise lam > 0 is found by bisection on the monotone
    constraint value.

    Returns:
        (x, lam)
    """
    res = QcqpFactor(K1, K2).solve(k, P, b, tol)
    return res.x, res.lam


# Auxiliary variables and the transformed objective.

def update_auxiliaries(w, sm, jam, sigma_R2, sigma_k2):
    """Closed-form maximizers of f_OF over the auxiliaries.

    Returns:
        (omega, nu) with omega_k the surrogate SINR and
        nu_k = sqrt(1 + omega_k) H_C,k w_k / D_k.
    """
    w = np.asarray(w)
    sig, den = sinr_terms(w, sm, jam, sigma_R2, sigma_k2)
    omega = sig / den
    HW = np.einsum("kij,kj->ki", sm.H_C, w)
    nu = np.sqrt(1 + omega)[:, None] * HW / (sig + den)[:, None]
    return omega, nu


def f_of(w, sm, jam, omega, nu, sigma_R2, sigma_k2):
    """Transformed objective in nats."""
    w = np.asarray(w)
    sig, den = sinr_terms(w, sm, jam, sigma_R2, sigma_k2)
    HW = np.einsum("kij,kj->ki", sm.H_C, w)
    lin = 2 * np.sqrt(1 + omega) * np.real(np.sum(nu.conj() * HW, axis=1))
    nn = np.sum(np.abs(nu) ** 2, axis=1)
    return float(np.sum(np.log1p(omega) - omega + lin - nn * (sig + den)))


def surrogate_value(w, sm, jam, sigma_R2, sigma_k2):
    """f_OF at the optimal auxiliaries, sum_k ln(1 + SINR_k)."""
    sig, den = sinr_terms(w, sm, jam, sigma_R2, sigma_k2)
    return float(np.sum(np.log1p(sig / den)))


# Precoder block.

def _segment_step(x0, x1, quads):
    """Largest t in [0, 1] with every convex quadratic constraint satisfied on x0 + t (x1 - x0).

    Args:
        quads: list of (K, b, P) meaning x^H K x - 2 Re{b^H x} <= P.
    """
    d = x1 - x0
    t = 1.0
    for K, b, P in quads:
        a2 = float(np.real(np.vdot(d, K @ d)))
        a1 = float(2 * np.real(np.vdot(x0, K @ d)) - 2 * np.real(np.vdot(b, d)))
        a0 = float(np.real(np.vdot(x0, K @ x0)) - 2 * np.real(np.vdot(b, x0)) - P)
        if a2 * t * t + a1 * t + a0 <= 0:
            continue
        if a2 <= 1e-300:
            t = min(t, -a0 / a1) if a1 > 0 else t
            continue
        disc = a1 * a1 - 4 * a2 * a0
        root = (-a1 + np.sqrt(max(disc, 0.0))) / (2 * a2)
        t = min(t, max(root, 0.0))
    return max(t, 0.0)


@dataclass
class AdmmInfo:
    iters: int
    primal: float
    dual: float


def _admm(K1, k, cons_x, rho0, x0, z_update, opts, max_iter):
    """Consensus ADMM for min x^H K1 x - 2 Re{k^H x} with split constraints.

    x keeps ``cons_x`` (a (K2, b, P) triple handled by the QCQP solver) and z
    is updated by ``z_update(v, rho)`` which must return the minimizer of
    ||z - v||^2 over its own set.
    """
    K2x, bx, Px = cons_x
    n = K1.shape[0]
    eye = np.eye(n)
    scale = max(float(np.max(np.abs(np.linalg.eigvalsh(K1)))), 1e-300)
    rho = rho0 * scale
    factor = QcqpFactor(K1 + 0.5 * rho * eye, K2x)
    x = x0.copy()
    z = x0.copy()
    lam = np.zeros_like(x0)
    r = s = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        x = factor.solve(k + 0.5 * (rho * z - lam), Px, bx, opts.bisect_tol).x
        z_old = z
        z = z_update(x + lam / rho, rho)
        lam = lam + rho * (x - z)
        r = np.linalg.norm(x - z)
        s = rho * np.linalg.norm(z - z_old)
        xn = max(np.linalg.norm(x), np.linalg.norm(z), 1e-300)
        kn = max(np.linalg.norm(k), np.linalg.norm(lam), 1e-300)
        if r <= opts.admm_tol * xn and s <= opts.admm_tol * kn:
            break
        if opts.adaptive_rho and it % 10 == 0:
            if r / xn > 10 * s / kn:
                rho *= 2
            elif s / kn > 10 * r / xn:
                rho /= 2
            else:
                continue
            factor = QcqpFactor(K1 + 0.5 * rho * eye, K2x)
    return x, z, AdmmInfo(it, float(r), float(s))


@dataclass
class Problem:
    """Everything the optimizer needs about one scenario.

    P_A_max = None disables the amplification budget (passive surface).
    ``fixed_alpha`` pins every amplitude (passive surface: 1 / L_PS^2).
    """

    ds: DecoupledStats
    jam: JammerStrategy
    sigma_R2: float
    sigma_k2: float
    P_max: float
    P_A_max: float | None
    gamma_max: float
    bits: int = 3
    L_PS: float = 1.0
    fixed_alpha: float | None = None

    @property
    def M(self):
        return self.ds.dims[0]

    @property
    def alpha_max(self):
        return self.gamma_max / self.L_PS**2

    def g_of(self, alpha, theta):
        return 1.0 + self.L_PS**2 * np.asarray(alpha) * np.exp(2j * np.asarray(theta))


def beamforming_problem(prob: Problem, sm, omega, nu):
    """Quadratic data (Upsilon_1 block, zeta, Upsilon_2 block, budget) of the precoder block.

    The precoder objective is 2 Re{zeta^H w} - sum_k w_k^H B w_k with
    B = sum_k ||nu_k||^2 C1_k; the amplification budget reads
    sum_k w_k^H C4 w_k <= P_bar.
    """
    nn = np.sum(np.abs(nu) ** 2, axis=1)
    B = herm(np.einsum("k,kij->ij", nn, sm.C1))
    zeta = np.sqrt(1 + omega)[:, None] * np.einsum("kij,ki->kj", sm.H_C.conj(), nu)
    if prob.P_A_max is None:
        return B, zeta, None, None
    fixed = amplification_power(np.zeros_like(zeta), sm, prob.jam, prob.sigma_R2)
    return B, zeta, sm.C4, prob.P_A_max - fixed


def admm_beamforming(w0, prob: Problem, sm, omega, nu, opts: SolverOptions):
    """Precoder update with both power budgets.

    Args:
        w0: current feasible precoders (K, N), used for the safeguard.

    Returns:
        (w, AdmmInfo or None)
    """
    B, zeta, C4, P_bar = beamforming_problem(prob, sm, omega, nu)
    K, N = zeta.shape
    if P_bar is not None and P_bar <= 0:
        raise InfeasibleError("amplification budget exhausted by jamming and noise")
    K1 = np.kron(np.eye(K), B)
    k = zeta.ravel()
    x0 = np.asarray(w0).ravel()
    if not np.any(k):
        return np.zeros_like(w0), None
    eye = np.eye(K * N)
    if np.linalg.eigvalsh(K1).min() <= 1e-14 * max(np.abs(K1).max(), 1e-300):
        K1 = K1 + 1e-12 * np.trace(K1).real / (K * N) * eye
    info = None
    if P_bar is None:
        cand = QcqpFactor(K1, eye).solve(k, prob.P_max, tol=opts.bisect_tol).x
    else:
        K2 = np.kron(np.eye(K), C4)
        zf = QcqpFactor(eye, K2)

        def z_update(v, rho):
            return zf.solve(v, P_bar, tol=opts.bisect_tol).x

        x, z, info = _admm(K1, k, (eye, None, prob.P_max), opts.rho_w, x0, z_update, opts, opts.i1_max)
        cand = x
    quads = [(eye, np.zeros_like(k), prob.P_max)]
    if P_bar is not None:
        quads.append((K2, np.zeros_like(k), P_bar))
    t = _segment_step(x0, cand, quads)
    cand = x0 + t * (cand - x0)

    def obj(x):
        return 2 * np.real(np.vdot(k, x)) - np.real(np.vdot(x, K1 @ x))

    if obj(cand) < obj(x0):
        cand = x0
    return cand.reshape(K, N), info


# Reflection blocks.

def reflection_objective(prob: Problem, w, omega, nu, sm0) -> GammaQuadratic:
    """Loss L(g) with f_OF(g) >= sum(ln(1+omega) - omega) - L(g), tight at sm0.g.

    Only the norm factors ell_k need the SCA minorant; everything else is an
    exact quadratic in g.
    """
    ds = prob.ds
    M, N, NJ, K, Q = ds.dims
    Z0 = ds.Z0
    w = np.asarray(w)
    g0 = sm0.g
    L = GammaQuadratic.zeros(M)
    A, b, c = L.A, L.b, 0.0
    for k, cs in enumerate(ds.user):
        root = np.sqrt(1 + omega[k])
        v = nu[k]
        nu0, nuB, nuC, nuD = v[0], v[1:N + 1], v[N + 1:N + M + 1], v[N + M + 1:]
        wk = w[k]
        d0 = cs.mu_d @ wk
        q = cs.Q @ wk
        u = cs.ut * q
        # mean row: 2 root Re{conj(nu0) (d0 - u^T g / 2) / 2Z0}
        c -= 2 * root * np.real(np.conj(nu0) * d0) / (2 * Z0)
        b = b - root * nu0 * u.conj() / (4 * Z0)
        # direct scattered rows: constant in g
        c -= 2 * root * np.real(np.vdot(nuB, cs.s_d / (2 * Z0) * psd_sqrt(cs.S_d) @ wk))
        # RIS scattered rows: linear in g
        p = psd_sqrt(cs.St_r) @ nuC
        b = b + root * cs.s_r / (4 * Z0) * p * q.conj()
        # norm rows: kappa * ell_k(g), minorized around g0
        kap = 2 * root * np.real(np.vdot(nuD, cs.s_h / (4 * Z0) * psd_sqrt(cs.S_h) @ wk))
        ell0 = sm0.ell[k]
        if kap >= 0:
            if ell0 > 0:
                b = b + 0.5 * kap * (cs.Sig_ell @ g0) / ell0
        elif ell0 > 0:
            A = A - kap / (2 * ell0) * cs.Sig_ell
            c -= kap * ell0 / 2
        # denominator terms
        wt = float(np.sum(np.abs(v) ** 2))
        if wt > 0:
            den = cascade_quadratic(cs, w.T, Z0)
            for qq in range(Q):
                den = den + cascade_quadratic(ds.jam[qq][k], prob.jam.w_J[qq, k], Z0)
            den = den + noise_quadratic(ds, k).scaled(prob.sigma_R2)
            A = A + wt * den.A
            b = b + wt * den.b
            c += wt * (den.c + prob.sigma_k2)
    return GammaQuadratic(herm(A), b, float(c))


def aux_constant(omega):
    return float(np.sum(np.log1p(omega) - omega))


def build_amplitude_problem(prob: Problem, theta, loss: GammaQuadratic, power: GammaQuadratic | None):
    """Real quadratic data of the amplitude block in Lambda_bar = alpha + 1.

    Returns:
        dict with Y, t (objective Lam^T Y Lam - t^T Lam to minimize),
        Yp, r, P_tilde (budget Lam^T Yp Lam - 2 r^T Lam <= P_tilde), const.
    """
    d = prob.L_PS**2 * np.exp(2j * np.asarray(theta))
    o = 1.0 - d                     # g = 1 + d alpha = (1 - d) + d Lambda_bar
    A, b = loss.A, loss.b
    Y = np.real(d.conj()[:, None] * A * d[None, :])
    Y = 0.5 * (Y + Y.T)
    t = 2 * np.real(d.conj() * (b - A @ o))
    out = {"Y": Y, "t": t, "offset": o, "d": d, "const": loss.value(o)}
    if power is not None:
        Yp = np.real(d.conj()[:, None] * power.A * d[None, :])
        out["Yp"] = 0.5 * (Yp + Yp.T)
        out["r"] = np.real(d.conj() * (power.b - power.A @ o))
        out["P_tilde"] = prob.P_A_max - power.value(o)
    return out


def admm_amplitude(lam0, prob: Problem, ap: dict, opts: SolverOptions):
    """Amplitude update on the box [1, alpha_max + 1] intersected with the power budget.

    Args:
        lam0: current feasible Lambda_bar.

    Returns:
        (Lambda_bar, AdmmInfo or None)
    """
    Y, t = ap["Y"], ap["t"]
    M = Y.shape[0]
    lo, hi = 1.0, prob.alpha_max + 1.0
    eye = np.eye(M)
    K1 = Y
    if np.linalg.eigvalsh(K1).min() <= 1e-14 * max(np.abs(K1).max(), 1e-300):
        K1 = K1 + 1e-12 * max(np.trace(K1), 1e-300) / M * eye
    k = 0.5 * t
    x0 = np.asarray(lam0, dtype=float)

    def clip(v, rho):
        return np.clip(v, lo, hi)

    info = None
    if "Yp" in ap:
        if ap["P_tilde"] <= 0 and np.min(np.linalg.eigvalsh(ap["Yp"])) >= 0 and not np.any(ap["r"]):
            raise InfeasibleError("amplitude budget exhausted")
        x, z, info = _admm(K1, k, (ap["Yp"], ap["r"], ap["P_tilde"]), opts.rho_lam, x0, clip, opts,
                           opts.i2_max)
        cand = z
        quads = [(ap["Yp"], ap["r"], ap["P_tilde"])]
    else:
        cand = _box_qp(K1, k, lo, hi, x0)
        quads = []
    t_step = _segment_step(x0, cand, quads)
    cand = np.clip(x0 + t_step * (cand - x0), lo, hi)

    def obj(x):
        return 2 * k @ x - x @ Y @ x

    if obj(cand) < obj(x0):
        cand = x0
    return cand, info


def _box_qp(K1, k, lo, hi, x0, sweeps=500, tol=1e-12):
    """Coordinate descent for min x^T K1 x - 2 k^T x on a box."""
    x = np.clip(x0.astype(float).copy(), lo, hi)
    diag = np.diag(K1)
    Kx = K1 @ x
    for _ in range(sweeps):
        delta = 0.0
        for m in range(x.size):
            if diag[m] <= 0:
                continue
            new = np.clip(x[m] + (k[m] - Kx[m]) / diag[m], lo, hi)
            step = new - x[m]
            if step:
                Kx += K1[:, m] * step
                x[m] = new
                delta = max(delta, abs(step))
        if delta <= tol * max(1.0, np.abs(x).max()):
            break
    return x


def phase_objective(Y, t, phi):
    """Re{t^H phi} - phi^H Y phi."""
    return float(np.real(np.vdot(t, phi)) - np.real(np.vdot(phi, Y @ phi)))


def _coordinate_sweep(Y, t, grid, cand, theta, max_sweeps, guard, rtol):
    """Elementwise ascent from ``theta``; returns (theta, sweeps, objective)."""
    M = t.size
    phi = np.exp(2j * theta)
    Yphi = Y @ phi
    scale = np.abs(t).sum() + np.abs(Y).sum() + 1e-300
    if guard is not None:
        Yp, e, p0, budget = guard
        Ypphi = Yp @ phi
        power = float(np.real(np.vdot(phi, Ypphi)) + 2 * np.real(np.vdot(e, phi)) + p0)
        ptol = 1e-9 * max(abs(budget), 1e-300)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        changed = False
        for m in range(M):
            tbar = t[m] - 2 * (Yphi[m] - Y[m, m] * phi[m])
            gain = np.real(np.conj(tbar) * (cand - phi[m]))
            if guard is not None:
                delta = cand - phi[m]
                dp = (2 * np.real(np.conj(delta) * (Ypphi[m] - Yp[m, m] * phi[m]))
                      + 2 * np.real(np.conj(e[m]) * delta))
                gain = np.where(power + dp <= budget + ptol, gain, -np.inf)
            best = np.max(gain)
            if best <= rtol * scale:
                continue
            j = int(np.flatnonzero(gain >= best - rtol * scale)[0])
            step = cand[j] - phi[m]
            Yphi += Y[:, m] * step
            if guard is not None:
                power += dp[j]
                Ypphi += Yp[:, m] * step
            phi[m] = cand[j]
            theta[m] = grid[j]
            changed = True
        if not changed:
            break
    return theta, sweeps, phase_objective(Y, t, phi)


def _local_search(Y, t, grid, cand, theta, max_sweeps, guard, rtol):
    """Alternate elementwise sweeps and pair moves until neither improves."""
    scale = np.abs(t).sum() + np.abs(Y).sum() + 1e-300
    total = 0
    for _ in range(max_sweeps):
        theta, sweeps, val = _coordinate_sweep(Y, t, grid, cand, theta, max_sweeps, guard, rtol)
        total += sweeps
        if t.size < 2 or cand.size < 2 or not _pair_move(Y, t, grid, cand, theta, guard, rtol * scale):
            break
    return theta, total, val


def _pair_move(Y, t, grid, cand, theta, guard, tol):
    """Apply the best strictly improving joint change of two elements, if any.

    Updates ``theta`` in place and returns True when a move was made.
    """
    M = t.size
    phi = np.exp(2j * theta)
    Yphi = Y @ phi
    tbar = t - 2 * (Yphi - np.diag(Y) * phi)
    delta = cand[None, :] - phi[:, None]                       # (M, C)
    single = np.real(np.conj(tbar)[:, None] * delta)           # (M, C)
    iu, ju = np.triu_indices(M, 1)
    di = delta[iu][:, :, None]                                  # (P, C, 1)
    dj = delta[ju][:, None, :]                                  # (P, 1, C)
    gain = single[iu][:, :, None] + single[ju][:, None, :] - 2 * np.real(np.conj(di) * Y[iu, ju][:, None, None] * dj)
    if guard is not None:
        Yp, e, p0, budget = guard
        Ypphi = Yp @ phi
        pw = float(np.real(np.vdot(phi, Ypphi)) + 2 * np.real(np.vdot(e, phi)) + p0)
        sp = 2 * np.real(np.conj(delta) * (Ypphi - np.diag(Yp) * phi)[:, None]) + 2 * np.real(np.conj(e)[:, None] * delta)
        dp = sp[iu][:, :, None] + sp[ju][:, None, :] + 2 * np.real(np.conj(di) * Yp[iu, ju][:, None, None] * dj)
        gain = np.where(pw + dp <= budget + 1e-9 * max(abs(budget), 1e-300), gain, -np.inf)
    flat = int(np.argmax(gain))
    if gain.flat[flat] <= tol:
        return False
    p, a, b = np.unravel_index(flat, gain.shape)
    theta[iu[p]] = grid[a]
    theta[ju[p]] = grid[b]
    return True


def _relaxed_phases(Y, t, iters=50):
    """Continuous-phase coordinate ascent from phi = 1, returned as theta in [0, pi)."""
    phi = np.ones(t.size, complex)
    for _ in range(iters):
        old = phi.copy()
        for m in range(t.size):
            tb = t[m] - 2 * (Y[m] @ phi - Y[m, m] * phi[m])
            if abs(tb) > 0:
                phi[m] = tb / abs(tb)
        if np.max(np.abs(phi - old)) < 1e-9:
            break
    return np.mod(np.angle(phi) / 2, np.pi)


def discrete_phase_sweep(Y, t, bits, theta0=None, max_sweeps=100, guard=None, restarts=True, rtol=1e-12):
    """Coordinate ascent of Re{t^H phi} - phi^H Y phi over phi_m = e^{j 2 theta_m}, theta_m in F.

    Each element moves to the grid phase closest to arg of
    t_m - 2 sum_{j != m} Y_mj phi_j, and only when that strictly improves the
    objective. Among equally good phases the smallest theta wins. Sweeps
    repeat until no element changes; a fixed point is then polished by the
    best improving joint change of two elements, followed by more sweeps.

    With ``restarts`` the sweep is also run from every uniform phase
    configuration and from the rounded continuous-phase solution, and the
    best fixed point is kept. The start theta0 is always included, so the
    result never scores below it.

    Args:
        Y: Hermitian (M, M).
        t: complex (M,).
        bits: phase resolution b.
        theta0: starting phases (default zeros).
        guard: optional (Yp, e, p0, budget) describing a power function
            phi^H Yp phi + 2 Re{e^H phi} + p0 that must stay <= budget.

    Returns:
        (theta, number of sweeps of the winning start)
    """
    Y = herm(np.asarray(Y, dtype=complex))
    t = np.asarray(t, dtype=complex)
    M = t.size
    grid = phase_grid(bits)
    grid = grid[grid < np.pi - 1e-12]          # theta and theta + pi give the same phi
    cand = np.exp(2j * grid)
    if guard is not None:
        Yp, e, p0, budget = guard
        guard = (herm(np.asarray(Yp, dtype=complex)), np.asarray(e, dtype=complex), float(p0), float(budget))

    def snap(th):
        th = np.mod(np.asarray(th, dtype=float), np.pi)
        return grid[np.argmin(np.abs(np.exp(2j * th)[:, None] - cand[None, :]), axis=1)]

    def power(th):
        phi = np.exp(2j * th)
        Yp, e, p0, _ = guard
        return float(np.real(np.vdot(phi, Yp @ phi)) + 2 * np.real(np.vdot(e, phi)) + p0)

    starts = [snap(np.zeros(M) if theta0 is None else theta0)]
    if restarts and M > 0:
        starts += [np.full(M, g) for g in grid]
        starts.append(snap(_relaxed_phases(Y, t)))
    best = None
    for i, th in enumerate(starts):
        if i > 0 and guard is not None and power(th) > guard[3]:
            continue
        res = _local_search(Y, t, grid, cand, th.copy(), max_sweeps, guard, rtol)
        if best is None or res[2] > best[2] + rtol * (abs(best[2]) + 1e-300):
            best = res
    return best[0], best[1]


def phase_problem(prob: Problem, alpha, loss: GammaQuadratic, power: GammaQuadratic | None):
    """Quadratic data of the phase block in phi = e^{j 2 theta}.

    With g = 1 + C phi and C = diag(L_PS^2 alpha): maximize Re{t^H phi} - phi^H Y phi.
    """
    cvec = prob.L_PS**2 * np.asarray(alpha, dtype=float)
    ones = np.ones_like(cvec, dtype=complex)
    Y = cvec[:, None] * loss.A * cvec[None, :]
    t = 2 * cvec * (loss.b - loss.A @ ones)
    guard = None
    if power is not None:
        Yp = cvec[:, None] * power.A * cvec[None, :]
        e = cvec * (power.A @ ones - power.b)
        guard = (Yp, e, power.value(ones), prob.P_A_max)
    return Y, t, guard


# Full algorithm.

@dataclass
class AoState:
    """Iterate of the alternating optimization (confined to one solve)."""

    w: np.ndarray
    Lambda_bar: np.ndarray
    theta: np.ndarray
    omega: np.ndarray = None
    nu: np.ndarray = None
    rho_w: float = 1.0
    rho_Lam: float = 1.0
    trace: list = field(default_factory=list)

    @property
    def alpha(self):
        return self.Lambda_bar - 1.0


def evaluate(prob: Problem, w, alpha, theta):
    """Surrogate rate (bits), amplification power and slacks of a point."""
    g = prob.g_of(alpha, theta)
    sm = build_surrogates(g, prob.ds)
    val = surrogate_value(w, sm, prob.jam, prob.sigma_R2, prob.sigma_k2)
    pa = amplification_power(w, sm, prob.jam, prob.sigma_R2)
    pw = float(np.sum(np.abs(w) ** 2))
    return {
        "f_of": val,
        "rate_bits": val / np.log(2),
        "P_A": pa,
        "pa_slack": (prob.P_A_max - pa) if prob.P_A_max is not None else np.inf,
        "pmax_slack": prob.P_max - pw,
        "amp_slack": prob.gamma_max - prob.L_PS**2 * float(np.max(alpha, initial=0.0)),
        "sm": sm,
    }


def initial_point(prob: Problem, theta0=None):
    """Feasible starting point.

    Precoders: matched filter to each UE's mean direct channel with power
    P_max / K. Phases: theta0 or zero. Amplitudes: the largest uniform value
    meeting the amplification budget (bisection), with precoder back-off if
    even zero amplitude is infeasible.
    """
    ds = prob.ds
    M, N, NJ, K, Q = ds.dims
    w = np.zeros((K, N), complex)
    for k, cs in enumerate(ds.user):
        h = cs.mu_d.conj()
        nrm = np.linalg.norm(h)
        w[k] = h / nrm if nrm > 0 else np.ones(N) / np.sqrt(N)
    w *= np.sqrt(prob.P_max / K)
    theta = np.zeros(M) if theta0 is None else np.asarray(theta0, dtype=float)
    if prob.fixed_alpha is not None:
        return w, np.full(M, prob.fixed_alpha), theta
    budget = prob.P_A_max * (1 - 1e-6)

    def pa(a, ww):
        sm = build_surrogates(prob.g_of(np.full(M, a), theta), ds)
        return amplification_power(ww, sm, prob.jam, prob.sigma_R2)

    if pa(0.0, w) > budget:
        sm = build_surrogates(prob.g_of(np.zeros(M), theta), ds)
        fixed = amplification_power(np.zeros_like(w), sm, prob.jam, prob.sigma_R2)
        var = amplification_power(w, sm, prob.jam, prob.sigma_R2) - fixed
        if fixed >= budget or var <= 0:
            raise InfeasibleError("amplification budget exhausted by jamming and noise")
        w *= np.sqrt((budget - fixed) / var) * (1 - 1e-9)
        return w, np.zeros(M), theta
    amax = prob.alpha_max
    if pa(amax, w) <= budget:
        return w, np.full(M, amax), theta
    lo, hi = 0.0, amax
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if pa(mid, w) <= budget:
            lo = mid
        else:
            hi = mid
    return w, np.full(M, lo), theta


def aligned_start(prob: Problem, alpha_cap=1.0):
    """Second starting point: the initial point with amplitudes capped at
    ``alpha_cap`` and phases chosen by one phase step.

    Starting with every amplitude at its cap and arbitrary phases can let the
    first amplitude step switch elements off, after which their phases no
    longer affect the objective. Aligning the phases first avoids that trap.
    """
    w, alpha, theta = initial_point(prob)
    if prob.fixed_alpha is None:
        alpha = np.minimum(alpha, alpha_cap)
    sm = build_surrogates(prob.g_of(alpha, theta), prob.ds)
    omega, nu = update_auxiliaries(w, sm, prob.jam, prob.sigma_R2, prob.sigma_k2)
    if not np.any(nu):
        return w, alpha, theta
    loss = reflection_objective(prob, w, omega, nu, sm)
    power = None if prob.P_A_max is None else power_quadratic(prob.ds, w, prob.jam, prob.sigma_R2)
    Y, t, guard = phase_problem(prob, alpha, loss, power)
    theta, _ = discrete_phase_sweep(Y, t, prob.bits, theta, guard=guard)
    return w, alpha, theta


def is_feasible(prob: Problem, w, alpha, theta, rtol=1e-9):
    """True if the point meets every budget of ``prob``."""
    ev = evaluate(prob, w, alpha, theta)
    ok = ev["pmax_slack"] >= -rtol * prob.P_max and ev["amp_slack"] >= -rtol * prob.gamma_max
    if prob.P_A_max is not None:
        ok = ok and ev["pa_slack"] >= -rtol * prob.P_A_max
    return bool(ok and np.all(np.asarray(alpha) >= 0))


def da_ao_solve(prob: Problem, opts: SolverOptions = None, theta0=None, callback=None, init=None,
                update_phase=True):
    """Run the alternating optimization.

    Args:
        prob: scenario data.
        opts: solver settings.
        theta0: initial phases for the standard initial point.
        callback: called with each trace row.
        init: optional feasible (w, alpha, theta) to start from instead.
        update_phase: False keeps the starting phases fixed.

    Returns:
        (AoState, trace) where trace is a list of dicts with keys
        iteration, f_of, rate_bits, P_A, pa_slack, pmax_slack, amp_slack.
    """
    opts = opts or SolverOptions()
    if init is not None:
        w, alpha, theta = (np.array(v) for v in init)
        if prob.fixed_alpha is not None:
            alpha = np.full(prob.M, prob.fixed_alpha)
        if not is_feasible(prob, w, alpha, theta):
            raise InfeasibleError("initial point violates a budget")
        grid = phase_grid(prob.bits)
        if np.any(np.min(np.abs(np.exp(1j * theta)[:, None] - np.exp(1j * grid)[None, :]), axis=1) > 1e-9):
            raise ValueError("initial phases are off the discrete grid")
    else:
        w, alpha, theta = initial_point(prob, theta0)
    state = AoState(w, alpha + 1.0, theta, rho_w=opts.rho_w, rho_Lam=opts.rho_lam)
    ev = evaluate(prob, w, alpha, theta)
    sm = ev["sm"]

    def record(i, ev):
        row = {k: ev[k] for k in ("f_of", "rate_bits", "P_A", "pa_slack", "pmax_slack", "amp_slack")}
        row["iteration"] = i
        state.trace.append(row)
        if callback is not None:
            callback(row)

    record(0, ev)
    f_prev = ev["f_of"]
    for i in range(1, opts.i_max + 1):
        omega, nu = update_auxiliaries(state.w, sm, prob.jam, prob.sigma_R2, prob.sigma_k2)
        state.omega, state.nu = omega, nu
        if not np.any(nu):
            break
        state.w, _ = admm_beamforming(state.w, prob, sm, omega, nu, opts)
        power = None if prob.P_A_max is None else power_quadratic(prob.ds, state.w, prob.jam, prob.sigma_R2)
        if prob.fixed_alpha is None:
            loss = reflection_objective(prob, state.w, omega, nu, sm)
            ap = build_amplitude_problem(prob, state.theta, loss, power)
            state.Lambda_bar, _ = admm_amplitude(state.Lambda_bar, prob, ap, opts)
            sm = build_surrogates(prob.g_of(state.alpha, state.theta), prob.ds)
        if update_phase:
            loss = reflection_objective(prob, state.w, omega, nu, sm)
            Y, t, guard = phase_problem(prob, state.alpha, loss, power)
            state.theta, _ = discrete_phase_sweep(Y, t, prob.bits, state.theta, opts.i3_max, guard)
        ev = evaluate(prob, state.w, state.alpha, state.theta)
        sm = ev["sm"]
        record(i, ev)
        if abs(ev["f_of"] - f_prev) < opts.eta:
            break
        f_prev = ev["f_of"]
    return state, state.trace
