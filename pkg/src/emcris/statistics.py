"""Closed-form channel expectations for the decoupled active RIS.

With statistical CSI only, every term of the sum-rate surrogate and of the
amplification power is an expectation of a quadratic form in Gaussian link
matrices. This module evaluates those expectations exactly, as matrices in
the precoders (C1..C6) and as quadratic forms in the diagonal of
Gamma_tilde = Gamma_A + I (used by the reflection subproblems).

Shorthand: R = Re{Z_AA}, Rm = R^{-1/2}, Zp = Z_AA + Z0 I, Zt = Zp Rm,
Zb = Rm Zp, and g is the diagonal of Gamma_tilde.
"""

from dataclasses import dataclass

import numpy as np

from ._linalg import herm, psd_sqrt
from .channel import LinkStats, LinkStatsSet
from .multiport import CouplingModel, EffectiveChannels


def gaussian_quadratic_expectation(mu, Sigma1, Sigma2, A):
    """E[Z^H A Z] for Z = mu + Sigma1^{1/2} W Sigma2^{1/2}, W i.i.d. CN(0, 1).

    Returns:
        mu^H A mu + Tr(A Sigma1) Sigma2.
    """
    mu = np.atleast_2d(mu)
    if A.shape != (mu.shape[0],) * 2 or Sigma1.shape != A.shape or Sigma2.shape != (mu.shape[1],) * 2:
        raise ValueError("dimension mismatch")
    return mu.conj().T @ A @ mu + np.trace(A @ Sigma1) * Sigma2


def link_gram(stats: LinkStats, A=None):
    """E[Z^H A Z] for one link (A defaults to the identity)."""
    if A is None:
        A = np.eye(stats.shape[0])
    return gaussian_quadratic_expectation(stats.mu, stats.scale**2 * stats.Sigma_rx, stats.Sigma_tx, A)


def link_outer(stats: LinkStats, V):
    """E[Z V V^H Z^H] for one link; V may be a vector or a matrix of columns."""
    V = np.asarray(V).reshape(stats.shape[1], -1)
    mv = stats.mu @ V
    tx = np.real(np.trace(V.conj().T @ stats.Sigma_tx @ V))
    return mv @ mv.conj().T + stats.scale**2 * tx * stats.Sigma_rx


@dataclass(frozen=True, eq=False)
class GammaQuadratic:
    """Real quadratic function q(g) = g^H A g - 2 Re{b^H g} + c with A Hermitian."""

    A: np.ndarray
    b: np.ndarray
    c: float

    def value(self, g):
        g = np.asarray(g)
        return float(np.real(np.vdot(g, self.A @ g)) - 2 * np.real(np.vdot(self.b, g)) + self.c)

    def __add__(self, other):
        return GammaQuadratic(self.A + other.A, self.b + other.b, self.c + other.c)

    def scaled(self, s):
        return GammaQuadratic(s * self.A, s * self.b, s * self.c)

    @classmethod
    def zeros(cls, M):
        return cls(np.zeros((M, M), complex), np.zeros(M, complex), 0.0)


@dataclass(frozen=True, eq=False)
class _Cascade:
    """Transformed statistics of a direct link plus a two-hop link through the RIS.

    The direct link is BU_k or JU_qk, the first hop is BR or JR_q and the
    second hop is RU_k, all pre-multiplied by the decoupling transforms.
    """

    mu_d: np.ndarray      # (n,) direct-link mean
    s_d: float
    S_d: np.ndarray       # (n, n) direct-link transmit correlation
    Q: np.ndarray         # (M, n) Rm mu_hop
    s_h: float
    St_h: np.ndarray      # (M, M) Rm Sigma_rx,hop Rm
    S_h: np.ndarray       # (n, n) transmit correlation of the hop
    ut: np.ndarray        # (M,) mu_RU Rm
    s_r: float
    St_r: np.ndarray      # (M, M) Rm Sigma_tx,RU Rm
    Pt: np.ndarray        # (M, M) Rm E[Z_RU^H Z_RU] Rm
    Sig_ell: np.ndarray   # (M, M) Pt * St_h^T


@dataclass(frozen=True, eq=False)
class DecoupledStats:
    """Link statistics pre-transformed for the decoupled array.

    Everything that does not depend on the reflection state or the precoders
    is computed once here.
    """

    cm: CouplingModel
    stats: LinkStatsSet
    Rm: np.ndarray
    Zt: np.ndarray
    Zb: np.ndarray
    Zbb: np.ndarray        # Zb Zb^H
    ZtZt: np.ndarray       # Zt^H Zt
    P_ru: np.ndarray       # (K, M, M) E[Z_RU^H Z_RU]
    Pt_ru: np.ndarray      # (K, M, M) Rm P_ru Rm
    user: list             # [k] cascade for the BS signal
    jam: list              # [q][k] cascade for jammer q at UE k
    mu_br: np.ndarray
    mu_jr: np.ndarray      # (Q, M, N_J)

    @property
    def Z0(self):
        return self.cm.Z0

    @property
    def dims(self):
        return self.stats.dims

    @classmethod
    def build(cls, cm: CouplingModel, stats: LinkStatsSet):
        M, N, NJ, K, Q = stats.dims
        if cm.M != M:
            raise ValueError("coupling model and links disagree on M")
        Rm = cm.re_sqrt_inv
        Zp = cm.Z_plus
        Zt = Zp @ Rm
        Zb = Rm @ Zp
        P_ru = np.array([herm(link_gram(r)) for r in stats.ru]).reshape(K, M, M)
        Pt_ru = Rm @ P_ru @ Rm

        def cascade(direct, hop, k):
            ru = stats.ru[k]
            St_h = herm(Rm @ hop.Sigma_rx @ Rm)
            return _Cascade(
                mu_d=direct.mu[0], s_d=direct.scale, S_d=direct.Sigma_tx,
                Q=Rm @ hop.mu, s_h=hop.scale, St_h=St_h, S_h=hop.Sigma_tx,
                ut=(ru.mu @ Rm)[0], s_r=ru.scale, St_r=herm(Rm @ ru.Sigma_tx @ Rm),
                Pt=Pt_ru[k], Sig_ell=herm(Pt_ru[k] * St_h.T),
            )

        user = [cascade(stats.bu[k], stats.br, k) for k in range(K)]
        jam = [[cascade(stats.ju[q][k], stats.jr[q], k) for k in range(K)] for q in range(Q)]
        mu_jr = np.array([j.mu for j in stats.jr]).reshape(Q, M, NJ)
        return cls(cm, stats, Rm, Zt, Zb, Zb @ Zb.conj().T, Zt.conj().T @ Zt, P_ru, Pt_ru,
                   user, jam, stats.br.mu, mu_jr)


@dataclass(frozen=True)
class JammerStrategy:
    """Jammer precoders w_J[q, k] of shape (Q, K, N_J)."""

    w_J: np.ndarray

    def powers(self):
        """Total transmit power of each jammer."""
        return np.sum(np.abs(self.w_J) ** 2, axis=(1, 2))

    def validate(self, P_J_max, rtol=1e-9):
        if np.any(self.powers() > P_J_max * (1 + rtol)):
            raise ValueError("jammer exceeds its power budget")

    @classmethod
    def silent(cls, Q, K, NJ):
        return cls(np.zeros((Q, K, NJ), complex))


@dataclass(frozen=True, eq=False)
class SurrogateMatrices:
    """Expectation matrices at one reflection state.

    Shapes: C1 (K, N, N), C2 (Q, K, N_J, N_J), C3 (K, M, M), C4 (N, N),
    C5 (Q, N_J, N_J), C6 (M, M), H_C (K, 2N + M + 1, N) with
    H_C[k]^H H_C[k] = C1[k]. ``ell`` holds the norm factors of the last
    block of H_C.
    """

    C1: np.ndarray
    C2: np.ndarray
    C3: np.ndarray
    C4: np.ndarray
    C5: np.ndarray
    C6: np.ndarray
    H_C: np.ndarray
    ell: np.ndarray
    g: np.ndarray


def _cascade_mean(cs: _Cascade, g, Z0):
    return (cs.mu_d - 0.5 * (cs.ut * g) @ cs.Q) / (2 * Z0)


def _cascade_ell(cs: _Cascade, g):
    return float(np.sqrt(max(np.real(np.vdot(g, cs.Sig_ell @ g)), 0.0)))


def _cascade_matrix(cs: _Cascade, g, Z0):
    """E[H^H H] of the effective row channel H = (Z_d - Z_r~ D Z_h~ / 2) / 2Z0."""
    m = _cascade_mean(cs, g, Z0)
    DQ = g[:, None] * cs.Q
    ell2 = _cascade_ell(cs, g) ** 2
    C = (np.outer(m.conj(), m)
         + cs.s_d**2 / (4 * Z0**2) * cs.S_d
         + (cs.s_r**2 * DQ.conj().T @ cs.St_r @ DQ + cs.s_h**2 * ell2 * cs.S_h) / (16 * Z0**2))
    return herm(C)


def _cascade_factor(cs: _Cascade, g, Z0):
    """Stacked factor F with F^H F equal to the cascade matrix."""
    m = _cascade_mean(cs, g, Z0)
    DQ = g[:, None] * cs.Q
    ell = _cascade_ell(cs, g)
    return np.vstack([
        m[None, :],
        cs.s_d / (2 * Z0) * psd_sqrt(cs.S_d),
        cs.s_r / (4 * Z0) * psd_sqrt(cs.St_r) @ DQ,
        cs.s_h / (4 * Z0) * ell * psd_sqrt(cs.S_h),
    ]), ell


def _output_operator(ds: DecoupledStats, g):
    """G = (I - Zt D Rm / 2) / 2Z0, mapping RIS incident waves to amplified output."""
    M = g.size
    return (np.eye(M) - 0.5 * (ds.Zt * g[None, :]) @ ds.Rm) / (2 * ds.Z0)


def build_surrogates(g, ds: DecoupledStats) -> SurrogateMatrices:
    """All expectation matrices at reflection diagonal g = diag(Gamma_A + I).

    Args:
        g: length-M complex vector, or a ReflectionState.
        ds: pre-transformed statistics.
    """
    from .multiport import ReflectionState, gamma_tilde

    if isinstance(g, ReflectionState):
        g = gamma_tilde(g)
    g = np.asarray(g, dtype=complex)
    M, N, NJ, K, Q = ds.dims
    Z0 = ds.Z0
    stats = ds.stats
    C1 = np.zeros((K, N, N), complex)
    H_C = np.zeros((K, 2 * N + M + 1, N), complex)
    ell = np.zeros(K)
    for k, cs in enumerate(ds.user):
        C1[k] = _cascade_matrix(cs, g, Z0)
        H_C[k], ell[k] = _cascade_factor(cs, g, Z0)
    C2 = np.zeros((Q, K, NJ, NJ), complex)
    for q in range(Q):
        for k in range(K):
            C2[q, k] = _cascade_matrix(ds.jam[q][k], g, Z0)
    T = np.eye(M) - 0.5 * (ds.Rm * g[None, :]) @ ds.Zb
    C3 = herm(T.conj().T @ ds.P_ru @ T) / (4 * Z0**2)
    G = _output_operator(ds, g)
    GG = G.conj().T @ G
    C4 = herm(link_gram(stats.br, GG))
    C5 = np.array([herm(link_gram(j, GG)) for j in stats.jr]).reshape(Q, NJ, NJ)
    C6 = herm(ds.cm.Z_plus.conj().T @ GG @ ds.cm.Z_plus)
    return SurrogateMatrices(C1, C2, C3, C4, C5, C6, H_C, ell, g)


def _qf(w, C):
    """Real w^H C w over trailing axes."""
    return np.real(np.einsum("...i,...ij,...j->...", w.conj(), C, w))


def jamming_and_noise(sm: SurrogateMatrices, jam: JammerStrategy, sigma_R2):
    """Per-UE interference floor J_k = sum_q w_J^H C2 w_J + sigma_R^2 Tr(C3_k)."""
    jk = np.sum(_qf(jam.w_J, sm.C2), axis=0) if sm.C2.shape[0] else 0.0
    return jk + sigma_R2 * np.real(np.trace(sm.C3, axis1=1, axis2=2))


def sinr_terms(w, sm: SurrogateMatrices, jam: JammerStrategy, sigma_R2, sigma_k2):
    """Signal powers S_k and total denominators D_k of the surrogate SINRs.

    Args:
        w: precoders, shape (K, N).
    """
    w = np.asarray(w)
    # P[k, j] = w_j^H C1_k w_j
    P = np.real(np.einsum("ji,kil,jl->kj", w.conj(), sm.C1, w))
    sig = np.diag(P).copy()
    den = P.sum(axis=1) - sig + jamming_and_noise(sm, jam, sigma_R2) + np.broadcast_to(sigma_k2, sig.shape)
    return sig, den


def ergodic_rate_bound(w, sm: SurrogateMatrices, jam: JammerStrategy, sigma_R2, sigma_k2):
    """Jensen upper bound on the ergodic sum rate.

    Returns:
        (rate in bits, per-UE surrogate SINR array).
    """
    sig, den = sinr_terms(w, sm, jam, sigma_R2, sigma_k2)
    gam = sig / den
    return float(np.sum(np.log2(1 + gam))), gam


def amplification_power(w, sm: SurrogateMatrices, jam: JammerStrategy, sigma_R2):
    """Expected power radiated by the RIS amplifiers."""
    w = np.asarray(w)
    p = np.sum(_qf(w, sm.C4))
    if sm.C5.shape[0]:
        p += np.sum(_qf(jam.w_J, sm.C5[:, None]))
    return float(p + sigma_R2 * np.real(np.trace(sm.C6)))


def exact_rate_sample(eff: EffectiveChannels, w, jam: JammerStrategy, sigma_R2, sigma_k2):
    """Instantaneous SINRs and sum rate for channel realizations.

    Works on a single realization or a leading batch axis.

    Returns:
        (gamma with trailing axis K, sum rate in bits).
    """
    w = np.asarray(w)
    HW = eff.H_E @ w.T                               # [..., k, j] = H_E,k w_j
    P = np.abs(HW) ** 2
    sig = np.diagonal(P, axis1=-2, axis2=-1)
    intf = P.sum(axis=-1) - sig
    if eff.H_J.shape[-3]:
        jamp = np.sum(np.abs(np.einsum("...qkn,qkn->...qk", eff.H_J, jam.w_J)) ** 2, axis=-2)
    else:
        jamp = 0.0
    noise = sigma_R2 * np.sum(np.abs(eff.H_N) ** 2, axis=-1)
    gam = sig / (intf + jamp + noise + sigma_k2)
    return gam, np.sum(np.log2(1 + gam), axis=-1)


def output_power_sample(eff: EffectiveChannels, w, jam: JammerStrategy, sigma_R2):
    """Instantaneous amplifier output power split into BS, jammer and noise parts."""
    w = np.asarray(w)
    p_bs = np.sum(np.abs(eff.Hout_E @ w.T) ** 2, axis=(-2, -1))
    if eff.Hout_J.shape[-3]:
        p_j = np.sum(np.abs(eff.Hout_J @ np.swapaxes(jam.w_J, -1, -2)) ** 2, axis=(-3, -2, -1))
    else:
        p_j = np.zeros_like(p_bs)
    p_n = sigma_R2 * np.sum(np.abs(eff.Hout_N) ** 2, axis=(-2, -1))
    return p_bs, p_j, p_n * np.ones_like(p_bs)


# Quadratic forms in g used by the reflection subproblems.

def cascade_quadratic(cs: _Cascade, v, Z0) -> GammaQuadratic:
    """E|H v|^2 as a quadratic in g for a cascade row channel H.

    ``v`` may also be an (n, J) matrix, in which case the J terms are summed.
    """
    V = np.asarray(v).reshape(cs.mu_d.size, -1)
    d0 = cs.mu_d @ V                      # (J,)
    q = cs.Q @ V                          # (M, J)
    u = cs.ut[:, None] * q
    tx = np.real(np.trace(V.conj().T @ cs.S_h @ V))
    Gm = q @ q.conj().T + cs.s_h**2 * tx * cs.St_h
    A = herm(cs.Pt * Gm.conj()) / (16 * Z0**2)
    b = (u.conj() @ d0) / (8 * Z0**2)
    dtx = np.real(np.trace(V.conj().T @ cs.S_d @ V))
    c = (np.sum(np.abs(d0) ** 2) + cs.s_d**2 * dtx) / (4 * Z0**2)
    return GammaQuadratic(A, b, float(c))


def noise_quadratic(ds: DecoupledStats, k) -> GammaQuadratic:
    """E||H_N,k||^2 = Tr(C3_k) as a quadratic in g."""
    Z0 = ds.Z0
    P = ds.P_ru[k]
    e = np.einsum("ij,ji->i", ds.Zb @ P, ds.Rm)
    A = herm(ds.Pt_ru[k] * ds.Zbb.T) / (16 * Z0**2)
    return GammaQuadratic(A, e.conj() / (8 * Z0**2), float(np.real(np.trace(P))) / (4 * Z0**2))


def output_quadratic(ds: DecoupledStats, Y) -> GammaQuadratic:
    """E||G y||^2 given E[y y^H] = Y, as a quadratic in g."""
    Z0 = ds.Z0
    e = np.einsum("ij,ji->i", ds.Rm @ Y, ds.Zt)
    Yt = ds.Rm @ Y @ ds.Rm
    A = herm(ds.ZtZt * Yt.T) / (16 * Z0**2)
    return GammaQuadratic(A, e.conj() / (8 * Z0**2), float(np.real(np.trace(Y))) / (4 * Z0**2))


def incident_covariance(ds: DecoupledStats, w, jam: JammerStrategy, sigma_R2):
    """E[y y^H] of everything entering the output operator.

    Includes the BS signal through Z_BR, the jammers through Z_JR and the
    amplifier noise through Zp.
    """
    stats = ds.stats
    Y = link_outer(stats.br, np.asarray(w).T)
    for q, j in enumerate(stats.jr):
        Y = Y + link_outer(j, jam.w_J[q].T)
    Zp = ds.cm.Z_plus
    return herm(Y + sigma_R2 * Zp @ Zp.conj().T)


def power_quadratic(ds: DecoupledStats, w, jam: JammerStrategy, sigma_R2) -> GammaQuadratic:
    """Amplification power as a quadratic in g."""
    return output_quadratic(ds, incident_covariance(ds, w, jam, sigma_R2))
