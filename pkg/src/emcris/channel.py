"""Spatially correlated Rician link statistics and channel sampling.

Every link is Z = mu + s Sigma_rx^{1/2} W Sigma_tx^{1/2}, where W has i.i.d.
CN(0, 1) entries, mu = Z0 eps_L Z^L is the scaled line-of-sight part and
s = Z0 eps_N is the scattered amplitude. All quantities are in ohms.

Frame: the RIS lies in the y-z plane facing +x, the BS and jammer ULAs lie
along the x-axis with half-wavelength spacing.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import psd_sqrt
from .multiport import ChannelSet, RisGeometry


def ula_response(angle, positions, lambda_c):
    """Steering vector e^{j (2 pi / lambda) x_n sin(angle)} of a linear array."""
    x = np.asarray(positions, dtype=float)
    return np.exp(1j * 2 * np.pi / lambda_c * x * np.sin(angle))


def ula_positions(n, lambda_c, spacing=None):
    """Element offsets of an n-element ULA (default spacing lambda/2)."""
    d = lambda_c / 2 if spacing is None else spacing
    return np.arange(n) * d


def upa_response(azimuth, elevation, geom: RisGeometry):
    """Planar-array response a_{M_v}(az, el) kron a_{M_h}(az).

    The ray direction is (cos az cos el, sin az, cos az sin el), so the
    horizontal (y) cosine is sin az and the vertical (z) cosine is cos az sin el.
    """
    k = 2 * np.pi / geom.lambda_c
    a_h = np.exp(1j * k * geom.d_h * np.arange(geom.M_h) * np.sin(azimuth))
    a_v = np.exp(1j * k * geom.d_v * np.arange(geom.M_v) * np.cos(azimuth) * np.sin(elevation))
    return np.kron(a_v, a_h)


def ris_angles(direction):
    """Azimuth and elevation of a ray leaving the RIS along ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    return float(np.arcsin(np.clip(u[1], -1, 1))), float(np.arctan2(u[2], u[0]))


def ula_angle(direction):
    """Angle from broadside of a ray leaving an x-axis ULA along ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    return float(np.arcsin(np.clip(u[0], -1, 1)))


def path_loss_db(d, beta, beta0=30.0):
    """Path loss beta0 + 10 beta log10(d) in dB, d in meters (d0 = 1 m)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return beta0 + 10 * beta * np.log10(d)


def path_gain(d, beta, beta0=30.0):
    """Linear power gain 10^{-PL_dB / 10}."""
    return 10 ** (-path_loss_db(d, beta, beta0) / 10)


def exp_correlation(n, r, phi=0.0):
    """Exponential correlation matrix with entries delta^{i-j} below the diagonal.

    delta = r e^{j phi}; entries above the diagonal are conjugated.
    """
    if not 0 <= r < 1:
        raise ValueError("correlation magnitude must lie in [0, 1)")
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    delta = r * np.exp(1j * phi)
    lower = delta ** np.abs(diff)
    return np.where(diff >= 0, lower, np.conj(lower))


def sinc_correlation(geom: RisGeometry, squared=False):
    """Isotropic-scattering correlation sinc(2 ||u_i - u_j|| / lambda) of the RIS.

    Uses the normalized sinc so the diagonal is one. ``squared`` switches the
    argument to the squared distance for sensitivity checks.
    """
    u = geom.element_positions()
    dist = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=2)
    if squared:
        dist = dist**2
    return np.sinc(2 * dist / geom.lambda_c)


@dataclass(frozen=True, eq=False)
class LinkStats:
    """First and second order statistics of one link.

    mu is the mean in ohms, Sigma_rx / Sigma_tx are the receive and transmit
    correlation matrices and PL is the linear path gain.
    """

    mu: np.ndarray
    eps_L: float
    eps_N: float
    Sigma_rx: np.ndarray
    Sigma_tx: np.ndarray
    kappa: float
    PL: float
    Z0: float = 50.0
    rx_half: np.ndarray = field(init=False, repr=False)
    tx_half: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mu = np.atleast_2d(np.asarray(self.mu, dtype=complex))
        object.__setattr__(self, "mu", mu)
        if self.Sigma_rx.shape != (mu.shape[0],) * 2 or self.Sigma_tx.shape != (mu.shape[1],) * 2:
            raise ValueError("correlation sizes do not match the mean")
        object.__setattr__(self, "rx_half", psd_sqrt(self.Sigma_rx))
        object.__setattr__(self, "tx_half", psd_sqrt(self.Sigma_tx))

    @property
    def scale(self) -> float:
        """Scattered-component amplitude s = Z0 eps_N in ohms."""
        return self.Z0 * self.eps_N

    @property
    def shape(self):
        return self.mu.shape

    @classmethod
    def rician(cls, los, PL, kappa, Sigma_rx, Sigma_tx, Z0=50.0):
        """Build a link from its unit LOS matrix, path gain and Rician factor."""
        if np.isinf(kappa):
            eps_L, eps_N = np.sqrt(PL), 0.0
        else:
            eps_L = np.sqrt(kappa * PL / (kappa + 1))
            eps_N = np.sqrt(PL / (kappa + 1))
        mu = Z0 * eps_L * np.atleast_2d(los)
        return cls(mu, float(eps_L), float(eps_N), np.asarray(Sigma_rx), np.asarray(Sigma_tx),
                   float(kappa), float(PL), float(Z0))

    @classmethod
    def zero(cls, rx, tx, Z0=50.0):
        """A link that is identically zero."""
        return cls(np.zeros((rx, tx)), 0.0, 0.0, np.eye(rx), np.eye(tx), np.inf, 0.0, Z0)


def sample_channel(stats: LinkStats, rng, size=None):
    """Draw realizations of one link.

    Args:
        stats: link statistics.
        rng: numpy Generator.
        size: optional number of draws (adds a leading axis).
    """
    shape = stats.shape if size is None else (size,) + stats.shape
    if stats.scale == 0:
        return np.broadcast_to(stats.mu, shape).copy()
    W = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    return stats.mu + stats.scale * (stats.rx_half @ W @ stats.tx_half)


@dataclass(frozen=True, eq=False)
class LinkStatsSet:
    """Statistics of every link of one scenario.

    Attributes:
        br: BS to RIS, (M, N).
        jr: jammer q to RIS, list of (M, N_J).
        ru: RIS to UE k, list of (1, M).
        bu: BS to UE k, list of (1, N).
        ju: jammer q to UE k, nested list [q][k] of (1, N_J).
    """

    br: LinkStats
    jr: list
    ru: list
    bu: list
    ju: list

    @property
    def dims(self):
        """(M, N, N_J, K, Q)."""
        M, N = self.br.shape
        NJ = self.jr[0].shape[1] if self.jr else (self.ju[0][0].shape[1] if self.ju else 1)
        return M, N, NJ, len(self.ru), len(self.jr)

    @property
    def Z0(self):
        return self.br.Z0

    def mean_channels(self) -> ChannelSet:
        """The deterministic mean of every link as a ChannelSet."""
        M, N, NJ, K, Q = self.dims
        return ChannelSet(
            self.br.mu.copy(),
            np.array([j.mu for j in self.jr]).reshape(Q, M, NJ),
            np.array([r.mu[0] for r in self.ru]).reshape(K, M),
            np.array([b.mu[0] for b in self.bu]).reshape(K, N),
            np.array([[x.mu[0] for x in row] for row in self.ju]).reshape(Q, K, NJ),
        )

    def sample(self, rng, size=None) -> ChannelSet:
        """Draw independent realizations of all links (leading batch axis if size)."""
        M, N, NJ, K, Q = self.dims
        lead = () if size is None else (size,)
        Z_BR = sample_channel(self.br, rng, size)
        Z_JR = np.stack([sample_channel(j, rng, size) for j in self.jr], axis=-3) if Q else \
            np.zeros(lead + (0, M, NJ), complex)
        Z_RU = np.concatenate([sample_channel(r, rng, size) for r in self.ru], axis=-2)
        Z_BU = np.concatenate([sample_channel(b, rng, size) for b in self.bu], axis=-2)
        if Q:
            Z_JU = np.stack(
                [np.concatenate([sample_channel(x, rng, size) for x in row], axis=-2) for row in self.ju],
                axis=-3,
            )
        else:
            Z_JU = np.zeros(lead + (0, K, NJ), complex)
        return ChannelSet(Z_BR, Z_JR, Z_RU, Z_BU, Z_JU)


@dataclass(frozen=True)
class NodeGeometry:
    """Node coordinates and antenna counts."""

    bs_pos: np.ndarray
    ris_pos: np.ndarray
    ue_pos: np.ndarray
    jam_pos: np.ndarray
    N: int
    N_J: int

    def __post_init__(self):
        for name in ("bs_pos", "ris_pos"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))
        object.__setattr__(self, "ue_pos", np.asarray(self.ue_pos, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "jam_pos", np.asarray(self.jam_pos, dtype=float).reshape(-1, 3))
        # only endpoints of a link must be distinct; UEs may share a position
        tx = np.vstack([self.bs_pos, self.jam_pos])
        rx = np.vstack([self.ris_pos, self.ue_pos])
        dist = np.linalg.norm(tx[:, None] - rx[None, :], axis=2)
        ris_ue = np.linalg.norm(self.ue_pos - self.ris_pos, axis=1)
        if np.any(dist <= 0) or np.any(ris_ue <= 0):
            raise ValueError("coincident nodes")


@dataclass(frozen=True)
class ChannelParams:
    """Large-scale and correlation parameters of the channel model.

    Path-loss exponents default to BU/JU 2.75, BR/JR 2.5, RU 2.2.
    """

    lambda_c: float = 0.125
    beta0: float = 30.0
    beta_bu: float = 2.75
    beta_ju: float = 2.75
    beta_br: float = 2.5
    beta_jr: float = 2.5
    beta_ru: float = 2.2
    kappa: float = 3.0
    r_corr: float = 0.5
    Z0: float = 50.0
    sinc_squared: bool = False


def link_statistics(geom: NodeGeometry, ris: RisGeometry, params: ChannelParams = ChannelParams()):
    """Statistics of every link for a given node placement.

    The exponential correlation phase at each ULA is the inter-antenna phase
    progression of the ray toward the RIS.
    """
    lam = params.lambda_c
    Z0 = params.Z0
    kap = params.kappa
    x_bs = ula_positions(geom.N, lam)
    x_jam = ula_positions(geom.N_J, lam)
    Sigma_R = sinc_correlation(ris, params.sinc_squared)
    one = np.ones((1, 1))

    def ris_vec(other):
        return upa_response(*ris_angles(other - geom.ris_pos), ris)

    def ula_vec(src, dst, x):
        return ula_response(ula_angle(dst - src), x, lam)

    def ula_corr(src, n, x):
        phase = 2 * np.pi / lam * (x[1] - x[0] if n > 1 else 0) * np.sin(ula_angle(geom.ris_pos - src))
        return exp_correlation(n, params.r_corr, phase)

    def dist(a, b):
        return float(np.linalg.norm(a - b))

    Sigma_B = ula_corr(geom.bs_pos, geom.N, x_bs)
    br = LinkStats.rician(
        np.outer(ris_vec(geom.bs_pos), ula_vec(geom.bs_pos, geom.ris_pos, x_bs)),
        path_gain(dist(geom.bs_pos, geom.ris_pos), params.beta_br, params.beta0),
        kap, Sigma_R, Sigma_B, Z0,
    )
    jr, ju = [], []
    for jp in geom.jam_pos:
        Sigma_J = ula_corr(jp, geom.N_J, x_jam)
        jr.append(LinkStats.rician(
            np.outer(ris_vec(jp), ula_vec(jp, geom.ris_pos, x_jam)),
            path_gain(dist(jp, geom.ris_pos), params.beta_jr, params.beta0),
            kap, Sigma_R, Sigma_J, Z0,
        ))
        ju.append([
            LinkStats.rician(
                ula_vec(jp, up, x_jam)[None, :],
                path_gain(dist(jp, up), params.beta_ju, params.beta0),
                kap, one, Sigma_J, Z0,
            )
            for up in geom.ue_pos
        ])
    ru, bu = [], []
    for up in geom.ue_pos:
        ru.append(LinkStats.rician(
            ris_vec(up)[None, :],
            path_gain(dist(geom.ris_pos, up), params.beta_ru, params.beta0),
            kap, one, Sigma_R, Z0,
        ))
        bu.append(LinkStats.rician(
            ula_vec(geom.bs_pos, up, x_bs)[None, :],
            path_gain(dist(geom.bs_pos, up), params.beta_bu, params.beta0),
            kap, one, Sigma_B, Z0,
        ))
    return LinkStatsSet(br, jr, ru, bu, ju)
