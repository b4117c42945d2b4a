"""Scenario construction: random streams, node placement, links and jammers."""

import numpy as np

from ..channel import ChannelParams, NodeGeometry, link_statistics, ula_angle, ula_positions, ula_response
from ..multiport import RisGeometry, build_coupling_matrix, uncoupled_model
from ..statistics import DecoupledStats, JammerStrategy
from ..optimizer import Problem, SolverOptions
from .config import ScenarioConfig, db_amplitude, dbm_to_watt

# stream purposes
GEOMETRY, JAMMER, FADING, SCHEME = 0, 1, 2, 3


def stream(seed, *key):
    """Independent counter-based generator for (seed, key...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def stream_seed(seed, *key):
    """A 32-bit integer identifying the stream for (seed, key...)."""
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1)[0])


def place_nodes(cfg: ScenarioConfig, rng) -> NodeGeometry:
    """UEs uniform on the horizontal circle, jammers uniform in the rectangle."""
    ang = rng.uniform(0, 2 * np.pi, cfg.K)
    c = np.asarray(cfg.ue_center, dtype=float)
    ue = np.stack([c[0] + cfg.ue_radius * np.cos(ang), c[1] + cfg.ue_radius * np.sin(ang),
                   np.full(cfg.K, c[2])], axis=1)
    lo = np.asarray(cfg.jam_lo, dtype=float)
    hi = np.asarray(cfg.jam_hi, dtype=float)
    jam = lo + (hi - lo) * rng.uniform(size=(cfg.Q, 3))
    return NodeGeometry(cfg.bs_pos, cfg.ris_pos, ue, jam, cfg.N, cfg.N_J)


def ris_geometry(cfg: ScenarioConfig) -> RisGeometry:
    lam = cfg.lambda_c
    return RisGeometry(cfg.M_h, cfg.M_v, cfg.ds_frac * lam, lam)


def channel_params(cfg: ScenarioConfig) -> ChannelParams:
    return ChannelParams(
        lambda_c=cfg.lambda_c, beta0=cfg.beta0, beta_bu=cfg.beta_bu, beta_ju=cfg.beta_ju,
        beta_br=cfg.beta_br, beta_jr=cfg.beta_jr, beta_ru=cfg.beta_ru, kappa=cfg.kappa,
        r_corr=cfg.r_corr, Z0=cfg.Z0, sinc_squared=cfg.sinc_squared,
    )


def jammer_strategy(cfg: ScenarioConfig, geom: NodeGeometry, rng=None, P_J=None) -> JammerStrategy:
    """Jammer precoders under the configured policy.

    mrt-los: each jammer splits P_J,max equally over K beams, beam k being the
    conjugate of the LOS steering vector toward UE k.
    isotropic-random: i.i.d. CN(0, P_J,max / (K N_J)) entries.
    file: a .npy array of shape (Q, K, N_J).
    """
    P_J = dbm_to_watt(cfg.P_J_dbm) if P_J is None else P_J
    Q, K, NJ = len(geom.jam_pos), len(geom.ue_pos), geom.N_J
    if cfg.jammer_policy == "file":
        w = np.load(cfg.jammer_file)
        if w.shape != (Q, K, NJ):
            raise ValueError(f"jammer file has shape {w.shape}, expected {(Q, K, NJ)}")
        return JammerStrategy(np.asarray(w, dtype=complex))
    if cfg.jammer_policy == "isotropic-random":
        if rng is None:
            raise ValueError("isotropic-random policy needs a generator")
        z = (rng.standard_normal((Q, K, NJ)) + 1j * rng.standard_normal((Q, K, NJ))) / np.sqrt(2)
        return JammerStrategy(np.sqrt(P_J / (K * NJ)) * z)
    x = ula_positions(NJ, cfg.lambda_c)
    w = np.zeros((Q, K, NJ), complex)
    for q, jp in enumerate(geom.jam_pos):
        for k, up in enumerate(geom.ue_pos):
            a = ula_response(ula_angle(up - jp), x, cfg.lambda_c)
            w[q, k] = np.sqrt(P_J / K) * a.conj() / np.linalg.norm(a)
    return JammerStrategy(w)


def solver_options(cfg: ScenarioConfig) -> SolverOptions:
    return SolverOptions(eta=cfg.eta, i_max=cfg.i_max, i1_max=cfg.i1_max, i2_max=cfg.i2_max,
                         i3_max=cfg.i3_max, rho_w=cfg.rho_w, rho_lam=cfg.rho_lam,
                         adaptive_rho=cfg.adaptive_rho)


class Scenario:
    """One drawn instance: geometry, link statistics, coupling and jammers."""

    def __init__(self, cfg: ScenarioConfig, trial: int):
        self.cfg = cfg
        self.trial = trial
        self.nodes = place_nodes(cfg, stream(cfg.seed, GEOMETRY, trial))
        self.ris = ris_geometry(cfg)
        self.stats = link_statistics(self.nodes, self.ris, channel_params(cfg))
        self.cm_true = build_coupling_matrix(self.ris, cfg.Z0, cfg.coupling_form, cfg.coupling_metric,
                                             cfg.efficiency)
        self.cm_ideal = uncoupled_model(self.ris.M, cfg.Z0)
        self.jam = jammer_strategy(cfg, self.nodes, stream(cfg.seed, JAMMER, trial))
        self._ds = {}
        self.cache = {}

    def decoupled(self, coupled: bool) -> DecoupledStats:
        if coupled not in self._ds:
            cm = self.cm_true if coupled else self.cm_ideal
            self._ds[coupled] = DecoupledStats.build(cm, self.stats)
        return self._ds[coupled]

    def problem(self, coupled=True, passive=False) -> Problem:
        cfg = self.cfg
        P_max = dbm_to_watt(cfg.P_max_dbm)
        P_A = dbm_to_watt(cfg.P_A_dbm)
        common = dict(ds=self.decoupled(coupled), jam=self.jam, sigma_k2=dbm_to_watt(cfg.sigma_k_dbm),
                      gamma_max=db_amplitude(cfg.gamma_max2_db), bits=cfg.bits, L_PS=cfg.L_PS)
        if passive:
            return Problem(sigma_R2=0.0, P_max=P_max + P_A, P_A_max=None,
                           fixed_alpha=1.0 / cfg.L_PS**2, **common)
        return Problem(sigma_R2=dbm_to_watt(cfg.sigma_R_dbm), P_max=P_max, P_A_max=P_A, **common)
