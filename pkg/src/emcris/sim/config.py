"""Scenario configuration and its flat ``key = value`` text format."""

import dataclasses
from dataclasses import dataclass, field, fields

SCHEMES = ("proposed", "ideal", "mc-unaware", "passive")
SWEEPS = ("none", "pmax", "pj", "pa", "m", "ris-y", "ds", "iters")
JAMMER_POLICIES = ("mrt-los", "isotropic-random", "file")


@dataclass
class ScenarioConfig:
    """All scenario, channel, solver and run-control settings.

    Powers are in dBm, the amplitude cap in dB of Gamma_max^2, positions in
    meters and the element spacing as a fraction of the wavelength.
    """

    # counts
    N: int = 4
    N_J: int = 4
    K: int = 4
    Q: int = 3
    M_h: int = 4
    M_v: int = 4
    # powers
    P_max_dbm: float = 30.0
    P_J_dbm: float = 10.0
    P_A_dbm: float = 10.0
    gamma_max2_db: float = 30.0
    sigma_R_dbm: float = -105.0
    sigma_k_dbm: float = -105.0
    # geometry
    bs_pos: tuple = (40.0, 0.0, 1.0)
    ris_pos: tuple = (0.0, 60.0, 2.0)
    ue_center: tuple = (20.0, 120.0, 1.0)
    ue_radius: float = 15.0
    jam_lo: tuple = (10.0, 120.0, 0.0)
    jam_hi: tuple = (40.0, 150.0, 0.0)
    # channel
    freq_ghz: float = 2.4
    beta0: float = 30.0
    beta_bu: float = 2.75
    beta_ju: float = 2.75
    beta_br: float = 2.5
    beta_jr: float = 2.5
    beta_ru: float = 2.2
    kappa: float = 3.0
    r_corr: float = 0.5
    sinc_squared: bool = False
    # surface
    ds_frac: float = 0.25
    L_PS: float = 1.0
    bits: int = 3
    Z0: float = 50.0
    coupling_form: str = "radiating"
    coupling_metric: str = "index"
    efficiency: float = 0.9
    # jammers
    jammer_policy: str = "mrt-los"
    jammer_file: str = ""
    # solver
    eta: float = 1e-3
    i_max: int = 200
    i1_max: int = 400
    i2_max: int = 400
    i3_max: int = 100
    rho_w: float = 1.0
    rho_lam: float = 1.0
    adaptive_rho: bool = True
    # run control
    trials: int = 30
    seed: int = 1
    sweep: str = "none"
    sweep_grid: tuple = ()
    schemes: tuple = SCHEMES
    mc_draws: int = 20000
    timing: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        for name in ("N", "N_J", "K", "M_h", "M_v"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.Q < 0:
            raise ValueError("Q must be nonnegative")
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown sweep {self.sweep!r}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")
        if self.jammer_policy not in JAMMER_POLICIES:
            raise ValueError(f"unknown jammer policy {self.jammer_policy!r}")
        grid = list(self.sweep_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        for name in ("P_max_dbm", "P_J_dbm", "P_A_dbm", "sigma_R_dbm", "sigma_k_dbm"):
            v = getattr(self, name)
            if v != v or abs(v) == float("inf"):
                raise ValueError(f"{name} must be finite")
        if self.mc_draws < 1:
            raise ValueError("mc_draws must be at least 1")

    @property
    def M(self):
        return self.M_h * self.M_v

    @property
    def lambda_c(self):
        return 299792458.0 / (self.freq_ghz * 1e9)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def dbm_to_watt(dbm):
    return 10 ** ((dbm - 30) / 10)


def db_amplitude(db):
    """Amplitude cap from a power ratio in dB: 10^{dB / 20}."""
    return 10 ** (db / 20)


def _parse_value(text, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, tuple):
        return tuple(float(t) for t in text.split(",") if t.strip())
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text


def parse_config(text, base=None) -> ScenarioConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) over the defaults."""
    base = base or ScenarioConfig()
    defaults = {f.name: getattr(base, f.name) for f in fields(ScenarioConfig)}
    values = dict(defaults)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in defaults:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        default = defaults[key]
        if key == "schemes":
            values[key] = tuple(t.strip() for t in val.split(",") if t.strip())
        elif key == "sweep_grid":
            values[key] = tuple(float(t) for t in val.split(",") if t.strip())
        else:
            values[key] = _parse_value(val, default)
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ScenarioConfig = None) -> str:
    """Render a config (the defaults if None) in the text format."""
    cfg = cfg or ScenarioConfig()
    lines = ["# scenario configuration (key = value, '#' starts a comment)"]
    for f in fields(ScenarioConfig):
        lines.append(f"{f.name} = {_format_value(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"
