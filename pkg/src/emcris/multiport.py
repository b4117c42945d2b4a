"""Coupled multiport model of an active RIS.

Covers the mutual-coupling impedance matrix, S/Z parameter conversions, the
effective end-to-end channels in S-, Z- and decoupled (DA) form, and the
lossless power matching network used by the decoupling architecture.

Link matrices may carry arbitrary leading batch axes; every channel routine
works on the trailing axes so Monte Carlo draws can be processed at once.
"""

from dataclasses import dataclass, field

import numpy as np

from ._linalg import COND_LIMIT, spd_sqrt_pair

COUPLING_FORMS = ("radiating", "printed")
COUPLING_METRICS = ("index", "physical")


@dataclass(frozen=True)
class RisGeometry:
    """Uniform planar array of reflecting elements in the y-z plane.

    Element o (0-based) sits at u_o = [0, (o mod M_h) d_h, floor(o / M_h) d_v].
    """

    M_h: int
    M_v: int
    d_s: float
    lambda_c: float
    d_h: float | None = None
    d_v: float | None = None

    def __post_init__(self):
        if self.M_h < 1 or self.M_v < 1:
            raise ValueError("RIS needs at least one row and one column")
        if self.d_s <= 0 or self.lambda_c <= 0:
            raise ValueError("spacing and wavelength must be positive")
        if self.d_h is None:
            object.__setattr__(self, "d_h", float(self.d_s))
        if self.d_v is None:
            object.__setattr__(self, "d_v", float(self.d_s))

    @property
    def M(self) -> int:
        return self.M_h * self.M_v

    def element_positions(self) -> np.ndarray:
        """(M, 3) element coordinates relative to the array origin."""
        o = np.arange(self.M)
        return np.stack(
            [np.zeros(self.M), (o % self.M_h) * self.d_h, (o // self.M_h) * self.d_v],
            axis=1,
        )


@dataclass(frozen=True)
class ReflectionState:
    """Amplitudes and discrete phases of the reflecting elements."""

    alpha: np.ndarray
    theta: np.ndarray
    L_PS: float = 1.0

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        theta = np.asarray(self.theta, dtype=float).ravel()
        if alpha.shape != theta.shape:
            raise ValueError("alpha and theta must have the same length")
        if np.any(alpha < 0):
            raise ValueError("amplitudes must be nonnegative")
        if not 0 < self.L_PS <= 1:
            raise ValueError("phase-shifter loss must lie in (0, 1]")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "theta", theta)

    @property
    def M(self) -> int:
        return self.alpha.size

    def validate(self, bits: int, gamma_max: float, atol=1e-9):
        """Raise ValueError unless phases lie on the grid and amplitudes respect the cap."""
        grid = phase_grid(bits)
        dist = np.min(np.abs(np.exp(1j * self.theta[:, None]) - np.exp(1j * grid[None, :])), axis=1)
        if np.any(dist > 1e-9):
            raise ValueError("phase outside the discrete set")
        if np.any(self.L_PS**2 * self.alpha > gamma_max * (1 + atol)):
            raise ValueError("amplitude above the amplification cap")


def phase_grid(bits: int) -> np.ndarray:
    """Discrete phase set {k 2pi / 2^b : k = 0..2^b - 1}."""
    if bits < 1:
        raise ValueError("need at least one phase bit")
    return np.arange(2**bits) * (2 * np.pi / 2**bits)


@dataclass(frozen=True, eq=False)
class CouplingModel:
    """Mutual impedance matrix of the RIS ports plus cached derived matrices."""

    Z_AA: np.ndarray
    Z0: float
    S_AA: np.ndarray = field(repr=False)
    Z_plus: np.ndarray = field(repr=False)
    re_sqrt: np.ndarray = field(repr=False)
    re_sqrt_inv: np.ndarray = field(repr=False)

    @classmethod
    def from_impedance(cls, Z_AA, Z0=50.0, sym_tol=1e-12):
        """Validate Z_AA and populate the caches.

        Raises:
            ValueError: if Z_AA is not symmetric or its real part is not PD.
        """
        Z_AA = np.array(Z_AA, dtype=complex)
        if Z_AA.ndim != 2 or Z_AA.shape[0] != Z_AA.shape[1]:
            raise ValueError("Z_AA must be square")
        if np.linalg.norm(Z_AA - Z_AA.T) > sym_tol * max(np.linalg.norm(Z_AA), 1.0):
            raise ValueError("Z_AA must be symmetric (reciprocal network)")
        Z_AA = 0.5 * (Z_AA + Z_AA.T)
        try:
            re_sqrt, re_sqrt_inv = spd_sqrt_pair(Z_AA.real)
        except np.linalg.LinAlgError:
            raise ValueError(
                "coupling model not physically realizable at this spacing: "
                "Re{Z_AA} is not positive definite"
            ) from None
        M = Z_AA.shape[0]
        eye = np.eye(M)
        Z_plus = Z_AA + Z0 * eye
        S_AA = np.linalg.solve(Z_plus, Z_AA - Z0 * eye)
        return cls(Z_AA, float(Z0), S_AA, Z_plus, re_sqrt, re_sqrt_inv)

    @property
    def M(self) -> int:
        return self.Z_AA.shape[0]


def coupling_impedance(geom: RisGeometry, Z0=50.0, form="radiating", metric="index", efficiency=0.9):
    """Raw mutual impedance matrix of the array (no validation).

    With x = 2 pi r_ij / lambda, the "printed" form is -Z0 e^{-jx} / x. Its
    real part is indefinite for dense arrays, so the default "radiating"
    form uses eta Z0 j e^{-jx} / x, whose real part eta Z0 sin(x)/x is the
    mutual radiation resistance of isotropic radiators. The radiation
    efficiency eta < 1 keeps Re{Z_AA} >= (1 - eta) Z0 I.

    Args:
        geom: array geometry.
        Z0: reference and self impedance in ohms.
        form: "radiating" or "printed".
        metric: "index" uses d_s |i - j|; "physical" uses ||u_i - u_j||.
        efficiency: radiation efficiency for the radiating form.

    Returns:
        (M, M) complex symmetric matrix with Z0 on the diagonal.
    """
    if form not in COUPLING_FORMS:
        raise ValueError(f"unknown coupling form {form!r}")
    if metric not in COUPLING_METRICS:
        raise ValueError(f"unknown coupling metric {metric!r}")
    M = geom.M
    if metric == "index":
        idx = np.arange(M)
        r = geom.d_s * np.abs(idx[:, None] - idx[None, :])
    else:
        u = geom.element_positions()
        r = np.linalg.norm(u[:, None, :] - u[None, :, :], axis=2)
    x = 2 * np.pi * r / geom.lambda_c
    off = ~np.eye(M, dtype=bool)
    Z = np.full((M, M), Z0, dtype=complex)
    xo = x[off]
    if form == "printed":
        Z[off] = -Z0 * np.exp(-1j * xo) / xo
    else:
        if not 0 < efficiency <= 1:
            raise ValueError("efficiency must lie in (0, 1]")
        Z[off] = efficiency * Z0 * 1j * np.exp(-1j * xo) / xo
    return Z


def build_coupling_matrix(geom: RisGeometry, Z0=50.0, form="radiating", metric="index", efficiency=0.9):
    """Build and validate the coupling model of an array.

    Raises:
        ValueError: if Re{Z_AA} is not positive definite for this geometry.
    """
    return CouplingModel.from_impedance(coupling_impedance(geom, Z0, form, metric, efficiency), Z0)


def uncoupled_model(M: int, Z0=50.0) -> CouplingModel:
    """Coupling model of an ideal array, Z_AA = Z0 I."""
    return CouplingModel.from_impedance(Z0 * np.eye(M), Z0)


def gamma_from_state(state: ReflectionState) -> np.ndarray:
    """Diagonal of Gamma_A = L_PS^2 Lambda e^{j 2 Theta} as a length-M vector."""
    return state.L_PS**2 * state.alpha * np.exp(2j * state.theta)


def gamma_tilde(state: ReflectionState) -> np.ndarray:
    """Diagonal of Gamma_A + I."""
    return 1.0 + gamma_from_state(state)


def _diag_vector(a):
    a = np.asarray(a)
    return np.diag(a) if a.ndim == 2 else a


def impedance_from_gamma(gamma, Z0=50.0, tol=1e-12):
    """Load impedances Z_A = Z0 (1 + Gamma) / (1 - Gamma), elementwise.

    Args:
        gamma: diagonal reflection coefficients (vector or diagonal matrix).

    Returns:
        Vector of the diagonal of Z_A.
    """
    g = np.asarray(_diag_vector(gamma), dtype=complex)
    if np.any(np.abs(1 - g) <= tol):
        raise ValueError("unit reflection coefficient: open-circuit load")
    return Z0 * (1 + g) / (1 - g)


def gamma_from_impedance(z_a, Z0=50.0):
    """Reflection coefficients (Z_A - Z0) / (Z_A + Z0), elementwise."""
    z = np.asarray(_diag_vector(z_a), dtype=complex)
    if np.any(z + Z0 == 0):
        raise ValueError("load impedance equals -Z0")
    return (z - Z0) / (z + Z0)


def s_from_z_coupling(cm: CouplingModel) -> np.ndarray:
    """S_AA = (Z_AA + Z0 I)^{-1} (Z_AA - Z0 I)."""
    Zp = cm.Z_plus
    if np.linalg.cond(Zp) > COND_LIMIT:
        raise np.linalg.LinAlgError("degenerate coupling matrix")
    return np.linalg.solve(Zp, cm.Z_AA - cm.Z0 * np.eye(cm.M))


@dataclass(frozen=True)
class ChannelSet:
    """One realization (or a batch) of every link matrix.

    Shapes on the trailing axes: Z_BR (M, N), Z_JR (Q, M, N_J), Z_RU (K, M),
    Z_BU (K, N), Z_JU (Q, K, N_J). ``form`` is "Z" for impedance parameters
    and "S" for scattering parameters.
    """

    Z_BR: np.ndarray
    Z_JR: np.ndarray
    Z_RU: np.ndarray
    Z_BU: np.ndarray
    Z_JU: np.ndarray
    form: str = "Z"

    @property
    def dims(self):
        """(M, N, N_J, K, Q)."""
        M, N = self.Z_BR.shape[-2:]
        Q, _, NJ = self.Z_JR.shape[-3:]
        K = self.Z_RU.shape[-2]
        return M, N, NJ, K, Q


@dataclass(frozen=True)
class EffectiveChannels:
    """End-to-end and RIS-output channel operators.

    Trailing shapes: H_E (K, N), H_J (Q, K, N_J), H_N (K, M), Hout_E (M, N),
    Hout_J (Q, M, N_J), Hout_N (M, M). ``provenance`` is "S", "Z" or "DA".
    """

    H_E: np.ndarray
    H_J: np.ndarray
    H_N: np.ndarray
    Hout_E: np.ndarray
    Hout_J: np.ndarray
    Hout_N: np.ndarray
    provenance: str

    def as_tuple(self):
        return (self.H_E, self.H_J, self.H_N, self.Hout_E, self.Hout_J, self.Hout_N)


def _z_form(inner, cm: CouplingModel, links: ChannelSet, provenance):
    """Channels of the form Z_x - Z_y W Z_z, where W stands for (Z_A + Z_AA)^{-1}."""
    c = 1.0 / (2 * cm.Z0)
    Zp = cm.Z_plus
    W_BR = inner @ links.Z_BR
    W_JR = inner[..., None, :, :] @ links.Z_JR
    W_P = inner @ Zp
    Z_RU_q = links.Z_RU[..., None, :, :]
    return EffectiveChannels(
        H_E=c * (links.Z_BU - links.Z_RU @ W_BR),
        H_J=c * (links.Z_JU - Z_RU_q @ W_JR),
        H_N=c * (links.Z_RU - links.Z_RU @ W_P),
        Hout_E=c * (links.Z_BR - Zp @ W_BR),
        Hout_J=c * (links.Z_JR - Zp @ W_JR),
        Hout_N=np.broadcast_to(c * (Zp - Zp @ W_P), links.Z_BR.shape[:-2] + Zp.shape).copy(),
        provenance=provenance,
    )


def effective_channels_z(z_a, cm: CouplingModel, z_links: ChannelSet) -> EffectiveChannels:
    """Effective channels from impedance parameters and diagonal loads Z_A.

    Args:
        z_a: load impedances (vector or diagonal matrix), or a full M x M load
            matrix such as the decoupled load.
    """
    z_a = np.asarray(z_a, dtype=complex)
    Z_A = np.diag(z_a) if z_a.ndim == 1 else z_a
    A = Z_A + cm.Z_AA
    if np.linalg.cond(A) > COND_LIMIT:
        raise np.linalg.LinAlgError("resonant load/coupling combination")
    return _z_form(np.linalg.inv(A), cm, z_links, "Z")


def effective_channels_s(gamma, cm: CouplingModel, s_links: ChannelSet) -> EffectiveChannels:
    """Effective channels from scattering parameters.

    Uses the shared factor F = (I - Gamma S_AA)^{-1} Gamma.
    """
    g = np.asarray(_diag_vector(gamma), dtype=complex)
    M = cm.M
    loop = np.eye(M) - g[:, None] * cm.S_AA
    if np.linalg.cond(loop) > COND_LIMIT:
        raise np.linalg.LinAlgError("oscillation condition: loop gain reaches unity")
    F = np.linalg.solve(loop, np.diag(g))
    F_BR = F @ s_links.Z_BR
    F_JR = F[..., None, :, :] @ s_links.Z_JR
    return EffectiveChannels(
        H_E=s_links.Z_BU + s_links.Z_RU @ F_BR,
        H_J=s_links.Z_JU + s_links.Z_RU[..., None, :, :] @ F_JR,
        H_N=s_links.Z_RU @ F,
        Hout_E=F_BR,
        Hout_J=F_JR,
        Hout_N=np.broadcast_to(F, s_links.Z_BR.shape[:-2] + (M, M)).copy(),
        provenance="S",
    )


def s_links_from_z_links(z_links: ChannelSet, cm: CouplingModel) -> ChannelSet:
    """Convert impedance-form links to the equivalent scattering-form links."""
    Z0 = cm.Z0
    Zp = cm.Z_plus
    if np.linalg.cond(Zp) > COND_LIMIT:
        raise np.linalg.LinAlgError("degenerate coupling matrix")
    Zp_inv = np.linalg.inv(Zp)
    Z_minus = cm.Z_AA - Z0 * np.eye(cm.M)
    S_BR = Zp_inv @ z_links.Z_BR
    S_JR = Zp_inv @ z_links.Z_JR
    S_RU = (z_links.Z_RU / (2 * Z0)) @ (np.eye(cm.M) - Zp_inv @ Z_minus)
    S_BU = (z_links.Z_BU - z_links.Z_RU @ S_BR) / (2 * Z0)
    S_JU = (z_links.Z_JU - z_links.Z_RU[..., None, :, :] @ S_JR) / (2 * Z0)
    return ChannelSet(S_BR, S_JR, S_RU, S_BU, S_JU, form="S")


def pmn_decoupling(cm: CouplingModel) -> np.ndarray:
    """2M x 2M impedance matrix of the lossless reciprocal matching network."""
    M = cm.M
    off = -1j * np.sqrt(cm.Z0) * cm.re_sqrt
    Z_D = np.zeros((2 * M, 2 * M), dtype=complex)
    Z_D[:M, M:] = off
    Z_D[M:, :M] = off
    Z_D[M:, M:] = -1j * cm.Z_AA.imag
    return Z_D


def decoupled_load(z_a, cm: CouplingModel) -> np.ndarray:
    """Load seen by the array through the matching network.

    Z_A^D = -j Im{Z_AA} + Z0 Re{Z_AA}^{1/2} Z_A^{-1} Re{Z_AA}^{1/2}.
    """
    z = np.asarray(_diag_vector(z_a), dtype=complex)
    if np.any(np.abs(z) == 0):
        raise np.linalg.LinAlgError("singular load impedance")
    R = cm.re_sqrt
    return -1j * cm.Z_AA.imag + cm.Z0 * (R / z[None, :]) @ R


def da_inner(g_tilde, cm: CouplingModel) -> np.ndarray:
    """(Z_A^D + Z_AA)^{-1} written without inversion: R^{-1/2} diag(g)/2 R^{-1/2}."""
    Rm = cm.re_sqrt_inv
    return 0.5 * (Rm * np.asarray(g_tilde)[..., None, :]) @ Rm


def da_channels(state_or_gt, cm: CouplingModel, z_links: ChannelSet) -> EffectiveChannels:
    """Inversion-free channels of the decoupled array.

    Args:
        state_or_gt: a ReflectionState or the diagonal of Gamma_A + I.
    """
    if isinstance(state_or_gt, ReflectionState):
        g = gamma_tilde(state_or_gt)
    else:
        g = np.asarray(state_or_gt, dtype=complex)
    return _z_form(da_inner(g, cm), cm, z_links, "DA")
