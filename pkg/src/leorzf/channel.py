"""Time-varying LEO downlink channel.

Circular-orbit pass geometry over a spherical Earth, uniform planar
array manifold, Rician fading with a deterministic line-of-sight part,
and DFT-codebook analog beam steering. The geometric (LOS-only,
unit-gain) effective channel drives the precoder; the faded full channel
is what the sum-rate KPI is evaluated on.

Matrix convention: channel matrices are stored with row n equal to the
conjugated response of user terminal n, so ``row @ x`` is directly the
sample UT n receives for a transmit vector x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BelowMinElevationError, UnsupportedGeometryError

EARTH_RADIUS_M = 6371e3
GM_EARTH = 3.986004418e14        # m^3/s^2
SPEED_OF_LIGHT_M_S = 299_792_458.0
BOLTZMANN_J_K = 1.380649e-23
SYSTEM_NOISE_TEMP_K = 290.0
RICIAN_K_CAP = 1e12              # "infinite" Rician factor


@dataclass
class ArrayGeometry:
    """Planar antenna grid in the z = 0 plane of the array frame."""

    n_x: int
    n_y: int
    spacing_m: float
    element_positions: np.ndarray = field(repr=False)  # (N_t, 3) meters
    is_uniform_grid: bool = True

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]

    @classmethod
    def uniform_planar(cls, n_x: int, n_y: int, wavelength_m: float,
                       spacing_wavelengths: float = 0.5) -> "ArrayGeometry":
        """Centered n_x-by-n_y grid with the given element pitch.

        Element m = ix * n_y + iy sits at
        ((ix - (n_x-1)/2) * d, (iy - (n_y-1)/2) * d, 0).
        """
        d = spacing_wavelengths * wavelength_m
        ix, iy = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="ij")
        pos = np.zeros((n_x * n_y, 3))
        pos[:, 0] = (ix.ravel() - (n_x - 1) / 2.0) * d
        pos[:, 1] = (iy.ravel() - (n_y - 1) / 2.0) * d
        return cls(n_x=n_x, n_y=n_y, spacing_m=d, element_positions=pos)


@dataclass
class UserTerminal:
    """Ground terminal with a single receive antenna."""

    lat_deg: float
    lon_deg: float
    alt_m: float = 0.0
    antenna_gain_dBi: float = 39.7
    rician_K_dB: float = 10.0
    noise_variance_W: float = 1e-13

    def position_ecef(self) -> np.ndarray:
        """Spherical-Earth ECEF position in meters."""
        lat = math.radians(self.lat_deg)
        lon = math.radians(self.lon_deg)
        r = EARTH_RADIUS_M + self.alt_m
        return np.array([
            r * math.cos(lat) * math.cos(lon),
            r * math.cos(lat) * math.sin(lon),
            r * math.sin(lat),
        ])


@dataclass
class OrbitState:
    """Satellite position plus per-UT departure angles and ranges at one
    time instant, expressed in the nadir-pointing array frame."""

    t_s: float
    satellite_position_m: np.ndarray        # (3,) ECEF
    theta_rad: np.ndarray                   # (K,) polar angle off boresight
    phi_rad: np.ndarray                     # (K,) azimuth in the array plane
    slant_range_m: np.ndarray               # (K,)
    elevation_rad: np.ndarray               # (K,) seen from each UT


@dataclass
class ChannelSnapshot:
    """One channel realization: full faded channel H, unit-gain manifold
    matrix H_tilde, analog beams F_RF and effective channel
    H_eff = H_tilde @ F_RF."""

    H: np.ndarray          # (K, N_t)
    H_tilde: np.ndarray    # (K, N_t), unit-norm rows
    F_RF: np.ndarray       # (N_t, N_RF), unit-norm columns
    H_eff: np.ndarray      # (K, N_RF)
    timestamp_s: float


def array_manifold(theta: float, phi: float, geom: ArrayGeometry,
                   wavelength_m: float) -> np.ndarray:
    """Unit-norm array response for departure direction (theta, phi).

    Element m gets phase kappa . r_m with wavevector
    kappa = (2 pi / lambda) [sin t cos p, sin t sin p, cos t].
    """
    kappa = (2.0 * np.pi / wavelength_m) * np.array([
        math.sin(theta) * math.cos(phi),
        math.sin(theta) * math.sin(phi),
        math.cos(theta),
    ])
    phases = geom.element_positions @ kappa
    n = geom.n_elements
    return np.exp(1j * phases) / math.sqrt(n)


def _manifold_rows(theta: np.ndarray, phi: np.ndarray, geom: ArrayGeometry,
                   wavelength_m: float) -> np.ndarray:
    """Conjugated manifolds for all UTs at once: rows are receive
    responses, one gemm for the phases."""
    st = np.sin(theta)
    kappa = (2.0 * np.pi / wavelength_m) * np.stack(
        [st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=1
    )                                                    # (K, 3)
    phases = kappa @ geom.element_positions.T            # (K, N_t)
    return np.exp(-1j * phases) / math.sqrt(geom.n_elements)


def rician_channel(h_los: np.ndarray, K_R_linear: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Mix a deterministic LOS vector with an i.i.d. complex Gaussian
    NLOS draw whose expected energy equals ||h_los||^2, so K_R is the
    true LOS/NLOS power ratio. K_R is capped at 1e12 (pure-LOS limit)."""
    if K_R_linear < 0:
        raise ValueError(f"Rician factor must be >= 0, got {K_R_linear}")
    K_R = min(K_R_linear, RICIAN_K_CAP)
    n = h_los.shape[0]
    sigma_el = np.linalg.norm(h_los) / math.sqrt(n)
    nlos = sigma_el * math.sqrt(0.5) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    return math.sqrt(K_R / (K_R + 1.0)) * h_los + math.sqrt(1.0 / (K_R + 1.0)) * nlos


def fspl_dB(distance_m: float, wavelength_m: float) -> float:
    """Free-space path loss 20 log10(4 pi d / lambda)."""
    return 20.0 * math.log10(4.0 * math.pi * distance_m / wavelength_m)


def los_gain(slant_range_m: float, f_c_Hz: float, tx_power_share: float,
             ut: UserTerminal, extra_loss_dB: float = 0.0) -> float:
    """Linear amplitude gain of a UT's LOS path.

    Combines free-space path loss, the UT antenna gain and a constant
    atmospheric loss; tx_power_share is a linear power fraction applied
    in amplitude (1.0 when the power constraint lives in the precoder).
    """
    if slant_range_m <= 0:
        raise ValueError(f"slant range must be > 0, got {slant_range_m}")
    wavelength = SPEED_OF_LIGHT_M_S / f_c_Hz
    gain_dB = ut.antenna_gain_dBi - fspl_dB(slant_range_m, wavelength) - extra_loss_dB
    return math.sqrt(tx_power_share) * 10.0 ** (gain_dB / 20.0)


def dft_codebook(geom: ArrayGeometry) -> np.ndarray:
    """Critically-sampled 2-D DFT beam set for a uniform planar array.

    Returns an (N_t, N_t) matrix whose columns are the unit-norm
    Kronecker products of the per-axis DFT vectors; the set is
    orthonormal.
    """
    if not geom.is_uniform_grid:
        raise UnsupportedGeometryError("DFT codebook requires a uniform planar grid")

    def dft(n):
        idx = np.arange(n)
        return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / math.sqrt(n)

    return np.kron(dft(geom.n_x), dft(geom.n_y))


def dft_beam_powers(H_tilde: np.ndarray, geom: ArrayGeometry) -> np.ndarray:
    """Received power of every DFT codeword for every UT, via a batched
    orthonormal 2-D FFT; equal (to rounding) to |H_tilde @ codebook|^2
    at a fraction of the cost."""
    grids = H_tilde.reshape(H_tilde.shape[0], geom.n_x, geom.n_y)
    spectra = np.fft.fft2(grids, norm="ortho")
    return np.abs(spectra.reshape(H_tilde.shape[0], -1)) ** 2


def select_beams(H_tilde: np.ndarray, codebook: np.ndarray, N_RF: int,
                 powers: np.ndarray | None = None) -> np.ndarray:
    """Pick one analog beam per UT by best received power.

    Ties go to the lowest codebook index; a collision hands the later UT
    its next-best unused codeword. Leftover RF chains are filled with the
    unused codewords of highest best-over-UTs power, so the result always
    has N_RF columns. ``powers`` may carry a precomputed K x n_cb power
    table (e.g. from dft_beam_powers).
    """
    K = H_tilde.shape[0]
    n_cb = codebook.shape[1]
    if not K <= N_RF <= n_cb:
        raise ValueError(f"need K <= N_RF <= codebook size, got {K}/{N_RF}/{n_cb}")
    power = powers if powers is not None else np.abs(H_tilde @ codebook) ** 2
    used = np.zeros(n_cb, dtype=bool)
    cols = []
    for n in range(K):
        for j in np.argsort(-power[n], kind="stable"):
            if not used[j]:
                used[j] = True
                cols.append(j)
                break
    if len(cols) < N_RF:
        best_any = power.max(axis=0)
        for j in np.argsort(-best_any, kind="stable"):
            if len(cols) == N_RF:
                break
            if not used[j]:
                used[j] = True
                cols.append(j)
    return codebook[:, cols]


def orbital_angular_rate(altitude_m: float) -> float:
    """Circular-orbit angular rate sqrt(mu / R^3)."""
    R = EARTH_RADIUS_M + altitude_m
    return math.sqrt(GM_EARTH / R**3)


def propagate_pass(scenario, uts: Sequence[UserTerminal], t: float,
                   positions: np.ndarray | None = None) -> OrbitState:
    """Satellite and look geometry at pass time t.

    Circular equatorial orbit at scenario.altitude_m over a non-rotating
    spherical Earth; the ground track crosses the footprint center
    (lat 0, lon 0) at mid-pass. The array frame is nadir-pointing with
    its x-axis along-track. Raises BelowMinElevationError when any UT
    falls under scenario.min_elevation_deg. ``positions`` may carry the
    precomputed (K, 3) UT ECEF stack.
    """
    if not 0.0 <= t <= scenario.pass_s:
        raise ValueError(f"t={t} outside the pass [0, {scenario.pass_s}]")
    R = EARTH_RADIUS_M + scenario.altitude_m
    psi = orbital_angular_rate(scenario.altitude_m) * (t - scenario.pass_s / 2.0)
    sat = R * np.array([math.cos(psi), math.sin(psi), 0.0])

    # Nadir-pointing body frame, x along-track.
    x_b = np.array([-math.sin(psi), math.cos(psi), 0.0])
    z_b = -sat / R
    y_b = np.cross(z_b, x_b)

    if positions is None:
        positions = np.stack([ut.position_ecef() for ut in uts])  # (K, 3)
    delta = positions - sat
    slant = np.linalg.norm(delta, axis=1)
    d_hat = delta / slant[:, None]
    u = d_hat @ np.stack([x_b, y_b, z_b], axis=1)             # body coords
    theta = np.arccos(np.clip(u[:, 2], -1.0, 1.0))
    phi = np.arctan2(u[:, 1], u[:, 0])

    p_norm = np.linalg.norm(positions, axis=1)
    sin_el = np.einsum("ij,ij->i", positions / p_norm[:, None], -delta) / slant
    elevation = np.arcsin(np.clip(sin_el, -1.0, 1.0))
    mask = math.radians(scenario.min_elevation_deg)
    if np.any(elevation < mask):
        worst = math.degrees(elevation.min())
        raise BelowMinElevationError(
            f"UT elevation {worst:.2f} deg below mask {scenario.min_elevation_deg} deg at t={t}"
        )
    return OrbitState(
        t_s=t,
        satellite_position_m=sat,
        theta_rad=theta,
        phi_rad=phi,
        slant_range_m=slant,
        elevation_rad=elevation,
    )


def place_users(scenario, rng: np.random.Generator) -> list[UserTerminal]:
    """Drop K UTs uniformly on a disk of scenario.footprint_radius_m
    around the footprint center (small-angle lat/lon offsets)."""
    K = scenario.K
    radius = scenario.footprint_radius_m * np.sqrt(rng.random(K))
    bearing = 2.0 * np.pi * rng.random(K)
    lat = np.degrees((radius * np.cos(bearing)) / EARTH_RADIUS_M)
    lon = np.degrees((radius * np.sin(bearing)) / EARTH_RADIUS_M)
    noise = scenario.noise_variance_W
    return [
        UserTerminal(
            lat_deg=float(lat[n]),
            lon_deg=float(lon[n]),
            antenna_gain_dBi=scenario.ut_gain_dBi,
            rician_K_dB=scenario.K_R_dB,
            noise_variance_W=noise,
        )
        for n in range(K)
    ]


@dataclass
class PassContext:
    """Per-trial bundle: scenario, placed UTs, array and codebook."""

    scenario: object
    uts: list[UserTerminal]
    geometry: ArrayGeometry
    codebook: np.ndarray
    wavelength_m: float
    ut_positions: np.ndarray = None       # (K, 3) ECEF cache
    ut_gains_dBi: np.ndarray = None
    rician_K_linear: np.ndarray = None

    def __post_init__(self):
        if self.ut_positions is None:
            self.ut_positions = np.stack([ut.position_ecef() for ut in self.uts])
        if self.ut_gains_dBi is None:
            self.ut_gains_dBi = np.array([ut.antenna_gain_dBi for ut in self.uts])
        if self.rician_K_linear is None:
            self.rician_K_linear = np.minimum(
                10.0 ** (np.array([ut.rician_K_dB for ut in self.uts]) / 10.0),
                RICIAN_K_CAP,
            )


def make_pass(scenario, rng: np.random.Generator) -> PassContext:
    wavelength = SPEED_OF_LIGHT_M_S / scenario.carrier_Hz
    geom = ArrayGeometry.uniform_planar(
        scenario.n_x, scenario.n_y, wavelength, scenario.spacing_wavelengths
    )
    return PassContext(
        scenario=scenario,
        uts=place_users(scenario, rng),
        geometry=geom,
        codebook=dft_codebook(geom),
        wavelength_m=wavelength,
    )


def snapshot(ctx: PassContext, t: float, rng: np.random.Generator,
             beams: np.ndarray | None = None,
             nlos_draw: np.ndarray | None = None) -> ChannelSnapshot:
    """Assemble the channel at pass time t.

    The LOS rows are gain-scaled conjugated manifolds; the NLOS part is
    redrawn from rng unless a held draw is passed in (block fading).
    Beams are re-selected by best power unless ``beams`` pins them.
    """
    sc = ctx.scenario
    orbit = propagate_pass(sc, ctx.uts, t, positions=ctx.ut_positions)
    H_tilde = _manifold_rows(orbit.theta_rad, orbit.phi_rad, ctx.geometry,
                             ctx.wavelength_m)
    fspl = 20.0 * np.log10(4.0 * np.pi * orbit.slant_range_m / ctx.wavelength_m)
    gains = 10.0 ** ((ctx.ut_gains_dBi - fspl - sc.atmospheric_loss_dB) / 20.0)
    H_los = gains[:, None] * H_tilde

    if nlos_draw is None:
        nlos_draw = draw_nlos(ctx, rng)
    n_t = ctx.geometry.n_elements
    nlos = (gains / math.sqrt(n_t))[:, None] * nlos_draw
    k_lin = ctx.rician_K_linear
    w_los = np.sqrt(k_lin / (k_lin + 1.0))[:, None]
    w_nlos = np.sqrt(1.0 / (k_lin + 1.0))[:, None]
    H = w_los * H_los + w_nlos * nlos

    if beams is not None:
        F_RF = beams
    else:
        F_RF = select_beams(H_tilde, ctx.codebook, sc.N_RF,
                            powers=dft_beam_powers(H_tilde, ctx.geometry))
    return ChannelSnapshot(H=H, H_tilde=H_tilde, F_RF=F_RF,
                           H_eff=H_tilde @ F_RF, timestamp_s=t)


def draw_nlos(ctx: PassContext, rng: np.random.Generator) -> np.ndarray:
    """Unscaled CN(0,1) NLOS draw for all UTs and elements."""
    shape = (len(ctx.uts), ctx.geometry.n_elements)
    return math.sqrt(0.5) * (rng.standard_normal(shape)
                             + 1j * rng.standard_normal(shape))
