"""Scenario configuration: defaults, file parsing and overrides.

Config files are flat TOML (or JSON, by file extension) with exactly the
keys of ScenarioConfig; unknown keys are a hard error so typos cannot
silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from .channel import BOLTZMANN_J_K, SPEED_OF_LIGHT_M_S, SYSTEM_NOISE_TEMP_K
from .errors import ParseError, RangeError, UnknownKeyError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class ScenarioConfig:
    """Full simulation scenario.

    Defaults follow the reference system: 18 GHz carrier, 600 km orbit,
    16x16 half-wavelength array, 16 RF chains, 20 dBW transmit power,
    39.7 dBi UT antennas, 10 dB Rician factor, 120 s pass sampled 20
    times per second. mc_runs defaults to the desk-scale 50; the full
    500-run campaign sits behind the CLI --full-scale flag.
    """

    carrier_Hz: float = 18e9
    altitude_m: float = 600e3
    n_x: int = 16
    n_y: int = 16
    spacing_wavelengths: float = 0.5
    N_RF: int = 16
    P_t_W: float = 100.0
    ut_gain_dBi: float = 39.7
    K: int = 16
    K_R_dB: float = 10.0
    pass_s: float = 120.0
    update_rate_Hz: float = 20.0
    mc_runs: int = 50
    eta_list: tuple = (0.9, 0.8, 0.65)
    k_init: int = 2
    p: int = 1
    i_max: int = 8
    footprint_radius_m: float = 225e3
    bandwidth_Hz: float = 50e6
    min_elevation_deg: float = 10.0
    atmospheric_loss_dB: float = 0.0
    alpha: float | None = None       # None -> gain-normalized MMSE choice
    n_reset: int = 1200              # full re-inversion every n snapshots; 0 = never
    nlos_block_len: int = 1          # snapshots an NLOS draw is held for
    beam_hold: int = 1               # snapshots the analog beams are held for
    seed: int = 0

    @property
    def n_elements(self) -> int:
        return self.n_x * self.n_y

    @property
    def noise_variance_W(self) -> float:
        """Thermal noise kTB at the reference temperature (290 K)."""
        return BOLTZMANN_J_K * SYSTEM_NOISE_TEMP_K * self.bandwidth_Hz

    @property
    def reference_gain(self) -> float:
        """Amplitude gain of a nadir UT at the orbital altitude; fixes
        the scale between the unit-gain precoding channel and physical
        noise power."""
        wavelength = SPEED_OF_LIGHT_M_S / self.carrier_Hz
        fspl = 20.0 * math.log10(4.0 * math.pi * self.altitude_m / wavelength)
        return 10.0 ** ((self.ut_gain_dBi - fspl - self.atmospheric_loss_dB) / 20.0)

    @property
    def resolved_alpha(self) -> float:
        """MMSE-style regularization K * noise / P_t, with the noise
        expressed in the unit-gain domain the precoder operates in."""
        if self.alpha is not None:
            return self.alpha
        noise_normalized = self.noise_variance_W / self.reference_gain**2
        return self.K * noise_normalized / self.P_t_W

    @property
    def n_snapshots(self) -> int:
        return int(round(self.pass_s * self.update_rate_Hz))

    def validate(self) -> "ScenarioConfig":
        """Range-check every field; raises RangeError on violation."""
        if self.K < 1:
            raise RangeError(f"K must be >= 1, got {self.K}")
        if not self.K <= self.N_RF <= self.n_elements:
            raise RangeError(
                f"need K <= N_RF <= N_t, got K={self.K}, N_RF={self.N_RF}, "
                f"N_t={self.n_elements}"
            )
        if self.n_x < 1 or self.n_y < 1:
            raise RangeError("array dimensions must be >= 1")
        for name in ("carrier_Hz", "altitude_m", "spacing_wavelengths", "P_t_W",
                     "pass_s", "update_rate_Hz", "bandwidth_Hz"):
            if getattr(self, name) <= 0:
                raise RangeError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.footprint_radius_m < 0:
            raise RangeError("footprint_radius_m must be >= 0")
        if not self.eta_list:
            raise RangeError("eta_list must not be empty")
        for eta in self.eta_list:
            if not 0.0 < eta <= 1.0:
                raise RangeError(f"every eta must be in (0,1], got {eta}")
        if self.k_init < 1:
            raise RangeError(f"k_init must be >= 1, got {self.k_init}")
        if self.p < 0:
            raise RangeError(f"p must be >= 0, got {self.p}")
        if self.i_max < 1:
            raise RangeError(f"i_max must be >= 1, got {self.i_max}")
        if self.mc_runs < 1:
            raise RangeError(f"mc_runs must be >= 1, got {self.mc_runs}")
        if self.alpha is not None and self.alpha < 0:
            raise RangeError(f"alpha must be >= 0, got {self.alpha}")
        if self.n_reset < 0:
            raise RangeError(f"n_reset must be >= 0, got {self.n_reset}")
        if self.nlos_block_len < 1 or self.beam_hold < 1:
            raise RangeError("nlos_block_len and beam_hold must be >= 1")
        if self.seed < 0:
            raise RangeError(f"seed must be >= 0, got {self.seed}")
        n_snap = self.pass_s * self.update_rate_Hz
        if abs(n_snap - round(n_snap)) > 1e-9 or round(n_snap) < 1:
            raise RangeError(
                f"pass_s * update_rate_Hz must be a positive integer, got {n_snap}"
            )
        return self

    def echo(self) -> dict:
        """Fully-resolved key/value view (defaults filled in) for
        summary.json."""
        d = dataclasses.asdict(self)
        d["eta_list"] = list(self.eta_list)
        d["resolved_alpha"] = self.resolved_alpha
        d["noise_variance_W"] = self.noise_variance_W
        d["n_snapshots"] = self.n_snapshots
        d["n_elements"] = self.n_elements
        return d


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_INT_FIELDS = {"n_x", "n_y", "N_RF", "K", "k_init", "p", "i_max", "mc_runs",
               "n_reset", "nlos_block_len", "beam_hold", "seed"}
_FLOAT_FIELDS = {"carrier_Hz", "altitude_m", "spacing_wavelengths", "P_t_W",
                 "ut_gain_dBi", "K_R_dB", "pass_s", "update_rate_Hz",
                 "footprint_radius_m", "bandwidth_Hz", "min_elevation_deg",
                 "atmospheric_loss_dB"}


def _coerce(key: str, value) -> object:
    """Cast a raw config value to the field's type; str inputs come from
    --set overrides, native types from TOML/JSON."""
    if key not in _FIELDS:
        raise UnknownKeyError(f"unknown config key '{key}'")
    if key == "eta_list":
        if isinstance(value, str):
            value = [v for v in value.split(",") if v.strip()]
        if not isinstance(value, (list, tuple)):
            raise ParseError(f"eta_list must be a list, got {value!r}")
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError) as e:
            raise ParseError(f"bad eta_list entry: {e}") from e
    if key == "alpha":
        if value is None or (isinstance(value, str) and value.lower() == "none"):
            return None
        try:
            return float(value)
        except (TypeError, ValueError) as e:
            raise ParseError(f"alpha must be a number or none, got {value!r}") from e
    try:
        if key in _INT_FIELDS:
            if isinstance(value, float) and value != int(value):
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if key in _FLOAT_FIELDS:
            return float(value)
    except (TypeError, ValueError) as e:
        raise ParseError(f"bad value for '{key}': {e}") from e
    raise UnknownKeyError(f"unknown config key '{key}'")


def _load_raw(path: Path) -> dict:
    if path.suffix.lower() == ".json":
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    else:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ParseError(f"{path}: {e}") from e
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: top level must be a table/object")
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ParseError(f"{path}: nested table '{key}' not allowed; keys are flat")
    return raw


def parse_config(path: str | Path | None, overrides: list[str] | None = None) -> ScenarioConfig:
    """Build a validated ScenarioConfig from an optional file plus
    KEY=VALUE overrides (applied after the file)."""
    values: dict = {}
    if path is not None:
        values.update(_load_raw(Path(path)))
    kwargs = {key: _coerce(key, value) for key, value in values.items()}
    for item in overrides or []:
        if "=" not in item:
            raise ParseError(f"override '{item}' is not KEY=VALUE")
        key, _, value = item.partition("=")
        kwargs[key.strip()] = _coerce(key.strip(), value.strip())
    return ScenarioConfig(**kwargs).validate()
