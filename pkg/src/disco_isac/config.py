"""Scenario configuration: dataclasses, defaults and the ``key = value`` file format.

The file format is plain INI (sections + ``key = value``).  Powers are given in
dBm, distances in meters and angles in degrees; everything is converted to SI
units (watts, meters, radians) once, at parse time.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def wrap_phase(phi):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(phi, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class DrisProfile:
    """Discrete phase/amplitude alphabet of the disco RIS.

    ``phases``, ``amplitudes`` and ``probs`` are indexed in lockstep: entry ``i``
    is the reflection coefficient ``amplitudes[i] * exp(1j * phases[i])``,
    selected with probability ``probs[i]``.
    """

    bits: int
    phases: tuple
    amplitudes: tuple
    probs: tuple
    require_zero_mean: bool = True

    def __post_init__(self):
        n = 2 ** int(self.bits)
        if self.bits < 0:
            raise DomainError("bits must be non-negative")
        phases = tuple(float(p) for p in np.atleast_1d(np.asarray(self.phases, dtype=float)))
        amps = tuple(float(a) for a in self.amplitudes)
        probs = tuple(float(p) for p in self.probs)
        if not (len(phases) == len(amps) == len(probs) == n):
            raise DomainError(
                f"profile with {self.bits} bit(s) needs {n} phases/amplitudes/probs, "
                f"got {len(phases)}/{len(amps)}/{len(probs)}"
            )
        if not all(math.isfinite(p) for p in phases):
            raise DomainError("phases must be finite")
        if any(a < 0.0 or a > 1.0 for a in amps):
            raise DomainError("amplitudes must lie in [0, 1]")
        if any(p < 0.0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise DomainError("probs must be non-negative and sum to 1")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "probs", probs)
        if self.require_zero_mean and abs(self.mean_coefficient) > 1e-9:
            raise DomainError(
                "DRIS profile violates the zero-mean constraint: "
                f"|sum p_i mu_i exp(j phi_i)| = {abs(self.mean_coefficient):.3e}"
            )

    @property
    def coefficients(self):
        return np.asarray(self.amplitudes) * np.exp(1j * np.asarray(self.phases))

    @property
    def mean_coefficient(self):
        return complex(np.dot(self.probs, self.coefficients))

    @classmethod
    def one_bit(cls):
        """One-bit, constant-amplitude profile {2pi/5, 7pi/5} with equal odds."""
        return cls(1, (2 * math.pi / 5, 7 * math.pi / 5), (1.0, 1.0), (0.5, 0.5))


@dataclass(frozen=True)
class Geometry:
    """Node placement in meters.

    BS/receiver ULAs lie along +x starting at their reference (first) element.
    The DRIS is a vertical plane facing +x whose first element sits at ``dris``;
    its horizontal axis is +y and its vertical axis is +z.
    """

    bs: tuple = (0.0, 0.0, 3.0)
    dris: tuple = (-1.0, 0.0, 2.5)
    rx: tuple = (0.0, 60.0, 0.0)
    user_center: tuple = (0.0, 180.0, 0.0)
    user_radius: float = 20.0
    target_range: float = 20.0
    target_bearing_min: float = math.pi / 6
    target_bearing_max: float = math.pi / 3
    target_height: float = 0.0

    def __post_init__(self):
        for name in ("bs", "dris", "rx", "user_center"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3:
                raise DomainError(f"{name} must have 3 coordinates")
            object.__setattr__(self, name, v)
        if self.user_radius < 0 or self.target_range <= 0:
            raise DomainError("user_radius must be >= 0 and target_range > 0")
        if self.target_bearing_min > self.target_bearing_max:
            raise DomainError("target bearing range is empty")

    def with_dris_distance(self, distance_m):
        """Move the DRIS to (-d, 0, z_dris), as in the BS-DRIS distance sweep."""
        return replace(self, dris=(-float(distance_m), self.dris[1], self.dris[2]))


DEFAULT_BANDWIDTH_HZ = 180e3
# thermal floor -170 dBm/Hz over the 180 kHz transmission bandwidth
DEFAULT_NOISE_DBM = -170.0 + 10.0 * math.log10(DEFAULT_BANDWIDTH_HZ)
DEFAULT_CARRIER_HZ = 3.5e9


@dataclass(frozen=True)
class ScenarioConfig:
    """Full physical scenario in SI units."""

    n_b: int = 8
    n_s: int = 8
    n_d_h: int = 64
    n_d_v: int = 64
    k_c: int = 4
    frame_len: int = 80
    kappa: float = 0.2
    p0: float = float(dbm_to_watts(11.0))
    wavelength: float = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ
    spacing_ratio: float = 0.5
    rician_factor: float = float(db_to_linear(3.0))
    chi: float = 0.9
    sigma2_c: float = float(dbm_to_watts(DEFAULT_NOISE_DBM))
    sigma2_s: float = float(dbm_to_watts(DEFAULT_NOISE_DBM))
    geometry: Geometry = field(default_factory=Geometry)
    dris: DrisProfile = field(default_factory=DrisProfile.one_bit)
    seed: int = 7

    def __post_init__(self):
        for name in ("n_b", "n_s", "n_d_h", "n_d_v", "k_c", "frame_len"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be a positive integer")
        if self.frame_len < self.n_b:
            raise DomainError("frame_len must be >= n_b for the sensing covariance constraint")
        if not 0.0 <= self.kappa <= 1.0:
            raise DomainError("kappa must lie in [0, 1]")
        if not 0.0 <= self.chi <= 1.0:
            raise DomainError("chi must lie in [0, 1]")
        if self.rician_factor < 0:
            raise DomainError("rician_factor must be >= 0")
        for name in ("p0", "wavelength", "spacing_ratio", "sigma2_c", "sigma2_s"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def n_d(self):
        return self.n_d_h * self.n_d_v

    @property
    def element_spacing(self):
        return self.spacing_ratio * self.wavelength

    def with_power_dbm(self, dbm):
        return replace(self, p0=float(dbm_to_watts(dbm)))

    def with_elements(self, n_d):
        side = math.isqrt(int(n_d))
        if side * side != int(n_d) or side < 1:
            raise DomainError(f"N_D = {n_d} is not a positive perfect square (square DRIS assumed)")
        return replace(self, n_d_h=side, n_d_v=side)

    def with_dris_distance(self, distance_m):
        if distance_m <= 0:
            raise DomainError("DRIS distance must be positive")
        return replace(self, geometry=self.geometry.with_dris_distance(distance_m))


# ---------------------------------------------------------------------------
# file format

# (section, key) -> (ScenarioConfig/Geometry/DrisProfile attribute, parser kind)
_SCHEMA = {
    ("arrays", "n_b"): "int",
    ("arrays", "n_s"): "int",
    ("arrays", "n_d_h"): "int",
    ("arrays", "n_d_v"): "int",
    ("arrays", "k_c"): "int",
    ("arrays", "frame_len"): "int",
    ("signal", "kappa"): "float",
    ("signal", "power_dbm"): "float",
    ("signal", "wavelength_m"): "float",
    ("signal", "spacing_ratio"): "float",
    ("signal", "rician_factor_db"): "float",
    ("signal", "chi"): "float",
    ("signal", "sigma2_c_dbm"): "float",
    ("signal", "sigma2_s_dbm"): "float",
    ("geometry", "bs"): "vec3",
    ("geometry", "dris"): "vec3",
    ("geometry", "rx"): "vec3",
    ("geometry", "user_center"): "vec3",
    ("geometry", "user_radius"): "float",
    ("geometry", "target_range"): "float",
    ("geometry", "target_bearing_min_deg"): "float",
    ("geometry", "target_bearing_max_deg"): "float",
    ("geometry", "target_height"): "float",
    ("dris", "bits"): "int",
    ("dris", "phases_deg"): "list",
    ("dris", "amplitudes"): "list",
    ("dris", "probs"): "list",
    ("run", "seed"): "int",
}
# sections accepted but not interpreted by the scenario loader
PASSTHROUGH_SECTIONS = ("sweep", "manifest")


def _locate(lines, section, key):
    """Return the 1-based line of ``key`` inside ``[section]`` (or of the section)."""
    current = None
    section_line = None
    for i, raw in enumerate(lines, start=1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]$", s)
        if m:
            current = m.group(1).strip()
            if current == section:
                section_line = i
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*[=:]", s):
            return i
    return section_line


def _parse_value(kind, text):
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = [float(p) for p in parts]
    if kind == "vec3" and len(values) != 3:
        raise ValueError("expected three comma-separated numbers")
    return tuple(values)


def parse_config(text, source=None):
    """Parse a scenario file into ``(ScenarioConfig, passthrough_sections)``."""
    lines = text.splitlines()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), source) from exc

    values = {}
    extra = {}
    for section in parser.sections():
        if section in PASSTHROUGH_SECTIONS:
            extra[section] = dict(parser.items(section))
            continue
        if not any(s == section for s, _ in _SCHEMA):
            raise ConfigError(f"unknown section [{section}]", _locate(lines, section, None), source)
        for key, raw in parser.items(section):
            kind = _SCHEMA.get((section, key))
            if kind is None:
                raise ConfigError(f"unknown key '{key}' in [{section}]", _locate(lines, section, key), source)
            try:
                values[key] = _parse_value(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{key}': {raw!r} ({exc})", _locate(lines, section, key), source) from exc

    def anchor(key):
        for (sec, k) in _SCHEMA:
            if k == key:
                return _locate(lines, sec, key)
        return None

    base = ScenarioConfig()
    g = base.geometry
    try:
        geometry = Geometry(
            bs=values.get("bs", g.bs),
            dris=values.get("dris", g.dris),
            rx=values.get("rx", g.rx),
            user_center=values.get("user_center", g.user_center),
            user_radius=values.get("user_radius", g.user_radius),
            target_range=values.get("target_range", g.target_range),
            target_bearing_min=math.radians(values.get("target_bearing_min_deg", math.degrees(g.target_bearing_min))),
            target_bearing_max=math.radians(values.get("target_bearing_max_deg", math.degrees(g.target_bearing_max))),
            target_height=values.get("target_height", g.target_height),
        )
    except DomainError as exc:
        raise ConfigError(str(exc), _locate(lines, "geometry", None), source) from exc

    d = base.dris
    try:
        profile = DrisProfile(
            bits=values.get("bits", d.bits),
            phases=tuple(math.radians(p) for p in values["phases_deg"]) if "phases_deg" in values else d.phases,
            amplitudes=values.get("amplitudes", d.amplitudes),
            probs=values.get("probs", d.probs),
        )
    except DomainError as exc:
        line = anchor("phases_deg") or _locate(lines, "dris", None)
        raise ConfigError(str(exc), line, source) from exc

    kwargs = dict(geometry=geometry, dris=profile)
    for key in ("n_b", "n_s", "n_d_h", "n_d_v", "k_c", "frame_len", "kappa", "spacing_ratio", "chi", "seed"):
        if key in values:
            kwargs[key] = values[key]
    if "power_dbm" in values:
        kwargs["p0"] = float(dbm_to_watts(values["power_dbm"]))
    if "wavelength_m" in values:
        kwargs["wavelength"] = values["wavelength_m"]
    if "rician_factor_db" in values:
        kwargs["rician_factor"] = float(db_to_linear(values["rician_factor_db"]))
    if "sigma2_c_dbm" in values:
        kwargs["sigma2_c"] = float(dbm_to_watts(values["sigma2_c_dbm"]))
    if "sigma2_s_dbm" in values:
        kwargs["sigma2_s"] = float(dbm_to_watts(values["sigma2_s_dbm"]))
    try:
        config = ScenarioConfig(**kwargs)
    except DomainError as exc:
        msg = str(exc)
        key = msg.split()[0]
        line = anchor({"p0": "power_dbm"}.get(key, key))
        raise ConfigError(msg, line, source) from exc
    return config, extra


def load_config(path):
    """Read and parse a scenario file.  I/O errors propagate as ``OSError``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def _fmt(x):
    return repr(float(x)) if not isinstance(x, int) else str(x)


def _fmt_list(xs: Sequence[float]):
    return ", ".join(repr(float(x)) for x in xs)


def _fmt_exact(value, to_file, from_file):
    """Boundary-unit text for ``value`` that converts back to the identical float.

    ``to_file`` maps SI to file units (e.g. W -> dBm) and ``from_file`` inverts it.
    Neighbouring doubles of the naive conversion are tried so manifests replay bit-exactly.
    """
    value = float(value)
    x = float(to_file(value))
    if not math.isfinite(x):
        return repr(x)
    up = down = x
    for _ in range(64):
        for cand in (up, down):
            if float(from_file(cand)) == value:
                return repr(cand)
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
    return repr(x)


def _fmt_dbm(watts):
    return _fmt_exact(watts, watts_to_dbm, dbm_to_watts)


def _fmt_deg(rad):
    return _fmt_exact(rad, math.degrees, math.radians)


def dump_config(config: ScenarioConfig, extra: Optional[dict] = None):
    """Serialize a config back to the file format (lossless round trip)."""
    g = config.geometry
    d = config.dris
    out = [
        "[arrays]",
        f"n_b = {config.n_b}",
        f"n_s = {config.n_s}",
        f"n_d_h = {config.n_d_h}",
        f"n_d_v = {config.n_d_v}",
        f"k_c = {config.k_c}",
        f"frame_len = {config.frame_len}",
        "",
        "[signal]",
        f"kappa = {_fmt(config.kappa)}",
        f"power_dbm = {_fmt_dbm(config.p0)}",
        f"wavelength_m = {_fmt(config.wavelength)}",
        f"spacing_ratio = {_fmt(config.spacing_ratio)}",
        f"rician_factor_db = {_fmt_exact(config.rician_factor, lambda v: 10 * math.log10(v) if v > 0 else -math.inf, db_to_linear)}",
        f"chi = {_fmt(config.chi)}",
        f"sigma2_c_dbm = {_fmt_dbm(config.sigma2_c)}",
        f"sigma2_s_dbm = {_fmt_dbm(config.sigma2_s)}",
        "",
        "[geometry]",
        f"bs = {_fmt_list(g.bs)}",
        f"dris = {_fmt_list(g.dris)}",
        f"rx = {_fmt_list(g.rx)}",
        f"user_center = {_fmt_list(g.user_center)}",
        f"user_radius = {_fmt(g.user_radius)}",
        f"target_range = {_fmt(g.target_range)}",
        f"target_bearing_min_deg = {_fmt_deg(g.target_bearing_min)}",
        f"target_bearing_max_deg = {_fmt_deg(g.target_bearing_max)}",
        f"target_height = {_fmt(g.target_height)}",
        "",
        "[dris]",
        f"bits = {d.bits}",
        f"phases_deg = {', '.join(_fmt_exact(p, math.degrees, math.radians) for p in d.phases)}",
        f"amplitudes = {_fmt_list(d.amplitudes)}",
        f"probs = {_fmt_list(d.probs)}",
        "",
        "[run]",
        f"seed = {int(config.seed)}",
    ]
    for section, items in (extra or {}).items():
        out += ["", f"[{section}]"]
        out += [f"{k} = {v}" for k, v in items.items()]
    return "\n".join(out) + "\n"
