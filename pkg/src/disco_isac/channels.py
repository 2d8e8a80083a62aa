"""Array responses, DRIS reflection states and channel synthesis.

Conventions
-----------
* Steering vectors are 1-D numpy arrays (column convention).
* ``ChannelSet`` stores every channel *with* its large-scale amplitude applied.
* Communication channels are stored column-per-user (``N_B x K_c``); the
  ``K_c x N_B`` operator seen by the users is the Hermitian transpose
  (``ChannelSet.h_pt_op`` and friends).
* DRIS element ``r`` maps to (horizontal index ``r // n_d_v``, vertical index
  ``r % n_d_v``), matching ``upa_response = ula(h) kron ula(v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DrisProfile, ScenarioConfig
from .errors import DomainError
from .rng import TrialStreams, crandn

LOS_DB = (35.6, 22.0)
NLOS_DB = (32.6, 36.7)


def path_loss_db(distance_m, los=True):
    """Large-scale path loss in dB (LoS: 35.6 + 22 log10 d, NLoS: 32.6 + 36.7 log10 d)."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("distance must be positive")
    a, b = LOS_DB if los else NLOS_DB
    out = a + b * np.log10(d)
    return float(out) if out.ndim == 0 else out


def path_gain(distance_m, los=True):
    """Linear-scale power gain ``10 ** (-PL / 10)``."""
    return 10.0 ** (-np.asarray(path_loss_db(distance_m, los)) / 10.0)


def steering_ula(n, theta, delta=0.5):
    """ULA response ``exp(j 2 pi delta m sin(theta))`` for m = 0..n-1."""
    if n < 1:
        raise DomainError("array size must be >= 1")
    m = np.arange(n)
    return np.exp(2j * np.pi * delta * m * np.sin(theta))


def steering_ula_derivative(n, theta, delta=0.5):
    """d/dtheta of :func:`steering_ula`: ``j 2 pi delta cos(theta) m a_m``."""
    m = np.arange(n)
    return 2j * np.pi * delta * np.cos(theta) * m * steering_ula(n, theta, delta)


def upa_response(n_h, n_v, theta_h, theta_v, delta=0.5):
    """UPA response ``ula(n_h, theta_h) kron ula(n_v, theta_v)``."""
    return np.kron(steering_ula(n_h, theta_h, delta), steering_ula(n_v, theta_v, delta))


def bs_antenna_positions(origin, n, spacing):
    origin = np.asarray(origin, dtype=float)
    return origin + np.outer(np.arange(n) * spacing, [1.0, 0.0, 0.0])


def dris_element_positions(origin, n_h, n_v, spacing):
    """Element centres of a vertical DRIS facing +x (horizontal axis +y, vertical +z)."""
    origin = np.asarray(origin, dtype=float)
    ih, iv = np.divmod(np.arange(n_h * n_v), n_v)
    pos = np.empty((n_h * n_v, 3))
    pos[:, 0] = origin[0]
    pos[:, 1] = origin[1] + ih * spacing
    pos[:, 2] = origin[2] + iv * spacing
    return pos


def near_field_los(antennas, elements, wavelength, reference=None):
    """Spherical-wavefront LoS matrix ``exp(-j 2pi/lambda (D_n^r - D_n))``.

    ``antennas`` is ``N_B x 3``, ``elements`` is ``N_D x 3``; ``reference`` is the
    DRIS origin (defaults to the first element).
    """
    antennas = np.atleast_2d(np.asarray(antennas, dtype=float))
    elements = np.atleast_2d(np.asarray(elements, dtype=float))
    ref = elements[0] if reference is None else np.asarray(reference, dtype=float)
    d_nr = np.linalg.norm(antennas[:, None, :] - elements[None, :, :], axis=-1)
    d_n = np.linalg.norm(antennas - ref, axis=-1)
    if np.any(d_nr <= 0) or np.any(d_n <= 0):
        raise DomainError("BS antenna coincides with a DRIS element")
    return np.exp(-2j * np.pi / wavelength * (d_nr - d_n[:, None]))


@dataclass(frozen=True)
class ReflectionState:
    """DRIS reflection vector ``phi(t)`` with the profile indices it was drawn from."""

    coeffs: np.ndarray
    indices: np.ndarray

    @property
    def n_d(self):
        return self.coeffs.shape[0]


def draw_reflection_indices(profile: DrisProfile, n_d, rng, size=None):
    shape = (n_d,) if size is None else (n_d, size)
    k = len(profile.probs)
    if k == 1:
        return np.zeros(shape, dtype=np.intp)
    return rng.choice(k, size=shape, p=np.asarray(profile.probs))


def draw_reflection_state(profile: DrisProfile, n_d, rng):
    """Draw an i.i.d. reflection state; amplitude follows phase in lockstep."""
    idx = draw_reflection_indices(profile, n_d, rng)
    return ReflectionState(profile.coefficients[idx], idx)


def draw_reflection_coeffs(profile: DrisProfile, n_d, rng, size):
    """``n_d x size`` matrix of independent reflection coefficients (batch draw)."""
    return profile.coefficients[draw_reflection_indices(profile, n_d, rng, size)]


def dris_moments(profile):
    """Return ``(mu_bar, nu_bar)`` by explicit enumeration over the alphabet."""
    p = np.asarray(profile.probs, dtype=float)
    mu = np.asarray(profile.amplitudes, dtype=float)
    phi = np.asarray(profile.phases, dtype=float)
    mu_bar = 0.0
    for i1 in range(len(p)):
        for i2 in range(len(p)):
            mu_bar += p[i1] * p[i2] * (
                mu[i1] ** 2 + mu[i2] ** 2 - 2.0 * mu[i1] * mu[i2] * math.cos(phi[i1] - phi[i2])
            )
    nu_bar = float(np.sum(p * mu**2))
    return float(mu_bar), nu_bar


@dataclass(frozen=True)
class LargeScale:
    """Linear-scale path gains of every link."""

    l_g: float
    l_i_c: np.ndarray
    l_d_c: np.ndarray
    l_d1_s: float
    l_d2_s: float
    l_i_s: float

    @property
    def l_cas_c(self):
        return self.l_g * self.l_i_c

    @property
    def l_cas_s(self):
        return self.l_g * self.l_i_s


@dataclass(frozen=True)
class Placement:
    """Random node positions for one trial."""

    users: np.ndarray
    target: np.ndarray


def draw_placement(config: ScenarioConfig, rng):
    """Users uniform in the disc; target at fixed range with a random bearing on either side of +x."""
    g = config.geometry
    r = g.user_radius * np.sqrt(rng.random(config.k_c))
    ang = rng.uniform(0.0, 2 * np.pi, config.k_c)
    center = np.asarray(g.user_center)
    users = np.column_stack(
        [center[0] + r * np.cos(ang), center[1] + r * np.sin(ang), np.full(config.k_c, center[2])]
    )
    bearing = rng.uniform(g.target_bearing_min, g.target_bearing_max)
    side = 1.0 if rng.random() < 0.5 else -1.0
    target = np.array(
        [g.target_range * math.cos(bearing), side * g.target_range * math.sin(bearing), g.target_height]
    )
    return Placement(users, target)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def target_angles(config: ScenarioConfig, target):
    """(theta1, theta2, theta_h, theta_v): AoD at the BS, AoA at the receiver, DRIS UPA angles."""
    g = config.geometry
    u_bs = _unit(np.asarray(target) - g.bs)
    u_rx = _unit(np.asarray(target) - g.rx)
    u_dr = _unit(np.asarray(target) - g.dris)
    theta1 = math.asin(u_bs[0])
    theta2 = math.asin(u_rx[0])
    theta_h = math.asin(u_dr[1])
    theta_v = math.asin(u_dr[2])
    return theta1, theta2, theta_h, theta_v


def large_scale_gains(config: ScenarioConfig, placement: Placement):
    g = config.geometry
    dist = lambda a, b: float(np.linalg.norm(np.asarray(a) - np.asarray(b)))  # noqa: E731
    users = placement.users
    return LargeScale(
        l_g=float(path_gain(dist(g.bs, g.dris), los=True)),
        l_i_c=np.asarray(path_gain(np.linalg.norm(users - np.asarray(g.dris), axis=1), los=True)),
        l_d_c=np.asarray(path_gain(np.linalg.norm(users - np.asarray(g.bs), axis=1), los=False)),
        l_d1_s=float(path_gain(dist(g.bs, placement.target), los=True)),
        l_d2_s=float(path_gain(dist(placement.target, g.rx), los=True)),
        l_i_s=float(path_gain(dist(g.dris, placement.target), los=True)),
    )


def bs_dris_los(config: ScenarioConfig):
    """Deterministic near-field LoS part of the BS-DRIS channel."""
    g = config.geometry
    d = config.element_spacing
    return near_field_los(
        bs_antenna_positions(g.bs, config.n_b, d),
        dris_element_positions(g.dris, config.n_d_h, config.n_d_v, d),
        config.wavelength,
    )


def rician_bs_dris(config: ScenarioConfig, g_los, rng, l_g=1.0):
    eps = config.rician_factor
    nlos = crandn(rng, g_los.shape)
    return math.sqrt(l_g) * (math.sqrt(eps / (1 + eps)) * g_los + math.sqrt(1 / (1 + eps)) * nlos)


@dataclass(frozen=True)
class ChannelSet:
    """One coherence-interval realization of every link.

    Attributes carry their large-scale amplitude (``g`` includes ``sqrt(L_G)``,
    column ``k`` of ``h_i_c`` includes ``sqrt(L_I,k)``, and so on).
    """

    g: np.ndarray
    h_d_c: np.ndarray
    h_i_c: np.ndarray
    h_d1_s: np.ndarray
    h_d2_s: np.ndarray
    h_i_s: np.ndarray
    large_scale: LargeScale
    phi_pt: ReflectionState
    phi_dt: ReflectionState
    theta1: float
    theta2: float
    placement: Placement = field(repr=False, default=None)

    def dris_comm(self, state):
        """``G diag(phi) H_I`` for a state (or an ``N_D x M`` batch → ``M x N_B x K``)."""
        coeffs = state.coeffs if isinstance(state, ReflectionState) else np.asarray(state)
        if coeffs.ndim == 1:
            return self.g @ (coeffs[:, None] * self.h_i_c)
        return np.einsum("nr,rm,rk->mnk", self.g, coeffs, self.h_i_c, optimize=True)

    @property
    def h_pt(self):
        return self.h_d_c + self.dris_comm(self.phi_pt)

    @property
    def h_dt(self):
        return self.h_d_c + self.dris_comm(self.phi_dt)

    @property
    def h_aca(self):
        return self.g @ ((self.phi_dt.coeffs - self.phi_pt.coeffs)[:, None] * self.h_i_c)

    @property
    def h_pt_op(self):
        """``K_c x N_B`` operator applied to the waveform during the PT-designed frame."""
        return self.h_pt.conj().T

    @property
    def h_dt_op(self):
        return self.h_dt.conj().T

    @property
    def h_aca_op(self):
        return self.h_aca.conj().T

    @property
    def n_d(self):
        return self.g.shape[1]

    def with_states(self, phi_pt=None, phi_dt=None):
        from dataclasses import replace

        return replace(
            self,
            phi_pt=self.phi_pt if phi_pt is None else phi_pt,
            phi_dt=self.phi_dt if phi_dt is None else phi_dt,
        )


def dris_sensing_path(g, h_i_s, state):
    """Cascaded DRIS sensing path ``G diag(phi) h_I^s``.

    ``g`` and ``h_i_s`` carry their large-scale amplitudes, so the result includes
    ``sqrt(L_G L_I^s)``.  ``state`` may be a :class:`ReflectionState`, a length-N_D
    vector, or an ``N_D x M`` batch (result ``N_B x M``).
    """
    coeffs = state.coeffs if isinstance(state, ReflectionState) else np.asarray(state)
    g = np.asarray(g)
    h_i_s = np.asarray(h_i_s)
    if g.ndim != 2 or h_i_s.shape != (g.shape[1],) or coeffs.shape[0] != g.shape[1]:
        raise DomainError(
            f"dimension mismatch: g {g.shape}, h_i_s {h_i_s.shape}, state {coeffs.shape}"
        )
    if coeffs.ndim == 1:
        return g @ (coeffs * h_i_s)
    return g @ (coeffs * h_i_s[:, None])


def assemble_channels(config: ScenarioConfig, streams, placement=None, g_los=None):
    """Synthesize every channel for one trial.

    ``streams`` is a :class:`~disco_isac.rng.TrialStreams` (or a single generator,
    used for every purpose).  ``g_los`` may be passed to reuse the deterministic
    near-field matrix across trials.
    """
    if not isinstance(streams, TrialStreams):
        gen = streams
        streams = {p: gen for p in ("geometry", "fading", "dris")}
    if placement is None:
        placement = draw_placement(config, streams["geometry"])
    ls = large_scale_gains(config, placement)
    theta1, theta2, theta_h, theta_v = target_angles(config, placement.target)
    if g_los is None:
        g_los = bs_dris_los(config)
    fading = streams["fading"]
    k = config.k_c
    # direct paths first so they stay common across element-count sweeps
    h_d_c = crandn(fading, (config.n_b, k)) * np.sqrt(ls.l_d_c)[None, :]
    g = rician_bs_dris(config, g_los, fading, ls.l_g)
    h_i_c = crandn(fading, (config.n_d, k)) * np.sqrt(ls.l_i_c)[None, :]
    delta = config.spacing_ratio
    h_d1_s = math.sqrt(ls.l_d1_s) * steering_ula(config.n_b, theta1, delta)
    h_d2_s = math.sqrt(ls.l_d2_s) * steering_ula(config.n_s, theta2, delta)
    h_i_s = math.sqrt(ls.l_i_s) * upa_response(config.n_d_h, config.n_d_v, theta_h, theta_v, delta)
    dris_rng = streams["dris"]
    phi_pt = draw_reflection_state(config.dris, config.n_d, dris_rng)
    phi_dt = draw_reflection_state(config.dris, config.n_d, dris_rng)
    return ChannelSet(
        g=g,
        h_d_c=h_d_c,
        h_i_c=h_i_c,
        h_d1_s=h_d1_s,
        h_d2_s=h_d2_s,
        h_i_s=h_i_s,
        large_scale=ls,
        phi_pt=phi_pt,
        phi_dt=phi_dt,
        theta1=theta1,
        theta2=theta2,
        placement=placement,
    )


def expected_user_gain(large_scale: LargeScale, n_d, nu_bar, with_dris=True):
    """Mean per-antenna power gain of each user's PT channel."""
    gain = np.array(large_scale.l_d_c, dtype=float)
    if with_dris:
        gain = gain + large_scale.l_cas_c * n_d * nu_bar
    return gain
