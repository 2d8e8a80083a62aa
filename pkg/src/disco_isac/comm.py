"""Downlink receive model, empirical SINR and the ACA-aware SINR lower bound.

Users receive ``y_l = H^H x_l + n_l`` where ``H`` is the ``N_B x K`` channel
in force during data transmission.  The intended symbol of user ``k`` is
``t_{k,l} = sqrt(P_k) s_{k,l}``; ``P_k`` (``symbol_power``) is the SINR numerator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channels import ChannelSet, draw_reflection_coeffs
from .errors import DomainError
from .rng import crandn
from .waveform import Waveform


@dataclass(frozen=True)
class CommReport:
    """Per-user SINRs (linear) and the corresponding sum rates (bit/s/Hz)."""

    sinr: np.ndarray
    sinr_se: np.ndarray
    bound: Optional[np.ndarray] = None

    @property
    def sum_rate(self):
        return float(np.sum(np.log2(1.0 + self.sinr)))

    @property
    def bound_sum_rate(self):
        if self.bound is None:
            return None
        return float(np.sum(np.log2(1.0 + self.bound)))


def sum_rate(sinr):
    return float(np.sum(np.log2(1.0 + np.asarray(sinr))))


def _xmat(w):
    return w.x if isinstance(w, Waveform) else np.asarray(w)


def received_symbols(channels: ChannelSet, w, sigma2_c, rng, with_dris=True):
    """``K x L`` received samples during the data phase (noise included)."""
    h = channels.h_dt if with_dris else channels.h_d_c
    x = _xmat(w)
    y = h.conj().T @ x
    return y + crandn(rng, y.shape, sigma2_c)


def interference_power(h, x, targets):
    """Per-user mean of ``|h_k^H x_l - t_{k,l}|^2`` over the frame."""
    return np.mean(np.abs(h.conj().T @ x - targets) ** 2, axis=1)


def empirical_sinr(
    channels: ChannelSet,
    w,
    targets,
    sigma2_c,
    rng=None,
    draws=16,
    symbol_power=1.0,
    with_dris=True,
    aca_model="exact",
    profile=None,
    mu_bar=None,
):
    """Monte Carlo SINR holding the pilot-phase channel fixed.

    The interference power (multi-user residual plus ACA) is averaged over the
    frame and over ``draws`` fresh data-phase reflection states.  ``aca_model``
    ``"gaussian"`` replaces the DRIS mismatch by i.i.d. ``CN(0, L_cas,k N_D mu)``
    entries (requires ``mu_bar``); ``"exact"`` redraws the surface (requires ``profile``).
    Without the DRIS the SINR is deterministic and ``sinr_se`` is zero.
    """
    x = _xmat(w)
    targets = np.asarray(targets)
    power = np.broadcast_to(np.asarray(symbol_power, dtype=float), (targets.shape[0],))
    if not with_dris:
        den = interference_power(channels.h_d_c, x, targets) + sigma2_c
        return CommReport(power / den, np.zeros_like(den))
    if draws < 1:
        raise DomainError("draws must be >= 1")
    if aca_model == "exact":
        if profile is None:
            raise DomainError("exact ACA model needs the DRIS profile")
        coeffs = draw_reflection_coeffs(profile, channels.n_d, rng, draws)
        h_dt = channels.h_d_c[None] + channels.dris_comm(coeffs)
    elif aca_model == "gaussian":
        if mu_bar is None:
            raise DomainError("gaussian ACA model needs mu_bar")
        var = channels.large_scale.l_cas_c * channels.n_d * mu_bar
        noise = crandn(rng, (draws,) + channels.h_pt.shape) * np.sqrt(var)[None, None, :]
        h_dt = channels.h_pt[None] + noise
    else:
        raise DomainError(f"unknown ACA model {aca_model!r}")
    y = np.einsum("mnk,nl->mkl", h_dt.conj(), x, optimize=True)
    per_draw = np.mean(np.abs(y - targets[None]) ** 2, axis=2)  # draws x K
    den = per_draw.mean(axis=0) + sigma2_c
    if draws > 1:
        den_se = per_draw.std(axis=0, ddof=1) / np.sqrt(draws)
    else:
        den_se = np.full_like(den, np.nan)
    sinr = power / den
    return CommReport(sinr, sinr * den_se / den)


def sinr_lower_bound(h_pt, w, targets, l_cas_c, n_d, mu_bar, sigma2_c, symbol_power=1.0):
    """Per-user SINR lower bound ``P_k / (MU_k + P_0 L_cas,k N_D mu + sigma^2)``.

    ``h_pt`` is the ``N_B x K`` pilot-phase channel; the multi-user term is exact
    for the given frame and ``P_0`` is the waveform's power budget.
    """
    x = _xmat(w)
    p0 = w.p0 if isinstance(w, Waveform) else float(np.sum(np.abs(x) ** 2)) / x.shape[1]
    mu_term = interference_power(h_pt, x, np.asarray(targets))
    aca = p0 * np.asarray(l_cas_c, dtype=float) * n_d * mu_bar
    return np.asarray(symbol_power, dtype=float) / (mu_term + aca + sigma2_c)
