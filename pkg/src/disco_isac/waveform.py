"""Sensing-optimal and Pareto ISAC transmit waveforms.

Both solvers take the ``K_c x N_B`` channel operator ``h`` and a target symbol
matrix ``S`` (``K_c x L``) and return an ``N_B x L`` waveform with total energy
``P_0 L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InfeasibleError, NumericalError

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0)


@dataclass(frozen=True)
class SymbolFrame:
    """``K_c x L`` frame of unit-power constellation symbols."""

    s: np.ndarray

    @property
    def k_c(self):
        return self.s.shape[0]

    @property
    def frame_len(self):
        return self.s.shape[1]


@dataclass(frozen=True)
class Waveform:
    """Transmit matrix ``x`` (``N_B x L``) with its design parameters.

    ``multiplier`` is the Lagrange multiplier of the power constraint for the
    ISAC solution (``None`` for the sensing-only waveform).
    """

    x: np.ndarray
    p0: float
    kappa: float
    multiplier: Optional[float] = None

    @property
    def n_b(self):
        return self.x.shape[0]

    @property
    def frame_len(self):
        return self.x.shape[1]

    @property
    def energy(self):
        return float(np.vdot(self.x, self.x).real)

    def covariance(self):
        return self.x @ self.x.conj().T / self.frame_len


def _symbols(s):
    return s.s if isinstance(s, SymbolFrame) else np.asarray(s)


def generate_symbols(k_c, frame_len, rng):
    """I.i.d. unit-power QPSK symbols."""
    if k_c < 1 or frame_len < 1:
        raise DomainError("k_c and frame_len must be >= 1")
    return SymbolFrame(QPSK[rng.integers(0, 4, size=(k_c, frame_len))])


def solve_sensing_waveform(h, s, p0):
    """Closest waveform to ``h^H S`` (in the Procrustes sense) with ``XX^H/L = P_0/N_B I``."""
    h = np.atleast_2d(np.asarray(h))
    s = _symbols(s)
    n_b = h.shape[1]
    frame_len = s.shape[1]
    if frame_len < n_b:
        raise InfeasibleError(
            f"frame length {frame_len} < {n_b} antennas: covariance constraint is infeasible"
        )
    if p0 <= 0:
        raise DomainError("p0 must be positive")
    u, _, vh = np.linalg.svd(h.conj().T @ s, full_matrices=False)
    x0 = math.sqrt(p0 * frame_len / n_b) * (u @ vh)
    return Waveform(x0, float(p0), 0.0)


def pareto_objective(h, s, x, x0, kappa):
    """``kappa ||hX - S||^2 + (1 - kappa) ||X - X0||^2``."""
    s = _symbols(s)
    x0 = x0.x if isinstance(x0, Waveform) else x0
    comm = np.linalg.norm(h @ x - s) ** 2
    sens = np.linalg.norm(x - x0) ** 2
    return float(kappa * comm + (1.0 - kappa) * sens)


def _secular_root(lam, w, target, max_iter=200):
    """Solve ``sum w_i / (lam_i + rho)^2 = target`` for ``rho > -min(lam)``.

    ``w`` holds the squared norms of the projected right-hand side.  Newton on
    ``1/sqrt(f) - 1/sqrt(target)`` (nearly linear in rho) safeguarded by bisection.
    """
    lam_min = float(lam.min())
    lo = -lam_min
    hi = -lam_min + math.sqrt(float(w.sum()) / target)
    if hi <= lo:
        hi = lo + 1.0
    inv_t = 1.0 / math.sqrt(target)
    rho = hi
    for it in range(max_iter):
        d = lam + rho
        f = float(np.sum(w / d**2))
        if not np.isfinite(f) or f > target:
            lo = max(lo, rho)
        else:
            hi = min(hi, rho)
        if np.isfinite(f) and abs(f - target) <= 1e-14 * target:
            return rho, it + 1
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(hi), abs(lo)):
            return hi, it + 1
        step_ok = False
        if np.isfinite(f) and f > 0:
            fp = -2.0 * float(np.sum(w / d**3))
            g = 1.0 / math.sqrt(f) - inv_t
            gp = -0.5 * fp / f**1.5
            if gp > 0:
                cand = rho - g / gp
                if lo < cand < hi:
                    rho = cand
                    step_ok = True
        if not step_ok:
            rho = 0.5 * (lo + hi)
    raise NumericalError(
        f"secular equation did not converge in {max_iter} iterations; "
        f"bracket [{lo:.17g}, {hi:.17g}], target {target:.17g}"
    )


def solve_isac_waveform(h, s, x0, kappa, p0, max_iter=200):
    """Global minimizer of ``kappa||hX - S||^2 + (1-kappa)||X - X0||^2`` on ``||X||_F^2 = P_0 L``.

    The objective equals ``||AX - B||^2`` with ``A^H A = kappa h^H h + (1-kappa) I``
    and ``A^H B = kappa h^H S + (1-kappa) X0``.  The stationarity condition
    ``(A^H A + rho I) X = A^H B`` is solved in the eigenbasis of ``A^H A`` and the
    multiplier found from the scalar secular equation.
    """
    if not 0.0 <= kappa <= 1.0:
        raise DomainError("kappa must lie in [0, 1]")
    h = np.atleast_2d(np.asarray(h))
    s = _symbols(s)
    x0m = x0.x if isinstance(x0, Waveform) else np.asarray(x0)
    n_b, frame_len = x0m.shape
    target = p0 * frame_len
    if kappa == 0.0:
        return Waveform(x0m.copy(), float(p0), 0.0, 0.0)
    hh = h.conj().T
    gram = kappa * (hh @ h) + (1.0 - kappa) * np.eye(n_b)
    rhs = kappa * (hh @ s) + (1.0 - kappa) * x0m
    lam, q = np.linalg.eigh(gram)
    c = q.conj().T @ rhs
    w = np.sum(np.abs(c) ** 2, axis=1)

    lam_min = lam[0]
    tol = 1e-12 * max(1.0, float(lam.max()))
    on_min = np.abs(lam - lam_min) <= tol
    rest = ~on_min
    mass_min = float(w[on_min].sum())
    # hard case: no component on the minimal eigenspace and the pseudo-solution is too short
    if mass_min <= 1e-28 * max(1.0, float(w.sum())):
        inner = float(np.sum(w[rest] / (lam[rest] - lam_min) ** 2)) if rest.any() else 0.0
        if inner <= target:
            y = np.zeros_like(c)
            y[rest] = c[rest] / (lam[rest] - lam_min)[:, None]
            y[np.argmax(on_min), 0] += math.sqrt(target - inner)
            return Waveform(q @ y, float(p0), float(kappa), float(-lam_min))
    rho, _ = _secular_root(lam, w, target, max_iter=max_iter)
    x = q @ (c / (lam + rho)[:, None])
    return Waveform(x, float(p0), float(kappa), float(rho))


def kkt_residual(h, s, w: Waveform, x0):
    """Relative residual ``||(A^H A + rho I)X - A^H B|| / ||A^H B||``."""
    s = _symbols(s)
    x0m = x0.x if isinstance(x0, Waveform) else np.asarray(x0)
    h = np.atleast_2d(np.asarray(h))
    k = w.kappa
    lhs = k * (h.conj().T @ (h @ w.x)) + (1 - k) * w.x + w.multiplier * w.x
    rhs = k * (h.conj().T @ s) + (1 - k) * x0m
    return float(np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))
