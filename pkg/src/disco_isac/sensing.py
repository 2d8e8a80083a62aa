"""Bistatic sensing model: observations, Fisher information, CRLB and MLE.

The receiver sees, per symbol ``l``,

    y_l = chi * conj(h_d2) * (h_d1 + h_D(t_l))^T x_l + n_l

where ``h_D(t_l)`` is the DRIS cascade for an independent reflection state.
The estimator models the DRIS contribution as zero-mean Gaussian, giving mean
``u_l = g * v * (a_B(theta1)^T x_l)`` with ``v = conj(a_S(theta2))`` and
covariance ``R_l = c_l v v^H + sigma^2 I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import (
    ChannelSet,
    draw_reflection_coeffs,
    dris_sensing_path,
    steering_ula,
    steering_ula_derivative,
)
from .errors import DomainError, NumericalError, UnidentifiableError
from .rng import crandn
from .waveform import Waveform


@dataclass(frozen=True)
class SensingParams:
    """Everything the sensing likelihood needs besides the angles and the waveform."""

    n_b: int
    n_s: int
    chi: float
    l_d1: float
    l_d2: float
    l_cas: float
    nu_bar: float
    n_d: int
    sigma2: float
    delta: float = 0.5

    @property
    def gain(self):
        """Amplitude of the direct (mean) path."""
        return self.chi * math.sqrt(self.l_d1 * self.l_d2)

    @property
    def dris_power(self):
        """Per-unit-energy DRIS echo power ``chi^2 L_d2 L_cas N_D nu``."""
        return self.chi**2 * self.l_d2 * self.l_cas * self.n_d * self.nu_bar

    def without_dris(self):
        return replace(self, n_d=0)

    @classmethod
    def from_config(cls, config, large_scale, nu_bar, with_dris=True):
        return cls(
            n_b=config.n_b,
            n_s=config.n_s,
            chi=config.chi,
            l_d1=large_scale.l_d1_s,
            l_d2=large_scale.l_d2_s,
            l_cas=large_scale.l_cas_s,
            nu_bar=nu_bar,
            n_d=config.n_d if with_dris else 0,
            sigma2=config.sigma2_s,
            delta=config.spacing_ratio,
        )


@dataclass(frozen=True)
class SensingReport:
    fim: np.ndarray
    crlb_theta1: float
    crlb_theta2: float
    with_dris: bool


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: tuple
    iterations: int
    converged: bool
    final_gradient_norm: float


def _xmat(w):
    return w.x if isinstance(w, Waveform) else np.asarray(w)


def wrap_angle(theta):
    """Wrap to ``[-pi/2, pi/2)``."""
    return (np.asarray(theta) + np.pi / 2) % np.pi - np.pi / 2


# ---------------------------------------------------------------- observation


def sensing_observation(channels: ChannelSet, w, config, rng, with_dris=True, dris_rng=None):
    """Draw the ``N_S x L`` matrix of received sensing snapshots (column ``l`` is ``y_l``).

    One fresh reflection state is drawn per symbol.  ``dris_rng`` defaults to ``rng``.
    """
    x = _xmat(w)
    frame_len = x.shape[1]
    direct = channels.h_d1_s @ x  # (h_d1)^T x_l
    if with_dris:
        states = draw_reflection_coeffs(config.dris, channels.n_d, dris_rng or rng, frame_len)
        hd = dris_sensing_path(channels.g, channels.h_i_s, states)  # N_B x L
        direct = direct + np.sum(hd * x, axis=0)
    rx_steer = channels.h_d2_s.conj()
    noise = crandn(rng, (rx_steer.shape[0], frame_len), config.sigma2_s)
    return config.chi * np.outer(rx_steer, direct) + noise


# ---------------------------------------------------------------- model pieces


def steering_derivative_bs(theta1, n_b, delta=0.5):
    """``d a_B / d theta1 = j 2 pi delta cos(theta1) Lambda a_B``."""
    return steering_ula_derivative(n_b, theta1, delta)


def rx_vector(theta2, n_s, delta=0.5):
    """Receive spatial signature ``v = conj(a_S(theta2))``."""
    return steering_ula(n_s, theta2, delta).conj()


def rx_vector_derivative(theta2, n_s, delta=0.5):
    """``dv/dtheta2 = -j 2 pi delta cos(theta2) Lambda v``."""
    return steering_ula_derivative(n_s, theta2, delta).conj()


def rank_one_matrix(theta2, n_s, delta=0.5):
    v = rx_vector(theta2, n_s, delta)
    return np.outer(v, v.conj())


def rank_one_derivative(theta2, n_s, delta=0.5):
    """``dM/dtheta2 = j 2 pi delta cos(theta2) (D o M)`` with ``D_mn = n - m``."""
    idx = np.arange(n_s)
    d = idx[None, :] - idx[:, None]
    return 2j * np.pi * delta * math.cos(theta2) * d * rank_one_matrix(theta2, n_s, delta)


def echo_powers(w, params: SensingParams):
    """Per-symbol DRIS echo power ``c_l``."""
    x = _xmat(w)
    return params.dris_power * np.sum(np.abs(x) ** 2, axis=0)


def covariance_rl(theta2, x_l, params: SensingParams):
    """``R_l = c_l v v^H + sigma^2 I`` for one transmit vector."""
    c = params.dris_power * float(np.vdot(x_l, x_l).real)
    return c * rank_one_matrix(theta2, params.n_s, params.delta) + params.sigma2 * np.eye(params.n_s)


def _beta(c, params):
    return c / (params.sigma2 + c * params.n_s)


def covariance_inverse(theta2, x_l, params: SensingParams):
    """Sherman-Morrison inverse ``(I - beta_l v v^H) / sigma^2``."""
    if params.sigma2 <= 0:
        raise NumericalError("sensing noise variance must be positive")
    c = params.dris_power * float(np.vdot(x_l, x_l).real)
    m = rank_one_matrix(theta2, params.n_s, params.delta)
    return (np.eye(params.n_s) - _beta(c, params) * m) / params.sigma2


def covariance_derivative(theta2, x_l, params: SensingParams):
    c = params.dris_power * float(np.vdot(x_l, x_l).real)
    return c * rank_one_derivative(theta2, params.n_s, params.delta)


def mean_signal(theta, w, params: SensingParams):
    """``N_S x L`` matrix of means ``u_l``."""
    x = _xmat(w)
    b = steering_ula(params.n_b, theta[0], params.delta) @ x
    return params.gain * np.outer(rx_vector(theta[1], params.n_s, params.delta), b)


def mean_derivatives(theta, w, params: SensingParams):
    """``(du/dtheta1, du/dtheta2)``, each ``N_S x L``."""
    x = _xmat(w)
    a_b = steering_ula(params.n_b, theta[0], params.delta)
    da_b = steering_derivative_bs(theta[0], params.n_b, params.delta)
    v = rx_vector(theta[1], params.n_s, params.delta)
    dv = rx_vector_derivative(theta[1], params.n_s, params.delta)
    g = params.gain
    return g * np.outer(v, da_b @ x), g * np.outer(dv, a_b @ x)


# ---------------------------------------------------------------- FIM / CRLB


def _inverse_stack(theta2, c, params):
    m = rank_one_matrix(theta2, params.n_s, params.delta)
    beta = _beta(c, params)
    eye = np.eye(params.n_s)
    return (eye[None] - beta[:, None, None] * m[None]) / params.sigma2


def fim(theta, w, params: SensingParams, with_dris=True):
    """2x2 Fisher information for ``(theta1, theta2)``.

    ``with_dris=False`` uses the white-noise reduction ``(2/sigma^2) sum Re(du_i^H du_j)``.
    """
    if params.sigma2 <= 0:
        raise NumericalError("singular covariance: sensing noise variance must be positive")
    du1, du2 = mean_derivatives(theta, w, params)
    if not with_dris:
        f = np.empty((2, 2))
        f[0, 0] = 2 * np.vdot(du1, du1).real
        f[1, 1] = 2 * np.vdot(du2, du2).real
        f[0, 1] = f[1, 0] = 2 * np.vdot(du1, du2).real
        return f / params.sigma2
    c = echo_powers(w, params)
    rinv = _inverse_stack(theta[1], c, params)  # L x N x N
    r1 = np.einsum("lmn,nl->ml", rinv, du1)
    r2 = np.einsum("lmn,nl->ml", rinv, du2)
    f = np.empty((2, 2))
    f[0, 0] = 2 * np.vdot(du1, r1).real
    f[1, 1] = 2 * np.vdot(du2, r2).real
    f[0, 1] = f[1, 0] = 2 * np.vdot(du1, r2).real
    dm = rank_one_derivative(theta[1], params.n_s, params.delta)
    p = np.einsum("lmn,nk->lmk", rinv, dm)
    f[1, 1] += float(np.sum(c**2 * np.einsum("lmn,lnm->l", p, p).real))
    return f


def crlb(f):
    """``(F22/det, F11/det)``; raises :class:`UnidentifiableError` unless ``F`` is positive definite."""
    f = np.asarray(f, dtype=float)
    det = f[0, 0] * f[1, 1] - f[0, 1] * f[1, 0]
    if not (det > 0 and f[0, 0] > 0 and f[1, 1] > 0) or not np.isfinite(det):
        raise UnidentifiableError(f"Fisher information is not positive definite (det = {det:.6g})")
    return float(f[1, 1] / det), float(f[0, 0] / det)


def sensing_report(theta, w, params: SensingParams, with_dris=True):
    p = params if with_dris else params.without_dris()
    f = fim(theta, w, p, with_dris=with_dris)
    c1, c2 = crlb(f)
    return SensingReport(f, c1, c2, with_dris)


# ---------------------------------------------------------------- likelihood


def log_likelihood(theta, y, w, params: SensingParams):
    """Gaussian log-likelihood with constants dropped."""
    x = _xmat(w)
    c = echo_powers(x, params)
    resid = y - mean_signal(theta, x, params)
    v = rx_vector(theta[1], params.n_s, params.delta)
    beta = _beta(c, params)
    proj = v.conj() @ resid
    quad = (np.sum(np.abs(resid) ** 2, axis=0) - beta * np.abs(proj) ** 2) / params.sigma2
    logdet = (params.n_s - 1) * math.log(params.sigma2) + np.log(params.sigma2 + c * params.n_s)
    return float(-np.sum(logdet) - np.sum(quad))


def likelihood_gradient(theta, y, w, params: SensingParams):
    """Analytic gradient of :func:`log_likelihood` with respect to ``(theta1, theta2)``."""
    x = _xmat(w)
    c = echo_powers(x, params)
    resid = y - mean_signal(theta, x, params)
    du1, du2 = mean_derivatives(theta, x, params)
    rinv = _inverse_stack(theta[1], c, params)
    z = np.einsum("lmn,nl->ml", rinv, resid)  # R^-1 (y - u)
    g1 = 2 * np.vdot(du1, z).real
    g2 = 2 * np.vdot(du2, z).real
    dm = rank_one_derivative(theta[1], params.n_s, params.delta)
    g2 += float(np.sum(c * np.einsum("ml,mn,nl->l", z.conj(), dm, z).real))
    g2 -= float(np.sum(c * np.einsum("lmn,nm->l", rinv, dm).real))
    return float(g1), float(g2)


# ---------------------------------------------------------------- estimation


def grid_search(y, w, params: SensingParams, step_deg=2.0, limit_deg=88.0):
    """Maximize the likelihood over a 2-D angle grid; returns ``(theta1, theta2)``."""
    x = _xmat(w)
    grid = np.deg2rad(np.arange(-limit_deg, limit_deg + 1e-9, step_deg))
    m_b = np.arange(params.n_b)
    m_s = np.arange(params.n_s)
    ph = 2j * np.pi * params.delta * np.sin(grid)
    a_b = np.exp(np.outer(ph, m_b))  # G x N_B
    a_s = np.exp(np.outer(ph, m_s))  # G x N_S
    b = a_b @ x  # G1 x L
    wv = a_s @ y  # G2 x L, a_S^T y_l
    c = echo_powers(x, params)
    beta = _beta(c, params)
    g = params.gain
    n = params.n_s
    shrink = 1.0 - beta * n
    cross = (b * (g * shrink)[None, :]) @ wv.conj().T  # G1 x G2
    term_b = g**2 * n * (np.abs(b) ** 2 @ shrink)  # G1
    term_w = np.abs(wv) ** 2 @ beta  # G2
    # maximize -sum Q: constant ||y||^2 dropped
    score = 2 * cross.real - term_b[:, None] + term_w[None, :]
    i, j = np.unravel_index(np.argmax(score), score.shape)
    return float(grid[i]), float(grid[j])


def mle_estimate(
    y,
    w,
    params: SensingParams,
    init=None,
    zeta=None,
    sigma_thresh=1e-10,
    max_iter=2000,
):
    """Gradient ascent on the log-likelihood with backtracking step control.

    ``init`` defaults to the 2-degree grid maximizer.  The step ``zeta`` is halved
    whenever the likelihood fails to increase and grown by 1.5 after a success.
    Convergence is declared when an accepted step satisfies
    ``||theta_new - theta_old||^2 <= sigma_thresh``.
    """
    if sigma_thresh <= 0 or (zeta is not None and zeta <= 0):
        raise DomainError("zeta and sigma_thresh must be positive")
    theta = np.asarray(grid_search(y, w, params) if init is None else init, dtype=float)
    ll = log_likelihood(theta, y, w, params)
    grad = np.asarray(likelihood_gradient(theta, y, w, params))
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        return EstimationResult(tuple(wrap_angle(theta).tolist()), 0, True, 0.0)
    step = 1e-3 / gnorm if zeta is None else float(zeta)
    it = 0
    while it < max_iter:
        it += 1
        cand = wrap_angle(theta + step * grad)
        ll_new = log_likelihood(cand, y, w, params)
        if ll_new > ll:
            delta = cand - theta
            theta, ll = cand, ll_new
            grad = np.asarray(likelihood_gradient(theta, y, w, params))
            gnorm = float(np.linalg.norm(grad))
            if float(delta @ delta) <= sigma_thresh or gnorm == 0.0:
                return EstimationResult(tuple(theta.tolist()), it, True, gnorm)
            step *= 1.5
        else:
            step *= 0.5
            if float(np.sum((step * grad) ** 2)) <= sigma_thresh * 1e-6:
                # no ascent possible at machine precision: stationary point
                return EstimationResult(tuple(theta.tolist()), it, True, gnorm)
    return EstimationResult(tuple(theta.tolist()), it, False, gnorm)
