"""Seeded Monte Carlo sweeps and statistical checks of the DRIS channel model."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from .comm import empirical_sinr, sinr_lower_bound, sum_rate
from .config import ScenarioConfig
from .errors import DiscoIsacError, DomainError
from .rng import TrialStreams, stream
from .sensing import SensingParams, crlb, fim, mle_estimate, sensing_observation
from .waveform import generate_symbols, solve_isac_waveform, solve_sensing_waveform

AXES = ("power_dbm", "n_d", "dris_distance_m")
METRICS = ("sum_rate", "sinr_bound", "mse_aod", "mse_aoa", "crlb_aod", "crlb_aoa")
BENCHMARKS = ("comm_waveform", "isac_waveform", "sensing_waveform", "with_dris", "without_dris")
ANGLE_METRICS = ("mse_aod", "mse_aoa", "crlb_aod", "crlb_aoa")

# waveform and DRIS switch used by each benchmark for the sensing metrics
_SENSING_SETUP = {
    "with_dris": ("x0", True),
    "without_dris": ("x0", False),
    "sensing_waveform": ("x0", False),
    "isac_waveform": ("x", False),
}


def env_threads(default=None):
    """Worker count: ``DISCO_ISAC_THREADS`` if set, else the CPU count (at most 8)."""
    raw = os.environ.get("DISCO_ISAC_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    if default is not None:
        return default
    return max(1, min(os.cpu_count() or 1, 8))


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    trials: int = 200
    metrics: tuple = ("sum_rate",)
    benchmarks: tuple = BENCHMARKS
    dt_draws: int = 16

    def __post_init__(self):
        if self.axis not in AXES:
            raise DomainError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DomainError("sweep needs at least one axis value")
        diffs = np.diff(vals)
        if len(vals) > 1 and not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise DomainError("axis values must be strictly monotone")
        object.__setattr__(self, "values", vals)
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.dt_draws < 1:
            raise DomainError("dt_draws must be >= 1")
        for m in self.metrics:
            if m not in METRICS:
                raise DomainError(f"unknown metric {m!r}")
        for b in self.benchmarks:
            if b not in BENCHMARKS:
                raise DomainError(f"unknown benchmark {b!r}")
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "benchmarks", tuple(self.benchmarks))

    def config_at(self, config: ScenarioConfig, value):
        if self.axis == "power_dbm":
            return config.with_power_dbm(value)
        if self.axis == "n_d":
            if value != int(value):
                raise DomainError(f"element count must be an integer, got {value}")
            return config.with_elements(int(value))
        return config.with_dris_distance(value)


@dataclass(frozen=True)
class SweepRecord:
    axis: float
    benchmark: str
    metric: str
    mean: float
    stderr: float
    trials: int


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    runtimes: dict = field(default_factory=dict)

    def lookup(self, axis, benchmark, metric):
        for r in self.records:
            if r.axis == axis and r.benchmark == benchmark and r.metric == metric:
                return r
        raise KeyError((axis, benchmark, metric))

    def series(self, benchmark, metric):
        return [r for r in self.records if r.benchmark == benchmark and r.metric == metric]


def mse(truths, estimates):
    """Mean squared difference of two equal-length sequences."""
    t = np.asarray(truths, dtype=float)
    e = np.asarray(estimates, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise DomainError("truths and estimates must be equal-length 1-D sequences")
    if t.size == 0:
        raise DomainError("need at least one sample")
    return float(np.mean((t - e) ** 2))


# ---------------------------------------------------------------- one scenario


@dataclass(frozen=True)
class Design:
    """Waveforms designed for one channel hypothesis."""

    x0: object
    x: object
    targets: np.ndarray
    symbol_power: np.ndarray


def design_waveforms(config: ScenarioConfig, h, gains, symbols):
    """Solve both waveform problems on the gain-normalized channel.

    ``h`` is the ``N_B x K`` channel, ``gains`` the mean per-antenna power gain of
    each user.  User ``k`` is served with symbol power ``P_0 g_k``.
    """
    p0 = config.p0
    h_op = h.conj().T / np.sqrt(gains)[:, None]
    s = math.sqrt(p0) * symbols
    x0 = solve_sensing_waveform(h_op, s, p0)
    x = solve_isac_waveform(h_op, s, x0, config.kappa, p0)
    power = p0 * gains
    return Design(x0, x, np.sqrt(power)[:, None] * symbols, power)


@dataclass
class Scenario:
    config: ScenarioConfig
    streams: TrialStreams
    channels: ch.ChannelSet
    mu_bar: float
    nu_bar: float
    symbols: np.ndarray
    with_dris: Design
    without_dris: Design


def build_scenario(config: ScenarioConfig, trial, g_los=None):
    streams = TrialStreams(config.seed, trial)
    chans = ch.assemble_channels(config, streams, g_los=g_los)
    mu_bar, nu_bar = ch.dris_moments(config.dris)
    symbols = generate_symbols(config.k_c, config.frame_len, streams["symbols"]).s
    ls = chans.large_scale
    with_d = design_waveforms(
        config, chans.h_pt, ch.expected_user_gain(ls, config.n_d, nu_bar, True), symbols
    )
    without_d = design_waveforms(
        config, chans.h_d_c, ch.expected_user_gain(ls, config.n_d, nu_bar, False), symbols
    )
    return Scenario(config, streams, chans, mu_bar, nu_bar, symbols, with_d, without_d)


def evaluate_trial(config: ScenarioConfig, trial, metrics, benchmarks, dt_draws=16, g_los=None):
    """Return ``{(benchmark, metric): value}`` for one trial (angles in rad^2)."""
    sc = build_scenario(config, trial, g_los)
    chans = sc.channels
    ls = chans.large_scale
    out = {}
    want = set(metrics)
    if "sum_rate" in want or "sinr_bound" in want:
        nd = sc.without_dris
        for b in benchmarks:
            if "sum_rate" not in want:
                break
            if b == "comm_waveform":
                out[(b, "sum_rate")] = sum_rate(nd.symbol_power / config.sigma2_c)
            elif b in ("isac_waveform", "without_dris", "sensing_waveform"):
                w = nd.x0 if b == "sensing_waveform" else nd.x
                rep = empirical_sinr(
                    chans, w, nd.targets, config.sigma2_c,
                    symbol_power=nd.symbol_power, with_dris=False,
                )
                out[(b, "sum_rate")] = rep.sum_rate
            elif b == "with_dris":
                d = sc.with_dris
                rep = empirical_sinr(
                    chans, d.x, d.targets, config.sigma2_c,
                    rng=stream(config.seed, trial, "dt_states"), draws=dt_draws,
                    symbol_power=d.symbol_power, profile=config.dris,
                )
                out[(b, "sum_rate")] = rep.sum_rate
        if "sinr_bound" in want and "with_dris" in benchmarks:
            d = sc.with_dris
            bound = sinr_lower_bound(
                chans.h_pt, d.x, d.targets, ls.l_cas_c, config.n_d, sc.mu_bar,
                config.sigma2_c, d.symbol_power,
            )
            out[("with_dris", "sinr_bound")] = sum_rate(bound)
    sens_metrics = [m for m in metrics if m in ANGLE_METRICS]
    if sens_metrics:
        truth = np.array([chans.theta1, chans.theta2])
        for b in benchmarks:
            if b not in _SENSING_SETUP:
                continue
            which, with_dris = _SENSING_SETUP[b]
            w = getattr(sc.with_dris, which)
            params = SensingParams.from_config(config, ls, sc.nu_bar, with_dris=with_dris)
            if "crlb_aod" in sens_metrics or "crlb_aoa" in sens_metrics:
                c1, c2 = crlb(fim(truth, w, params, with_dris=with_dris))
                out[(b, "crlb_aod")] = c1
                out[(b, "crlb_aoa")] = c2
            if "mse_aod" in sens_metrics or "mse_aoa" in sens_metrics:
                y = sensing_observation(
                    chans, w, config, stream(config.seed, trial, "noise:" + b),
                    with_dris=with_dris, dris_rng=stream(config.seed, trial, "echo_states"),
                )
                est = mle_estimate(y, w, params)
                out[(b, "mse_aod")] = (est.theta_hat[0] - truth[0]) ** 2
                out[(b, "mse_aoa")] = (est.theta_hat[1] - truth[1]) ** 2
    return {k: v for k, v in out.items() if k[1] in want}


# ---------------------------------------------------------------- sweeps


def _summarize(samples):
    arr = np.asarray(samples, dtype=float)
    mean = float(np.mean(arr))
    se = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("nan")
    return mean, se


def run_sweep(config: ScenarioConfig, spec: SweepSpec, threads=None, progress=None):
    """Evaluate every (axis value, trial) cell and average per (benchmark, metric).

    Each cell draws from streams keyed by ``(seed, trial)`` only, so all axis
    values share the same random scenarios.  A failing axis value produces an
    entry in ``errors`` and the sweep moves on.
    """
    threads = env_threads() if threads is None else max(1, int(threads))
    result = SweepResult(spec)
    order = [(b, m) for b in spec.benchmarks for m in spec.metrics]
    for value in spec.values:
        t0 = time.perf_counter()
        try:
            cfg = spec.config_at(config, value)
            g_los = ch.bs_dris_los(cfg)

            def cell(trial, cfg=cfg, g_los=g_los):
                return evaluate_trial(cfg, trial, spec.metrics, spec.benchmarks, spec.dt_draws, g_los)

            if threads > 1 and spec.trials > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    cells = list(pool.map(cell, range(spec.trials)))
            else:
                cells = [cell(t) for t in range(spec.trials)]
        except (DiscoIsacError, ValueError, ArithmeticError) as exc:
            result.errors.append((value, f"{type(exc).__name__}: {exc}"))
            result.runtimes[value] = time.perf_counter() - t0
            continue
        for key in order:
            if key not in cells[0]:
                continue
            mean, se = _summarize([c[key] for c in cells])
            result.records.append(SweepRecord(value, key[0], key[1], mean, se, spec.trials))
        result.runtimes[value] = time.perf_counter() - t0
        if progress is not None:
            progress(value, result.runtimes[value])
    return result


# ---------------------------------------------------------------- model validation


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    expected: float
    tolerance: float
    passed: bool


@dataclass
class ValidationRecord:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def add(self, name, value, expected, tolerance, passed):
        self.checks.append(Check(name, float(value), float(expected), float(tolerance), bool(passed)))


def _moment_checks(record, label, z, samples, var_tol):
    """``z`` holds samples normalized by their predicted std, shape ``samples x entries``."""
    var = float(np.mean(np.abs(z) ** 2))
    record.add(f"{label} variance ratio", var, 1.0, var_tol, abs(var - 1.0) <= var_tol)
    # the sample mean of CN(0, 1) draws has standard deviation 1/sqrt(samples)
    worst = float(np.abs(z.mean(axis=0)).max() * math.sqrt(samples))
    record.add(f"{label} mean magnitude (std units)", worst, 0.0, 3.0, worst <= 3.0)
    parts = np.concatenate([z.real.ravel(), z.imag.ravel()]) / math.sqrt(var / 2.0)
    kurt = float(np.mean(parts**4) - 3.0)
    # entries share reflection states, so only ``samples`` draws count as independent
    k_se = math.sqrt(24.0 / samples)
    record.add(f"{label} excess kurtosis", kurt, 0.0, 3 * k_se, abs(kurt) <= 3 * k_se)


def validate_model(config: ScenarioConfig, samples=10_000, trial=0, chunk=500, var_tol=0.05):
    """Monte Carlo check of the DRIS mismatch and sensing-cascade statistics.

    One channel realization is drawn; reflection states are redrawn ``samples``
    times.  Each entry is normalized by its predicted standard deviation
    (``sqrt(L N_D mu)`` for the mismatch, ``sqrt(L N_D nu)`` for the cascade).
    """
    if samples < 1000:
        raise DomainError("need at least 1000 samples")
    streams = TrialStreams(config.seed, trial)
    chans = ch.assemble_channels(config, streams)
    mu_bar, nu_bar = ch.dris_moments(config.dris)
    ls = chans.large_scale
    n_d = config.n_d
    rng = stream(config.seed, trial, "validation")
    aca_scale = np.sqrt(ls.l_cas_c * n_d * mu_bar)
    sens_scale = math.sqrt(ls.l_cas_s * n_d * nu_bar)
    # per-user folded matrices G * h_I,k so one matmul gives all antennas
    folded = [chans.g * chans.h_i_c[:, k][None, :] for k in range(config.k_c)]
    folded_s = chans.g * chans.h_i_s[None, :]
    aca = np.empty((samples, config.n_b, config.k_c), dtype=complex)
    cascade = np.empty((samples, config.n_b), dtype=complex)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        diff = ch.draw_reflection_coeffs(config.dris, n_d, rng, m) - ch.draw_reflection_coeffs(
            config.dris, n_d, rng, m
        )
        for k, f in enumerate(folded):
            aca[done : done + m, :, k] = (f @ diff).T
        cascade[done : done + m] = (folded_s @ ch.draw_reflection_coeffs(config.dris, n_d, rng, m)).T
        done += m
    record = ValidationRecord()
    if mu_bar > 0:
        z = (aca / aca_scale[None, None, :]).reshape(samples, -1)
        _moment_checks(record, "mismatch", z, samples, var_tol)
    if nu_bar > 0:
        _moment_checks(record, "cascade", cascade / sens_scale, samples, var_tol)
    return record
