import dataclasses
import math

import numpy as np
import pytest

from disco_isac import channels as ch
from disco_isac.comm import (
    CommReport,
    empirical_sinr,
    interference_power,
    received_symbols,
    sinr_lower_bound,
    sum_rate,
)
from disco_isac.experiments import build_scenario
from disco_isac.waveform import Waveform


@pytest.fixture
def scenario(small_config):
    return build_scenario(small_config, 0)


def test_received_symbols_noiseless_without_dris(scenario, rng):
    c = scenario.channels
    # a waveform that exactly inverts the direct channel
    x = np.linalg.pinv(c.h_d_c.conj().T) @ scenario.symbols
    y = received_symbols(c, x, 0.0, rng, with_dris=False)
    np.testing.assert_allclose(y, scenario.symbols, atol=1e-9)


def test_received_symbols_equal_states(scenario, rng):
    c = scenario.channels.with_states(phi_dt=scenario.channels.phi_pt)
    x = scenario.with_dris.x.x
    y = received_symbols(c, x, 0.0, rng)
    np.testing.assert_allclose(y, c.h_pt.conj().T @ x, rtol=1e-12)


def test_received_noise_isolation(scenario):
    c = scenario.channels
    d = scenario.with_dris
    sigma2 = 1e-3 * np.mean(np.abs(d.targets) ** 2)
    rng = np.random.default_rng(4)
    noise = []
    for _ in range(125):
        y = received_symbols(c, d.x, sigma2, rng)
        resid = y - d.targets - (c.h_pt.conj().T @ d.x.x - d.targets) - c.h_aca.conj().T @ d.x.x
        noise.append(resid)
    noise = np.concatenate(noise, axis=1)
    assert np.mean(np.abs(noise) ** 2) / sigma2 == pytest.approx(1.0, rel=0.05)


def test_noise_only_sinr(scenario):
    c = scenario.channels
    x = np.linalg.pinv(c.h_d_c.conj().T) @ scenario.symbols
    rep = empirical_sinr(c, x, scenario.symbols, 0.01, with_dris=False)
    np.testing.assert_allclose(rep.sinr, 100.0, rtol=1e-9)
    assert rep.sum_rate == pytest.approx(4 * math.log2(101.0))


def test_sum_rate_definition():
    rep = CommReport(np.array([1.0, 3.0]), np.zeros(2), np.array([0.0, 1.0]))
    assert rep.sum_rate == pytest.approx(3.0)
    assert rep.bound_sum_rate == pytest.approx(1.0)
    assert sum_rate([7.0]) == pytest.approx(3.0)


def test_dris_never_helps_on_same_draw(scenario, small_config):
    c = scenario.channels
    d = scenario.with_dris
    rng = np.random.default_rng(1)
    with_d = empirical_sinr(c, d.x, d.targets, small_config.sigma2_c, rng=rng, draws=8,
                            symbol_power=d.symbol_power, profile=small_config.dris)
    # same waveform evaluated on the pilot-phase channel (no data-phase aging)
    pt_only = d.symbol_power / (interference_power(c.h_pt, d.x.x, d.targets) + small_config.sigma2_c)
    assert with_d.sum_rate <= sum_rate(pt_only)
    assert np.all(with_d.sinr >= 0)


def test_gaussian_surrogate_matches_analytic(scenario, small_config):
    c = scenario.channels
    d = scenario.with_dris
    mu_bar = 2.0
    rep = empirical_sinr(
        c, d.x, d.targets, small_config.sigma2_c, rng=np.random.default_rng(6), draws=400,
        symbol_power=d.symbol_power, aca_model="gaussian", mu_bar=mu_bar,
    )
    # with independent CN(0, v) aging the mean interference is MU + v * mean ||x_l||^2
    var = c.large_scale.l_cas_c * small_config.n_d * mu_bar
    energy = np.mean(np.sum(np.abs(d.x.x) ** 2, axis=0))
    analytic = d.symbol_power / (interference_power(c.h_pt, d.x.x, d.targets) + var * energy + small_config.sigma2_c)
    assert np.all(np.abs(rep.sinr - analytic) <= 3 * rep.sinr_se + 1e-12)
    # and the lower bound coincides with it (same P0 energy per symbol)
    bound = sinr_lower_bound(c.h_pt, d.x, d.targets, c.large_scale.l_cas_c, small_config.n_d, mu_bar,
                             small_config.sigma2_c, d.symbol_power)
    np.testing.assert_allclose(bound, analytic, rtol=1e-10)


def test_bound_without_elements_is_mu_plus_noise(scenario, small_config):
    c = scenario.channels
    d = scenario.with_dris
    b = sinr_lower_bound(c.h_pt, d.x, d.targets, c.large_scale.l_cas_c, 0, 2.0, small_config.sigma2_c,
                         d.symbol_power)
    expected = d.symbol_power / (interference_power(c.h_pt, d.x.x, d.targets) + small_config.sigma2_c)
    np.testing.assert_allclose(b, expected)


def test_bound_decreases_with_elements(scenario, small_config):
    c = scenario.channels
    d = scenario.with_dris
    args = (c.h_pt, d.x, d.targets, c.large_scale.l_cas_c)
    b1 = sinr_lower_bound(*args, 256, 2.0, small_config.sigma2_c, d.symbol_power)
    b2 = sinr_lower_bound(*args, 512, 2.0, small_config.sigma2_c, d.symbol_power)
    assert np.all(b2 < b1)


def test_bound_saturates_with_power(small_config):
    # scaling P0 by 10 scales interference terms by 10: the bound gains far less than 10x
    lo = build_scenario(small_config, 1)
    hi = build_scenario(small_config.with_power_dbm(21.0), 1)
    def bound(sc):
        d = sc.with_dris
        return sinr_lower_bound(sc.channels.h_pt, d.x, d.targets, sc.channels.large_scale.l_cas_c,
                                small_config.n_d, sc.mu_bar, small_config.sigma2_c, d.symbol_power)
    ratio = bound(hi) / bound(lo)
    assert np.all(ratio < 10)
    assert np.all(ratio < 1.1)


def test_unit_numerator_default(scenario, small_config):
    c = scenario.channels
    d = scenario.with_dris
    b = sinr_lower_bound(c.h_pt, d.x, d.targets, c.large_scale.l_cas_c, 16, 2.0, small_config.sigma2_c)
    b_scaled = sinr_lower_bound(c.h_pt, d.x, d.targets, c.large_scale.l_cas_c, 16, 2.0, small_config.sigma2_c, 3.0)
    np.testing.assert_allclose(b_scaled, 3.0 * b)
