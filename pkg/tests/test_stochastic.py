import math

import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from aoi_multicast import CapacityError, ConfigError
from aoi_multicast.stochastic import (
    coefficient_table,
    order_stat_cdf,
    order_stat_pdf,
    order_stat_sf,
    rank_success_probabilities,
    service_cdf,
    service_pdf,
)
from aoi_multicast.config import ServiceModel

from conftest import configs, make


def test_service_cdf_examples():
    assert service_cdf(0.1, ServiceModel(1.0, 0.1)) == 0.0
    assert service_cdf(0.1 + 1 / 3, ServiceModel(3.0, 0.1)) == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert service_cdf(1.1, ServiceModel(1 / 3, 0.1)) == pytest.approx(0.283469, abs=1e-6)


def test_service_cdf_matches_integrated_density():
    m = ServiceModel(1 / 3, 0.1)
    val, _ = integrate.quad(lambda t: service_pdf(t, m), 0.1, 1.1)
    assert val == pytest.approx(service_cdf(1.1, m), rel=1e-10)


def test_single_device_order_stat_is_the_service_density():
    cfg = make(1, 1, 0.7, 0.2)
    for t in (0.25, 1.0, 4.0):
        assert order_stat_pdf(t, 1, cfg) == pytest.approx(0.7 * math.exp(-0.7 * (t - 0.2)), rel=1e-14)


def test_min_of_two_density():
    assert order_stat_pdf(0.5, 1, make(2, 1, 1.0)) == pytest.approx(2 * math.exp(-1), rel=1e-14)


def test_order_stat_density_normalized():
    cfg = make(10, 7, 1.0, 0.1)
    val, _ = integrate.quad(lambda t: order_stat_pdf(t, 7, cfg), 0.1, math.inf, epsabs=1e-13)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_order_stat_cdf_examples():
    cfg = make(2, 2, 1.0)
    assert order_stat_cdf(0.0, 2, cfg) == 0.0
    assert order_stat_cdf(-1.0, 1, cfg) == 0.0
    assert order_stat_cdf(math.log(2), 2, cfg) == pytest.approx(0.25, rel=1e-14)


def test_order_stat_cdf_derivative_matches_density():
    cfg = make(10, 7, 0.5, 0.1)
    h = 1e-6
    for i in range(20):
        t = 0.3 + 0.6 * i
        if order_stat_cdf(t, 7, cfg) < 0.5:
            deriv = (order_stat_cdf(t + h, 7, cfg) - order_stat_cdf(t - h, 7, cfg)) / (2 * h)
        else:
            # difference the tail instead to avoid cancellation near 1
            deriv = (order_stat_sf(t - h, 7, cfg) - order_stat_sf(t + h, 7, cfg)) / (2 * h)
        assert deriv == pytest.approx(order_stat_pdf(t, 7, cfg), rel=1e-6, abs=1e-12)


def test_rank_out_of_range():
    cfg = make(3, 2, 1.0)
    for bad in (0, 4):
        with pytest.raises(ConfigError):
            order_stat_pdf(1.0, bad, cfg)
        with pytest.raises(ConfigError):
            order_stat_cdf(1.0, bad, cfg)


def test_coefficient_table_two_devices():
    t = coefficient_table(make(2, 1, 1.0))
    assert t.B[1] == (2,) and t.U[1] == (2,)
    assert t.B[2] == (2, -2) and t.U[2] == (1, 2)


@pytest.mark.parametrize("n", [1, 2, 10, 20, 30])
def test_coefficient_normalization(n):
    t = coefficient_table(make(n, 1, 1.0))
    for h in range(1, n + 1):
        assert abs(float(t.normalization(h)) - 1) < 1e-9


def test_decay_factor_example():
    t = coefficient_table(make(10, 7, 1.0, 0.1, "fixed", 1.0))
    assert t.U[7][0] == 4
    assert float(t.V[7][0]) == pytest.approx(math.exp(-0.9 * 4), rel=1e-14)


def test_capacity_limit():
    with pytest.raises(CapacityError):
        make(31, 1, 1.0)


def test_rank_probabilities_examples():
    r = rank_success_probabilities(make(2, 1, 1.0, 0.0, "fixed", 0.5))
    assert r.exceed_prob[1] == pytest.approx(math.exp(-1), rel=1e-14)
    r = rank_success_probabilities(make(2, 1, 1.0, 0.0, "exp", 1.0))
    assert r.success_prob[1] == pytest.approx(2 / 3, rel=1e-14)
    # deadline just past the shift: every rank almost surely misses it
    r = rank_success_probabilities(make(5, 3, 1.0, 0.1, "fixed", 0.1 + 1e-9))
    assert all(v > 1 - 1e-8 for v in r.exceed_prob.values())
    r = rank_success_probabilities(make(4, 2, 1.0))
    assert all(v == 0 for v in r.exceed_prob.values())


@given(configs())
def test_rank_probabilities_properties(cfg):
    r = rank_success_probabilities(cfg)
    n = cfg.num_devices
    for h in range(1, n + 1):
        assert -1e-15 <= r.exceed_prob[h] <= 1 + 1e-15
        assert r.exceed_prob[h] + r.success_prob[h] == pytest.approx(1, abs=1e-14)
    for h in range(1, n):
        assert r.exceed_prob[h] <= r.exceed_prob[h + 1] + 1e-14


@given(configs(policies=("fixed",)), st.integers(1, 30))
def test_fixed_exceed_matches_quadrature(cfg, h_seed):
    h = 1 + h_seed % cfg.num_devices
    td = cfg.deadline.horizon
    tail, _ = integrate.quad(lambda t: order_stat_pdf(t, h, cfg), td, math.inf,
                             epsabs=1e-13, epsrel=1e-12)
    assert rank_success_probabilities(cfg).exceed_prob[h] == pytest.approx(tail, rel=1e-8, abs=1e-12)


@given(configs(policies=("exp",)), st.integers(1, 30))
def test_random_success_matches_quadrature(cfg, h_seed):
    h = 1 + h_seed % cfg.num_devices
    c, rd = cfg.service.shift, cfg.deadline.rate

    def integrand(x):
        return rd * math.exp(-rd * (x - c)) * order_stat_cdf(x, h, cfg)

    val, _ = integrate.quad(integrand, c, math.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    assert rank_success_probabilities(cfg).success_prob[h] == pytest.approx(val, rel=1e-8, abs=1e-12)


@given(configs(max_devices=12), st.lists(st.floats(0, 1), min_size=5, max_size=10))
def test_cdf_is_integral_of_density(cfg, fractions):
    c = cfg.service.shift
    h = cfg.threshold
    for frac in fractions:
        t = c + 10 * frac / cfg.service.rate
        val, _ = integrate.quad(lambda x: order_stat_pdf(x, h, cfg), c, t, epsabs=1e-13, epsrel=1e-12)
        assert order_stat_cdf(t, h, cfg) == pytest.approx(val, abs=1e-8)
