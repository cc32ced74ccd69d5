import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbmqos.errors import ConfigError
from sbmqos.traffic import TrafficConfig, generate_arrivals


def test_zero_request_rate_rejected():
    with pytest.raises(ConfigError):
        TrafficConfig(8000.0, request_rate=0.0)


@pytest.mark.parametrize("bad", [0, -5])
def test_nonpositive_horizon_rejected(bad):
    with pytest.raises(ConfigError):
        generate_arrivals(TrafficConfig(8000.0), bad)


def test_fixed_bursts_sample_mean():
    a = generate_arrivals(TrafficConfig(8000.0, request_rate=1.0, seed=3), 100_000)
    assert len(a) == 100_000
    assert abs(a.mean() - 8000) / 8000 < 0.01
    assert np.all(a % 8000 == 0)


def test_16mbps_maps_to_8000_bits_per_slot():
    cfg = TrafficConfig.from_mbps(16, 0.5e-3)
    assert cfg.mean_rate_bits_per_slot == pytest.approx(8000.0)
    a = generate_arrivals(cfg, 200_000)
    # Reference downlink rate 8001.7 bits/slot for this load.
    assert abs(a.mean() - 8001.7) / 8001.7 < 0.01


def test_exponential_bursts_mean():
    a = generate_arrivals(TrafficConfig(5000.0, request_rate=2.0, burst_distribution="exponential", seed=1), 100_000)
    assert abs(a.mean() - 5000) / 5000 < 0.01
    assert a.min() >= 0


@settings(max_examples=30, deadline=None)
@given(rate=st.floats(10, 1e5), req=st.floats(0.05, 20), seed=st.integers(0, 2**63 - 1))
def test_rate_identity_and_reproducibility(rate, req, seed):
    cfg = TrafficConfig(rate, request_rate=req, seed=seed)
    assert cfg.request_rate * cfg.mean_burst_bits == pytest.approx(rate, rel=1e-9)
    assert np.array_equal(generate_arrivals(cfg, 50), generate_arrivals(cfg, 50))


def test_lag_autocovariance_near_zero():
    a = generate_arrivals(TrafficConfig(8000.0, burst_distribution="exponential", seed=11), 100_000).astype(float)
    x = a - a.mean()
    n = x.size
    for k in range(1, 11):
        r = np.dot(x[:-k], x[k:]) / (n - k) / x.var()
        assert abs(r) < 3 / np.sqrt(n - k), k
