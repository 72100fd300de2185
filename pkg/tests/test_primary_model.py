import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from edt_lab.errors import NonPositiveInput, OutOfRange
from edt_lab.models import PacketSpec, PrimaryTrafficModel, SensingMode
from edt_lab.services.primary_model import (
    alpha,
    attempt_outcomes,
    busy_persistence_beta,
    ergodic_spectral_efficiency,
    estimate_transmission_time,
    failure_odds,
    stationary_probabilities,
    success_probability,
)
from edt_lab.services.rng_streams import Purpose, exponentials, stream
from edt_lab.services.simulator import _path_ends


@pytest.mark.parametrize("lam, mu, expected", [
    (3.0, 2.0, (0.6, 0.4)),
    (1.0, 1.0, (0.5, 0.5)),
    (10.0, 6.0, (0.625, 0.375)),
])
def test_stationary_probabilities(lam, mu, expected):
    p_on, p_off = stationary_probabilities(PrimaryTrafficModel(lam=lam, mu=mu))
    assert p_on == pytest.approx(expected[0], abs=1e-15)
    assert p_off == pytest.approx(expected[1], abs=1e-15)
    assert p_on + p_off == 1.0


def test_alpha(base_model):
    assert alpha(base_model) == pytest.approx(1 / 3 + 1 / 2)


def test_beta_value_and_limits(base_model):
    assert busy_persistence_beta(base_model, 0.5) == pytest.approx(0.6 + 0.4 * math.exp(-5 / 12), rel=1e-14)
    assert busy_persistence_beta(base_model, 1e-12) == pytest.approx(1.0, abs=1e-11)
    assert busy_persistence_beta(base_model, 1e3) == pytest.approx(0.6, abs=1e-12)


def test_beta_strictly_decreasing_and_bounded(base_model):
    values = [busy_persistence_beta(base_model, ts) for ts in np.linspace(0.01, 20.0, 200)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(0.6 < v < 1.0 for v in values)


def test_beta_rejects_nonpositive_interval(base_model):
    with pytest.raises(NonPositiveInput):
        busy_persistence_beta(base_model, 0.0)


def test_success_probability(base_model, long_packet):
    q, p = attempt_outcomes(base_model, long_packet)
    assert q == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert q + p == pytest.approx(1.0, abs=1e-15)
    assert success_probability(base_model, long_packet, 1) == pytest.approx(0.1353352832366127)
    assert success_probability(base_model, long_packet, 3) == pytest.approx(
        math.exp(-2.0) * (1 - math.exp(-2.0)) ** 2, rel=1e-13)


def test_success_probability_short_packet_and_sum(base_model):
    tiny = PacketSpec(t_tr=1e-12)
    assert success_probability(base_model, tiny, 1) == pytest.approx(1.0, abs=1e-11)
    # p = 1 - e^{-2} ≈ 0.865, so 400 terms leave < 1e-25
    total = math.fsum(success_probability(base_model, PacketSpec(t_tr=4.0), k) for k in range(1, 400))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_success_probability_rejects_zero_attempts(base_model, long_packet):
    with pytest.raises(OutOfRange):
        success_probability(base_model, long_packet, 0)


def test_failure_odds(base_model, long_packet):
    assert failure_odds(base_model, long_packet) == pytest.approx(math.e ** 2 - 1)


def test_estimate_transmission_time():
    assert estimate_transmission_time(1000, 100, 2.5) == pytest.approx(4.0)
    assert estimate_transmission_time(1e-9, 100, 2.5) == pytest.approx(4e-12)
    with pytest.raises(NonPositiveInput):
        estimate_transmission_time(0.0, 100, 2.5)
    with pytest.raises(NonPositiveInput):
        estimate_transmission_time(1000, 100, -1.0)


def test_ergodic_spectral_efficiency_matches_dense_trapezoid():
    g = np.linspace(0.0, 40.0, 4001)
    f = np.exp(-g)
    value = ergodic_spectral_efficiency(g, f)

    x = np.linspace(0.0, 40.0, 400_001)
    oracle = trapezoid(np.log2(1.0 + x) * np.interp(x, g, f), x)
    assert value == pytest.approx(oracle, rel=1e-7)

    t_tr = estimate_transmission_time(1000, 693, value)
    assert t_tr == pytest.approx(1000 / (693 * oracle), rel=1e-7)


def test_ergodic_spectral_efficiency_rejects_bad_tables():
    with pytest.raises(OutOfRange):
        ergodic_spectral_efficiency([0.0, 1.0], [1.0])
    with pytest.raises(OutOfRange):
        ergodic_spectral_efficiency([1.0, 0.0], [1.0, 1.0])


def test_model_validation():
    with pytest.raises(NonPositiveInput):
        PrimaryTrafficModel(lam=-1.0, mu=2.0)
    with pytest.raises(NonPositiveInput):
        PacketSpec(t_tr=0.0)
    with pytest.raises(OutOfRange):
        SensingMode.imperfect(0.5, 1.0)
    with pytest.raises(NonPositiveInput):
        SensingMode.periodic(-0.5)


def test_sampled_period_means(base_model):
    n = 20_000
    first_on = np.ones(n, dtype=bool)
    ends = _path_ends(exponentials(stream(7, Purpose.PU_PERIODS, 0, 0), (n, 2)), first_on,
                      base_model.lam, base_model.mu)
    on = ends[:, 0]
    off = ends[:, 1] - ends[:, 0]
    for sample, mean in ((on, base_model.lam), (off, base_model.mu)):
        se = sample.std(ddof=1) / math.sqrt(n)
        assert abs(sample.mean() - mean) < 4 * se
