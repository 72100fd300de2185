import math

import pytest
from scipy.integrate import quad

from edt_lab.errors import NonPositiveInput
from edt_lab.models import PacketSpec, PrimaryTrafficModel, QueueConfig, SensingMode
from edt_lab.services import queueing
from edt_lab.services.primary_model import busy_persistence_beta, stationary_probabilities


# ── Slot moments ───────────────────────────────────────────────────────────────

def test_waste_moments_match_truncated_exponential(base_model, long_packet):
    mu, t = base_model.mu, long_packet.t_tr
    p = 1.0 - math.exp(-t / mu)
    first = quad(lambda x: x * math.exp(-x / mu) / mu, 0.0, t)[0] / p
    second = quad(lambda x: x * x * math.exp(-x / mu) / mu, 0.0, t)[0] / p
    x1, x2 = queueing.waste_moments(base_model, long_packet)
    assert x1 == pytest.approx(first, rel=1e-10)
    assert x2 == pytest.approx(second, rel=1e-10)


def test_wait_moments(base_model):
    assert queueing.wait_moments(base_model, SensingMode.continuous()) == (3.0, 18.0)
    beta = busy_persistence_beta(base_model, 0.5)
    w1, w2 = queueing.wait_moments(base_model, SensingMode.periodic(0.5))
    assert w1 == pytest.approx(0.5 / (1 - beta))
    # second moment of ts·Geometric(1 - β) on {1, 2, ...}
    series = math.fsum(0.25 * n * n * (1 - beta) * beta ** (n - 1) for n in range(1, 2000))
    assert w2 == pytest.approx(series, rel=1e-10)


def test_missed_detection_moments():
    assert queueing.missed_detection_moments(SensingMode.periodic(0.5)) == (0.0, 0.0)
    d1, d2 = queueing.missed_detection_moments(SensingMode.imperfect(0.5, 0.2))
    assert d1 == pytest.approx(0.5 * 0.2 / 0.8)
    series = math.fsum(0.25 * m * m * 0.8 * 0.2 ** m for m in range(200))
    assert d2 == pytest.approx(series, rel=1e-12)


def test_periodic_wait_mean():
    model = PrimaryTrafficModel(lam=3.0, mu=2.0)
    sm = queueing.slot_moments(model, PacketSpec(t_tr=4.0), 0.5)
    assert sm.wait_mean == pytest.approx(3.67, abs=0.01)


# ── Service moments ────────────────────────────────────────────────────────────

@pytest.mark.parametrize("lam,mu,ttr,ts", [(3.0, 2.0, 4.0, 0.5), (10.0, 6.0, 1.0, 0.5), (1.0, 1.0, 0.5, 0.25)])
def test_closed_form_matches_recursion(lam, mu, ttr, ts):
    model, packet = PrimaryTrafficModel(lam=lam, mu=mu), PacketSpec(t_tr=ttr)
    closed = queueing.service_moments(model, packet, ts)
    general = queueing.service_moments_for_mode(model, packet, SensingMode.imperfect(ts, 0.0))
    assert not closed.extension
    assert general.extension
    for name in ("m1_off", "m2_off", "m1_on", "m2_on"):
        assert getattr(general, name) == pytest.approx(getattr(closed, name), rel=1e-9)


def test_continuous_service_mean(base_model, long_packet):
    sm = queueing.service_moments_for_mode(base_model, long_packet, SensingMode.continuous())
    assert sm.m1_off == pytest.approx((math.e ** 2 - 1) * 5, rel=1e-12)
    assert sm.m1_on == pytest.approx(sm.m1_off + 3.0, rel=1e-12)
    assert sm.m2_off > sm.m1_off ** 2


def test_periodic_dispatch(base_model, long_packet, half_slot_mode):
    assert queueing.service_moments_for_mode(base_model, long_packet, half_slot_mode) == \
        queueing.service_moments(base_model, long_packet, 0.5)


def test_first_moment_increases_with_pe(queue_model):
    packet = PacketSpec(t_tr=1.0)
    means = [queueing.service_moments_for_mode(queue_model, packet, SensingMode.imperfect(0.5, pe)).m1_off
             for pe in (0.0, 0.1, 0.2, 0.4)]
    assert all(a < b for a, b in zip(means, means[1:]))


# ── Two-type M/G/1 ─────────────────────────────────────────────────────────────

def test_p_on_type2(base_model):
    assert queueing.p_on_type2(base_model, 1.0) == pytest.approx(3.0 / (3.0 + 6.0 + 2.0))
    assert queueing.p_on_type2(base_model, math.inf) == pytest.approx(0.6)
    assert queueing.p_on_type2(base_model, 1e12) == pytest.approx(0.6, rel=1e-9)
    with pytest.raises(NonPositiveInput):
        queueing.p_on_type2(base_model, 0.0)


def test_stability_threshold_splits_psi_grid(queue_model):
    packet, mode = PacketSpec(t_tr=1.0), SensingMode.periodic(0.5)
    threshold = queueing.stability_threshold(queue_model, packet, mode)
    assert 2.0 < threshold < 100.0

    slow = queueing.mean_delay(QueueConfig(model=queue_model, packet=packet, mode=mode, psi=2.0))
    assert not slow.stable
    assert math.isinf(slow.e_d) and math.isinf(slow.e_nq)
    assert slow.as_row()["stable"] == 0

    fast = queueing.mean_delay(QueueConfig(model=queue_model, packet=packet, mode=mode, psi=100.0))
    assert fast.stable
    assert fast.e_d > fast.e1_t
    assert 0.0 < fast.p_empty < 1.0


def test_delay_decomposition(queue_model):
    packet, mode = PacketSpec(t_tr=1.0), SensingMode.imperfect(0.5, 0.1)
    r = queueing.mean_delay(QueueConfig(model=queue_model, packet=packet, mode=mode, psi=10.0))
    assert r.stable and r.extension
    service = r.psi * r.e2_t / (r.psi + r.e2_t - r.e1_t)
    # Little's law on the waiting room
    assert r.e_nq * r.psi == pytest.approx(r.e_d - service, rel=1e-12)


def test_light_traffic_delay_tends_to_type2_service(queue_model):
    packet, mode = PacketSpec(t_tr=1.0), SensingMode.periodic(0.5)
    sm = queueing.service_moments(queue_model, packet, 0.5)
    p_on, p_off = stationary_probabilities(queue_model)
    r = queueing.mean_delay(QueueConfig(model=queue_model, packet=packet, mode=mode, psi=1e9))
    assert r.e_d == pytest.approx(p_on * sm.m1_on + p_off * sm.m1_off, rel=1e-6)


def test_delay_curve(queue_model):
    packet, mode = PacketSpec(t_tr=1.0), SensingMode.periodic(0.5)
    curve = queueing.delay_curve(queue_model, packet, mode, [2.0, 5.0, 20.0, 100.0])
    assert [r.stable for r in curve] == [False, True, True, True]
    assert curve[1].e_nq > curve[2].e_nq > curve[3].e_nq
