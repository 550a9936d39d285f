import math

import mpmath as mp
import pytest
from hypothesis import given, strategies as st

from uavdq import channel as ch
from uavdq.scenario import ChannelParams, UavConfig, UserKind, UserProfile, Scenario, ScenarioDistribution, generate_scenario

from conftest import one_user

P = ChannelParams()
UAV = UavConfig()
CLOSED = 1e-9  # relative tolerance for closed-form arithmetic
DB = 1e-6  # relative tolerance for dB chains

# Frozen reference values, computed once with mpmath at 30 significant digits.
DIST_60_80 = 141.421356237309505
FLIGHT_141 = 2.82842712474619010
P_LOS_90 = 0.999706713922249870
GAIN_100_90 = 9.99794699745574909e-5
NOISE_W = 3.98107170553497251e-11
GROUND_RATE = 23581971.8009929027
PL_100_DB = 105.323133073054189
AERIAL_RATE = 2228621.83289771542
DELAY_50MBIT = 22.4353900073699917


def user(x, y, h, kind=UserKind.GROUND):
    return UserProfile(0, kind, x, y, h, 1e6, 10)


def test_distance_examples():
    assert ch.distance_3d((0, 0), 100, user(0, 0, 0)) == 100
    assert ch.distance_3d((0, 0), 100, user(30, 40, 100, UserKind.AERIAL)) == 50
    assert ch.distance_3d((0, 0), 100, user(60, 80, 0)) == pytest.approx(DIST_60_80, rel=CLOSED)


def test_flight_time_examples():
    assert ch.flight_time(100, 50) == 2.0
    assert ch.flight_time(0, 50) == 0.0
    assert ch.flight_time(DIST_60_80, 50) == pytest.approx(FLIGHT_141, rel=CLOSED)
    for bad in (0, -1):
        with pytest.raises(ch.ChannelDomainError):
            ch.flight_time(10, bad)


def test_los_probability_examples():
    assert ch.los_probability(P.env_x, P) == pytest.approx(1 / 12.95, rel=CLOSED)
    assert ch.los_probability(90, P) == pytest.approx(P_LOS_90, rel=CLOSED)


@given(st.floats(0, 90), st.floats(0, 90))
def test_los_probability_monotone_in_unit_interval(a, b):
    lo, hi = sorted((a, b))
    p_lo, p_hi = ch.los_probability(lo, P), ch.los_probability(hi, P)
    assert p_lo <= p_hi
    if hi > 0:
        assert 0 < p_hi < 1


def test_ground_gain_limits():
    pure_los = ChannelParams(env_x=1e-9, env_y=50)  # P_LoS -> 1 at 90 deg
    d = 37.0
    assert ch.ground_mean_gain(d, 90, pure_los) == pytest.approx(d ** -2, rel=CLOSED)
    # a huge env_x pushes P_LoS to 0 at low elevation
    pure_nlos = ChannelParams(env_x=1e12, env_y=1)
    assert ch.ground_mean_gain(d, 0, pure_nlos) == pytest.approx(0.3 * d ** -2, rel=CLOSED)


def test_ground_gain_example():
    assert ch.ground_mean_gain(100, 90, P) == pytest.approx(GAIN_100_90, rel=CLOSED)
    with pytest.raises(ch.ChannelDomainError):
        ch.ground_mean_gain(0, 90, P)


@given(st.floats(1, 1e4), st.floats(1, 1e4), st.floats(0, 90))
def test_ground_gain_decreases_with_distance(d1, d2, phi):
    lo, hi = sorted((d1, d2))
    assert ch.ground_mean_gain(hi, phi, P) <= ch.ground_mean_gain(lo, phi, P)


def test_noise_conversion():
    assert P.noise_power == pytest.approx(NOISE_W, rel=CLOSED)


def test_ground_rate_examples():
    unit_snr_gain = P.noise_power / UAV.tx_power
    assert ch.ground_rate(unit_snr_gain, UAV, P) == pytest.approx(1e6, rel=CLOSED)
    assert ch.ground_rate(0.0, UAV, P) == 0.0
    assert ch.ground_rate(GAIN_100_90, UAV, P) == pytest.approx(GROUND_RATE, rel=CLOSED)


def test_aerial_pathloss_examples():
    d0 = P.light_speed / (4 * math.pi * P.mmwave_freq)
    assert ch.aerial_pathloss_db(d0, P) == pytest.approx(2.0, rel=DB)
    assert ch.aerial_pathloss_db(100, P) == pytest.approx(PL_100_DB, rel=DB)
    diff = ch.aerial_pathloss_db(200, P) - ch.aerial_pathloss_db(100, P)
    assert diff == pytest.approx(20 * math.log10(2), rel=DB)
    with pytest.raises(ch.ChannelDomainError):
        ch.aerial_pathloss_db(0, P)


def test_aerial_rate_examples():
    unit_snr_db = 10 * math.log10(UAV.tx_power / P.noise_power)
    assert ch.aerial_rate(unit_snr_db, UAV, P) == pytest.approx(1e6, rel=DB)
    assert ch.aerial_rate(400.0, UAV, P) < 1e-12
    assert ch.aerial_rate(PL_100_DB, UAV, P) == pytest.approx(AERIAL_RATE, rel=DB)


def test_transmission_delay_examples():
    u = UserProfile(0, UserKind.GROUND, 0, 0, 0, GROUND_RATE, 10)
    assert ch.transmission_delay(u, GROUND_RATE) == pytest.approx(1.0, rel=CLOSED)
    empty = UserProfile(0, UserKind.GROUND, 0, 0, 0, 0.0, 10)
    assert ch.transmission_delay(empty, 5.0) == 0.0
    big = UserProfile(0, UserKind.AERIAL, 0, 0, 0, 50e6, 10)
    assert ch.transmission_delay(big, AERIAL_RATE) == pytest.approx(DELAY_50MBIT, rel=DB)
    for bad in (0.0, -1.0):
        with pytest.raises(ch.ChannelDomainError):
            ch.transmission_delay(big, bad)


def test_frozen_values_against_live_mpmath():
    mp.mp.dps = 30
    sigma2 = mp.mpf(10) ** ((mp.mpf(-74) - 30) / 10)
    p_los = 1 / (1 + mp.mpf("11.95") * mp.e ** (-mp.mpf("0.136") * (90 - mp.mpf("11.95"))))
    gain = p_los * mp.mpf(100) ** -2 + (1 - p_los) * mp.mpf("0.3") * mp.mpf(100) ** -2
    pl = 20 * mp.log10(4 * mp.pi * 100 * mp.mpf("35e9") / mp.mpf("3e8")) + 2
    aerial = mp.mpf(1e6) * mp.log(1 + 5 / (mp.mpf(10) ** (pl / 10) * sigma2), 2)
    for frozen, live in [(NOISE_W, sigma2), (P_LOS_90, p_los), (GAIN_100_90, gain),
                         (GROUND_RATE, mp.mpf(1e6) * mp.log(1 + 5 * gain / sigma2, 2)),
                         (PL_100_DB, pl), (AERIAL_RATE, aerial), (DELAY_50MBIT, mp.mpf(50e6) / aerial)]:
        assert frozen == pytest.approx(float(live), rel=1e-15)


def test_link_budget_dispatches_on_kind():
    s = generate_scenario(ScenarioDistribution(num_ground=5, num_aerial=5), 2)
    for u in s.users:
        lb = ch.link_budget(s, u)
        assert lb.distance == ch.serving_distance(s.uav, u)
        if u.kind is UserKind.GROUND:
            assert 0 < lb.los_probability < 1
            assert lb.rate == ch.ground_rate(ch.ground_mean_gain(lb.distance, lb.elevation_deg, s.channel),
                                             s.uav, s.channel)
        else:
            assert math.isnan(lb.los_probability)
            assert lb.rate == ch.aerial_rate(ch.aerial_pathloss_db(lb.distance, s.channel), s.uav, s.channel)


def test_ground_user_below_uav_has_vertical_link():
    s = one_user()
    lb = ch.link_budget(s, s.users[0])
    assert lb.distance == 100 and lb.elevation_deg == pytest.approx(90)
    assert lb.rate == pytest.approx(GROUND_RATE, rel=CLOSED)


def test_aerial_user_at_uav_altitude_uses_distance_floor():
    s = one_user(h=100.0, kind=UserKind.AERIAL)
    lb = ch.link_budget(s, s.users[0])
    assert lb.distance == ch.MIN_LINK_DISTANCE
    assert math.isfinite(lb.rate) and lb.rate > 0


@given(st.floats(0.1, 100), st.floats(1e3, 1e8), st.floats(1, 300))
def test_rates_monotone_in_power_and_bandwidth(power, bw, d):
    lo = UavConfig(tx_power=power, bandwidth=bw)
    hi = UavConfig(tx_power=power * 2, bandwidth=bw * 2)
    g = ch.ground_mean_gain(d, 45, P)
    assert 0 <= ch.ground_rate(g, lo, P) <= ch.ground_rate(g, hi, P)
    pl = ch.aerial_pathloss_db(d, P)
    assert 0 <= ch.aerial_rate(pl, lo, P) <= ch.aerial_rate(pl, hi, P)


def test_aerial_bandwidth_knob_only_touches_aerial_links():
    base = generate_scenario(ScenarioDistribution(num_ground=2, num_aerial=2), 4)
    wide = Scenario(base.users, UavConfig(aerial_bandwidth=20e6), base.channel, base.seed)
    for u in base.users:
        r0, r1 = ch.user_rate(base, u), ch.user_rate(wide, u)
        if u.kind is UserKind.GROUND:
            assert r0 == r1
        else:
            assert r1 == pytest.approx(20 * r0, rel=CLOSED)
