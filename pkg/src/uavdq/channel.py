"""Link models: probabilistic LoS/NLoS for ground users, mmWave LoS for aerial users.

The UAV serves a user while hovering directly above (or below) it at
altitude ``H``, so the serving link length is the altitude gap
``|H - h_i|``.  Flight time is measured from the UAV's current hover point
to the user.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import ChannelParams, Scenario, UavConfig, UserKind, UserProfile

# Serving distance floor; an aerial user at exactly the UAV altitude would
# otherwise put the link at d = 0.
MIN_LINK_DISTANCE = 1.0


class ChannelDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LinkBudget:
    distance: float
    elevation_deg: float
    los_probability: float  # nan for aerial (pure LoS) links
    mean_gain_or_pathloss: float  # linear gain (ground) or linear path loss (aerial)
    snr: float
    rate: float


def distance_3d(uav_xy, uav_alt: float, user: UserProfile) -> float:
    return math.sqrt((uav_xy[0] - user.x) ** 2 + (uav_xy[1] - user.y) ** 2 + (uav_alt - user.h) ** 2)


def flight_time(distance: float, speed: float) -> float:
    if speed <= 0:
        raise ChannelDomainError(f"speed must be > 0, got {speed}")
    return distance / speed


def elevation_deg(altitude_gap: float, distance: float) -> float:
    if distance <= 0:
        raise ChannelDomainError(f"distance must be > 0, got {distance}")
    gap = abs(altitude_gap)
    assert gap <= distance * (1 + 1e-12), "altitude gap cannot exceed the 3D distance"
    return math.degrees(math.asin(min(gap / distance, 1.0)))


def los_probability(elevation: float, params: ChannelParams) -> float:
    """LoS probability for an elevation angle given in degrees."""
    exponent = -params.env_y * (elevation - params.env_x)
    if exponent > 700.0:  # exp would overflow; the probability is 0 to double precision
        return 0.0
    return 1.0 / (1.0 + params.env_x * math.exp(exponent))


def ground_mean_gain(distance: float, elevation: float, params: ChannelParams) -> float:
    if distance <= 0:
        raise ChannelDomainError(f"distance must be > 0, got {distance}")
    p_los = los_probability(elevation, params)
    g_los = distance ** (-params.path_loss_exponent)
    g_nlos = params.nlos_attenuation * g_los
    return p_los * g_los + (1.0 - p_los) * g_nlos


def ground_rate(gain: float, uav: UavConfig, params: ChannelParams) -> float:
    snr = uav.tx_power * gain / params.noise_power
    return uav.bandwidth * math.log2(1.0 + snr)


def aerial_pathloss_db(distance: float, params: ChannelParams) -> float:
    if distance <= 0:
        raise ChannelDomainError(f"distance must be > 0, got {distance}")
    fspl = 20.0 * math.log10(4.0 * math.pi * distance * params.mmwave_freq / params.light_speed)
    return fspl + params.los_attenuation_db


def aerial_rate(pathloss_db: float, uav: UavConfig, params: ChannelParams) -> float:
    pathloss = 10.0 ** (pathloss_db / 10.0)
    snr = uav.tx_power / (pathloss * params.noise_power)
    return uav.aerial_link_bandwidth * math.log2(1.0 + snr)


def transmission_delay(user: UserProfile, rate: float) -> float:
    if rate <= 0:
        raise ChannelDomainError(f"user {user.id} is unserveable: rate {rate} <= 0")
    return user.data_size / rate


def serving_distance(uav: UavConfig, user: UserProfile) -> float:
    return max(abs(uav.altitude - user.h), MIN_LINK_DISTANCE)


def link_budget(scenario: Scenario, user: UserProfile) -> LinkBudget:
    """Serving-link budget for ``user`` with the UAV hovering above it."""
    uav, ch = scenario.uav, scenario.channel
    d = serving_distance(uav, user)
    phi = elevation_deg(min(abs(uav.altitude - user.h), d), d)
    if user.kind is UserKind.GROUND:
        p_los = los_probability(phi, ch)
        gain = ground_mean_gain(d, phi, ch)
        rate = ground_rate(gain, uav, ch)
        snr = uav.tx_power * gain / ch.noise_power
        return LinkBudget(d, phi, p_los, gain, snr, rate)
    pl_db = aerial_pathloss_db(d, ch)
    pathloss = 10.0 ** (pl_db / 10.0)
    snr = uav.tx_power / (pathloss * ch.noise_power)
    return LinkBudget(d, phi, math.nan, pathloss, snr, aerial_rate(pl_db, uav, ch))


def user_rate(scenario: Scenario, user: UserProfile) -> float:
    return link_budget(scenario, user).rate
