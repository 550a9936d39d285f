"""Problem instances: users, UAV configuration, channel constants.

Scenarios are immutable and are generated as a pure function of a
distribution and a seed.  They serialize to a small JSON document; noise
power is carried in dBm on disk and exposed in watts.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

MEGABIT = 1e6


class ScenarioError(ValueError):
    """Invalid scenario, distribution, or scenario file."""


class UserKind(str, enum.Enum):
    GROUND = "ground"
    AERIAL = "aerial"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


def _require(cond: bool, name: str, msg: str) -> None:
    if not cond:
        raise ScenarioError(f"{name}: {msg}")


@dataclass(frozen=True)
class UserProfile:
    id: int
    kind: UserKind
    x: float
    y: float
    h: float
    data_size: float  # bits
    endurance: float  # seconds

    def __post_init__(self):
        object.__setattr__(self, "kind", UserKind(self.kind))
        _require(self.id >= 0, "id", f"must be >= 0, got {self.id}")
        if self.kind is UserKind.GROUND:
            _require(self.h == 0, "h", f"ground user {self.id} must have h = 0, got {self.h}")
        _require(self.data_size >= 0, "data_size", f"must be >= 0, got {self.data_size}")
        _require(self.endurance >= 0, "endurance", f"must be >= 0, got {self.endurance}")

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.h)


@dataclass(frozen=True)
class UavConfig:
    altitude: float = 100.0
    speed: float = 50.0
    tx_power: float = 5.0
    bandwidth: float = 1e6
    start_x: float = 0.0
    start_y: float = 0.0
    # None -> same as ``bandwidth`` (Table-1 behaviour)
    aerial_bandwidth: float | None = None

    def __post_init__(self):
        for name in ("altitude", "speed", "tx_power", "bandwidth"):
            value = getattr(self, name)
            _require(value > 0, name, f"must be > 0, got {value}")
        if self.aerial_bandwidth is not None:
            _require(self.aerial_bandwidth > 0, "aerial_bandwidth",
                     f"must be > 0, got {self.aerial_bandwidth}")

    @property
    def aerial_link_bandwidth(self) -> float:
        return self.bandwidth if self.aerial_bandwidth is None else self.aerial_bandwidth


@dataclass(frozen=True)
class ChannelParams:
    path_loss_exponent: float = 2.0
    nlos_attenuation: float = 0.3
    los_attenuation_db: float = 2.0
    env_x: float = 11.95
    env_y: float = 0.136
    noise_power_dbm: float = -74.0
    mmwave_freq: float = 35e9
    light_speed: float = 3e8

    def __post_init__(self):
        _require(0 < self.nlos_attenuation <= 1, "nlos_attenuation",
                 f"must be in (0, 1], got {self.nlos_attenuation}")
        _require(self.env_x > 0, "env_x", f"must be > 0, got {self.env_x}")
        _require(self.env_y > 0, "env_y", f"must be > 0, got {self.env_y}")
        _require(math.isfinite(self.noise_power_dbm), "noise_power_dbm", "must be finite")
        _require(self.mmwave_freq > 0, "mmwave_freq", f"must be > 0, got {self.mmwave_freq}")
        _require(self.light_speed > 0, "light_speed", f"must be > 0, got {self.light_speed}")

    @property
    def noise_power(self) -> float:
        """Noise power in watts."""
        return dbm_to_watts(self.noise_power_dbm)


@dataclass(frozen=True)
class Scenario:
    users: tuple[UserProfile, ...]
    uav: UavConfig = field(default_factory=UavConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        _require(len(self.users) >= 1, "users", "need at least one user")
        ids = [u.id for u in self.users]
        _require(ids == list(range(len(ids))), "users",
                 f"ids must be 0..{len(ids) - 1} in order, got {ids}")

    @property
    def num_users(self) -> int:
        return len(self.users)

    def with_endurance(self, endurance: float) -> "Scenario":
        users = tuple(replace(u, endurance=endurance) for u in self.users)
        return replace(self, users=users)

    def digest(self) -> str:
        """Short content hash, used to tie Q-table snapshots to their scenario."""
        return hashlib.sha256(dumps_scenario(self).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class ScenarioDistribution:
    region_radius: float = 200.0
    num_ground: int = 10
    num_aerial: int = 10
    aerial_altitude_range: tuple[float, float] = (50.0, 150.0)
    data_size_range: tuple[float, float] = (1 * MEGABIT, 5 * MEGABIT)
    endurance: float = 50.0
    uav: UavConfig = field(default_factory=UavConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)

    def __post_init__(self):
        _require(self.region_radius > 0, "region_radius", f"must be > 0, got {self.region_radius}")
        _require(self.num_ground >= 0, "num_ground", f"must be >= 0, got {self.num_ground}")
        _require(self.num_aerial >= 0, "num_aerial", f"must be >= 0, got {self.num_aerial}")
        _require(self.num_ground + self.num_aerial >= 1, "num_ground",
                 "num_ground + num_aerial must be >= 1")
        lo, hi = self.aerial_altitude_range
        _require(0 < lo <= hi, "aerial_altitude_range", f"need 0 < min <= max, got {(lo, hi)}")
        lo, hi = self.data_size_range
        _require(0 < lo <= hi, "data_size_range", f"need 0 < min <= max, got {(lo, hi)}")
        _require(self.endurance > 0, "endurance", f"must be > 0, got {self.endurance}")

    @property
    def num_users(self) -> int:
        return self.num_ground + self.num_aerial


def generate_scenario(dist: ScenarioDistribution, seed: int) -> Scenario:
    """Sample a scenario; ground users first, then aerial users.

    Horizontal positions are area-uniform on the disc (radius ~ r*sqrt(u)).
    """
    rng = np.random.default_rng(seed)
    n = dist.num_users
    radius = dist.region_radius * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    xs = radius * np.cos(theta)
    ys = radius * np.sin(theta)
    alt_lo, alt_hi = dist.aerial_altitude_range
    alts = rng.uniform(alt_lo, alt_hi, n)
    a_lo, a_hi = dist.data_size_range
    sizes = rng.uniform(a_lo, a_hi, n)

    users = []
    for i in range(n):
        aerial = i >= dist.num_ground
        users.append(UserProfile(
            id=i,
            kind=UserKind.AERIAL if aerial else UserKind.GROUND,
            x=float(xs[i]),
            y=float(ys[i]),
            h=float(alts[i]) if aerial else 0.0,
            data_size=float(sizes[i]),
            endurance=float(dist.endurance),
        ))
    return Scenario(users=tuple(users), uav=dist.uav, channel=dist.channel, seed=int(seed))


# -- serialization -----------------------------------------------------------

_USER_KEYS = {
    "id": "id", "kind": "kind", "x": "x", "y": "y", "h": "h",
    "data_size_bits": "data_size", "endurance_s": "endurance",
}
_UAV_KEYS = {
    "altitude_m": "altitude", "speed_mps": "speed", "tx_power_w": "tx_power",
    "bandwidth_hz": "bandwidth", "start_x": "start_x", "start_y": "start_y",
}
_UAV_OPTIONAL = {"aerial_bandwidth_hz": "aerial_bandwidth"}
_CHANNEL_KEYS = {
    "alpha": "path_loss_exponent", "eta_nlos": "nlos_attenuation",
    "eta_los_db": "los_attenuation_db", "env_x": "env_x", "env_y": "env_y",
    "noise_power_dbm": "noise_power_dbm", "mmwave_freq_hz": "mmwave_freq",
}
_CHANNEL_OPTIONAL = {"light_speed_mps": "light_speed"}


def scenario_to_dict(s: Scenario) -> dict:
    users = []
    for u in s.users:
        row = {k: getattr(u, attr) for k, attr in _USER_KEYS.items()}
        row["kind"] = u.kind.value
        users.append(row)
    uav = {k: getattr(s.uav, attr) for k, attr in _UAV_KEYS.items()}
    if s.uav.aerial_bandwidth is not None:
        uav["aerial_bandwidth_hz"] = s.uav.aerial_bandwidth
    channel = {k: getattr(s.channel, attr) for k, attr in _CHANNEL_KEYS.items()}
    channel["light_speed_mps"] = s.channel.light_speed
    return {"seed": s.seed, "uav": uav, "channel": channel, "users": users}


def _pick(obj, required: dict, optional: dict, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected an object, got {type(obj).__name__}")
    out = {}
    for key, attr in required.items():
        if key not in obj:
            raise ScenarioError(f"{where}: missing required field '{key}'")
        out[attr] = obj[key]
    for key, attr in optional.items():
        if key in obj:
            out[attr] = obj[key]
    return out


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be an object")
    for key in ("users", "uav", "channel", "seed"):
        if key not in doc:
            raise ScenarioError(f"missing required top-level field '{key}'")
    if not isinstance(doc["users"], list):
        raise ScenarioError("users: expected an array")

    users = []
    for i, row in enumerate(doc["users"]):
        where = f"users[{i}]"
        kwargs = _pick(row, _USER_KEYS, {}, where)
        try:
            users.append(UserProfile(**kwargs))
        except (ScenarioError, ValueError, TypeError) as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    try:
        uav = UavConfig(**_pick(doc["uav"], _UAV_KEYS, _UAV_OPTIONAL, "uav"))
        channel = ChannelParams(**_pick(doc["channel"], _CHANNEL_KEYS, _CHANNEL_OPTIONAL, "channel"))
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(users=tuple(users), uav=uav, channel=channel, seed=int(doc["seed"]))


def dumps_scenario(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2) + "\n"


def loads_scenario(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_dict(doc)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(s))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        return loads_scenario(path.read_text())
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def distribution_from_dict(doc: dict) -> ScenarioDistribution:
    """Build a distribution from a flat config mapping (CLI config files)."""
    doc = dict(doc or {})
    uav = UavConfig(**{attr: doc.pop(k) for k, attr in {**_UAV_KEYS, **_UAV_OPTIONAL}.items() if k in doc})
    channel = ChannelParams(**{attr: doc.pop(k) for k, attr in {**_CHANNEL_KEYS, **_CHANNEL_OPTIONAL}.items()
                               if k in doc})
    names = {f.name for f in fields(ScenarioDistribution)} - {"uav", "channel"}
    unknown = set(doc) - names
    if unknown:
        raise ScenarioError(f"unknown distribution field(s): {sorted(unknown)}")
    for key in ("aerial_altitude_range", "data_size_range"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return ScenarioDistribution(uav=uav, channel=channel, **doc)
