"""Joint driving / network-selection environment.

Fifteen flat actions combine five driving actions with three association
actions.  Each policy step applies the driving action, integrates the
kinematics for ``action_repeat`` substeps, checks for a collision,
re-evaluates every radio link, resolves the association action, and scores
the two reward components:

    r_tran = w1 * clamp((v - v_min)/(v_max - v_min), 0, 1) - w2 * collision
    r_tele = w3 * serving_rate * (1 - min(1, xi))

The total reward is their exact sum.  Episodes end on a collision or at the
horizon.  All randomness flows through seed-keyed substreams, so a seed and
an action sequence determine the full trajectory.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, EpisodeDoneError
from .radio import (AssocState, RadioConfig, build_stations, evaluate_network,
                    linear_to_db, resolve_tele_action, update_handoff)
from .seeding import TAG_SPAWN, substream
from .traffic import (IdmParams, RoadConfig, VehicleState, WorldState,
                      apply_driving_action, detect_collision, leader_of,
                      step_kinematics)

N_TRAN = 5
N_TELE = 3
N_FLAT = N_TRAN * N_TELE


@dataclass(frozen=True)
class EnvConfig:
    omega1: float = 1.0        # speed-tracking weight
    omega2: float = 5.0        # collision penalty weight
    omega3: float = 2e-10      # rate scaling (~5 Gb/s THz serving rates -> O(1))
    horizon: int = 60          # policy steps per episode
    n_background: int = 8
    desired_velocity: float = 25.0
    seed: int = 0

    def __post_init__(self):
        if min(self.omega1, self.omega2, self.omega3) < 0:
            raise ValueError("reward weights must be non-negative")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_background < 0:
            raise ValueError("n_background must be >= 0")


@dataclass(frozen=True)
class JointAction:
    tran: int  # 1..5
    tele: int  # 1..3

    def __post_init__(self):
        if self.tran not in range(1, N_TRAN + 1) or self.tele not in range(1, N_TELE + 1):
            raise ValueError(f"invalid joint action ({self.tran}, {self.tele})")

    @property
    def flat(self) -> int:
        return N_TELE * (self.tran - 1) + (self.tele - 1)

    @classmethod
    def from_flat(cls, flat: int) -> "JointAction":
        if not 0 <= flat < N_FLAT:
            raise ValueError(f"flat action {flat} out of range [0, {N_FLAT})")
        return cls(tran=flat // N_TELE + 1, tele=flat % N_TELE + 1)


@dataclass(frozen=True)
class RewardVector:
    r_tran: float
    r_tele: float

    @property
    def total(self) -> float:
        return self.r_tran + self.r_tele


@dataclass(frozen=True)
class RawObservation:
    """Physical-unit observation before embedding."""

    positions: np.ndarray
    velocities: np.ndarray
    lanes: np.ndarray
    v_ego: float
    lane_ego: int
    gap_leader: Optional[float]
    candidates: tuple
    best_sinr_db: Optional[float]
    serving_bs: Optional[int]
    n_serving: Optional[int]
    quota_serving: Optional[int]


@dataclass(frozen=True)
class Observation:
    features: np.ndarray
    raw: RawObservation


def _clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return min(max(x, lo), hi)


def embed(raw: RawObservation, road: RoadConfig) -> np.ndarray:
    """Five features in [-1, 1] feeding the circuit encoder.

    f0 speed within the policy limits, f1 lane index, f2 squashed leader
    gap (+1 when leader-free), f3 best-candidate SINR in dB over a 40 dB
    scale (-1 in deep outage), f4 serving-station load against its quota
    (-1 when unattached).
    """
    f0 = _clamp(2.0 * (raw.v_ego - road.v_min) / (road.v_max - road.v_min) - 1.0)
    f1 = _clamp(raw.lane_ego / 1.5 - 1.0)
    if raw.gap_leader is None:
        f2 = 1.0
    else:
        f2 = _clamp(2.0 * math.tanh(raw.gap_leader / 100.0) - 1.0)
    if raw.best_sinr_db is None:
        f3 = -1.0
    else:
        f3 = _clamp(raw.best_sinr_db / 40.0)
    if raw.n_serving is None or raw.quota_serving is None:
        f4 = -1.0
    else:
        f4 = 2.0 * min(1.0, raw.n_serving / raw.quota_serving) - 1.0
    return np.array([f0, f1, f2, f3, f4])


def reward_tran(v_ego: float, delta: int, cfg: EnvConfig, road: RoadConfig) -> float:
    frac = (v_ego - road.v_min) / (road.v_max - road.v_min)
    return cfg.omega1 * _clamp(frac, 0.0, 1.0) - cfg.omega2 * delta


def reward_tele(rate: float, xi: float, omega3: float) -> float:
    return omega3 * rate * (1.0 - min(1.0, xi))


def _spawn_vehicles(cfg: EnvConfig, road: RoadConfig, idm: IdmParams,
                    seed: int) -> tuple:
    """Non-overlapping placement on per-lane slots with jittered offsets."""
    n = 1 + cfg.n_background
    per_lane = math.ceil(n / road.lanes)
    slot_len = road.length / per_lane
    min_clear = road.vehicle_length + 2.0 * idm.s0 + 1.0
    if slot_len < min_clear:
        raise ConfigError(
            f"cannot place {n} vehicles on a {road.length} m ring without overlap "
            f"(slot {slot_len:.1f} m < clearance {min_clear:.1f} m)"
        )
    rng = substream(seed, TAG_SPAWN)
    order = rng.permutation(n)
    lo = min(road.v_min, idm.v0)
    hi = max(road.v_min, idm.v0)
    vehicles = []
    for j, vid in enumerate(order):
        lane = j % road.lanes
        slot = j // road.lanes
        x = slot * slot_len + rng.uniform(0.0, slot_len - min_clear)
        v = rng.uniform(lo, hi)
        vehicles.append(VehicleState(
            id=int(vid), lane=lane, x=x, v=v, a=0.0,
            length=road.vehicle_length, is_ego=(vid == 0),
        ))
    return tuple(sorted(vehicles, key=lambda veh: veh.id))


def _observe(world: WorldState, snapshot) -> Observation:
    ego = world.ego()
    assoc = world.assoc[ego.id]
    _, gap = leader_of(world, ego)
    cands = snapshot.candidates[ego.id]
    best_sinr_db = linear_to_db(cands[0].sinr) if cands else None
    serving = assoc.serving_bs
    n_serving = snapshot.loads[serving] if serving is not None else None
    quota = snapshot.stations[serving].quota if serving is not None else None
    order = sorted(world.vehicles, key=lambda v: v.id)
    raw = RawObservation(
        positions=np.array([v.x for v in order]),
        velocities=np.array([v.v for v in order]),
        lanes=np.array([v.lane for v in order]),
        v_ego=ego.v,
        lane_ego=ego.lane,
        gap_leader=gap,
        candidates=cands,
        best_sinr_db=best_sinr_db,
        serving_bs=serving,
        n_serving=n_serving,
        quota_serving=quota,
    )
    return Observation(features=embed(raw, world.road), raw=raw)


class HighwayNetEnv:
    """Gym-style wrapper over the pure world-transition functions."""

    def __init__(self, cfg: EnvConfig, road: RoadConfig = None,
                 radio: RadioConfig = None, idm: IdmParams = None):
        self.cfg = cfg
        self.road = road or RoadConfig()
        self.radio = radio or RadioConfig()
        base_idm = idm or IdmParams()
        self.idm = replace(base_idm, v0=cfg.desired_velocity)
        self.world: Optional[WorldState] = None
        self.done = True

    def reset(self, seed: Optional[int] = None) -> Observation:
        """Spawn traffic and stations and attach every vehicle max-rate."""
        episode_seed = self.cfg.seed if seed is None else int(seed)
        vehicles = _spawn_vehicles(self.cfg, self.road, self.idm, episode_seed)
        stations = build_stations(self.road.length, self.radio)
        world = WorldState(
            road=self.road, idm=self.idm, vehicles=vehicles, ego_id=0,
            seed=episode_seed, t=0, tick=0, radio=self.radio,
            stations=stations, assoc={},
        )
        snapshot = evaluate_network(world)
        assoc = {}
        for veh in vehicles:
            fresh = AssocState()
            chosen = resolve_tele_action(veh.id, 3, fresh, snapshot)
            assoc[veh.id] = replace(fresh, serving_bs=chosen,
                                    candidates=snapshot.candidates[veh.id])
        self.world = replace(world, assoc=assoc)
        self.done = False
        self._last_snapshot = snapshot
        return _observe(self.world, snapshot)

    def step(self, flat_action: int):
        """Advance one policy step; returns (obs, rewards, done, info)."""
        if self.done or self.world is None:
            raise EpisodeDoneError("episode finished; call reset() first")
        action = JointAction.from_flat(int(flat_action))
        world = apply_driving_action(self.world, action.tran)
        for _ in range(self.road.action_repeat):
            world = step_kinematics(world, self.road.dt)
        delta = detect_collision(world)
        world = replace(world, t=world.t + 1)
        snapshot = evaluate_network(world)

        assoc = {}
        for veh in world.vehicles:
            prev = self.world.assoc[veh.id]
            tele = action.tele if veh.is_ego else 3
            chosen = resolve_tele_action(veh.id, tele, prev, snapshot)
            assoc[veh.id] = update_handoff(prev, chosen,
                                           candidates=snapshot.candidates[veh.id])
        world = replace(world, assoc=assoc)

        ego = world.ego()
        ego_assoc = assoc[ego.id]
        serving = ego_assoc.serving_bs
        if serving is not None:
            budget = snapshot.links[ego.id][serving]
            rate, sinr = budget.rate, budget.sinr
        else:
            rate, sinr = 0.0, 0.0
        r_tran = reward_tran(ego.v, delta, self.cfg, self.road)
        r_tele = reward_tele(rate, ego_assoc.xi, self.cfg.omega3)

        self.world = world
        self.done = bool(delta) or world.t >= self.cfg.horizon
        self._last_snapshot = snapshot
        obs = _observe(world, snapshot)
        info = {
            "rate": rate,
            "sinr": sinr,
            "sinr_db": linear_to_db(sinr) if sinr > 0 else float("-inf"),
            "ho_count": ego_assoc.ho_count,
            "xi": ego_assoc.xi,
            "delta": delta,
            "lane": ego.lane,
            "v_ego": ego.v,
            "serving_bs": serving,
            "n_serving": snapshot.loads[serving] if serving is not None else 0,
            "lane_change_rejected": world.lane_change_rejected,
            "t": world.t,
        }
        return obs, RewardVector(r_tran, r_tele), self.done, info
