"""Multi-lane ring-road kinematics.

Background vehicles follow the intelligent driver model (IDM) against their
same-lane leader; the ego vehicle is controlled through five discrete
actions (lane left / keep / lane right / accelerate / decelerate).  The road
is a ring: positions wrap modulo the segment length, which keeps traffic
density constant without spawn logic.  Background vehicles get a resampled
speed when they wrap; the ego keeps its policy-controlled speed.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .seeding import TAG_WRAP, substream


@dataclass(frozen=True)
class VehicleState:
    id: int
    lane: int
    x: float          # rear-bumper position, m; vehicle occupies [x, x + length)
    v: float          # longitudinal speed, m/s
    a: float = 0.0    # longitudinal acceleration, m/s^2
    length: float = 5.0
    is_ego: bool = False


@dataclass(frozen=True)
class IdmParams:
    v0: float = 25.0      # desired speed, m/s
    T: float = 1.5        # safe time headway, s
    a_max: float = 1.5    # maximum acceleration, m/s^2
    b: float = 2.0        # comfortable deceleration, m/s^2
    s0: float = 2.0       # minimum bumper gap, m
    delta: float = 4.0    # acceleration exponent

    def __post_init__(self):
        for name in ("v0", "T", "a_max", "b", "s0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be strictly positive")
        if self.delta < 1:
            raise ValueError("IdmParams.delta must be >= 1")


@dataclass(frozen=True)
class RoadConfig:
    lanes: int = 4
    lane_width: float = 4.0
    length: float = 1000.0     # ring circumference, m
    dt: float = 0.25           # kinematic step, s
    v_min: float = 20.0        # reward normalization lower speed limit, m/s
    v_max: float = 30.0        # reward normalization upper speed limit, m/s
    v_hard_max: float = 40.0   # physical speed cap, m/s
    a_ego_step: float = 2.0    # magnitude set by accelerate/decelerate actions
    b_emergency: float = 8.0   # braking applied at non-positive gaps
    action_repeat: int = 4     # kinematic steps per policy step
    vehicle_length: float = 5.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("RoadConfig.dt must be positive")
        if self.v_min >= self.v_max:
            raise ValueError("RoadConfig requires v_min < v_max")
        if self.lanes < 1 or self.length <= 0 or self.action_repeat < 1:
            raise ValueError("RoadConfig lanes/length/action_repeat invalid")


@dataclass(frozen=True)
class WorldState:
    """Snapshot of the full simulation: traffic, radio, association state.

    Treated as a value; every transformation returns a new instance.  The
    radio/assoc fields are populated by the environment layer.
    """

    road: RoadConfig
    idm: IdmParams
    vehicles: tuple
    ego_id: int
    seed: int
    t: int = 0          # policy steps elapsed
    tick: int = 0       # kinematic substeps elapsed
    radio: object = None
    stations: tuple = ()
    assoc: dict = field(default_factory=dict)
    lane_change_rejected: bool = False

    def ego(self) -> VehicleState:
        for veh in self.vehicles:
            if veh.id == self.ego_id:
                return veh
        raise ValueError(f"ego vehicle {self.ego_id} not present")


def ring_forward(x_from: float, x_to: float, length: float) -> float:
    """Distance travelled from x_from to x_to in driving direction."""
    return (x_to - x_from) % length


def leader_of(world: WorldState, veh: VehicleState):
    """Nearest same-lane vehicle ahead on the ring, or None.

    Returns ``(leader, bumper_gap)``; the gap is measured from this
    vehicle's front bumper to the leader's rear bumper and can be negative
    when the two overlap.
    """
    best = None
    best_fwd = None
    for other in world.vehicles:
        if other.id == veh.id or other.lane != veh.lane:
            continue
        fwd = ring_forward(veh.x, other.x, world.road.length)
        if best_fwd is None or fwd < best_fwd:
            best, best_fwd = other, fwd
    if best is None:
        return None, None
    return best, best_fwd - veh.length


def idm_acceleration(ego: VehicleState, leader: Optional[VehicleState],
                     p: IdmParams, b_emergency: float = 8.0) -> float:
    """IDM acceleration against an (optional) leader ahead on a straight.

    With no leader the interaction term vanishes.  A non-positive bumper gap
    signals an imminent collision and falls back to hard emergency braking.
    """
    free = 1.0 - (ego.v / p.v0) ** p.delta
    if leader is None:
        return p.a_max * free
    gap = leader.x - ego.x - ego.length
    if gap <= 0.0:
        return -b_emergency
    dv = ego.v - leader.v
    s_star = p.s0 + ego.v * p.T + ego.v * dv / (2.0 * math.sqrt(p.a_max * p.b))
    return p.a_max * (free - (s_star / gap) ** 2)


def _lane_change_blocked(world: WorldState, ego: VehicleState, target_lane: int) -> bool:
    """Occupied within the IDM headway s0 + v*T in either direction."""
    margin = world.idm.s0 + ego.v * world.idm.T
    length = world.road.length
    for other in world.vehicles:
        if other.id == ego.id or other.lane != target_lane:
            continue
        ahead = ring_forward(ego.x, other.x, length) - ego.length
        behind = ring_forward(other.x, ego.x, length) - other.length
        if min(ahead, behind) < margin:
            return True
    return False


def apply_driving_action(world: WorldState, a_tran: int) -> WorldState:
    """Apply one of the five discrete driving actions to the ego.

    1 = lane left, 2 = keep, 3 = lane right, 4 = set acceleration
    +a_ego_step, 5 = set acceleration -a_ego_step.  Lane changes are
    instantaneous and rejected (no-op plus flag) when the target lane is
    occupied within the IDM headway; the set acceleration persists until the
    next acceleration action.
    """
    if a_tran not in (1, 2, 3, 4, 5):
        raise ValueError(f"driving action must be in 1..5, got {a_tran}")
    ego = world.ego()
    rejected = False
    vehicles = world.vehicles
    if a_tran in (1, 3):
        target = max(ego.lane - 1, 0) if a_tran == 1 else min(ego.lane + 1, world.road.lanes - 1)
        if target != ego.lane:
            if _lane_change_blocked(world, ego, target):
                rejected = True
            else:
                vehicles = tuple(
                    replace(v, lane=target) if v.id == ego.id else v for v in vehicles
                )
    elif a_tran in (4, 5):
        accel = world.road.a_ego_step if a_tran == 4 else -world.road.a_ego_step
        vehicles = tuple(
            replace(v, a=accel) if v.id == ego.id else v for v in vehicles
        )
    return replace(world, vehicles=vehicles, lane_change_rejected=rejected)


def step_kinematics(world: WorldState, dt: float) -> WorldState:
    """One forward-Euler step for every vehicle.

    Background accelerations are recomputed from the pre-step state via the
    IDM; the ego keeps its action-set acceleration.  Speeds clamp to
    [0, v_hard_max]; positions advance with the pre-step speed and wrap on
    the ring.  A wrapping background vehicle re-enters with a resampled
    speed drawn from a tick-keyed substream.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    road = world.road
    lo = min(road.v_min, world.idm.v0)
    hi = max(road.v_min, world.idm.v0)
    updated = []
    for veh in world.vehicles:
        if veh.is_ego:
            accel = veh.a
        else:
            leader, gap = leader_of(world, veh)
            if leader is None:
                accel = idm_acceleration(veh, None, world.idm, road.b_emergency)
            else:
                virtual = replace(leader, x=veh.x + gap + veh.length)
                accel = idm_acceleration(veh, virtual, world.idm, road.b_emergency)
        v_new = min(max(veh.v + accel * dt, 0.0), road.v_hard_max)
        x_new = veh.x + veh.v * dt
        if x_new >= road.length:
            x_new -= road.length
            if not veh.is_ego:
                rng = substream(world.seed, TAG_WRAP, world.tick, veh.id)
                v_new = rng.uniform(lo, hi)
        updated.append(replace(veh, x=x_new, v=v_new, a=accel))
    return replace(world, vehicles=tuple(updated), tick=world.tick + 1)


def detect_collision(world: WorldState) -> int:
    """1 iff the ego's occupied interval overlaps another same-lane vehicle."""
    ego = world.ego()
    length = world.road.length
    for other in world.vehicles:
        if other.id == ego.id or other.lane != ego.lane:
            continue
        fwd = ring_forward(ego.x, other.x, length)
        if fwd < ego.length or length - fwd < other.length:
            return 1
    return 0
