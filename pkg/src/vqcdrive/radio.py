"""Two-tier RF/THz downlink model.

RF links use log-distance pathloss referenced to 1 m free space; THz links
use free-space loss times molecular absorption exp(-k_a * d) with aligned
main-lobe gains on the serving link.  Interfering THz beams hit the receiver
main-lobe-to-main-lobe with probability q (one Bernoulli draw per interferer
per evaluated link), side-lobe-to-side-lobe otherwise.  Rates are Shannon:
W * log2(1 + SINR).

Candidate sets keep the top three base stations by rate among links with
SINR >= gamma_th; per-station load n_i counts candidate-set membership over
all vehicles.  Tele-actions resolve to a serving station via the weighted
rate metric WR = R / max(1, min(Q, n)) * (1 - mu), where the handoff penalty
mu applies only to stations whose selection would cause a handoff.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .seeding import TAG_LINK, substream
from .traffic import VehicleState, WorldState

SPEED_OF_LIGHT = 299_792_458.0

RF = "RF"
THZ = "THz"


@dataclass(frozen=True)
class BaseStation:
    id: int
    tier: str               # RF or THz
    x: float                # roadside position along the ring, m
    tx_power_dbm: float
    bandwidth_hz: float
    quota: int              # max supported vehicle count (Q_R or Q_T)
    carrier_hz: float
    ho_penalty: float       # mu in [0, 1); larger for THz

    def __post_init__(self):
        if self.tier not in (RF, THZ):
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.quota < 1 or self.bandwidth_hz <= 0:
            raise ValueError("BaseStation quota/bandwidth invalid")
        if not 0.0 <= self.ho_penalty < 1.0:
            raise ValueError("ho_penalty must lie in [0, 1)")


@dataclass(frozen=True)
class RadioConfig:
    # RF tier
    f_rf_hz: float = 2.0e9
    alpha_rf: float = 3.0            # log-distance pathloss exponent
    p_rf_dbm: float = 40.0
    w_rf_hz: float = 20.0e6
    quota_rf: int = 8
    mu_rf: float = 0.05
    rf_fading: bool = False          # unit-mean exponential fading per link
    # THz tier
    f_thz_hz: float = 0.3e12
    k_absorption: float = 0.05       # molecular absorption, 1/m
    p_thz_dbm: float = 30.0
    w_thz_hz: float = 1.0e9
    quota_thz: int = 4
    mu_thz: float = 0.3
    g_main_dbi: float = 20.0
    g_side_dbi: float = -10.0
    q_align: float = 0.1             # P(interfering beam hits main lobe)
    # shared
    gamma_th_db: float = 0.0         # candidate admission threshold
    noise_dbm_hz: float = -174.0
    lateral_offset_m: float = 10.0   # stations sit this far off the road axis
    rbs_spacing_m: float = 500.0
    tbs_spacing_m: float = 100.0

    def __post_init__(self):
        if not (0.0 <= self.mu_rf < 1.0 and 0.0 <= self.mu_thz < 1.0):
            raise ValueError("handoff penalties must lie in [0, 1)")
        if self.mu_thz <= self.mu_rf:
            raise ValueError("THz handoff penalty must exceed the RF penalty")
        if not 0.0 <= self.q_align <= 1.0:
            raise ValueError("q_align must lie in [0, 1]")
        if self.quota_rf < 1 or self.quota_thz < 1:
            raise ValueError("quotas must be >= 1")

    @property
    def gamma_th(self) -> float:
        return db_to_linear(self.gamma_th_db)


@dataclass(frozen=True)
class LinkBudget:
    sinr: float   # linear
    rate: float   # bit/s


@dataclass(frozen=True)
class Candidate:
    bs_id: int
    rate: float
    sinr: float


@dataclass(frozen=True)
class AssocState:
    serving_bs: Optional[int] = None
    candidates: tuple = ()
    ho_count: int = 0
    episode_steps: int = 0
    xi: float = 0.0    # handoffs per elapsed step


@dataclass(frozen=True)
class NetSnapshot:
    """All link budgets, candidate sets, and loads for one step."""

    links: dict        # av_id -> {bs_id: LinkBudget}
    candidates: dict   # av_id -> tuple of Candidate, rate-descending
    loads: dict        # bs_id -> n_i
    stations: dict     # bs_id -> BaseStation
    gamma_th: float


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def build_stations(road_length: float, rc: RadioConfig) -> tuple:
    """Evenly spaced stations of both tiers along the ring, RF ids first."""
    stations = []
    next_id = 0
    for tier, spacing, power, bw, quota, carrier, mu in (
        (RF, rc.rbs_spacing_m, rc.p_rf_dbm, rc.w_rf_hz, rc.quota_rf, rc.f_rf_hz, rc.mu_rf),
        (THZ, rc.tbs_spacing_m, rc.p_thz_dbm, rc.w_thz_hz, rc.quota_thz, rc.f_thz_hz, rc.mu_thz),
    ):
        count = max(1, int(round(road_length / spacing)))
        for k in range(count):
            stations.append(BaseStation(
                id=next_id, tier=tier, x=(k + 0.5) * (road_length / count),
                tx_power_dbm=power, bandwidth_hz=bw, quota=quota,
                carrier_hz=carrier, ho_penalty=mu,
            ))
            next_id += 1
    return tuple(stations)


def link_distance(av_x: float, bs_x: float, road_length: float,
                  lateral_offset: float) -> float:
    """Ring longitudinal distance plus lateral offset; clamped to >= 1 m."""
    dx = abs(av_x - bs_x)
    dlong = min(dx, road_length - dx)
    return max(math.hypot(dlong, lateral_offset), 1.0)


def _free_space_gain(freq_hz: float, d: float) -> float:
    lam = SPEED_OF_LIGHT / freq_hz
    return (lam / (4.0 * math.pi * d)) ** 2


def _rf_rx_power(av: VehicleState, bs: BaseStation, world: WorldState,
                 fading: float = 1.0) -> float:
    rc = world.radio
    d = link_distance(av.x, bs.x, world.road.length, rc.lateral_offset_m)
    # log-distance pathloss anchored to free space at d_ref = 1 m
    pl = _free_space_gain(bs.carrier_hz, 1.0) * d ** (-rc.alpha_rf)
    return dbm_to_watt(bs.tx_power_dbm) * fading * pl


def _link_fading(world: WorldState, av_id: int, bs_id: int) -> float:
    rng = substream(world.seed, TAG_LINK, world.t, av_id, bs_id)
    return float(rng.exponential(1.0))


def rf_sinr(av: VehicleState, bs: BaseStation, world: WorldState) -> float:
    """Linear SINR on an RF downlink; other RF stations interfere."""
    if bs.tier != RF:
        raise ValueError(f"station {bs.id} is not RF")
    rc = world.radio
    noise = dbm_to_watt(rc.noise_dbm_hz) * bs.bandwidth_hz
    signal = 0.0
    interference = 0.0
    for other in world.stations:
        if other.tier != RF:
            continue
        fading = _link_fading(world, av.id, other.id) if rc.rf_fading else 1.0
        rx = _rf_rx_power(av, other, world, fading)
        if other.id == bs.id:
            signal = rx
        else:
            interference += rx
    return signal / (noise + interference)


def _thz_path_power(av: VehicleState, bs: BaseStation, world: WorldState) -> float:
    """Transmit power through free space and absorption, before beam gains."""
    rc = world.radio
    d = link_distance(av.x, bs.x, world.road.length, rc.lateral_offset_m)
    return (dbm_to_watt(bs.tx_power_dbm) * _free_space_gain(bs.carrier_hz, d)
            * math.exp(-rc.k_absorption * d))


def thz_sinr(av: VehicleState, bs: BaseStation, world: WorldState,
             rng: np.random.Generator) -> float:
    """Linear SINR on a THz downlink.

    The serving beam pair is aligned (main lobe both ends).  Each interfering
    THz station lands in the receiver's main lobe with probability q, drawn
    once per interferer in ascending station id from the supplied per-link
    substream, and in the side lobes otherwise.
    """
    if bs.tier != THZ:
        raise ValueError(f"station {bs.id} is not THz")
    rc = world.radio
    g_main = db_to_linear(rc.g_main_dbi)
    g_side = db_to_linear(rc.g_side_dbi)
    noise = dbm_to_watt(rc.noise_dbm_hz) * bs.bandwidth_hz
    signal = _thz_path_power(av, bs, world) * g_main * g_main
    interference = 0.0
    for other in world.stations:
        if other.tier != THZ or other.id == bs.id:
            continue
        aligned = rng.random() < rc.q_align
        gain = g_main * g_main if aligned else g_side * g_side
        interference += _thz_path_power(av, other, world) * gain
    return signal / (noise + interference)


def data_rate(bandwidth_hz: float, sinr: float) -> float:
    """Shannon rate W * log2(1 + SINR), bit/s."""
    if sinr < 0:
        raise ValueError("SINR must be non-negative")
    return bandwidth_hz * math.log2(1.0 + sinr)


def link_budget(av: VehicleState, bs: BaseStation, world: WorldState) -> LinkBudget:
    """SINR and rate of one link, using the step/link-keyed substream."""
    if bs.tier == RF:
        sinr = rf_sinr(av, bs, world)
    else:
        rng = substream(world.seed, TAG_LINK, world.t, av.id, bs.id)
        sinr = thz_sinr(av, bs, world, rng)
    return LinkBudget(sinr=sinr, rate=data_rate(bs.bandwidth_hz, sinr))


def candidate_set(av: VehicleState, all_bs, world: WorldState,
                  gamma_th: float) -> tuple:
    """Top three stations by rate with SINR >= gamma_th; ties to lower id."""
    if gamma_th <= 0:
        raise ValueError("gamma_th must be positive (linear)")
    qualified = []
    for bs in sorted(all_bs, key=lambda b: b.id):
        budget = link_budget(av, bs, world)
        if budget.sinr >= gamma_th:
            qualified.append(Candidate(bs.id, budget.rate, budget.sinr))
    qualified.sort(key=lambda c: (-c.rate, c.bs_id))
    return tuple(qualified[:3])


def load_counts(candidate_sets: dict, stations) -> dict:
    """n_i = number of vehicles whose candidate set contains station i."""
    loads = {bs.id: 0 for bs in stations}
    for cands in candidate_sets.values():
        for cand in cands:
            loads[cand.bs_id] += 1
    return loads


def evaluate_network(world: WorldState) -> NetSnapshot:
    """All link budgets, candidate sets, and loads for the current step."""
    gamma_th = world.radio.gamma_th
    links = {}
    candidates = {}
    for av in sorted(world.vehicles, key=lambda v: v.id):
        budgets = {}
        for bs in sorted(world.stations, key=lambda b: b.id):
            budgets[bs.id] = link_budget(av, bs, world)
        links[av.id] = budgets
        cands = [Candidate(bs_id, b.rate, b.sinr)
                 for bs_id, b in budgets.items() if b.sinr >= gamma_th]
        cands.sort(key=lambda c: (-c.rate, c.bs_id))
        candidates[av.id] = tuple(cands[:3])
    loads = load_counts(candidates, world.stations)
    return NetSnapshot(
        links=links, candidates=candidates, loads=loads,
        stations={bs.id: bs for bs in world.stations}, gamma_th=gamma_th,
    )


def weighted_rate(rate: float, quota: int, load: int, mu: float) -> float:
    """Load- and handoff-penalized rate R / max(1, min(Q, n)) * (1 - mu).

    The max(1, .) guard covers uncontested stations (n = 0), where the
    undivided rate is the natural limit.
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if not 0.0 <= mu < 1.0:
        raise ValueError("mu must lie in [0, 1)")
    return rate / max(1, min(quota, load)) * (1.0 - mu)


def resolve_tele_action(av_id: int, a_tele: int, assoc: AssocState,
                        snapshot: NetSnapshot) -> Optional[int]:
    """Pick the serving station for one of the three association actions.

    1: max weighted rate, with each station's handoff penalty applied only
       when switching to it would be a handoff;
    2: max weighted rate at mu = 0 among vacant candidates (quota >= load),
       walking down the ranking and falling back to the overall best when
       every candidate is full;
    3: max raw rate.
    With no candidates the current station is retained while its SINR stays
    above the admission threshold, otherwise the vehicle disconnects.
    Ties break toward the lower station id.
    """
    if a_tele not in (1, 2, 3):
        raise ValueError(f"tele action must be in 1..3, got {a_tele}")
    cands = snapshot.candidates.get(av_id, ())
    if not cands:
        serving = assoc.serving_bs
        if serving is not None:
            budget = snapshot.links.get(av_id, {}).get(serving)
            if budget is not None and budget.sinr >= snapshot.gamma_th:
                return serving
        return None
    if a_tele == 3:
        return min(cands, key=lambda c: (-c.rate, c.bs_id)).bs_id
    if a_tele == 1:
        def ho_aware_wr(c):
            bs = snapshot.stations[c.bs_id]
            mu = 0.0 if c.bs_id == assoc.serving_bs else bs.ho_penalty
            return weighted_rate(c.rate, bs.quota, snapshot.loads[c.bs_id], mu)
        return min(cands, key=lambda c: (-ho_aware_wr(c), c.bs_id)).bs_id
    # a_tele == 2: vacancy-first weighted rate with mu = 0
    def plain_wr(c):
        bs = snapshot.stations[c.bs_id]
        return weighted_rate(c.rate, bs.quota, snapshot.loads[c.bs_id], 0.0)
    ranked = sorted(cands, key=lambda c: (-plain_wr(c), c.bs_id))
    for cand in ranked:
        bs = snapshot.stations[cand.bs_id]
        if bs.quota >= snapshot.loads[cand.bs_id]:
            return cand.bs_id
    return ranked[0].bs_id


def update_handoff(assoc: AssocState, new_bs: Optional[int],
                   candidates: tuple = None) -> AssocState:
    """Advance the per-episode handoff bookkeeping after a tele decision.

    A handoff is a station-to-station change; the initial attach and a
    disconnect are not counted.  xi is handoffs divided by elapsed steps
    beyond the first.
    """
    steps = assoc.episode_steps + 1
    ho = assoc.ho_count
    if assoc.serving_bs is not None and new_bs is not None and new_bs != assoc.serving_bs:
        ho += 1
    xi = ho / max(1, steps - 1)
    return AssocState(
        serving_bs=new_bs,
        candidates=assoc.candidates if candidates is None else candidates,
        ho_count=ho,
        episode_steps=steps,
        xi=xi,
    )
