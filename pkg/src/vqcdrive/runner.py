"""Experiment runs: seeded training, greedy evaluation, parameter sweeps.

Every run directory receives the resolved config echo, a metrics CSV, the
final checkpoint, and a small run_meta.json.  All CSV content is a pure
function of (resolved config, seed), so re-running reproduces the files byte
for byte; wall-clock timings therefore live in a separate timing.jsonl that
is excluded from that contract.
"""

import csv
import json
import os
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import learner, neural, quantum
from .config import TrainConfig, write_echo
from .env import HighwayNetEnv
from .seeding import TAG_ENV, TAG_INIT, fold64, substream

OUTPUT_ROOT_ENV = "VQCDRIVE_OUT"

METRICS_HEADER = ("episode", "steps", "sum_r_tran", "sum_r_tele", "sum_total",
                  "collided", "ho_count", "epsilon")
EVAL_HEADER = METRICS_HEADER
AGGREGATE_HEADER = ("parameter", "value", "repetitions", "failed",
                    "mean_sum_r_tran", "std_sum_r_tran",
                    "mean_sum_r_tele", "std_sum_r_tele",
                    "mean_sum_total", "std_sum_total")

EPISODE_LOG_HEADER = ("t", "flat_action", "r_tran", "r_tele", "total",
                      "rate_bps", "xi", "delta", "lane", "v_ego")
NET_TRACE_HEADER = ("t", "av_id", "serving_bs", "tier", "sinr_db", "rate_bps",
                    "n_serving", "ho_count", "xi")
TRAFFIC_TRACE_HEADER = ("t", "id", "lane", "x", "v", "a", "is_ego")


def resolve_out_dir(cfg: TrainConfig, cli_out=None, default_name="run") -> Path:
    """CLI flag beats config; relative paths resolve under $VQCDRIVE_OUT."""
    out = cli_out or cfg.output_dir or default_name
    out = Path(out)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def build_env(cfg: TrainConfig) -> HighwayNetEnv:
    env_cfg = replace(cfg.env, seed=cfg.seed)
    return HighwayNetEnv(env_cfg, road=cfg.road, radio=cfg.radio, idm=cfg.idm)


def build_qfunction(cfg: TrainConfig, seed: int) -> learner.QFunction:
    init_seed = fold64(seed, TAG_INIT)
    if cfg.backend == "vqc":
        params = quantum.init_params(substream(init_seed),
                                     scheme=cfg.circuit_init,
                                     scale=cfg.circuit_init_scale)
        return learner.VqcQ(params)
    return learner.NeuralQ(neural.Mlp(rng=substream(init_seed)))


def save_checkpoint(q: learner.QFunction, path) -> None:
    if isinstance(q, learner.VqcQ):
        quantum.save_vqc_params(q.params, path)
    else:
        neural.save_mlp(q.net, path)


def load_checkpoint(backend: str, path) -> learner.QFunction:
    if backend == "vqc":
        return learner.VqcQ(quantum.load_vqc_params(path))
    return learner.NeuralQ(neural.load_mlp(path))


def _metric_row(m: learner.EpisodeMetrics) -> tuple:
    return (m.episode, m.steps, repr(m.sum_r_tran), repr(m.sum_r_tele),
            repr(m.sum_total), m.collided, m.ho_count, repr(m.epsilon))


def write_metrics_csv(path, metrics) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for m in metrics:
            writer.writerow(_metric_row(m))


def write_timing(path, metrics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in metrics:
            fh.write(json.dumps({"episode": m.episode,
                                 "wallclock_ms": m.wallclock_ms}))
            fh.write("\n")


def _write_meta(path, cfg: TrainConfig, initial_features) -> None:
    meta = {
        "backend": cfg.backend,
        "seed": cfg.seed,
        "episodes": cfg.episodes,
        "initial_observation": [repr(float(f)) for f in initial_features],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


class TracingEnv:
    """Environment wrapper that mirrors steps into per-episode trace rows."""

    def __init__(self, env: HighwayNetEnv):
        self.env = env
        self.episode_rows = []
        self.net_rows = []
        self.traffic_rows = []
        self._episode = -1

    def reset(self, seed=None):
        self._episode += 1
        obs = self.env.reset(seed)
        self._record_world(0)
        return obs

    def step(self, action):
        obs, rewards, done, info = self.env.step(action)
        t = info["t"]
        self.episode_rows.append((
            self._episode, t, action, repr(rewards.r_tran), repr(rewards.r_tele),
            repr(rewards.total), repr(info["rate"]), repr(info["xi"]),
            info["delta"], info["lane"], repr(info["v_ego"]),
        ))
        self._record_world(t)
        return obs, rewards, done, info

    def _record_world(self, t):
        world = self.env.world
        snapshot = self.env._last_snapshot
        for veh in sorted(world.vehicles, key=lambda v: v.id):
            assoc = world.assoc[veh.id]
            serving = assoc.serving_bs
            if serving is not None:
                budget = snapshot.links[veh.id][serving]
                tier = snapshot.stations[serving].tier
                sinr_db = 10.0 * np.log10(budget.sinr) if budget.sinr > 0 else float("-inf")
                self.net_rows.append((
                    self._episode, t, veh.id, serving, tier, repr(float(sinr_db)),
                    repr(budget.rate), snapshot.loads[serving], assoc.ho_count,
                    repr(assoc.xi),
                ))
            else:
                self.net_rows.append((
                    self._episode, t, veh.id, "", "", "", repr(0.0), 0,
                    assoc.ho_count, repr(assoc.xi),
                ))
            self.traffic_rows.append((
                self._episode, t, veh.id, veh.lane, repr(veh.x), repr(veh.v),
                repr(veh.a), int(veh.is_ego),
            ))

    def write(self, out_dir: Path) -> None:
        for name, header, rows in (
            ("episode_log.csv", ("episode",) + EPISODE_LOG_HEADER, self.episode_rows),
            ("net_trace.csv", ("episode",) + NET_TRACE_HEADER, self.net_rows),
            ("traffic_trace.csv", ("episode",) + TRAFFIC_TRACE_HEADER, self.traffic_rows),
        ):
            with open(out_dir / name, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)


def run_train(cfg: TrainConfig, out_dir) -> dict:
    """Train one backend; returns paths and the in-memory metrics."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_echo(cfg, out_dir / "config_echo.json")

    env = build_env(cfg)
    initial_obs = env.reset(fold64(cfg.seed, TAG_ENV, 0))
    _write_meta(out_dir / "run_meta.json", cfg, initial_obs.features)

    traced = TracingEnv(env) if cfg.trace else env
    online = build_qfunction(cfg, cfg.seed)
    target = build_qfunction(cfg, cfg.seed)
    metrics = learner.train(traced, online, target, cfg.agent,
                            cfg.episodes, cfg.seed)

    write_metrics_csv(out_dir / "metrics.csv", metrics)
    write_timing(out_dir / "timing.jsonl", metrics)
    save_checkpoint(online, out_dir / "checkpoint.json")
    if cfg.trace:
        traced.write(out_dir)
    return {"out_dir": out_dir, "metrics": metrics,
            "metrics_csv": out_dir / "metrics.csv",
            "checkpoint": out_dir / "checkpoint.json"}


def run_eval(cfg: TrainConfig, checkpoint_path, episodes: int, out_dir) -> dict:
    """Greedy evaluation of a checkpoint; parameters are never updated."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_echo(cfg, out_dir / "config_echo.json")
    q = load_checkpoint(cfg.backend, checkpoint_path)

    env = build_env(cfg)
    initial_obs = env.reset(fold64(cfg.seed, TAG_ENV, 0))
    _write_meta(out_dir / "run_meta.json", cfg, initial_obs.features)

    traced = TracingEnv(env) if cfg.trace else env
    metrics = learner.evaluate(traced, q, episodes, cfg.seed)
    write_metrics_csv(out_dir / "eval.csv", metrics)
    write_timing(out_dir / "timing.jsonl", metrics)
    if cfg.trace:
        traced.write(out_dir)
    return {"out_dir": out_dir, "metrics": metrics,
            "eval_csv": out_dir / "eval.csv"}


def _sweep_child_config(cfg: TrainConfig, value, child_seed: int,
                        out_dir) -> TrainConfig:
    if cfg.sweep.parameter == "n_background":
        env = replace(cfg.env, n_background=int(value))
    else:
        env = replace(cfg.env, desired_velocity=float(value))
    return replace(cfg, env=env, seed=child_seed, output_dir=str(out_dir),
                   sweep=None)


def run_sweep(cfg: TrainConfig, out_dir) -> dict:
    """Train across swept values; aggregate mean/std of per-episode sums.

    Child seeds derive as fold64(base_seed, value_index, rep_index), so
    extending the value list never perturbs existing runs.  Per-run raw CSVs
    are retained under runs/; failures are recorded and skipped in the
    aggregate.
    """
    if cfg.sweep is None:
        raise ValueError("configuration has no sweep section")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_echo(cfg, out_dir / "config_echo.json")
    spec = cfg.sweep
    rows = []
    failures = []
    for vi, value in enumerate(spec.values):
        comp_sums = {"sum_r_tran": [], "sum_r_tele": [], "sum_total": []}
        failed = 0
        for rep in range(spec.repetitions):
            child_seed = fold64(cfg.seed, vi, rep)
            run_dir = out_dir / "runs" / f"{spec.parameter}={value}_rep{rep}"
            child = _sweep_child_config(cfg, value, child_seed, run_dir)
            try:
                result = run_train(child, run_dir)
            except Exception as exc:  # record and continue with later runs
                failed += 1
                failures.append({"value": value, "rep": rep, "error": str(exc)})
                continue
            metrics = result["metrics"]
            if metrics:
                comp_sums["sum_r_tran"].append(np.mean([m.sum_r_tran for m in metrics]))
                comp_sums["sum_r_tele"].append(np.mean([m.sum_r_tele for m in metrics]))
                comp_sums["sum_total"].append(np.mean([m.sum_total for m in metrics]))
        row = [spec.parameter, value, spec.repetitions, failed]
        for comp in ("sum_r_tran", "sum_r_tele", "sum_total"):
            vals = comp_sums[comp]
            if vals:
                row.append(repr(float(np.mean(vals))))
                row.append(repr(float(np.std(vals))))
            else:
                row.append("")
                row.append("")
        rows.append(tuple(row))
    agg_path = out_dir / "sweep_aggregate.csv"
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(AGGREGATE_HEADER)
        writer.writerows(rows)
    if failures:
        with open(out_dir / "sweep_failures.json", "w", encoding="utf-8") as fh:
            json.dump(failures, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return {"out_dir": out_dir, "aggregate_csv": agg_path, "rows": rows,
            "failures": failures}
