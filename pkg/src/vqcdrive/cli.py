"""Command-line entry points: train, eval, sweep, validate-config."""

import argparse
import json
import sys

from .config import config_from_dict, config_to_dict, load_raw
from .runner import resolve_out_dir, run_eval, run_sweep, run_train


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--backend", choices=("vqc", "neural"),
                        help="override the Q-function backend")
    parser.add_argument("--episodes", type=int, help="override the episode count")
    parser.add_argument("--out", help="output directory (root: $VQCDRIVE_OUT)")


def _resolve(args):
    doc = load_raw(args.config) if args.config else {}
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.backend is not None:
        doc["backend"] = args.backend
    if args.episodes is not None:
        doc["episodes"] = args.episodes
    return config_from_dict(doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqcdrive",
        description="Quantum-circuit vs neural Q-learning on a joint "
                    "highway-driving / RF-THz cell-selection environment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one backend and write metrics")
    _add_common(p_train)

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint JSON path")

    p_sweep = sub.add_parser("sweep", help="run the config's sweep section")
    _add_common(p_sweep)

    p_val = sub.add_parser("validate-config", help="resolve and print a config")
    p_val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            cfg = config_from_dict(load_raw(args.config))
            json.dump(config_to_dict(cfg), sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
            return 0
        cfg = _resolve(args)
        if args.command == "train":
            out = resolve_out_dir(cfg, args.out, f"train-{cfg.backend}-{cfg.seed}")
            result = run_train(cfg, out)
            print(f"wrote {result['metrics_csv']}")
        elif args.command == "eval":
            out = resolve_out_dir(cfg, args.out, f"eval-{cfg.backend}-{cfg.seed}")
            result = run_eval(cfg, args.checkpoint, cfg.episodes, out)
            print(f"wrote {result['eval_csv']}")
        elif args.command == "sweep":
            out = resolve_out_dir(cfg, args.out, f"sweep-{cfg.backend}-{cfg.seed}")
            result = run_sweep(cfg, out)
            print(f"wrote {result['aggregate_csv']}")
            if result["failures"]:
                print(f"{len(result['failures'])} run(s) failed; see sweep_failures.json",
                      file=sys.stderr)
                return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
