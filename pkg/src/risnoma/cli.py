"""Command line front end: ``risnoma run | eval | curves``."""

from __future__ import annotations

import argparse
import sys

from risnoma import experiments, training


def _parse_seeds(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip() != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risnoma",
        description="RIS-aided downlink NOMA training experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one scenario variant over seeds")
    run.add_argument("--config", required=True, help="scenario/train config file")
    run.add_argument("--variant", default="full",
                     choices=sorted(experiments.VARIANTS))
    run.add_argument("--seeds", default="0", type=_parse_seeds,
                     help="comma-separated seed list")
    run.add_argument("--out", default="runs", help="output directory")
    run.add_argument("--workers", type=int, default=None,
                     help="parallel seed processes (default: one per core)")

    ev = sub.add_parser("eval", help="evaluate a checkpointed run")
    ev.add_argument("--checkpoint", required=True,
                    help="run directory (contains config.cfg and agent_*/)")
    ev.add_argument("--episodes", type=int, default=5)
    ev.add_argument("--seed", type=int, default=0)

    cur = sub.add_parser("curves", help="export moving-average reward/EE curves")
    cur.add_argument("--in", dest="in_dir", required=True,
                     help="directory containing seed runs")
    cur.add_argument("--window", type=int, default=100)
    cur.add_argument("--out", default=None, help="output CSV path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        summary = experiments.run_experiment(
            args.config, args.variant, seeds=args.seeds,
            out_dir=args.out, workers=args.workers,
        )
        for row in summary["rows"]:
            print(f"{row['variant']} seed {row['seed']}: "
                  f"final EE {row['final_ee']:.4f} (first {row['first_ee']:.4f})")
        print(f"mean final EE {summary['mean_final_ee']:.4f} "
              f"+- {summary['std_final_ee']:.4f}")
    elif args.command == "eval":
        mean, std, per_episode = training.evaluate(
            args.checkpoint, n_episodes=args.episodes, seed=args.seed
        )
        print(f"EE per episode: {[round(e, 4) for e in per_episode]}")
        print(f"mean EE {mean:.4f} +- {std:.4f}")
    elif args.command == "curves":
        path = experiments.emit_curves(args.in_dir, args.window, args.out)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
