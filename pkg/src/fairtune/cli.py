"""Command-line entry point: ``fairtune <command> --spec FILE [options]``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .errors import ConfigError, FairtuneError
from .experiment import load_spec

STAGES = {
    "prepare": lambda spec, workers: pipeline.prepare(spec),
    "train-base": lambda spec, workers: pipeline.train_base(spec),
    "mitigate": lambda spec, workers: pipeline.mitigate_all(spec, workers),
    "bench": lambda spec, workers: pipeline.bench_stage(spec),
}


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairtune", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def spec_command(name, help_text, spec_flag="--spec"):
        p = sub.add_parser(name, help=help_text)
        p.add_argument(spec_flag, required=True, dest="spec")
        p.add_argument("--out", help="override the spec's output_dir")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed-override", type=_seed_list, help="e.g. 0,1,2")
        p.add_argument("--task", help="override the task config file")
        p.add_argument("--model", choices=("LR", "SVM", "NN"))
        return p

    for name in STAGES:
        spec_command(name, f"run the {name} stage")
    spec_command("run", "run every stage end to end")
    spec_command("ablate", "run a reward-metric grid", spec_flag="--grid")
    rep = sub.add_parser("report", help="summarise an output directory")
    rep.add_argument("--out", required=True, help="artifacts directory")
    return parser


def _load(args):
    spec = load_spec(args.spec)
    return spec.with_overrides(seeds=args.seed_override, task_path=args.task,
                               model=args.model, out=args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        if stage == "report":
            sys.stdout.write(pipeline.report(args.out))
        elif stage == "ablate":
            sys.stdout.write(pipeline.ablate(args.spec, out=args.out, workers=args.workers,
                                             seeds=args.seed_override, task=args.task,
                                             model=args.model))
        else:
            stage = "config"
            spec = _load(args)
            stage = args.command
            if stage == "run":
                table = pipeline.run(spec, workers=args.workers)
                print(f"win-win {100 * table['mean'][pipeline.bench.Region.WIN_WIN]:.2f}% "
                      f"-> {spec.output_dir}")
            else:
                STAGES[stage](spec, args.workers)
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FairtuneError, OSError, ValueError) as exc:
        kind = "configuration error" if isinstance(exc, ConfigError) else "error"
        print(f"{kind}: stage {stage}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
