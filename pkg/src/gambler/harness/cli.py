"""Command line entry point: ``gambler {train,sweep,verify-theory,report}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..exceptions import GamblerError
from ..losses import LossKind
from ..model import ACTIVATIONS, OPTIMIZERS
from .config import STOPPING_KINDS, RunConfig
from .io import atomic_write_text
from .report import run_report
from .runner import run_sweep, run_train
from .verify import run_verify_theory


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="start from this config.json; flags override it")
    g = p.add_argument_group("data")
    g.add_argument("--dataset", choices=("blobs", "mnist"))
    g.add_argument("--n-train", type=int, help="training rows, validation included")
    g.add_argument("--n-test", type=int)
    g.add_argument("--num-classes", type=int)
    g.add_argument("--dim", type=int)
    g.add_argument("--separation", type=float)
    g.add_argument("--mnist-dir", help="directory holding the IDX files (default $GMBL_MNIST_DIR or data/mnist)")
    g.add_argument("--val-fraction", type=float)
    g = p.add_argument_group("noise")
    g.add_argument("--noise-kind", choices=("symmetric", "pairflip"))
    g.add_argument("--noise-rate", type=float)
    g.add_argument("--noise-seed", type=int, help="defaults to --seed")
    g = p.add_argument_group("loss")
    g.add_argument("--loss", choices=[k.value for k in LossKind])
    g.add_argument("--lambda", dest="lam", type=float, help="fixed payoff (default m)")
    g.add_argument("--q", type=float)
    g.add_argument("--warmup", type=int, help="epochs trained at lambda = m")
    g.add_argument("--mask-rejection", action=argparse.BooleanOptionalAction, default=None)
    g = p.add_argument_group("model and optimizer")
    g.add_argument("--hidden", type=_ints, help="hidden widths, e.g. 256,128")
    g.add_argument("--activation", choices=ACTIVATIONS)
    g.add_argument("--optimizer", choices=OPTIMIZERS)
    g.add_argument("--lr", type=float)
    g.add_argument("--momentum", type=float)
    g.add_argument("--batch-size", type=int)
    g = p.add_argument_group("schedule")
    g.add_argument("--epochs", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--stopping", choices=STOPPING_KINDS)
    g.add_argument("--clean-rate", type=float)
    g.add_argument("--lambda-ref", type=float, help="payoff used for the plateau when the loss is scheduled")
    g.add_argument("--band", type=float)
    g.add_argument("--patience", type=int)
    g.add_argument("--run-to-completion", action="store_true",
                   help="record the stopping decision but keep training for all epochs")
    g.add_argument("--overshoot-retries", type=int)
    p.add_argument("--out", type=Path)


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    seed = args.seed if args.seed is not None else cfg.seed
    noise_seed = args.noise_seed if args.noise_seed is not None else (args.seed if args.config is None else None)
    d = cfg.to_dict()
    d["dataset"].update({k: v for k, v in {
        "name": args.dataset, "n_train": args.n_train, "n_test": args.n_test,
        "num_classes": args.num_classes, "dim": args.dim, "separation": args.separation,
        "mnist_dir": args.mnist_dir, "val_fraction": args.val_fraction,
    }.items() if v is not None})
    if args.dataset == "mnist" and args.num_classes is None:
        d["dataset"]["num_classes"] = 10
    d["noise"].update({k: v for k, v in {"kind": args.noise_kind, "rate": args.noise_rate,
                                          "seed": noise_seed}.items() if v is not None})
    d["loss"].update({k: v for k, v in {"kind": args.loss, "lam": args.lam, "q": args.q,
                                         "warmup_epochs": args.warmup,
                                         "mask_rejection": args.mask_rejection}.items() if v is not None})
    d["model"].update({k: v for k, v in {"hidden": args.hidden, "activation": args.activation}.items()
                       if v is not None})
    d["optimizer"].update({k: v for k, v in {"kind": args.optimizer, "learning_rate": args.lr,
                                              "momentum": args.momentum,
                                              "batch_size": args.batch_size}.items() if v is not None})
    d["stopping"].update({k: v for k, v in {
        "kind": args.stopping, "clean_rate": args.clean_rate, "lambda_ref": args.lambda_ref,
        "band": args.band, "patience": args.patience, "overshoot_retries": args.overshoot_retries,
        "halt": False if args.run_to_completion else None,
    }.items() if v is not None})
    if args.epochs is not None:
        d["epochs"] = args.epochs
    d["seed"] = seed
    if args.out is not None:
        d["out_dir"] = str(args.out)
    return RunConfig.from_dict(d)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gambler", description="Gambler's-loss training under label noise.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train one configuration")
    _add_run_flags(p)
    p = sub.add_parser("sweep", help="train one run per payoff value")
    _add_run_flags(p)
    p.add_argument("--lambdas", type=_floats, required=True, help="comma-separated payoff grid")
    p = sub.add_parser("verify-theory", help="check closed forms against numerical optima")
    p.add_argument("--out", type=Path, help="write the JSON report here as well as to stdout")
    p = sub.add_parser("report", help="histograms, stages and a text summary for a run")
    p.add_argument("run_dir", type=Path)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "train":
            print(run_train(build_config(args)))
        elif args.command == "sweep":
            print(run_sweep(build_config(args), args.lambdas))
        elif args.command == "verify-theory":
            report = run_verify_theory()
            text = report.to_json()
            if args.out is not None:
                atomic_write_text(args.out, text + "\n")
            print(text)
            if not report.passed:
                print(f"failed checks: {', '.join(report.failed())}", file=sys.stderr)
                return 1
        else:
            print(run_report(args.run_dir))
    except (GamblerError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
