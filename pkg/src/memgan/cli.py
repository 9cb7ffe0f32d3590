"""Command line entry point.

    memgan train --mode hw-d2d --noise true --epochs 2 --data DIR --out runs/d2d
    memgan classifier train --data DIR --out clf.npz
    memgan classifier eval --model clf.npz --data DIR
    memgan report area
    memgan compare --data DIR --out runs/compare

Exit codes: 0 success, 1 usage error, 2 data or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from memgan import harness
from memgan.config import ConfigError, load_config
from memgan.crossbar import area_report
from memgan.gan import MODES
from memgan.mnist import IDXFormatError, load_mnist

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="memgan", description="GAN training on simulated passive RRAM crossbars")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--data", help="directory holding the four MNIST IDX files "
                                       "(default: $MEMGAN_DATA_DIR)")
        sp.add_argument("--config", help="TOML run configuration")
        sp.add_argument("--out", default="runs", help="output directory")
        sp.add_argument("--seed", type=int, help="training seed")
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--digit", type=int)
        sp.add_argument("--classifier", help="cached classifier .npz (trained if missing)")
        sp.add_argument("--no-eval", action="store_true", help="skip per-batch accuracy")

    t = sub.add_parser("train", help="one training run")
    common(t)
    t.add_argument("--mode", choices=MODES)
    t.add_argument("--noise", choices=("pseudo", "true"))

    c = sub.add_parser("compare", help="the four reference configurations, one combined CSV")
    common(c)

    k = sub.add_parser("classifier", help="train or evaluate the judging classifier")
    k.add_argument("action", choices=("train", "eval"))
    k.add_argument("--data")
    k.add_argument("--model", default="classifier.npz")
    k.add_argument("--out", help="where to save (train); defaults to --model")
    k.add_argument("--epochs", type=int, default=20)
    k.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("report", help="static reports")
    r.add_argument("what", choices=("area",))
    return p


def _run_config(args):
    cfg = load_config(args.config)
    train = cfg.train
    if args.seed is not None:
        train = replace(train, seed=args.seed)
    if args.epochs is not None:
        if args.epochs < 1:
            raise ConfigError("--epochs must be >= 1")
        train = replace(train, epochs=args.epochs)
    cfg = replace(cfg, train=train)
    if args.digit is not None:
        cfg = replace(cfg, digit=args.digit)
    mode = getattr(args, "mode", None)
    noise = getattr(args, "noise", None)
    if mode is not None or noise is not None:
        cfg = cfg.with_mode(mode or cfg.train.mode, noise)
    return cfg


def _classifier(args):
    if args.no_eval:
        return None
    path = args.classifier or Path(args.out) / "classifier.npz"
    return harness.ensure_classifier(path, args.data)


def _summary(res) -> str:
    m = res.metrics
    return (f"{res.mode:9s} {res.noise:6s} batches={len(m):3d} "
            f"final_acc={m.final_accuracy:6.2f}% pulses={m.total_pulses} "
            f"energy={m.total_energy_j * 1e6:.2f} uJ")


def cmd_train(args) -> int:
    cfg = _run_config(args)
    train = load_mnist(args.data, "train")
    res = harness.run_experiment(cfg, train, _classifier(args), args.out)
    print(_summary(res))
    print(f"wrote {Path(args.out) / 'metrics.csv'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _run_config(args)
    train = load_mnist(args.data, "train")
    results = harness.compare(cfg, train, _classifier(args), args.out)
    for res in results:
        print(_summary(res))
    acc = {(r.mode, r.noise): r.metrics.final_accuracy for r in results}
    if ("hw-ideal", "true") in acc and ("hw-ideal", "pseudo") in acc:
        t, p = acc[("hw-ideal", "true")], acc[("hw-ideal", "pseudo")]
        order = "true > pseudo" if t > p else "true <= pseudo"
        print(f"hw-ideal final accuracy: true {t:.2f}% vs pseudo {p:.2f}% ({order})")
    print(f"wrote {Path(args.out) / 'compare.csv'}")
    return EXIT_OK


def cmd_classifier(args) -> int:
    if args.action == "train":
        out = Path(args.out or args.model)
        if out.exists():
            out.unlink()
        clf = harness.ensure_classifier(out, args.data, epochs=args.epochs, seed=args.seed)
        print(f"test accuracy {clf.test_accuracy:.2f}% -> {out}")
    else:
        from memgan.classifier import ClassifierModel

        try:
            clf = ClassifierModel.load(args.model)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read classifier {args.model}") from exc
        acc = clf.accuracy(load_mnist(args.data, "test"))
        print(f"test accuracy {acc:.2f}%")
    return EXIT_OK


def cmd_report(args) -> int:
    a = area_report()
    print(f"cell area   {a.cell_um2:g} um^2")
    print(f"tile area   {a.tile_um2:g} um^2 (64x64)")
    print(f"tiles       {a.tiles}")
    print(f"total area  {a.total_um2:.2f} um^2")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "compare": cmd_compare, "classifier": cmd_classifier, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, IDXFormatError, ConfigError, ValueError) as exc:
        print(f"memgan: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
