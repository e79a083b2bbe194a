"""Command-line entry point: train, eval, bench, sim, sram, fixture.

Exit codes: 0 success, 2 usage or input error, 3 data-integrity error,
4 training divergence.
"""

import argparse
import logging
import sys

import numpy as np

from . import data, resource_model, robot
from .codec import TargetCodec
from .errors import IntegrityError, MlpError, TrainingDiverged
from .mlp import Dataset, TrainConfig, evaluate, init_weights, train
from .weights import load_weights, save_weights

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INTEGRITY = 3
EXIT_DIVERGED = 4

BENCH_MODULES = {
    "ffm1": "FFM-1",
    "ffm2": "FFM-2",
    "em": "EM",
    "bpm1": "BPM-1",
    "bpm2": "BPM-2",
}

logger = logging.getLogger("mcumlp")


def _widths(text):
    try:
        widths = tuple(int(w) for w in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"widths must be comma-separated integers: {text!r}")
    if len(widths) < 2 or min(widths) < 1:
        raise argparse.ArgumentTypeError(f"need at least two positive widths: {text!r}")
    return widths


def _h1_range(text):
    """``start:stop:step`` (stop inclusive) or a comma list."""
    try:
        if ":" in text:
            start, stop, step = (int(v) for v in text.split(":"))
            values = list(range(start, stop + 1, step))
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad H1 range {text!r}")
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"H1 values must be >= 1: {text!r}")
    return values


def _load_dataset(args):
    if args.fixture:
        ds = data.load_fixture(args.fixture)
    else:
        ds = data.load_dataset_csv(args.data)
    data.lint_dataset(ds)
    return ds


def _codec_for(targets):
    # Sigmoid outputs live in (0, 1); anything else goes through a codec.
    if float(targets.min()) >= 0.0 and float(targets.max()) <= 1.0:
        return None
    return TargetCodec.fit(targets)


def _encoded(ds, codec):
    if codec is None:
        return ds
    return Dataset(ds.inputs, codec.encode(ds.targets), ds.names)


def _write_text(path, text):
    data.atomic_write(path, text.encode("utf-8"))


def cmd_train(args):
    ds = _load_dataset(args)
    codec = _codec_for(ds.targets)
    enc = _encoded(ds, codec)
    config = TrainConfig(
        eta=args.eta,
        alpha=args.alpha,
        batch_size=args.batch or enc.n_samples,
        max_epochs=args.epochs,
        mode=args.mode,
        seed=args.seed,
        mse_stop=args.mse_stop,
    )
    net = init_weights(args.widths, args.seed)
    net, trace = train(net, enc, config)
    _, final = evaluate(net, enc)
    save_weights(args.out, net, codec)
    if args.trace:
        rows = [(epoch, value) for epoch, value in enumerate(trace, start=1)]
        _write_text(args.trace, data.rows_to_csv(("epoch", "mse"), rows))
    print(f"epochs: {len(trace)}")
    print(f"final MSE: {final:.6g}")
    return EXIT_OK


def cmd_eval(args):
    net, codec = load_weights(args.weights)
    ds = _load_dataset(args)
    enc = _encoded(ds, codec)
    outputs, value = evaluate(net, enc)
    decoded = outputs.astype(np.float64) if codec is None else codec.decode(outputs)
    err = (enc.targets.astype(np.float64) - outputs) ** 2
    per_sample = 0.5 * err.sum(axis=0)
    header = ["sample"]
    header += [f"y{i + 1}" for i in range(ds.n_outputs)]
    header += [f"d{i + 1}" for i in range(ds.n_outputs)]
    header += ["error"]
    rows = []
    for s in range(ds.n_samples):
        rows.append(
            (s + 1, *map(float, decoded[:, s]), *map(float, ds.targets[:, s]),
             float(per_sample[s]))
        )
    text = data.rows_to_csv(header, rows)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    print(f"MSE: {value:.6g}")
    return EXIT_OK


def cmd_bench(args):
    modules = list(resource_model.MODULES) if args.module == "all" else [
        BENCH_MODULES[args.module]
    ]
    if args.paper_fixture:
        samples = [
            s for s in resource_model.load_paper_timing_fixture() if s.module in modules
        ]
    else:
        samples = []
        for module in modules:
            samples += resource_model.benchmark_sweep(module, args.h1, reps=args.reps)
    if args.out:
        _write_text(args.out, resource_model.timing_csv(samples))
    report, notes = resource_model.format_fit_report(
        resource_model.fit_report(samples, modules, published=True)
    )
    if args.report:
        _write_text(args.report, report)
    sys.stdout.write(report)
    for note in notes:
        print(f"note: {note}")
    return EXIT_OK


def cmd_sim(args):
    net, codec = load_weights(args.weights)
    world = robot.load_map(args.map)
    result = robot.run_episode(world, net, codec, args.duration, args.dt)
    if args.out:
        _write_text(args.out, result.to_csv())
    print(f"map: {world.name}")
    print(f"steps: {len(result.trajectory)}")
    print(f"collisions: {result.collisions}")
    print(f"path length: {result.path_length():.4f} m")
    print(f"net displacement: {result.net_displacement():.4f} m")
    return EXIT_OK


def cmd_sram(args):
    estimate = resource_model.estimate_sram(args.widths, args.batch, args.budget)
    print(estimate.report())
    return EXIT_OK if estimate.fits else 1


def cmd_fixture(args):
    ds = data.load_fixture(args.name)
    for msg in data.lint_dataset(ds):
        print(f"warning: {msg}")
    text = data.dataset_to_csv(ds)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _add_dataset_args(p, required=True):
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--fixture", choices=data.FIXTURES, help="embedded dataset")
    src.add_argument("--data", help="dataset CSV with header in1..inP,out1..outM")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcumlp",
        description="Matrix-form MLP with backpropagation, resource model and robot sim.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and write a weights file")
    _add_dataset_args(p)
    p.add_argument("--widths", type=_widths, required=True, help="e.g. 2,2,1")
    p.add_argument("--eta", type=float, default=0.9)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--batch", type=int, default=None, help="default: whole dataset")
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mse-stop", type=float, default=None)
    p.add_argument("--mode", choices=("batch", "online"), default="batch")
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--trace", help="epoch,mse CSV to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="forward a dataset through saved weights")
    p.add_argument("weights")
    _add_dataset_args(p)
    p.add_argument("--out", help="per-sample CSV (default: stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time pipeline stages and fit the linear law")
    p.add_argument("--module", choices=(*BENCH_MODULES, "all"), default="all")
    p.add_argument("--h1", type=_h1_range, default=list(range(2, 39, 2)),
                   help="start:stop:step (inclusive) or comma list")
    p.add_argument("--reps", type=int, default=61)
    p.add_argument("--paper-fixture", action="store_true",
                   help="fit the embedded reference timing table instead of timing live")
    p.add_argument("--out", help="timing samples CSV")
    p.add_argument("--report", help="fit report CSV")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sim", help="run a robot episode with saved weights")
    p.add_argument("weights")
    p.add_argument("--map", default="cluttered",
                   help=f"built-in map ({', '.join(robot.BUILTIN_MAPS)}) or map file")
    p.add_argument("--duration", type=float, default=60.0, help="seconds")
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--out", help="trajectory CSV")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("sram", help="itemized working-memory estimate")
    p.add_argument("--widths", type=_widths, required=True)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--budget", type=int, default=resource_model.SRAM_BUDGET)
    p.set_defaults(func=cmd_sram)

    p = sub.add_parser("fixture", help="export an embedded dataset as CSV")
    p.add_argument("name", choices=data.FIXTURES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (MlpError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
