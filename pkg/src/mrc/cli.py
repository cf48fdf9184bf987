"""Command-line front end.

Subcommands: design-filters, train, infer, eval, bench, compare.
Global flags: --config PATH, --seed N, --threads N, --mode float|quant,
--no-timing.  Config files are ``key = value`` lines with ``#``
comments; unknown keys are rejected.  Every command is deterministic
given --seed and prints machine-readable ``key=value`` trailer lines.

Exit codes: 0 success, 2 I/O or format error, 3 data or semantic
error, 64 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import fileio, filterbank, pipeline
from .linalg import ConvergenceError
from .model import DataError
from .pipeline import TrainConfig

__all__ = ["main"]

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_DATA = 3
EXIT_USAGE = 64

_CONFIG_TYPES = {f.name: type(f.default) for f in dataclasses.fields(TrainConfig)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(path) -> TrainConfig:
    """Parse a `key = value` config file; unknown keys are rejected."""
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise fileio.FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = (p.strip() for p in line.partition("="))
            if key not in _CONFIG_TYPES:
                raise fileio.FormatError(f"{path}:{lineno}: unknown key {key!r}")
            typ = _CONFIG_TYPES[key]
            try:
                values[key] = typ(val)
            except ValueError:
                raise fileio.FormatError(
                    f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return TrainConfig(**values)


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="deterministic seed")
    p.add_argument("--threads", type=int, default=1, help="concurrency width")
    p.add_argument("--mode", choices=("float", "quant"), default="float")
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock output (byte-stable stdout)")


def _get_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def build_parser() -> _Parser:
    p = _Parser(prog="mrc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("design-filters", help="print filter tables")
    _common_flags(sp)
    sp.set_defaults(fn=cmd_design_filters)

    sp = sub.add_parser("train", help="train a model on a dataset file")
    sp.add_argument("dataset")
    sp.add_argument("--model-out", default="model.mrcm", metavar="PATH")
    _common_flags(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("infer", help="classify every trial in a dataset")
    sp.add_argument("dataset")
    sp.add_argument("model")
    _common_flags(sp)
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("eval", help="accuracy and confusion on a labeled dataset")
    sp.add_argument("dataset")
    sp.add_argument("model")
    _common_flags(sp)
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("bench", help="per-stage op counts and timings")
    sp.add_argument("model")
    sp.add_argument("--repetitions", type=int, default=3)
    sp.add_argument("--samples", type=int, default=None,
                    help="generated trial length (default: model window)")
    _common_flags(sp)
    # the op accounting of interest is the fixed-point implementation
    sp.set_defaults(fn=cmd_bench, mode="quant")

    sp = sub.add_parser("compare", help="float vs quantized agreement report")
    sp.add_argument("dataset")
    sp.add_argument("model")
    _common_flags(sp)
    sp.set_defaults(fn=cmd_compare)
    return p


def cmd_design_filters(args) -> int:
    cfg = _get_config(args)
    bands = cfg.bands(250.0)
    print(f"{'band':>10} {'sec':>3} {'b0':>12} {'b1':>12} {'b2':>12} "
          f"{'a1':>12} {'a2':>12} {'exp':>5} {'shift':>5}")
    for band in bands:
        secs = filterbank.design_bandpass(band, cfg.sections)
        casc = filterbank.quantize_cascade(secs, seed=cfg.seed,
                                           sampling_rate_hz=band.sampling_rate_hz)
        tag = f"{band.low_hz:g}-{band.high_hz:g}"
        for i, s in enumerate(secs):
            print(f"{tag:>10} {i:>3} {s.b0:>12.6f} {s.b1:>12.6f} {s.b2:>12.6f} "
                  f"{s.a1:>12.6f} {s.a2:>12.6f} {'-':>5} {'-':>5}")
        for i, q in enumerate(casc.sections):
            print(f"{tag:>10} {i:>3} {q.b[0]:>12d} {q.b[1]:>12d} {q.b[2]:>12d} "
                  f"{q.a[0]:>12d} {q.a[1]:>12d} {q.coeff_exponent:>5d} "
                  f"{q.output_shift:>5d}")
    print(f"bands={len(bands)}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _get_config(args)
    trials = fileio.load_dataset(args.dataset)
    model = pipeline.train(trials, cfg, threads=args.threads)
    fileio.save_model(model, args.model_out)
    print(f"{'band':>10} {'cov_shift':>9} {'whiten_shift':>12} "
          f"{'cref_exp':>8} {'out_exp':>7}")
    for b, band in enumerate(model.bands):
        tag = f"{band.low_hz:g}-{band.high_hz:g}"
        print(f"{tag:>10} {model.cov_shift[b]:>9d} {model.whiten_shift[b]:>12d} "
              f"{model.cref[b].exponent:>8d} "
              f"{model.cascades[b].output_exponent:>7d}")
    print(f"trials={len(trials)}")
    print(f"input_exponent={model.input_exponent}")
    print(f"feature_exponent={model.feature_exponent}")
    print(f"model_path={args.model_out}")
    return EXIT_OK


def _load_pair(args):
    trials = fileio.load_dataset(args.dataset)
    model = fileio.load_model(args.model)
    return trials, model


def cmd_infer(args) -> int:
    trials, model = _load_pair(args)
    for i, t in enumerate(trials):
        cls, scores = pipeline.infer(t, model, args.mode, threads=args.threads)
        txt = ",".join(f"{s:d}" if args.mode == "quant" else f"{s:.9g}"
                       for s in scores)
        print(f"{i},{cls},{txt}")
    return EXIT_OK


def cmd_eval(args) -> int:
    trials, model = _load_pair(args)
    accuracy, confusion = pipeline.evaluate(trials, model, args.mode,
                                            threads=args.threads)
    print(f"accuracy {accuracy:.4f} on {len(trials)} trials ({args.mode} mode)")
    k = confusion.shape[0]
    print("confusion (rows = true class):")
    for i in range(k):
        row = " ".join(f"{confusion[i, j]:>6d}" for j in range(k))
        total = confusion[i].sum()
        recall = confusion[i, i] / total if total else 0.0
        print(f"  class {i}: {row}   recall {recall:.4f}")
    print(f"accuracy={accuracy:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    model = fileio.load_model(args.model)
    n_samples = args.samples if args.samples is not None else model.n_samples
    if n_samples < model.n_samples:
        raise UsageError("--samples is smaller than the model window")
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    # full occupancy of the model's calibrated 8-bit input range
    samples = rng.uniform(-1, 1, (model.n_channels, n_samples)) \
        * 2.0 ** (model.input_exponent + 7)
    trial = pipeline.TrialWindow(samples, None, model.sampling_rate_hz)
    ops, medians = pipeline.bench_stages(trial, model, args.mode,
                                         args.repetitions, args.threads)
    if args.no_timing:
        print(f"{'stage':>12} {'fixed_macs':>12} {'flops':>12} {'shifts':>12}")
        for stage in ("iir", "covariance", "whitening", "logm", "vect", "svm"):
            c = ops.stage(stage)
            print(f"{stage:>12} {c.fixed_macs:>12d} {c.flops:>12d} "
                  f"{c.shifts:>12d}")
    else:
        print(f"{'stage':>12} {'fixed_macs':>12} {'flops':>12} {'shifts':>12} "
              f"{'median_ms':>10}")
        for stage in ("iir", "covariance", "whitening", "logm", "vect", "svm"):
            c = ops.stage(stage)
            print(f"{stage:>12} {c.fixed_macs:>12d} {c.flops:>12d} "
                  f"{c.shifts:>12d} {medians[stage] * 1e3:>10.3f}")
    for stage in ("iir", "covariance", "whitening", "svm"):
        print(f"{stage}_macs={ops.stage(stage).fixed_macs}")
    print(f"logm_flops={ops.stage('logm').flops}")
    print(f"total_fixed_macs={ops.fixed_macs}")
    print(f"total_flops={ops.flops}")
    print(f"total_shifts={ops.shifts}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .model import svm_infer_float, svm_infer_quant

    trials, model = _load_pair(args)
    rel = []
    agree = 0
    correct_f = 0
    correct_q = 0
    labeled = 0
    for t in trials:
        ff = pipeline.extract_features_float(t, model, threads=args.threads)
        fq = pipeline.extract_features_quant(t, model, threads=args.threads)
        fqd = fq.dequantize()
        denom = float(np.linalg.norm(ff))
        rel.append(float(np.linalg.norm(fqd - ff)) / denom if denom else 0.0)
        cf, _ = svm_infer_float(ff, model.svm_float)
        cq, _ = svm_infer_quant(fq, model.svm)
        agree += int(cf == cq)
        if t.label is not None:
            labeled += 1
            correct_f += int(cf == t.label)
            correct_q += int(cq == t.label)
    n = len(trials)
    print(f"feature_rel_err_mean={np.mean(rel):.6f}")
    print(f"feature_rel_err_max={np.max(rel):.6f}")
    print(f"agreement={agree / n:.4f}")
    if labeled:
        print(f"accuracy_float={correct_f / labeled:.4f}")
        print(f"accuracy_quant={correct_q / labeled:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as e:
        print(f"mrc: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (fileio.FormatError, OSError) as e:
        print(f"mrc: error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (DataError, ConvergenceError, filterbank.FilterDesignError,
            ValueError) as e:
        print(f"mrc: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
