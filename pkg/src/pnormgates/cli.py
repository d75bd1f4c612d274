"""Command-line entry point: ``pnormgates <subcommand> ...``.

Exit codes: 0 success, 1 data or runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, data, gru, highway
from .modelio import ModelFormatError, load_model, save_model
from .numeric import Rng
from .train import (TrainConfig, epochs_to_threshold, evaluate, format_epochs, sgd_train)

log = logging.getLogger("pnormgates")

SUMMARY_HEADER = ("p", "depth", "final_metric", "epochs_to_benchmark", "diverged_flag")
MINIBOONE_SPLIT = (48_700, 12_200)


class UsageError(Exception):
    pass


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


# ---------------------------------------------------------------- vector data

def _delimiter(value: str | None) -> str | None:
    return None if value in (None, "whitespace", " ") else value


def load_vector_data(opts: dict):
    """Load, split and optionally standardize a vector dataset.

    ``opts`` keys: data, format, label_column, delimiter, header,
    train_count, valid_count, train_fraction, split_seed, standardize.
    """
    fmt = opts.get("format", "csv")
    path = opts["data"]
    if fmt == "miniboone":
        ds = data.load_miniboone(path)
    elif fmt == "csv":
        ds = data.load_csv(path, opts.get("label_column", "last"),
                           _delimiter(opts.get("delimiter", ",")),
                           header=opts.get("header", False))
    else:
        raise UsageError(f"unknown data format {fmt!r}")
    train_count = opts.get("train_count")
    valid_count = opts.get("valid_count")
    if train_count is None and fmt == "miniboone" and ds.n >= sum(MINIBOONE_SPLIT):
        train_count, valid_count = MINIBOONE_SPLIT
    train, valid = data.split(ds, Rng(opts.get("split_seed", 0)), train_count, valid_count,
                              opts.get("train_fraction"))
    if opts.get("standardize", True):
        train, valid = data.standardize(train, valid)
    return train, valid


def run_vector(config: TrainConfig, opts: dict, out_dir: Path, benchmark: float | None):
    train, valid = load_vector_data(opts)
    runlog = sgd_train(config, train, valid)
    out_dir.mkdir(parents=True, exist_ok=True)
    runlog.write(out_dir / "runlog.csv", out_dir / "runlog.meta.txt")
    save_model(out_dir / "model.npz", runlog.params, config, mean=train.mean, std=train.std)
    reached = epochs_to_threshold(runlog, benchmark) if benchmark is not None else None
    return runlog, reached


def _config_from_args(args, model: str) -> TrainConfig:
    return TrainConfig(
        model=model, p=args.p, layers=getattr(args, "layers", 2), hidden=args.hidden,
        lr=args.lr, epochs=args.epochs, batch=args.batch, seed=args.seed,
        activation=getattr(args, "activation", "tanh"),
        standardize=not getattr(args, "no_standardize", False),
        clip_norm=args.clip_norm, gate_bias=args.gate_bias,
        dataset=str(getattr(args, "data", None) or getattr(args, "corpus", "")),
    )


def _vector_opts(args) -> dict:
    return {
        "data": args.data, "format": args.format, "label_column": args.label_column,
        "delimiter": args.delimiter, "header": args.header,
        "train_count": args.train_count, "valid_count": args.valid_count,
        "train_fraction": args.train_fraction, "split_seed": args.split_seed,
        "standardize": not args.no_standardize,
    }


def cmd_train_vec(args) -> int:
    config = _config_from_args(args, "highway")
    runlog, reached = run_vector(config, _vector_opts(args), Path(args.out), args.benchmark_f1)
    if runlog.diverged_epoch is not None:
        print(f"diverged at epoch {runlog.diverged_epoch}")
        return 1
    final = runlog.records[-1]
    print(f"final train_loss_nats={final.train_loss:.6f} valid_f1={final.valid_metric:.6f}")
    if args.benchmark_f1 is not None:
        print(f"epochs_to_f1_{args.benchmark_f1:g}={format_epochs(reached)}")
    return 0


def cmd_train_lm(args) -> int:
    config = _config_from_args(args, "gru")
    train, valid = data.load_corpus(args.corpus, args.train_sents, args.valid_sents,
                                    Rng(args.split_seed))
    if not train.sequences:
        raise data.DataError("no training sentence has 2 or more characters")
    runlog = sgd_train(config, train, valid if valid.sequences else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runlog.write(out / "runlog.csv", out / "runlog.meta.txt")
    save_model(out / "model.npz", runlog.params, config, vocabulary=train.vocabulary)
    if runlog.diverged_epoch is not None:
        print(f"diverged at epoch {runlog.diverged_epoch}")
        return 1
    final = runlog.records[-1]
    print(f"final train_loss_nats={final.train_loss:.6f} valid_bpc={final.valid_metric:.6f}")
    return 0


# ---------------------------------------------------------------- sweep

def cell_seed(base_seed: int, p: float, depth: int) -> int:
    digest = hashlib.sha256(f"{base_seed}:{p!r}:{depth}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def load_sweep_spec(path) -> dict:
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("p", "depths", "base", "data"):
        if key not in spec:
            raise UsageError(f"sweep spec lacks {key!r}")
    if not spec["p"] or not spec["depths"]:
        raise UsageError("sweep spec needs at least one p and one depth")
    for p in spec["p"]:
        positive_float(str(p))
    return spec


def sweep_cells(spec: dict) -> list[tuple[float, int]]:
    return [(float(p), int(d)) for p in spec["p"] for d in spec["depths"]]


def _run_cell(spec: dict, p: float, depth: int, out_dir: str) -> tuple:
    base = dict(spec["base"])
    base_seed = base.pop("seed", 42)
    seed = base_seed if spec.get("shared_seed") else cell_seed(base_seed, p, depth)
    config = TrainConfig.from_dict({**base, "model": "highway", "p": p, "layers": depth,
                                    "seed": seed, "dataset": str(spec["data"].get("data", ""))})
    cell_dir = Path(out_dir) / f"p{p:g}_depth{depth}"
    benchmark = spec.get("benchmark_f1")
    try:
        runlog, reached = run_vector(config, spec["data"], cell_dir, benchmark)
    except Exception as exc:  # a failing cell must not stop the sweep
        log.error("cell p=%g depth=%d failed: %s", p, depth, exc)
        return (p, depth, float("nan"), "N/A", 1)
    diverged = runlog.diverged_epoch is not None
    final = float("nan") if diverged else runlog.records[-1].valid_metric
    return (p, depth, final, format_epochs(reached), int(diverged))


def run_sweep(spec: dict, out_dir, jobs: int = 1) -> list[tuple]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(spec)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_cell, spec, p, d, str(out_dir)) for p, d in cells]
            rows = [f.result() for f in futures]
    else:
        rows = [_run_cell(spec, p, d, str(out_dir)) for p, d in cells]
    with open(out_dir / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for p, depth, final, reached, diverged in rows:
            w.writerow([f"{p:g}", depth, repr(final), reached, diverged])
    return rows


def cmd_sweep(args) -> int:
    spec = load_sweep_spec(args.spec)
    overrides = {k: v for k, v in (("epochs", args.epochs), ("seed", args.seed),
                                    ("lr", args.lr)) if v is not None}
    spec["base"] = {**spec.get("base", {}), **overrides}
    out = args.out or spec.get("out", "sweep-out")
    rows = run_sweep(spec, out, args.jobs)
    for p, depth, final, reached, diverged in rows:
        print(f"p={p:g} depth={depth} final_metric={final:.4f} "
              f"epochs_to_benchmark={reached} diverged={diverged}")
    return 0


# ---------------------------------------------------------------- gate dump / eval

def _read_row(args, n_features: int) -> np.ndarray:
    if args.row is not None:
        values = [float(v) for v in args.row.replace(",", " ").split()]
        return np.array(values)
    ds = data.load_csv(args.data, args.label_column, _delimiter(args.delimiter), header=args.header)
    if not 0 <= args.row_index < ds.n:
        raise data.DataError(f"row index {args.row_index} outside 0..{ds.n - 1}")
    return ds.features[args.row_index]


def cmd_gate_dump(args) -> int:
    params, meta = load_model(args.model)
    if not isinstance(params, highway.HighwayParams):
        raise data.DataError("gate-dump needs a highway model")
    x = _read_row(args, params.input_dim)
    if x.size != params.input_dim:
        raise data.DataError(f"input row has {x.size} features, model expects {params.input_dim}")
    norm = meta.get("standardization")
    if norm is not None and not args.raw:
        x = (x - np.array(norm["mean"])) / np.array(norm["std"])
    a1, a2 = highway.gate_matrices(params, x)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for name, mat in (("alpha1", a1), ("alpha2", a2)):
        np.savetxt(f"{prefix}_{name}.csv", mat, delimiter=",", fmt="%.17g")
    print(f"wrote {prefix}_alpha1.csv and {prefix}_alpha2.csv ({a1.shape[0]}x{a1.shape[1]})")
    return 0


def cmd_eval(args) -> int:
    params, meta = load_model(args.model)
    if isinstance(params, highway.HighwayParams):
        if not args.data:
            raise UsageError("eval of a highway model needs --data")
        ds = data.load_csv(args.data, args.label_column, _delimiter(args.delimiter),
                           header=args.header)
        norm = meta.get("standardization")
        if norm is not None:
            ds = replace(ds, features=(ds.features - norm["mean"]) / np.array(norm["std"]))
        metric = evaluate(params, ds)
        print(f"{'f1' if ds.n_classes == 2 else 'macro_f1'}={metric:.6f}")
    else:
        if not args.corpus:
            raise UsageError("eval of a GRU model needs --corpus")
        vocab = tuple(meta["vocabulary"])
        lines = [line[:data.MAX_SEQUENCE_CHARS] for line in data.read_sentences(args.corpus)]
        corpus = data.CharCorpus(vocab, tuple(
            data.CharCorpus(vocab, ()).encode(line) for line in lines if len(line) >= 2))
        print(f"bpc={gru.bits_per_character(params, corpus):.6f}")
    return 0


def cmd_make_surrogate(args) -> int:
    ds = data.make_surrogate(args.n, args.dim, args.seed)
    out = np.hstack([ds.features, ds.labels[:, None]])
    fmt = ["%.17g"] * ds.d + ["%d"]
    np.savetxt(args.out, out, delimiter=",", fmt=fmt)
    print(f"wrote {ds.n} rows to {args.out}")
    return 0


def cmd_make_corpus(args) -> int:
    lines = data.make_synthetic_corpus(args.n, args.seed)
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} sentences to {args.out}")
    return 0


# ---------------------------------------------------------------- parser

def _add_train_flags(sp, *, lm: bool) -> None:
    sp.add_argument("--p", type=positive_float, default=1.0, help="gate norm exponent (> 0)")
    sp.add_argument("--hidden", type=positive_int, default=400 if lm else 50)
    sp.add_argument("--epochs", type=positive_int, default=50 if lm else 100)
    sp.add_argument("--batch", type=positive_int, default=32 if lm else 20)
    sp.add_argument("--lr", type=float, default=None,
                    help=f"learning rate (default {0.1 if lm else 0.05})")
    sp.add_argument("--seed", type=int, default=42)
    sp.add_argument("--split-seed", type=int, default=0)
    sp.add_argument("--clip-norm", type=positive_float, default=None)
    sp.add_argument("--gate-bias", type=float, default=None)
    sp.add_argument("--out", default="run-out", help="output directory")


def _add_csv_flags(sp) -> None:
    sp.add_argument("--label-column", default="last", help="last, first or an index")
    sp.add_argument("--delimiter", default=",",
                    help="field separator; 'whitespace' for runs of blanks")
    sp.add_argument("--header", action="store_true", help="skip the first line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnormgates",
                                     description="p-norm gated highway networks and GRUs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train-vec", help="train a highway network on vector data")
    sp.add_argument("--data", required=True)
    sp.add_argument("--format", choices=("csv", "miniboone"), default="csv")
    _add_csv_flags(sp)
    sp.add_argument("--layers", type=positive_int, default=10)
    sp.add_argument("--activation", choices=("tanh", "relu"), default="tanh")
    sp.add_argument("--train-count", type=positive_int, default=None)
    sp.add_argument("--valid-count", type=int, default=None)
    sp.add_argument("--train-fraction", type=float, default=None)
    sp.add_argument("--no-standardize", action="store_true")
    sp.add_argument("--benchmark-f1", type=float, default=None)
    _add_train_flags(sp, lm=False)
    sp.set_defaults(func=cmd_train_vec)

    sp = sub.add_parser("train-lm", help="train a character-level GRU language model")
    sp.add_argument("--corpus", required=True, help="UTF-8 text, one sentence per line")
    sp.add_argument("--train-sents", type=positive_int, default=10_000)
    sp.add_argument("--valid-sents", type=int, default=4_000)
    _add_train_flags(sp, lm=True)
    sp.set_defaults(func=cmd_train_lm)

    sp = sub.add_parser("sweep", help="train every (p, depth) cell of a sweep spec")
    sp.add_argument("spec", help="JSON sweep specification")
    sp.add_argument("--jobs", type=positive_int, default=1)
    sp.add_argument("--out", default=None)
    sp.add_argument("--epochs", type=positive_int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--lr", type=float, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("gate-dump", help="write both gates of a highway model for one input")
    sp.add_argument("--model", required=True)
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--row", help="comma or space separated raw feature values")
    src.add_argument("--data", help="CSV file to take the row from")
    sp.add_argument("--row-index", type=int, default=0)
    _add_csv_flags(sp)
    sp.add_argument("--raw", action="store_true", help="skip the stored standardization")
    sp.add_argument("--out-prefix", default="gates")
    sp.set_defaults(func=cmd_gate_dump)

    sp = sub.add_parser("eval", help="score a saved model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data")
    sp.add_argument("--corpus")
    _add_csv_flags(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("make-surrogate", help="write the synthetic two-class vector dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=positive_int, default=20_000)
    sp.add_argument("--dim", type=positive_int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_make_surrogate)

    sp = sub.add_parser("make-corpus", help="write a synthetic sentence corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=positive_int, default=1_400)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_make_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"pnormgates: error: {exc}", file=sys.stderr)
        return 2
    except (data.IngestionError, data.DataError, data.ConfigError, ModelFormatError,
            OSError, ValueError) as exc:
        print(f"pnormgates: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
