"""Command-line surface: dataset generation, training, evaluation, voting
scans, calibration, traces, seed sweeps, and the gradient gate.

Every command prints its fully resolved configuration before acting, so any
output can be reproduced from its banner. Exit codes: 0 success, 2 usage or
config error, 3 capability error (a strategy this model cannot run),
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import (
    ConfigError,
    FormatError,
    GenerationError,
    LatentVoteError,
    NumericError,
    ParseError,
    StrategyUnavailableError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CAPABILITY = 3
EXIT_NUMERIC = 4


def _banner(title: str, flat: dict) -> None:
    print(f"# {title} config")
    print(json.dumps(flat, sort_keys=True, indent=2))


def _write_csv(path, fields, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _set_threads(threads: int) -> None:
    if threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {threads}")
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(threads)
    except ImportError:
        pass


def _load_run_config(args):
    from .harness import RunConfig, apply_overrides, load_config

    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "set", None):
        cfg = apply_overrides(cfg, args.set)
    return cfg


def cmd_gen_data(args) -> int:
    from .puzzles import generate_records, save_dataset

    params = {}
    if args.kind == "sudoku":
        lo, hi = _parse_range(args.clues)
        params = {"box": args.box, "clues_min": lo, "clues_max": hi}
    else:
        h, w = _parse_dims(args.dims)
        params = {"height": h, "width": w, "min_path_len": args.min_path_len}
    _banner(
        "gen-data",
        {"kind": args.kind, "count": args.count, "seed": args.seed, "out": args.out, **params},
    )
    records = generate_records(args.kind, args.count, args.seed, **params)
    save_dataset(args.out, records, seed=args.seed)
    print(f"wrote {len(records)} instances to {args.out}")
    if records:
        if args.kind == "sudoku":
            counts = {}
            for rec in records:
                counts[rec.meta["clues"]] = counts.get(rec.meta["clues"], 0) + 1
            print("clue histogram:", dict(sorted(counts.items())))
        else:
            lens = [rec.meta["path_len"] for rec in records]
            print(f"path length min/median/max: {min(lens)}/{sorted(lens)[len(lens) // 2]}/{max(lens)}")
    return EXIT_OK


def _parse_range(text: str):
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"range must look like lo:hi, got {text!r}") from None


def _parse_dims(text: str):
    try:
        h, w = text.split("x")
        return int(h), int(w)
    except ValueError:
        raise ConfigError(f"dims must look like HxW, got {text!r}") from None


def _parse_int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_train(args) -> int:
    from .harness import train_run

    cfg = _load_run_config(args)
    cfg.validate()
    _banner("train", cfg.to_flat())
    metrics_path = args.metrics or args.out + ".metrics.csv"
    summary = train_run(cfg, args.out, metrics_path, resume=args.resume, progress=print)
    print(json.dumps(summary))
    print(f"checkpoint: {args.out}\nmetrics: {metrics_path}")
    return EXIT_OK


def _load_eval_records(args, header):
    from .puzzles import generate_records, load_dataset

    if args.data:
        return load_dataset(args.data)[1]
    flat = header["run_config"]
    kind = flat["data.kind"]
    if kind == "sudoku":
        params = {
            "box": flat["data.box"],
            "clues_min": flat["data.clues_min"],
            "clues_max": flat["data.clues_max"],
        }
    else:
        params = {
            "height": flat["data.height"],
            "width": flat["data.width"],
            "min_path_len": flat["data.min_path_len"],
        }
    return generate_records(
        kind, int(flat["data.test_count"]), int(flat["data.seed"]), stream="test", **params
    )


def _load_model(args):
    from .models import model_from_checkpoint

    section = "live" if getattr(args, "live", False) else "ema"
    return model_from_checkpoint(args.ckpt, section)


def cmd_eval(args) -> int:
    from .voting import vote_scan

    model, header, _ = _load_model(args)
    records = _load_eval_records(args, header)
    k_list = _parse_int_list(args.K)
    t_infer = args.t_infer or int(header["run_config"]["train.t_train"])
    seeds = _parse_int_list(args.seed)
    _banner(
        args.command,
        {
            "ckpt": args.ckpt,
            "data": args.data or "(regenerated from checkpoint config)",
            "K": k_list,
            "metric": args.metric,
            "t_infer": t_infer,
            "temperature": args.temp,
            "seeds": seeds,
            "instances": len(records),
            "out": args.out,
        },
    )
    if args.metric == "energy" and not model.has_energy:
        raise StrategyUnavailableError("energy unavailable for this model")
    rows_out = []
    trace_rows = []
    for seed in seeds:
        per_k, rows = vote_scan(
            model, records, k_list, metric=args.metric, seed=seed,
            t_infer=t_infer, temperature=args.temp,
        )
        for k in k_list:
            stats = per_k[k]
            rows_out.append(
                {
                    "K": k,
                    "metric": args.metric,
                    "temperature": args.temp,
                    "seed": seed,
                    "board_acc": f"{stats['board_accuracy']:.6f}",
                    "pos_acc": f"{stats['position_accuracy']:.6f}",
                }
            )
            print(f"seed {seed} K={k}: board acc {stats['board_accuracy']:.4f} "
                  f"pos acc {stats['position_accuracy']:.4f}")
        trace_rows.extend(rows)
    if args.out:
        _write_csv(args.out, ["K", "metric", "temperature", "seed", "board_acc", "pos_acc"], rows_out)
        print(f"wrote {args.out}")
    if args.votes_out:
        with open(args.votes_out, "w", encoding="utf-8") as fh:
            for row in trace_rows:
                fh.write(json.dumps(row) + "\n")
        print(f"wrote {args.votes_out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .harness import calibration_report, gather_position_logits

    model, header, _ = _load_model(args)
    records = _load_eval_records(args, header)
    temps = _parse_float_list(args.temps)
    t_infer = args.t_infer or int(header["run_config"]["train.t_train"])
    _banner(
        "calibrate",
        {
            "ckpt": args.ckpt,
            "K": args.K,
            "temps": temps,
            "bins": args.bins,
            "t_infer": t_infer,
            "seed": args.seed,
            "instances": len(records),
            "out": args.out,
        },
    )
    logits, targets = gather_position_logits(model, records, args.K, t_infer, seed=args.seed)
    fields = ["bin_lo", "bin_hi", "conf", "acc", "count", "ece", "temperature"]
    for temp in temps:
        report = calibration_report(logits, targets, n_bins=args.bins, temperature=temp)
        out = args.out.replace("{temp}", f"{temp:g}")
        if len(temps) > 1 and out == args.out:
            root, ext = os.path.splitext(args.out)
            out = f"{root}.T{temp:g}{ext}"
        _write_csv(out, fields, report.rows())
        print(f"temperature {temp:g}: ECE {report.ece:.4f} -> {out}")
    return EXIT_OK


def cmd_trace(args) -> int:
    from .harness import confidence_trace

    model, header, _ = _load_model(args)
    records = _load_eval_records(args, header)
    if not 0 <= args.instance < len(records):
        raise ConfigError(f"--instance must be in [0, {len(records)}), got {args.instance}")
    t_infer = args.t_infer or int(header["run_config"]["train.t_train"])
    _banner(
        "trace",
        {
            "ckpt": args.ckpt,
            "instance": args.instance,
            "K": args.K,
            "t_infer": t_infer,
            "seed": args.seed,
            "out": args.out,
        },
    )
    result = confidence_trace(
        model, records[args.instance], args.K, t_infer,
        seed=args.seed, instance_index=args.instance,
    )
    rows = []
    for k in range(args.K):
        for step in range(t_infer + 1):
            rows.append(
                {
                    "candidate": k,
                    "step": step,
                    "confidence": f"{result['confidence'][k, step]:.6f}",
                    "correct": int(result["correct"][k]),
                }
            )
    _write_csv(args.out, ["candidate", "step", "confidence", "correct"], rows)
    share = float(np.mean(result["correct"]))
    print(f"wrote {args.out} ({args.K} candidates, {t_infer + 1} steps, "
          f"{share:.0%} candidates correct)")
    return EXIT_OK


def cmd_seed_sweep(args) -> int:
    from .harness import seed_sweep

    model, header, _ = _load_model(args)
    records = _load_eval_records(args, header)
    k_list = _parse_int_list(args.K)
    seeds = _parse_int_list(args.seeds)
    t_infer = args.t_infer or int(header["run_config"]["train.t_train"])
    _banner(
        "seed-sweep",
        {
            "ckpt": args.ckpt,
            "K": k_list,
            "seeds": seeds,
            "metric": args.metric,
            "t_infer": t_infer,
            "instances": len(records),
            "out": args.out,
        },
    )
    rows, summary = seed_sweep(
        model, records, t_infer, k_list, metric=args.metric,
        temperature=args.temp, seeds=seeds,
    )
    out_rows = [
        {
            "seed": r["seed"],
            "K": r["K"],
            "metric": args.metric,
            "board_acc": f"{r['board_acc']:.6f}",
            "pos_acc": f"{r['pos_acc']:.6f}",
        }
        for r in rows
    ]
    _write_csv(args.out, ["seed", "K", "metric", "board_acc", "pos_acc"], out_rows)
    for k in k_list:
        s = summary[k]
        print(f"K={k}: median {s['median']:.4f} min {s['min']:.4f} "
              f"max {s['max']:.4f} spread {s['spread']:.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    from .gradsuite import run_gradient_suite

    _banner("grad-check", {"instances": args.instances, "tolerance": args.tolerance})
    report = run_gradient_suite(instances=args.instances, tolerance=args.tolerance)
    worst = 0.0
    failed = []
    for name, err in report.items():
        status = "ok" if err < args.tolerance else "FAIL"
        print(f"{name:24s} max rel err {err:.3e}  {status}")
        worst = max(worst, err)
        if err >= args.tolerance:
            failed.append(name)
    print(f"worst: {worst:.3e} (tolerance {args.tolerance:g})")
    if failed:
        raise NumericError(f"gradient check failed for: {', '.join(failed)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latentvote",
        description="Recurrent-model training and test-time voting on Sudoku/Maze tasks.",
    )
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="BLAS thread cap (default: available cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a puzzle dataset file")
    p.add_argument("--kind", choices=("sudoku", "maze"), required=True)
    p.add_argument("--box", type=int, default=2, help="sudoku sub-grid side (2 or 3)")
    p.add_argument("--clues", default="6:9", help="sudoku clue range lo:hi")
    p.add_argument("--dims", default="12x12", help="maze size HxW")
    p.add_argument("--min-path-len", type=int, default=14)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model per a run config")
    p.add_argument("--config", help="JSON config of flat dotted keys")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", help="metrics CSV path (default: <out>.metrics.csv)")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_train)

    for name in ("eval", "vote-scan"):
        p = sub.add_parser(name, help="evaluate a checkpoint with K-candidate voting")
        p.add_argument("--ckpt", required=True)
        p.add_argument("--data", help="dataset file (default: regenerate the test split)")
        p.add_argument("--K", default="1", help="comma-separated candidate counts")
        p.add_argument("--metric", default="top1", choices=("top1", "ne", "lp", "energy"))
        p.add_argument("--T-infer", dest="t_infer", type=int, default=0)
        p.add_argument("--temp", type=float, default=1.0)
        p.add_argument("--seed", default="0", help="comma-separated seeds")
        p.add_argument("--live", action="store_true", help="use live weights instead of EMA")
        p.add_argument("--out", help="scaling-curve CSV path")
        p.add_argument("--votes-out", help="per-(instance,K) vote trace JSONL path")
        p.set_defaults(func=cmd_eval)

    p = sub.add_parser("calibrate", help="reliability diagram CSVs at several temperatures")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data")
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--temps", default="0.5,1,2,4")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--T-infer", dest="t_infer", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--live", action="store_true")
    p.add_argument("--out", required=True, help="CSV path ({temp} substituted per temperature)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("trace", help="per-step confidence trace for one instance")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data")
    p.add_argument("--instance", type=int, default=0)
    p.add_argument("--K", type=int, default=32)
    p.add_argument("--T-infer", dest="t_infer", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--live", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("seed-sweep", help="evaluation dispersion across seeds")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data")
    p.add_argument("--K", default="1,4,16,64")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--metric", default="top1", choices=("top1", "ne", "lp", "energy"))
    p.add_argument("--temp", type=float, default=1.0)
    p.add_argument("--T-infer", dest="t_infer", type=int, default=0)
    p.add_argument("--live", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_seed_sweep)

    p = sub.add_parser("grad-check", help="finite-difference gate over every op")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _set_threads(args.threads)
        return args.func(args)
    except (ConfigError, FormatError, ParseError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StrategyUnavailableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (NumericError, LatentVoteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
