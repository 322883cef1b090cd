"""Command-line entry point.

Subcommands: gen-data, train, eval, salience, params, gradcheck. All
subcommands accept --seed, --config FILE (JSON whose keys mirror the
training/generator config fields; explicit flags win) and --jobs N.
TAGM_LOG={quiet,info,debug} sets verbosity. Exit codes: 0 success,
1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import data as data_mod
from . import training
from .attention import localization_ratio

log = logging.getLogger("tagm")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _configure_logging() -> None:
    level = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("TAGM_LOG", "info"), logging.INFO
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="base seed; every run with a seed is deterministic")
    p.add_argument("--config", default=None, help="JSON config file; flags take precedence over its keys")
    p.add_argument("--jobs", type=int, default=None, help="grid-search/batch parallelism (results independent of N)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tagm", description="attention-gated sequence classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic noisy-sequence dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output dataset path (.tgmd)")
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--train-count", type=int, default=None)
    p.add_argument("--val-count", type=int, default=None)
    p.add_argument("--test-count", type=int, default=None)
    p.add_argument("--salient-min", type=int, default=None)
    p.add_argument("--salient-max", type=int, default=None)
    p.add_argument("--pad-min", type=int, default=None)
    p.add_argument("--pad-max", type=int, default=None)
    p.add_argument("--noise-sigma", type=float, default=None)
    p.add_argument("--jitter-sigma", type=float, default=None)
    p.add_argument("--csv", default=None, help="also export the dataset as CSV")

    p = sub.add_parser("train", help="train a model and write checkpoint + log")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--model", choices=training.MODEL_KINDS, default="tagm")
    p.add_argument("--out", default=None, help="checkpoint output path (.tgmc)")
    p.add_argument("--log", dest="log_path", default=None, help="line-delimited JSON training log")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--fusion-lr-mult", type=float, default=None)
    p.add_argument("--decay", type=float, default=None, help="RMSprop decay rho")
    p.add_argument("--epsilon", type=float, default=None, help="RMSprop epsilon")
    p.add_argument("--clip", type=float, default=None, help="clip gradients to [-clip, clip]")
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--attn-hidden", type=int, default=None)
    p.add_argument("--cell-hidden", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--grid-hidden", default=None, help='grid cells "HAxHC,HAxHC,..." (triggers grid search)')
    p.add_argument("--grid-dropout", default=None, help='dropout options "0,0.25,..." for the grid')

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=data_mod.SPLIT_NAMES, default="test")

    p = sub.add_parser("salience", help="export per-timestep attention traces as CSV")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=data_mod.SPLIT_NAMES, default="test")
    p.add_argument("--out", required=True, help="CSV output path")

    p = sub.add_parser("params", help="print the closed-form parameter count")
    _add_common(p)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--attn-hidden", type=int, required=True)
    p.add_argument("--cell-hidden", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)

    p = sub.add_parser("gradcheck", help="verify analytic gradients against finite differences")
    _add_common(p)
    p.add_argument("--model", choices=training.MODEL_KINDS + ("all",), default="all")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--attn-hidden", type=int, default=4)
    p.add_argument("--cell-hidden", type=int, default=3)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--timesteps", type=int, default=5)
    p.add_argument("--corrupt", action="store_true", help="debug: corrupt one gradient coordinate; must fail")
    return parser


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(f"config file is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    return cfg


def _pick(flag_value, file_cfg: dict, key: str, default):
    """flag > config file > default."""
    if flag_value is not None:
        return flag_value
    if key in file_cfg:
        return file_cfg[key]
    return default


def _gen_config(args, file_cfg: dict) -> data_mod.GenConfig:
    base = data_mod.GenConfig()
    cfg = data_mod.GenConfig(
        classes=int(_pick(args.classes, file_cfg, "classes", base.classes)),
        dim=int(_pick(args.dim, file_cfg, "dim", base.dim)),
        salient_min=int(_pick(args.salient_min, file_cfg, "salient_min", base.salient_min)),
        salient_max=int(_pick(args.salient_max, file_cfg, "salient_max", base.salient_max)),
        pad_min=int(_pick(args.pad_min, file_cfg, "pad_min", base.pad_min)),
        pad_max=int(_pick(args.pad_max, file_cfg, "pad_max", base.pad_max)),
        noise_sigma=float(_pick(args.noise_sigma, file_cfg, "noise_sigma", base.noise_sigma)),
        pattern_jitter_sigma=float(_pick(args.jitter_sigma, file_cfg, "pattern_jitter_sigma", base.pattern_jitter_sigma)),
        train_count=int(_pick(args.train_count, file_cfg, "train_count", base.train_count)),
        val_count=int(_pick(args.val_count, file_cfg, "val_count", base.val_count)),
        test_count=int(_pick(args.test_count, file_cfg, "test_count", base.test_count)),
        seed=int(_pick(args.seed, file_cfg, "seed", base.seed)),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc))
    return cfg


def cmd_gen_data(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _gen_config(args, file_cfg)
    ds = data_mod.generate(cfg)
    data_mod.save_dataset(ds, args.out)
    if args.csv:
        data_mod.export_csv(ds, args.csv)
    lengths = np.array([s.t_len for s in ds.sequences])
    density = np.array([float(s.mask.mean()) for s in ds.sequences if s.mask is not None])
    print(f"wrote {args.out}: {len(ds)} sequences, dim={ds.dim}, classes={ds.classes}")
    for name in data_mod.SPLIT_NAMES:
        print(f"  {name}: {len(ds.splits[name])}")
    print(f"  T: min={lengths.min()} mean={lengths.mean():.1f} max={lengths.max()}")
    if density.size:
        print(f"  mask density: mean={density.mean():.3f}")
    return EXIT_OK


def _parse_grid_hidden(text: str) -> list:
    cells = []
    for chunk in text.split(","):
        parts = chunk.strip().lower().split("x")
        if len(parts) != 2:
            raise CliError(f'bad --grid-hidden cell {chunk!r}; expected "HAxHC"')
        try:
            cells.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise CliError(f"bad --grid-hidden cell {chunk!r}")
    return cells


def _train_config(args, file_cfg: dict) -> training.TrainConfig:
    base = training.TrainConfig()
    clip = _pick(args.clip, file_cfg, "clip", None)
    cfg = training.TrainConfig(
        model=args.model,
        attn_hidden=int(_pick(args.attn_hidden, file_cfg, "attn_hidden", base.attn_hidden)),
        cell_hidden=int(_pick(args.cell_hidden, file_cfg, "cell_hidden", base.cell_hidden)),
        learning_rate=float(_pick(args.lr, file_cfg, "learning_rate", base.learning_rate)),
        fusion_lr_multiplier=float(_pick(args.fusion_lr_mult, file_cfg, "fusion_lr_multiplier", base.fusion_lr_multiplier)),
        rmsprop_decay=float(_pick(args.decay, file_cfg, "rmsprop_decay", base.rmsprop_decay)),
        rmsprop_epsilon=float(_pick(args.epsilon, file_cfg, "rmsprop_epsilon", base.rmsprop_epsilon)),
        clip_lo=-float(clip) if clip is not None else float(file_cfg.get("clip_lo", base.clip_lo)),
        clip_hi=float(clip) if clip is not None else float(file_cfg.get("clip_hi", base.clip_hi)),
        dropout=float(_pick(args.dropout, file_cfg, "dropout", base.dropout)),
        batch_size=int(_pick(args.batch_size, file_cfg, "batch_size", base.batch_size)),
        epochs=int(_pick(args.epochs, file_cfg, "epochs", base.epochs)),
        seed=int(_pick(args.seed, file_cfg, "seed", base.seed)),
        patience=int(_pick(args.patience, file_cfg, "patience", base.patience)),
        jobs=int(_pick(args.jobs, file_cfg, "jobs", base.jobs)),
    )
    grid_hidden = _pick(args.grid_hidden, file_cfg, "grid_hidden", None)
    if grid_hidden is not None:
        cfg.grid_hidden = _parse_grid_hidden(grid_hidden) if isinstance(grid_hidden, str) else [tuple(c) for c in grid_hidden]
    grid_dropout = _pick(args.grid_dropout, file_cfg, "grid_dropout", None)
    if grid_dropout is not None:
        cfg.grid_dropout = (
            [float(v) for v in grid_dropout.split(",")] if isinstance(grid_dropout, str) else [float(v) for v in grid_dropout]
        )
    try:
        cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc))
    return cfg


def _load_dataset_checked(path) -> data_mod.Dataset:
    try:
        return data_mod.load_dataset(path)
    except OSError as exc:
        raise CliError(f"cannot read dataset: {exc}")
    except data_mod.FormatError as exc:
        raise CliError(str(exc))


def _metric_name(mode: str) -> str:
    return "accuracy" if mode == "multiclass" else "mean_ap"


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    cfg = _train_config(args, file_cfg)
    ds = _load_dataset_checked(args.data)

    if cfg.grid_hidden:
        result = training.grid_search(ds, cfg)
        for cell in result.cells:
            log.info(
                "grid cell attn=%d cell=%d dropout=%.2f: val=%.4f params=%d epochs=%d",
                cell.attn_hidden, cell.cell_hidden, cell.dropout, cell.val_acc, cell.params, cell.epochs_run,
            )
        best = result.best
        print(
            f"grid best: attn_hidden={result.best_cell.attn_hidden} "
            f"cell_hidden={result.best_cell.cell_hidden} dropout={result.best_cell.dropout}"
        )
    else:
        try:
            best = training.train(ds, cfg)
        except training.TrainingDiverged as exc:
            print(f"training diverged: {exc}", file=sys.stderr)
            return EXIT_VERIFY

    if args.log_path:
        with open(args.log_path, "w") as fh:
            for rec in best.log:
                fh.write(
                    json.dumps(
                        {
                            "epoch": rec.epoch,
                            "train_loss": rec.train_loss,
                            "train_acc": rec.train_acc,
                            "val_acc": rec.val_acc,
                            "wall_time": rec.wall_time,
                        }
                    )
                    + "\n"
                )
    if args.out:
        data_mod.save_checkpoint(best.model, args.out, seed=cfg.seed)

    name = _metric_name(ds.mode)
    val = training.evaluate(best.model, ds.split("val"))
    test = training.evaluate(best.model, ds.split("test")) if ds.splits.get("test") else float("nan")
    print(f"best_epoch={best.best_epoch}")
    print(f"val_{name}={val!r}")
    print(f"test_{name}={test!r}")
    return EXIT_OK


def _load_model_for(args):
    try:
        model, _, meta = data_mod.load_checkpoint(args.ckpt)
    except OSError as exc:
        raise CliError(f"cannot read checkpoint: {exc}")
    except data_mod.FormatError as exc:
        raise CliError(str(exc))
    ds = _load_dataset_checked(args.data)
    if model.dim != ds.dim or model.classes != ds.classes:
        raise CliError(
            f"checkpoint expects dim={model.dim}, classes={model.classes}; "
            f"dataset has dim={ds.dim}, classes={ds.classes}"
        )
    if model.head_mode != ds.mode:
        raise CliError(f"checkpoint head mode {model.head_mode!r} does not match dataset mode {ds.mode!r}")
    return model, ds, meta


def cmd_eval(args) -> int:
    model, ds, _ = _load_model_for(args)
    seqs = ds.split(args.split)
    if not seqs:
        raise CliError(f"split {args.split!r} is empty")
    if ds.mode == "multiclass":
        acc = training.evaluate(model, seqs)
        print(f"{args.split}_accuracy={acc!r}")
    else:
        aps, mean_ap = training.average_precision_per_class(model, seqs)
        for k, ap in enumerate(aps):
            print(f"class_{k}_ap={ap!r}")
        print(f"{args.split}_mean_ap={mean_ap!r}")
    return EXIT_OK


def cmd_salience(args) -> int:
    model, ds, _ = _load_model_for(args)
    if model.kind == "rnn":
        raise CliError("plain-RNN checkpoints have no attention profile")
    seqs = ds.split(args.split)
    if not seqs:
        raise CliError(f"split {args.split!r} is empty")
    has_mask = all(s.mask is not None for s in seqs)
    ratios = []
    with open(args.out, "w") as fh:
        fh.write("sample_id,t,a" + (",mask,ratio" if has_mask else "") + "\n")
        for i, s in enumerate(seqs):
            a = training.attention_profile(model, s.x)
            if has_mask:
                ratio = localization_ratio(a, s.mask)
                ratios.append(ratio)
                for t in range(s.t_len):
                    fh.write(f"{i},{t},{float(a[t])!r},{int(s.mask[t])},{ratio!r}\n")
            else:
                for t in range(s.t_len):
                    fh.write(f"{i},{t},{float(a[t])!r}\n")
    print(f"wrote {args.out}: {len(seqs)} sequences")
    if ratios:
        arr = np.array(ratios)
        finite = arr[np.isfinite(arr)]
        if finite.size:
            print(
                f"localization ratio: median={float(np.median(finite))!r} "
                f"frac>=2={float((finite >= 2.0).mean())!r}"
            )
    return EXIT_OK


def cmd_params(args) -> int:
    try:
        n = training.param_count(args.dim, args.attn_hidden, args.cell_hidden, args.classes)
    except ValueError as exc:
        raise CliError(str(exc))
    print(n)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    kinds = training.MODEL_KINDS if args.model == "all" else (args.model,)
    ok = True
    for kind in kinds:
        report = training.gradient_check(
            kind=kind,
            dim=args.dim,
            attn_hidden=args.attn_hidden,
            cell_hidden=args.cell_hidden,
            classes=args.classes,
            timesteps=args.timesteps,
            seeds=args.seeds,
            corrupt=args.corrupt,
        )
        status = "PASS" if report.passed else "FAIL"
        print(f"{kind}: {status} max_rel_error={report.max_rel_error:.3e} (tol {report.tol:g}, {len(report.cases)} seeds)")
        for case in report.cases:
            log.debug("  seed %d: max_rel=%.3e at %s", case.seed, case.max_rel_error, case.worst_coordinate)
        ok = ok and report.passed
    return EXIT_OK if ok else EXIT_VERIFY


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "salience": cmd_salience,
    "params": cmd_params,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own usage message
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return HANDLERS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
