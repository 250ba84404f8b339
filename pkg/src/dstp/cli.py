"""Command-line interface: ``dstp {prepare,train,evaluate,predict,export-attention,grid}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .data import DATASET_NAMES, Table, load, make_windows, preset, read_csv, split_and_standardize, synthesize
from .errors import (ConfigurationError, ContractError, DataError, DimensionError, DivergenceError,
                     UnsupportedOperationError)
from .evaluation import ExperimentGrid, evaluate, export_attention, parse_arch, run_grid, write_reports
from .models import ARCHITECTURES, ModelConfig, forward
from .training import TrainConfig, load_checkpoint, save_checkpoint, train, write_history

log = logging.getLogger("dstp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3

SYNTHETIC_DEFAULTS = dict(n=10, rows=2000, sparsity=2, train_size=1600, test_size=400)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file; flags override its values")
    p.add_argument("--dataset", choices=DATASET_NAMES)
    p.add_argument("--data-path", help="dataset CSV (overrides the config path)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", help=f"one of {', '.join(ARCHITECTURES)}; add '-nt' to drop the target row")
    p.add_argument("--window", type=int, help="window size T")
    p.add_argument("--horizon", type=int, help="forecast horizon tau")
    p.add_argument("--hidden", type=int, help="hidden size of every recurrent unit")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dstp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="load, split and standardize a dataset")
    _common(p)

    p = sub.add_parser("train", help="train one model")
    _common(p)
    _model_flags(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)

    p = sub.add_parser("evaluate", help="test-set RMSE/MAE of a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--raw-units", action="store_true", help="report metrics in original target units")

    p = sub.add_parser("predict", help="forecast from the last window of a CSV file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="CSV with the checkpoint's columns (raw units)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--out", default=".")
    p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("export-attention", help="write attention weights for test windows")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")

    p = sub.add_parser("grid", help="train/evaluate a grid of architectures x horizons x windows")
    _common(p)
    p.add_argument("--archs", help="comma-separated architectures")
    p.add_argument("--horizons", help="comma-separated horizons")
    p.add_argument("--windows", help="comma-separated window sizes")
    p.add_argument("--hidden", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int, default=1)
    return parser


# ---------------------------------------------------------------------------


def _experiment(args) -> ExperimentConfig:
    return load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()


def _dataset(args, cfg: ExperimentConfig):
    spec = cfg.dataset
    if args.dataset and (spec is None or spec.name != args.dataset):
        spec = preset(args.dataset)
    if spec is None:
        raise ConfigurationError("no dataset given (use --dataset or a config with [dataset])")
    if args.data_path:
        spec.path = args.data_path
    if spec.name == "synthetic" and not spec.path:
        d = SYNTHETIC_DEFAULTS
        table, informative, _ = synthesize(d["n"], d["rows"], d["sparsity"], seed=cfg.train.seed)
        spec.train_size = spec.train_size or d["train_size"]
        spec.test_size = spec.test_size or d["test_size"]
        log.info("synthetic data: informative series %s", informative.tolist())
        return spec, table
    if not spec.path:
        raise ConfigurationError(f"dataset {spec.name!r} needs a path (--data-path or config)")
    return spec, load(spec)


def _train_config(args, cfg: ExperimentConfig) -> TrainConfig:
    tc = cfg.train
    changes = {}
    if getattr(args, "epochs", None):
        changes["max_epochs"] = args.epochs
    if getattr(args, "batch_size", None):
        changes["batch_size"] = args.batch_size
    if getattr(args, "lr", None):
        changes["learning_rate"] = args.lr
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return TrainConfig(**{**tc.__dict__, **changes}) if changes else tc


def _model_config(args, cfg: ExperimentConfig, n_exog: int) -> ModelConfig:
    m = dict(cfg.model)
    for key in ("arch", "window", "horizon", "hidden", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            m[key] = value
    if "arch" not in m or "window" not in m or "horizon" not in m:
        raise ConfigurationError("model needs --arch, --window and --horizon")
    arch, with_target = parse_arch(m.pop("arch"))
    hidden = m.pop("hidden", 128)
    kw = dict(hidden_phase1=hidden, hidden_phase2=hidden, hidden_decoder=hidden)
    kw.update({k: m[k] for k in ("hidden_phase1", "hidden_phase2", "hidden_decoder", "seed") if k in m})
    return ModelConfig(arch, n_exog, m["window"], m["horizon"],
                       target_in_last_phase=m.get("target_in_last_phase", with_target), **kw)


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_prepare(args) -> int:
    cfg = _experiment(args)
    spec, table = _dataset(args, cfg)
    train_tab, test_tab, stats = split_and_standardize(table, spec.train_size, spec.test_size)
    out = _out(args)
    train_tab.frame.to_csv(out / "train.csv", index_label="row", float_format="%.17g")
    test_tab.frame.to_csv(out / "test.csv", index_label="row", float_format="%.17g")
    (out / "stats.json").write_text(json.dumps({"target": table.target, **stats.to_dict()}, indent=2))
    print(f"{spec.name}: {table.n_exog} exogenous series, {len(train_tab)} train / {len(test_tab)} test rows")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _experiment(args)
    spec, table = _dataset(args, cfg)
    train_tab, _, stats = split_and_standardize(table, spec.train_size, spec.test_size)
    model = _model_config(args, cfg, train_tab.n_exog)
    tc = _train_config(args, cfg)
    ckpt, history = train(model, make_windows(train_tab, model.window, model.horizon), tc, stats)
    ckpt.metadata["dataset"] = spec.name
    ckpt.metadata["target"] = table.target
    out = _out(args)
    save_checkpoint(ckpt, out / "model.ckpt")
    write_history(history, out / "history.csv")
    print(f"trained {model.arch}: best epoch {ckpt.metadata['epoch']}, loss {ckpt.metadata['best_loss']:.6g}")
    return EXIT_OK


def _split_tables(args, cfg):
    spec, table = _dataset(args, cfg)
    train_tab, test_tab, _ = split_and_standardize(table, spec.train_size, spec.test_size)
    return spec, table, train_tab, test_tab


def cmd_evaluate(args) -> int:
    cfg = _experiment(args)
    ckpt = load_checkpoint(args.checkpoint)
    spec, table, _, test_tab = _split_tables(args, cfg)
    out = _out(args)
    windows = make_windows(test_tab, ckpt.model.window, ckpt.model.horizon)
    report, per_h = evaluate(ckpt, windows, spec.name, out / "predictions.csv", args.checkpoint,
                             raw_units=args.raw_units, target=table.target)
    write_reports([report], out / "report.csv")
    with open(out / "per_horizon.csv", "w") as fh:
        fh.write("step,rmse,mae\n")
        for j, (r, m) in enumerate(per_h, start=1):
            fh.write(f"{j},{r:.17g},{m:.17g}\n")
    print(f"{spec.name} {report.arch} T={report.window} tau={report.horizon}: "
          f"RMSE {report.rmse:.4f} MAE {report.mae:.4f} over {report.n_samples} windows")
    return EXIT_OK


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.stats is None:
        raise ConfigurationError("checkpoint carries no standardization statistics")
    target = ckpt.metadata.get("target", ckpt.stats.columns[-1])
    frame = read_csv(args.input, args.delimiter)
    missing = [c for c in ckpt.stats.columns if c not in frame.columns]
    if missing:
        raise DataError(f"input lacks columns {missing}")
    T = ckpt.model.window
    if len(frame) < T:
        raise DataError(f"input has {len(frame)} rows, the model needs {T}")
    try:
        recent = frame[ckpt.stats.columns].iloc[-T:].astype(np.float64)
    except ValueError as exc:
        raise DataError(f"non-numeric input: {exc}") from None
    if recent.isna().any().any():
        raise DataError("the last window of the input has missing values")
    z = ckpt.stats.transform(recent)
    exog = [c for c in ckpt.stats.columns if c != target]
    pred = forward(ckpt.model, ckpt.params, z[exog].to_numpy().T, z[target].to_numpy()).prediction
    mean, std = ckpt.stats.target_scale(target)
    out = _out(args)
    with open(out / "forecast.csv", "w") as fh:
        fh.write("step,prediction\n")
        for j, v in enumerate(pred * std + mean, start=1):
            fh.write(f"{j},{v:.17g}\n")
    print(" ".join(f"{v:.6g}" for v in pred * std + mean))
    return EXIT_OK


def cmd_export_attention(args) -> int:
    cfg = _experiment(args)
    ckpt = load_checkpoint(args.checkpoint)
    _, _, train_tab, test_tab = _split_tables(args, cfg)
    tab = train_tab if args.split == "train" else test_tab
    windows = make_windows(tab, ckpt.model.window, ckpt.model.horizon)
    out = _out(args)
    rows = export_attention(ckpt, windows, out / "attention.csv")
    print(f"wrote {rows} attention weights for {len(windows)} windows")
    return EXIT_OK


def cmd_grid(args) -> int:
    cfg = _experiment(args)
    spec, table = _dataset(args, cfg)
    grid = cfg.grid or ExperimentGrid(archs=["dstp"])
    if args.archs:
        grid.archs = [a.strip() for a in args.archs.split(",")]
    if args.horizons:
        grid.horizons = [int(h) for h in args.horizons.split(",")]
    if args.windows:
        grid.windows = [int(w) for w in args.windows.split(",")]
    if args.hidden:
        grid.hidden = args.hidden
    if args.seed is not None:
        grid.seed = args.seed
    reports = run_grid(spec, grid, _train_config(args, cfg), _out(args), workers=args.workers, table=table)
    for r in reports:
        print(f"{r.arch:>12} T={r.window:<3} tau={r.horizon:<4} RMSE {r.rmse:.4f} MAE {r.mae:.4f} {r.status}")
    return EXIT_OK


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
            "export-attention": cmd_export_attention, "grid": cmd_grid}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ContractError, UnsupportedOperationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
