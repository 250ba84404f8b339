"""Metrics, evaluation reports, attention-trace export and experiment grids."""
from __future__ import annotations

import csv
import itertools
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .data import DatasetSpec, Table, WindowSet, load, make_windows, split_and_standardize
from .errors import ConfigurationError, ContractError, UnsupportedOperationError
from .models import ModelConfig, forward, predict_batches
from .training import Checkpoint, TrainConfig, save_checkpoint, train, write_history

log = logging.getLogger(__name__)

HORIZONS = (5, 10, 30, 50, 120)


def _residuals(preds, truths) -> np.ndarray:
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(truths, dtype=np.float64).ravel()
    if p.size != t.size:
        raise ContractError(f"{p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise ContractError("metrics need at least one prediction")
    return p - t


def rmse(preds, truths) -> float:
    r = _residuals(preds, truths)
    return float(np.sqrt(np.mean(r * r)))


def mae(preds, truths) -> float:
    return float(np.mean(np.abs(_residuals(preds, truths))))


@dataclass
class ForecastReport:
    dataset: str
    arch: str
    window: int
    horizon: int
    rmse: float
    mae: float
    n_samples: int
    checkpoint: str = ""
    status: str = "ok"
    # Runtime varies between identical runs, so it is kept out of comparisons and the report table.
    seconds: float = field(default=0.0, compare=False)

    def row(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "seconds":
                continue
            v = getattr(self, f.name)
            out[f.name] = f"{v:.17g}" if isinstance(v, float) else str(v)
        return out

    @classmethod
    def from_row(cls, row: dict) -> "ForecastReport":
        kw = {}
        for f in fields(cls):
            if f.name not in row:
                continue
            kw[f.name] = {"int": int, "float": float}.get(f.type, str)(row[f.name])
        return cls(**kw)


REPORT_COLUMNS = [f.name for f in fields(ForecastReport) if f.name != "seconds"]


def write_reports(reports: list[ForecastReport], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for r in reports:
            w.writerow(r.row())


def read_reports(path: str | Path) -> list[ForecastReport]:
    with open(path, newline="") as fh:
        return [ForecastReport.from_row(row) for row in csv.DictReader(fh)]


def write_predictions(windows: WindowSet, preds: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("origin,step,prediction,truth\n")
        for origin, p_row, t_row in zip(windows.origin, preds, windows.future):
            for j, (p, t) in enumerate(zip(p_row, t_row), start=1):
                fh.write(f"{origin},{j},{p:.17g},{t:.17g}\n")


def read_predictions(path: str | Path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(int), data[:, 1].astype(int), data[:, 2], data[:, 3]


def evaluate(ckpt: Checkpoint, windows: WindowSet, dataset: str = "", predictions_path=None,
             checkpoint_path: str = "", raw_units: bool = False, target: str | None = None,
             ) -> tuple[ForecastReport, np.ndarray]:
    """Forecast every window and pool RMSE/MAE over all ``N * horizon`` values.

    Returns the report and the per-horizon ``[horizon, 2]`` (rmse, mae) breakdown.
    With ``raw_units`` the metrics are rescaled by the target's training std.
    """
    cfg = ckpt.model
    if (windows.n_exog, windows.window, windows.horizon) != (cfg.n_exog, cfg.window, cfg.horizon):
        raise ConfigurationError(
            f"windows (n={windows.n_exog}, T={windows.window}, tau={windows.horizon}) do not match "
            f"checkpoint (n={cfg.n_exog}, T={cfg.window}, tau={cfg.horizon})")
    start = time.perf_counter()
    preds = predict_batches(cfg, ckpt.params, windows.X, windows.Y)
    truth = windows.future
    unit = 1.0
    if raw_units:
        if ckpt.stats is None or target is None:
            raise ConfigurationError("raw units need stored statistics and the target name")
        unit = ckpt.stats.target_scale(target)[1]
    if predictions_path is not None:
        write_predictions(windows, preds, predictions_path)
    per_h = np.array([[rmse(preds[:, j], truth[:, j]) * unit, mae(preds[:, j], truth[:, j]) * unit]
                      for j in range(cfg.horizon)])
    report = ForecastReport(dataset, cfg.arch, cfg.window, cfg.horizon, rmse(preds, truth) * unit,
                            mae(preds, truth) * unit, len(windows), str(checkpoint_path),
                            seconds=time.perf_counter() - start)
    return report, per_h


# ---------------------------------------------------------------------------
# attention traces


def attention_rows(ckpt: Checkpoint, windows: WindowSet, batch_size: int = 256):
    """Yield ``(window_index, phase, step, item, weight)`` for every stored attention weight."""
    cfg = ckpt.model
    if not cfg.has_attention:
        raise UnsupportedOperationError(f"architecture {cfg.arch!r} has no attention stages")
    for lo in range(0, len(windows), batch_size):
        out = forward(cfg, ckpt.params, windows.X[lo:lo + batch_size], windows.Y[lo:lo + batch_size], trace=True)
        for tr in out.traces:
            B, steps, items = tr.weights.shape
            for b in range(B):
                for t in range(steps):
                    for k in range(items):
                        yield lo + b, tr.phase, t + 1, k + 1, float(tr.weights[b, t, k])


def export_attention(ckpt: Checkpoint, windows: WindowSet, path: str | Path) -> int:
    """Write the attention trace CSV; returns the number of data rows."""
    rows = attention_rows(ckpt, windows)
    first = next(rows)  # raises before the file is created for unsupported architectures
    count = 0
    with open(path, "w") as fh:
        fh.write("window,phase,step,index,weight\n")
        for w, phase, t, k, v in itertools.chain([first], rows):
            fh.write(f"{w},{phase},{t},{k},{v:.17g}\n")
            count += 1
    return count


def read_attention(path: str | Path) -> list[tuple]:
    out = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            w, phase, t, k, v = line.rstrip("\n").split(",")
            out.append((int(w), phase, int(t), int(k), float(v)))
    return out


# ---------------------------------------------------------------------------
# grids


ABLATION_SUFFIX = "-nt"  # "dstp-nt": no target row in the last spatial phase


def parse_arch(token: str) -> tuple[str, bool]:
    if token.endswith(ABLATION_SUFFIX):
        return token[: -len(ABLATION_SUFFIX)], False
    return token, True


@dataclass
class ExperimentGrid:
    archs: list[str]
    horizons: list[int] = field(default_factory=lambda: list(HORIZONS))
    windows: list[int] = field(default_factory=lambda: [5, 10])
    hidden: int = 128
    seed: int = 2019

    def jobs(self) -> list[tuple[str, int, int]]:
        return [(a, h, w) for a in self.archs for h in self.horizons for w in self.windows]

    def validate(self, train_rows: int, test_rows: int) -> None:
        for a in self.archs:
            ModelConfig(parse_arch(a)[0], 1, 1, 1)  # raises on unknown names
        for h, w in itertools.product(self.horizons, self.windows):
            if w + h > test_rows or w + h > train_rows:
                raise ConfigurationError(f"window {w} + horizon {h} does not fit the dataset splits")


def _label(arch_token: str, window: int, horizon: int) -> str:
    return f"{arch_token}_T{window}_tau{horizon}"


def run_job(arch_token: str, horizon: int, window: int, train_tab: Table, test_tab: Table, stats,
            dataset: str, grid: ExperimentGrid, train_cfg: TrainConfig, out_dir: Path | None):
    arch, with_target = parse_arch(arch_token)
    label = _label(arch_token, window, horizon)
    start = time.perf_counter()
    try:
        model = ModelConfig.uniform(arch, train_tab.n_exog, window, horizon, grid.hidden, seed=grid.seed,
                                    target_in_last_phase=with_target)
        ckpt, history = train(model, make_windows(train_tab, window, horizon), train_cfg, stats)
        ckpt_path = ""
        if out_dir is not None:
            ckpt_path = str(out_dir / f"{label}.ckpt")
            save_checkpoint(ckpt, ckpt_path)
            write_history(history, out_dir / f"{label}_history.csv")
        preds_path = out_dir / f"{label}_predictions.csv" if out_dir is not None else None
        report, per_h = evaluate(ckpt, make_windows(test_tab, window, horizon), dataset, preds_path, ckpt_path)
        report.arch = arch_token
        report.seconds = time.perf_counter() - start
        return report, per_h
    except Exception as exc:  # one failing job must not stop the grid
        log.error("job %s failed: %s", label, exc)
        log.debug(traceback.format_exc())
        status = "failed: " + str(exc).replace("\n", " ").replace(",", ";")
        return ForecastReport(dataset, arch_token, window, horizon, float("nan"), float("nan"), 0,
                              status=status, seconds=time.perf_counter() - start), None


def run_grid(spec: DatasetSpec, grid: ExperimentGrid, train_cfg: TrainConfig, out_dir=None,
             workers: int = 1, table: Table | None = None) -> list[ForecastReport]:
    """Train and evaluate every (architecture, horizon, window) combination.

    Reports come back in grid order regardless of ``workers``.  When ``out_dir``
    is given, checkpoints, histories, predictions and the summary CSVs are written there.
    """
    table = load(spec) if table is None else table
    train_tab, test_tab, stats = split_and_standardize(table, spec.train_size, spec.test_size)
    grid.validate(len(train_tab), len(test_tab))
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    args = [(a, h, w, train_tab, test_tab, stats, spec.name, grid, train_cfg, out_dir) for a, h, w in grid.jobs()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_job, *zip(*args)))
    else:
        results = [run_job(*a) for a in args]
    reports = [r for r, _ in results]
    if out_dir is not None:
        write_reports(reports, out_dir / "report.csv")
        write_table(reports, out_dir / "table.csv")
        write_horizon_curves(reports, out_dir / "horizon_curves.csv")
        write_per_horizon(results, out_dir / "per_horizon.csv")
        with open(out_dir / "timings.csv", "w") as fh:
            fh.write("arch,window,horizon,seconds\n")
            for r in reports:
                fh.write(f"{r.arch},{r.window},{r.horizon},{r.seconds:.3f}\n")
    return reports


def best_over_windows(reports: list[ForecastReport]) -> dict[tuple[str, int], ForecastReport]:
    """Best (lowest test RMSE) report per (architecture, horizon) across window sizes."""
    best: dict[tuple[str, int], ForecastReport] = {}
    for r in reports:
        if r.status != "ok":
            continue
        key = (r.arch, r.horizon)
        if key not in best or r.rmse < best[key].rmse:
            best[key] = r
    return best


def write_table(reports: list[ForecastReport], path) -> None:
    """Method rows with an RMSE line then an MAE line; one column per horizon."""
    best = best_over_windows(reports)
    archs = list(dict.fromkeys(r.arch for r in reports))
    horizons = sorted({r.horizon for r in reports})
    with open(path, "w") as fh:
        fh.write("method,metric," + ",".join(f"tau={h}" for h in horizons) + "\n")
        for a in archs:
            for metric in ("rmse", "mae"):
                cells = [f"{getattr(best[(a, h)], metric):.17g}" if (a, h) in best else "" for h in horizons]
                fh.write(f"{a},{metric}," + ",".join(cells) + "\n")


def write_horizon_curves(reports: list[ForecastReport], path) -> None:
    best = best_over_windows(reports)
    with open(path, "w") as fh:
        fh.write("arch,horizon,window,rmse,mae\n")
        for (a, h), r in sorted(best.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            fh.write(f"{a},{h},{r.window},{r.rmse:.17g},{r.mae:.17g}\n")


def write_per_horizon(results, path) -> None:
    with open(path, "w") as fh:
        fh.write("arch,window,horizon,step,rmse,mae\n")
        for report, per_h in results:
            if per_h is None:
                continue
            for j, (r, m) in enumerate(per_h, start=1):
                fh.write(f"{report.arch},{report.window},{report.horizon},{j},{r:.17g},{m:.17g}\n")
