"""Desk-scale SML2010 comparison at tau=30: dstp, darnn and enc-dec, best over T in {5, 10}.

    python scripts/reproduce_sml2010.py --data-path data/sml2010/NEW-DATA-1.T15.txt --out results/sml2010
"""
import argparse
import os
from pathlib import Path

from dstp.config import load_config
from dstp.data import load
from dstp.evaluation import ExperimentGrid, best_over_windows, run_grid

ROOT = Path(__file__).resolve().parents[1]
PUBLISHED = {"dstp": 0.0987, "darnn": 0.2080, "enc-dec": 0.2537}  # test RMSE, tau = 30


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=str(ROOT / "configs" / "sml2010.ini"))
    ap.add_argument("--data-path")
    ap.add_argument("--out", default="results/sml2010_tau30")
    ap.add_argument("--hidden", type=int, default=64, help="hidden size of every unit (128 at full scale)")
    ap.add_argument("--horizon", type=int, default=30)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    spec = cfg.dataset
    if args.data_path:
        spec.path = args.data_path
    table = load(spec)
    grid = ExperimentGrid(list(PUBLISHED), horizons=[args.horizon], windows=[5, 10], hidden=args.hidden)
    out = Path(args.out)
    reports = run_grid(spec, grid, cfg.train, out, workers=args.workers, table=table)
    (out / "reduction.txt").write_text(f"hidden size {args.hidden} for all recurrent units "
                                       f"(full scale uses {cfg.grid.hidden if cfg.grid else 128})\n")

    best = best_over_windows(reports)
    print(f"{'method':>8}  {'T':>3}  {'RMSE':>8}  {'MAE':>8}  published RMSE")
    for arch in PUBLISHED:
        r = best.get((arch, args.horizon))
        if r is None:
            print(f"{arch:>8}  failed")
            continue
        ref = PUBLISHED[arch] if args.horizon == 30 else float("nan")
        print(f"{arch:>8}  {r.window:>3}  {r.rmse:8.4f}  {r.mae:8.4f}  {ref:.4f}")


if __name__ == "__main__":
    main()
