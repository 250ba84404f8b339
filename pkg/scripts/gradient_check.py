"""Finite-difference check of every parameter gradient for each architecture on a tiny instance."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from dstp.models import ARCHITECTURES, ModelConfig, init_params  # noqa: E402
from oracles import model_gradient_errors, tiny_instance  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--archs", nargs="+", default=list(ARCHITECTURES))
    ap.add_argument("--hidden", type=int, default=5)
    ap.add_argument("--seed", type=int, default=2019)
    args = ap.parse_args()

    X, Y, F = tiny_instance(seed=args.seed)
    for arch in args.archs:
        config = ModelConfig.uniform(arch, 3, 4, 2, hidden=args.hidden, seed=args.seed)
        errors = model_gradient_errors(config, init_params(config), X, Y, F)
        name, (rel, _) = max(errors.items(), key=lambda kv: kv[1][0])
        ab = max(a for _, a in errors.values())
        print(f"{arch:>10}  params {init_params(config).count():>5}  max rel {rel:.2e} ({name})  max abs {ab:.2e}")


if __name__ == "__main__":
    main()
