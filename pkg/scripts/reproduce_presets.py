"""Run every preset at its default size and write one CSV per preset."""
import argparse
import time
from pathlib import Path

from fecsim import scenarios


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--seed", type=int, default=scenarios.DEFAULT_SEED)
    parser.add_argument("--replications", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("presets", nargs="*", default=list(scenarios.PRESETS))
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.presets:
        start = time.perf_counter()
        result = scenarios.run_preset(name, seed=args.seed, replications=args.replications, workers=args.workers)
        path = args.out / f"{name}.csv"
        path.write_text(result.to_csv(), encoding="utf-8")
        print(f"{name}: {path} ({time.perf_counter() - start:.1f}s)")
        print(result.to_table())


if __name__ == "__main__":
    main()
