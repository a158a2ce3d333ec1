"""Run the five-model toy experiment and print the score tables.

    python3 scripts/run_experiment.py --config configs/toy.yaml --out runs/toy
"""
import argparse
import logging

from pivotmt.config import load_config
from pivotmt.experiment import run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default="configs/toy.yaml")
    ap.add_argument("--out", default="runs/toy")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    table = run_experiment(load_config(args.config), args.out, jobs=args.jobs)
    print(table.render_tables())


if __name__ == "__main__":
    main()
