"""Multi-task classification benchmark across all four solvers.

Generates a synthetic multi-class dataset whose class prototypes live in
a shared low-dimensional subspace, carves it into overlapping 3-class
tasks, and compares local ELMs, the centralized multi-task solver and
both decentralized variants over repeated draws.  Prints the mean and
standard deviation of the testing error per solver.
"""

import argparse
import csv
import statistics
from pathlib import Path

from mtelm import cli
from mtelm.data import make_prototype_dataset, save_dataset

SOLVERS = ("local-elm", "mtl-elm", "dmtl-elm", "fo-dmtl-elm")
MU = repr(10.0 ** 0.5)


def solver_flags(solver):
    common = ["--rho", "1", "--delta", "100", "--k-max", "100"]
    if solver == "dmtl-elm":
        return common + ["--prox", "standard", "--tau", "10+degree", "--zeta", "30"]
    if solver == "fo-dmtl-elm":
        return common + ["--prox", "standard", "--tau", "30+degree", "--zeta", "40"]
    return ["--k-max", "100"]


def read_errors(run_dir):
    with open(Path(run_dir) / "results.csv", newline="") as fh:
        return [float(row["testing_error"]) for row in csv.DictReader(fh)]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="runs/benchmark")
    parser.add_argument("--repetitions", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data_path = Path(args.output) / "prototype.csv"
    data_path.parent.mkdir(parents=True, exist_ok=True)
    x, labels = make_prototype_dataset(
        10, 60, ambient_dim=64, subspace_dim=6, noise=0.8, seed=args.seed
    )
    save_dataset(data_path, x, labels)

    base = [
        "--data", "dataset", "--dataset", str(data_path), "--m", "10",
        "--hidden", "300", "--rank", "4", "--train-per-class", "30",
        "--test-per-class", "15", "--mu1", MU, "--mu2", MU,
        "--seeds", str(args.seed), "--repetitions", str(args.repetitions),
    ]
    for solver in SOLVERS:
        run_dir = f"{args.output}/{solver}"
        status = cli.main([
            "run", "--solver", solver, "--output", run_dir,
            *base, *solver_flags(solver),
        ])
        if status:
            raise SystemExit(status)

    print()
    print(f"{'solver':<14} {'test error':>12} {'std':>10}")
    for solver in SOLVERS:
        errors = read_errors(f"{args.output}/{solver}")
        spread = statistics.pstdev(errors) if len(errors) > 1 else 0.0
        print(f"{solver:<14} {statistics.mean(errors):>12.4f} {spread:>10.4f}")


if __name__ == "__main__":
    main()
