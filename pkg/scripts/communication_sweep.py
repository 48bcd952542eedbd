"""Communication cost of the decentralized solver across budget grids.

Sweeps iteration count and hidden width on a prototype dataset, printing
scalars exchanged per iteration, the total-transmission ratio relative
to sending all raw samples to a center, and the resulting testing error.
Results also land in ``<output>/sweep.csv``.
"""

import argparse
from pathlib import Path

from mtelm import cli
from mtelm.data import make_prototype_dataset, save_dataset

MU = repr(10.0 ** 0.5)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="runs/comm-sweep")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k-list", default="25,50,100")
    parser.add_argument("--hidden-list", default="100,200,300")
    args = parser.parse_args()

    data_path = Path(args.output) / "prototype.csv"
    data_path.parent.mkdir(parents=True, exist_ok=True)
    x, labels = make_prototype_dataset(
        10, 60, ambient_dim=64, subspace_dim=6, noise=0.8, seed=args.seed
    )
    save_dataset(data_path, x, labels)

    status = cli.main([
        "sweep", "--solver", "dmtl-elm", "--data", "dataset",
        "--dataset", str(data_path), "--m", "10", "--hidden", "300",
        "--rank", "4",
        "--train-per-class", "30", "--test-per-class", "15",
        "--mu1", MU, "--mu2", MU, "--rho", "1", "--delta", "100",
        "--prox", "standard", "--tau", "10+degree", "--zeta", "30",
        "--seeds", str(args.seed), "--output", args.output,
        "--k-list", args.k_list, "--hidden-list", args.hidden_list,
    ])
    raise SystemExit(status)


if __name__ == "__main__":
    main()
