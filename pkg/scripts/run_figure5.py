"""Normalized age per radius bucket at N=50 with baseline ALOHA, analytic and simulated (writes fig5.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["figure5", "--n", "50", "--topologies", "200", "--buckets", "8",
                   "--aloha-p", "0.04", "--horizon", "100000",
                   "--out", "results/figure5", *sys.argv[1:]]))
