"""Deviation of the proportionally fair policy from its topology-agnostic approximation (writes ta_convergence.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["ta-convergence", "--sizes", "25,50,100,200,400", "--topologies", "200",
                   "--out", "results/ta_convergence", *sys.argv[1:]]))
