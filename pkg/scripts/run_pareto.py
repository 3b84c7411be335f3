"""Two-node Pareto boundary of achievable ages (writes pareto.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["pareto", "--symmetric", "1.0", "--n", "2", "--out", "results/pareto",
                   *sys.argv[1:]]))
