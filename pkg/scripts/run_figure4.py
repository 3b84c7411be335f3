"""Mean transmission probability per radius bucket at N=50 (writes fig4.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["figure4", "--n", "50", "--topologies", "1000", "--buckets", "8",
                   "--out", "results/figure4", *sys.argv[1:]]))
