"""Network-average normalized age versus N for every policy (writes fig3.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["figure3", "--sizes", "5,10,20,50,100,200", "--topologies", "100",
                   "--out", "results/figure3", *sys.argv[1:]]))
