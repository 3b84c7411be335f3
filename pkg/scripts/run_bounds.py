"""Lower/min-max/upper age bounds over random topologies (writes bounds.csv)."""
import sys

from spatial_aoi.cli import main

if __name__ == "__main__":
    sys.exit(main(["bounds", "--sizes", "10,25,50,100", "--topologies", "100",
                   "--out", "results/bounds", *sys.argv[1:]]))
