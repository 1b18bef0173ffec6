"""Allow running the command line interface as ``python3 -m vfmlab``."""

import sys

from vfmlab.cli import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
