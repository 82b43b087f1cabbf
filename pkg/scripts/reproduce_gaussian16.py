#!/usr/bin/env python3
"""Reproduce the 16-dimensional Gaussian convergence experiment.

Runs the three standard starting couplings (independent product, prior
process, independent p0->p0) on the same randomly drawn covariance pair
(D = 16, eps = 0.3, 100 rounds) and writes one CSV trace per start plus
a comparison report under results/.
"""

import sys
from pathlib import Path

from ipmf.cli import main

if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "results" / "gaussian16"
    args = ["compare-starts", "--dim", "16", "--epsilon", "0.3",
            "--rounds", "100", "--seed", "0", "--out", str(out)]
    raise SystemExit(main(args + sys.argv[1:]))
