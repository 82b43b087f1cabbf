#!/usr/bin/env python3
"""Check the geometric rate certificates on random scalar instances.

For each instance the three per-round error envelopes (second-marginal
variance, mean, coupling coefficient) are compared against the certified
alpha/beta powers for 50 rounds, then the correlation is iterated to 500
rounds and compared with its closed-form limit.  Exits nonzero on any
violation.
"""

import sys
from pathlib import Path

from ipmf.cli import main

if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "results" / "rates"
    args = ["verify-rates", "--instances", "200", "--seed", "0",
            "--out", str(out)]
    raise SystemExit(main(args + sys.argv[1:]))
