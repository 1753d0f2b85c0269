#!/usr/bin/env python3
"""Price the monthly-monitored up-and-in barrier call experiment.

Equivalent to ``pathfunc price configs/monthly_barrier.cfg``; kept as a script so the
experiment is runnable and hackable without the CLI.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from pathfunc.cli import main

if __name__ == "__main__":
    cfg = os.path.join(os.path.dirname(__file__), os.pardir, "configs", "monthly_barrier.cfg")
    sys.exit(main(["price", cfg] + sys.argv[1:]))
