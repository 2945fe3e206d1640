"""
Module/Script Name: run_sim.py

Description:
Launcher for the fedpoison command line. Equivalent to `python -m fedpoison`.

Examples:
    python run_sim.py run --config config/default.conf --seed 0 --out results
    python run_sim.py sweep --config config/default.conf --attacks none,disbelieve,lie \
        --defenses dos,krum --seeds 0,1,2 --out results/sweep --jobs 4
    python run_sim.py plot --csv results/run_*.csv --out results/auc.png

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

import sys

from fedpoison.cli import main

if __name__ == "__main__":
    sys.exit(main())
