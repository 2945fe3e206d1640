"""
Module/Script Name: __init__.py
Path: fedpoison/__init__.py

Description:
fedpoison package - deterministic federated learning simulator for local model
poisoning attacks and the robust aggregation defenses they target.

This package provides:
- A small NumPy multilayer perceptron with exact gradients (nn_core)
- Synthetic blob datasets and IID / Dirichlet client partitions (data)
- FedAvg, KRUM, Trimmed Mean and DOS/COPOD aggregation (aggregation)
- DISBELIEVE on parameters and gradients, LIE, Min-Max, noise, scaling and
  label flipping attacks (attacks)
- Round orchestration in parameter and gradient modes (federation)
- Rank-statistic ROC-AUC (metrics)
- Config parsing, CSV reporting and a command line front end

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial release
"""

__version__ = "1.0.0"
__all__ = [
    "aggregation",
    "attacks",
    "cli",
    "config_schema",
    "config_store",
    "data",
    "errors",
    "federation",
    "metrics",
    "nn_core",
    "reporting",
    "utils",
]
