"""
fedpoison Test Suite

Unit and integration tests for the federated poisoning simulator.
Acceptance experiments are marked `acceptance` and run with `pytest -m acceptance`.
"""
