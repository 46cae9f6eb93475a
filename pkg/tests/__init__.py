"""
Test package for the quantum Frank-Wolfe emulation.

This package contains tests for the solvers, oracles, cost model and experiment tooling.
"""
