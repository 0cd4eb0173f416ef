"""Numerical cross-checks: layer-potential estimates, small-lambda limit, time stepping, particle convergence."""
