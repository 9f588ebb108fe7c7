"""Solvers and verification tools for ergodic risk-sensitive control.

Subpackages by concern:

    model       controlled diffusions, costs, structural checks
    discretize  grids and conservative generator matrices
    eigensolve  principal eigenpairs of cost-twisted generators
    hjb         multiplicative HJB equation by policy iteration
    game        ergodic zero-sum game with an auxiliary drift
    perturb     inf-compact perturbations; eps -> 0 and kappa -> 0 limits
    simulate    Euler-Maruyama paths and Monte Carlo estimators
    variational Gibbs-formula oracles and drift-family checks
    cli         command-line orchestration
"""

__version__ = "0.1.0"
