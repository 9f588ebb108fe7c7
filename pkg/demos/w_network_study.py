"""The W parallel-server network in the heavy-traffic limit.

Three job classes, two server pools, scheduling controls on a product of
simplices.  The queueing cost c . (e.x)^+ u^c is coercive only where the
total queue |e.x| is a definite fraction of |x|, which is exactly the mixed
structural situation the solver stack is built for: the drift inequalities
are certified pointwise with an exponential-quadratic Lyapunov candidate,
and the optimal risk-sensitive value is computed on a truncated 3D grid.

Grid sizes here are kept small so the script runs in seconds; push the
counts up for production numbers.
"""

import numpy as np

from ersc.discretize import build_grid
from ersc.hjb import solve_hjb
from ersc.model import QuadraticLyapLog, builtin_w_network, check_assumptions

MU = np.array([[1.0, 0.0], [1.0, 2.0], [0.0, 1.5]])  # class-by-pool rates
MODEL = builtin_w_network(
    arrival_rates=[1.0, 1.0, 1.0],
    service_rates=MU,
    l_vec=[-0.5, -0.5, -0.5],
    cost_weights=[1.0, 2.0, 3.0],
    n_controls=1,
)


def certify_assumptions():
    print("== pointwise drift-inequality certification ==")
    lyap = QuadraticLyapLog(np.diag([0.2, 0.1, 0.1]))
    hbar = lambda x, u: 0.05 * np.sum(np.asarray(x) ** 2, axis=-1)
    grid = build_grid([4.0] * 3, [13] * 3)
    samples = [(x, u) for x in grid.coords()[::5] for u in MODEL.controls.points]
    rep = check_assumptions(MODEL, lyap, hbar, (1.25, 5.5, 0.5), samples)
    print(f"  checked {rep.checked_points} (x, u) pairs on the box")
    print(f"  violations: {len(rep.violations)}, worst slack: {rep.worst_slack:.4f}")
    print("  constants: C1 = 1.25, C2 = 5.5, C3 = 0.5 with K = {|e.x| > 0.2 |x|}")


def solve_small_grid():
    print("\n== risk-sensitive control on a coarse 3D grid ==")
    grid = build_grid([4.0] * 3, [15] * 3)
    sol = solve_hjb(MODEL, grid, tol=1e-7, max_iter=40)
    print(f"  nodes: {grid.n_nodes}, controls: {MODEL.controls.n_controls}")
    print(f"  Lambda = {sol.value:.6f}  residual = {sol.residual:.1e}")
    print(f"  policy-iteration history: {[round(v, 5) for v in sol.history]}")
    counts = np.bincount(sol.policy.assignment, minlength=MODEL.controls.n_controls)
    for u, c in zip(MODEL.controls.points, counts):
        if c:
            print(f"  control (u^c | u^s) = {u[:3]} | {u[3:]} active on {c} nodes")


if __name__ == "__main__":
    certify_assumptions()
    solve_small_grid()
