"""
The Hessian-pair criterion along three trajectories.

The criterion inspects only d1 d3 u3 and d2 d3 u3. A Taylor-Green flow has
no x3 dependence, so the quantity vanishes while the gradient does not.
The ABC flow has each u_i independent of x_i, which also kills the pair:
exactly at t=0, and to rounding afterwards. A random solenoidal flow sees
the generic value. The Serrin integral and the smallness window are
reported alongside.
"""
import math

from hessnse import CriterionConfig, evaluate_criterion, generate_test_field, integrate, make_grid
from hessnse.monitor import gronwall_diagnostics

INF = math.inf
cfg = CriterionConfig(betas=(2.0, INF), tau=0.5, epsilon=0.1)

for kind, nu in (("taylor_green_2d", 0.1), ("abc_flow", 0.1), ("random_solenoidal", 0.05)):
    grid = make_grid(16, nu)
    u0 = generate_test_field(kind, 0, grid)
    traj = integrate(u0, 5e-3, 1.0, snapshot_stride=10, betas=cfg.betas)
    report = evaluate_criterion(traj, cfg)
    print(f"{kind}: ||grad u||_2 at t=0 = {traj.series('grad_l2')[0]:.4f}")
    for beta, res in report.per_beta.items():
        print(f"  beta={beta}: int ||pair||^alpha dt = {res.integral:.3e}"
              f"  smallness on [0.5, 1] = {res.smallness:.3e}")
    print(f"  Serrin L^2 L^inf integral = {report.serrin[INF]:.4f}")
    # Intervals with lhs <= 0 satisfy the inequality for any constant.
    g = gronwall_diagnostics(traj, 2.0)
    active = g["ratio"][g["lhs"] > 0]
    if active.size:
        print(f"  largest empirical Gronwall ratio = {active.max():.3e} ({active.size} intervals)")
    else:
        print("  Gronwall lhs <= 0 on every interval")
