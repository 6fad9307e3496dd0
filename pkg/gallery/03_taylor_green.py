"""
Solver validation against the decaying Taylor-Green vortex.

The 2D Taylor-Green flow is an exact Navier-Stokes solution whose
nonlinear term is a pure gradient, so the solver must reproduce
u(t) = u(0) e^{-2 nu t}. A 3D Taylor-Green start has no closed form; its
temporal order is measured against a run with a much smaller step.
"""
import math

from hessnse import energy_report, generate_test_field, integrate, make_grid, temporal_convergence
from hessnse.norms import lebesgue_norm
from hessnse.solver import taylor_green_exact

grid = make_grid(32, 0.1)
u0 = generate_test_field("taylor_green_2d", 0, grid)
traj = integrate(u0, 1e-3, 1.0, snapshot_stride=1000, keep_snapshots=True)

final = traj.samples[-1].snapshot
err = lebesgue_norm([a - b for a, b in zip(final, taylor_green_exact(grid, 1.0))], 2)
print(f"L2 error at t=1: {err:.3e}")
rep = energy_report(traj, 0.0, 1.0)
print(f"energy balance relative defect: {rep.relative_defect:.3e}")
print(f"energy ratio {traj.series('u_l2')[-1] / traj.series('u_l2')[0]:.12f}"
      f" vs e^(-0.2) = {math.exp(-0.2):.12f}")

study = temporal_convergence("taylor_green_3d", n=16, nu=0.1, t_end=0.5,
                             dts=(0.05, 0.025, 0.0125))
for dt, e in zip(study.dts, study.errors):
    print(f"dt={dt:<8} error={e:.3e}")
print(f"fitted order: {study.order:.3f}")
