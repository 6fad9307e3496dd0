"""Pseudospectral Navier-Stokes on the 3-torus with a Hessian-pair regularity monitor.

The package has three layers:

* ``fields``, ``norms``: periodic fields, spectral derivatives, Lebesgue and
  mixed space-time norms.
* ``identities``, ``inequalities``: numerical certification of the
  trilinear identities and anisotropic inequalities behind the criterion.
* ``solver``, ``monitor``: an IF-RK4 pseudospectral solver and evaluation
  of the criterion quantities along its trajectories.
"""

__version__ = "0.1.0"

from .fields import (
    FIELD_KINDS,
    GridSpec,
    ScalarField,
    VectorField,
    generate_test_field,
    leray_project,
    make_grid,
)
from .identities import (
    IdentityReport,
    i2_rewrite_residual,
    i3_rewrite_residual,
    k2_rewrite_residual,
    kukavica_ziane_residual,
    nonlinear_h_decomposition_residual,
)
from .inequalities import (
    BumpFamily,
    InequalityReport,
    estimate_constant,
    j_estimate_exponents,
    lemma22_report,
    lemma23_report,
)
from .monitor import CriterionConfig, evaluate_criterion, smallness_window
from .norms import (
    ExponentPair,
    MixedNormAccumulator,
    criterion_alpha,
    hessian_pair_norms,
    lebesgue_norm,
    serrin_alpha,
)
from .solver import (
    BlowupError,
    CFLViolation,
    SolverState,
    Trajectory,
    energy_report,
    integrate,
    recover_pressure,
    step,
    temporal_convergence,
)

__all__ = [name for name in dir() if not name.startswith("_")]
