"""Regularity-criterion quantities evaluated along solver trajectories.

Everything here is post-processing of a :class:`~hessnse.solver.Trajectory`.
Hessian-pair norms come from the cached sample diagnostics when present
and are recomputed from stored snapshots otherwise (or on request).
The window terminus is the last recorded sample, which is the run's end
time or the last finite state before a discrete blow-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .norms import (
    INF,
    MixedNormAccumulator,
    _check_triple,
    criterion_alpha,
    hessian_key,
    hessian_pair_norms,
    lebesgue_norm,
    serrin_alpha,
    serrin_key,
    trapezoid,
)
from .solver import Trajectory, l2_diagnostics


class MissingDiagnostics(ValueError):
    """A sample has neither the cached norm nor a snapshot to compute it from."""


@dataclass(frozen=True)
class CriterionConfig:
    betas: tuple = (2.0,)
    triple: tuple = (1, 2, 3)
    tau: float = 0.0
    epsilon: float = 0.1
    serrin_betas: tuple = (INF,)

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "serrin_betas", tuple(float(b) for b in self.serrin_betas))
        object.__setattr__(self, "triple", _check_triple(self.triple))
        for b in self.betas:
            criterion_alpha(b)
        for b in self.serrin_betas:
            serrin_alpha(b)
        if not self.epsilon > 0:
            raise ValueError("smallness threshold must be positive")


@dataclass(frozen=True)
class BetaResult:
    beta: float
    alpha: float
    integral: float
    mixed_norm: float
    component_integrals: tuple
    smallness: float
    verdict: bool
    series: tuple


@dataclass(frozen=True)
class CriterionReport:
    config: CriterionConfig
    times: tuple
    per_beta: dict
    serrin: dict
    window_end: float
    blowup: bool
    gronwall: dict = field(default_factory=dict)


def _snapshot_samples(traj: Trajectory) -> list:
    samples = traj.snapshot_samples()
    if not samples:
        raise MissingDiagnostics("trajectory has no snapshot samples")
    return samples


def hessian_series(traj: Trajectory, beta: float, triple: Sequence[int] = (1, 2, 3),
                   part: str = "joint", *, recompute: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(times, ||pair||_beta) over the snapshot samples."""
    key = hessian_key(triple, beta, part)
    idx = {"joint": 0, "c1": 1, "c2": 2}[part]
    times, values = [], []
    for s in _snapshot_samples(traj):
        if not recompute and key in s.diagnostics:
            v = s.diagnostics[key]
        elif s.snapshot is not None:
            v = hessian_pair_norms(s.snapshot, [beta], triple)[beta][idx]
        else:
            raise MissingDiagnostics(f"sample at t={s.t!r} lacks {key} and has no snapshot")
        times.append(s.t)
        values.append(v)
    return np.array(times), np.array(values)


def _l2_series(traj: Trajectory, key: str, *, recompute: bool = False) -> np.ndarray:
    out = []
    for s in _snapshot_samples(traj):
        if (recompute or key not in s.diagnostics) and s.snapshot is not None:
            u = s.snapshot
            out.append(l2_diagnostics(u.spectral * u.grid.dealias_mask, u.grid)[key])
        elif key in s.diagnostics:
            out.append(s.diagnostics[key])
        else:
            raise MissingDiagnostics(f"sample at t={s.t!r} lacks {key}")
    return np.array(out)


def _time_integral(times: np.ndarray, values: np.ndarray, alpha: float) -> float:
    acc = MixedNormAccumulator(alpha)
    for t, v in zip(times, values):
        acc.append(t, v)
    return acc.integral


def smallness_window(traj: Trajectory, tau: float, beta: float, epsilon: float,
                     triple: Sequence[int] = (1, 2, 3), *, recompute: bool = False) -> dict:
    """Trapezoid integral over [tau, end] of ||pair||_beta^alpha + ||grad u||_2^2."""
    times, hess = hessian_series(traj, beta, triple, recompute=recompute)
    grad = _l2_series(traj, "grad_l2", recompute=recompute)
    if not times[0] <= tau <= times[-1]:
        raise ValueError(f"tau={tau!r} outside [{times[0]!r}, {times[-1]!r}]")
    alpha = criterion_alpha(beta)
    quantity = _window_trapezoid(times, hess**alpha + grad**2, tau)
    return {"quantity": quantity, "verdict": bool(quantity < epsilon), "tau": tau,
            "end": float(times[-1])}


def _window_trapezoid(times: np.ndarray, values: np.ndarray, tau: float) -> float:
    # Linear interpolation places tau between samples.
    if tau >= times[-1]:
        return 0.0
    start = int(np.searchsorted(times, tau, side="right"))
    v_tau = float(np.interp(tau, times, values))
    t = np.concatenate([[tau], times[start:]])
    v = np.concatenate([[v_tau], values[start:]])
    return trapezoid(t, v)


def serrin_baseline(traj: Trajectory, beta: float, *, recompute: bool = False) -> float:
    """Integral of ||u||_beta^alpha with 2/alpha + 3/beta = 1; sup of ||u||_3 at beta = 3."""
    alpha = serrin_alpha(beta)
    key = serrin_key(beta)
    times, values = [], []
    for s in _snapshot_samples(traj):
        if not recompute and key in s.diagnostics:
            v = s.diagnostics[key]
        elif s.snapshot is not None:
            v = lebesgue_norm(s.snapshot, beta)
        else:
            raise MissingDiagnostics(f"sample at t={s.t!r} lacks {key} and has no snapshot")
        times.append(s.t)
        values.append(v)
    return _time_integral(np.array(times), np.array(values), alpha)


def gronwall_diagnostics(traj: Trajectory, beta: float = 2.0, *, recompute: bool = False) -> dict:
    """Ingredients of the differential inequality for ||grad_h u||_2^2, per interval.

    Returned arrays have one entry per pair of consecutive snapshot samples:
    ``growth`` = finite-difference d/dt ||grad_h u||^2; ``dissipation`` =
    nu ||grad grad_h u||^2; ``lhs`` = growth + dissipation; ``driver`` =
    ||grad_h u||^2 ||grad u|| ||(d_1, d_2) d_3 u_3||_beta^{beta/(2(beta-1))}.
    Midpoint values are interval averages. ``ratio`` = lhs / driver is the
    empirical constant the inequality would need on that interval (0 when
    both vanish or lhs <= 0 with zero driver, inf when only the driver
    vanishes).
    """
    samples = _snapshot_samples(traj)
    if len(samples) < 3:
        raise ValueError("gronwall diagnostics need at least 3 snapshots")
    times, hess = hessian_series(traj, beta, (1, 2, 3), recompute=recompute)
    gh = _l2_series(traj, "gradh_l2", recompute=recompute)
    g = _l2_series(traj, "grad_l2", recompute=recompute)
    ggh = _l2_series(traj, "grad_gradh_l2", recompute=recompute)
    nu = traj.grid.nu
    power = 0.5 if beta == INF else beta / (2.0 * (beta - 1.0))
    dt = np.diff(times)
    growth = np.diff(gh**2) / dt
    dissipation = 0.5 * nu * (ggh[1:] ** 2 + ggh[:-1] ** 2)
    drv = gh**2 * g * hess**power
    driver = 0.5 * (drv[1:] + drv[:-1])
    lhs = growth + dissipation
    ratio = np.empty_like(lhs)
    for m in range(lhs.size):
        if driver[m] > 0:
            ratio[m] = lhs[m] / driver[m]
        else:
            ratio[m] = 0.0 if lhs[m] <= 0 else math.inf
    return {
        "t_mid": 0.5 * (times[1:] + times[:-1]),
        "growth": growth,
        "dissipation": dissipation,
        "lhs": lhs,
        "driver": driver,
        "ratio": ratio,
    }


def evaluate_criterion(traj: Trajectory, config: CriterionConfig, *,
                       recompute: bool = False, gronwall: bool = True) -> CriterionReport:
    per_beta = {}
    times = None
    for beta in config.betas:
        alpha = criterion_alpha(beta)
        times, joint = hessian_series(traj, beta, config.triple, recompute=recompute)
        comps = tuple(
            _time_integral(times, hessian_series(traj, beta, config.triple, part,
                                                 recompute=recompute)[1], alpha)
            for part in ("c1", "c2")
        )
        integral = _time_integral(times, joint, alpha)
        mixed = integral ** (1.0 / alpha)
        window = smallness_window(traj, config.tau, beta, config.epsilon, config.triple,
                                  recompute=recompute)
        per_beta[beta] = BetaResult(beta, alpha, integral, mixed, comps, window["quantity"],
                                    window["verdict"], tuple(joint))
    serrin = {b: serrin_baseline(traj, b, recompute=recompute) for b in config.serrin_betas}
    extra = {}
    if gronwall and len(traj.snapshot_samples()) >= 3 and config.triple == (1, 2, 3):
        extra = {beta: gronwall_diagnostics(traj, beta, recompute=recompute)
                 for beta in config.betas}
    return CriterionReport(config, tuple(times), per_beta, serrin, float(times[-1]),
                           traj.blowup, extra)


def summary_text(report: CriterionReport) -> str:
    cfg = report.config
    lines = [
        f"index triple: {cfg.triple}",
        f"window: tau={cfg.tau!r} to end={report.window_end!r}"
        + (" (terminated by discrete blow-up)" if report.blowup else ""),
        f"snapshot samples: {len(report.times)}",
    ]
    for beta, res in report.per_beta.items():
        lines.append(
            f"beta={beta!r} alpha={res.alpha!r}: integral={res.integral:.6e} "
            f"mixed_norm={res.mixed_norm:.6e} components=({res.component_integrals[0]:.6e}, "
            f"{res.component_integrals[1]:.6e}) smallness={res.smallness:.6e} "
            f"{'<' if res.verdict else '>='} epsilon={cfg.epsilon!r}"
        )
    for beta, val in report.serrin.items():
        lines.append(f"serrin beta={beta!r} alpha={serrin_alpha(beta)!r}: {val:.6e}")
    return "\n".join(lines) + "\n"
