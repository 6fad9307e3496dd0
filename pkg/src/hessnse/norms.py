"""Lebesgue norms on the cell and mixed space-time norms.

Spatial integrals use the rectangle rule, which is spectrally accurate
for periodic band-limited integrands. Time integrals use the trapezoid
rule on whatever instants a trajectory was sampled at.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fields import ScalarField, VectorField, hessian_entry

INF = math.inf

HESSIAN_CRITERION = "hessian_criterion"
SERRIN = "serrin"


def _magnitude(f) -> tuple[np.ndarray, float]:
    if isinstance(f, ScalarField):
        return np.abs(f.values), f.grid.quadrature_weight
    comps = list(f.components) if isinstance(f, VectorField) else list(f)
    if not comps:
        raise ValueError("empty component tuple")
    sq = np.zeros(comps[0].grid.shape)
    for c in comps:
        sq = sq + c.values**2
    return np.sqrt(sq), comps[0].grid.quadrature_weight


def lebesgue_norm(f, q: float) -> float:
    """L^q norm of a scalar field, or of the pointwise Euclidean magnitude of a tuple.

    ``q = inf`` gives the grid maximum.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q!r}")
    mag, weight = _magnitude(f)
    peak = float(mag.max())
    if q == INF or peak == 0.0:
        return peak
    # Dividing by the peak keeps |f|^q in range for large q.
    total = float(np.sum((mag / peak) ** q)) * weight
    return peak * total ** (1.0 / q)


def criterion_alpha(beta: float) -> float:
    """Time exponent paired with ``beta`` by ``2/alpha + 3/beta = 2 + 1/beta``."""
    if not beta > 1:
        raise ValueError(f"beta must exceed 1, got {beta!r}")
    if beta == INF:
        return 1.0
    return beta / (beta - 1.0)


def serrin_alpha(beta: float) -> float:
    """Time exponent paired with ``beta`` by ``2/alpha + 3/beta = 1``."""
    if not beta >= 3:
        raise ValueError(f"Serrin beta must be >= 3, got {beta!r}")
    if beta == 3:
        return INF
    if beta == INF:
        return 2.0
    return 2.0 * beta / (beta - 3.0)


@dataclass(frozen=True)
class ExponentPair:
    alpha: float
    beta: float
    family: str

    def __post_init__(self):
        if self.family == HESSIAN_CRITERION:
            expected = criterion_alpha(self.beta)
        elif self.family == SERRIN:
            expected = serrin_alpha(self.beta)
        else:
            raise ValueError(f"unknown exponent family {self.family!r}")
        if self.alpha != expected:
            raise ValueError(
                f"alpha={self.alpha!r} does not match beta={self.beta!r} for {self.family}"
            )

    @classmethod
    def hessian_criterion(cls, beta: float) -> "ExponentPair":
        return cls(criterion_alpha(beta), beta, HESSIAN_CRITERION)

    @classmethod
    def serrin(cls, beta: float) -> "ExponentPair":
        return cls(serrin_alpha(beta), beta, SERRIN)

    def scaling_defect(self) -> float:
        """Residual of the defining relation, evaluated in floating point."""
        inv_a = 0.0 if self.alpha == INF else 1.0 / self.alpha
        inv_b = 0.0 if self.beta == INF else 1.0 / self.beta
        if self.family == HESSIAN_CRITERION:
            return abs(2.0 * inv_a + 3.0 * inv_b - 2.0 - inv_b)
        return abs(2.0 * inv_a + 3.0 * inv_b - 1.0)


@dataclass
class MixedNormAccumulator:
    """Running trapezoid integral of ``value(t)**alpha``.

    With ``alpha = inf`` the running quantity is the supremum instead.
    """

    alpha: float
    times: list = field(default_factory=list)
    values: list = field(default_factory=list)
    running: list = field(default_factory=list)

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha!r}")

    @classmethod
    def for_pair(cls, pair: ExponentPair) -> "MixedNormAccumulator":
        return cls(pair.alpha)

    def append(self, t: float, value: float) -> "MixedNormAccumulator":
        if self.times and not t > self.times[-1]:
            raise ValueError(f"time {t!r} does not exceed last sample {self.times[-1]!r}")
        if not value >= 0:
            raise ValueError(f"spatial norm must be nonnegative, got {value!r}")
        if self.alpha == INF:
            current = max(self.running[-1], value) if self.running else value
        elif not self.times:
            current = 0.0
        else:
            dt = t - self.times[-1]
            current = self.running[-1] + 0.5 * dt * (self.values[-1] ** self.alpha + value**self.alpha)
        self.times.append(float(t))
        self.values.append(float(value))
        self.running.append(float(current))
        return self

    def extend(self, samples: Iterable[tuple[float, float]]) -> "MixedNormAccumulator":
        for t, v in samples:
            self.append(t, v)
        return self

    @property
    def integral(self) -> float:
        """Un-rooted quantity, as used in the smallness window."""
        return self.running[-1] if self.running else 0.0

    def value(self) -> float:
        """The mixed norm: integral to the power ``1/alpha``."""
        if self.alpha == INF:
            return self.integral
        return self.integral ** (1.0 / self.alpha)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "value", "running_integral"])
            for row in zip(self.times, self.values, self.running):
                writer.writerow([repr(x) for x in row])


def trapezoid(times: Sequence[float], values: Sequence[float]) -> float:
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(times) * (values[1:] + values[:-1])))


def hessian_pair(u: VectorField, triple: Sequence[int] = (1, 2, 3)):
    """The two monitored Hessian entries d_i d_k u_k and d_j d_k u_k."""
    i, j, k = _check_triple(triple)
    return hessian_entry(u, i, k, k), hessian_entry(u, j, k, k)


def hessian_pair_norms(u: VectorField, betas: Sequence[float],
                       triple: Sequence[int] = (1, 2, 3)) -> dict:
    """``{beta: (joint, first, second)}`` L^beta norms of the monitored entries.

    ``joint`` is the norm of the pointwise Euclidean magnitude of the pair.
    """
    first, second = hessian_pair(u, triple)
    return {
        beta: (lebesgue_norm((first, second), beta),
               lebesgue_norm(first, beta),
               lebesgue_norm(second, beta))
        for beta in betas
    }


def _check_triple(triple: Sequence[int]) -> tuple[int, int, int]:
    triple = tuple(int(t) for t in triple)
    if sorted(triple) != [1, 2, 3]:
        raise ValueError(f"index triple {triple!r} is not a permutation of (1, 2, 3)")
    return triple


def format_exponent(x: float) -> str:
    return "inf" if x == INF else repr(float(x))


def hessian_key(triple: Sequence[int], beta: float, part: str = "joint") -> str:
    """Diagnostic column name, e.g. ``hess123_b2.0_joint``."""
    if part not in ("joint", "c1", "c2"):
        raise ValueError(f"unknown part {part!r}")
    tag = "".join(str(t) for t in _check_triple(triple))
    return f"hess{tag}_b{format_exponent(beta)}_{part}"


def serrin_key(beta: float) -> str:
    return f"u_l{format_exponent(beta)}"
