"""Anisotropic trilinear inequalities: ratios and empirical constants.

For ``1 < r <= 3`` and compactly supported ``f, g, h`` the bound reads::

    |int f g h| <= C ||f||_2^{(r-1)/r} ||d_a f||_{2/(3-r)}^{1/r}
                     prod_{w in (g, h)} ||w||_2^{(r-1)/r} ||d_b w||_2^{1/(2r)} ||d_c w||_2^{1/(2r)}

with ``a = 3, (b, c) = (1, 2)`` for lemma "2.2" and ``a = 1, (b, c) = (2, 3)``
for lemma "2.3". No value of ``C`` is asserted; the module reports the
ratio of the two sides and the supremum of that ratio over a seeded
family of bump triples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fields import Bump, GridSpec, ScalarField, partial, vanishes_in_margin
from .norms import lebesgue_norm

LEMMA_AXES = {
    "2.2": (3, (1, 2)),
    "2.3": (1, (2, 3)),
}

FACTOR_LABELS = (
    "f_l2", "df_lbeta",
    "g_l2", "dg_first_l2", "dg_second_l2",
    "h_l2", "dh_first_l2", "dh_second_l2",
)


@dataclass(frozen=True)
class InequalityReport:
    lemma: str
    r: float
    lhs: float
    factor_norms: dict
    rhs_product: float
    ratio: float

    @property
    def abs_lhs(self) -> float:
        return abs(self.lhs)


def _check_lemma(lemma: str) -> tuple[int, tuple[int, int]]:
    try:
        return LEMMA_AXES[str(lemma)]
    except KeyError:
        raise ValueError(f"unknown lemma {lemma!r}; expected one of {sorted(LEMMA_AXES)}") from None


def _check_r(r: float) -> float:
    if not 1 < r <= 3:
        raise ValueError(f"r must satisfy 1 < r <= 3, got {r!r}")
    return float(r)


def lebesgue_exponent(r: float) -> float:
    """Exponent ``2/(3 - r)`` on the distinguished derivative; ``inf`` at ``r = 3``."""
    return math.inf if r == 3 else 2.0 / (3.0 - r)


def _factor_product(norms: dict, r: float) -> float:
    p, q = (r - 1.0) / r, 1.0 / r
    half = 0.5 / r
    return (
        norms["f_l2"] ** p * norms["df_lbeta"] ** q
        * norms["g_l2"] ** p * norms["dg_first_l2"] ** half * norms["dg_second_l2"] ** half
        * norms["h_l2"] ** p * norms["dh_first_l2"] ** half * norms["dh_second_l2"] ** half
    )


def lemma_sweep(f: ScalarField, g: ScalarField, h: ScalarField, r_values: Sequence[float],
                lemma: str = "2.2", *, check_support: bool = True) -> list[InequalityReport]:
    """Reports for several ``r`` sharing one set of derivative fields."""
    a, (b, c) = _check_lemma(lemma)
    r_values = [_check_r(r) for r in r_values]
    if check_support and not all(vanishes_in_margin(w) for w in (f, g, h)):
        raise ValueError("test functions must vanish in the boundary margin")
    lhs = float(np.sum(f.values * g.values * h.values)) * f.grid.quadrature_weight
    df = partial(f, a)
    fixed = {
        "f_l2": lebesgue_norm(f, 2),
        "g_l2": lebesgue_norm(g, 2),
        "dg_first_l2": lebesgue_norm(partial(g, b), 2),
        "dg_second_l2": lebesgue_norm(partial(g, c), 2),
        "h_l2": lebesgue_norm(h, 2),
        "dh_first_l2": lebesgue_norm(partial(h, b), 2),
        "dh_second_l2": lebesgue_norm(partial(h, c), 2),
    }
    reports = []
    for r in r_values:
        norms = dict(fixed, df_lbeta=lebesgue_norm(df, lebesgue_exponent(r)))
        norms = {k: norms[k] for k in FACTOR_LABELS}
        rhs = _factor_product(norms, r)
        ratio = abs(lhs) / rhs if rhs > 0 else 0.0
        reports.append(InequalityReport(str(lemma), r, lhs, norms, rhs, ratio))
    return reports


def lemma22_report(f, g, h, r: float, **kwargs) -> InequalityReport:
    """d_3 distinguished on ``f``; d_1, d_2 on ``g`` and ``h``."""
    return lemma_sweep(f, g, h, [r], "2.2", **kwargs)[0]


def lemma23_report(f, g, h, r: float, **kwargs) -> InequalityReport:
    """d_1 distinguished on ``f``; d_2, d_3 on ``g`` and ``h``."""
    return lemma_sweep(f, g, h, [r], "2.3", **kwargs)[0]


# ---------------------------------------------------------------------------
# Empirical constants


@dataclass(frozen=True)
class BumpFamily:
    """``count`` bump triples; triple ``i`` is drawn from ``default_rng([seed, i])``.

    Families with the same seed are nested: a smaller family is a prefix
    of a larger one.
    """

    count: int
    seed: int = 0
    kind: str = "bump_compact"

    def __post_init__(self):
        if self.kind != "bump_compact":
            raise ValueError(f"unsupported family kind {self.kind!r}")
        if self.count < 0:
            raise ValueError("family size must be nonnegative")

    def bumps(self, index: int) -> tuple[Bump, Bump, Bump]:
        rng = np.random.default_rng([self.seed, index])
        return tuple(Bump.random(rng) for _ in range(3))

    def triple(self, index: int, grid: GridSpec) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(b.sample(grid) for b in self.bumps(index))

    def triples(self, grid: GridSpec):
        for i in range(self.count):
            yield self.triple(i, grid)


@dataclass(frozen=True)
class ConstantEstimate:
    lemma: str
    r: float
    sup_ratio: float
    argmax: int | None
    ratios: tuple

    @property
    def argmax_descriptor(self) -> dict:
        return {"index": self.argmax, "count": len(self.ratios)}


def sweep_constants(lemma: str, r_values: Sequence[float], family, grid: GridSpec
                    ) -> dict[float, ConstantEstimate]:
    """Per-``r`` supremum of the ratio over a family of triples.

    ``family`` is a :class:`BumpFamily` or an explicit sequence of
    ``(f, g, h)`` triples. The reduction runs in family order.
    """
    if isinstance(family, BumpFamily):
        triples = family.triples(grid)
        count = family.count
    else:
        triples = list(family)
        count = len(triples)
    if count == 0:
        raise ValueError("empty family")
    r_values = [_check_r(r) for r in r_values]
    ratios = {r: [] for r in r_values}
    for f, g, h in triples:
        for rep in lemma_sweep(f, g, h, r_values, lemma):
            ratios[rep.r].append(rep.ratio)
    out = {}
    for r, vals in ratios.items():
        arr = np.asarray(vals)
        idx = int(np.argmax(arr))
        out[r] = ConstantEstimate(str(lemma), r, float(arr[idx]), idx, tuple(vals))
    return out


def estimate_constant(lemma: str, r: float, family, grid: GridSpec) -> ConstantEstimate:
    return sweep_constants(lemma, [r], family, grid)[_check_r(r)]


# ---------------------------------------------------------------------------
# Exponent bookkeeping behind the gradient estimates


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class JExponents:
    """Exponents for ``beta = 2/(3 - r)``, held exactly as fractions.

    ``gradient`` = 2(beta-1)/(3beta-2) on each L^2 gradient factor,
    ``hessian`` = beta/(3beta-2) on the L^beta Hessian entries,
    ``dissipation`` = 2beta/(3beta-2) on ||grad grad_h u||_2.
    ``young_conjugate`` is the exponent that turns the dissipation power
    into 2, and ``driver`` the resulting power on the Hessian norm.
    ``beta = None`` encodes the limit beta -> infinity.
    """

    beta: Fraction | None
    r: Fraction
    gradient: Fraction
    hessian: Fraction
    dissipation: Fraction
    young_conjugate: Fraction
    driver: Fraction

    def as_floats(self) -> dict:
        out = {k: float(getattr(self, k)) for k in
               ("r", "gradient", "hessian", "dissipation", "young_conjugate", "driver")}
        out["beta"] = math.inf if self.beta is None else float(self.beta)
        return out


def j_estimate_exponents(beta) -> JExponents:
    if beta == math.inf:
        return JExponents(None, Fraction(3), Fraction(2, 3), Fraction(1, 3), Fraction(2, 3),
                          Fraction(3, 2), Fraction(1, 2))
    b = _as_fraction(beta)
    if b <= 1:
        raise ValueError(f"beta must exceed 1 so that r lies in (1, 3], got {beta!r}")
    denom = 3 * b - 2
    gradient = 2 * (b - 1) / denom
    hessian = b / denom
    dissipation = 2 * b / denom
    conj = 2 / (2 - dissipation)
    return JExponents(b, r_from_beta(b), gradient, hessian, dissipation, conj, hessian * conj)


def r_from_beta(beta) -> Fraction:
    return 3 - 2 / _as_fraction(beta)


def beta_from_r(r) -> Fraction:
    r = _as_fraction(r)
    if not 1 < r < 3:
        raise ValueError("r must lie in (1, 3) for a finite beta")
    return 2 / (3 - r)
