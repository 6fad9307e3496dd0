"""Exact trilinear identities for divergence-free fields, checked by quadrature.

Each check evaluates both sides through separate derivative routines:
left-hand sides go through :mod:`hessnse.fields` (real transforms),
right-hand sides through a local full complex-transform Jacobian. For
fields band-limited by the 2/3 rule every triple product is integrated
exactly by the rectangle rule, so residuals sit at rounding level.

Two printed rewrites carry the opposite overall sign from what direct
quadrature gives; the signs frozen below are the ones the quadrature
oracle selects and each report states the sign it applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .fields import (
    VectorField,
    fft_workers,
    horizontal_laplacian,
    partial,
    hessian_entry,
)

# Overall sign multiplying the printed right-hand side of each rewrite.
I2_REWRITE_SIGN = 1.0
I3_REWRITE_SIGN = -1.0
K2_REWRITE_SIGN = -1.0

SOLENOIDAL_TOL = 1e-12
# The residual denominator never drops below this fraction of the
# amplitude scale, which keeps vanishing integrals from producing 0/0.
SCALE_FLOOR = 1e-3


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    sign: float = 1.0
    terms: dict = field(default_factory=dict)


def _report(name, lhs, rhs, scale, sign=1.0, terms=None) -> IdentityReport:
    abs_res = abs(lhs - rhs)
    denom = max(abs(lhs), abs(rhs), scale)
    rel = abs_res / denom if denom > 0 else 0.0
    return IdentityReport(name, float(lhs), float(rhs), float(abs_res), float(rel),
                          float(sign), dict(terms or {}))


def _amplitude_scale(u: VectorField) -> float:
    # Fraction of ||u||_2^3 / |cell|^(1/2), i.e. amplitude cubed times cell volume.
    sq = float(np.sum(u.array**2)) * u.grid.quadrature_weight
    return SCALE_FLOOR * sq**1.5 / np.sqrt(u.grid.cell_volume)


def _require_solenoidal(u: VectorField, check: bool) -> None:
    if check and u.divergence_ratio() > SOLENOIDAL_TOL:
        raise ValueError("identity requires a divergence-free field")


def _integrate(grid, *factors) -> float:
    prod = factors[0]
    for f in factors[1:]:
        prod = prod * f
    return float(np.sum(prod)) * grid.quadrature_weight


def _jacobian(u: VectorField) -> np.ndarray:
    """G[i, j] = d_i u_j on the grid via full complex transforms (0-based)."""
    n = u.grid.n
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    kvec = (k.reshape(-1, 1, 1), k.reshape(1, -1, 1), k.reshape(1, 1, -1))
    uh = scipy.fft.fftn(u.array, axes=(1, 2, 3), workers=fft_workers())
    G = np.empty((3, 3) + u.grid.shape)
    for i in range(3):
        for j in range(3):
            G[i, j] = scipy.fft.ifftn(1j * kvec[i] * uh[j], workers=fft_workers()).real
    return G


def kukavica_ziane_residual(u: VectorField, *, check: bool = True) -> IdentityReport:
    """Component reduction of sum_{i,j<=2} int u_i d_i u_j Lap_h u_j dx.

    Set ``check=False`` to evaluate on non-solenoidal input (negative control).
    """
    _require_solenoidal(u, check)
    g = u.grid
    lap_h = [horizontal_laplacian(u[j]).values for j in (1, 2)]
    lhs = sum(
        _integrate(g, u[i].values, partial(u[j], i).values, lap_h[j - 1])
        for i in (1, 2) for j in (1, 2)
    )
    G = _jacobian(u)
    rhs = (
        0.5 * sum(_integrate(g, G[i, j], G[i, j], G[2, 2]) for i in range(2) for j in range(2))
        - _integrate(g, G[0, 0], G[1, 1], G[2, 2])
        + _integrate(g, G[0, 1], G[1, 0], G[2, 2])
    )
    return _report("kukavica_ziane", lhs, rhs, _amplitude_scale(u))


def _i_terms(u: VectorField) -> dict:
    g = u.grid
    lap_h = {j: horizontal_laplacian(u[j]).values for j in (1, 2, 3)}

    def term(i, j):
        return _integrate(g, u[i].values, partial(u[j], i).values, lap_h[j])

    return {
        "I1": sum(term(i, j) for i in (1, 2) for j in (1, 2)),
        "I2": sum(term(3, j) for j in (1, 2)),
        "I3": sum(term(i, 3) for i in (1, 2, 3)),
    }


def nonlinear_h_decomposition_residual(u: VectorField, *, check: bool = True) -> IdentityReport:
    """int (u.grad)u . Lap_h u dx against I1 + I2 + I3."""
    _require_solenoidal(u, check)
    g = u.grid
    # Total through the full Jacobian and a spectral horizontal Laplacian.
    G = _jacobian(u)
    arr = u.array
    advection = np.einsum("ixyz,ijxyz->jxyz", arr, G)
    n = g.n
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    kh2 = k.reshape(-1, 1, 1) ** 2 + k.reshape(1, -1, 1) ** 2
    lap_h = scipy.fft.ifftn(-kh2 * scipy.fft.fftn(arr, axes=(1, 2, 3)), axes=(1, 2, 3)).real
    total = float(np.sum(advection * lap_h)) * g.quadrature_weight
    terms = _i_terms(u)
    parts = terms["I1"] + terms["I2"] + terms["I3"]
    return _report("nonlinear_h_decomposition", total, parts, _amplitude_scale(u), terms=terms)


def i2_rewrite_residual(u: VectorField, *, check: bool = True) -> IdentityReport:
    """I2 = sum_j int u_3 d_3 u_j Lap_h u_j against its integrated-by-parts form."""
    _require_solenoidal(u, check)
    g = u.grid
    raw = sum(
        _integrate(g, u[3].values, partial(u[j], 3).values, horizontal_laplacian(u[j]).values)
        for j in (1, 2)
    )
    G = _jacobian(u)
    printed = (
        -sum(_integrate(g, G[k, 2], G[2, j], G[k, j]) for j in range(2) for k in range(2))
        + 0.5 * sum(_integrate(g, G[2, 2], G[k, j], G[k, j]) for j in range(2) for k in range(2))
    )
    return _report("i2_rewrite", raw, I2_REWRITE_SIGN * printed, _amplitude_scale(u),
                   sign=I2_REWRITE_SIGN)


def i3_rewrite_residual(u: VectorField, *, check: bool = True) -> IdentityReport:
    """I3 = sum_i int u_i d_i u_3 Lap_h u_3 against sum_{i, j<=2} int d_j u_i d_i u_3 d_j u_3."""
    _require_solenoidal(u, check)
    g = u.grid
    lap3 = horizontal_laplacian(u[3]).values
    raw = sum(_integrate(g, u[i].values, partial(u[3], i).values, lap3) for i in (1, 2, 3))
    G = _jacobian(u)
    printed = sum(_integrate(g, G[j, i], G[i, 2], G[j, 2]) for i in range(3) for j in range(2))
    return _report("i3_rewrite", raw, I3_REWRITE_SIGN * printed, _amplitude_scale(u),
                   sign=I3_REWRITE_SIGN)


def k2_rewrite_residual(u: VectorField, *, check: bool = True) -> IdentityReport:
    """K2 = int (u.grad)u . d_33 u dx against the split trilinear form.

    The printed form is
    ``sum_{i<=2, j} int d_3 u_i d_i u_j d_3 u_j - sum_j int (d_1 u_1 + d_2 u_2) d_3 u_j d_3 u_j``.
    """
    _require_solenoidal(u, check)
    g = u.grid
    raw = 0.0
    for j in (1, 2, 3):
        d33 = hessian_entry(u, 3, 3, j).values
        for i in (1, 2, 3):
            raw += _integrate(g, u[i].values, partial(u[j], i).values, d33)
    G = _jacobian(u)
    printed = (
        sum(_integrate(g, G[2, i], G[i, j], G[2, j]) for i in range(2) for j in range(3))
        - sum(_integrate(g, G[0, 0] + G[1, 1], G[2, j], G[2, j]) for j in range(3))
    )
    return _report("k2_rewrite", raw, K2_REWRITE_SIGN * printed, _amplitude_scale(u),
                   sign=K2_REWRITE_SIGN)


IDENTITY_CHECKS = {
    "kukavica_ziane": kukavica_ziane_residual,
    "nonlinear_h_decomposition": nonlinear_h_decomposition_residual,
    "i2_rewrite": i2_rewrite_residual,
    "i3_rewrite": i3_rewrite_residual,
    "k2_rewrite": k2_rewrite_residual,
}


def run_all(u: VectorField, *, check: bool = True) -> list[IdentityReport]:
    return [fn(u, check=check) for fn in IDENTITY_CHECKS.values()]
