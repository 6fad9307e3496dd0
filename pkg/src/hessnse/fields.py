"""Band-limited periodic fields on the 2*pi torus.

Fields keep their physical samples and expose the spectral coefficients
lazily. Coefficients use the ``norm="forward"`` convention, so that
``f.spectral[k]`` is the Fourier coefficient of ``exp(i k.x)`` and
Parseval reads ``int f^2 dx = (2 pi)^3 sum_k |f_k|^2``.

Axis and component indices follow the mathematical convention and run
from 1 to 3.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.fft

PERIOD = 2.0 * np.pi
THREADS_ENV = "HESSNSE_THREADS"


def fft_workers() -> int:
    """Worker count for scipy.fft, read from ``HESSNSE_THREADS`` (default 1)."""
    value = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


def rfft3(values: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(values, axes=(-3, -2, -1), norm="forward", workers=fft_workers())


def irfft3(coeffs: np.ndarray, n: int) -> np.ndarray:
    return scipy.fft.irfftn(
        coeffs, s=(n, n, n), axes=(-3, -2, -1), norm="forward", workers=fft_workers()
    )


@lru_cache(maxsize=16)
def _wavenumbers(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Nyquist entries are zeroed: their derivative is not representable
    # as a real field.
    full = np.fft.fftfreq(n, 1.0 / n)
    full[n // 2] = 0.0
    half = np.fft.rfftfreq(n, 1.0 / n)
    half[-1] = 0.0
    k1 = full.reshape(n, 1, 1)
    k2 = full.reshape(1, n, 1)
    k3 = half.reshape(1, 1, n // 2 + 1)
    for k in (k1, k2, k3):
        k.setflags(write=False)
    return k1, k2, k3


@lru_cache(maxsize=16)
def _k_squared(n: int) -> tuple[np.ndarray, np.ndarray]:
    k1, k2, k3 = _wavenumbers(n)
    ksq = k1**2 + k2**2 + k3**2
    safe = ksq.copy()
    safe[safe == 0.0] = 1.0
    for a in (ksq, safe):
        a.setflags(write=False)
    return ksq, safe


@lru_cache(maxsize=16)
def _dealias_mask(n: int) -> np.ndarray:
    full = np.abs(np.fft.fftfreq(n, 1.0 / n))
    half = np.abs(np.fft.rfftfreq(n, 1.0 / n))
    keep = n / 3.0
    mask = (
        (full.reshape(n, 1, 1) < keep)
        & (full.reshape(1, n, 1) < keep)
        & (half.reshape(1, 1, -1) < keep)
    )
    mask.setflags(write=False)
    return mask


@lru_cache(maxsize=16)
def _rfft_weights(n: int) -> np.ndarray:
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    w = np.broadcast_to(w.reshape(1, 1, -1), (n, n, n // 2 + 1))
    return w


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``n**3`` grid on the 2*pi-periodic cell with viscosity ``nu``."""

    n: int
    nu: float
    period: float = PERIOD

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even >= 8, got {self.n!r}")
        if not (self.nu > 0 and np.isfinite(self.nu)):
            raise ValueError(f"viscosity must be positive, got {self.nu!r}")
        if self.period != PERIOD:
            raise ValueError("the cell period is fixed to 2*pi")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def cell_volume(self) -> float:
        return self.period**3

    @property
    def quadrature_weight(self) -> float:
        """Rectangle-rule weight ``dx**3`` of every grid point."""
        return self.spacing**3

    @property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _wavenumbers(self.n)

    @property
    def k_squared(self) -> np.ndarray:
        return _k_squared(self.n)[0]

    @property
    def dealias_mask(self) -> np.ndarray:
        """True for modes kept by the 2/3 rule (every ``|k_i| < n/3``)."""
        return _dealias_mask(self.n)

    @property
    def cutoff(self) -> int:
        """Largest integer wavenumber kept by the 2/3 rule."""
        return int(np.ceil(self.n / 3.0)) - 1

    @property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each half-spectrum mode in the full spectrum."""
        return _rfft_weights(self.n)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.spacing
        return x.reshape(-1, 1, 1), x.reshape(1, -1, 1), x.reshape(1, 1, -1)


def make_grid(n: int, nu: float) -> GridSpec:
    return GridSpec(n=n, nu=nu)


def _check_axis(i: int) -> int:
    if i not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {i!r}")
    return i - 1


class ScalarField:
    """Real periodic samples on a grid, with a lazily computed spectrum."""

    __array_priority__ = 1000

    def __init__(self, grid: GridSpec, values: np.ndarray):
        values = np.array(values, dtype=np.float64)
        if values.shape != grid.shape:
            values = np.broadcast_to(values, grid.shape).copy()
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_spectral(cls, grid: GridSpec, coeffs: np.ndarray) -> "ScalarField":
        """Build from rfft coefficients, which are kept as the spectral view."""
        coeffs = np.array(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.spectral_shape:
            raise ValueError(f"expected coefficients of shape {grid.spectral_shape}")
        field = cls(grid, irfft3(coeffs, grid.n))
        coeffs.setflags(write=False)
        field.__dict__["spectral"] = coeffs
        return field

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @cached_property
    def spectral(self) -> np.ndarray:
        coeffs = rfft3(self.values)
        coeffs.setflags(write=False)
        return coeffs

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.quadrature_weight)

    def mean(self) -> float:
        return float(np.mean(self.values))

    def __repr__(self):
        return f"ScalarField(n={self.grid.n}, max={np.abs(self.values).max():.3g})"


class VectorField:
    """Three scalar components plus a flag recording divergence-freeness.

    Constructing with ``solenoidal=True`` checks the flag against the
    spectral divergence and raises ``ValueError`` if it does not hold.
    """

    SOLENOIDAL_TOL = 1e-12

    def __init__(self, components: Sequence[ScalarField], solenoidal: bool = False):
        components = tuple(components)
        if len(components) != 3:
            raise ValueError("a vector field has exactly three components")
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise ValueError("components live on different grids")
        self.grid = grid
        self.components = components
        self.solenoidal = bool(solenoidal)
        if self.solenoidal:
            ratio = self.divergence_ratio()
            if ratio > self.SOLENOIDAL_TOL:
                raise ValueError(f"field flagged solenoidal has divergence ratio {ratio:.3e}")

    @classmethod
    def from_array(cls, grid: GridSpec, values: np.ndarray, solenoidal: bool = False):
        values = np.asarray(values, dtype=np.float64)
        return cls([ScalarField(grid, values[a]) for a in range(3)], solenoidal=solenoidal)

    @classmethod
    def from_spectral(cls, grid: GridSpec, coeffs: np.ndarray, solenoidal: bool = False):
        return cls([ScalarField.from_spectral(grid, c) for c in coeffs], solenoidal=solenoidal)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        return cls.from_array(grid, np.zeros((3,) + grid.shape), solenoidal=True)

    def __getitem__(self, k: int) -> ScalarField:
        """Component ``u_k`` with ``k`` in 1..3."""
        return self.components[_check_axis(k)]

    def __iter__(self):
        return iter(self.components)

    @property
    def array(self) -> np.ndarray:
        return np.stack([c.values for c in self.components])

    @property
    def spectral(self) -> np.ndarray:
        return np.stack([c.spectral for c in self.components])

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField([a + b for a, b in zip(self, other)],
                           solenoidal=self.solenoidal and other.solenoidal)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField([a - b for a, b in zip(self, other)],
                           solenoidal=self.solenoidal and other.solenoidal)

    def scale(self, factor: float) -> "VectorField":
        return VectorField([c * factor for c in self], solenoidal=self.solenoidal)

    def spectral_divergence(self) -> np.ndarray:
        k1, k2, k3 = self.grid.wavenumbers
        uh = self.spectral
        return 1j * (k1 * uh[0] + k2 * uh[1] + k3 * uh[2])

    def divergence_ratio(self) -> float:
        """max |k.u_k| over max |u_k|; zero for the zero field."""
        uh = self.spectral
        amplitude = np.abs(uh).max()
        if amplitude == 0.0:
            return 0.0
        return float(np.abs(self.spectral_divergence()).max() / amplitude)

    def __repr__(self):
        return f"VectorField(n={self.grid.n}, solenoidal={self.solenoidal})"


def _spectral_partial(coeffs: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    return 1j * grid.wavenumbers[axis] * coeffs


def partial(f: ScalarField, i: int) -> ScalarField:
    """Exact spectral derivative of ``f`` along axis ``i``."""
    axis = _check_axis(i)
    return ScalarField.from_spectral(f.grid, _spectral_partial(f.spectral, f.grid, axis))


def hessian_entry(u: VectorField, i: int, j: int, k: int) -> ScalarField:
    """The velocity Hessian entry d_i d_j u_k."""
    a, b = _check_axis(i), _check_axis(j)
    comp = u[k]
    k_vec = comp.grid.wavenumbers
    return ScalarField.from_spectral(comp.grid, -(k_vec[a] * k_vec[b]) * comp.spectral)


def horizontal_gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    return partial(f, 1), partial(f, 2)


def horizontal_laplacian(f: ScalarField) -> ScalarField:
    k1, k2, _ = f.grid.wavenumbers
    return ScalarField.from_spectral(f.grid, -(k1**2 + k2**2) * f.spectral)


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField.from_spectral(f.grid, -f.grid.k_squared * f.spectral)


def gradient(f: ScalarField) -> VectorField:
    return VectorField([partial(f, i) for i in (1, 2, 3)])


def divergence(u: VectorField) -> ScalarField:
    return ScalarField.from_spectral(u.grid, u.spectral_divergence())


def dealias(f: ScalarField) -> ScalarField:
    """Zero every mode outside the 2/3-rule cube."""
    return ScalarField.from_spectral(f.grid, f.spectral * f.grid.dealias_mask)


def is_band_limited(f: ScalarField, tol: float = 1e-13) -> bool:
    coeffs = np.abs(f.spectral)
    peak = coeffs.max()
    if peak == 0.0:
        return True
    return bool(coeffs[~f.grid.dealias_mask].max(initial=0.0) <= tol * peak)


def project_spectral(uh: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply I - k k^T/|k|^2 mode by mode to a (3, ...) spectral array."""
    k1, k2, k3 = grid.wavenumbers
    kdotu = (k1 * uh[0] + k2 * uh[1] + k3 * uh[2]) / _k_squared(grid.n)[1]
    out = np.empty_like(uh)
    for a, k in enumerate((k1, k2, k3)):
        np.subtract(uh[a], k * kdotu, out=out[a])
    return out


def leray_project(v: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields.

    The output's divergence is validated against the input amplitude, since
    projecting a pure gradient leaves only rounding noise with no scale of
    its own.
    """
    vh = v.spectral
    out = VectorField.from_spectral(v.grid, project_spectral(vh, v.grid))
    scale = np.abs(vh).max()
    if scale > 0:
        ratio = np.abs(out.spectral_divergence()).max() / scale
        if ratio > VectorField.SOLENOIDAL_TOL:
            raise ValueError(f"projection left divergence ratio {ratio:.3e}")
    out.solenoidal = True
    return out


def relabel_axes(u: VectorField, perm: Sequence[int]) -> VectorField:
    """Field ``v`` with ``v_a(y) = u_{perm[a]}(x)`` where ``x_{perm[a]} = y_a``.

    Derivatives transform as ``d_a v_b = d_{perm[a]} u_{perm[b]}``, so an
    index triple ``perm`` evaluated on ``u`` equals (1, 2, 3) on ``v``.
    """
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != [1, 2, 3]:
        raise ValueError(f"{perm!r} is not a permutation of (1, 2, 3)")
    axes = [p - 1 for p in perm]
    comps = [ScalarField(u.grid, np.transpose(u[p].values, axes)) for p in perm]
    return VectorField(comps, solenoidal=u.solenoidal)


def relabel_scalar(f: ScalarField, perm: Sequence[int]) -> ScalarField:
    """Scalar counterpart of :func:`relabel_axes`."""
    return ScalarField(f.grid, np.transpose(f.values, [p - 1 for p in perm]))


def translate(u, shift: Sequence[int]):
    """Shift grid samples cyclically by ``shift`` points along each axis."""
    shift = tuple(int(s) for s in shift)
    if isinstance(u, ScalarField):
        return ScalarField(u.grid, np.roll(u.values, shift, axis=(0, 1, 2)))
    return VectorField([translate(c, shift) for c in u], solenoidal=u.solenoidal)


# ---------------------------------------------------------------------------
# Test fields

FIELD_KINDS = (
    "taylor_green_2d",
    "taylor_green_3d",
    "abc_flow",
    "random_solenoidal",
    "random_unprojected",
    "bump_compact",
)


def _random_band_spectrum(rng: np.random.Generator, grid: GridSpec, kmax: int,
                          decay: float) -> np.ndarray:
    # Coefficients are drawn on the fixed cube [-kmax, kmax]^3 so the
    # same seed yields the same continuous field on every grid.
    m = 2 * kmax + 1
    draw = rng.standard_normal((3, m, m, m)) + 1j * rng.standard_normal((3, m, m, m))
    # Hermitian symmetrisation: c_k <- (c_k + conj(c_-k)) / 2
    flipped = np.conj(draw[:, ::-1, ::-1, ::-1])
    coeffs = 0.5 * (draw + flipped)
    ks = np.arange(-kmax, kmax + 1)
    kk = np.sqrt(ks.reshape(-1, 1, 1) ** 2 + ks.reshape(1, -1, 1) ** 2 + ks.reshape(1, 1, -1) ** 2)
    kk[kmax, kmax, kmax] = np.inf
    coeffs = coeffs * kk ** (-decay)
    out = np.zeros((3,) + grid.spectral_shape, dtype=complex)
    idx = np.arange(-kmax, kmax + 1) % grid.n
    half = coeffs[:, :, :, kmax:]
    out[:, idx[:, None, None], idx[None, :, None], np.arange(kmax + 1)[None, None, :]] = half
    return out


def _bump_profile(t: np.ndarray) -> np.ndarray:
    inside = np.abs(t) < 1.0
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)


@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported scalar: tensor product of 1-D bumps times a cosine."""

    amplitude: float
    centers: tuple[float, float, float]
    half_widths: tuple[float, float, float]
    wave: tuple[int, int, int]
    phase: float

    @classmethod
    def random(cls, rng: np.random.Generator, margin: float = PERIOD / 8) -> "Bump":
        lo, hi = margin, PERIOD - margin
        widths = rng.uniform(0.9, 0.5 * (hi - lo), size=3)
        centers = [rng.uniform(lo + w, hi - w) for w in widths]
        return cls(
            amplitude=float(rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])),
            centers=tuple(float(c) for c in centers),
            half_widths=tuple(float(w) for w in widths),
            wave=tuple(int(m) for m in rng.integers(0, 3, size=3)),
            phase=float(rng.uniform(0.0, 2.0 * np.pi)),
        )

    def sample(self, grid: GridSpec) -> ScalarField:
        x = grid.coordinates()
        values = np.full(grid.shape, self.amplitude)
        arg = np.full(grid.shape, self.phase)
        for a in range(3):
            values = values * _bump_profile((x[a] - self.centers[a]) / self.half_widths[a])
            arg = arg + self.wave[a] * x[a]
        return ScalarField(grid, values * np.cos(arg))


def vanishes_in_margin(f: ScalarField, margin: float = PERIOD / 8, tol: float = 1e-14) -> bool:
    """True when ``|f| <= tol`` on every grid point within ``margin`` of the cell boundary."""
    x = np.arange(f.grid.n) * f.grid.spacing
    near = (x < margin) | (x > f.grid.period - margin)
    band = near.reshape(-1, 1, 1) | near.reshape(1, -1, 1) | near.reshape(1, 1, -1)
    return bool(np.all(np.abs(f.values[band]) <= tol))


def generate_test_field(kind: str, seed=0, grid: GridSpec | None = None, *,
                        amplitude: float = 1.0, kmax: int | None = None,
                        decay: float = 2.0, abc: tuple[float, float, float] = (1.0, 1.0, 1.0)
                        ) -> VectorField:
    """Deterministic initial data and test fields.

    Parameters
    ----------
    kind : str
        One of ``FIELD_KINDS``.
    seed : int or sequence of int
        Seed for the random kinds, passed to ``numpy.random.default_rng``.
    grid : GridSpec
    amplitude : float
        Peak amplitude for the closed-form flows, rms value for the random
        flows. Ignored for ``bump_compact``.
    kmax : int, optional
        Band limit for random flows; defaults to the 2/3-rule cutoff.
    decay : float
        Random coefficients scale like ``|k|**-decay``.

    Returns
    -------
    VectorField
        For ``bump_compact`` the three components are independent bumps,
        intended as a triple ``(f, g, h)`` rather than a velocity.
    """
    if grid is None:
        raise ValueError("a grid is required")
    x1, x2, x3 = grid.coordinates()
    if kind == "taylor_green_2d":
        u = np.broadcast_arrays(np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2), 0.0 * x3)
        return VectorField.from_array(grid, amplitude * np.stack(u), solenoidal=True)
    if kind == "taylor_green_3d":
        u = np.broadcast_arrays(
            np.sin(x1) * np.cos(x2) * np.cos(x3),
            -np.cos(x1) * np.sin(x2) * np.cos(x3),
            0.0 * x1,
        )
        return VectorField.from_array(grid, amplitude * np.stack(u), solenoidal=True)
    if kind == "abc_flow":
        a, b, c = abc
        u = np.broadcast_arrays(
            a * np.sin(x3) + c * np.cos(x2),
            b * np.sin(x1) + a * np.cos(x3),
            c * np.sin(x2) + b * np.cos(x1),
        )
        return VectorField.from_array(grid, amplitude * np.stack(u), solenoidal=True)
    if kind in ("random_solenoidal", "random_unprojected"):
        band = grid.cutoff if kmax is None else int(kmax)
        if not 1 <= band <= grid.cutoff:
            raise ValueError(f"kmax must lie in [1, {grid.cutoff}] on this grid")
        rng = np.random.default_rng(seed)
        uh = _random_band_spectrum(rng, grid, band, decay)
        if kind == "random_solenoidal":
            uh = project_spectral(uh, grid)
        rms = np.sqrt(np.sum(grid.parseval_weights * np.abs(uh) ** 2) / 3.0)
        uh = uh * (amplitude / rms)
        return VectorField.from_spectral(grid, uh, solenoidal=(kind == "random_solenoidal"))
    if kind == "bump_compact":
        rng = np.random.default_rng(seed)
        return VectorField([Bump.random(rng).sample(grid) for _ in range(3)])
    raise ValueError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")
