"""Periodic grid on [0, 2pi)^2 and the spectral operators built on it.

Layout
------
Physical arrays are indexed ``a[i1, i2]`` with ``x1 = i1*h`` and ``x2 = i2*h``;
vector fields carry a leading component axis, ``u[c, i1, i2]``.

Spectral arrays use the real-FFT half plane: shape ``(n, n//2 + 1)``, with
``k1 = fftfreq(n)*n`` along axis -2 and ``k2 = 0..n/2`` along axis -1.
Coefficients are normalised so that ``f(x) = sum_k fhat_k exp(i k.x)``; a
constant field ``c`` therefore has the single coefficient ``c`` at ``k = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import InputError

PHYSICAL = "physical"
SPECTRAL = "spectral"


@dataclass(frozen=True)
class TorusGrid:
    """Uniform ``n x n`` grid on the torus of side ``2*pi``."""

    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise InputError(f"grid size must be a power of two >= 16, got {n!r}")

    @property
    def length(self) -> float:
        return 2 * np.pi

    @property
    def h(self) -> float:
        return 2 * np.pi / self.n

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x1, x2)`` node coordinates, each of shape ``(n, n)``."""
        return tuple(np.meshgrid(self.nodes, self.nodes, indexing="ij"))

    @cached_property
    def k1(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.n) * self.n)[:, None]

    @cached_property
    def k2(self) -> np.ndarray:
        return np.arange(self.n // 2 + 1, dtype=float)[None, :]

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.ksq)

    @cached_property
    def inv_ksq(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @cached_property
    def ik(self) -> tuple[np.ndarray, np.ndarray]:
        """Derivative multipliers ``i*k`` with the Nyquist modes zeroed."""
        half = self.n // 2
        k1 = np.where(np.abs(self.k1) == half, 0.0, self.k1)
        k2 = np.where(self.k2 == half, 0.0, self.k2)
        return (1j * np.broadcast_to(k1, self.spectral_shape),
                1j * np.broadcast_to(k2, self.spectral_shape))

    @property
    def dealias_cutoff(self) -> int:
        return self.n // 3

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        c = self.dealias_cutoff
        return ((np.abs(self.k1) <= c) & (self.k2 <= c)).astype(float)

    # -- array-level kernels -------------------------------------------------

    def fft(self, a: np.ndarray) -> np.ndarray:
        return sfft.rfft2(a, axes=(-2, -1), norm="forward")

    def ifft(self, ah: np.ndarray) -> np.ndarray:
        return sfft.irfft2(ah, s=(self.n, self.n), axes=(-2, -1), norm="forward")

    def deriv(self, a: np.ndarray, axis: int) -> np.ndarray:
        return self.ifft(self.ik[axis] * self.fft(a))

    def grad(self, a: np.ndarray) -> np.ndarray:
        ah = self.fft(a)
        return self.ifft(np.stack([self.ik[0] * ah, self.ik[1] * ah]))

    def grad_tensor(self, v: np.ndarray) -> np.ndarray:
        """``G[i, j] = d_j v^i`` for a vector field ``v``."""
        vh = self.fft(v)
        return self.ifft(np.stack([vh * self.ik[0], vh * self.ik[1]], axis=1))

    def perp_grad(self, a: np.ndarray) -> np.ndarray:
        ah = self.fft(a)
        return self.ifft(np.stack([-self.ik[1] * ah, self.ik[0] * ah]))

    def div(self, v: np.ndarray) -> np.ndarray:
        vh = self.fft(v)
        return self.ifft(self.ik[0] * vh[0] + self.ik[1] * vh[1])

    def curl(self, v: np.ndarray) -> np.ndarray:
        vh = self.fft(v)
        return self.ifft(self.ik[0] * vh[1] - self.ik[1] * vh[0])

    def inv_lap(self, a: np.ndarray) -> np.ndarray:
        """``(-Delta)^{-1}`` in the mean-zero gauge."""
        return self.ifft(self.inv_ksq * self.fft(a))

    @cached_property
    def _leray_factors(self):
        # same Nyquist convention as ``ik`` so that div(leray(v)) vanishes exactly
        k1, k2 = self.ik[0].imag, self.ik[1].imag
        kk = k1**2 + k2**2
        inv = np.divide(1.0, kk, out=np.zeros_like(kk), where=kk > 0)
        return k1, k2, inv

    def leray(self, v: np.ndarray) -> np.ndarray:
        vh = self.fft(v)
        k1, k2, inv = self._leray_factors
        kdotv = (k1 * vh[0] + k2 * vh[1]) * inv
        return self.ifft(np.stack([vh[0] - k1 * kdotv, vh[1] - k2 * kdotv]))

    def dealias(self, a: np.ndarray) -> np.ndarray:
        return self.ifft(self.dealias_mask * self.fft(a))

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Node-wise product followed by 2/3-rule truncation."""
        return self.dealias(a * b)

    def mean(self, a: np.ndarray) -> np.ndarray | float:
        return a.mean(axis=(-2, -1))

    def lp_norm(self, a: np.ndarray, p: float) -> float:
        """Discrete L^p norm; vector/tensor inputs use the pointwise Euclidean magnitude."""
        mag = np.abs(a) if a.ndim == 2 else np.sqrt((a.reshape(-1, self.n, self.n) ** 2).sum(axis=0))
        if np.isinf(p):
            return float(mag.max())
        return float((self.h**2 * (mag**p).sum()) ** (1.0 / p))

    def integrate(self, a: np.ndarray) -> float:
        return float(self.h**2 * a.sum())


@lru_cache(maxsize=None)
def get_grid(n: int) -> TorusGrid:
    """Shared grid instance (wavenumber tables are built once per size)."""
    return TorusGrid(int(n))


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar or vector field in one of two representations.

    ``data`` has shape ``(n, n)`` or ``(2, n, n)`` in physical space and
    ``(n, n//2+1)`` / ``(2, n, n//2+1)`` in spectral space.
    """

    grid: TorusGrid
    data: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        if self.space not in (PHYSICAL, SPECTRAL):
            raise InputError(f"unknown representation {self.space!r}")
        shape = self.grid.spectral_shape if self.space == SPECTRAL else (self.grid.n,) * 2
        if self.data.shape[-2:] != shape or self.data.ndim not in (2, 3):
            raise InputError(f"array of shape {self.data.shape} does not fit a {self.space} field on n={self.grid.n}")
        if self.space == PHYSICAL and np.iscomplexobj(self.data):
            raise InputError("physical samples must be real")
        data = np.array(self.data, copy=True)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "Field":
        x1, x2 = grid.mesh
        return cls(grid, np.asarray(func(x1, x2), dtype=float))

    @property
    def is_vector(self) -> bool:
        return self.data.ndim == 3

    def physical(self) -> "Field":
        return self if self.space == PHYSICAL else transform(self)

    def spectral(self) -> "Field":
        return self if self.space == SPECTRAL else transform(self)

    @property
    def values(self) -> np.ndarray:
        """Physical samples."""
        return self.physical().data

    def __getitem__(self, i) -> "Field":
        return Field(self.grid, self.data[i], self.space)

    def _binary(self, other, op) -> "Field":
        if isinstance(other, Field):
            _check_same_grid(self, other)
            other = other.values
        return Field(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, other):
        if isinstance(other, Field):
            return pointwise_mul(self, other)
        return self._binary(other, np.multiply)

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)


def _check_same_grid(*fields: Field) -> None:
    if len({f.grid.n for f in fields}) > 1:
        raise InputError("fields live on different grids")


def scalar(grid: TorusGrid, values) -> Field:
    return Field(grid, np.asarray(values, dtype=float))


def vector(grid: TorusGrid, c1, c2) -> Field:
    return Field(grid, np.stack([np.asarray(c1, dtype=float), np.asarray(c2, dtype=float)]))


def transform(f: Field, direction: str | None = None) -> Field:
    """Toggle between physical samples and Fourier coefficients.

    ``direction`` ("forward" or "backward") is optional; when given it must
    match the current representation.
    """
    if direction is not None:
        expected = {"forward": PHYSICAL, "backward": SPECTRAL}.get(direction)
        if expected is None:
            raise InputError(f"unknown direction {direction!r}")
        if f.space != expected:
            raise InputError(f"{direction} transform needs a {expected} field")
    g = f.grid
    if f.space == PHYSICAL:
        return Field(g, g.fft(f.data), SPECTRAL)
    return Field(g, g.ifft(f.data), PHYSICAL)


def derivative(f: Field, axis: int) -> Field:
    if axis not in (0, 1):
        raise InputError(f"axis must be 0 or 1, got {axis}")
    g = f.grid
    return Field(g, g.ifft(g.ik[axis] * f.spectral().data))


def gradient(f: Field) -> Field:
    if f.is_vector:
        return Field(f.grid, f.grid.grad_tensor(f.values).reshape(4, f.grid.n, f.grid.n))
    return Field(f.grid, f.grid.grad(f.values))


def perp_gradient(f: Field) -> Field:
    """``grad^perp f = (-d_2 f, d_1 f)``."""
    return Field(f.grid, f.grid.perp_grad(f.values))


def divergence(v: Field) -> Field:
    _require_vector(v)
    return Field(v.grid, v.grid.div(v.values))


def curl2d(v: Field) -> Field:
    """``d_1 v^2 - d_2 v^1``."""
    _require_vector(v)
    return Field(v.grid, v.grid.curl(v.values))


def laplacian(f: Field) -> Field:
    g = f.grid
    return Field(g, g.ifft(-g.ksq * f.spectral().data))


def inv_laplacian(f: Field) -> Field:
    """Mean-zero ``g`` with ``-Delta g = f - mean(f)``."""
    return Field(f.grid, f.grid.inv_lap(f.values))


def leray_project(v: Field) -> Field:
    _require_vector(v)
    return Field(v.grid, v.grid.leray(v.values))


def dealias(f: Field) -> Field:
    return Field(f.grid, f.grid.dealias(f.values))


def pointwise_mul(f: Field, g: Field) -> Field:
    """Dealiased product. A scalar times a vector scales each component;
    two vectors multiply componentwise."""
    _check_same_grid(f, g)
    a, b = f.values, g.values
    if a.ndim != b.ndim:
        a, b = (a[None], b) if a.ndim == 2 else (a, b[None])
    return Field(f.grid, f.grid.mul(a, b))


def dot(v: Field, w: Field) -> Field:
    """Dealiased pointwise inner product of two vector fields."""
    _check_same_grid(v, w)
    return Field(v.grid, v.grid.mul(v.values, w.values).sum(axis=0))


def lp_norm(f: Field, p: float) -> float:
    return f.grid.lp_norm(f.values, p)


def _require_vector(v: Field) -> None:
    if not v.is_vector:
        raise InputError("operation needs a vector field")


def synthesize(grid: TorusGrid, modes, coeffs) -> np.ndarray:
    """Real field ``sum Re(c_k exp(i k.x))`` over half-plane modes.

    ``modes`` is a sequence of integer pairs with ``k2 > 0`` or ``k2 == 0, k1 >= 0``;
    ``coeffs`` the matching complex amplitudes.  The result does not depend on
    ``grid.n`` beyond sampling, which keeps random ensembles comparable across
    resolutions.
    """
    fh = np.zeros(grid.spectral_shape, dtype=complex)
    n = grid.n
    for (k1, k2), c in zip(modes, coeffs):
        if max(abs(k1), abs(k2)) >= n // 2:
            raise InputError(f"mode {(k1, k2)} is not resolvable on n={n}")
        if k1 == 0 and k2 == 0:
            fh[0, 0] += c.real
        elif k2 == 0:
            fh[k1 % n, 0] += c / 2
            fh[-k1 % n, 0] += np.conj(c) / 2
        else:
            fh[k1 % n, k2] += c / 2
    return grid.ifft(fh)


def half_plane_modes(kmax: float, kmin: float = 0.0, norm: str = "euclid") -> list[tuple[int, int]]:
    """Half-plane lattice modes with ``kmin <= |k| <= kmax`` in a fixed order."""
    out = []
    K = int(np.floor(kmax))
    for k1 in range(-K, K + 1):
        for k2 in range(0, K + 1):
            if k2 == 0 and k1 < 0:
                continue
            r = np.hypot(k1, k2) if norm == "euclid" else max(abs(k1), abs(k2))
            if kmin <= r <= kmax:
                out.append((k1, k2))
    return out


def random_field(grid: TorusGrid, rng: np.random.Generator, kmax: float, kmin: float = 0.0,
                 slope: float = 1.0) -> np.ndarray:
    """Random real trigonometric polynomial supported in ``kmin <= |k| <= kmax``.

    Amplitudes decay like ``(1+|k|)^-slope``.  The draw depends only on the rng
    state and the mode set, never on ``grid.n``.
    """
    modes = half_plane_modes(kmax, kmin)
    if not modes:
        raise InputError(f"no lattice modes in {kmin} <= |k| <= {kmax}")
    z = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    amp = np.array([(1 + np.hypot(*k)) ** -slope for k in modes])
    return synthesize(grid, modes, z * amp)
