"""Polar tensor grid on the annulus ``r0 < r < 1`` and the discrete calculus on it.

Angular direction: uniform nodes, trigonometric (FFT) differentiation, trapezoid
quadrature.  Radial direction: Legendre-Gauss-Lobatto nodes (both boundary
circles included), polynomial collocation derivative, GLL quadrature.  Both
directions are spectrally accurate for smooth fields, and the pair (derivative,
quadrature) satisfies summation by parts exactly, so ``dirichlet_inner(f, g)``
equals ``-integrate(f * laplacian(g))`` to round-off whenever ``f`` vanishes on
the boundary circles.

Arrays are laid out ``(n_r, n_theta)``: row ``i`` is the circle ``r = r[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from ._stencils import gll_operator


class GridMismatchError(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class GridSpec:
    r0: float
    n_r: int
    n_theta: int

    def __post_init__(self):
        if not (0.0 < self.r0 < 1.0):
            raise ValueError(f"r0 must lie in (0, 1), got {self.r0}")
        if self.n_r < 8:
            raise ValueError(f"n_r must be >= 8, got {self.n_r}")
        if self.n_theta < 8:
            raise ValueError(f"n_theta must be >= 8, got {self.n_theta}")
        if self.n_theta % 2:
            raise ValueError(f"n_theta must be even, got {self.n_theta}")


class AnnulusGrid:
    """Nodes, quadrature and differentiation operators for one ``GridSpec``.

    Instances are immutable after construction; the factorized mode-wise solvers
    are built lazily on first use and cached.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        n_r, n_t = spec.n_r, spec.n_theta
        r, self.H_r, self.D_r = gll_operator(n_r, spec.r0, 1.0)
        self.r_nodes = r
        self.theta_nodes = 2.0 * np.pi * np.arange(n_t) / n_t
        self.dtheta = 2.0 * np.pi / n_t

        self.D_r_T = np.ascontiguousarray(self.D_r.T)
        # r-Jacobian absorbed into the radial weights
        self.radial_weights = self.H_r * r
        self.quad_weights = np.outer(self.radial_weights, np.full(n_t, self.dtheta))

        # angular wavenumbers for rfft; Nyquist derivative is set to zero
        self.k_rfft = np.arange(n_t // 2 + 1)
        self._ik = 1j * self.k_rfft.astype(float)
        self._ik[-1] = 0.0

        self.boundary_index = {
            "inner": {"row": 0, "normal_sign": -1},
            "outer": {"row": n_r - 1, "normal_sign": +1},
        }
        self.R = r[:, None]
        self.cos_t = np.cos(self.theta_nodes)[None, :]
        self.sin_t = np.sin(self.theta_nodes)[None, :]
        self.x = self.R * self.cos_t
        self.y = self.R * self.sin_t
        for arr in (self.r_nodes, self.theta_nodes, self.quad_weights, self.H_r,
                    self.radial_weights, self.x, self.y, self.D_r, self.D_r_T):
            arr.setflags(write=False)

    @property
    def max_mode(self) -> int:
        """Largest angular wavenumber whose pairwise products are alias-free."""
        return (self.spec.n_theta - 1) // 4

    @property
    def shape(self) -> tuple[int, int]:
        return (self.spec.n_r, self.spec.n_theta)

    def __repr__(self):
        s = self.spec
        return f"AnnulusGrid(r0={s.r0}, n_r={s.n_r}, n_theta={s.n_theta})"

    # -- raw array operators ------------------------------------------------

    def d_r(self, arr: np.ndarray) -> np.ndarray:
        return self.D_r @ arr

    def d_r_T(self, arr: np.ndarray) -> np.ndarray:
        """Transpose of ``d_r`` (adjoint w.r.t. the Euclidean product)."""
        return self.D_r_T @ arr

    def d_theta(self, arr: np.ndarray) -> np.ndarray:
        n_t = self.spec.n_theta
        return np.fft.irfft(np.fft.rfft(arr, axis=1) * self._ik, n=n_t, axis=1)

    def d_theta2(self, arr: np.ndarray) -> np.ndarray:
        """``d_theta`` applied twice (the Nyquist mode is annihilated)."""
        n_t = self.spec.n_theta
        return np.fft.irfft(np.fft.rfft(arr, axis=1) * self._ik**2, n=n_t, axis=1)

    @cached_property
    def poisson_inverses(self) -> np.ndarray:
        """Inverse of the Dirichlet mode operator ``-(1/r) D r D + k^2/r^2`` per rfft mode.

        Interior rows and columns only (boundary values are zero).  The Nyquist
        mode uses ``k = 0`` to match ``d_theta``.
        """
        r = self.r_nodes
        D = self.D_r
        A = -(D @ (r[:, None] * D)) / r[:, None]
        A = A[1:-1, 1:-1]
        inv_r2 = 1.0 / r[1:-1] ** 2
        out = np.empty((len(self.k_rfft), len(r) - 2, len(r) - 2))
        for k in self.k_rfft:
            keff2 = 0.0 if k == self.k_rfft[-1] else float(k * k)
            out[k] = np.linalg.inv(A + np.diag(keff2 * inv_r2))
        out.setflags(write=False)
        return out

    @cached_property
    def sobolev_inverses(self) -> np.ndarray:
        """Inverse of the H^1 Gram block ``D^T W D + k^2 H/r + H r`` per rfft mode (no dtheta)."""
        D = self.D_r
        S0 = D.T @ (self.radial_weights[:, None] * D)
        mass = np.diag(self.radial_weights)
        ang = np.diag(self.H_r / self.r_nodes)
        out = np.empty((len(self.k_rfft), self.spec.n_r, self.spec.n_r))
        for k in self.k_rfft:
            keff2 = 0.0 if k == self.k_rfft[-1] else float(k * k)
            out[k] = np.linalg.inv(S0 + keff2 * ang + mass)
        out.setflags(write=False)
        return out

    def solve_modes(self, inverses: np.ndarray, arr: np.ndarray, transpose: bool = False,
                    interior: bool = False) -> np.ndarray:
        """Apply a per-mode radial matrix stack to ``arr`` in angular Fourier space."""
        n_t = self.spec.n_theta
        fh = np.fft.rfft(arr, axis=1)
        sl = slice(1, -1) if interior else slice(None)
        sub = fh[sl]
        spec = "kji,jk->ik" if transpose else "kij,jk->ik"
        res = np.einsum(spec, inverses, sub.real) + 1j * np.einsum(spec, inverses, sub.imag)
        out = np.zeros_like(fh)
        out[sl] = res
        return np.fft.irfft(out, n=n_t, axis=1)

    def rotation_shift(self, m: int) -> int:
        """Number of angular nodes in a rotation by ``2*pi/m``."""
        if m < 1 or self.spec.n_theta % m:
            raise ValueError(f"m={m} must divide n_theta={self.spec.n_theta}")
        return self.spec.n_theta // m


def build_grid(spec: GridSpec) -> AnnulusGrid:
    return AnnulusGrid(spec)


# -- fields ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: AnnulusGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: AnnulusGrid, fn) -> "ScalarField":
        """Sample ``fn(x, y)`` at the grid nodes."""
        return cls(grid, np.broadcast_to(fn(grid.x, grid.y), grid.shape))

    @classmethod
    def from_polar(cls, grid: AnnulusGrid, fn) -> "ScalarField":
        """Sample ``fn(r, theta)`` at the grid nodes."""
        return cls(grid, np.broadcast_to(fn(grid.R, grid.theta_nodes[None, :]), grid.shape))

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            _check_same(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Gradient-like field stored in the polar frame ``(e_r, e_theta)``."""

    grid: AnnulusGrid
    radial: np.ndarray
    angular: np.ndarray

    @property
    def x(self) -> np.ndarray:
        g = self.grid
        return g.cos_t * self.radial - g.sin_t * self.angular

    @property
    def y(self) -> np.ndarray:
        g = self.grid
        return g.sin_t * self.radial + g.cos_t * self.angular

    @classmethod
    def from_cartesian(cls, grid: AnnulusGrid, vx, vy) -> "VectorField":
        return cls(grid, grid.cos_t * vx + grid.sin_t * vy, -grid.sin_t * vx + grid.cos_t * vy)

    def norm_sq(self) -> np.ndarray:
        return self.radial**2 + self.angular**2


def _check_same(*fields) -> AnnulusGrid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid is not g and f.grid.spec != g.spec:
            raise GridMismatchError("fields live on different grids")
    return g


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    return VectorField(g, g.d_r(f.values), g.d_theta(f.values) / g.R)


def divergence(v: VectorField) -> ScalarField:
    """Divergence built from the same radial/angular operators as ``gradient``.

    ``integrate(f * divergence(grad g)) == -dirichlet_inner(f, g)`` exactly when
    ``f`` vanishes on both circles (summation by parts).
    """
    g = v.grid
    return ScalarField(g, (g.d_r(g.R * v.radial) + g.d_theta(v.angular)) / g.R)


def laplacian(f: ScalarField) -> ScalarField:
    """``divergence(gradient(f))``, i.e. ``(1/r) D(r D f) + f_theta_theta / r^2``."""
    g = f.grid
    u = f.values
    return ScalarField(g, g.d_r(g.R * g.d_r(u)) / g.R + g.d_theta2(u) / g.R**2)


def integrate(f: ScalarField) -> float:
    return float(np.sum(f.grid.quad_weights * f.values))


def dirichlet_inner(f: ScalarField, g: ScalarField) -> float:
    grid = _check_same(f, g)
    return _dirichlet(grid, f.values, g.values)


def _dirichlet(grid: AnnulusGrid, u: np.ndarray, v: np.ndarray) -> float:
    W = grid.quad_weights
    if u is v:
        ur, ut = grid.d_r(u), grid.d_theta(u)
        return float(np.sum(W * (ur * ur + ut * ut / grid.R**2)))
    return float(
        np.sum(W * (grid.d_r(u) * grid.d_r(v) + grid.d_theta(u) * grid.d_theta(v) / grid.R**2))
    )


def theta_modes(f: ScalarField) -> np.ndarray:
    """Angular Fourier coefficients ``c_k(r)``, ``f = sum_k c_k e^{ik theta}``.

    Shape ``(n_r, n_theta)``; column ``j`` holds wavenumber ``mode_numbers(grid)[j]``.
    """
    return np.fft.fft(f.values, axis=1) / f.grid.spec.n_theta


def inverse_theta_modes(grid: AnnulusGrid, coeffs: np.ndarray) -> ScalarField:
    return ScalarField(grid, np.fft.ifft(coeffs * grid.spec.n_theta, axis=1).real)


def mode_numbers(grid: AnnulusGrid) -> np.ndarray:
    n = grid.spec.n_theta
    return np.rint(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
