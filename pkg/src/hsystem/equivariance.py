"""The symmetry class F_m of pairs commuting with the rotation by ``2*pi/m``.

With ``w = a + i b`` and ``w(r, theta) = sum_k c_k(r) e^{ik theta}``, the condition
``Theta o A = A o Theta`` is ``w(e^{i alpha} z) = e^{i alpha} w(z)``, i.e. only
wavenumbers ``k = 1 (mod m)`` survive.  ``equivariance_defect`` checks the
condition directly on the grid, independently of this characterization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import AnnulusGrid, ScalarField, _check_same, mode_numbers


@dataclass(frozen=True, eq=False)
class FieldPair:
    a: ScalarField
    b: ScalarField

    def __post_init__(self):
        _check_same(self.a, self.b)

    @property
    def grid(self) -> AnnulusGrid:
        return self.a.grid

    @classmethod
    def from_arrays(cls, grid: AnnulusGrid, a: np.ndarray, b: np.ndarray) -> "FieldPair":
        return cls(ScalarField(grid, a), ScalarField(grid, b))

    @classmethod
    def xy(cls, grid: AnnulusGrid) -> "FieldPair":
        """The pair ``(a, b) = (x, y)``."""
        return cls.from_arrays(grid, grid.x, grid.y)

    def scaled(self, t: float) -> "FieldPair":
        return FieldPair(self.a * t, self.b * t)

    def __add__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.a + other.a, self.b + other.b)

    def __sub__(self, other: "FieldPair") -> "FieldPair":
        return FieldPair(self.a - other.a, self.b - other.b)


def check_order(grid: AnnulusGrid, m: int) -> int:
    if int(m) != m or m < 1:
        raise ValueError(f"symmetry order must be an integer >= 1, got {m}")
    if grid.spec.n_theta % m:
        raise ValueError(f"m={m} does not divide n_theta={grid.spec.n_theta}")
    return int(m)


def allowed_modes(grid: AnnulusGrid, m: int) -> np.ndarray:
    """Boolean mask over FFT columns of the wavenumbers kept in F_m.

    Only ``|k| <= grid.max_mode`` (about ``n_theta / 4``) is kept: the bracket of two
    such fields then has angular content below ``n_theta / 2`` and is computed
    without aliasing.
    """
    k = mode_numbers(grid)
    return ((k - 1) % m == 0) & (np.abs(k) <= grid.max_mode)


def project_arrays(grid: AnnulusGrid, m: int, a: np.ndarray, b: np.ndarray):
    w_hat = np.fft.fft(a + 1j * b, axis=1)
    w_hat[:, ~allowed_modes(grid, m)] = 0.0
    w = np.fft.ifft(w_hat, axis=1)
    return w.real.copy(), w.imag.copy()


def project_fm(p: FieldPair, m: int) -> FieldPair:
    """L2-orthogonal projection of ``p`` onto the discrete F_m."""
    g = p.grid
    check_order(g, m)
    return FieldPair.from_arrays(g, *project_arrays(g, m, p.a.values, p.b.values))


def rotate_pair_arrays(grid: AnnulusGrid, m: int, a: np.ndarray, b: np.ndarray, power: int = 1):
    """``A^{-p} o Theta o A^p``: shift the domain by ``p`` steps of ``2*pi/m`` and rotate back the target.

    F_m pairs are fixed points of this map.
    """
    s = grid.rotation_shift(m) * power
    alpha = 2.0 * np.pi * power / m
    ca, sa = np.cos(alpha), np.sin(alpha)
    a_s, b_s = np.roll(a, -s, axis=1), np.roll(b, -s, axis=1)
    return ca * a_s + sa * b_s, -sa * a_s + ca * b_s


def equivariance_defect(p: FieldPair, m: int) -> float:
    """Node max of ``|Theta o A - A o Theta|`` for the rotation ``A`` by ``2*pi/m``."""
    g = p.grid
    check_order(g, m)
    a, b = p.a.values, p.b.values
    s = g.rotation_shift(m)
    alpha = 2.0 * np.pi / m
    lhs_a, lhs_b = np.roll(a, -s, axis=1), np.roll(b, -s, axis=1)
    rhs_a = np.cos(alpha) * a - np.sin(alpha) * b
    rhs_b = np.sin(alpha) * a + np.cos(alpha) * b
    return float(np.max(np.hypot(lhs_a - rhs_a, lhs_b - rhs_b)))


def random_equivariant(grid: AnnulusGrid, m: int, seed: int, decay: float = 0.5,
                       radial_degree: int = 4) -> FieldPair:
    """Random smooth pair in F_m.

    Allowed wavenumbers ``k = 1 (mod m)`` get coefficients ``decay^|k| * p_k(r)`` with
    ``p_k`` a random complex Chebyshev series of degree ``radial_degree``.  The
    constant mode is never populated, so both components have zero mean.
    """
    check_order(grid, m)
    if decay <= 0:
        raise ValueError("decay must be positive")
    rng = np.random.default_rng(seed)
    k = mode_numbers(grid)
    keep = allowed_modes(grid, m) & (k != 0)
    amp = np.zeros(grid.spec.n_theta)
    amp[keep] = decay ** np.abs(k[keep].astype(float))
    # drop modes below double precision relative to the largest amplitude
    keep &= amp > 1e-16 * amp.max()
    s = 2.0 * (grid.r_nodes - grid.spec.r0) / (1.0 - grid.spec.r0) - 1.0
    cheb = np.polynomial.chebyshev.chebvander(s, radial_degree)
    w_hat = np.zeros(grid.shape, dtype=complex)
    for j in np.flatnonzero(keep):
        z = rng.standard_normal(radial_degree + 1) + 1j * rng.standard_normal(radial_degree + 1)
        w_hat[:, j] = amp[j] * (cheb @ z) / np.sqrt(radial_degree + 1)
    w = np.fft.ifft(w_hat * grid.spec.n_theta, axis=1)
    return FieldPair.from_arrays(grid, w.real, w.imag)
