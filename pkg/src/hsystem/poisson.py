"""Jacobian bracket, the Dirichlet Poisson solve ``-lap(phi) = {a, b}``, and Wente diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import AnnulusGrid, ScalarField, _check_same, _dirichlet


class DegenerateInputError(ValueError):
    """Input violates a non-degeneracy precondition (zero gradient, phi == 0, ...)."""


def bracket_arrays(grid: AnnulusGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # same operators as gradient(); the discrete identity int phi{a,b} = int a{b,phi} depends on it
    ar, at = grid.d_r(a), grid.d_theta(a)
    br, bt = grid.d_r(b), grid.d_theta(b)
    return (ar * bt - at * br) / grid.R


def bracket(a: ScalarField, b: ScalarField) -> ScalarField:
    """``{a, b} = a_x b_y - a_y b_x``, evaluated as ``(a_r b_theta - a_theta b_r) / r``."""
    g = _check_same(a, b)
    return ScalarField(g, bracket_arrays(g, a.values, b.values))


def solve_dirichlet_array(grid: AnnulusGrid, f: np.ndarray) -> np.ndarray:
    phi = grid.solve_modes(grid.poisson_inverses, f, interior=True)
    phi[0] = 0.0
    phi[-1] = 0.0
    return phi


def solve_dirichlet(f: ScalarField) -> ScalarField:
    """Solve ``-lap(phi) = f`` in the interior with ``phi = 0`` on both circles.

    Each angular mode is an independent radial two-point problem; the factorized
    operators are cached on the grid.
    """
    return ScalarField(f.grid, solve_dirichlet_array(f.grid, f.values))


@dataclass(frozen=True)
class WenteReport:
    sup_norm_phi: float
    grad_norm_phi: float
    grad_norm_a: float
    grad_norm_b: float
    ratio: float


def wente_report(a: ScalarField, b: ScalarField) -> WenteReport:
    """Ratio ``(|phi|_inf + |grad phi|_2) / (|grad a|_2 |grad b|_2)``.

    The sup norm is the node maximum, so the value depends on the resolution.
    """
    g = _check_same(a, b)
    na = np.sqrt(_dirichlet(g, a.values, a.values))
    nb = np.sqrt(_dirichlet(g, b.values, b.values))
    # round-off leaves ~1e-15 relative gradient on constants
    flat = 1e-10 * np.sqrt(g.quad_weights.sum())
    if na <= flat * np.abs(a.values).max() or nb <= flat * np.abs(b.values).max():
        raise DegenerateInputError("wente_report needs non-constant a and b")
    phi = solve_dirichlet_array(g, bracket_arrays(g, a.values, b.values))
    sup = float(np.max(np.abs(phi)))
    nphi = float(np.sqrt(_dirichlet(g, phi, phi)))
    return WenteReport(sup, nphi, float(na), float(nb), (sup + nphi) / (na * nb))


def bracket_identity_residual(a: ScalarField, b: ScalarField, phi: ScalarField,
                             boundary_tol: float = 1e-10) -> float:
    """Relative defect of ``int phi {a,b} = int a {b,phi}`` (requires ``phi a = 0`` on the boundary)."""
    g = _check_same(a, b, phi)
    edge = np.concatenate([(phi.values * a.values)[0], (phi.values * a.values)[-1]])
    scale = 1.0 + float(np.max(np.abs(phi.values))) * float(np.max(np.abs(a.values)))
    if np.max(np.abs(edge)) > boundary_tol * scale:
        raise ValueError("phi * a must vanish on the boundary circles")
    W = g.quad_weights
    lhs = float(np.sum(W * phi.values * bracket_arrays(g, a.values, b.values)))
    rhs = float(np.sum(W * a.values * bracket_arrays(g, b.values, phi.values)))
    return abs(lhs - rhs) / (1.0 + abs(lhs))
