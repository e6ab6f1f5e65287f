"""The scale-invariant energy ``E(a,b) = (|grad a|^2 + |grad b|^2) / (2 |grad phi|)`` and its variations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equivariance import FieldPair, check_order, project_arrays
from .grid import AnnulusGrid, ScalarField, _dirichlet, laplacian
from .poisson import DegenerateInputError, bracket_arrays, solve_dirichlet_array


@dataclass(frozen=True, eq=False)
class EnergyEval:
    value: float
    grad_a_sq: float
    grad_b_sq: float
    grad_phi_norm: float
    lam: float
    phi: ScalarField

    @property
    def lambda_sq(self) -> float:
        return self.lam * self.lam


class _Workspace:
    """Intermediate arrays of one energy evaluation, reused by the gradient."""

    __slots__ = ("grid", "a", "b", "ar", "at", "br", "bt", "phi", "A", "B", "P", "E")

    def __init__(self, grid: AnnulusGrid, a: np.ndarray, b: np.ndarray):
        self.grid, self.a, self.b = grid, a, b
        R, W = grid.R, grid.quad_weights
        self.ar, self.at = grid.d_r(a), grid.d_theta(a) / R
        self.br, self.bt = grid.d_r(b), grid.d_theta(b) / R
        self.A = float(np.sum(W * (self.ar**2 + self.at**2)))
        self.B = float(np.sum(W * (self.br**2 + self.bt**2)))
        # at, bt above are already divided by r: {a,b} = a_r (b_t/r) - (a_t/r) b_r
        f = self.ar * self.bt - self.at * self.br
        self.phi = solve_dirichlet_array(grid, f)
        self.P = _dirichlet(grid, self.phi, self.phi)
        N = self.A + self.B
        amp = max(float(np.abs(a).max()), float(np.abs(b).max()))
        if not N > 1e-20 * float(W.sum()) * amp * amp:
            raise DegenerateInputError("pair has zero Dirichlet energy")
        if not self.P > 1e-28 * N * N:
            raise DegenerateInputError("phi vanishes identically ({a,b} == 0); energy undefined")
        self.E = N / (2.0 * np.sqrt(self.P))

    def to_eval(self) -> EnergyEval:
        N = self.A + self.B
        lam = -np.sqrt(N / (2.0 * self.P))
        return EnergyEval(self.E, self.A, self.B, float(np.sqrt(self.P)), float(lam),
                          ScalarField(self.grid, self.phi))

    def energy_change(self, da: np.ndarray, db: np.ndarray) -> float:
        """``E(a + da, b + db) - E(a, b)`` assembled from the increments.

        Near a minimum the change is far below the round-off of E itself, so
        subtracting two evaluations is useless there; every term here is
        proportional to ``(da, db)`` and keeps its relative accuracy.
        Returns ``inf`` if the new pair is degenerate.
        """
        g = self.grid
        dN = _dirichlet(g, da, 2.0 * self.a + da) + _dirichlet(g, db, 2.0 * self.b + db)
        # {a+da, b+db} - {a, b} = {da, b} + {a+da, db}
        dphi = solve_dirichlet_array(g, bracket_arrays(g, da, self.b) + bracket_arrays(g, self.a + da, db))
        dP = _dirichlet(g, dphi, 2.0 * self.phi + dphi)
        N, P = self.A + self.B, self.P
        if not P + dP > 1e-28 * N * N:
            return float("inf")
        sp, sq = np.sqrt(P), np.sqrt(P + dP)
        return float(dN / (2.0 * sq) - N * dP / (2.0 * sp * sq * (sp + sq)))

    def stiffness(self, ur: np.ndarray, ut_over_r: np.ndarray) -> np.ndarray:
        """Euclidean gradient of ``0.5 * dirichlet(u, u)`` given ``(u_r, u_theta / r)``."""
        g = self.grid
        W = g.quad_weights
        return g.d_r_T(W * ur) - g.d_theta(W * ut_over_r / g.R)

    def euclidean_gradient(self):
        """``(G_a, G_b)`` with ``dE = sum(G_a * da + G_b * db)`` exactly for the discrete energy."""
        g = self.grid
        N = self.A + self.B
        phi_r, phi_t = g.d_r(self.phi), g.d_theta(self.phi) / g.R
        # adjoint solve: d|grad phi|^2 = 2 chi . d{a,b}
        chi = g.solve_modes(g.poisson_inverses, self.stiffness(phi_r, phi_t),
                            transpose=True, interior=True)
        chi_r = chi / g.R
        # at, bt carry 1/r already; the angular terms need it explicitly
        Ga = 2.0 * self.stiffness(self.ar, self.at) / N - (
            g.d_r_T(chi * self.bt) + g.d_theta(chi_r * self.br)) / self.P
        Gb = 2.0 * self.stiffness(self.br, self.bt) / N + (
            g.d_r_T(chi * self.at) + g.d_theta(chi_r * self.ar)) / self.P
        return self.E * Ga, self.E * Gb


def evaluate(p: FieldPair) -> EnergyEval:
    """Solve for phi and assemble ``E``, the Dirichlet norms and ``lambda``.

    Raises ``DegenerateInputError`` when ``{a,b}`` vanishes (phi == 0).
    """
    return _Workspace(p.grid, p.a.values, p.b.values).to_eval()


def energy_value(p: FieldPair) -> float:
    return _Workspace(p.grid, p.a.values, p.b.values).E


def first_variation(p: FieldPair, direction: FieldPair) -> float:
    """``d/dt E(p + t dir)`` at ``t = 0``.

    Uses the expansion before integration by parts: with ``psi`` the Dirichlet
    solution for ``{alpha,b} + {a,beta}``,
    ``dE = E * (2 <grad a, grad alpha> + 2 <grad b, grad beta>) / N - E * <grad phi, grad psi> / |grad phi|^2``.
    This is the exact derivative of the discrete energy.
    """
    g = p.grid
    ws = _Workspace(g, p.a.values, p.b.values)
    al, be = direction.a.values, direction.b.values
    N = ws.A + ws.B
    cross = _dirichlet(g, p.a.values, al) + _dirichlet(g, p.b.values, be)
    psi = solve_dirichlet_array(g, bracket_arrays(g, al, p.b.values) + bracket_arrays(g, p.a.values, be))
    return ws.E * (2.0 * cross / N - _dirichlet(g, ws.phi, psi) / ws.P)


def first_variation_ibp(p: FieldPair, direction: FieldPair) -> float:
    """Integrated-by-parts form ``... - E * int phi ({alpha,b} + {a,beta}) / |grad phi|^2``.

    Agrees with ``first_variation`` up to the discretization error of Green's identity.
    """
    g = p.grid
    ws = _Workspace(g, p.a.values, p.b.values)
    al, be = direction.a.values, direction.b.values
    N = ws.A + ws.B
    cross = _dirichlet(g, p.a.values, al) + _dirichlet(g, p.b.values, be)
    df = bracket_arrays(g, al, p.b.values) + bracket_arrays(g, p.a.values, be)
    return ws.E * (2.0 * cross / N - float(np.sum(g.quad_weights * ws.phi * df)) / ws.P)


def euler_lagrange_strong(p: FieldPair, e: EnergyEval | None = None) -> FieldPair:
    """Residual ``(-lap a - lambda^2 {b,phi}, -lap b - lambda^2 {phi,a})`` on interior nodes.

    Boundary circles are set to zero; their conditions are checked separately.
    """
    g = p.grid
    if e is None:
        e = evaluate(p)
    a, b, phi = p.a.values, p.b.values, e.phi.values
    lam2 = e.lambda_sq
    ra = -laplacian(p.a).values - lam2 * bracket_arrays(g, b, phi)
    rb = -laplacian(p.b).values - lam2 * bracket_arrays(g, phi, a)
    for r in (ra, rb):
        r[0] = 0.0
        r[-1] = 0.0
    return FieldPair.from_arrays(g, ra, rb)


def sobolev_gradient_arrays(ws: _Workspace, m: int):
    g = ws.grid
    Ga, Gb = ws.euclidean_gradient()
    ga = g.solve_modes(g.sobolev_inverses, Ga) / g.dtheta
    gb = g.solve_modes(g.sobolev_inverses, Gb) / g.dtheta
    return project_arrays(g, m, ga, gb)


def sobolev_gradient(p: FieldPair, m: int) -> FieldPair:
    """H^1 Riesz representative of the first variation, restricted to F_m.

    Solves ``(-lap + I) g = dE`` in weak form (natural, i.e. zero-Neumann, boundary
    conditions) mode by mode, then projects onto F_m.  For every F_m direction
    ``d``: ``h1_inner(g, d) == first_variation(p, d)``.
    """
    g = p.grid
    check_order(g, m)
    ws = _Workspace(g, p.a.values, p.b.values)
    return FieldPair.from_arrays(g, *sobolev_gradient_arrays(ws, m))


def h1_inner(p: FieldPair, q: FieldPair) -> float:
    g = p.grid
    W = g.quad_weights
    return (_dirichlet(g, p.a.values, q.a.values) + _dirichlet(g, p.b.values, q.b.values)
            + float(np.sum(W * (p.a.values * q.a.values + p.b.values * q.b.values))))


def h1_norm(p: FieldPair) -> float:
    return float(np.sqrt(max(h1_inner(p, p), 0.0)))
