"""Projected Sobolev-gradient descent of E over the discrete class F_m.

Iterates are kept normalized to ``|grad a|^2 + |grad b|^2 = 2``; E is scale
invariant, so this only removes the neutral direction.  The line search is
monotone: every accepted iterate has smaller E than the previous one.  The
sufficient-decrease test uses the energy increment computed from the step itself
(``_Workspace.energy_change``), which stays accurate when the decrease is far
below the round-off of E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import EnergyEval, _Workspace, sobolev_gradient_arrays
from .equivariance import FieldPair, check_order, project_arrays, random_equivariant
from .grid import AnnulusGrid, GridSpec, ScalarField, _dirichlet, build_grid
from .poisson import DegenerateInputError

INIT_MODES = ("xy", "random_equivariant", "from_file")


@dataclass(frozen=True)
class MinimizeConfig:
    spec: GridSpec
    m: int
    max_iters: int = 10_000
    grad_tol: float = 1e-7
    initial_step: float = 1.0
    step_growth: float = 2.0
    backtrack: float = 0.5
    min_step: float = 1e-14
    armijo: float = 1e-4
    seed: int = 0
    init: str = "random_equivariant"
    init_path: str | None = None
    # amplitude of the random F_m perturbation added to (x, y)
    perturbation: float = 0.1
    concentration_cells: int = 8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("grad_tol", "initial_step", "min_step", "armijo"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.step_growth < 1:
            raise ValueError("step_growth must be >= 1")
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}")
        if self.init == "from_file" and not self.init_path:
            raise ValueError("init='from_file' needs init_path")
        if self.m < 1 or int(self.m) != self.m:
            raise ValueError("m must be an integer >= 1")
        if self.concentration_cells < 2:
            raise ValueError("concentration_cells must be >= 2")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    energy: float
    grad_norm: float
    step: float  # step that produced this iterate (0 for the initial pair)
    concentration: float  # max cell fraction of |grad phi|^2


@dataclass
class Trace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([r.grad_norm for r in self.records])

    def is_monotone(self, slack: float = 0.0) -> bool:
        """Non-increasing energies (late decrements can be below one ulp of E)."""
        e = self.energies
        return bool(np.all(e[1:] <= e[:-1] + slack * np.abs(e[:-1])))


@dataclass
class Solution:
    pair: FieldPair
    eval: EnergyEval
    m: int
    trace: Trace
    converged: bool
    grad_norm: float
    # "grad_tol", "max_iters" or "stall"
    stop_reason: str

    @property
    def grid(self) -> AnnulusGrid:
        return self.pair.grid

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


# -- concentration ------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationReport:
    cell_fraction_nu: float
    cell_fraction_mu: float
    cells: int
    # polar box size: (radial width, angular width)
    cell_size: tuple[float, float]


def _cell_index(grid: AnnulusGrid, cells: int):
    r0 = grid.spec.r0
    ir = np.minimum(((grid.r_nodes - r0) / (1.0 - r0) * cells).astype(int), cells - 1)
    it = np.minimum((grid.theta_nodes / (2.0 * np.pi) * cells).astype(int), cells - 1)
    return ir, it


def cell_masses(grid: AnnulusGrid, density: np.ndarray, cells: int) -> np.ndarray:
    """``cells x cells`` array of ``int density`` over equal polar boxes (radial x angular)."""
    ir, it = _cell_index(grid, cells)
    w = grid.quad_weights * density
    out = np.zeros((cells, cells))
    np.add.at(out, (ir[:, None], it[None, :]), w)
    return out


def _max_fraction(grid, density, cells) -> float:
    cm = cell_masses(grid, density, cells)
    total = cm.sum()
    if total <= 0:
        return 0.0
    return float(min(max(cm.max() / total, 0.0), 1.0))


def _grad_sq(grid: AnnulusGrid, u: np.ndarray) -> np.ndarray:
    return grid.d_r(u) ** 2 + (grid.d_theta(u) / grid.R) ** 2


def _densities(grid: AnnulusGrid, a: np.ndarray, b: np.ndarray, phi: np.ndarray):
    return 0.5 * (_grad_sq(grid, a) + _grad_sq(grid, b)), _grad_sq(grid, phi)


def concentration_report(p: FieldPair, cells: int = 8, phi: ScalarField | None = None) -> ConcentrationReport:
    """Largest share of the measures ``mu = |grad a|^2/2 + |grad b|^2/2`` and ``nu = |grad phi|^2``
    carried by a single polar box.

    A heuristic surrogate for concentration of a minimizing sequence, never a verdict.
    """
    if cells < 2:
        raise ValueError("cells must be >= 2")
    g = p.grid
    if phi is None:
        from .energy import evaluate

        phi = evaluate(p).phi
    mu, nu = _densities(g, p.a.values, p.b.values, phi.values)
    size = ((1.0 - g.spec.r0) / cells, 2.0 * np.pi / cells)
    return ConcentrationReport(_max_fraction(g, nu, cells), _max_fraction(g, mu, cells), cells, size)


# -- descent ------------------------------------------------------------------


def _normalize(grid: AnnulusGrid, a: np.ndarray, b: np.ndarray):
    n = _dirichlet(grid, a, a) + _dirichlet(grid, b, b)
    if not n > 0:
        raise DegenerateInputError("pair has zero Dirichlet energy")
    s = math.sqrt(2.0 / n)
    return a * s, b * s


def initial_pair(cfg: MinimizeConfig, grid: AnnulusGrid) -> FieldPair:
    if cfg.init == "xy":
        return FieldPair.xy(grid)
    if cfg.init == "random_equivariant":
        return FieldPair.xy(grid) + random_equivariant(grid, cfg.m, cfg.seed).scaled(cfg.perturbation)
    from .io import load_solution

    spec, _, a, b = load_solution(cfg.init_path)
    if spec != grid.spec:
        from .grid import GridMismatchError

        raise GridMismatchError(f"file grid {spec} differs from configured grid {grid.spec}")
    return FieldPair.from_arrays(grid, a, b)


def _h1_sq(grid, ga, gb) -> float:
    W = grid.quad_weights
    return (_dirichlet(grid, ga, ga) + _dirichlet(grid, gb, gb)
            + float(np.sum(W * (ga * ga + gb * gb))))


def minimize(cfg: MinimizeConfig, grid: AnnulusGrid | None = None, callback=None) -> Solution:
    """Minimize E over F_m starting from ``cfg.init``.

    Stops when the H^1 norm of the projected Sobolev gradient is ``<= grad_tol``
    (converged), after ``max_iters`` descent steps, or when backtracking falls
    below ``min_step`` (stall).  In the last two cases the final (best) iterate is
    returned with ``converged=False``.  Deterministic for a fixed config.

    ``callback(record, a, b)`` is called for every iterate (including the first)
    with the current arrays (callers must not modify them).
    """
    if grid is None:
        grid = build_grid(cfg.spec)
    elif grid.spec != cfg.spec:
        raise ValueError("grid does not match cfg.spec")
    m = check_order(grid, cfg.m)
    p0 = initial_pair(cfg, grid)
    a, b = project_arrays(grid, m, p0.a.values, p0.b.values)
    a, b = _normalize(grid, a, b)
    ws = _Workspace(grid, a, b)

    trace = Trace()
    step, last_step = cfg.initial_step, 0.0
    it = 0
    while True:
        ga, gb = sobolev_gradient_arrays(ws, m)
        gn2 = _h1_sq(grid, ga, gb)
        gn = math.sqrt(max(gn2, 0.0))
        conc = _max_fraction(grid, _grad_sq(grid, ws.phi), cfg.concentration_cells)
        trace.append(TraceRecord(it, ws.E, gn, last_step, conc))
        if callback is not None:
            callback(trace.records[-1], ws.a, ws.b)
        if gn <= cfg.grad_tol:
            reason = "grad_tol"
            break
        if it >= cfg.max_iters:
            reason = "max_iters"
            break
        s = step * cfg.step_growth
        accepted = None
        while s >= cfg.min_step:
            dE = ws.energy_change(-s * ga, -s * gb)
            if dE <= -cfg.armijo * s * gn2 and dE < 0:
                na, nb = project_arrays(grid, m, ws.a - s * ga, ws.b - s * gb)
                try:
                    na, nb = _normalize(grid, na, nb)
                    accepted = _Workspace(grid, na, nb)
                except DegenerateInputError:
                    s *= cfg.backtrack
                    continue
                # the accurate increment, not the re-evaluated value, carries the trace
                accepted.E = ws.E + dE
                break
            s *= cfg.backtrack
        if accepted is None:
            reason = "stall"
            break
        ws, step, last_step = accepted, s, s
        it += 1

    pair = FieldPair.from_arrays(grid, ws.a, ws.b)
    return Solution(pair, ws.to_eval(), m, trace, reason == "grad_tol", gn, reason)


def minimize_best_of(cfg: MinimizeConfig, seeds, grid: AnnulusGrid | None = None):
    """Run ``minimize`` for each seed; return ``(best, energies)``.

    Distinct final energies across seeds indicate distinct critical points and are
    returned as-is, not reconciled.
    """
    if grid is None:
        grid = build_grid(cfg.spec)
    sols = [minimize(replace(cfg, seed=int(s)), grid) for s in seeds]
    if not sols:
        raise ValueError("need at least one seed")
    best = min(sols, key=lambda s: (not s.converged, s.eval.value))
    return best, [s.eval.value for s in sols]


# -- threshold ----------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdReport:
    """Compare ``sqrt(m) * G_hat`` with ``E_xy``.

    ``G_hat`` comes from an unconstrained (m=1) descent and is an upper estimate
    of the infimum G over all pairs.  ``condition_met`` is therefore evidence,
    not proof, that ``sqrt(m) * G > E_xy >= G_m``: deciding it needs G itself.
    """

    E_xy: float
    G_hat: float
    m: int
    sqrt_m_times_G_hat: float
    condition_met: bool
    g_hat_run_energy: float
    g_hat_converged: bool
    g_hat_iterations: int


def energy_xy(spec: GridSpec, grid: AnnulusGrid | None = None) -> float:
    grid = grid if grid is not None else build_grid(spec)
    return _Workspace(grid, grid.x, grid.y).E


def threshold_report(E_xy: float, G_hat: float, m: int, **run) -> ThresholdReport:
    if m < 1:
        raise ValueError("m must be >= 1")
    v = math.sqrt(m) * G_hat
    return ThresholdReport(E_xy, G_hat, int(m), v, bool(v > E_xy),
                           run.get("g_hat_run_energy", G_hat), run.get("g_hat_converged", True),
                           run.get("g_hat_iterations", 0))


def estimate_g(spec: GridSpec, budget: MinimizeConfig | None = None):
    """Upper estimate of G from an m=1 run; ``(G_hat, solution, E_xy)``.

    (x, y) is itself admissible, so ``G_hat = min(run energy, E_xy)``.
    """
    budget = budget if budget is not None else MinimizeConfig(spec, 1, max_iters=2000, grad_tol=1e-6)
    cfg = replace(budget, spec=spec, m=1)
    grid = build_grid(spec)
    e_xy = energy_xy(spec, grid)
    sol = minimize(cfg, grid)
    return min(sol.eval.value, e_xy), sol, e_xy


def threshold_check(spec: GridSpec, m: int, budget: MinimizeConfig | None = None) -> ThresholdReport:
    g_hat, sol, e_xy = estimate_g(spec, budget)
    return threshold_report(e_xy, g_hat, m, g_hat_run_energy=sol.eval.value,
                            g_hat_converged=sol.converged, g_hat_iterations=sol.iterations)


def smallest_threshold_order(E_xy: float, G_hat: float, m_max: int = 64) -> int | None:
    """Smallest ``m <= m_max`` with ``sqrt(m) * G_hat > E_xy``, or ``None``."""
    for m in range(1, m_max + 1):
        if math.sqrt(m) * G_hat > E_xy:
            return m
    return None
