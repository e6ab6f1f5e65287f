"""Equivariant minimization of a conformally invariant energy on an annulus.

Critical points ``(a, b)`` of ``E(a, b) = (|grad a|^2 + |grad b|^2) / (2 |grad phi|)``,
with ``-lap(phi) = {a, b}`` and ``phi = 0`` on both circles, give solutions of the
H-system ``lap u = +-u_x ^ u_y`` through ``u = (lam a, lam b, lam^2 phi)``.
"""

__version__ = "0.1.0"

from .energy import (EnergyEval, energy_value, euler_lagrange_strong, evaluate, first_variation,
                     h1_inner, h1_norm, sobolev_gradient)
from .equivariance import (FieldPair, equivariance_defect, project_fm, random_equivariant)
from .grid import (AnnulusGrid, GridMismatchError, GridSpec, ScalarField, VectorField, build_grid,
                   dirichlet_inner, divergence, gradient, integrate, inverse_theta_modes,
                   laplacian, theta_modes)
from .minimizer import (ConcentrationReport, MinimizeConfig, Solution, ThresholdReport, Trace,
                        concentration_report, minimize, threshold_check)
from .poisson import (DegenerateInputError, WenteReport, bracket, bracket_identity_residual,
                      solve_dirichlet, wente_report)
from .surface import SurfaceMesh, assemble_map, double_surface, export_obj
from .verification import CertificateReport, HopfFit, certify, conformal_defect, hopf_fit
