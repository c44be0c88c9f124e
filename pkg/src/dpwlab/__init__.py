"""Numerical laboratory for loop-group construction of CMC surfaces.

Subpackages
-----------
loops
    Twisted SL(2,C) matrix-loop arithmetic (coefficients + circle samples).
potentials
    The off-diagonal z^k potential family, gauge transformations and the
    reduction chain for k = -2.
holonomy
    Path integration of dL = L*xi, monodromy reports, closing residuals.
frobenius
    Log-series solution engine at the regular singular point and the
    dressing-isotropy kernel certificate.
factorization
    Unitary/positive loop splitting via block-Toeplitz spectral
    factorization (plus an experimental indefinite variant).
sym
    Frame-to-ambient-space evaluation (Sym-Bobenko and Sym formulas).
surface
    Grid orchestration: integrate, split, map; closure defects, discrete
    mean curvature, mesh export.
cli
    Command-line interface (gen / monodromy / verify / export).
"""

from . import errors
from .loops import CircleGrid, LoopMatrix, loop_mul, loop_inverse, loop_eval, \
    loop_star, lambda_derivative
from .potentials import Potential, GaugeLoop, make_xi, vacuum, apply_gauge, \
    invert_z, section5_chain, normalize_c, k_equivalence_certificate
from .holonomy import PathSpec, BranchTracker, integrate, monodromy, closing_residual
from .frobenius import LogSeries, FrobeniusSolution, build_frobenius, \
    analytic_monodromy, isotropy_probe, isotropy_kernel, wplus_ode_residuals
from .factorization import IwasawaPair, CellReport, spectral_factorize, \
    iwasawa_su2, iwasawa_su11
from .sym import AmbientPoint, sym_bobenko, sym_sl2r, translational_period
from .surface import DomainGrid, SurfaceMesh, generate, closure_defect, \
    verify_cmc, export_mesh

__all__ = [
    "errors", "CircleGrid", "LoopMatrix", "loop_mul", "loop_inverse",
    "loop_eval", "loop_star", "lambda_derivative",
    "Potential", "GaugeLoop", "make_xi", "vacuum", "apply_gauge", "invert_z",
    "section5_chain", "normalize_c", "k_equivalence_certificate",
    "PathSpec", "BranchTracker", "integrate", "monodromy", "closing_residual",
    "LogSeries", "FrobeniusSolution", "build_frobenius", "analytic_monodromy",
    "isotropy_probe", "isotropy_kernel", "wplus_ode_residuals",
    "IwasawaPair", "CellReport", "spectral_factorize", "iwasawa_su2",
    "iwasawa_su11",
    "AmbientPoint", "sym_bobenko", "sym_sl2r", "translational_period",
    "DomainGrid", "SurfaceMesh", "generate", "closure_defect", "verify_cmc",
    "export_mesh",
]
