"""Numerical laboratory for fractional Ginzburg-Landau boundary reactions.

Subpackages and modules:

core        parameters, kernels, Gaussians, Mittag-Leffler function
grid        thin and extended grids, fields, trajectories, snapshots
nonlocal_ops  lattice fractional Laplacian, parabolic operator, link operator
extension   weighted extension solver and Dirichlet-to-Neumann map
flow        IMEX Ginzburg-Landau flow, energies, Bochner diagnostics
monitor     monotone quantities and audits
harmonic    fractional harmonic map candidates
cli         experiment harness
"""

from fracreg.core import DomainError, FracParam, GaussianCenter
from fracreg.grid import ExtendedField, ExtendedGrid, ThinField, ThinGrid, Trajectory
from fracreg.report import AuditReport

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "DomainError",
    "ExtendedField",
    "ExtendedGrid",
    "FracParam",
    "GaussianCenter",
    "ThinField",
    "ThinGrid",
    "Trajectory",
    "__version__",
]
