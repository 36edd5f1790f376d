"""Monotone quantities, audits and barrier bounds."""

from fracreg.monitor.harnack_trace import (
    SubsolutionSpec,
    default_catalog,
    default_trace_fields,
    harnack_closed_form,
    harnack_constant,
    harnack_constant_sweep,
    harnack_grid,
    subsolution_run,
    trace_constant,
    trace_inequality_audit,
)
from fracreg.monitor.barriers import barrier_eta_audit, barrier_h, barrier_h_audit, solve_barrier_eta
from fracreg.monitor.fhm import ball_weights, fhm_eps_regularity_experiment, fhm_residual, psi
from fracreg.monitor.gl_audits import (
    clearing_out_experiment,
    eps_regularity_experiment,
    local_energy_bound_audit,
    phi_monotonicity_audit,
    phi_series,
    potential_bound_audit,
    remainder_identity_audit,
    remainder_terms,
    time_derivative_bound_audit,
)
from fracreg.monitor.quantities import (
    RangeError,
    cylinder_mask,
    e_density,
    field_at,
    integrate_piecewise_linear,
    periodized_gaussian,
    phi,
    q_terms,
    slab_integral,
    slab_nodes,
    thin_cylinder_mask,
)
from fracreg.report import AuditReport

__all__ = [
    "AuditReport",
    "RangeError",
    "SubsolutionSpec",
    "ball_weights",
    "barrier_eta_audit",
    "barrier_h",
    "barrier_h_audit",
    "clearing_out_experiment",
    "cylinder_mask",
    "default_catalog",
    "default_trace_fields",
    "e_density",
    "eps_regularity_experiment",
    "fhm_eps_regularity_experiment",
    "fhm_residual",
    "field_at",
    "harnack_closed_form",
    "harnack_constant",
    "harnack_constant_sweep",
    "harnack_grid",
    "integrate_piecewise_linear",
    "local_energy_bound_audit",
    "periodized_gaussian",
    "phi",
    "phi_monotonicity_audit",
    "phi_series",
    "potential_bound_audit",
    "psi",
    "q_terms",
    "remainder_identity_audit",
    "remainder_terms",
    "slab_integral",
    "slab_nodes",
    "solve_barrier_eta",
    "subsolution_run",
    "thin_cylinder_mask",
    "time_derivative_bound_audit",
    "trace_constant",
    "trace_inequality_audit",
]
