"""Complete dictionary recovery over the sphere.

Instances ``Y = A0 X0`` with Bernoulli-Gaussian coefficients are recovered by
minimizing a smoothed l1 objective over the unit sphere with a Riemannian
trust-region method, one dictionary direction per sign-distinct minimizer.
"""

__version__ = "0.1.0"

from dlsphere.adm import adm_learn, dispersion_experiment, polar_factor, soft_threshold
from dlsphere.geometry import (
    RegionSpec,
    SurfaceConfig,
    classify_region,
    expectation_mc,
    export_surface,
    probe,
    sample_region,
    verify_landscape,
)
from dlsphere.metrics import grad_check, hungarian, jacobian_check, recovery_error, signed_perm_align
from dlsphere.model import CoefficientModel, Instance, make_instance, sample_bg, sample_coefficients, synthesize
from dlsphere.precond import perturbation_norm, precondition
from dlsphere.solver import (
    TrmOptions,
    dedup_signed,
    multistart,
    recover_dictionary,
    retract,
    tr_subproblem,
    trm_solve,
)

__all__ = [
    "CoefficientModel",
    "Instance",
    "RegionSpec",
    "SurfaceConfig",
    "TrmOptions",
    "adm_learn",
    "classify_region",
    "dedup_signed",
    "dispersion_experiment",
    "expectation_mc",
    "export_surface",
    "grad_check",
    "hungarian",
    "jacobian_check",
    "make_instance",
    "multistart",
    "perturbation_norm",
    "polar_factor",
    "precondition",
    "probe",
    "recover_dictionary",
    "recovery_error",
    "retract",
    "sample_bg",
    "sample_coefficients",
    "sample_region",
    "signed_perm_align",
    "soft_threshold",
    "synthesize",
    "tr_subproblem",
    "trm_solve",
    "verify_landscape",
]
