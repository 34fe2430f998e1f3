from .model import (
    EnergyModel,
    SubgradientSet,
    eval_energy,
    subdifferential_E1,
    grad_energy,
    hess_energy,
    limit_flux,
    ellipticity_ratio,
)
from .mollify import (
    QuadSpec,
    RadialProfile,
    MollifiedDensity,
    mollify_density,
    eval_mollified,
    grad_mollified,
    hess_mollified,
    mollifier_moment,
    jensen_gap,
)
from .structure import (
    SampleSpec,
    InequalityResult,
    StructureReport,
    verify_structural,
    calibrate_constants,
    verify_exact_structure,
    ellipticity_ratio_mollified,
    flux_convergence_study,
)
