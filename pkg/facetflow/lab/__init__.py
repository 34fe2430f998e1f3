from .cylinder import ParabolicCylinder, CylinderSample
from .report import DiagnosticsReport, write_reports
from .principles import check_max_principle, check_comparison, ordered_boundary_pair
from .convergence import (
    run_sweep,
    epsilon_convergence_study,
    gradient_difference_matrix,
    gradient_sup_series,
)
from .ratios import (
    sup_estimate_ratio,
    reversed_holder_ratio,
    sup_vq_ratio,
    constant_stability,
    has_fitted_constant,
)
from .holder import parabolic_distance, holder_modulus_estimate, exponent_stability
from .pointwise import facet_fraction, vw_compatibility, euler_identity_residual
from .lemmas import (
    IterationInstance,
    AbsorbingInstance,
    moser_sequence,
    absorbing_constant,
    absorbing_lemma_check,
    random_moser_instance,
    random_absorbing_instance,
    fuzz_moser,
    fuzz_absorbing,
)
