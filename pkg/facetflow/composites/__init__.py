from .psi import (
    PsiSpec,
    psi_eval,
    psi_prime,
    Psi_eval,
    psi_limit,
    Psi_limit,
    monotone_convergence,
    check_composite_inequalities,
)
from .truncation import (
    TruncationParams,
    truncate_gradient,
    v_eps_field,
    w_eps_field,
    w_components,
    compatibility_constant,
    vw_margins,
)
from .exponents import ExponentBook, MoserLadder
