"""Numerical laboratory for nonlocal operators with nonsymmetric jumping kernels."""

from .kernels import (
    Cone,
    Kernel,
    KernelSpec,
    TimeKernel,
    c_alpha_norm,
    decompose,
    kernel_from_config,
    make_coefficient_kernel,
    make_cone_kernel,
    make_drift_kernel,
    make_stable_kernel,
    time_modulate,
)
from .algebra import ChainRulePair, check_chain_rule_bounds, check_log_weight, check_weighted, eval_pair
from .discretize import (
    CutoffProfile,
    DiscreteForm,
    Grid,
    assemble,
    assemble_time,
    build_grid,
    carre_du_champ,
    form_value,
    layer_cake_weighted_form,
    transpose_form,
)
from .solve import (
    ParabolicProblem,
    Solution,
    default_dt,
    resolvent_solve,
    solve_dual_ext,
    solve_parabolic,
    theta_step,
)
from .quadrature import QuadSpec

__version__ = "0.1.0"
