"""Sub-sampled Newton solvers with spectral-approximation certificates."""

from .problem import (
    Dataset,
    IterateState,
    Problem,
    Regularizer,
    elastic_net_extra,
    exact_hessian,
    get_loss,
    gradient,
    l1,
    objective,
    scaled_row_matrix,
)
from .sketch import (
    BoundParams,
    Sketch,
    SpectralReport,
    draw_sketch,
    effective_dimension,
    permutation_sketch,
    ridge_coherence,
    ridge_leverage_scores,
    sample_size,
    sampling_probabilities,
    spectral_epsilon,
    subsampled_hessian,
)
from .linsolve import SolveReport, cg_iteration_budget, solve_cg, solve_exact
from .prox import ProxInner, scaled_prox
from .solvers import (
    ConvergenceTrace,
    InexactSolve,
    SolverConfig,
    WorkerPartition,
    exact_newton_step,
    giant_step,
    make_partition,
    run,
    ssn_step,
    sspn_step,
)
from .verify import (
    DirectionQuality,
    EnvelopeReport,
    check_direction,
    check_envelope,
    check_prox_properties,
    check_step_recursion,
    estimate_lipschitz,
    phi,
)
from .synthetic import SyntheticSpec, generate_synthetic
from .loaders import load_csv, load_libsvm
from .estimators import SubsampledNewtonClassifier, SubsampledNewtonRegressor

__version__ = "0.1.0"
