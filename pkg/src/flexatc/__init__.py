"""Desk-scale simulator and certificate harness for the flexible
adapt-then-combine family of decentralized composite-optimization
algorithms with probabilistic communication skipping."""

from .analysis import (
    CertificateError,
    ComplexityEstimate,
    FixedPoint,
    complexity,
    fixed_point,
    lemma2_check,
    sweep_certificates,
    theorem1_step_check,
    theorem2_check,
    zeta_c,
    zeta_rate,
)
from .combiners import CombinerError, CombinerPair, custom_pair, preset, sigma_m, validate
from .graph import (
    GraphError,
    MixingMatrix,
    Topology,
    gen_topology,
    lazify,
    metropolis_weights,
    spectral_gap,
)
from .linalg import (
    LinalgError,
    SpectralDecomposition,
    SymMatrix,
    kron_apply,
    min_nonzero_eig,
    psd_sqrt,
    range_solve,
    sym_eig,
)
from .problem import (
    Dataset,
    LogisticLoss,
    ParseError,
    ProblemInstance,
    ProxSpec,
    QuadraticLoss,
    build_instance,
    logistic_instance,
    parse_libsvm,
    partition,
    quadratic_instance,
    serialize_libsvm,
)
from .solver import (
    CoinSequence,
    DivergenceError,
    RunTrace,
    SolverState,
    centralized_proxgrad,
    flexatc_step,
    initial_state,
    mirror_step,
    primal_recursion_step,
    run,
)

__version__ = "0.1.0"
