"""vinecast: realized covariance forecasting through partial-correlation
vines, with Cholesky and naive benchmarks and portfolio evaluation."""

__version__ = "0.1.0"

from .matrix_core import (  # noqa: F401
    CorrMatrix,
    CovMatrix,
    IntradayPanel,
    VarianceVector,
    assemble_cov,
    cholesky_decompose,
    cholesky_rebuild,
    fisher_z,
    fisher_z_inv,
    realized_cov,
    realized_cov_subsampled,
    split_cov,
)
from .pcor_algebra import (  # noqa: F401
    PcorVector,
    corr_to_pcv,
    pcor_all_from_corr,
    pcor_recursion,
    pcor_single_block,
    pcv_to_corr,
)
from .vine_structure import (  # noqa: F401
    EdgeConstraint,
    RVineStructure,
    all_constraints,
    build_cvine,
    constraint_sets,
    count_rvines,
    sample_random_rvine,
    validate,
)
