"""Bivariate isotonic matrix estimation under unknown row/column permutations."""

from .core import (
    GroundTruth,
    apply_permutations,
    compose_permutations,
    frob_error,
    gen_noisy_sorting,
    gen_random_biso,
    gen_sst,
    identity_permutation,
    invert_permutation,
    is_biso,
    is_permutation,
    random_permutation,
    read_matrix_csv,
    variation,
    write_matrix_csv,
)
from .estimators import (
    DEFAULT_THRESHOLD_SCALE,
    DEFAULT_ZETA,
    PAPER_THRESHOLD_CONSTANT,
    Blocking,
    ComparisonGraph,
    EstimatorConfig,
    ThresholdParams,
    block_columns,
    build_row_graph,
    column_presort,
    estimate_borda,
    estimate_exact_n,
    estimate_oracle,
    estimate_tds,
    tds_permutations,
    topological_sort,
)
from .isotonic import (
    ProjectionConfig,
    ProjectionResult,
    pava,
    project_biso,
    project_biso_full,
    project_biso_permuted,
)
from .sampling import (
    NoiseSpec,
    Observation,
    ObservationSet,
    aggregate_y,
    observe_each_entry,
    p_obs,
    read_observations_csv,
    sample_poissonized,
    split_observations,
    write_observations_csv,
)
from .theory import ConcentrationReport, check_l2_tv_l1, check_threshold_sort, empirical_parsum_check

__version__ = "0.1.0"
