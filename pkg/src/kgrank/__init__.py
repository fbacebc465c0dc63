"""Thematic item-item recommendations on multilayer knowledge-graph models."""

from .dynamics import (
    PageRankConfig,
    PageRankSolution,
    SalienceMatrix,
    TransitionMatrix,
    apply_salience,
    build_transition_matrix,
    column_normalize,
    pagerank_linear,
    pagerank_power,
    solve_pagerank,
    uniform_teleport,
    unseeded_pagerank,
)
from .errors import (
    ConvergenceError,
    InputError,
    KgrankError,
    SolverError,
    UnknownEntityError,
)
from .evaluation import (
    BaselineContext,
    CutoffStats,
    EvalReport,
    PopularityTable,
    SignalTestResult,
    UserRelevance,
    baseline_rankings,
    dice_coefficient,
    max_relevance_item,
    nmrg_corpus,
    nmrg_user,
    thematic_signal_test,
)
from .graph import (
    EntitySet,
    InterlayerCouplings,
    IntraLayerBlock,
    Layer,
    RoleSchema,
    SupraAdjacency,
    build_supra_adjacency,
    compute_interlayer_couplings,
    merge_roles,
    shortest_path_lengths,
)
from .ingestion import (
    MovieRecord,
    PipelineReport,
    PreprocessConfig,
    RatingRecord,
    RatingsDataset,
    WeightingConfig,
    build_movie_kg,
    preprocess_ratings,
    split_train_test,
)
from .recommend import (
    FilterConfig,
    RankedList,
    Seed,
    SeedSpec,
    filter_thematic,
    make_teleport_vector,
    precompute_seed_rankings,
    rank_nodes,
    recommend,
)
from .tuning import (
    ParamSample,
    SearchResult,
    Trial,
    nmrg_evaluator,
    random_search,
    sample_parameters,
    teleport_sweep,
)

__version__ = "0.1.0"
