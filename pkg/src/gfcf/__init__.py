"""Training-free collaborative filtering with graph filters."""

from .errors import (
    DenseCapError,
    DimensionError,
    GfcfError,
    InputError,
    NotLowPassMeasurable,
    NumericError,
    ParseError,
    ValidationError,
)
from .evaluation import (
    EvalReport,
    SplitDataset,
    evaluate,
    evaluate_cutoffs,
    holdout_split,
    load_split,
    ndcg_at_k,
    recall_at_k,
)
from .filters import (
    Diffusion,
    FilterResponse,
    IdealLowPass,
    LgcnIde,
    Linear,
    Neighborhood,
    apply_spectral_filter,
    evaluate_response,
    low_pass_ratio,
    parse_filter,
)
from .recommend import (
    Kind,
    RecommenderModel,
    ScoredSlate,
    fit_autoencoder,
    fit_model,
    recommend,
    score_gfcf,
    score_ideal_lowpass,
    score_lgcn_ide,
    score_neighborhood,
    top_n,
)
from .sparse import (
    InteractionMatrix,
    ItemGraphOperator,
    NormalizedMatrix,
    apply_gram,
    build_interactions,
    densify_item_graph,
    item_graph,
    normalize,
)
from .spectral import (
    GpmConfig,
    SpectralBasis,
    dense_spectral_oracle,
    generalized_power_method,
    load_basis,
    save_basis,
)

__version__ = "0.1.0"
