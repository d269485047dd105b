"""Compositional covariates for count regression.

Aitchison-simplex data types and logratio transforms, PCA and
exponential-family PCA of coordinate matrices, negative binomial
regression with exposure offsets, chi-square calibration checks, and a
reproducible end-to-end pipeline with a CLI.
"""

from .composition import (
    Composition,
    CompositionMatrix,
    CountTable,
    aitchison_inner,
    amalgamate,
    close,
    geometric_mean,
    replace_zeros,
    row_proportions,
)
from .errors import (
    AllZeroError,
    AllZeroExpectedError,
    ClosureError,
    CodaError,
    DimensionMismatchError,
    DomainError,
    EmptyRowError,
    EmptySplitError,
    IndexOutOfRangeError,
    MissingColumnError,
    MissingCovarianceError,
    NonConvergenceWarning,
    RankDeficientError,
    TypeParseError,
    UnknownCategoryError,
    UnknownLabelError,
    WrongMethodError,
    ZeroComponentError,
    ZeroReplacementWarning,
)
from .factorization import (
    BregmanSpec,
    CompositionalEPCA,
    CompositionalPCA,
    EpcaOptions,
    FactorizationResult,
    bregman,
    epca_fit,
    epca_gradient,
    epca_loss,
    epca_project,
    pca_fit,
    variance_explained,
)
from .logratio import (
    ContrastMatrix,
    LogratioTransformer,
    LogratioVector,
    alr,
    clr,
    clr_inv,
    contrast_matrix,
    ilr,
    ilr_inv,
    transform_matrix,
)
from .nbglm import (
    DesignMatrix,
    NegativeBinomialRegressor,
    NegBinFit,
    WaldTable,
    backtransform_ilr_coeffs,
    fit_compositional_linear,
    nb_fit,
    nb_loglik,
    nb_mean_var,
    nb_pmf,
    nb_predict,
    wald,
)
from .pipeline import (
    Dataset,
    ModelFrame,
    ModelInputs,
    PipelineConfig,
    RunReport,
    build_model_frame,
    emit_report,
    load_dataset,
    preprocess,
    run_model,
    split_by_year,
)
from .validation import (
    ChiSquareReport,
    chi_square_report,
    observed_counts,
    pearson_chisq,
    predicted_counts,
    scatter_data,
)

__version__ = "0.1.0"
