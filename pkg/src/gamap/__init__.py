"""gamap: supervised geometry-aware linear mapping with an experiment harness.

The library learns an orthonormal projection that compacts within-class
neighborhoods and spreads between-class ones (a signed-graph cost
minimized by conjugate gradient over the frame manifold), then evaluates
classifiers and dimensionality reductions in the original vs mapped
space.
"""

from .affinity import AffinityGraph, NeighborSets, build_affinity, neighbor_sets, signed_laplacian
from .classifiers import fit_knn, fit_ldc, fit_linear_svm, fit_qdc, fit_tree, predict
from .config import ExperimentConfig, load_config, parse_config, render_config
from .dataset import (
    LabeledDataset,
    SplitSpec,
    StandardizeStats,
    load_csv,
    load_hsb,
    save_csv,
    save_hsb,
    split_per_class,
    standardize,
)
from .dr import DrModel, apply_dr, fit_kpca, fit_lda, fit_mfa, fit_pca
from .errors import ConfigError, DataError, GamapError, NumericalError
from .mapping import (
    GamModel,
    GamParams,
    cost,
    euclidean_gradient,
    fit,
    load_model,
    save_model,
    spectral_oracle,
    transform,
    transform_dataset,
)
from .metrics import ConfusionMatrix, average_accuracy, cohen_kappa, confusion, overall_accuracy
from .stiefel import (
    CgOptions,
    OptResult,
    OrthonormalFrame,
    TangentVector,
    Termination,
    minimize_cg,
    project_tangent,
    random_frame,
    retract,
    transport,
)

__version__ = "0.1.0"
