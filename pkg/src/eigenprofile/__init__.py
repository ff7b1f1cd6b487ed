"""Spectral-spatial energy-profile features for hyperspectral classification.

The toolkit learns an orthogonal, maximum-energy spatial filter bank from
patch statistics of a characteristic image (the first principal component
by default), applies it to the leading components of a hyperspectral
cube, and classifies the stacked features with a polynomial-kernel
one-vs-one SVM under repeated stratified training draws.
"""

from .datacube import (
    CubeHeader,
    HyperCube,
    Image,
    LabelMap,
    expand_band_ranges,
    load_cube,
    load_labels,
    remove_bands,
    write_class_map,
)
from .errors import (
    ConfigError,
    DataIOError,
    DegenerateDataError,
    NumericalError,
    PipelineError,
)
from .evaluation import (
    ConfusionMatrix,
    MetricsReport,
    RunMetrics,
    SamplingScheme,
    average_accuracy,
    confusion,
    draw_training_set,
    kappa,
    monte_carlo,
    overall_accuracy,
)
from .filters import (
    CovarianceMatrix,
    FilterSelection,
    FilterSet,
    PatchMatrix,
    design_filter_set,
    extract_patches,
    patch_covariance,
    symmetric_eigen,
)
from .profiles import (
    EnergyProfile,
    FeatureMap,
    ScaledFeatures,
    apply_filter,
    build_profile,
    fit_feature_scaling,
)
from .spectral import (
    PcaModel,
    PcStack,
    fit_spectral_pca,
    project,
    select_components,
)
from .svm import (
    BinaryModel,
    KernelParams,
    SvmModel,
    classify_map,
    load_model,
    polynomial_kernel,
    predict,
    save_model,
    train_binary,
    train_multiclass,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryModel",
    "ConfigError",
    "ConfusionMatrix",
    "CovarianceMatrix",
    "CubeHeader",
    "DataIOError",
    "DegenerateDataError",
    "EnergyProfile",
    "FeatureMap",
    "FilterSelection",
    "FilterSet",
    "HyperCube",
    "Image",
    "KernelParams",
    "LabelMap",
    "MetricsReport",
    "NumericalError",
    "PatchMatrix",
    "PcStack",
    "PcaModel",
    "PipelineError",
    "RunMetrics",
    "SamplingScheme",
    "ScaledFeatures",
    "SvmModel",
    "apply_filter",
    "average_accuracy",
    "build_profile",
    "classify_map",
    "confusion",
    "design_filter_set",
    "draw_training_set",
    "expand_band_ranges",
    "extract_patches",
    "fit_feature_scaling",
    "fit_spectral_pca",
    "kappa",
    "load_cube",
    "load_labels",
    "load_model",
    "monte_carlo",
    "overall_accuracy",
    "patch_covariance",
    "polynomial_kernel",
    "predict",
    "project",
    "remove_bands",
    "save_model",
    "select_components",
    "symmetric_eigen",
    "train_binary",
    "train_multiclass",
    "write_class_map",
]
