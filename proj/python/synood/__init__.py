"""Python bindings for the synood synthetic outlier pipeline."""

from ._core import (
    ArgumentError,
    DependencyError,
    Error,
    EvalReport,
    MlpModel,
    auroc,
    bce_loss,
    cosine_similarity,
    evaluate,
    fpr_at_tpr,
    generate_feature_world,
    generate_image_world,
    init_model,
    iou,
    pad_box,
    read_feature_archive,
    run_feature_experiment,
    run_pipeline,
    train,
)

__version__ = "0.1.0"
