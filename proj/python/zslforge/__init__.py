"""Zero-shot classification over precomputed features."""

from zslforge._core import (
    ZslforgeError,
    __version__,
    adjust_for_missing,
    generate_synthetic,
    hinge_loss,
    kl_divergence,
    mean_per_class_topk,
    plan_chunks,
    predict_topk,
    sample_cada_config,
    sample_log_uniform,
    sample_simple_config,
    tokenize,
    train_simple,
    warmup_weight,
)

__all__ = [
    "ZslforgeError",
    "__version__",
    "adjust_for_missing",
    "generate_synthetic",
    "hinge_loss",
    "kl_divergence",
    "mean_per_class_topk",
    "plan_chunks",
    "predict_topk",
    "sample_cada_config",
    "sample_log_uniform",
    "sample_simple_config",
    "tokenize",
    "train_simple",
    "warmup_weight",
]
