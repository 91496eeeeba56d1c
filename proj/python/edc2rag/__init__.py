"""Dynamic clustering-based retrieval compression: python bindings."""

from edc2rag._core import (
    accuracy,
    average_cluster,
    balanced_accuracy,
    compute_cost,
    cosine_similarity,
    dynamic_cluster,
    hash_embed,
    intra_class_consistency,
    is_empty_extract,
    label_has_answer,
    normalize_answer,
    plan_sizes,
    random_baseline_consistency,
    random_cluster,
    render_prompt,
    token_f1,
)

__all__ = [
    "accuracy",
    "average_cluster",
    "balanced_accuracy",
    "compute_cost",
    "cosine_similarity",
    "dynamic_cluster",
    "hash_embed",
    "intra_class_consistency",
    "is_empty_extract",
    "label_has_answer",
    "normalize_answer",
    "plan_sizes",
    "random_baseline_consistency",
    "random_cluster",
    "render_prompt",
    "token_f1",
]
