"""Python bindings for the rankweave C++ library."""

from ._rankweave import (
    Dataset,
    DomainList,
    Ensemble,
    IoError,
    JudgedPairs,
    MetricParams,
    ValidationError,
    build_domain_list,
    compare,
    compute_rating,
    delta_ndcg,
    evaluate,
    fit_metric,
    fuse_dataset,
    generate_synthetic,
    lambda_gradients,
    ndcg,
    pair_label_probabilities,
    relative_reduction,
    standard_normal_cdf,
    train_lambdamart,
)

__all__ = [
    "Dataset",
    "DomainList",
    "Ensemble",
    "IoError",
    "JudgedPairs",
    "MetricParams",
    "ValidationError",
    "build_domain_list",
    "compare",
    "compute_rating",
    "delta_ndcg",
    "evaluate",
    "fit_metric",
    "fuse_dataset",
    "generate_synthetic",
    "lambda_gradients",
    "ndcg",
    "pair_label_probabilities",
    "relative_reduction",
    "standard_normal_cdf",
    "train_lambdamart",
]
