from bope.core.kernel.gram import (
    GramFactorization,
    KernelConfig,
    factorize,
    gram_matrix,
    kernel_eval,
    kernel_matrix,
    mahalanobis_sq,
)

__all__ = [
    "GramFactorization",
    "KernelConfig",
    "factorize",
    "gram_matrix",
    "kernel_eval",
    "kernel_matrix",
    "mahalanobis_sq",
]
