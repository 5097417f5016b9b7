"""Python bindings for the ddlab diffusion toy lab.

The heavy lifting lives in the compiled extension; this package re-exports it
so `import ddlab` works both from an installed wheel and from the staged
build tree.
"""

from ._core import (  # noqa: F401
    Adapter,
    Model,
    RngStream,
    Schedule,
    ToyDistribution,
    __version__,
    attribute_value,
    batch_mean_cov,
    ddim_rollout,
    forward_noise,
    frechet2,
    gaussian_pair,
    hybrid_rollout,
    is_analogue,
    load_adapter,
    load_model,
    merge_adapter,
    mode_coverage,
    oracle_posterior,
    psd_sqrt,
    sample_diversity,
    sample_truth,
    skip_first_rollout,
    time_embedding,
)

__all__ = [
    "Adapter",
    "Model",
    "RngStream",
    "Schedule",
    "ToyDistribution",
    "__version__",
    "attribute_value",
    "batch_mean_cov",
    "ddim_rollout",
    "forward_noise",
    "frechet2",
    "gaussian_pair",
    "hybrid_rollout",
    "is_analogue",
    "load_adapter",
    "load_model",
    "merge_adapter",
    "mode_coverage",
    "oracle_posterior",
    "psd_sqrt",
    "sample_diversity",
    "sample_truth",
    "skip_first_rollout",
    "time_embedding",
]
