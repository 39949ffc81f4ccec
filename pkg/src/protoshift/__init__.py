"""protoshift: test-time adaptation of prototype classifiers.

Given cached unit-norm class prototypes and per-sample augmented-view
embeddings, the engine learns a small per-class shift (or an ablation
variant) for each test sample by minimizing the entropy of the mean
prediction over its most confident views, then classifies the original
view against the shifted prototypes.
"""

from .engine import (
    BongardResult,
    EngineConfig,
    Prediction,
    RunSummary,
    SupportSet,
    ViewBatch,
    adapt_one,
    bongard_adapt,
    run_dataset,
    summarize,
)
from .grad import (
    GradReport,
    LossReport,
    finite_diff_grad,
    marginal_entropy_grad,
    marginal_entropy_loss,
)
from .optim import OptimConfig, OptimKind
from .prototypes import (
    PromptGroup,
    PrototypeSet,
    load_prototypes,
    pool_macro,
    pool_micro,
    save_prototypes,
)
from .transforms import ParamInit, TransformKind, TransformParams, apply_transform, init_params
from .tpse import read_tpse, write_tpse

__version__ = "0.1.0"

__all__ = [
    "BongardResult",
    "EngineConfig",
    "GradReport",
    "LossReport",
    "OptimConfig",
    "OptimKind",
    "ParamInit",
    "Prediction",
    "PromptGroup",
    "PrototypeSet",
    "RunSummary",
    "SupportSet",
    "TransformKind",
    "TransformParams",
    "ViewBatch",
    "adapt_one",
    "apply_transform",
    "bongard_adapt",
    "finite_diff_grad",
    "init_params",
    "load_prototypes",
    "marginal_entropy_grad",
    "marginal_entropy_loss",
    "pool_macro",
    "pool_micro",
    "read_tpse",
    "run_dataset",
    "save_prototypes",
    "summarize",
    "write_tpse",
]
