"""policyscope: introspection toolkit for frozen vision-based RL policies.

Load portable frozen models, cache rollouts from a deterministic toy
environment, and run the full analysis suite: first-layer filter statistics,
noise-robustness sweeps, an algorithm-distinguishing frame classifier,
PCA + t-SNE state embeddings, maximal-activation patches and synthesized
("dreamed") inputs, plus PNG rendering and a read-only data server.
"""

from .env import CatchEnv, Environment, scripted_policy
from .errors import PolicyscopeError
from .model_io import (
    CheckpointTag,
    FrozenModel,
    ModelMeta,
    load_model,
    random_model,
    save_model,
    validate_model,
)
from .network import (
    ActivationTrace,
    C51Params,
    HeadKind,
    NetworkSpec,
    Objective,
    default_spec,
    forward_with_trace,
    input_gradient,
)
from .rollout import Rollout, StepRecord, load_rollout, record_rollout, save_rollout

__version__ = "0.1.0"

__all__ = [
    "CatchEnv",
    "Environment",
    "scripted_policy",
    "PolicyscopeError",
    "CheckpointTag",
    "FrozenModel",
    "ModelMeta",
    "load_model",
    "random_model",
    "save_model",
    "validate_model",
    "ActivationTrace",
    "C51Params",
    "HeadKind",
    "NetworkSpec",
    "Objective",
    "default_spec",
    "forward_with_trace",
    "input_gradient",
    "Rollout",
    "StepRecord",
    "load_rollout",
    "record_rollout",
    "save_rollout",
    "__version__",
]
