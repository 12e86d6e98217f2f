"""Mixed-variable Spider Monkey Optimization with image enhancement and segmentation tooling."""

from .params import (
    CategoricalParam,
    ContinuousParam,
    DiscreteParam,
    ParamSpace,
    Position,
    adopt_category,
    hyperparameter_preset,
    repair,
    sample,
)
from .smo import RunLog, SmoConfig, run

__version__ = "0.1.0"

__all__ = [
    "CategoricalParam",
    "ContinuousParam",
    "DiscreteParam",
    "ParamSpace",
    "Position",
    "RunLog",
    "SmoConfig",
    "adopt_category",
    "hyperparameter_preset",
    "repair",
    "run",
    "sample",
]
