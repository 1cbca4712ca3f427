"""Homophily-aware graph recurrent forecasting of crime occurrences.

Set HAGEN_THREADS before importing to cap the BLAS thread pools the numeric
backend spins up; it must be applied before numpy loads, which is why it
happens at the top of this module.
"""

import os as _os

_threads = _os.environ.get("HAGEN_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .exceptions import (  # noqa: E402
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    HagenError,
    NumericalError,
)
from .autodiff import Parameter, Tensor, backward, check_gradients  # noqa: E402
from .config import (  # noqa: E402
    AblationFlags,
    DataConfig,
    EvalConfig,
    ModelConfig,
    RunConfig,
    TrainConfig,
    load_config,
)
from .data import (  # noqa: E402
    CrimeTensor,
    DatasetMeta,
    SynthSpec,
    chrono_split,
    ingest_events,
    load_dataset,
    load_graph,
    synth_generate,
    window_dataset,
)
from .estimator import HagenForecaster  # noqa: E402
from .homophily import HomophilyReport, homophily_loss, homophily_ratio  # noqa: E402
from .metrics import MetricsReport, binarize, f1_scores  # noqa: E402
from .network import HagenNetwork  # noqa: E402
from .training import (  # noqa: E402
    Checkpoint,
    TrainingData,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AblationFlags",
    "Checkpoint",
    "CheckpointError",
    "ConfigError",
    "ContractError",
    "CrimeTensor",
    "DataConfig",
    "DataError",
    "DatasetMeta",
    "DimensionError",
    "EvalConfig",
    "HagenError",
    "HagenForecaster",
    "HagenNetwork",
    "HomophilyReport",
    "MetricsReport",
    "ModelConfig",
    "NumericalError",
    "Parameter",
    "RunConfig",
    "SynthSpec",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "TrainingData",
    "backward",
    "binarize",
    "check_gradients",
    "chrono_split",
    "f1_scores",
    "homophily_loss",
    "homophily_ratio",
    "ingest_events",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "load_graph",
    "save_checkpoint",
    "synth_generate",
    "train",
    "window_dataset",
    "__version__",
]
