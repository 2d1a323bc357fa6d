# Local neural operator engine
# Learned one-step time marching for transient PDEs on unseen domains

__version__ = "1.0.0"
__author__ = "cbx"

from .errors import LnoError, ConfigError, ShapeError, FormatError, NumericalError
from .tensor import GridField, WeightTensor, Scalar, Tape, backward
from .legendre import (
    lgl_rule,
    make_kernels,
    make_kernels_1d,
    make_kernels_2d,
    SpectralKernels,
    SpectralLayer,
    spectral_forward
)
from .model import (
    LnoConfig,
    LnoModel,
    CorrosionReport,
    build,
    forward,
    corrosion,
    count_weights
)
from .checkpoint import save_checkpoint, load_checkpoint, read_checkpoint_header
from .boundary import BoundarySpec, PadRule, extend, trim, split_regions, far_field_velocity
from .ibm import IbmGeometry, ibm_delta, ibm_correct, naca0012
from .format import Trajectory, DatasetFile, DatasetHeader
from .marching import march, rollout, cfl_number
from .solvers import (
    solve_burgers,
    solve_wave,
    solve_ns_periodic,
    random_force_2d,
    random_ic_1d,
    generate_trajectory
)
from .augment import AugmentTransform, augment
from .train import (
    TrainSchedule,
    Trainer,
    sample_window,
    rollout_loss,
    adam_step,
    learning_rate,
    train_loop,
    validate_error
)
from .config import load_config, get_preset, PRESETS
from .manifest import RunManifest
from .export import export_frames, get_info

__all__ = [
    # Errors
    "LnoError",
    "ConfigError",
    "ShapeError",
    "FormatError",
    "NumericalError",
    # Tensors
    "GridField",
    "WeightTensor",
    "Scalar",
    "Tape",
    "backward",
    # Spectral layers
    "lgl_rule",
    "make_kernels",
    "make_kernels_1d",
    "make_kernels_2d",
    "SpectralKernels",
    "SpectralLayer",
    "spectral_forward",
    # Model
    "LnoConfig",
    "LnoModel",
    "CorrosionReport",
    "build",
    "forward",
    "corrosion",
    "count_weights",
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint_header",
    # Boundaries and marching
    "BoundarySpec",
    "PadRule",
    "extend",
    "trim",
    "split_regions",
    "far_field_velocity",
    "IbmGeometry",
    "ibm_delta",
    "ibm_correct",
    "naca0012",
    "march",
    "rollout",
    "cfl_number",
    # Data
    "Trajectory",
    "DatasetFile",
    "DatasetHeader",
    "solve_burgers",
    "solve_wave",
    "solve_ns_periodic",
    "random_force_2d",
    "random_ic_1d",
    "generate_trajectory",
    # Training
    "AugmentTransform",
    "augment",
    "TrainSchedule",
    "Trainer",
    "sample_window",
    "rollout_loss",
    "adam_step",
    "learning_rate",
    "train_loop",
    "validate_error",
    "load_config",
    "get_preset",
    "PRESETS",
    "RunManifest",
    "export_frames",
    "get_info",
]
