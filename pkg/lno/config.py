"""
Named model/schedule presets and JSON config files.

A config file holds optional "preset", "model" and "schedule" objects; the
preset (default "ns-n12") supplies every value the file leaves out::

    {"preset": "burgers1d", "schedule": {"iterations": 2000}}

User presets live as <name>.json in the config directory ($LNO_HOME, else
~/.config/lno).
"""

import json
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Dict, Tuple, Union

from .errors import ConfigError, FormatError
from .model import LnoConfig
from .train import TrainSchedule

logger = logging.getLogger(__name__)

DEFAULT_PRESET = "ns-n12"

PRESETS: Dict[str, Tuple[LnoConfig, TrainSchedule]] = {
    "burgers1d": (LnoConfig(d=1, d_u=1, width=20, N=12, M=6, k=2, n=4, dx=1.0 / 32, dt=0.05),
                  TrainSchedule()),
    "burgers2d": (LnoConfig(d=2, d_u=2, width=40, N=12, M=6, k=2, n=4, dx=1.0 / 32, dt=0.05),
                  TrainSchedule()),
    "ns-n12": (LnoConfig(N=12, M=6), TrainSchedule()),
    "ns-n16": (LnoConfig(N=16, M=8), TrainSchedule()),
    "ns-n24": (LnoConfig(N=24, M=8), TrainSchedule()),
    "wave": (LnoConfig(d=2, d_u=2, width=40, N=12, M=6, k=2, n=4, dx=1.0 / 32, dt=0.05),
             TrainSchedule()),
    "tiny": (LnoConfig(d=2, d_u=2, width=4, proj_hidden=8, n=1, N=4, M=2, k=2, dx=1.0 / 8, dt=0.05),
             TrainSchedule(iterations=200, log_every=10, rollout=2, batch_size=2)),
}


def get_config_dir() -> Path:
    """The lno config directory (not created)"""
    if os.environ.get('LNO_HOME'):
        return Path(os.environ['LNO_HOME'])
    if os.name == 'nt':
        return Path(os.environ.get('APPDATA', Path.home())) / 'lno'
    return Path.home() / '.config' / 'lno'


def preset_names():
    names = set(PRESETS)
    directory = get_config_dir()
    if directory.is_dir():
        names.update(p.stem for p in directory.glob("*.json"))
    return sorted(names)


def get_preset(name: str) -> Tuple[LnoConfig, TrainSchedule]:
    if name in PRESETS:
        config, schedule = PRESETS[name]
        return replace(config), replace(schedule)
    user = get_config_dir() / f"{name}.json"
    if user.exists():
        return _load_file(user)
    raise ConfigError(f"unknown preset '{name}' (available: {', '.join(preset_names())})")


def _load_file(path: Path) -> Tuple[LnoConfig, TrainSchedule]:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"Invalid config file {path}: {e}") from e
    if not isinstance(data, dict):
        raise FormatError(f"Invalid config file {path}: top level must be an object")
    unknown = set(data) - {"preset", "model", "schedule"}
    if unknown:
        raise ConfigError(f"config file {path}: unknown section(s) {', '.join(sorted(unknown))}")
    base = data.get("preset", DEFAULT_PRESET)
    if base == path.stem and path.parent == get_config_dir():
        raise ConfigError(f"preset '{base}' refers to itself")
    config, schedule = get_preset(base)
    model_part = {**config.to_dict(), **data.get("model", {})}
    schedule_part = {**schedule.to_dict(), **data.get("schedule", {})}
    return LnoConfig.from_dict(model_part), TrainSchedule.from_dict(schedule_part)


def load_config(source: Union[str, Path]) -> Tuple[LnoConfig, TrainSchedule]:
    """
    Resolve a preset name or a JSON config file.

    Raises:
        ConfigError: unknown preset or invalid field values
        FormatError: unreadable JSON
    """
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        logger.debug("Loading config file %s", path)
        return _load_file(path)
    return get_preset(str(source))


def save_preset(name: str, config: LnoConfig, schedule: TrainSchedule) -> Path:
    """Store a user preset in the config directory"""
    directory = get_config_dir()
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.json"
    with open(path, 'w', encoding='utf-8') as f:
        json.dump({"model": config.to_dict(), "schedule": schedule.to_dict()}, f, indent=2)
    return path
