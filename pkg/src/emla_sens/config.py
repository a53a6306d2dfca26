"""Main run configuration: robot, actuators, trajectory and payload sweep."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .actuator import Actuator, actuator_from_dict
from .metrics import SweepSpec
from .robot import ConfigError, RobotModel, load_model, model_from_dict
from .trajectory import TrajectorySpec, spec_from_dict

FORMATS = ("csv", "json")
TOP_LEVEL_KEYS = {"robot_config", "robot", "initial_q", "actuators", "trajectory", "sweep", "output"}


@dataclass(frozen=True, eq=False)
class RunConfig:
    model: RobotModel
    initial_q: np.ndarray
    actuators: list
    trajectory: TrajectorySpec
    sweep: SweepSpec
    robot_path: Optional[Path] = None
    out_dir: Optional[Path] = None
    fmt: str = "csv"
    parallel: int = 1
    source: Optional[Path] = field(default=None)


def _read_json(path: Path, what: str) -> dict:
    if not path.is_file():
        raise ConfigError(f"file not found: {path}", what)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})", what) from None


def config_from_dict(data: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", "<root>")
    extra = set(data) - TOP_LEVEL_KEYS
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "<root>")

    robot_path = None
    if "robot" in data:
        model = model_from_dict({"robot": data["robot"]})
    elif "robot_config" in data:
        robot_path = (base_dir / data["robot_config"]).resolve()
        if not robot_path.is_file():
            raise ConfigError(f"file not found: {robot_path}", "robot_config")
        model = load_model(robot_path.read_text())
    else:
        raise ConfigError("either 'robot' or 'robot_config' is required", "<root>")

    q0 = np.asarray(data.get("initial_q", np.zeros(model.n)), dtype=float)
    if q0.shape != (model.n,):
        raise ConfigError(f"expected {model.n} entries", "initial_q")

    acts = data.get("actuators")
    if not isinstance(acts, list) or len(acts) != model.n:
        raise ConfigError(f"expected a list of {model.n} actuator blocks (one per joint)", "actuators")
    names = model.joint_names
    actuators = []
    for i, block in enumerate(acts):
        block = dict(block)
        block.setdefault("name", names[i])
        actuators.append(actuator_from_dict(block, f"actuators[{i}]"))

    if "trajectory" not in data:
        raise ConfigError("missing block", "trajectory")
    trajectory = spec_from_dict(data["trajectory"])

    sweep_d = dict(data.get("sweep", {}))
    unknown = set(sweep_d) - set(SweepSpec.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "sweep")
    sweep = SweepSpec(**sweep_d)
    sweep.validate()

    out = data.get("output", {})
    out_dir = Path(out["dir"]) if "dir" in out else None
    if out_dir is not None and not out_dir.is_absolute():
        out_dir = base_dir / out_dir
    fmt = out.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError(f"must be one of {FORMATS}", "output.format")
    parallel = int(out.get("parallel", 1))
    if parallel < 1:
        raise ConfigError("must be >= 1", "output.parallel")
    return RunConfig(model, q0, actuators, trajectory, sweep, robot_path, out_dir, fmt, parallel)


def load_config(path) -> RunConfig:
    """Load and validate a run configuration file.

    Relative paths inside the file resolve against the file's directory.
    """
    path = Path(path)
    data = _read_json(path, str(path))
    cfg = config_from_dict(data, path.parent)
    object.__setattr__(cfg, "source", path)
    return cfg


def example_config_path() -> Path:
    """Path of the shipped 3-DoF lift/tilt/telescope example run configuration."""
    return Path(os.fspath(resources.files(__package__).joinpath("data/hdmm_3dof.json")))


def example_robot_path() -> Path:
    return Path(os.fspath(resources.files(__package__).joinpath("data/hdmm_3dof_robot.json")))
