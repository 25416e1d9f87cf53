"""Experiment configuration: strict JSON schema shared by the CLI subcommands.

Decibels appear only here; everything handed to the core modules is linear.
"""

from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .channels import DetectorModel, apply_loss_cov, db_to_linear
from .states import GaussianState, GridSpec, default_grid_spec, squeezed_vacuum, vacuum

SEED_ENV = "QUADTOMO_SEED"
DEFAULT_SNR_DB = 10.0


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StateConfig(_Strict):
    kind: Literal["vacuum", "squeezed"] = "squeezed"
    r: float = Field(0.55, ge=0)
    phi: float = 0.0

    def build(self) -> GaussianState:
        if self.kind == "vacuum":
            return vacuum()
        return squeezed_vacuum(self.r, self.phi)


class DetectorConfig(_Strict):
    alpha: float = Field(1.0, gt=0)
    t_noise: Optional[float] = Field(None, ge=0)
    snr_db: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _one_noise_spec(self):
        if (self.t_noise is None) == (self.snr_db is None):
            raise ValueError("give exactly one of t_noise or snr_db")
        return self

    def build(self) -> DetectorModel:
        if self.t_noise is not None:
            return DetectorModel(self.alpha, self.t_noise)
        return DetectorModel.from_snr(db_to_linear(self.snr_db), self.alpha)


class StepsConfig(_Strict):
    steps: int = Field(ge=1)


class GridConfig(_Strict):
    half_width: Optional[float] = Field(None, gt=0)
    n: int = Field(256, ge=8)

    def build(self, state: GaussianState) -> GridSpec:
        if self.half_width is None:
            return default_grid_spec(state, self.n)
        return GridSpec.square(self.half_width, self.n)


class SweepSection(_Strict):
    snr_db: list[float] = Field(default_factory=lambda: [3.0, 6.0, 9.0, 12.0, 15.0, 18.0])
    n_phases: int = Field(12, ge=3)


class ExperimentConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    state: StateConfig = StateConfig()
    detector: DetectorConfig = DetectorConfig(snr_db=DEFAULT_SNR_DB)
    optical_eta: float = Field(1.0, gt=0, le=1)
    n_samples: int = Field(100_000, ge=2)
    phases: Union[float, Literal["ramp"], list[float], StepsConfig] = StepsConfig(steps=12)
    grid: GridConfig = GridConfig()
    output_dir: str = "out"
    sweep: SweepSection = SweepSection()

    def source_state(self) -> GaussianState:
        return apply_loss_cov(self.state.build(), self.optical_eta)

    def phase_spec(self):
        """Phase schedule in the form understood by :func:`detector.phase_schedule`."""
        if isinstance(self.phases, StepsConfig):
            return np.pi * np.arange(self.phases.steps) / self.phases.steps
        return self.phases

    def manifest(self) -> dict:
        """Every parameter that determines the outputs (the output location does not)."""
        d = self.model_dump(mode="json")
        d.pop("output_dir")
        return d


def load_config(path=None, overrides: dict | None = None, env=None) -> ExperimentConfig:
    """Read a JSON config, then apply ``QUADTOMO_SEED`` and command-line overrides.

    Precedence: command-line flags, then the environment, then the file.
    """
    data = {}
    if path is not None:
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        data["seed"] = int(env[SEED_ENV])
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
        if dotted == "detector.snr_db":
            node.pop("t_noise", None)
        elif dotted == "detector.t_noise":
            node.pop("snr_db", None)
    det = data.get("detector")
    if isinstance(det, dict) and "t_noise" not in det and "snr_db" not in det:
        det["snr_db"] = DEFAULT_SNR_DB
    return ExperimentConfig.model_validate(data)


def snr_db_list_to_linear(values) -> tuple:
    return tuple(math.inf if v == math.inf else db_to_linear(v) for v in values)
