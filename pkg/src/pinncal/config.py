"""Experiment configuration and result schemas.

A configuration names a case (rod_analytical, rod_csv, plate), a loss mode
and a profile, and optionally a study grid. Unset numeric fields are filled
from per-case and per-profile defaults by `resolve()`; downstream code only
ever sees resolved configurations. The configuration hash ties result
artifacts to the settings that produced them.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from . import mechanics

SCHEMA_VERSION = 1

CASE_DEFAULTS = {
    "rod_analytical": {
        "hidden_layers": [8, 8], "n_data": 128, "n_collocation": 128,
        "n_work_boundary": 1, "n_validation": 1024, "data_weight": 1e5,
    },
    "rod_csv": {
        # point counts come from the measured file itself
        "hidden_layers": [8, 8], "n_data": 0, "n_collocation": 0,
        "n_work_boundary": 1, "n_validation": 0, "data_weight": 1e4,
    },
    "plate": {
        "hidden_layers": [16, 16], "n_data": 4096, "n_collocation": 4096,
        "n_work_boundary": 64, "n_validation": 4096, "data_weight": 1e5,
    },
}

# lambda_o recommended once the data carry measurement noise
NOISY_DATA_WEIGHT = 1e3

PROFILE_DEFAULTS = {
    "paper": {"n_repeats": 10, "max_iters": 5000},
    "smoke": {"n_repeats": 3, "max_iters": 250},
}

STUDY_NAMES = ("estimate_sensitivity", "collocation_convergence",
               "noise_sensitivity")


class ConfigError(ValueError):
    pass


class RodSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    length: float = 100.0       # mm
    traction: float = 100.0     # N/mm^2 at the free end


class PlateSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    length: float = 100.0
    radius: float = 10.0
    thickness: float = 1.0
    traction: tuple[float, float] = (-100.0, 0.0)
    n_theta: int = 128
    n_r: int = 64
    grading: float = 1.02


class StudySettings(BaseModel):
    """Grid of a parameter study; exactly the axis matching `name` must be
    set. Factors are multiples of the true values."""
    model_config = ConfigDict(extra="forbid")
    name: Literal["estimate_sensitivity", "collocation_convergence",
                  "noise_sensitivity"]
    estimate_factors: Optional[list[float]] = None          # 1D sweep axis
    estimate_grid: Optional[list[tuple[float, float]]] = None  # 2D (E, nu) factors
    collocation_counts: Optional[list[int]] = None
    noise_sigmas: Optional[list[float]] = None              # mm
    n_repeats: Optional[int] = None

    @model_validator(mode="after")
    def _check_axis(self):
        axes = {
            "estimate_sensitivity": (self.estimate_factors, self.estimate_grid),
            "collocation_convergence": (self.collocation_counts,),
            "noise_sensitivity": (self.noise_sigmas,),
        }[self.name]
        if not any(a for a in axes):
            raise ValueError(f"study {self.name!r} needs its grid axis set")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    case: Literal["rod_analytical", "rod_csv", "plate"]
    mode: Literal["enhanced", "standard"] = "enhanced"
    profile: Literal["smoke", "paper"] = "paper"
    seed: int = 0

    # ground truth of the synthetic material (also the RE reference)
    e_true: float = 210000.0
    nu_true: float = 0.3

    # initial estimates; default to the truth when left unset
    e_estimate: Optional[float] = None
    nu_estimate: Optional[float] = None

    hidden_layers: Optional[list[int]] = None
    data_weight: Optional[float] = None      # lambda_o
    n_data: Optional[int] = None             # N_o
    n_collocation: Optional[int] = None      # N_col
    n_work_boundary: Optional[int] = None    # N_W_ext
    n_validation: Optional[int] = None       # N_val
    collocation_mode: Literal["coincide", "independent"] = "coincide"
    noise_sigma: float = 0.0                 # mm, absolute
    max_iters: Optional[int] = None
    n_repeats: Optional[int] = None

    csv_path: Optional[str] = None           # rod_csv input
    e_initial: float = 1.0                   # standard mode: raw starting E

    rod: RodSettings = RodSettings()
    plate: PlateSettings = PlateSettings()
    study: Optional[StudySettings] = None
    out_dir: str = "results"

    @model_validator(mode="after")
    def _check(self):
        if self.case == "rod_csv" and self.csv_path is None:
            raise ValueError("rod_csv needs csv_path")
        if self.mode == "standard" and self.case != "rod_analytical":
            raise ValueError("standard mode is only wired for rod_analytical")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.e_true <= 0 or not -1.0 < self.nu_true < 0.5:
            raise ValueError("true material parameters out of range")
        if self.e_estimate is not None and self.e_estimate <= 0:
            raise ValueError("e_estimate must be positive")
        if self.nu_estimate is not None and not -1.0 < self.nu_estimate < 0.5:
            raise ValueError("nu_estimate must lie in (-1, 0.5)")
        return self

    def is_resolved(self) -> bool:
        return None not in (self.hidden_layers, self.data_weight, self.n_data,
                            self.n_collocation, self.n_work_boundary,
                            self.n_validation, self.max_iters, self.n_repeats,
                            self.e_estimate, self.nu_estimate)

    def resolve(self) -> "ExperimentConfig":
        """Fill unset fields from case and profile defaults."""
        values = self.model_dump()
        for key, val in CASE_DEFAULTS[self.case].items():
            if values[key] is None:
                values[key] = val
        for key, val in PROFILE_DEFAULTS[self.profile].items():
            if values[key] is None:
                values[key] = val
        if self.data_weight is None and self.noise_sigma > 0:
            values["data_weight"] = NOISY_DATA_WEIGHT
        if values["e_estimate"] is None:
            values["e_estimate"] = values["e_true"]
        if values["nu_estimate"] is None:
            values["nu_estimate"] = values["nu_true"]
        resolved = ExperimentConfig(**values)
        if resolved.collocation_mode == "coincide" and \
                resolved.case == "plate" and \
                resolved.n_collocation != resolved.n_data:
            raise ConfigError("coincident collocation requires N_col == N_o; "
                              "set collocation_mode='independent'")
        return resolved

    def kg_estimates(self) -> tuple[float, float]:
        return mechanics.convert_Enu_to_KG(self.e_estimate, self.nu_estimate)


def config_hash(config: ExperimentConfig) -> str:
    """Stable digest of the resolved settings. The seed and output directory
    are excluded so repeats of one experiment share a hash."""
    payload = config.resolve().model_dump(exclude={"seed", "out_dir"})
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    try:
        return ExperimentConfig(**raw)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


class CalibrationResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    case: str
    mode: str
    seed: int
    config_hash: str
    identified: dict[str, float]           # E, nu, K, G (E only in 1D)
    correction_factors: dict[str, float]   # alpha per estimated parameter
    relative_errors: Optional[dict[str, float]] = None   # signed percent
    rl2: Optional[dict[str, float]] = None               # per component
    loss_breakdown: Optional[dict[str, float]] = None
    optimizer_status: str
    iterations: int
    final_loss: float
    wall_time_s: float
    loss_history_path: Optional[str] = None
    checkpoint_paths: Optional[list[str]] = None

    @model_validator(mode="after")
    def _consistent(self):
        ident = self.identified
        if all(k in ident for k in ("E", "nu", "K", "G")):
            k_ref, g_ref = mechanics.convert_Enu_to_KG(ident["E"], ident["nu"])
            if abs(k_ref - ident["K"]) > 1e-10 * abs(k_ref) or \
                    abs(g_ref - ident["G"]) > 1e-10 * abs(g_ref):
                raise ValueError("identified (E, nu) and (K, G) disagree")
        return self
