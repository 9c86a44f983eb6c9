"""Campaign configuration: YAML file -> validated, fully materialised model."""

from __future__ import annotations

import hashlib
import itertools
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

SCHEMA_VERSION = 1

SpaceName = Literal["feed", "beam"]
TerminalName = Literal["vsat", "handheld"]
ScenarioName = Literal["fixed", "public_safety"]
PropagationName = Literal["plos", "nlos"]
SchemeName = Literal["mb", "ss-mmse", "mmse", "none"]
NormName = Literal["spc", "pac", "mpc"]

CELL_AXES = ("space", "terminal", "scenario", "propagation", "power_dbw_mhz", "scheme",
             "normalization")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class LatticeConfig(_Strict):
    n_rings: int = Field(5, ge=0)
    spacing_uv: float = Field(0.1, gt=0, lt=1)


class ArrayConfig(_Strict):
    nx: int = Field(16, ge=1)
    ny: int = Field(16, ge=1)
    spacing_wavelengths: float = Field(0.5, gt=0)
    element_model: Literal["cosine", "isotropic"] = "cosine"
    element_gain_dbi: float = 10.7


class TerminalProfileConfig(_Strict):
    peak_gain_dbi: float
    g_over_t_db_k: float
    pattern: Literal["parabolic", "isotropic", "table"] = "isotropic"
    table_path: Optional[str] = None


def _default_profiles():
    return {
        "vsat": TerminalProfileConfig(peak_gain_dbi=39.7, g_over_t_db_k=15.9, pattern="parabolic"),
        "handheld": TerminalProfileConfig(peak_gain_dbi=0.0, g_over_t_db_k=-31.6,
                                          pattern="isotropic"),
    }


class TerminalProfiles(_Strict):
    vsat: TerminalProfileConfig = Field(default_factory=lambda: _default_profiles()["vsat"])
    handheld: TerminalProfileConfig = Field(default_factory=lambda: _default_profiles()["handheld"])


class DelayConfig(_Strict):
    mode: Literal["cpc", "dpc"] = "cpc"
    t_p_s: float = Field(5e-3, ge=0)
    t_ad_s: float = Field(4e-3, ge=0)
    # None -> gateway at the initial sub-satellite point
    gateway_ecef_m: Optional[tuple[float, float, float]] = None
    # replaces the computed budget when set (sensitivity studies, ideal-CSI runs)
    delta_t_override_s: Optional[float] = Field(None, ge=0)


class CampaignConfig(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    iterations: int = Field(70, ge=1)
    frequency_hz: float = Field(2.0e9, gt=0)
    bandwidth_hz: float = Field(30e6, gt=0)
    altitude_m: float = Field(600e3, gt=0)
    inclination_deg: float = 0.0
    spaces: list[SpaceName] = ["feed", "beam"]
    terminals: list[TerminalName] = ["vsat", "handheld"]
    scenarios: list[ScenarioName] = ["fixed", "public_safety"]
    propagations: list[PropagationName] = ["plos", "nlos"]
    power_density_dbw_mhz: list[float] = [0.0, 4.0, 8.0, 12.0]
    schemes: list[SchemeName] = ["mmse", "ss-mmse", "mb", "none"]
    normalizations: list[NormName] = ["spc", "pac", "mpc"]
    user_density_per_km2: float = Field(0.5, gt=0)
    footprint_overlap: float = Field(1.15, gt=0)
    user_speed_kmh: float = Field(250.0, ge=0)
    min_elevation_deg: float = Field(10.0, ge=0, lt=90)
    lattice: LatticeConfig = LatticeConfig()
    array: ArrayConfig = ArrayConfig()
    terminal_profiles: TerminalProfiles = TerminalProfiles()
    delay: DelayConfig = DelayConfig()
    loss_table: Optional[str] = None
    environment: Literal["suburban"] = "suburban"
    noise_temperature_error_db: float = 0.0
    regularization: Literal["transmit_snr", "link_budget"] = "transmit_snr"
    frame_chunk: int = Field(64, ge=1)

    @field_validator("spaces", "terminals", "scenarios", "propagations", "power_density_dbw_mhz",
                     "schemes", "normalizations")
    @classmethod
    def _unique(cls, v):
        if len(set(v)) != len(v):
            raise ValueError("duplicate entries")
        return v

    # ------------------------------------------------------------------
    def cells(self) -> list[dict]:
        """Cross-product of the experiment axes; list index is the cell id."""
        axes = (self.spaces, self.terminals, self.scenarios, self.propagations,
                self.power_density_dbw_mhz, self.schemes, self.normalizations)
        return [dict(zip(CELL_AXES, combo)) for combo in itertools.product(*axes)]

    def echo(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "fingerprint": self.fingerprint(),
                "config": self.model_dump(mode="json")}

    def fingerprint(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _format_error(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        if e["type"] == "extra_forbidden":
            lines.append(f"unknown key '{loc}'")
        else:
            lines.append(f"{loc}: {e['msg']}")
    return "; ".join(lines)


def config_from_dict(data: dict | None, overrides: dict | None = None) -> CampaignConfig:
    data = dict(data or {})
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return CampaignConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def parse_config(path, overrides: dict | None = None) -> CampaignConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data, overrides)
