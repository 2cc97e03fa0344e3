"""Run configuration files (TOML) with a strict schema.

Units are fixed per field: lengths in um, wavevectors in 1/um, and the
focal length and scan distances in mm so width-versus-distance tables plot directly.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .biphoton import CrystalSpec, PumpSpec, build_state
from .optics import PropagationSpec, SlitAperture


class ConfigError(Exception):
    """Raised for unreadable or invalid configuration files."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SourceSection(_Strict):
    crystal_length_um: float = Field(3000.0, gt=0)
    pump_wavelength_um: float = Field(0.355, gt=0)
    phase_mismatch: float = 0.0
    refractive_index: Optional[float] = Field(None, gt=1)
    pump_sigma_um: float = Field(450.0, gt=0)
    aperture_broadening_um: Optional[float] = Field(None, ge=0)


class SlitSection(_Strict):
    width_um: float = Field(10.0, gt=0)
    center_um: float = 0.0


class RunSection(_Strict):
    n_pairs: int = Field(1_000_000, gt=0)
    seed: int = Field(20140101, ge=0, lt=2**64)
    min_triggers: Optional[int] = Field(None, ge=0)
    blur_sd_um: float = Field(0.0, ge=0)
    batch_size: int = Field(1 << 20, gt=0)
    workers: int = Field(1, ge=1)


class PlanesSection(_Strict):
    focal_length_mm: float = Field(75.0, gt=0)
    scan_z_mm: List[float] = Field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0, 40.0], min_length=1)
    audit_z_mm: List[float] = Field(default_factory=lambda: [0.0, 20.0], min_length=0)


class OutputSection(_Strict):
    format: Literal["csv"] = "csv"
    near_bin_um: Optional[float] = Field(None, gt=0)
    far_bin_per_um: Optional[float] = Field(None, gt=0)
    frame_pixels_y: int = Field(64, ge=2)
    frame_half_span_sds: float = Field(4.0, gt=0)


class RunConfig(_Strict):
    source: SourceSection = Field(default_factory=SourceSection)
    slit: SlitSection = Field(default_factory=SlitSection)
    run: RunSection = Field(default_factory=RunSection)
    planes: PlanesSection = Field(default_factory=PlanesSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def crystal(self) -> CrystalSpec:
        s = self.source
        if s.refractive_index is None:
            return CrystalSpec(s.crystal_length_um, s.pump_wavelength_um, s.phase_mismatch)
        return CrystalSpec(s.crystal_length_um, s.pump_wavelength_um, s.phase_mismatch,
                           use_vacuum_wavevector=False, refractive_index=s.refractive_index)

    def state(self):
        return build_state(self.crystal(), PumpSpec(self.source.pump_sigma_um), self.source.aperture_broadening_um)

    def slit_aperture(self) -> SlitAperture:
        return SlitAperture(self.slit.width_um, self.slit.center_um)

    def farfield_plane(self) -> PropagationSpec:
        return PropagationSpec("lens-fourier", f=self.planes.focal_length_mm * 1000.0)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        """SHA-256 of the canonical form; independent of key order in the file."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data: dict, overrides: Optional[dict] = None) -> RunConfig:
    """Validate a config mapping; ``overrides`` maps ``run`` keys to values."""
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    if overrides:
        run = data.setdefault("run", {})
        if not isinstance(run, dict):
            raise ConfigError("run: must be a table")
        run.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path, overrides: Optional[dict] = None) -> RunConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, overrides)
