import logging
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, ValidationError, computed_field, field_validator, model_validator
from typing import Optional, List, Dict, Any

from numerics.models import AdscParams


class Settings(BaseSettings):
    ADSC_GAMMA_MIN: float = Field(default=0.08, ge=0.0)
    ADSC_GAMMA_MAX: float = Field(default=0.25, ge=0.0)
    ADSC_KAPPA: float = Field(default=2.0, ge=1.0)
    ADSC_OMEGA: float = Field(
        default=0.35,
        gt=0.0,
        le=1.0,
        description="Relaxation factor of the coupled activation iteration")
    ADSC_DELTA_H: float = Field(default=1e-12, gt=0.0)
    ADSC_ETA_DET: float = Field(
        default=5e-2,
        gt=0.0,
        description="Half-saturation level of the detector map t/(t+eta)")
    ADSC_ACTIVATION_TOL: float = Field(default=1e-8, gt=0.0)
    ADSC_MAX_ITERATIONS: int = Field(default=1000, ge=1)
    ADSC_FEW_SHOT_CAP: Optional[int] = Field(
        default=None,
        description="Stop the activation loop after this many updates (unset = run to tolerance)")
    ADSC_DETECTOR_KIND: str = Field(default="regularized")
    ADSC_TRANSFER_KIND: str = Field(default="averaged")
    ADSC_BOUNDARY_TRANSFER: str = Field(
        default="adjacent",
        description="Activation on boundary edges: adjacent (interior node value) or zero")
    ADSC_WARM_START: str = Field(
        default="galerkin",
        description="Initial iterate: galerkin, zero, coarse or upwind")

    CIP_GAMMA: float = Field(default=0.030, ge=0.0)
    LPS_GAMMA: float = Field(default=1.0, ge=0.0)
    AFC_THETA: float = Field(default=1.0, ge=0.0)
    AFC_ITERATIONS: int = Field(default=80, ge=1)

    SOLVER_TOL: float = Field(default=1e-12, gt=0.0)
    SOLVER_METHOD: str = Field(default="direct")

    REFERENCE_N_REF: int = Field(default=264, ge=2)
    REFERENCE_CHECK_N_REF: Optional[int] = Field(
        default=None,
        description="Second fine grid used to self-check the reference (e.g. 360)")

    DETECTOR_THRESHOLD_FACTOR: float = Field(
        default=1e-6,
        ge=0.0,
        description="Detector amplitude threshold relative to max |U_ref|")
    ACTIVE_NODE_THRESHOLD: float = Field(default=1e-3, ge=0.0)
    RHO_TARGET: float = Field(default=1.0, ge=0.0)
    FOOTPRINT_DENSITY: int = Field(default=256, ge=2)

    OUTPUT_DIR: str = Field(default="results")
    EMIT_FORMATS_STR: str = Field(
        default="csv,markdown",
        alias="EMIT_FORMATS",
        description="Comma-separated list of output formats (csv, markdown)")
    CSV_SIGNIFICANT_DIGITS: int = Field(default=17, ge=1, le=17)
    DUMP_MATRICES: bool = Field(
        default=False,
        description="Write every assembled operator in MatrixMarket format")

    RNG_SEED: int = Field(default=20240601)
    LOG_LEVEL: str = Field(default="INFO")

    @field_validator('ADSC_FEW_SHOT_CAP', 'REFERENCE_CHECK_N_REF', mode='before')
    @classmethod
    def empty_str_to_none(cls, v):
        if isinstance(v, str) and v.strip() == '':
            return None
        return v

    @field_validator('ADSC_DETECTOR_KIND', mode='after')
    @classmethod
    def check_detector_kind(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("regularized", "sharp"):
            raise ValueError(f"Unknown detector kind '{v}'")
        return v

    @field_validator('ADSC_TRANSFER_KIND', mode='after')
    @classmethod
    def check_transfer_kind(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("averaged", "max"):
            raise ValueError(f"Unknown transfer kind '{v}'")
        return v

    @field_validator('ADSC_BOUNDARY_TRANSFER', mode='after')
    @classmethod
    def check_boundary_transfer(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("adjacent", "zero"):
            raise ValueError(f"Unknown boundary transfer '{v}'")
        return v

    @field_validator('ADSC_WARM_START', mode='after')
    @classmethod
    def check_warm_start(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("galerkin", "zero", "coarse", "upwind"):
            raise ValueError(f"Unknown warm start '{v}'")
        return v

    @field_validator('SOLVER_METHOD', mode='after')
    @classmethod
    def check_solver_method(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("direct", "iterative"):
            raise ValueError(f"Unknown solver method '{v}'")
        return v

    @model_validator(mode='after')
    def check_gamma_order(self) -> "Settings":
        if self.ADSC_GAMMA_MIN > self.ADSC_GAMMA_MAX:
            raise ValueError(
                f"ADSC_GAMMA_MIN={self.ADSC_GAMMA_MIN} exceeds ADSC_GAMMA_MAX={self.ADSC_GAMMA_MAX}")
        return self

    @computed_field
    @property
    def emit_formats(self) -> List[str]:
        formats = [
            fmt.strip().lower()
            for fmt in self.EMIT_FORMATS_STR.split(',')
            if fmt.strip()
        ]
        unknown = [fmt for fmt in formats if fmt not in ("csv", "markdown")]
        if unknown:
            logging.warning(
                f"Ignoring unknown emit formats {unknown} in EMIT_FORMATS='{self.EMIT_FORMATS_STR}'"
            )
        return [fmt for fmt in formats if fmt in ("csv", "markdown")]

    @computed_field
    @property
    def adsc_params(self) -> AdscParams:
        return AdscParams(
            gamma_min=self.ADSC_GAMMA_MIN,
            gamma_max=self.ADSC_GAMMA_MAX,
            kappa=self.ADSC_KAPPA,
            omega=self.ADSC_OMEGA,
            delta_h=self.ADSC_DELTA_H,
            eta_det=self.ADSC_ETA_DET,
            activation_tol=self.ADSC_ACTIVATION_TOL,
            max_iterations=self.ADSC_MAX_ITERATIONS,
            few_shot_cap=self.ADSC_FEW_SHOT_CAP,
            detector_kind=self.ADSC_DETECTOR_KIND,
            transfer_kind=self.ADSC_TRANSFER_KIND,
            boundary_transfer=self.ADSC_BOUNDARY_TRANSFER,
            warm_start=self.ADSC_WARM_START,
        )

    model_config = SettingsConfigDict(env_file='.env',
                                      env_file_encoding='utf-8',
                                      extra='ignore',
                                      populate_by_name=True)


_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings_instance
    if _settings_instance is None:
        try:
            _settings_instance = Settings()
        except ValidationError as e:
            logging.critical(
                f"Pydantic validation error while loading settings: {e}")
            raise SystemExit(f"Settings validation failed: {e}")
    return _settings_instance


def _resolve_field_name(key: str) -> str:
    candidate = key.strip().upper().replace('-', '_')
    fields = Settings.model_fields
    if candidate in fields:
        return candidate
    if f"ADSC_{candidate}" in fields:
        return f"ADSC_{candidate}"
    for name, info in fields.items():
        if info.alias and info.alias.upper() == candidate:
            return name
    raise ValueError(f"Unknown configuration key '{key}'")


def apply_overrides(settings: Settings, overrides: Dict[str, Any]) -> Settings:
    """Return a validated copy of settings with flat key=value overrides applied.

    Keys are matched case-insensitively against field names, with or
    without the ADSC_ prefix.
    """
    if not overrides:
        return settings
    data = settings.model_dump(exclude={'emit_formats', 'adsc_params'})
    for key, value in overrides.items():
        data[_resolve_field_name(key)] = value
    return Settings.model_validate(data)
