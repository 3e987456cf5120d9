"""Configuration management for kmoment."""

import json
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from rich.console import Console

console = Console(stderr=True)

CONFIG_FILENAME = "kmoment.json"


class SolveOptions(BaseModel):
    """Numerical thresholds and switches threaded through the solve pipeline."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    psd_tol: float = Field(1e-9, gt=0, description="PSD tolerance relative to ||M||_2")
    rank_tol: float = Field(1e-8, gt=0, description="Rank cutoff relative to sigma_max")
    consistency_tol: float = Field(
        1e-7, gt=0, description="Tolerance for recursive-consistency products"
    )
    extension_tol: float = Field(
        1e-7, gt=0, description="Range and structure-projection tolerance"
    )
    residual_tol: float = Field(1e-8, gt=0, description="Moment residual tolerance")
    point_tol: float = Field(1e-6, gt=0, description="Support tolerance g(atom) >= -tol")
    commute_tol: float = Field(1e-7, gt=0, description="Commutation tolerance")
    weight_floor: float = Field(1e-9, ge=0, description="Weights below this are dropped")
    weight_tol: float = Field(1e-9, ge=0, description="Allowed negative weight noise")
    imag_tol: float = Field(1e-7, gt=0, description="Allowed imaginary part of atoms")
    merge_tol: float = Field(1e-7, gt=0, description="Atoms closer than this are merged")
    depth: int = Field(2, ge=0, description="Maximum number of one-step extensions")
    seed: int = Field(0, description="Seed for the random joint-diagonalization mix")
    probability: bool = Field(False, description="Normalize total mass before solving")

    def with_overrides(self, **overrides: Any) -> "SolveOptions":
        """Return a copy with every non-None override applied."""
        values = self.model_dump()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SolveOptions(**values)


class GridSpec(BaseModel):
    """Axis-aligned box grid, one (lo, hi, steps) triple shared by every axis."""

    model_config = ConfigDict(frozen=True)

    lo: float = Field(-1.0, description="Lower bound on each axis")
    hi: float = Field(1.0, description="Upper bound on each axis")
    steps: int = Field(101, ge=1, description="Points per axis")

    @field_validator("hi")
    @classmethod
    def validate_bounds(cls, value: float, info: ValidationInfo) -> float:
        """Reject empty boxes."""
        lo = info.data.get("lo")
        if lo is not None and value < lo:
            raise ValueError(f"grid upper bound {value} is below lower bound {lo}")
        return value

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse the CLI form ``"lo,hi,steps"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"grid must be 'lo,hi,steps', got '{text}'")
        return cls(lo=float(parts[0]), hi=float(parts[1]), steps=int(parts[2]))


class Settings(BaseSettings):
    """kmoment settings, read from the environment, ``.env`` and ``kmoment.json``."""

    model_config = SettingsConfigDict(
        env_prefix="KMOMENT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Tolerances (module defaults)
    psd_tol: float = Field(1e-9, description="PSD tolerance relative to ||M||_2")
    rank_tol: float = Field(1e-8, description="Rank cutoff relative to sigma_max")
    consistency_tol: float = Field(1e-7, description="Recursive-consistency tolerance")
    extension_tol: float = Field(1e-7, description="Flat-extension tolerance")
    residual_tol: float = Field(1e-8, description="Moment residual tolerance")
    point_tol: float = Field(1e-6, description="Support tolerance")
    commute_tol: float = Field(1e-7, description="Commutation tolerance")
    weight_floor: float = Field(1e-9, description="Weight floor")
    weight_tol: float = Field(1e-9, description="Negative weight tolerance")
    imag_tol: float = Field(1e-7, description="Imaginary-part tolerance")
    merge_tol: float = Field(1e-7, description="Atom merge distance")

    # Search settings
    depth: int = Field(2, description="Flat-extension depth")
    seed: int = Field(0, description="Random seed for extraction")
    probability: bool = Field(False, description="Normalize to a probability measure")

    # Grids for the dominating tools
    grid_steps: int = Field(101, description="Default grid resolution per axis")

    verbose: bool = Field(False, description="Print per-stage progress")

    def solve_options(self, **overrides: Any) -> SolveOptions:
        """Build the pipeline options, applying non-None overrides."""
        fields = SolveOptions.model_fields.keys()
        base = SolveOptions(**{name: getattr(self, name) for name in fields})
        return base.with_overrides(**overrides)


def effective_options(
    settings: Settings,
    file_options: Optional[Dict[str, Any]] = None,
    **cli_overrides: Any,
) -> SolveOptions:
    """Settings, then the problem file's ``options`` block, then CLI flags."""
    return settings.solve_options(**(file_options or {})).with_overrides(**cli_overrides)


def is_verbose() -> bool:
    """Whether per-stage progress output was requested."""
    return os.environ.get("KMOMENT_VERBOSE", "0") not in ("", "0", "false", "False")


def find_config_path(start_path: Optional[Path] = None) -> Optional[Path]:
    """Find a kmoment.json by searching upwards from the given path.

    Args:
        start_path: Path to start searching from (defaults to current directory)

    Returns:
        Path to the config file if found, None otherwise
    """
    if start_path is None:
        start_path = Path.cwd()

    current = start_path.absolute()

    # Don't search above the home directory
    home = Path.home().absolute()

    while current != current.parent and current != home:
        candidate = current / CONFIG_FILENAME
        if candidate.exists():
            return candidate
        current = current.parent

    return None


def load_settings(project_path: Optional[Union[str, Path]] = None) -> Settings:
    """Load settings from the environment and the nearest kmoment.json.

    Args:
        project_path: Directory to start the config search from (defaults to cwd)

    Returns:
        Settings object with values loaded from config files
    """
    if isinstance(project_path, str):
        project_path = Path(project_path)

    settings = Settings()

    # Check for .env file next to the project
    if project_path is not None:
        env_file = project_path / ".env"
        if env_file.exists():
            settings = Settings(_env_file=env_file)

    config_path = find_config_path(project_path)
    if config_path is None:
        return settings
    return _load_json_settings(config_path, settings)


def _load_json_settings(path: Path, settings: Settings) -> Settings:
    """Apply a JSON config file on top of the given settings."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            config_data: Dict[str, Any] = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        console.print(f"[bold red]Error loading JSON config from {path}: {e}[/bold red]")
        return settings

    unknown = [key for key in config_data if key not in Settings.model_fields]
    if unknown:
        console.print(
            f"[yellow]Warning: Ignoring unknown keys in {path}: {', '.join(unknown)}[/yellow]"
        )
    known = {k: v for k, v in config_data.items() if k in Settings.model_fields}
    try:
        return Settings(**{**settings.model_dump(), **known})
    except ValueError as e:
        console.print(f"[bold red]Error loading JSON config from {path}: {e}[/bold red]")
        return settings
