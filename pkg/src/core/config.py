"""
Configuration management for the culture-graph pipeline.

Loads process-wide defaults from environment variables (a .env file is
honoured) and builds validated per-run configurations from simple
key=value files with command-line overrides.
"""

import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from .errors import ConfigError
from .models import GROWTH_FIELDS, LEVEL_FIELDS

# Load .env file if it exists
load_dotenv()


def _optional_float(name: str) -> Optional[float]:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else None


def _optional_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else None


class Config:
    """Process-wide defaults."""

    # City centre used for ward distances; no built-in default
    CENTRE_LAT: Optional[float] = _optional_float("CULTUREGRAPH_CENTRE_LAT")
    CENTRE_LON: Optional[float] = _optional_float("CULTUREGRAPH_CENTRE_LON")

    SEED: Optional[int] = _optional_int("CULTUREGRAPH_SEED")
    FOLDS: int = int(os.getenv("CULTUREGRAPH_FOLDS", "10"))
    FISCAL_OFFSET: int = int(os.getenv("CULTUREGRAPH_FISCAL_OFFSET", "1"))

    LOG_LEVEL: str = os.getenv("CULTUREGRAPH_LOG_LEVEL", "INFO")
    LOG_JSON: bool = os.getenv("CULTUREGRAPH_LOG_JSON", "false").lower() in ("1", "true", "yes")

    # Version tag written into every JSON artifact
    SPEC_VERSION: str = "1.0"

    # Default input file names inside an input directory
    INPUT_FILES: Dict[str, str] = {
        "venues_path": "venues.csv",
        "transitions_path": "transitions.csv",
        "wards_path": "wards.geojson",
        "expenditure_path": "expenditure.csv",
        "imd_path": "imd.csv",
    }

    # Panel variables analysed with ANOVA by default
    ANOVA_VARIABLES: List[str] = ["N", "IC", "OC", "IOR", "ACC", "VC", "VCD"]
    CLASSIFIER_KINDS: List[str] = [
        "decision_tree",
        "random_forest",
        "logistic_regression",
        "naive_bayes",
    ]
    SUBSET_THRESHOLDS: List[int] = [0, 10, 20, 30, 40]
    DEPRIVATION_BASES: Tuple[str, ...] = ("median_rank", "mean_score")


# Singleton instance
config = Config()


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class RunConfig(BaseModel):
    """
    Validated configuration for one pipeline run.

    Attributes:
        venues_path, transitions_path, wards_path, expenditure_path, imd_path:
            The five input files
        centre: (lat, lon) of the city centre used for ward distances
        output_dir: Directory receiving every artifact
        seed: Seed for all stochastic stages
        fiscal_offset: Calendar year = fiscal start year + offset
        anova_variables: Panel variables analysed with ANOVA
        classifier_kinds: Learners evaluated in the prediction stage
        folds: k for stratified cross-validation
        subset_thresholds: |delta rank| thresholds for the subset evaluation
        deprivation_basis: "median_rank" or "mean_score" cohort threshold
        alpha: Significance level used to flag ANOVA effects
        extended_reports: Also write the supplementary report tables
    """

    model_config = ConfigDict(frozen=True)

    venues_path: Path
    transitions_path: Path
    wards_path: Path
    expenditure_path: Path
    imd_path: Path
    centre: Tuple[float, float]
    output_dir: Path
    seed: int
    fiscal_offset: int = config.FISCAL_OFFSET
    anova_variables: List[str] = list(config.ANOVA_VARIABLES)
    classifier_kinds: List[str] = list(config.CLASSIFIER_KINDS)
    folds: int = config.FOLDS
    subset_thresholds: List[int] = list(config.SUBSET_THRESHOLDS)
    deprivation_basis: str = "median_rank"
    alpha: float = 0.05
    extended_reports: bool = False

    @field_validator(
        "anova_variables", "classifier_kinds", "subset_thresholds", "centre", mode="before"
    )
    @classmethod
    def _split_comma_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("centre")
    @classmethod
    def _centre_in_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        lat, lon = value
        if not -90 <= lat <= 90 or not -180 <= lon <= 180:
            raise ValueError(f"centre out of range: {value}")
        return value

    @field_validator("folds")
    @classmethod
    def _folds_at_least_two(cls, value: int) -> int:
        if value < 2:
            raise ValueError("folds must be at least 2")
        return value

    @field_validator("subset_thresholds")
    @classmethod
    def _thresholds_nonnegative(cls, value: List[int]) -> List[int]:
        if any(t < 0 for t in value):
            raise ValueError("subset thresholds must be nonnegative")
        return sorted(set(value))

    @field_validator("classifier_kinds")
    @classmethod
    def _known_kinds(cls, value: List[str]) -> List[str]:
        unknown = set(value) - set(config.CLASSIFIER_KINDS)
        if unknown:
            raise ValueError(f"unknown classifier kinds: {sorted(unknown)}")
        return value

    @field_validator("anova_variables")
    @classmethod
    def _known_variables(cls, value: List[str]) -> List[str]:
        unknown = sorted(set(value) - set(LEVEL_FIELDS) - set(GROWTH_FIELDS))
        if unknown:
            raise ValueError(f"unknown panel variables: {unknown}")
        return value

    @field_validator("deprivation_basis")
    @classmethod
    def _known_basis(cls, value: str) -> str:
        if value not in config.DEPRIVATION_BASES:
            raise ValueError(f"deprivation_basis must be one of {config.DEPRIVATION_BASES}")
        return value

    @field_validator("alpha")
    @classmethod
    def _alpha_in_unit_interval(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError("alpha must be in (0, 1)")
        return value

    def input_paths(self) -> Dict[str, Path]:
        """Input files keyed by their config field name."""
        return {name: getattr(self, name) for name in config.INPUT_FILES}


def load_run_config(path: Optional[Path] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from a key=value file plus overrides.

    Keys are case-insensitive. ``input_dir`` fills any input path that is
    not given explicitly; ``centre_lat``/``centre_lon`` form the centre.
    Relative paths in the file resolve against the file's directory.
    Overrides with value None are ignored.

    Raises:
        ConfigError: If the file is missing or the result is invalid
    """
    values: Dict[str, Any] = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        base_dir = path.resolve().parent
        values.update({
            key.strip().lower(): value
            for key, value in dotenv_values(path).items()
            if value is not None and value != ""
        })
        for key in list(config.INPUT_FILES) + ["input_dir", "output_dir"]:
            if key in values and not Path(values[key]).is_absolute():
                values[key] = str(base_dir / values[key])

    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    input_dir = values.pop("input_dir", None)
    if input_dir is not None:
        for key, filename in config.INPUT_FILES.items():
            values.setdefault(key, str(Path(input_dir) / filename))

    lat = values.pop("centre_lat", config.CENTRE_LAT)
    lon = values.pop("centre_lon", config.CENTRE_LON)
    if "centre" not in values:
        if lat is None or lon is None:
            raise ConfigError("city centre is required (centre_lat / centre_lon)")
        values["centre"] = (float(lat), float(lon))

    if values.get("seed") is None:
        if config.SEED is None:
            raise ConfigError("seed is required for stochastic stages")
        values["seed"] = config.SEED

    missing = [key for key in config.INPUT_FILES if key not in values]
    if missing:
        raise ConfigError(f"input paths not configured: {', '.join(missing)}")
    values.setdefault("output_dir", str(base_dir / "out"))

    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {e}") from e
