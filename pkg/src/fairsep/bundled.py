"""Paths to the datasets and schemas shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def fixture_path(name: str) -> Path:
    """Absolute path of a bundled fixture file."""
    return Path(str(resources.files("fairsep").joinpath("fixtures", name)))


def toy8_paths() -> tuple[Path, Path]:
    """(csv, schema) paths of the 8-row oracle fixture."""
    return fixture_path("toy8.csv"), fixture_path("toy8.schema.json")


def adult_schema_path() -> Path:
    """Schema for the ingested census income CSV."""
    return fixture_path("adult.schema.json")
