import os
import sys
from typing import Optional, Sequence

import pytest
from dotenv import load_dotenv

# Repository root on sys.path so the flat packages import as in production.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

load_dotenv()

from models.schemas import SchemaConfig
from models.tables import Dataset, SensitiveProjection
from services.dataset_service import DatasetService


def disease_config(n: int, domain: Sequence[str]) -> SchemaConfig:
    """One unique NSA token per row plus a single sensitive attribute."""
    return SchemaConfig.model_validate({
        "attributes": [
            {"name": "rid", "domain": [f"r{i}" for i in range(n)]},
            {"name": "disease", "domain": list(domain)},
        ],
        "sensitive": ["disease"],
    })


@pytest.fixture
def make_dataset():
    """
    Build a tiny dataset whose NSA column identifies rows uniquely.
    Values are listed in row order; ids are the seeded permutation.
    """
    def _make(values: Sequence[str], domain: Optional[Sequence[str]] = None, seed: int = 0) -> Dataset:
        domain = list(domain) if domain is not None else sorted(set(values))
        rows = [{"rid": f"r{i}", "disease": v} for i, v in enumerate(values)]
        return DatasetService.from_records(rows, disease_config(len(values), domain), seed)
    return _make


@pytest.fixture
def make_projection():
    """(id, value) pairs with explicit ids."""
    def _make(pairs, domain: Optional[Sequence[str]] = None) -> SensitiveProjection:
        return SensitiveProjection.from_pairs("disease", pairs, domain)
    return _make


@pytest.fixture(scope="session")
def census_config() -> SchemaConfig:
    return DatasetService.census_like_config()


@pytest.fixture
def schema_file(tmp_path):
    """Write a schema config document and return its path."""
    def _write(config: SchemaConfig, name: str = "schema.json"):
        path = tmp_path / name
        path.write_text(config.model_dump_json(), encoding="utf-8")
        return path
    return _write
