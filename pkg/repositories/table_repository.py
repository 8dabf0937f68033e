from pathlib import Path
from typing import Any, Dict, List, Tuple

import pandas as pd

from core.errors import SchemaError
from models.tables import AnatomyPublication, Dataset, PublishedTable
from repositories.base_repository import BaseRepository, PathLike

# Sidecar keys allowed next to a published table; partition data never appears here.
SIDECAR_KEYS = {"l_prime", "sensitive", "seed_fingerprint", "mechanism", "p"}

class TableRepository(BaseRepository):
    def __init__(self):
        super().__init__("tables")

    @staticmethod
    def sidecar_path(path: PathLike) -> Path:
        return Path(path).with_suffix(".json")

    @staticmethod
    def anatomy_paths(prefix: PathLike) -> Tuple[Path, Path]:
        prefix = Path(prefix)
        stem = prefix.with_suffix("") if prefix.suffix == ".csv" else prefix
        return Path(f"{stem}_nsa.csv"), Path(f"{stem}_sa.csv")

    def read_table(self, path: PathLike) -> Tuple[List[str], pd.DataFrame]:
        return self.read_csv(path)

    def write_dataset(self, path: PathLike, d: Dataset) -> Path:
        return self.write_csv(path, d.to_frame())

    def write_published(self, path: PathLike, table: PublishedTable) -> Tuple[Path, Path]:
        csv_path = self.write_csv(path, table.to_frame())
        side = table.sidecar()
        assert set(side) <= SIDECAR_KEYS
        json_path = self.write_json(self.sidecar_path(path), side)
        return csv_path, json_path

    def read_published(self, path: PathLike) -> Tuple[List[str], pd.DataFrame, Dict[str, Any]]:
        header, body = self.read_csv(path)
        side_path = self.sidecar_path(path)
        if not side_path.exists():
            raise SchemaError(f"Missing sidecar {side_path} next to published table {path}.",
                              path=str(path))
        sidecar = self.read_json(side_path)
        if "l_prime" not in sidecar:
            raise SchemaError(f"Sidecar {side_path} lacks 'l_prime'.", path=str(side_path))
        return header, body, sidecar

    def write_anatomy(self, prefix: PathLike, pub: AnatomyPublication) -> Tuple[Path, Path]:
        nsa_path, sa_path = self.anatomy_paths(prefix)
        self.write_csv(nsa_path, pub.nsa_table)
        self.write_csv(sa_path, pub.sa_table)
        return nsa_path, sa_path

    def read_anatomy(self, prefix: PathLike) -> Tuple[pd.DataFrame, pd.DataFrame]:
        nsa_path, sa_path = self.anatomy_paths(prefix)
        _, nsa = self.read_csv(nsa_path)
        _, sa = self.read_csv(sa_path)
        nsa["group_id"] = nsa["group_id"].astype(int)
        sa["group_id"] = sa["group_id"].astype(int)
        sa["count"] = sa["count"].astype(int)
        return nsa, sa
