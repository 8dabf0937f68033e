import json
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import pandas as pd
from pandas.errors import EmptyDataError

from core.errors import EmptyDatasetError, SchemaError

PathLike = Union[str, Path]

class BaseRepository:
    """
    Standard file access patterns for toolkit artifacts (UTF-8 CSV and JSON).
    """
    def __init__(self, kind: str):
        self.kind = kind

    @staticmethod
    def _ensure_parent(path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def read_json(self, path: PathLike) -> Any:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def write_json(self, path: PathLike, data: Any) -> Path:
        path = self._ensure_parent(path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path

    def read_csv(self, path: PathLike) -> Tuple[List[str], pd.DataFrame]:
        """
        Header row and string cells. Duplicate header names are rejected here
        since pandas would silently rename them.
        """
        try:
            raw = pd.read_csv(path, header=None, dtype=str, keep_default_na=False,
                              encoding="utf-8", skip_blank_lines=True)
        except EmptyDataError:
            raise EmptyDatasetError() from None
        header = [str(h).strip() for h in raw.iloc[0].tolist()]
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise SchemaError(f"Duplicate header column(s) in {path}: {dupes}", path=str(path))
        body = raw.iloc[1:].reset_index(drop=True)
        body.columns = header
        return header, body

    def write_csv(self, path: PathLike, frame: pd.DataFrame) -> Path:
        path = self._ensure_parent(path)
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
        return path

    def read_jsonl(self, path: PathLike) -> List[Dict[str, Any]]:
        with open(path, "r", encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def write_jsonl(self, path: PathLike, items: List[Dict[str, Any]]) -> Path:
        path = self._ensure_parent(path)
        with open(path, "w", encoding="utf-8") as fh:
            for item in items:
                fh.write(json.dumps(item, sort_keys=True) + "\n")
        return path
