from pathlib import Path
from typing import List

from pydantic import ValidationError

from core.errors import SchemaError
from models.schemas import CountQuery
from repositories.base_repository import BaseRepository, PathLike

class QueryRepository(BaseRepository):
    """
    JSON-lines query files: one {"nsa": {...}, "sa": {...}} object per line.
    """
    def __init__(self):
        super().__init__("queries")

    def read_queries(self, path: PathLike) -> List[CountQuery]:
        queries = []
        for line_no, item in enumerate(self.read_jsonl(path), start=1):
            try:
                queries.append(CountQuery.model_validate(item))
            except ValidationError as e:
                raise SchemaError(f"Invalid query on line {line_no} of {path}: {e.errors()[0]['msg']}",
                                  line=line_no) from None
        return queries

    def write_queries(self, path: PathLike, queries: List[CountQuery]) -> Path:
        return self.write_jsonl(path, [q.to_line() for q in queries])
