from pathlib import Path
from typing import List

import pandas as pd

from models.schemas import BenchReport, GuaranteeRow
from repositories.base_repository import BaseRepository, PathLike

BENCH_COLUMNS = [
    "mechanism", "param", "selectivity_bucket", "avg_rel_error", "n_queries",
    "anonymize_ms", "estimate_ms_avg", "iters_median", "iters_mean",
]
GUARANTEE_COLUMNS = ["f_s", "chebyshev_bound", "exact_tail", "variance_bound"]

class ReportRepository(BaseRepository):
    def __init__(self):
        super().__init__("reports")

    @staticmethod
    def bench_frame(report: BenchReport) -> pd.DataFrame:
        """A size sweep adds an n column; a single run keeps the fixed layout."""
        columns = BENCH_COLUMNS + ["n"] if report.sizes else BENCH_COLUMNS
        return pd.DataFrame([row.model_dump() for row in report.rows], columns=columns)

    @staticmethod
    def guarantee_frame(rows: List[GuaranteeRow]) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in rows], columns=GUARANTEE_COLUMNS)

    def write_bench_csv(self, path: PathLike, report: BenchReport) -> Path:
        return self.write_csv(path, self.bench_frame(report))

    def write_bench_json(self, path: PathLike, report: BenchReport) -> Path:
        return self.write_json(path, report.model_dump())

    def write_guarantee_csv(self, path: PathLike, rows: List[GuaranteeRow]) -> Path:
        return self.write_csv(path, self.guarantee_frame(rows))
