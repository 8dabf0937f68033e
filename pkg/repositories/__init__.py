"""
Repositories package: file access layer for the toolkit.

Each repository owns one artifact family (tables, query files, reports),
keeping service classes free of raw IO.
"""
from repositories.base_repository import BaseRepository
from repositories.table_repository import TableRepository
from repositories.query_repository import QueryRepository
from repositories.report_repository import ReportRepository

__all__ = [
    "BaseRepository",
    "TableRepository",
    "QueryRepository",
    "ReportRepository",
]
