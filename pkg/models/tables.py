"""
Immutable in-memory tables.

Values are stored as integer codes into each attribute's domain (schema order),
so the 500k-row paths stay vectorised. Arrays are frozen on construction.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from models.schemas import CountQuery, Schema


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def predicate_mask(schema: Schema, codes: np.ndarray, predicate: Dict[str, str]) -> np.ndarray:
    """Rows of a code matrix satisfying a conjunction of attribute=value pairs."""
    mask = np.ones(codes.shape[0], dtype=bool)
    for name, value in predicate.items():
        attr = schema.attribute(name)
        if value not in attr.codes:
            return np.zeros(codes.shape[0], dtype=bool)
        mask &= codes[:, schema.index(name)] == attr.codes[value]
    return mask


@dataclass(frozen=True, eq=False)
class Dataset:
    """The original table D: unique ids plus one category per schema attribute."""
    schema: Schema
    ids: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        codes = np.asarray(self.codes, dtype=np.int32).reshape(len(ids), len(self.schema.attributes))
        object.__setattr__(self, "ids", _freeze(ids))
        object.__setattr__(self, "codes", _freeze(codes))

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.schema.index(name)]

    def value_counts(self, name: str) -> np.ndarray:
        return np.bincount(self.column(name), minlength=self.schema.attribute(name).size)

    def project(self, attribute: str) -> "SensitiveProjection":
        """D_s = the (id, S) projection for one sensitive attribute."""
        return SensitiveProjection(
            attribute=attribute,
            domain=self.schema.attribute(attribute).domain,
            ids=self.ids,
            codes=self.column(attribute),
        )

    def take(self, positions: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.ids[positions], self.codes[positions])

    def records(self) -> Iterator[Tuple[int, Tuple[str, ...]]]:
        domains = [a.domain for a in self.schema.attributes]
        for rid, row in zip(self.ids.tolist(), self.codes.tolist()):
            yield rid, tuple(domains[j][c] for j, c in enumerate(row))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            a.name: np.asarray(a.domain, dtype=object)[self.codes[:, j]]
            for j, a in enumerate(self.schema.attributes)
        })

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.codes, other.codes)
        )


@dataclass(frozen=True, eq=False)
class SensitiveProjection:
    """(id, sa_value) pairs for one sensitive attribute; values as domain codes."""
    attribute: str
    domain: Tuple[str, ...]
    ids: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ids", _freeze(np.asarray(self.ids, dtype=np.int64)))
        object.__setattr__(self, "codes", _freeze(np.asarray(self.codes, dtype=np.int32)))
        if self.ids.shape != self.codes.shape:
            raise ValueError("ids and codes must have the same length")

    @classmethod
    def from_pairs(cls, attribute: str, pairs: Sequence[Tuple[int, str]],
                   domain: Optional[Sequence[str]] = None) -> "SensitiveProjection":
        values = [v for _, v in pairs]
        domain = tuple(domain) if domain is not None else tuple(sorted(set(values)))
        lookup = {v: i for i, v in enumerate(domain)}
        return cls(
            attribute=attribute,
            domain=domain,
            ids=np.array([i for i, _ in pairs], dtype=np.int64),
            codes=np.array([lookup[v] for v in values], dtype=np.int32),
        )

    @property
    def n(self) -> int:
        return int(self.ids.shape[0])


class EligibilityReport(BaseModel):
    eligible: bool
    l_prime: int
    max_sa_frequency: int
    required_deletions: int = Field(..., ge=0)
    deleted_ids: List[int] = []


@dataclass(frozen=True, eq=False)
class DecoyPartition:
    """
    Groups of exactly l' tuples with l' distinct sensitive values.
    In-memory only: never written to any publication artifact.
    """
    l_prime: int
    attribute: str
    domain: Tuple[str, ...]
    member_ids: np.ndarray
    member_codes: np.ndarray
    _sorted_ids: np.ndarray = field(init=False, repr=False)
    _sorted_groups: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ids = np.asarray(self.member_ids, dtype=np.int64).reshape(-1, self.l_prime)
        codes = np.asarray(self.member_codes, dtype=np.int32).reshape(-1, self.l_prime)
        object.__setattr__(self, "member_ids", _freeze(ids))
        object.__setattr__(self, "member_codes", _freeze(codes))
        flat = ids.ravel()
        order = np.argsort(flat, kind="stable")
        object.__setattr__(self, "_sorted_ids", _freeze(flat[order]))
        object.__setattr__(self, "_sorted_groups", _freeze(order // self.l_prime))

    @property
    def r(self) -> int:
        return int(self.member_ids.shape[0])

    @property
    def groups(self) -> Tuple[Tuple[Tuple[int, str], ...], ...]:
        return tuple(
            tuple((int(i), self.domain[c]) for i, c in zip(ids, codes))
            for ids, codes in zip(self.member_ids.tolist(), self.member_codes.tolist())
        )

    def group_of(self, tuple_id: int) -> Optional[int]:
        k = int(np.searchsorted(self._sorted_ids, tuple_id))
        if k < self._sorted_ids.shape[0] and self._sorted_ids[k] == tuple_id:
            return int(self._sorted_groups[k])
        return None


@dataclass(frozen=True, eq=False)
class PublishedTable:
    """
    The sanitized table D': NSA values verbatim, randomized SA values, rows shuffled.
    Carries l' (and p for the global baseline) but nothing about partitions.
    """
    schema: Schema
    codes: np.ndarray
    l_prime: int
    mechanism: str = "a_prime"
    p: Optional[float] = None
    seed_fingerprint: str = ""

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int32).reshape(-1, len(self.schema.attributes))
        object.__setattr__(self, "codes", _freeze(codes))

    @property
    def n(self) -> int:
        return int(self.codes.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.schema.index(name)]

    def value_counts(self, name: str) -> np.ndarray:
        return np.bincount(self.column(name), minlength=self.schema.attribute(name).size)

    def mask(self, predicate: Dict[str, str]) -> np.ndarray:
        return predicate_mask(self.schema, self.codes, predicate)

    def rows(self) -> List[Tuple[str, ...]]:
        domains = [a.domain for a in self.schema.attributes]
        return [tuple(domains[j][c] for j, c in enumerate(row)) for row in self.codes.tolist()]

    def publication_columns(self) -> List[str]:
        """NSA columns then SA columns, each in schema order."""
        return list(self.schema.nsa_names) + list(self.schema.sensitive_in_order)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            name: np.asarray(self.schema.attribute(name).domain, dtype=object)[self.column(name)]
            for name in self.publication_columns()
        })

    def sidecar(self) -> Dict[str, object]:
        doc: Dict[str, object] = {
            "l_prime": self.l_prime,
            "sensitive": list(self.schema.sensitive_in_order),
            "seed_fingerprint": self.seed_fingerprint,
            "mechanism": self.mechanism,
        }
        if self.p is not None:
            doc["p"] = self.p
        return doc


@dataclass(frozen=True, eq=False)
class AnatomyPublication:
    """
    Anatomy baseline: NSA rows tagged with a group id, plus exact per-group SA counts.
    """
    schema: Schema
    attribute: str
    l: int
    nsa_table: pd.DataFrame
    sa_table: pd.DataFrame

    @property
    def n(self) -> int:
        return int(self.nsa_table.shape[0])

    def matching_rows_per_group(self, query: CountQuery) -> pd.Series:
        mask = np.ones(self.n, dtype=bool)
        for name, value in query.nsa_predicate.items():
            mask &= (self.nsa_table[name] == value).to_numpy()
        return self.nsa_table.loc[mask, "group_id"].value_counts()

    def sa_counts(self, value: str) -> pd.Series:
        hits = self.sa_table[self.sa_table["sa_value"] == value]
        return hits.set_index("group_id")["count"]
