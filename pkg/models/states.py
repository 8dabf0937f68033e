from dataclasses import dataclass, field
from typing import List

import numpy as np


@dataclass(frozen=True, eq=False)
class StateVector:
    """
    K = 2**(w+1) state counts. Bit layout of a state index, most significant first:
    the NSA predicate P, then one bit per queried sensitive value s_1..s_w.
    """
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float).ravel()
        k = counts.shape[0]
        if k < 4 or k & (k - 1):
            raise ValueError(f"State vector length must be 2**(w+1) with w >= 1, got {k}")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return int(self.counts.shape[0])

    @property
    def w(self) -> int:
        return self.k.bit_length() - 2

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def sa_frequency(self, i: int) -> float:
        """Mass of states whose i-th sensitive bit (1-based) is set."""
        bit = self.w - i
        mask = (np.arange(self.k) >> bit) & 1
        return float(self.counts[mask == 1].sum())


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """a[i][j]: probability of a tuple in state i of D showing state j in D'."""
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("Transition matrix must be square")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def k(self) -> int:
        return int(self.entries.shape[0])

    def is_row_stochastic(self, atol: float = 1e-12) -> bool:
        return bool(
            np.all(self.entries >= 0.0)
            and np.all(self.entries <= 1.0)
            and np.allclose(self.entries.sum(axis=1), 1.0, rtol=0.0, atol=atol)
        )


@dataclass
class BayesResult:
    x: StateVector
    iterations: int
    converged: bool
    mass_history: List[float] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)
