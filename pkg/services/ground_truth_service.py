from typing import Dict, List, Sequence, Tuple

import numpy as np

from models.schemas import CountQuery
from models.tables import Dataset, predicate_mask

class GroundTruthService:
    """
    Actual answers on the ORIGINAL dataset. Kept apart from the estimators,
    which only ever see published artifacts.
    """

    @staticmethod
    def actual_count(d: Dataset, q: CountQuery) -> int:
        mask = predicate_mask(d.schema, d.codes, {**q.nsa_predicate, **q.sa_values})
        return int(mask.sum())

    @staticmethod
    def selectivity(d: Dataset, q: CountQuery) -> float:
        """Fraction of tuples of D satisfying the query."""
        return GroundTruthService.actual_count(d, q) / d.n

    @staticmethod
    def actual_counts(d: Dataset, queries: Sequence[CountQuery]) -> np.ndarray:
        """
        Vectorised actual_count. Queries that agree on everything but the value
        of their last SA condition share one scan and one histogram.
        """
        out = np.zeros(len(queries), dtype=np.int64)
        groups: Dict[Tuple, List[int]] = {}
        for k, q in enumerate(queries):
            *leading, (attribute, _) = q.sa_values.items()
            fixed = tuple(q.nsa_predicate.items()) + tuple(leading)
            groups.setdefault((fixed, attribute), []).append(k)

        for (fixed, attribute), members in groups.items():
            attr = d.schema.attribute(attribute)
            mask = predicate_mask(d.schema, d.codes, dict(fixed))
            hist = np.bincount(d.column(attribute)[mask], minlength=attr.size)
            for k in members:
                value = queries[k].sa_values[attribute]
                out[k] = hist[attr.codes[value]] if value in attr.codes else 0
        return out
