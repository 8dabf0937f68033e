import heapq
from typing import List, Tuple

import numpy as np

from core.errors import PartitionError, UnknownTupleError
from core.logger import logger
from models.tables import Dataset, DecoyPartition, SensitiveProjection
from services.dataset_service import DatasetService

class PartitionService:
    """
    Anatomy-style decoy group creation over D_s = (id, S).

    Tuples are hashed into buckets by sensitive value. Each round takes the l'
    currently largest buckets (equal sizes ordered by SA value) and removes the
    smallest-id tuple from each, forming one group.
    """

    @staticmethod
    def partition(ds: SensitiveProjection, l_prime: int) -> DecoyPartition:
        if l_prime < 1:
            raise PartitionError("l_prime must be >= 1", l_prime=l_prime)
        n = ds.n
        if n == 0 or n % l_prime:
            raise PartitionError(
                f"Cannot split {n} tuples into groups of {l_prime}; N must be a positive multiple of l'.",
                n=n, l_prime=l_prime
            )

        # Buckets hold ids in ascending order; a cursor marks the next unused id.
        order = np.lexsort((ds.ids, ds.codes))
        sorted_ids = ds.ids[order].tolist()
        counts = np.bincount(ds.codes, minlength=len(ds.domain))
        starts = np.concatenate(([0], np.cumsum(counts)[:-1])).tolist()
        cursor = list(starts)
        remaining = counts.tolist()

        heap: List[Tuple[int, str, int]] = [
            (-remaining[c], ds.domain[c], c) for c in range(len(ds.domain)) if remaining[c]
        ]
        heapq.heapify(heap)

        r = n // l_prime
        member_ids = [0] * n
        member_codes = [0] * n
        slot = 0
        for group in range(r):
            if len(heap) < l_prime:
                raise PartitionError(
                    f"Round {group + 1}: only {len(heap)} nonempty buckets, {l_prime} needed; "
                    "the dataset is not eligible for this l'.",
                    round=group + 1, l_prime=l_prime
                )
            picked = [heapq.heappop(heap) for _ in range(l_prime)]
            for _, value, code in picked:
                member_ids[slot] = sorted_ids[cursor[code]]
                member_codes[slot] = code
                cursor[code] += 1
                remaining[code] -= 1
                slot += 1
                if remaining[code]:
                    heapq.heappush(heap, (-remaining[code], value, code))

        partition = DecoyPartition(
            l_prime=l_prime,
            attribute=ds.attribute,
            domain=ds.domain,
            member_ids=np.asarray(member_ids, dtype=np.int64),
            member_codes=np.asarray(member_codes, dtype=np.int32),
        )
        logger.debug("Decoy partition built", attribute=ds.attribute, l_prime=l_prime, groups=r)
        return partition

    @staticmethod
    def locate(p: DecoyPartition, tuple_id: int) -> int:
        """Index of the group P(t) holding the tuple."""
        group = p.group_of(tuple_id)
        if group is None:
            raise UnknownTupleError(tuple_id)
        return group

    @staticmethod
    def decoys(p: DecoyPartition, tuple_id: int) -> Tuple[str, ...]:
        """The l' sensitive values of P(t), in group order."""
        group = PartitionService.locate(p, tuple_id)
        return tuple(p.domain[c] for c in p.member_codes[group].tolist())

    @staticmethod
    def neighbors(d: Dataset, p: DecoyPartition, tuple_id: int) -> List[Dataset]:
        """
        The l'-1 databases obtained by swapping t's sensitive value with each
        other member of P(t). Value counts and the group value sets are unchanged.
        """
        group = PartitionService.locate(p, tuple_id)
        others = [int(i) for i in p.member_ids[group].tolist() if i != tuple_id]
        return [DatasetService.swap_sensitive(d, p.attribute, tuple_id, other) for other in others]
