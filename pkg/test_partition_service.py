import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from core.errors import PartitionError, UnknownTupleError
from models.tables import SensitiveProjection
from services.partition_service import PartitionService


ABC_PAIRS = [(1, "a"), (2, "a"), (3, "a"), (4, "b"), (5, "b"), (6, "c")]


def test_three_buckets_worked_example(make_projection):
    partition = PartitionService.partition(make_projection(ABC_PAIRS), 2)
    assert partition.groups == (
        ((1, "a"), (4, "b")),
        ((2, "a"), (5, "b")),
        ((3, "a"), (6, "c")),
    )
    assert partition.r == 3


def test_groups_of_one(make_projection):
    partition = PartitionService.partition(make_projection(ABC_PAIRS), 1)
    assert partition.r == 6
    assert sorted(g[0] for g in partition.groups) == sorted(ABC_PAIRS)


def test_runs_out_of_buckets(make_projection):
    with pytest.raises(PartitionError, match="Round 2"):
        PartitionService.partition(make_projection([(1, "a"), (2, "a"), (3, "a"), (4, "b")]), 2)


def test_size_not_multiple(make_projection):
    with pytest.raises(PartitionError):
        PartitionService.partition(make_projection(ABC_PAIRS[:5]), 2)
    with pytest.raises(PartitionError):
        PartitionService.partition(make_projection(ABC_PAIRS), 0)


def test_unknown_tuple(make_projection):
    partition = PartitionService.partition(make_projection(ABC_PAIRS), 2)
    with pytest.raises(UnknownTupleError, match="99"):
        PartitionService.locate(partition, 99)


def test_decoys_in_group_order(make_projection):
    partition = PartitionService.partition(make_projection(ABC_PAIRS), 2)
    assert PartitionService.decoys(partition, 4) == ("a", "b")
    assert PartitionService.decoys(partition, 6) == ("a", "c")
    assert PartitionService.locate(partition, 3) == PartitionService.locate(partition, 6)


def test_input_order_does_not_matter(make_projection):
    expected = PartitionService.partition(make_projection(ABC_PAIRS), 2).groups
    shuffled = list(ABC_PAIRS)
    for seed in range(5):
        random.Random(seed).shuffle(shuffled)
        assert PartitionService.partition(make_projection(shuffled, "abc"), 2).groups == expected


def test_repeated_calls_agree(census_config):
    from services.dataset_service import DatasetService
    d, _ = DatasetService.enforce_eligibility(DatasetService.generate_synthetic(3000, census_config, seed=8), 6)
    ds = d.project("occupation")
    first = PartitionService.partition(ds, 6)
    second = PartitionService.partition(ds, 6)
    assert np.array_equal(first.member_ids, second.member_ids)
    assert np.array_equal(first.member_codes, second.member_codes)


def test_neighbors_swap_within_group(make_dataset):
    d = make_dataset(["a", "b", "c", "a", "b", "c"])
    partition = PartitionService.partition(d.project("disease"), 3)
    tuple_id = int(d.ids[0])
    neighbours = PartitionService.neighbors(d, partition, tuple_id)
    assert len(neighbours) == 2

    group = set(partition.member_ids[PartitionService.locate(partition, tuple_id)].tolist())
    for nb in neighbours:
        assert np.array_equal(nb.value_counts("disease"), d.value_counts("disease"))
        changed = d.ids[np.flatnonzero(nb.column("disease") != d.column("disease"))]
        assert set(changed.tolist()) <= group
        assert tuple_id in changed.tolist()


@st.composite
def eligible_projections(draw):
    """Data built group by group, each group holding l' distinct values."""
    l_prime = draw(st.integers(min_value=1, max_value=4))
    m = draw(st.integers(min_value=l_prime, max_value=6))
    r = draw(st.integers(min_value=1, max_value=8))
    values = []
    for _ in range(r):
        values.extend(draw(st.permutations(range(m)))[:l_prime])
    ids = draw(st.permutations(range(len(values))))
    domain = tuple(f"v{k}" for k in range(m))
    return SensitiveProjection(attribute="s", domain=domain, ids=np.array(ids), codes=np.array(values)), l_prime


@hyp_settings(max_examples=200, deadline=None)
@given(eligible_projections())
def test_partition_invariants(case):
    ds, l_prime = case
    partition = PartitionService.partition(ds, l_prime)

    assert partition.member_ids.shape == (ds.n // l_prime, l_prime)
    for codes in partition.member_codes.tolist():
        assert len(set(codes)) == l_prime
    assert sorted(partition.member_ids.ravel().tolist()) == sorted(ds.ids.tolist())

    truth = dict(zip(ds.ids.tolist(), ds.codes.tolist()))
    for ids, codes in zip(partition.member_ids.tolist(), partition.member_codes.tolist()):
        assert [truth[i] for i in ids] == codes
    assert Counter(partition.member_codes.ravel().tolist()) == Counter(ds.codes.tolist())
