import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DomainViolationError, EmptyDatasetError, SchemaError
from models.schemas import SchemaConfig
from services.dataset_service import DatasetService


SEX_DISEASE = SchemaConfig.model_validate({
    "attributes": [
        {"name": "sex", "domain": ["F", "M"]},
        {"name": "disease", "domain": ["flu", "hiv", "none"]},
    ],
    "sensitive": ["disease"],
})


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# --- INGESTION ---

def test_ingest_three_rows(tmp_path):
    path = write(tmp_path, "sex,disease\nF,flu\nM,hiv\nF,none\n")
    d = DatasetService.ingest_csv(path, SEX_DISEASE, seed=3)
    assert d.n == 3
    assert sorted(d.ids.tolist()) == [0, 1, 2]
    assert [values for _, values in sorted(d.records(), key=lambda r: r[1])] == [
        ("F", "flu"), ("F", "none"), ("M", "hiv")
    ]


def test_ingest_empty_data_section(tmp_path):
    with pytest.raises(EmptyDatasetError, match="empty dataset"):
        DatasetService.ingest_csv(write(tmp_path, "sex,disease\n"), SEX_DISEASE)
    with pytest.raises(EmptyDatasetError, match="empty dataset"):
        DatasetService.ingest_csv(write(tmp_path, "", "blank.csv"), SEX_DISEASE)


def test_ingest_domain_violation_names_row_and_column(tmp_path):
    path = write(tmp_path, "sex,disease\nF,flu\nM,cold\n")
    with pytest.raises(DomainViolationError) as err:
        DatasetService.ingest_csv(path, SEX_DISEASE)
    assert err.value.context == {"row": 2, "column": "disease", "value": "cold"}
    assert "Row 2" in err.value.message and "disease" in err.value.message


def test_ingest_rejects_unknown_and_duplicate_headers(tmp_path):
    with pytest.raises(SchemaError, match="Unknown attribute"):
        DatasetService.ingest_csv(write(tmp_path, "sex,disease,zip\nF,flu,1\n"), SEX_DISEASE)
    with pytest.raises(SchemaError, match="Duplicate header"):
        DatasetService.ingest_csv(write(tmp_path, "sex,sex,disease\nF,F,flu\n", "dup.csv"), SEX_DISEASE)


def test_ingest_rejects_empty_cell(tmp_path):
    with pytest.raises(SchemaError, match="empty cell"):
        DatasetService.ingest_csv(write(tmp_path, "sex,disease\nF,\n"), SEX_DISEASE)


def test_open_domain_is_inferred_and_sorted(tmp_path):
    config = SchemaConfig.model_validate({
        "attributes": [{"name": "sex", "domain": None}, {"name": "disease", "domain": None}],
        "sensitive": ["disease"],
    })
    d = DatasetService.ingest_csv(write(tmp_path, "sex,disease\nM,zika\nF,flu\nM,flu\n"), config)
    assert d.schema.attribute("sex").domain == ("F", "M")
    assert d.schema.attribute("disease").domain == ("flu", "zika")


def test_csv_round_trip(tmp_path):
    d = DatasetService.generate_synthetic(200, SEX_DISEASE, seed=11)
    path = DatasetService.write_csv(tmp_path / "round.csv", d)
    again = DatasetService.ingest_csv(path, SEX_DISEASE, seed=11)
    assert again.equals(d)


def test_ids_depend_only_on_seed_and_size(make_dataset):
    a = make_dataset(["x", "y", "x", "y", "z"], seed=5)
    b = make_dataset(["z", "z", "z", "y", "x"], seed=5)
    assert np.array_equal(a.ids, b.ids)
    assert sorted(a.ids.tolist()) == list(range(5))


# --- ELIGIBILITY ---

def test_already_eligible_is_unchanged(make_dataset):
    d = make_dataset(["a", "a", "b", "b"])
    out, report = DatasetService.enforce_eligibility(d, 2)
    assert out is d
    assert report.eligible and report.deleted_ids == [] and report.required_deletions == 0
    assert report.max_sa_frequency == 2


def test_one_deletion_from_most_frequent_bucket(make_dataset):
    d = make_dataset(["a", "a", "b", "b", "c"])
    out, report = DatasetService.enforce_eligibility(d, 2)
    assert report.eligible
    assert out.n == 4
    assert len(report.deleted_ids) == 1
    # ties between a and b go to the lexicographically smaller value; its largest id goes
    a_ids = [i for i, values in d.records() if values[1] == "a"]
    assert report.deleted_ids == [max(a_ids)]
    assert report.max_sa_frequency == 2


def test_infeasible_returns_original(make_dataset):
    d = make_dataset(["a", "a", "a", "a", "a", "b"])
    out, report = DatasetService.enforce_eligibility(d, 2)
    assert out is d
    assert not report.eligible
    assert report.deleted_ids == []
    assert report.max_sa_frequency == 5


def test_enforcement_is_idempotent(census_config):
    d = DatasetService.generate_synthetic(1003, census_config, seed=2)
    once, first = DatasetService.enforce_eligibility(d, 7)
    twice, second = DatasetService.enforce_eligibility(once, 7)
    assert first.eligible and second.eligible
    assert len(first.deleted_ids) <= 6
    assert once.n % 7 == 0
    assert twice.equals(once)
    assert second.deleted_ids == []


# --- SYNTHETIC DATA ---

def test_uniform_occupation_frequencies():
    config = DatasetService.census_like_config(occupations=50, occupation_zipf=None)
    d = DatasetService.generate_synthetic(100_000, config, seed=1)
    counts = d.value_counts("occupation")
    assert counts.shape == (50,)
    # sd of each count is about 44
    assert np.all(np.abs(counts - 2000) < 250)


def test_census_like_is_eligible_for_default_grid(census_config):
    d = DatasetService.generate_synthetic(100_000, census_config, seed=1)
    top = d.value_counts("occupation").max() / d.n
    assert 0.06 < top < 0.1
    for l_prime in range(2, 11):
        assert DatasetService.enforce_eligibility(d, l_prime)[1].eligible


def test_census_like_extra_sensitive_attribute():
    config = DatasetService.census_like_config(sensitive=("occupation", "age"))
    assert config.sensitive == ["occupation", "age"]
    d = DatasetService.generate_synthetic(50_000, config, seed=3)
    ages = d.value_counts("age")
    # uniform over ten bins, sd of each count is about 67
    assert np.all(np.abs(ages - 5000) < 350)
    for l_prime in (2, 5, 9):
        assert DatasetService.enforce_eligibility(d, l_prime)[1].eligible
    with pytest.raises(SchemaError, match="salary"):
        DatasetService.census_like_config(sensitive=("occupation", "salary"))


def test_single_record(census_config):
    d = DatasetService.generate_synthetic(1, census_config, seed=9)
    assert d.n == 1
    assert d.ids.tolist() == [0]


def test_same_seed_same_dataset(census_config, tmp_path):
    a = DatasetService.generate_synthetic(5000, census_config, seed=21)
    b = DatasetService.generate_synthetic(5000, census_config, seed=21)
    assert a.equals(b)
    pa = DatasetService.write_csv(tmp_path / "a.csv", a)
    pb = DatasetService.write_csv(tmp_path / "b.csv", b)
    assert pa.read_bytes() == pb.read_bytes()
    assert not DatasetService.generate_synthetic(5000, census_config, seed=22).equals(a)


def test_zipf_marginal_follows_domain_order():
    config = SchemaConfig.model_validate({
        "attributes": [{"name": "s", "domain": ["a", "b", "c", "d"], "dist": {"zipf": 1.0}}],
        "sensitive": ["s"],
    })
    counts = DatasetService.generate_synthetic(48_000, config, seed=4).value_counts("s")
    expected = 48_000 * np.array([1, 1 / 2, 1 / 3, 1 / 4]) / (25 / 12)
    assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected))


def test_empty_domain_rejected():
    with pytest.raises(ValidationError, match="empty domain"):
        SchemaConfig.model_validate({
            "attributes": [{"name": "s", "domain": []}],
            "sensitive": ["s"],
        })


def test_swap_sensitive_keeps_counts(make_dataset):
    d = make_dataset(["a", "b", "c", "a"])
    ids = d.ids.tolist()
    swapped = DatasetService.swap_sensitive(d, "disease", ids[0], ids[1])
    assert np.array_equal(swapped.value_counts("disease"), d.value_counts("disease"))
    assert swapped.column("disease")[0] == d.column("disease")[1]
    assert swapped.column("disease")[1] == d.column("disease")[0]
