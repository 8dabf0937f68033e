from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import settings
from core.errors import DomainViolationError, EmptyDatasetError, SchemaError
from core.logger import logger
from models.schemas import Attribute, AttributeSpec, Schema, SchemaConfig, ZipfDist
from models.tables import AnatomyPublication, Dataset, EligibilityReport, PublishedTable
from repositories.table_repository import TableRepository
from utils.rng import derive_generator

# Seed streams: ids depend only on (seed, N); values come from an independent stream.
_ID_STREAM = 0
_VALUE_STREAM = 1

class DatasetService:
    """
    Builds, validates and reshapes the original table D.
    """
    _table_repo = TableRepository()

    # --- SCHEMA ---

    @staticmethod
    def build_schema(config: SchemaConfig, observed: Optional[Mapping[str, Sequence[str]]] = None) -> Schema:
        """
        Declared domains are authoritative; an open domain is inferred from the
        observed values, sorted lexicographically.
        """
        attributes = []
        for spec in config.attributes:
            if spec.domain is not None:
                domain = tuple(spec.domain)
            elif observed is not None and spec.name in observed:
                domain = tuple(sorted(set(observed[spec.name])))
            else:
                raise SchemaError(f"Attribute '{spec.name}' has no declared domain.", attribute=spec.name)
            if not domain:
                raise SchemaError("empty domain", attribute=spec.name)
            attributes.append(Attribute(name=spec.name, domain=domain))
        return Schema(attributes=tuple(attributes), sa_names=tuple(config.sensitive))

    @staticmethod
    def assign_ids(n: int, seed: int) -> np.ndarray:
        """Seeded random permutation of 0..n-1, independent of record contents."""
        return derive_generator(seed, _ID_STREAM).permutation(n)

    # --- INGESTION ---

    @staticmethod
    def from_frame(frame: pd.DataFrame, config: SchemaConfig, seed: int = settings.DEFAULT_SEED) -> Dataset:
        header = [str(c) for c in frame.columns]
        unknown = [h for h in header if h not in config.names]
        if unknown:
            raise SchemaError(f"Unknown attribute name(s) in header: {unknown}", columns=unknown)
        missing = [name for name in config.names if name not in header]
        if missing:
            raise SchemaError(f"Header is missing schema attribute(s): {missing}", columns=missing)
        if frame.shape[0] == 0:
            raise EmptyDatasetError()

        for name in config.names:
            empty = np.flatnonzero(frame[name].astype(str).str.len().to_numpy() == 0)
            if empty.size:
                raise SchemaError(f"Row {int(empty[0]) + 1}, column '{name}': empty cell.",
                                  row=int(empty[0]) + 1, column=name)

        schema = DatasetService.build_schema(
            config, {name: frame[name].unique().tolist() for name in config.names}
        )
        codes = DatasetService._encode(frame, schema)
        return Dataset(schema=schema, ids=DatasetService.assign_ids(frame.shape[0], seed), codes=codes)

    @staticmethod
    def _encode(frame: pd.DataFrame, schema: Schema) -> np.ndarray:
        """Domain codes per column; the first out-of-domain cell raises (1-based row)."""
        codes = np.empty((frame.shape[0], len(schema.attributes)), dtype=np.int32)
        for j, attr in enumerate(schema.attributes):
            column = pd.Categorical(frame[attr.name], categories=list(attr.domain)).codes
            bad = np.flatnonzero(column < 0)
            if bad.size:
                row = int(bad[0])
                raise DomainViolationError(row + 1, attr.name, str(frame[attr.name].iloc[row]))
            codes[:, j] = column
        return codes

    @staticmethod
    def from_records(rows: List[Dict[str, str]], config: SchemaConfig, seed: int = settings.DEFAULT_SEED) -> Dataset:
        if not rows:
            raise EmptyDatasetError()
        frame = pd.DataFrame(rows).fillna("").astype(str)
        return DatasetService.from_frame(frame, config, seed)

    @staticmethod
    def ingest_csv(path, schema_config: SchemaConfig, seed: int = settings.DEFAULT_SEED) -> Dataset:
        """
        Load a UTF-8 comma-separated file whose header names the schema attributes.
        """
        _, body = DatasetService._table_repo.read_table(path)
        d = DatasetService.from_frame(body, schema_config, seed)
        logger.info("Dataset ingested", path=str(path), n=d.n, attributes=len(d.schema.attributes))
        return d

    @staticmethod
    def write_csv(path, d: Dataset):
        return DatasetService._table_repo.write_dataset(path, d)

    # --- PUBLISHED TABLES ---

    @staticmethod
    def published_from_frame(frame: pd.DataFrame, config: SchemaConfig, sidecar: Dict) -> PublishedTable:
        """Rebuild D' from its CSV body and sidecar. SA domains are public and come from the schema."""
        header = [str(c) for c in frame.columns]
        if sorted(header) != sorted(config.names):
            raise SchemaError(f"Published columns {header} do not match schema {config.names}")
        if sorted(sidecar.get("sensitive", config.sensitive)) != sorted(config.sensitive):
            raise SchemaError("Sidecar sensitive attributes disagree with the schema.")
        DatasetService._require_sensitive_domains(config)
        if frame.shape[0] == 0:
            raise EmptyDatasetError()
        schema = DatasetService.build_schema(
            config, {name: frame[name].unique().tolist() for name in config.names}
        )
        return PublishedTable(
            schema=schema,
            codes=DatasetService._encode(frame, schema),
            l_prime=int(sidecar["l_prime"]),
            mechanism=str(sidecar.get("mechanism", "a_prime")),
            p=sidecar.get("p"),
            seed_fingerprint=str(sidecar.get("seed_fingerprint", "")),
        )

    @staticmethod
    def _require_sensitive_domains(config: SchemaConfig):
        """A published SA column only shows surviving values, never the full public domain."""
        for name in config.sensitive:
            if config.spec(name).domain is None:
                raise SchemaError(
                    f"Sensitive attribute '{name}' needs a declared domain to read a published table.",
                    attribute=name
                )

    @staticmethod
    def read_published(path, config: SchemaConfig) -> PublishedTable:
        _, body, sidecar = DatasetService._table_repo.read_published(path)
        return DatasetService.published_from_frame(body, config, sidecar)

    @staticmethod
    def anatomy_from_frames(nsa: pd.DataFrame, sa: pd.DataFrame, config: SchemaConfig) -> AnatomyPublication:
        attribute = [name for name in config.names if name in config.sensitive][0]
        published = set(nsa.columns) - {"group_id"}
        expected = set(config.names) - set(config.sensitive)
        if published != expected:
            raise SchemaError(f"Anatomy NSA columns {sorted(published)} do not match schema {sorted(expected)}")
        DatasetService._require_sensitive_domains(config)
        observed = {name: nsa[name].unique().tolist() for name in published}
        schema = DatasetService.build_schema(config, observed)
        sizes = sa.groupby("group_id")["count"].sum().unique()
        if len(sizes) != 1:
            raise SchemaError("Anatomy groups must all have the same size.", sizes=sizes.tolist())
        return AnatomyPublication(schema=schema, attribute=attribute, l=int(sizes[0]),
                                  nsa_table=nsa, sa_table=sa)

    @staticmethod
    def read_anatomy(prefix, config: SchemaConfig) -> AnatomyPublication:
        nsa, sa = DatasetService._table_repo.read_anatomy(prefix)
        return DatasetService.anatomy_from_frames(nsa, sa, config)

    # --- ELIGIBILITY ---

    @staticmethod
    def _max_frequency(d: Dataset, keep: np.ndarray) -> Tuple[int, str, int]:
        """(frequency, attribute, code) of the most frequent SA bucket, ties by attribute order then value."""
        best = (-1, "", -1)
        for name in d.schema.sensitive_in_order:
            attr = d.schema.attribute(name)
            counts = np.bincount(d.column(name)[keep], minlength=attr.size)
            top = int(counts.max())
            if top <= best[0]:
                continue
            code = min(np.flatnonzero(counts == top), key=lambda c: attr.domain[c])
            best = (top, name, int(code))
        return best

    @staticmethod
    def is_eligible(d: Dataset, l_prime: int, keep: Optional[np.ndarray] = None) -> bool:
        keep = np.ones(d.n, dtype=bool) if keep is None else keep
        n = int(keep.sum())
        if n == 0 or n % l_prime:
            return False
        freq, _, _ = DatasetService._max_frequency(d, keep)
        return freq * l_prime <= n

    @staticmethod
    def enforce_eligibility(d: Dataset, l_prime: int) -> Tuple[Dataset, EligibilityReport]:
        """
        Delete at most l'-1 tuples so that N is a multiple of l' and no SA value
        exceeds N/l'. Each deletion removes the largest-id tuple of the currently
        most frequent SA bucket. Infeasibility is reported, never raised.
        """
        if l_prime < 1:
            raise SchemaError("l_prime must be >= 1")
        keep = np.ones(d.n, dtype=bool)
        deleted: List[int] = []
        required = d.n % l_prime

        while not DatasetService.is_eligible(d, l_prime, keep) and len(deleted) < l_prime - 1:
            _, name, code = DatasetService._max_frequency(d, keep)
            candidates = np.flatnonzero(keep & (d.column(name) == code))
            victim = candidates[np.argmax(d.ids[candidates])]
            keep[victim] = False
            deleted.append(int(d.ids[victim]))

        if not DatasetService.is_eligible(d, l_prime, keep):
            freq, _, _ = DatasetService._max_frequency(d, np.ones(d.n, dtype=bool))
            logger.warning("Dataset cannot be made eligible", l_prime=l_prime, n=d.n, max_sa_frequency=freq)
            return d, EligibilityReport(
                eligible=False, l_prime=l_prime, max_sa_frequency=freq,
                required_deletions=required, deleted_ids=[]
            )

        result = d if not deleted else d.take(np.flatnonzero(keep))
        freq, _, _ = DatasetService._max_frequency(result, np.ones(result.n, dtype=bool))
        if deleted:
            logger.info("Eligibility deletions applied", l_prime=l_prime, deleted=len(deleted), n=result.n)
        return result, EligibilityReport(
            eligible=True, l_prime=l_prime, max_sa_frequency=freq,
            required_deletions=len(deleted), deleted_ids=deleted
        )

    # --- NEIGHBOURS ---

    @staticmethod
    def swap_sensitive(d: Dataset, attribute: str, id_a: int, id_b: int) -> Dataset:
        """Neighbour database: exchange the SA values of two tuples, all counts preserved."""
        pos = {int(i): k for k, i in enumerate(d.ids.tolist())}
        if id_a not in pos or id_b not in pos:
            raise SchemaError(f"Unknown tuple id in swap ({id_a}, {id_b})")
        codes = d.codes.copy()
        j = d.schema.index(attribute)
        a, b = pos[id_a], pos[id_b]
        codes[a, j], codes[b, j] = codes[b, j], codes[a, j]
        return Dataset(schema=d.schema, ids=d.ids, codes=codes)

    # --- SYNTHETIC DATA ---

    @staticmethod
    def _probabilities(spec: AttributeSpec, m: int) -> np.ndarray:
        if isinstance(spec.dist, ZipfDist):
            weights = 1.0 / np.arange(1, m + 1, dtype=float) ** spec.dist.zipf
            return weights / weights.sum()
        return np.full(m, 1.0 / m)

    @staticmethod
    def generate_synthetic(n: int, schema_config: SchemaConfig, seed: int = settings.DEFAULT_SEED) -> Dataset:
        """
        Independent categorical columns (uniform or Zipf over the declared domain order).
        Deterministic for a fixed seed.
        """
        if n < 1:
            raise SchemaError("n must be >= 1")
        for spec in schema_config.attributes:
            if not spec.domain:
                raise SchemaError("empty domain", attribute=spec.name)
        schema = DatasetService.build_schema(schema_config)
        rng = derive_generator(seed, _VALUE_STREAM)
        codes = np.empty((n, len(schema.attributes)), dtype=np.int32)
        for j, (spec, attr) in enumerate(zip(schema_config.attributes, schema.attributes)):
            codes[:, j] = rng.choice(attr.size, size=n, p=DatasetService._probabilities(spec, attr.size))
        d = Dataset(schema=schema, ids=DatasetService.assign_ids(n, seed), codes=codes)
        logger.info("Synthetic dataset generated", n=n, seed=seed, attributes=len(schema.attributes))
        return d

    @staticmethod
    def census_like_config(occupations: int = 50, occupation_zipf: Optional[float] = 0.5,
                           sensitive: Sequence[str] = ("occupation",)) -> SchemaConfig:
        """
        Stand-in for the census sample: a handful of categorical NSA columns
        (age already binned into ten intervals) and an occupation SA. Race has
        one majority value, so some single-conjunct queries pass 5% selectivity.

        Any other attribute named in `sensitive` is drawn uniformly instead, which
        keeps it eligible for every l' below its domain size.
        """
        def values(prefix: str, k: int) -> List[str]:
            width = len(str(k - 1))
            return [f"{prefix}{i:0{width}d}" for i in range(k)]

        occupation_dist = {"zipf": occupation_zipf} if occupation_zipf else "uniform"
        attributes = [
            {"name": "sex", "domain": ["F", "M"], "dist": "uniform"},
            {"name": "age", "domain": values("age", 10), "dist": {"zipf": 0.3}},
            {"name": "race", "domain": values("race", 6), "dist": {"zipf": 2.5}},
            {"name": "education", "domain": values("edu", 12), "dist": {"zipf": 0.7}},
            {"name": "marital", "domain": values("mar", 5), "dist": {"zipf": 0.8}},
            {"name": "workclass", "domain": values("wc", 7), "dist": {"zipf": 1.0}},
            {"name": "region", "domain": values("reg", 9), "dist": "uniform"},
            {"name": "occupation", "domain": values("occ", occupations), "dist": occupation_dist},
        ]
        unknown = sorted(set(sensitive) - {a["name"] for a in attributes})
        if unknown:
            raise SchemaError(f"Unknown census-like attribute(s): {unknown}", attributes=unknown)
        for a in attributes:
            if a["name"] in sensitive and a["name"] != "occupation":
                a["dist"] = "uniform"
        return SchemaConfig.model_validate({"attributes": attributes, "sensitive": list(sensitive)})
