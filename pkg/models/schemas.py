from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import settings

# --- SCHEMA ---

class Attribute(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    domain: Tuple[str, ...] = Field(..., min_length=1)

    @field_validator("domain")
    @classmethod
    def distinct_domain(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if len(set(v)) != len(v):
            raise ValueError("Domain values must be distinct.")
        return v

    @cached_property
    def codes(self) -> Dict[str, int]:
        return {value: i for i, value in enumerate(self.domain)}

    @property
    def size(self) -> int:
        return len(self.domain)


class Schema(BaseModel):
    """
    Ordered attributes with their categorical domains, split into
    non-sensitive (NSA) and sensitive (SA) names.
    """
    model_config = ConfigDict(frozen=True)

    attributes: Tuple[Attribute, ...] = Field(..., min_length=1)
    sa_names: Tuple[str, ...] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_split(self) -> "Schema":
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("Attribute names must be unique.")
        unknown = set(self.sa_names) - set(names)
        if unknown:
            raise ValueError(f"Sensitive attributes not in schema: {sorted(unknown)}")
        if len(set(self.sa_names)) != len(self.sa_names):
            raise ValueError("Sensitive attribute names must be unique.")
        return self

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def nsa_names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.name not in self.sa_names)

    @property
    def sensitive_in_order(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.name in self.sa_names)

    @cached_property
    def positions(self) -> Dict[str, int]:
        return {a.name: i for i, a in enumerate(self.attributes)}

    def index(self, name: str) -> int:
        try:
            return self.positions[name]
        except KeyError:
            raise KeyError(f"Unknown attribute '{name}'") from None

    def attribute(self, name: str) -> Attribute:
        return self.attributes[self.index(name)]

# --- EXTERNAL CONFIG DOCUMENTS ---

class ZipfDist(BaseModel):
    zipf: float = Field(..., gt=0)


class AttributeSpec(BaseModel):
    name: str = Field(..., min_length=1)
    domain: Optional[List[str]] = None
    dist: Union[Literal["uniform"], ZipfDist] = "uniform"

    @field_validator("domain")
    @classmethod
    def check_domain(cls, v: Optional[List[str]]) -> Optional[List[str]]:
        if v is None:
            return v
        if not v:
            raise ValueError("empty domain")
        if len(set(v)) != len(v):
            raise ValueError("Domain values must be distinct.")
        return v


class SchemaConfig(BaseModel):
    """
    JSON document: {"attributes": [{"name", "domain" | null, "dist"}...], "sensitive": [...]}
    """
    attributes: List[AttributeSpec] = Field(..., min_length=1)
    sensitive: List[str] = Field(..., min_length=1)

    @model_validator(mode="after")
    def check_names(self) -> "SchemaConfig":
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("Attribute names must be unique.")
        unknown = set(self.sensitive) - set(names)
        if unknown:
            raise ValueError(f"Sensitive attributes not declared: {sorted(unknown)}")
        return self

    @property
    def names(self) -> List[str]:
        return [a.name for a in self.attributes]

    def spec(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)


class RandomizerConfig(BaseModel):
    """
    CLI-facing mechanism config: {"mechanism": "a_prime", "l_prime": 5, "seed": 42}.
    p defaults to 1/l'; any other value for a_prime needs unsafe_test_mode.
    """
    mechanism: Literal["a_prime", "global_a", "anatomy"] = "a_prime"
    l_prime: int = Field(default=settings.DEFAULT_L_PRIME, ge=1)
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)
    unsafe_test_mode: bool = False

    @property
    def effective_p(self) -> float:
        return self.p if self.p is not None else 1.0 / self.l_prime

    @property
    def exact_p(self) -> Fraction:
        if self.p is None:
            return Fraction(1, self.l_prime)
        return Fraction(str(self.p)).limit_denominator(10**9)

    @property
    def exact_q(self) -> Fraction:
        if self.l_prime == 1:
            return Fraction(0)
        return (1 - self.exact_p) / (self.l_prime - 1)

# --- QUERIES ---

class CountQuery(BaseModel):
    """
    Conjunctive count: A_1=v_1 AND ... AND A_d=v_d AND S_1=s_1 AND ... AND S_w=s_w.
    Query file lines look like {"nsa": {...}, "sa": {...}}.
    """
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    nsa_predicate: Dict[str, str] = Field(default_factory=dict, alias="nsa")
    sa_values: Dict[str, str] = Field(..., alias="sa", min_length=1)

    @model_validator(mode="after")
    def disjoint_attributes(self) -> "CountQuery":
        overlap = set(self.nsa_predicate) & set(self.sa_values)
        if overlap:
            raise ValueError(f"Attributes used twice in query: {sorted(overlap)}")
        return self

    @property
    def w(self) -> int:
        return len(self.sa_values)

    def key(self) -> Tuple[Tuple[Tuple[str, str], ...], Tuple[Tuple[str, str], ...]]:
        return (tuple(self.nsa_predicate.items()), tuple(self.sa_values.items()))

    def to_line(self) -> Dict[str, Dict[str, str]]:
        return {"nsa": dict(self.nsa_predicate), "sa": dict(self.sa_values)}


class QueryPool(BaseModel):
    queries: List[CountQuery]
    seed: int
    pool_size: int = settings.POOL_SIZE

# --- GUARANTEES ---

class UtilityThreshold(BaseModel):
    real: float
    rounded: int
    safe: int


class GuaranteeParams(BaseModel):
    """
    (varepsilon, T_E, T_f) utility triple plus the (varepsilon, T_P) privacy tail.
    varepsilon is the user-facing relative error (l' times the Chebyshev epsilon).
    """
    l_prime: int = Field(..., ge=1)
    varepsilon: float = Field(..., gt=0)
    t_e: float = Field(..., gt=0, le=1)
    t_f: float = Field(..., gt=0)
    t_f_rounded: int
    t_p: Optional[float] = Field(default=None, ge=0, le=1)

    @model_validator(mode="after")
    def threshold_relation(self) -> "GuaranteeParams":
        lhs = 1.0 / (self.l_prime * self.varepsilon ** 2 * self.t_e)
        if abs(lhs - self.t_f ** 2) > 1e-9 * max(1.0, lhs):
            raise ValueError("T_f^2 must equal 1 / (l' * varepsilon^2 * T_E).")
        return self

    @property
    def chebyshev_epsilon(self) -> float:
        return self.varepsilon / self.l_prime


class GuaranteeRow(BaseModel):
    f_s: int
    chebyshev_bound: float
    exact_tail: float
    variance_bound: float

# --- HTTP BODIES ---

class AnonymizeRequest(BaseModel):
    schema_config: SchemaConfig = Field(..., alias="schema")
    rows: List[Dict[str, str]] = Field(..., min_length=1)
    config: RandomizerConfig = RandomizerConfig()
    enforce_eligibility: bool = False

    model_config = ConfigDict(populate_by_name=True)


class PublishedRowsResponse(BaseModel):
    columns: List[str]
    rows: List[List[str]]
    l_prime: int
    mechanism: str
    deleted: int = 0


class EstimateRequest(BaseModel):
    schema_config: SchemaConfig = Field(..., alias="schema")
    columns: List[str]
    rows: List[List[str]] = Field(..., min_length=1)
    l_prime: int = Field(..., ge=1)
    query: CountQuery
    tol: Optional[float] = Field(default=None, gt=0)
    max_iter: Optional[int] = Field(default=None, ge=1)

    model_config = ConfigDict(populate_by_name=True)

    @model_validator(mode="after")
    def rectangular_rows(self) -> "EstimateRequest":
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"Row {i + 1} has {len(row)} cells, expected {width}.")
        return self


class EstimateResponse(BaseModel):
    estimate: float
    iterations: int
    converged: bool

# --- BENCHMARK ---

Mechanism = Literal["a_prime", "anatomy", "global_a", "laplace"]


class BenchConfig(BaseModel):
    mechanisms: List[Mechanism] = ["a_prime", "anatomy", "global_a", "laplace"]
    l_primes: List[int] = Field(default_factory=lambda: list(range(2, 11)))
    epsilons: List[float] = [0.01, 0.05]
    laplace_budgets: List[int] = [settings.LAPLACE_QUERY_BUDGET]
    global_p: Optional[float] = Field(default=None, gt=0, le=1)
    thresholds: List[float] = Field(default_factory=lambda: list(settings.SELECTIVITY_THRESHOLDS))
    small_count_max: int = settings.SMALL_COUNT_MAX
    seeds: List[int] = [settings.DEFAULT_SEED]
    pool_size: int = Field(default=settings.POOL_SIZE, ge=1)
    pool_seed: int = settings.DEFAULT_SEED
    max_arity: int = Field(default=settings.POOL_MAX_ARITY, ge=0)
    sa_attribute: Optional[str] = None
    # joint queries over several SAs, one value each
    sa_attributes: Optional[List[str]] = None
    sa_only: bool = False
    # dataset-size sweep; each size is a nested sample of the input table
    sizes: Optional[List[int]] = None
    tol: float = Field(default=settings.BAYES_TOL, gt=0)
    max_iter: int = Field(default=settings.BAYES_MAX_ITER, ge=1)

    @field_validator("l_primes", "laplace_budgets", "sizes")
    @classmethod
    def positive_ints(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is None:
            return v
        if not v:
            raise ValueError("Grid must not be empty.")
        if any(x < 1 for x in v):
            raise ValueError("Grid values must be >= 1.")
        return v

    @field_validator("epsilons")
    @classmethod
    def positive_eps(cls, v: List[float]) -> List[float]:
        if any(x <= 0 for x in v):
            raise ValueError("Epsilon values must be positive.")
        return v

    @field_validator("sa_attributes")
    @classmethod
    def distinct_attributes(cls, v: Optional[List[str]]) -> Optional[List[str]]:
        if v is not None and (not v or len(set(v)) != len(v)):
            raise ValueError("Sensitive attributes must be distinct and nonempty.")
        return v


class BenchRow(BaseModel):
    mechanism: str
    param: str
    selectivity_bucket: str
    avg_rel_error: Optional[float]
    n_queries: int
    anonymize_ms: float
    estimate_ms_avg: float
    iters_median: Optional[float] = None
    iters_mean: Optional[float] = None
    n_zero_actual: int = 0
    n: Optional[int] = None

    def deterministic_part(self) -> Tuple:
        return (self.mechanism, self.param, self.selectivity_bucket, self.avg_rel_error,
                self.n_queries, self.iters_median, self.iters_mean, self.n_zero_actual, self.n)


class BenchReport(BaseModel):
    rows: List[BenchRow]
    n: int
    pool_size: int
    sizes: Optional[List[int]] = None

    def cell(self, mechanism: str, param: str, bucket: str, n: Optional[int] = None) -> Optional[BenchRow]:
        for row in self.rows:
            if (row.mechanism, row.param, row.selectivity_bucket) == (mechanism, param, bucket) \
                    and (n is None or row.n == n):
                return row
        return None
