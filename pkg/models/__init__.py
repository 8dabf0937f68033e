from models.schemas import (
    Attribute,
    Schema,
    AttributeSpec,
    SchemaConfig,
    RandomizerConfig,
    CountQuery,
    QueryPool,
    UtilityThreshold,
    GuaranteeParams,
    GuaranteeRow,
    BenchConfig,
    BenchRow,
    BenchReport,
)
from models.tables import (
    Dataset,
    SensitiveProjection,
    EligibilityReport,
    DecoyPartition,
    PublishedTable,
    AnatomyPublication,
)
from models.states import StateVector, TransitionMatrix, BayesResult

__all__ = [
    "Attribute",
    "Schema",
    "AttributeSpec",
    "SchemaConfig",
    "RandomizerConfig",
    "CountQuery",
    "QueryPool",
    "UtilityThreshold",
    "GuaranteeParams",
    "GuaranteeRow",
    "BenchConfig",
    "BenchRow",
    "BenchReport",
    "Dataset",
    "SensitiveProjection",
    "EligibilityReport",
    "DecoyPartition",
    "PublishedTable",
    "AnatomyPublication",
    "StateVector",
    "TransitionMatrix",
    "BayesResult",
]
