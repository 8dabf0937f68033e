"""
Command line surface: gen-data, anonymize, estimate, guarantees, benchmark.

    python cli.py anonymize --input d.csv --schema s.json --l-prime 5 --seed 7 --out dprime.csv
    python cli.py guarantees --l-prime 10 --eps 0.2 --te 0.02
"""
import argparse
import json
import secrets
import sys
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from config.settings import settings
from core.errors import PrivacyToolkitError, UsageError
from core.logger import logger
from models.schemas import BenchConfig, CountQuery, RandomizerConfig, SchemaConfig
from repositories import BaseRepository, QueryRepository, ReportRepository, TableRepository
from services.benchmark_service import BenchmarkService
from services.dataset_service import DatasetService
from services.estimator_service import EstimatorService
from services.guarantee_service import GuaranteeService
from services.mechanism_service import MechanismService

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

_files = BaseRepository("cli")
_tables = TableRepository()
_queries = QueryRepository()
_reports = ReportRepository()


# --- ARGUMENT HELPERS ---

def _int_list(text: str) -> List[int]:
    """'2-10' or '2,4,6'."""
    try:
        if "-" in text and "," not in text:
            lo, hi = (int(v) for v in text.split("-", 1))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like '2-10' or '2,4,6', got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _load_schema(path: str) -> SchemaConfig:
    return SchemaConfig.model_validate(_files.read_json(path))


def _emit(args: argparse.Namespace, document: Dict[str, Any], lines: Sequence[str]) -> None:
    if args.json:
        print(json.dumps(document, indent=2, default=str))
    else:
        for line in lines:
            print(line)


# --- SUBCOMMANDS ---

def cmd_gen_data(args: argparse.Namespace) -> int:
    config = _load_schema(args.schema) if args.schema else DatasetService.census_like_config(args.occupations)
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    d = DatasetService.generate_synthetic(args.n, config, seed)
    if not args.out:
        raise UsageError("gen-data needs --out for the CSV file.")
    path = DatasetService.write_csv(args.out, d)
    written = {"n": d.n, "seed": seed, "out": str(path)}
    if args.schema_out:
        _files.write_json(args.schema_out, config.model_dump())
        written["schema"] = args.schema_out
    _emit(args, written, [f"Wrote {d.n} rows to {path}"])
    return EXIT_OK


def cmd_anonymize(args: argparse.Namespace) -> int:
    if not args.out:
        raise UsageError("anonymize needs --out for the published table.")
    schema_config = _load_schema(args.schema)
    doc: Dict[str, Any] = _files.read_json(args.config) if args.config else {}
    for key, value in (("mechanism", args.mechanism), ("l_prime", args.l_prime), ("p", args.p),
                       ("seed", args.seed)):
        if value is not None:
            doc[key] = value
    if args.unsafe_test_mode:
        doc["unsafe_test_mode"] = True
    if "seed" not in doc:
        # Unseeded releases must not be reproducible by third parties.
        doc["seed"] = secrets.randbits(63)
    cfg = RandomizerConfig.model_validate(doc)

    d = DatasetService.ingest_csv(args.input, schema_config, cfg.seed)
    deleted: List[int] = []
    if args.enforce_eligibility:
        d, report = DatasetService.enforce_eligibility(d, cfg.l_prime)
        deleted = report.deleted_ids

    if cfg.mechanism == "anatomy":
        pub = MechanismService.anonymize_anatomy(d, cfg.l_prime, cfg.seed)
        nsa_path, sa_path = _tables.write_anatomy(args.out, pub)
        outputs = [str(nsa_path), str(sa_path)]
    else:
        if cfg.mechanism == "a_prime":
            table = MechanismService.anonymize_a_prime(d, cfg)
        else:
            table = MechanismService.anonymize_global_a(d, cfg.effective_p, cfg.seed)
        csv_path, json_path = _tables.write_published(args.out, table)
        outputs = [str(csv_path), str(json_path)]

    _emit(args, {"mechanism": cfg.mechanism, "l_prime": cfg.l_prime, "n": d.n,
                 "deleted": len(deleted), "outputs": outputs},
          [f"{cfg.mechanism}: published {d.n} rows (l'={cfg.l_prime}, {len(deleted)} deleted) -> "
           + ", ".join(outputs)])
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    schema_config = _load_schema(args.schema)
    if args.queries:
        queries = _queries.read_queries(args.queries)
    elif args.query:
        try:
            queries = [CountQuery.model_validate_json(args.query)]
        except ValidationError as e:
            raise UsageError(f"Invalid --query: {e.errors()[0]['msg']}") from None
    else:
        raise UsageError("estimate needs --queries FILE or --query JSON.")

    results = []
    if args.anatomy:
        pub = DatasetService.read_anatomy(args.anatomy, schema_config)
        for q in queries:
            results.append({"query": q.to_line(), "estimate": EstimatorService.estimate_anatomy(pub, q)})
    elif args.published:
        table = DatasetService.read_published(args.published, schema_config)
        for q in queries:
            if table.mechanism == "global_a":
                results.append({"query": q.to_line(), "estimate": EstimatorService.estimate_query(table, q)})
                continue
            r = EstimatorService.estimate_query_detailed(table, q, args.tol, args.max_iter)
            results.append({"query": q.to_line(), "estimate": float(r.x.counts[-1]),
                            "iterations": r.iterations, "converged": r.converged})
    else:
        raise UsageError("estimate needs --published CSV or --anatomy PREFIX.")

    if args.out:
        _files.write_jsonl(args.out, results)
    _emit(args, {"results": results},
          [f"{json.dumps(r['query'])}\t{r['estimate']:.4f}" for r in results])
    return EXIT_OK


def cmd_guarantees(args: argparse.Namespace) -> int:
    document: Dict[str, Any] = {"l_prime": args.l_prime, "varepsilon": args.eps}
    lines = []
    if args.te is not None:
        threshold = GuaranteeService.utility_threshold(args.l_prime, args.eps, args.te)
        document["t_e"] = args.te
        document["t_f"] = threshold.model_dump()
        lines.append(f"T_f real {threshold.real:.2f} / reported {threshold.rounded} / safe {threshold.safe}")
    if args.f is not None:
        mass = GuaranteeService.in_range_mass(args.f, args.l_prime, args.eps)
        document.update({"f_s": args.f, "in_range_mass": mass, "t_p": max(0.0, 1.0 - mass),
                         "error_bound": GuaranteeService.error_bound(args.l_prime, args.eps, args.f)})
        lines.append(f"f_s={args.f}: in-range mass {mass:.4f}, T_P {max(0.0, 1.0 - mass):.4f}")
    if args.out:
        rows = GuaranteeService.guarantee_tables(args.l_prime, args.eps, range(args.f_min, args.f_max + 1))
        path = _reports.write_guarantee_csv(args.out, rows)
        document["table"] = str(path)
        lines.append(f"Wrote {len(rows)} rows to {path}")
    if len(document) == 2:
        raise UsageError("guarantees needs --te, --f or --out.")
    _emit(args, document, lines)
    return EXIT_OK


def cmd_benchmark(args: argparse.Namespace) -> int:
    doc: Dict[str, Any] = _files.read_json(args.config) if args.config else {}
    overrides = {
        "mechanisms": args.mechanisms, "l_primes": args.l_primes, "epsilons": args.epsilons,
        "laplace_budgets": args.budgets, "seeds": args.seeds, "pool_size": args.pool_size,
        "global_p": args.global_p, "sa_attributes": args.sa_attributes, "sizes": args.sizes,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.sa_only:
        doc["sa_only"] = True
    if args.seed is not None:
        doc.setdefault("pool_seed", args.seed)
        doc.setdefault("seeds", [args.seed])
    config = BenchConfig.model_validate(doc)

    if args.input:
        if not args.schema:
            raise UsageError("benchmark --input needs --schema.")
        d = DatasetService.ingest_csv(args.input, _load_schema(args.schema), config.pool_seed)
    else:
        sensitive = config.sa_attributes or ["occupation"]
        n = max(config.sizes) if config.sizes else args.n
        d = DatasetService.generate_synthetic(
            n, DatasetService.census_like_config(sensitive=sensitive), config.pool_seed
        )

    if config.sizes:
        report = BenchmarkService.run_size_sweep(d, config)
    else:
        report = BenchmarkService.run_benchmark(d, config)
    if args.out and str(args.out).endswith(".json"):
        _reports.write_bench_json(args.out, report)
    elif args.out:
        _reports.write_bench_csv(args.out, report)
    if args.json:
        print(json.dumps(report.model_dump(), indent=2))
    else:
        print(_reports.bench_frame(report).to_csv(index=False), end="")
    return EXIT_OK


# --- PARSER ---

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (reproducible runs)")
    common.add_argument("--out", default=None, help="output file")
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")

    parser = argparse.ArgumentParser(prog="cli.py", description=settings.PROJECT_NAME)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", parents=[common], help="generate a synthetic census-like table")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--schema", help="schema config JSON (default: census-like)")
    gen.add_argument("--schema-out", help="also write the schema config used")
    gen.add_argument("--occupations", type=int, default=50)
    gen.set_defaults(handler=cmd_gen_data)

    anon = sub.add_parser("anonymize", parents=[common], help="publish a sanitized table")
    anon.add_argument("--input", required=True)
    anon.add_argument("--schema", required=True)
    anon.add_argument("--config", help="mechanism config JSON")
    anon.add_argument("--mechanism", choices=["a_prime", "global_a", "anatomy"])
    anon.add_argument("--l-prime", type=int)
    anon.add_argument("--p", type=float)
    anon.add_argument("--enforce-eligibility", action="store_true")
    anon.add_argument("--unsafe-test-mode", action="store_true")
    anon.set_defaults(handler=cmd_anonymize)

    est = sub.add_parser("estimate", parents=[common], help="estimate count queries from a publication")
    est.add_argument("--published", help="published CSV (sidecar JSON next to it)")
    est.add_argument("--anatomy", help="Anatomy publication prefix")
    est.add_argument("--schema", required=True)
    est.add_argument("--queries", help="JSON-lines query file")
    est.add_argument("--query", help="single query as JSON")
    est.add_argument("--tol", type=float)
    est.add_argument("--max-iter", type=int)
    est.set_defaults(handler=cmd_estimate)

    guar = sub.add_parser("guarantees", parents=[common], help="analytical utility/privacy guarantees")
    guar.add_argument("--l-prime", type=int, required=True)
    guar.add_argument("--eps", type=float, required=True)
    guar.add_argument("--te", type=float)
    guar.add_argument("--f", type=int, help="frequency for the privacy tail")
    guar.add_argument("--f-min", type=int, default=1)
    guar.add_argument("--f-max", type=int, default=1000)
    guar.set_defaults(handler=cmd_guarantees)

    bench = sub.add_parser("benchmark", parents=[common], help="run the query-workload benchmark")
    bench.add_argument("--input", help="dataset CSV (default: synthetic census-like)")
    bench.add_argument("--schema")
    bench.add_argument("--n", type=int, default=100_000)
    bench.add_argument("--config", help="benchmark config JSON")
    bench.add_argument("--mechanisms", type=_str_list)
    bench.add_argument("--l-primes", type=_int_list)
    bench.add_argument("--epsilons", type=_float_list)
    bench.add_argument("--budgets", type=_int_list)
    bench.add_argument("--seeds", type=_int_list)
    bench.add_argument("--pool-size", type=int)
    bench.add_argument("--global-p", type=float)
    bench.add_argument("--sa-only", action="store_true")
    bench.add_argument("--sa-attributes", type=_str_list, help="joint queries over these SAs, e.g. occupation,age")
    bench.add_argument("--sizes", type=_int_list, help="dataset-size sweep, e.g. 100000,200000")
    bench.set_defaults(handler=cmd_benchmark)
    return parser


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    if args.log_level:
        logger.set_level(args.log_level)
    try:
        return args.handler(args)
    except PrivacyToolkitError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        print(f"error: invalid configuration at '{where}': {first['msg']}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(cli_main())
