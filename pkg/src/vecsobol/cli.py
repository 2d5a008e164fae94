"""Config-driven batch front end.

Reads a schema-versioned YAML/JSON configuration (or equivalent flags),
runs estimation and/or exact oracles per subset, and writes a JSON or CSV
report. Runs are deterministic given the config; with --reproducible the
timing fields are dropped so two runs of the same config produce
byte-identical reports.

Exit codes: 0 success, 2 configuration error, 3 degenerate model or
ill-posed index, 4 report/output error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from . import __version__
from .errors import (
    ConfigurationError,
    ContractError,
    DegenerateModelError,
    DegenerateSampleError,
    IllPosedIndexError,
    ReportError,
    UnsupportedOracleError,
    VecSobolError,
)
from .inference import bootstrap_ci, clt_diagnostic, delta_ci
from .models import (
    OutputTransform,
    VectorModel,
    apply_transform,
    get_model,
    load_external_model,
)
from .oracle import (
    CovarianceTriple,
    covariances_quadrature,
    decompose_discrete,
    exact_index,
)
from .pickfreeze import (
    estimate_index,
    estimate_index_general,
    evaluate_pairs,
    generate_design,
    read_sample_csv,
)
from .spaces import Discrete, InputSpace, Normal, SubsetIndex, Uniform

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_IO = 4

DEFAULT_QUADRATURE_NODES = 64


@dataclass
class CISpec:
    kind: str  # 'none' | 'delta' | 'bootstrap'
    level: float = 0.95
    reps: int = 1000


@dataclass
class RunConfig:
    """Validated run description; subsets are stored 0-based internally."""

    model: Optional[VectorModel]
    space: Optional[InputSpace]
    subsets: list[SubsetIndex]
    n: int
    seed: int
    matrix: Optional[np.ndarray] = None
    transform: Optional[OutputTransform] = None
    ci: CISpec = field(default_factory=lambda: CISpec("none"))
    oracle: str = "none"  # 'none' | 'auto'
    replications: Optional[int] = None
    sample_path: Optional[str] = None  # estimator-only mode
    reproducible: bool = False


@dataclass
class SubsetResult:
    subset: list[int]  # 1-based, as reported externally
    n: int
    seed: int
    estimate: float
    estimate_weighted: Optional[float] = None
    sigma2_hat: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    ci_level: Optional[float] = None
    ci_method: Optional[str] = None
    oracle_method: Optional[str] = None
    oracle_subset: Optional[float] = None
    oracle_complement: Optional[float] = None
    oracle_interaction: Optional[float] = None
    oracle_sum_residual: Optional[float] = None
    oracle_weighted: Optional[float] = None
    replication: Optional[dict] = None
    elapsed_s: Optional[float] = None


@dataclass
class RunReport:
    schema: int
    tool: str
    version: str
    seed: int
    n: int
    subsets: list[SubsetResult]
    elapsed_s: Optional[float] = None


# ---------------------------------------------------------------------------
# configuration parsing
# ---------------------------------------------------------------------------


def _fail(path: str, message: str) -> ConfigurationError:
    return ConfigurationError(f"{path}: {message}")


def _require_int(tree: dict, key: str, minimum: Optional[int] = None) -> int:
    value = tree.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise _fail(key, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise _fail(key, f"must be >= {minimum}, got {value}")
    return value


def _parse_marginal(node: Any, path: str):
    if not isinstance(node, dict) or "kind" not in node:
        raise _fail(path, "marginal descriptor must be a mapping with a 'kind'")
    kind = node["kind"]
    try:
        if kind == "uniform":
            low = node.get("low", node.get("a", 0.0))
            high = node.get("high", node.get("b", 1.0))
            return Uniform(float(low), float(high))
        if kind == "normal":
            return Normal(float(node.get("mean", 0.0)), float(node.get("sd", 1.0)))
        if kind == "discrete":
            if "support" in node:
                support = {float(k): float(v) for k, v in node["support"].items()}
                return Discrete.from_mapping(support)
            points = tuple(float(v) for v in node.get("points", ()))
            probs = tuple(float(v) for v in node.get("probs", ()))
            return Discrete(points, probs)
    except ConfigurationError as exc:
        raise _fail(path, str(exc)) from None
    raise _fail(path, f"unknown marginal kind {kind!r}")


def _parse_space(node: Any, path: str = "space") -> InputSpace:
    if not isinstance(node, list) or not node:
        raise _fail(path, "expected a non-empty list of marginal descriptors")
    return InputSpace(tuple(_parse_marginal(m, f"{path}[{i}]") for i, m in enumerate(node)))


def _parse_matrix(node: Any, path: str) -> np.ndarray:
    try:
        m = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        raise _fail(path, "expected a matrix as a list of equal-length rows") from None
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise _fail(path, f"expected a square matrix, got shape {tuple(m.shape)}")
    if not np.all(np.isfinite(m)):
        raise _fail(path, "matrix entries must be finite")
    return m


def _parse_model(node: Any) -> VectorModel:
    if isinstance(node, str):
        node = {"name": node}
    if not isinstance(node, dict):
        raise _fail("model", "expected a corpus name or a mapping")
    if "external" in node:
        try:
            return load_external_model(str(node["external"]))
        except OSError as exc:
            raise _fail("model.external", f"cannot read file: {exc}") from None
    name = node.get("name")
    if not isinstance(name, str):
        raise _fail("model.name", "expected a corpus model name")
    params = dict(node.get("params") or {})
    if name == "u_only" and "coords" in params:
        # config coordinates are 1-based, like subsets
        params["coords"] = tuple(int(c) - 1 for c in params["coords"])
    try:
        return get_model(name, **params)
    except ConfigurationError as exc:
        raise _fail("model", str(exc)) from None
    except TypeError as exc:
        raise _fail("model.params", str(exc)) from None


def _parse_ci(node: Any) -> CISpec:
    if node is None or node == "none":
        return CISpec("none")
    if node == "delta":
        return CISpec("delta")
    if node == "bootstrap":
        return CISpec("bootstrap")
    if isinstance(node, dict):
        kind = node.get("kind")
        if kind not in ("none", "delta", "bootstrap"):
            raise _fail("ci.kind", f"expected none|delta|bootstrap, got {kind!r}")
        level = float(node.get("level", 0.95))
        if not 0.0 < level < 1.0:
            raise _fail("ci.level", f"must be in (0, 1), got {level}")
        reps = int(node.get("reps", 1000))
        if kind == "bootstrap" and reps < 200:
            raise _fail("ci.reps", f"bootstrap needs >= 200 replicates, got {reps}")
        return CISpec(kind, level, reps)
    raise _fail("ci", f"expected none|delta|bootstrap or a mapping, got {node!r}")


def _parse_transform(node: Any) -> OutputTransform:
    if not isinstance(node, dict) or "kind" not in node:
        raise _fail("transform", "expected a mapping with a 'kind'")
    kind = node["kind"]
    if kind == "homothety":
        try:
            return OutputTransform(kind="homothety", scale=float(node.get("scale", 0.0)))
        except ConfigurationError as exc:
            raise _fail("transform.scale", str(exc)) from None
    if kind in ("isometry", "general_linear"):
        matrix = _parse_matrix(node.get("matrix"), "transform.matrix")
        try:
            return OutputTransform(kind=kind, matrix=matrix)
        except ConfigurationError as exc:
            raise _fail("transform.matrix", str(exc)) from None
    raise _fail("transform.kind", f"unknown transform kind {kind!r}")


def config_from_tree(tree: dict) -> RunConfig:
    """Validate a parsed configuration tree; every failure names the field."""
    if not isinstance(tree, dict):
        raise ConfigurationError("configuration must be a mapping")
    schema = tree.get("schema", 1)
    if schema != 1:
        raise _fail("schema", f"unsupported schema version {schema!r}")

    sample_path = tree.get("sample")
    if sample_path is not None:
        if "model" in tree:
            raise _fail("sample", "estimator-only mode excludes a 'model' entry")
        if tree.get("oracle", "none") not in (None, "none"):
            raise _fail("oracle", "estimator-only mode supports oracle: none only")
        if tree.get("replications") is not None:
            raise _fail("replications", "not available in estimator-only mode")
        subsets_node = tree.get("subsets") or []
        config = RunConfig(
            model=None,
            space=None,
            subsets=[],
            n=0,
            seed=int(tree.get("seed", 0)),
            ci=_parse_ci(tree.get("ci")),
            sample_path=str(sample_path),
        )
        if subsets_node:
            # labels only; bounds cannot be checked without a model
            config.subsets = [
                SubsetIndex.from_one_based(s, max(max(s), 1)) for s in subsets_node
            ]
        if tree.get("matrix") is not None:
            config.matrix = _parse_matrix(tree["matrix"], "matrix")
        return config

    if "model" not in tree:
        raise _fail("model", "missing")
    model = _parse_model(tree["model"])

    if tree.get("space") is not None:
        space = _parse_space(tree["space"])
    elif model.default_space is not None:
        space = model.default_space
    else:
        raise _fail("space", "missing and the model has no default input space")
    if space.dims != model.in_dims:
        raise _fail(
            "space",
            f"has {space.dims} marginals but the model expects {model.in_dims} inputs",
        )

    subsets_node = tree.get("subsets")
    if not isinstance(subsets_node, list) or not subsets_node:
        raise _fail("subsets", "expected a non-empty list of 1-based index lists")
    subsets = []
    for i, raw in enumerate(subsets_node):
        if isinstance(raw, int):
            raw = [raw]
        if not isinstance(raw, list) or not raw or not all(isinstance(v, int) for v in raw):
            raise _fail(f"subsets[{i}]", f"expected a list of integers, got {raw!r}")
        try:
            subsets.append(SubsetIndex.from_one_based(raw, model.in_dims))
        except ContractError:
            raise _fail(
                f"subsets[{i}]",
                f"{raw} is not a valid group of 1-based indices in 1..{model.in_dims}",
            ) from None

    config = RunConfig(
        model=model,
        space=space,
        subsets=subsets,
        n=_require_int(tree, "n", minimum=2) if "n" in tree else 1000,
        seed=_require_int(tree, "seed") if "seed" in tree else 0,
        ci=_parse_ci(tree.get("ci")),
        oracle=str(tree.get("oracle") or "none"),
    )
    if config.oracle not in ("none", "auto"):
        raise _fail("oracle", f"expected none|auto, got {config.oracle!r}")

    if tree.get("matrix") is not None:
        config.matrix = _parse_matrix(tree["matrix"], "matrix")
        if config.matrix.shape[0] != model.out_dims:
            raise _fail(
                "matrix",
                f"is {config.matrix.shape[0]}x{config.matrix.shape[1]} but the model "
                f"has {model.out_dims} outputs",
            )

    if tree.get("transform") is not None:
        config.transform = _parse_transform(tree["transform"])
        t_dims = config.transform.out_dims
        if t_dims is not None and t_dims != model.out_dims:
            raise _fail(
                "transform.matrix",
                f"is {t_dims}x{t_dims} but the model has {model.out_dims} outputs",
            )

    if tree.get("replications") is not None:
        config.replications = _require_int(tree, "replications", minimum=200)
        if config.oracle != "auto":
            raise _fail("replications", "a replication study needs oracle: auto for its target")

    return config


def parse_config(text: str) -> RunConfig:
    """Parse a YAML (or JSON) configuration document into a validated RunConfig."""
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"configuration is not well formed: {exc}") from None
    if tree is None:
        raise ConfigurationError("configuration is empty")
    return config_from_tree(tree)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _subset_seed_streams(config: RunConfig) -> list:
    """Per-subset (design, ci, replication) seed streams derived from the config seed."""
    root = np.random.SeedSequence(config.seed)
    return [child.spawn(3) for child in root.spawn(len(config.subsets))]


def subset_design(config: RunConfig, index: int):
    """The exact design run() will evaluate for config.subsets[index].

    External-model users tabulate the base rows and the frozen-mix rows of
    this design, evaluate them offline, and feed the table back via
    model.external.
    """
    streams = _subset_seed_streams(config)
    return generate_design(config.space, config.subsets[index], config.n, streams[index][0])


def resolve_oracle(
    model: VectorModel, space: InputSpace, subset: SubsetIndex
) -> Optional[CovarianceTriple]:
    """Pick an exact route the model family admits, or None."""
    if model.exact_cov is not None:
        return model.exact_cov(space, subset)
    if space.all_discrete:
        return decompose_discrete(model, space, subset).covariance_triple()
    if space.all_continuous and space.dims <= 4:
        return covariances_quadrature(model, space, subset, DEFAULT_QUADRATURE_NODES)
    return None


def _replication_dict(report) -> dict:
    return {
        "n_per_rep": report.n_per_rep,
        "reps": report.reps,
        "target": report.target,
        "mean_estimate": float(np.mean(report.estimates)),
        "std_empirical": report.std_empirical,
        "normality_stat": report.normality_stat,
        "coverage": report.coverage,
    }


def _run_sample_only(config: RunConfig) -> RunReport:
    sample = read_sample_csv(config.sample_path)
    label = list(config.subsets[0].to_one_based()) if config.subsets else []
    result = SubsetResult(
        subset=label,
        n=sample.n,
        seed=config.seed,
        estimate=estimate_index(sample),
    )
    if config.matrix is not None:
        result.estimate_weighted = estimate_index_general(sample, config.matrix)
    _attach_ci(result, sample, config, np.random.SeedSequence(config.seed))
    return RunReport(
        schema=1,
        tool="vecsobol",
        version=__version__,
        seed=config.seed,
        n=sample.n,
        subsets=[result],
    )


def _attach_ci(result: SubsetResult, sample, config: RunConfig, seedseq) -> None:
    if config.ci.kind == "none":
        return
    if config.ci.kind == "delta":
        est = delta_ci(sample, config.ci.level)
    else:
        est = bootstrap_ci(sample, config.ci.reps, config.ci.level, seedseq)
    result.sigma2_hat = est.sigma2_hat
    result.ci_low = est.ci_low
    result.ci_high = est.ci_high
    result.ci_level = est.ci_level
    result.ci_method = est.method


def run(config: RunConfig) -> RunReport:
    """Execute the configured analysis; deterministic given the config."""
    started = time.perf_counter()
    if config.sample_path is not None:
        return _run_sample_only(config)

    model = config.model
    if config.transform is not None:
        model = apply_transform(model, config.transform)
    space = config.space

    streams = _subset_seed_streams(config)
    results = []
    for subset, (design_ss, ci_ss, rep_ss) in zip(config.subsets, streams):
        t0 = time.perf_counter()
        design = generate_design(space, subset, config.n, design_ss)
        sample = evaluate_pairs(model, design)
        result = SubsetResult(
            subset=list(subset.to_one_based()),
            n=config.n,
            seed=config.seed,
            estimate=estimate_index(sample),
        )
        if config.matrix is not None:
            result.estimate_weighted = estimate_index_general(sample, config.matrix)
        _attach_ci(result, sample, config, ci_ss)

        if config.oracle == "auto":
            triple = resolve_oracle(model, space, subset)
            if triple is not None:
                idx = exact_index(triple, np.eye(model.out_dims))
                result.oracle_method = triple.method
                result.oracle_subset = idx.subset
                result.oracle_complement = idx.complement
                result.oracle_interaction = idx.interaction
                result.oracle_sum_residual = idx.sum_defect()
                if config.matrix is not None:
                    result.oracle_weighted = exact_index(triple, config.matrix).subset

        if config.replications is not None:
            if result.oracle_subset is None:
                raise ConfigurationError(
                    f"replications: no oracle target available for subset "
                    f"{list(subset.to_one_based())}"
                )
            rep = clt_diagnostic(
                model,
                space,
                subset,
                n_per_rep=config.n,
                reps=config.replications,
                target=result.oracle_subset,
                seed=rep_ss,
                ci_level=config.ci.level,
                ci_method="bootstrap" if config.ci.kind == "bootstrap" else "delta",
                b_reps=config.ci.reps,
            )
            result.replication = _replication_dict(rep)

        if not config.reproducible:
            result.elapsed_s = time.perf_counter() - t0
        results.append(result)

    report = RunReport(
        schema=1,
        tool="vecsobol",
        version=__version__,
        seed=config.seed,
        n=config.n,
        subsets=results,
    )
    if not config.reproducible:
        report.elapsed_s = time.perf_counter() - started
    return report


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def report_to_dict(report: RunReport) -> dict:
    return asdict(report)


def report_from_dict(tree: dict) -> RunReport:
    subsets = [SubsetResult(**s) for s in tree.get("subsets", [])]
    top = {k: v for k, v in tree.items() if k != "subsets"}
    return RunReport(subsets=subsets, **top)


def _check_finite(node: Any, path: str) -> None:
    if isinstance(node, float) and not np.isfinite(node):
        raise ReportError(f"non-finite value at {path}: {node!r}")
    if isinstance(node, dict):
        for key, value in node.items():
            _check_finite(value, f"{path}.{key}")
    elif isinstance(node, list):
        for i, value in enumerate(node):
            _check_finite(value, f"{path}[{i}]")


def report_to_json(report: RunReport) -> str:
    tree = report_to_dict(report)
    _check_finite(tree, "report")
    return json.dumps(tree, sort_keys=True, indent=2) + "\n"


def report_to_csv(report: RunReport) -> str:
    tree = report_to_dict(report)
    _check_finite(tree, "report")
    lines = ["subset,estimate,oracle,sigma2_hat,ci_low,ci_high,n,seed"]
    for sub in report.subsets:
        cells = [
            "+".join(str(i) for i in sub.subset),
            repr(sub.estimate),
            "" if sub.oracle_subset is None else repr(sub.oracle_subset),
            "" if sub.sigma2_hat is None else repr(sub.sigma2_hat),
            "" if sub.ci_low is None else repr(sub.ci_low),
            "" if sub.ci_high is None else repr(sub.ci_high),
            str(sub.n),
            str(sub.seed),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_report(report: RunReport, path: str, fmt: str = "json") -> None:
    """Serialize the report to path ('-' writes to stdout)."""
    if fmt == "json":
        text = report_to_json(report)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc}") from None


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecsobol",
        description="Sensitivity indices for vector-valued models "
        "(pick-freeze estimation with exact oracles).",
    )
    parser.add_argument("--config", help="YAML/JSON run configuration file")
    parser.add_argument("--model", help="corpus model name")
    parser.add_argument(
        "--subset",
        action="append",
        help="comma-separated 1-based input indices; repeatable",
    )
    parser.add_argument("--n", type=int, help="pick-freeze sample size")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--matrix", help="path to a whitespace-separated weight matrix file")
    parser.add_argument("--ci", choices=["none", "delta", "bootstrap"], help="interval method")
    parser.add_argument("--ci-level", type=float, help="confidence level (default 0.95)")
    parser.add_argument("--ci-reps", type=int, help="bootstrap replicates (default 1000)")
    parser.add_argument("--oracle", choices=["none", "auto"], help="exact comparison mode")
    parser.add_argument("--replications", type=int, help="replication study size")
    parser.add_argument("--sample", help="estimator-only mode: pick-freeze sample CSV")
    parser.add_argument("--output", default="-", help="report destination (default stdout)")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument(
        "--reproducible",
        action="store_true",
        help="drop timing fields so identical configs give byte-identical reports",
    )
    return parser


def _tree_from_args(args: argparse.Namespace) -> dict:
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"config: cannot read {args.config}: {exc}") from None
        try:
            tree = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config: not well formed: {exc}") from None
        if not isinstance(tree, dict):
            raise ConfigurationError("config: document must be a mapping")
    else:
        tree = {"schema": 1}

    if args.model:
        tree["model"] = args.model
    if args.sample:
        tree["sample"] = args.sample
        tree.pop("model", None)
    if args.subset:
        subsets = []
        for chunk in args.subset:
            try:
                subsets.append([int(v) for v in chunk.split(",") if v.strip()])
            except ValueError:
                raise ConfigurationError(
                    f"subsets: expected comma-separated integers, got {chunk!r}"
                ) from None
        tree["subsets"] = subsets
    if args.n is not None:
        tree["n"] = args.n
    if args.seed is not None:
        tree["seed"] = args.seed
    if args.matrix:
        try:
            tree["matrix"] = np.atleast_2d(np.loadtxt(args.matrix)).tolist()
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"matrix: cannot read {args.matrix}: {exc}") from None
    if args.oracle:
        tree["oracle"] = args.oracle
    if args.replications is not None:
        tree["replications"] = args.replications
    if args.ci or args.ci_level is not None or args.ci_reps is not None:
        ci: dict[str, Any] = {"kind": args.ci or "delta"}
        if args.ci_level is not None:
            ci["level"] = args.ci_level
        if args.ci_reps is not None:
            ci["reps"] = args.ci_reps
        tree["ci"] = ci if ci["kind"] != "none" else "none"
    return tree


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        tree = _tree_from_args(args)
        config = config_from_tree(tree)
        config.reproducible = args.reproducible
    except (ConfigurationError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        report = run(config)
    except (ConfigurationError, ContractError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateModelError, DegenerateSampleError, IllPosedIndexError) as exc:
        print(f"degenerate model: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UnsupportedOracleError, VecSobolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE

    try:
        write_report(report, args.output, args.format)
    except (ReportError, ConfigurationError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
