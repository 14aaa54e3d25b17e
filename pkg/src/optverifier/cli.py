"""Command-line entry point: ``optverifier <command> [options]``.

Exit codes: 0 success (for ``run``: accepted), 1 completed without acceptance
(``run`` budget exhausted, ``lint`` found violations), 2 configuration or
input error, 3 pipeline/solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .agents import LLMAgents, MockAgents
from .agents.mock import mock_interpret
from .compile import SolverConfig, bind_model, check_feasibility, emit_lp, ground, solve
from .compile.toy import instantiate_toy, load_external_parameters
from .errors import BenchError, ConfigError, DataBindingError, GatewayError, ModelFormatError, OptVerifierError
from .evalbench import (
    OPS,
    PerturbationSpec,
    StudyPositive,
    efficiency_table,
    load_dataset,
    result_from_record,
    score_solving_accuracy,
    verifier_study,
    write_bench_report,
)
from .evalbench.dataset import parse_instance
from .gateway import API_KEY_ENV, Cassette, Gateway, GatewayConfig, LiveBackend, RecordingBackend, ReplayBackend
from .model_ir import ProblemInstance, load_model, validate_model
from .orchestrator import (
    PipelineConfig,
    coerce,
    pipeline_config_from,
    read_config_file,
    render_run_report,
    run_many,
    run_pipeline,
    verify_and_refine,
)
from .structure import parse_structure

EXIT_OK, EXIT_NOT_ACCEPTED, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2, 3

DEFAULTS = {
    "solver": "highs",
    "solver_timeout": "60",
    "base_url": "https://api.openai.com/v1",
    "model_name": "gpt-4o-mini",
    "temperature": "0",
    "max_retries": "3",
    "jobs": "1",
    "seed": "0",
    "mock_agents": "false",
    "tol_rel": "1e-4",
    "tol_abs": "1e-6",
}
ENV_KEYS = {"OPTVERIFIER_BASE_URL": "base_url", "OPTVERIFIER_MODEL": "model_name"}


@dataclass
class CliConfig:
    """Defaults, then the config file, then environment, then flags."""

    values: dict[str, str] = field(default_factory=dict)
    cassette: str | None = None
    out: str | None = None

    def get(self, key: str, kind: type = str):
        return coerce(key, self.values[key], kind)

    @property
    def mock_agents(self) -> bool:
        return self.get("mock_agents", bool)

    def pipeline(self) -> PipelineConfig:
        values = dict(self.values)
        values.setdefault("toy_seed", values["seed"])
        return pipeline_config_from(values, self.solver())

    def solver(self) -> SolverConfig:
        try:
            return SolverConfig.named(self.values["solver"], self.get("solver_timeout", float))
        except OptVerifierError as exc:
            raise ConfigError(str(exc)) from None

    def gateway_config(self) -> GatewayConfig:
        seed = self.values.get("gateway_seed")
        return GatewayConfig(self.values["base_url"], self.values["model_name"], self.get("temperature", float),
                             self.get("max_retries", int), None if seed is None else int(seed))


def build_config(args) -> CliConfig:
    values = dict(DEFAULTS)
    if args.config:
        values.update(read_config_file(args.config))
    for env, key in ENV_KEYS.items():
        if os.environ.get(env):
            values[key] = os.environ[env]
    for key in ("solver", "seed", "jobs"):
        if getattr(args, key, None) is not None:
            values[key] = str(getattr(args, key))
    if args.mock_agents:
        values["mock_agents"] = "true"
    return CliConfig(values, args.cassette, args.out)


def build_agents(cfg: CliConfig, mode: str = "auto"):
    """``mode`` is auto (mock, replay or live), replay or record."""
    if cfg.mock_agents and mode == "auto":
        return MockAgents()
    pipeline = cfg.pipeline()
    if mode == "record":
        if not cfg.cassette:
            raise ConfigError("record needs --cassette")
        meta = {"model": cfg.values["model_name"], "base_url": cfg.values["base_url"]}
        backend = RecordingBackend(_live_backend(cfg), cfg.cassette, meta)
    elif cfg.cassette:
        try:
            backend = ReplayBackend(Cassette.load(cfg.cassette))
        except OSError as exc:
            raise ConfigError(f"cannot read cassette {cfg.cassette}: {exc.strerror}") from None
        except GatewayError as exc:
            raise ConfigError(str(exc)) from None
    elif mode == "replay":
        raise ConfigError("replay needs --cassette")
    else:
        backend = _live_backend(cfg)
    return LLMAgents(Gateway(backend, cfg.gateway_config()), pipeline.prompt_set)


def _live_backend(cfg: CliConfig) -> LiveBackend:
    if not os.environ.get(API_KEY_ENV):
        raise ConfigError(f"live requests need {API_KEY_ENV} (or use --mock-agents / --cassette)")
    return LiveBackend(cfg.values["base_url"])


def read_instance(path) -> ProblemInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    if path.suffix == ".json":
        try:
            return parse_instance(json.loads(text), path.name)
        except (json.JSONDecodeError, BenchError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not text.strip():
        raise ConfigError(f"{path} is empty")
    return ProblemInstance(path.stem, text.strip())


def _write_json(path, doc) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ----------------------------------------------------------------- commands


def cmd_run(args, mode: str = "auto") -> int:
    cfg = build_config(args)
    problem = read_instance(args.description)
    agents = build_agents(cfg, mode)
    config = cfg.pipeline()
    if args.model:
        try:
            initial = load_model(args.model)
        except OSError as exc:
            raise ConfigError(f"cannot read {args.model}: {exc.strerror}") from None
        try:
            record = verify_and_refine(problem, initial, agents, config)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    else:
        record = run_pipeline(problem, agents, config)
    print(render_run_report(record), end="")
    if cfg.out:
        _write_json(cfg.out, record.to_json())
    if record.outcome == "accepted":
        return EXIT_OK
    if record.outcome == "failed":
        print(f"pipeline failed: {record.error}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_NOT_ACCEPTED


def cmd_bench(args) -> int:
    cfg = build_config(args)
    problems = load_dataset(args.dataset)
    agents = build_agents(cfg)
    records = run_many(problems, agents, cfg.pipeline(), cfg.get("jobs", int))
    dataset = Path(args.dataset).stem
    results = [result_from_record(r, p, dataset) for r, p in zip(records, problems)]
    report = score_solving_accuracy(results, cfg.get("tol_rel", float), cfg.get("tol_abs", float))
    out = Path(cfg.out or "bench_out")
    paths = write_bench_report(report, out)
    table = efficiency_table(records, {p.id: dataset for p in problems})
    (out / "efficiency.txt").write_text(table, encoding="utf-8")
    sa = report.sa
    print(f"SA: {'n/a' if sa is None else f'{100 * sa:.1f}%'} ({report.overall.correct}/{report.overall.with_truth})")
    print(table, end="")
    print(f"reports written to {paths['json'].parent}")
    return EXIT_OK


def load_positives(models_dir) -> list[StudyPositive]:
    """``*.json`` models, optionally grouped in one sub-directory per difficulty.

    A sibling ``<name>.structure.json`` supplies the truth structure (otherwise it is read
    off the model) and ``<name>.txt`` the problem description.
    """
    root = Path(models_dir)
    if not root.is_dir():
        raise ConfigError(f"{root} is not a directory")
    files = [(p, "unspecified") for p in sorted(root.glob("*.json"))]
    for sub in sorted(d for d in root.iterdir() if d.is_dir()):
        files += [(p, sub.name) for p in sorted(sub.glob("*.json"))]
    out = []
    for path, difficulty in files:
        if path.name.endswith(".structure.json"):
            continue
        model = load_model(path)
        stem = path.with_suffix("")
        sidecar = stem.with_name(stem.name + ".structure.json")
        structure = (parse_structure(sidecar.read_text(encoding="utf-8"))
                     if sidecar.exists() else mock_interpret(model, "distilled_from_description"))
        description = stem.with_suffix(".txt").read_text(encoding="utf-8") if stem.with_suffix(".txt").exists() else ""
        out.append(StudyPositive(f"{difficulty}/{stem.name}", difficulty, model, structure, description))
    if not out:
        raise ConfigError(f"no model files in {root}")
    return out


def cmd_verify_bench(args) -> int:
    cfg = build_config(args)
    positives = load_positives(args.models_dir)
    ops = tuple(o.strip() for o in args.ops.split(",")) if args.ops else OPS
    try:
        spec = PerturbationSpec(cfg.get("seed", int), args.k, ops)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    agents = build_agents(cfg)
    result = verifier_study(positives, spec, agents, cfg.solver() if args.solution_side else None)
    out = Path(cfg.out or "verify_out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "verifier_study.md").write_text(result.to_markdown(), encoding="utf-8")
    _write_json(out / "verifier_study.json", result.to_json())
    print(result.to_markdown(), end="")
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = build_config(args)
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.model}: {exc.strerror}") from None
    report = validate_model(model)
    if not report.valid:
        raise ConfigError("invalid model:\n" + report.render())
    bindings: dict = {}
    for path in args.data or ():
        bindings = load_external_parameters(model, path, bindings)
    if args.toy:
        model, bindings = instantiate_toy(model, cfg.get("seed", int))
    elif bindings:
        model, bindings = bind_model(model, bindings), {}
    grounded = ground(model, bindings)
    if args.lp:
        Path(args.lp).write_text(emit_lp(grounded), encoding="utf-8")
    solution = solve(grounded, cfg.solver())
    print(f"status: {solution.status}")
    if solution.objective_value is not None:
        print(f"objective: {solution.objective_value:.10g}")
    doc = {"solution": solution.to_json()}
    if solution.has_point:
        feas = check_feasibility(grounded, solution)
        print(feas.render())
        doc["feasibility"] = feas.to_json()
    if cfg.out:
        _write_json(cfg.out, doc)
    return EXIT_FAILED if solution.status == "error" else EXIT_OK


def cmd_lint(args) -> int:
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.model}: {exc.strerror}") from None
    report = validate_model(model)
    print(report.render() if (report.violations or report.warnings) else "ok")
    return EXIT_OK if report.valid else EXIT_NOT_ACCEPTED


def cmd_cassette_list(args) -> int:
    try:
        cassette = Cassette.load(args.path)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.path}: {exc.strerror}") from None
    except GatewayError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{len(cassette)} entries")
    for key, value in sorted(cassette.meta.items()):
        print(f"{key}: {value}")
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--cassette", help="JSON Lines cassette to replay (or record into)")
    common.add_argument("--mock-agents", action="store_true", help="use deterministic rule-based agents")
    common.add_argument("--solver", help="highs, highs-inprocess, cbc or brute_force")
    common.add_argument("--seed", type=int, help="seed for toy data and perturbations")
    common.add_argument("--jobs", type=int, help="worker pool size for bench runs")
    common.add_argument("--out", help="output file (run, solve) or directory (bench, verify-bench)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="optverifier", description="Formulate, verify and refine optimization models.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "run the pipeline on one description"),
                           ("record", "run against the live API and record a cassette"),
                           ("replay", "run against a recorded cassette")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("description", help="problem description (.txt, or .json instance)")
        p.add_argument("--model", help="externally supplied initial model; skips formulation")

    p = sub.add_parser("bench", parents=[common], help="run a JSONL dataset and score solving accuracy")
    p.add_argument("dataset")

    p = sub.add_parser("verify-bench", parents=[common], help="verifier precision/recall on perturbed models")
    p.add_argument("models_dir")
    p.add_argument("--k", type=int, default=9, help="negatives per positive")
    p.add_argument("--ops", help="comma-separated perturbation ops (default: all)")
    p.add_argument("--solution-side", action="store_true", help="also solve and run solution-side checks")

    p = sub.add_parser("solve", parents=[common], help="compile and solve a model JSON")
    p.add_argument("model")
    p.add_argument("--data", action="append", help="data file for external parameters (repeatable)")
    p.add_argument("--toy", action="store_true", help="bind external parameters to small synthetic data")
    p.add_argument("--lp", help="also write the LP file here")

    p = sub.add_parser("lint", parents=[common], help="validate a model JSON")
    p.add_argument("model")

    p = sub.add_parser("cassette", help="cassette utilities")
    csub = p.add_subparsers(dest="cassette_command", required=True)
    c = csub.add_parser("list", help="print the number of recorded entries")
    c.add_argument("path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {
        "run": cmd_run,
        "record": lambda a: cmd_run(a, "record"),
        "replay": lambda a: cmd_run(a, "replay"),
        "bench": cmd_bench,
        "verify-bench": cmd_verify_bench,
        "solve": cmd_solve,
        "lint": cmd_lint,
        "cassette": cmd_cassette_list,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, BenchError, ModelFormatError, DataBindingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OptVerifierError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
