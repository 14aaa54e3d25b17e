"""Solving-accuracy scoring and the benchmark report."""

from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from ..model_ir import ProblemInstance

TOL_ABS = 1e-6
TOL_REL = 1e-4


@dataclass(frozen=True)
class InstanceResult:
    id: str
    dataset: str
    difficulty: str | None
    outcome: str
    status: str | None
    predicted: float | None
    truth: float | None
    agent_calls: int = 0
    tokens: int = 0
    wall_time: float = 0.0


def result_from_record(record, instance: ProblemInstance, dataset: str = "default") -> InstanceResult:
    solution = record.solution
    return InstanceResult(
        instance.id, dataset, instance.difficulty, record.outcome,
        solution.status if solution is not None else None,
        solution.objective_value if solution is not None else None,
        instance.ground_truth_objective, record.totals.agent_calls, record.totals.tokens, record.wall_time,
    )


def is_correct(result: InstanceResult, tol_rel: float = TOL_REL, tol_abs: float = TOL_ABS) -> bool:
    if result.truth is None or result.predicted is None:
        return False
    if result.outcome != "accepted" or result.status != "optimal":
        return False
    return abs(result.predicted - result.truth) <= max(tol_abs, tol_rel * abs(result.truth))


@dataclass(frozen=True)
class Group:
    instances: int
    with_truth: int
    correct: int

    @property
    def sa(self) -> float | None:
        return self.correct / self.with_truth if self.with_truth else None


def _group(rows: Sequence[tuple[InstanceResult, bool]]) -> Group:
    with_truth = [r for r in rows if r[0].truth is not None]
    return Group(len(rows), len(with_truth), sum(1 for _, ok in with_truth if ok))


@dataclass
class BenchReport:
    results: list[InstanceResult] = field(default_factory=list)
    correct: list[bool] = field(default_factory=list)
    tol_rel: float = TOL_REL
    tol_abs: float = TOL_ABS

    @property
    def overall(self) -> Group:
        return _group(list(zip(self.results, self.correct)))

    @property
    def sa(self) -> float | None:
        """Correct over instances with a ground truth; None when no instance has one."""
        return self.overall.sa

    def by(self, key: str) -> "OrderedDict[str, Group]":
        buckets: OrderedDict[str, list] = OrderedDict()
        for r, ok in zip(self.results, self.correct):
            buckets.setdefault(str(getattr(r, key) or "unspecified"), []).append((r, ok))
        return OrderedDict((k, _group(v)) for k, v in buckets.items())

    @property
    def macro_sa(self) -> float | None:
        """Mean of per-dataset SA (datasets without any truth are skipped)."""
        values = [g.sa for g in self.by("dataset").values() if g.sa is not None]
        return fmean(values) if values else None

    @property
    def without_truth(self) -> list[str]:
        return [r.id for r in self.results if r.truth is None]

    def means(self) -> dict[str, float | None]:
        if not self.results:
            return {"time": None, "agent_calls": None, "tokens": None}
        return {
            "time": fmean(r.wall_time for r in self.results),
            "agent_calls": fmean(r.agent_calls for r in self.results),
            "tokens": fmean(r.tokens for r in self.results),
        }

    # -------------------------------------------------------------- output

    def to_json(self) -> dict:
        """Everything except wall-clock values, so replays compare byte for byte."""

        def group_json(g: Group) -> dict:
            return {"instances": g.instances, "with_truth": g.with_truth, "correct": g.correct, "sa": g.sa}

        means = self.means()
        return {
            "tolerances": {"rel": self.tol_rel, "abs": self.tol_abs},
            "instances": [
                {
                    "id": r.id, "dataset": r.dataset, "difficulty": r.difficulty, "outcome": r.outcome,
                    "status": r.status, "predicted": r.predicted, "truth": r.truth, "correct": ok,
                    "agent_calls": r.agent_calls, "tokens": r.tokens,
                }
                for r, ok in zip(self.results, self.correct)
            ],
            "aggregate": {
                **group_json(self.overall),
                "micro_instance_sa": self.sa,
                "macro_dataset_sa": self.macro_sa,
                "mean_agent_calls": means["agent_calls"],
                "mean_tokens": means["tokens"],
                "without_truth": self.without_truth,
            },
            "by_dataset": {k: group_json(g) for k, g in self.by("dataset").items()},
            "by_difficulty": {k: group_json(g) for k, g in self.by("difficulty").items()},
        }

    def timing_json(self) -> dict:
        means = self.means()
        return {"mean_time": means["time"], "instances": {r.id: r.wall_time for r in self.results}}

    def to_markdown(self) -> str:
        means = self.means()

        def pct(v):
            return "n/a" if v is None else f"{100 * v:.1f}"

        def num(v, spec=".1f"):
            return "n/a" if v is None else format(v, spec)

        lines = [
            "# Benchmark report",
            "",
            f"SA (micro, per instance): {pct(self.sa)}  ",
            f"SA (macro, per dataset): {pct(self.macro_sa)}  ",
            f"Mean time (s): {num(means['time'], '.2f')}  ",
            f"Mean agent calls: {num(means['agent_calls'])}  ",
            f"Mean tokens: {num(means['tokens'], '.0f')}",
            "",
            "| Group | Instances | With truth | Correct | SA (%) |",
            "|---|---|---|---|---|",
        ]
        for label, groups in (("dataset", self.by("dataset")), ("difficulty", self.by("difficulty"))):
            for k, g in groups.items():
                lines.append(f"| {label}: {k} | {g.instances} | {g.with_truth} | {g.correct} | {pct(g.sa)} |")
        lines += [
            "",
            "| Instance | Outcome | Status | Predicted | Truth | Correct | Calls | Tokens | Time (s) |",
            "|---|---|---|---|---|---|---|---|---|",
        ]
        for r, ok in zip(self.results, self.correct):
            pred = "n/a" if r.predicted is None else format(r.predicted, ".10g")
            truth = "n/a" if r.truth is None else format(r.truth, ".10g")
            mark = "n/a" if r.truth is None else ("yes" if ok else "no")
            lines.append(
                f"| {r.id} | {r.outcome} | {r.status or 'n/a'} | {pred} | {truth} | {mark} | {r.agent_calls} "
                f"| {r.tokens} | {r.wall_time:.2f} |"
            )
        if self.without_truth:
            lines += ["", "Instances without ground truth (excluded from SA): " + ", ".join(self.without_truth)]
        return "\n".join(lines) + "\n"


def score_solving_accuracy(results: Iterable[InstanceResult], tol_rel: float = TOL_REL,
                           tol_abs: float = TOL_ABS) -> BenchReport:
    results = list(results)
    return BenchReport(results, [is_correct(r, tol_rel, tol_abs) for r in results], tol_rel, tol_abs)


def write_bench_report(report: BenchReport, out_dir) -> dict[str, Path]:
    """Write ``bench_report.md``, ``bench_report.json`` and ``bench_timing.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"markdown": out / "bench_report.md", "json": out / "bench_report.json", "timing": out / "bench_timing.json"}
    paths["markdown"].write_text(report.to_markdown(), encoding="utf-8")
    paths["json"].write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["timing"].write_text(json.dumps(report.timing_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
