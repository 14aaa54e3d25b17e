"""Per-dataset efficiency means: wall time, agent calls, tokens, and tokens by stage."""

from __future__ import annotations

from collections import OrderedDict
from statistics import fmean
from typing import Mapping, Sequence

from ..events import LLM_STAGES


def efficiency_table(records: Sequence, dataset_of: Mapping[str, str] | None = None) -> str:
    """Plain-text table; ``dataset_of`` maps instance id to dataset name (default ``all``)."""
    dataset_of = dataset_of or {}
    groups: OrderedDict[str, list] = OrderedDict()
    for r in records:
        groups.setdefault(dataset_of.get(r.instance_id, "all"), []).append(r)
    header = f"{'Dataset':<20} {'Runs':>5} {'Time (s)':>9} {'Agent Calls':>12} {'Tokens':>10}"
    lines = [header, "-" * len(header)]
    for name, rs in groups.items():
        lines.append(
            f"{name:<20} {len(rs):>5} {fmean(r.totals.wall_time for r in rs):>9.2f} "
            f"{fmean(r.totals.agent_calls for r in rs):>12.1f} {fmean(r.totals.tokens for r in rs):>10.1f}"
        )
    if not records:
        return "\n".join(lines) + "\n"
    lines += ["", "Mean tokens per stage", f"{'Dataset':<20} " + " ".join(f"{s:>11}" for s in LLM_STAGES)]
    for name, rs in groups.items():
        means = []
        for stage in LLM_STAGES:
            means.append(fmean(sum(e.tokens for e in r.events if e.stage == stage) for r in rs))
        lines.append(f"{name:<20} " + " ".join(f"{m:>11.1f}" for m in means))
    return "\n".join(lines) + "\n"
