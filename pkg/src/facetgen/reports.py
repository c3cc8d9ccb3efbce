"""Markdown/JSON report rendering and the multi-method significance comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metrics import DIVERSITY_KEYS, EMBED_KEYS, MATCH_KEYS, MetricReport
from .stats import paired_ttest

MATCHING_LAYOUT = [
    ("Term Overlap", ["term_overlap_p", "term_overlap_r", "term_overlap_f1"], ["P", "R", "F1"]),
    ("Exact Match", ["exact_match_p", "exact_match_r", "exact_match_f1"], ["P", "R", "F1"]),
    ("Set BLEU", ["set_bleu_1", "set_bleu_2", "set_bleu_3", "set_bleu_4"], ["1-gram", "2-gram", "3-gram", "4-gram"]),
    ("Set Embedding Score", list(EMBED_KEYS), ["P", "R", "F1"]),
]
DIVERSITY_LAYOUT = [
    ("Term Diversity", ["term_diversity"], ["Ratio"]),
    ("Embedding Diversity", list(DIVERSITY_KEYS[1:]), ["P", "R", "F1"]),
]


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def _table(layout, methods: Sequence[str], cell) -> list[str]:
    groups = [(title, keys, labels) for title, keys, labels in layout]
    head = ["Model"] + [f"{title} {label}" for title, _, labels in groups for label in labels]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for i, name in enumerate(methods):
        cells = [name] + [cell(i, k) for _, keys, _ in groups for k in keys]
        lines.append("| " + " | ".join(cells) + " |")
    return lines


def _present(layout, macro: dict):
    return [(t, [k for k in keys if k in macro], [lab for k, lab in zip(keys, labels) if k in macro])
            for t, keys, labels in layout if any(k in macro for k in keys)]


def report_markdown(report: MetricReport) -> str:
    macro = report.macro
    lines = [f"# Metrics: {report.method}", "", f"Queries: {macro['queries']}", "", "## Matching", ""]
    lines += _table(_present(MATCHING_LAYOUT, macro), [report.method], lambda i, k: _fmt(macro[k]))
    div = _present(DIVERSITY_LAYOUT, macro)
    if div:
        lines += ["", "## Diversity (facet bodies)", ""]
        lines += _table(div, [report.method], lambda i, k: _fmt(macro[k]))
    lines += ["", f"Facet-count ratio: {_fmt(macro.get('count_ratio'))}", ""]
    lines += histogram_markdown([report])
    return "\n".join(lines) + "\n"


def histogram_markdown(reports: Sequence[MetricReport]) -> list[str]:
    counts = sorted({k for r in reports for k in r.facet_count_histogram})
    lines = ["## Generated facet counts", "", "| Model | " + " | ".join(str(c) for c in counts) + " |",
             "|" + "---|" * (len(counts) + 1)]
    for r in reports:
        lines.append(f"| {r.method} | " + " | ".join(str(r.facet_count_histogram.get(c, 0)) for c in counts) + " |")
    return lines


@dataclass
class Comparison:
    methods: list[str]
    macro: dict[str, list]
    # metric -> list of {a, b, statistic, pvalue, significant, factor}
    tests: dict[str, list[dict]] = field(default_factory=dict)
    markers: dict[str, list[str]] = field(default_factory=dict)
    best: dict[str, int] = field(default_factory=dict)
    worst: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "methods": self.methods,
            "macro": self.macro,
            "best": {k: self.methods[v] for k, v in self.best.items()},
            "worst": {k: self.methods[v] for k, v in self.worst.items()},
            "markers": self.markers,
            "tests": self.tests,
        }


def _paired(a, b):
    keep = [i for i, (x, y) in enumerate(zip(a, b)) if x is not None and y is not None]
    return [a[i] for i in keep], [b[i] for i in keep]


def compare(reports: Sequence[MetricReport], baseline: str | None = None, alpha: float = 0.01) -> Comparison:
    """Test each method against the best and worst per metric.

    ``+`` marks a significant improvement over the worst method and ``-`` a
    significant drop from the best (two-tailed paired t-test).  The
    Bonferroni factor is the number of distinct method pairs tested for that
    metric; a ``baseline`` adds its pairs to the pool.
    """
    if not reports:
        raise ValueError("no reports to compare")
    queries = [r["query"] for r in reports[0].rows]
    for r in reports[1:]:
        if [row["query"] for row in r.rows] != queries:
            raise ValueError(f"report {r.method!r} covers a different query set")
    methods = [r.method for r in reports]
    base_idx = None
    if baseline is not None:
        if baseline not in methods:
            raise ValueError(f"baseline {baseline!r} is not among {methods}")
        base_idx = methods.index(baseline)
    metrics = [k for k in reports[0].macro if k != "queries" and all(k in r.macro for r in reports)]
    comp = Comparison(methods, {k: [r.macro[k] for r in reports] for k in metrics})
    for key in metrics:
        vals = [v if v is not None else -np.inf for v in comp.macro[key]]
        best, worst = int(np.argmax(vals)), int(np.argmin(vals))
        comp.best[key], comp.worst[key] = best, worst
        pairs = {tuple(sorted((i, best))) for i in range(len(reports)) if i != best}
        pairs |= {tuple(sorted((i, worst))) for i in range(len(reports)) if i != worst}
        if base_idx is not None:
            pairs |= {tuple(sorted((i, base_idx))) for i in range(len(reports)) if i != base_idx}
        factor = max(len(pairs), 1)
        results = {}
        for i, j in sorted(pairs):
            a, b = _paired(reports[i].column(key), reports[j].column(key))
            if len(a) < 2:
                continue
            res = paired_ttest(a, b, num_comparisons=factor, alpha=alpha)
            results[(i, j)] = res
            comp.tests.setdefault(key, []).append({
                "a": methods[i], "b": methods[j], "statistic": res.statistic, "pvalue": res.pvalue,
                "significant": res.significant, "degenerate": res.degenerate, "factor": factor,
            })
        marks = []
        for i in range(len(reports)):
            m = ""
            res = results.get(tuple(sorted((i, worst))))
            if i != worst and res is not None and res.significant and vals[i] > vals[worst]:
                m += "+"
            res = results.get(tuple(sorted((i, best))))
            if i != best and res is not None and res.significant and vals[i] < vals[best]:
                m += "-"
            marks.append(m)
        comp.markers[key] = marks
    return comp


def comparison_markdown(comp: Comparison, reports: Sequence[MetricReport] = ()) -> str:
    def cell(i, key):
        v = comp.macro[key][i]
        text = _fmt(v)
        present = [x for x in comp.macro[key] if x is not None]
        if v is not None and len(present) > 1 and max(present) > min(present):
            if v == max(present):
                text = f"**{text}**"
            elif v == min(present):
                text = f"<u>{text}</u>"
        marks = comp.markers[key][i]
        return f"{text}<sup>{marks}</sup>" if marks else text

    lines = [
        "# Method comparison",
        "",
        "Bold: best (ties all bold); underlined: worst.  `+`: significantly above the worst, "
        "`-`: significantly below the best (two-tailed paired t-test, Bonferroni-corrected, 99% confidence).",
        "",
        "## Matching",
        "",
    ]
    lines += _table(_present(MATCHING_LAYOUT, comp.macro), comp.methods, cell)
    div = _present(DIVERSITY_LAYOUT, comp.macro)
    if div:
        lines += ["", "## Diversity (facet bodies)", ""]
        lines += _table(div, comp.methods, cell)
    if "count_ratio" in comp.macro:
        lines += ["", "## Facet-count ratio", "", "| Model | Ratio |", "|---|---|"]
        lines += [f"| {m} | {cell(i, 'count_ratio')} |" for i, m in enumerate(comp.methods)]
    if reports:
        lines += [""] + histogram_markdown(reports)
    return "\n".join(lines) + "\n"


__all__ = ["MATCH_KEYS", "Comparison", "compare", "comparison_markdown", "report_markdown", "histogram_markdown"]
