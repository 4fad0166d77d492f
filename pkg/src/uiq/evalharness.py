"""Evaluation metrics (design choice, suggestion F1, retrieval MRR) and reports.

Reports land as JSON plus a text table, a CSV, and matplotlib bar charts
rendered next to the JSON file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .forge import PreferencePair
from .jitter import CRAP_PRINCIPLES
from .training import ShapeMismatch

__all__ = [
    "NoPairs",
    "NoSamples",
    "IOFailure",
    "ChoiceResult",
    "SuggestionScores",
    "EvalReport",
    "design_choice_accuracy",
    "suggestion_f1",
    "retrieval_mrr",
    "emit_report",
]


class NoPairs(Exception):
    pass


class NoSamples(Exception):
    pass


class IOFailure(Exception):
    pass


@dataclass
class ChoiceResult:
    overall: float
    groups: dict[str, float]
    count: int
    correct_flags: list[bool]


def design_choice_accuracy(
    pairs: Sequence[PreferencePair],
    chooser: Callable[[PreferencePair], str],
    group_of: Optional[Callable[[PreferencePair], str]] = None,
) -> ChoiceResult:
    """Fraction of strict-preference pairs where the chooser agrees."""
    strict = [p for p in pairs if p.preferred in ("A", "B")]
    if not strict:
        raise NoPairs("no strict-preference pairs to evaluate")
    flags = []
    per_group: dict[str, list[bool]] = {}
    for pair in strict:
        correct = chooser(pair) == pair.preferred
        flags.append(correct)
        if group_of is not None:
            per_group.setdefault(group_of(pair), []).append(correct)
    groups = {g: sum(v) / len(v) for g, v in per_group.items()}
    return ChoiceResult(sum(flags) / len(flags), groups, len(flags), flags)


@dataclass
class SuggestionScores:
    macro_f1: float
    choice_adjusted_macro_f1: float
    macro_recall: float
    choice_adjusted_macro_recall: float
    per_principle: dict[str, dict[str, float]]
    count: int


def _confusion(predicted: Sequence[set], gold: Sequence[set]) -> dict[str, dict[str, float]]:
    out = {}
    for principle in CRAP_PRINCIPLES:
        tp = sum(1 for p, g in zip(predicted, gold) if principle in p and principle in g)
        fp = sum(1 for p, g in zip(predicted, gold) if principle in p and principle not in g)
        fn = sum(1 for p, g in zip(predicted, gold) if principle not in p and principle in g)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[principle] = {"precision": precision, "recall": recall, "f1": f1}
    return out


def suggestion_f1(
    predicted: Sequence[set],
    gold: Sequence[set],
    choice_correct: Optional[Sequence[bool]] = None,
) -> SuggestionScores:
    """Macro-averaged multi-label F1 over the four principles.

    Pairs with empty gold sets are excluded. The choice-adjusted variant
    empties predictions wherever the model also chose the wrong screenshot
    (right reasoning behind a wrong answer does not count).
    """
    if len(predicted) != len(gold) or (choice_correct is not None and len(choice_correct) != len(gold)):
        raise ShapeMismatch(f"predicted ({len(predicted)}), gold ({len(gold)}) lengths differ")
    keep = [i for i, g in enumerate(gold) if g]
    pred = [set(predicted[i]) for i in keep]
    gld = [set(gold[i]) for i in keep]
    flags = [bool(choice_correct[i]) for i in keep] if choice_correct is not None else [True] * len(keep)

    plain = _confusion(pred, gld)
    adjusted_pred = [p if ok else set() for p, ok in zip(pred, flags)]
    adjusted = _confusion(adjusted_pred, gld)

    per_principle = {
        pr: {
            **plain[pr],
            "choice_adjusted_recall": adjusted[pr]["recall"],
            "choice_adjusted_f1": adjusted[pr]["f1"],
        }
        for pr in CRAP_PRINCIPLES
    }

    def macro(table, key):
        return sum(table[p][key] for p in CRAP_PRINCIPLES) / len(CRAP_PRINCIPLES)

    return SuggestionScores(
        macro_f1=macro(plain, "f1"),
        choice_adjusted_macro_f1=macro(adjusted, "f1"),
        macro_recall=macro(plain, "recall"),
        choice_adjusted_macro_recall=macro(adjusted, "recall"),
        per_principle=per_principle,
        count=len(keep),
    )


def retrieval_mrr(
    entries: Sequence[tuple[str, str]],
    image_embedding: Callable[[str], np.ndarray],
    text_embedding: Callable[[str], np.ndarray],
) -> float:
    """Mean reciprocal rank of the first screenshot sharing the query's text.

    `entries` are (sample_id, description); each description queries the
    full screenshot set, ranked by similarity descending with ties broken
    by sample id.
    """
    if len(entries) < 2:
        raise NoSamples("need at least two samples for retrieval")
    ids = [e[0] for e in entries]
    descriptions = [e[1] for e in entries]
    image_vecs = np.stack([np.asarray(image_embedding(i), dtype=np.float64) for i in ids])
    rr_total = 0.0
    for description in descriptions:
        q = np.asarray(text_embedding(description), dtype=np.float64)
        sims = image_vecs @ q
        order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
        for rank, idx in enumerate(order, start=1):
            if descriptions[idx] == description:
                rr_total += 1.0 / rank
                break
    return rr_total / len(descriptions)


# ---------------------------------------------------------------------------
# Reports


@dataclass
class EvalReport:
    design_choice: dict = field(default_factory=dict)  # overall, groups, count
    suggestion: dict = field(default_factory=dict)
    mrr: dict = field(default_factory=dict)  # model -> {dataset: value}
    counts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "design_choice": self.design_choice,
            "suggestion": self.suggestion,
            "mrr": self.mrr,
            "counts": self.counts,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvalReport":
        return cls(
            design_choice=data.get("design_choice", {}),
            suggestion=data.get("suggestion", {}),
            mrr=data.get("mrr", {}),
            counts=data.get("counts", {}),
            config=data.get("config", {}),
        )


def _mrr_table_text(mrr: dict) -> str:
    datasets = sorted({ds for row in mrr.values() for ds in row})
    header = ["Model"] + [f"MRR ({ds})" for ds in datasets]
    rows = [[model] + [f"{row.get(ds, float('nan')):.4f}" for ds in datasets] for model, row in mrr.items()]
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(r, widths)) for r in [header] + rows]
    sep = "-" * len(lines[0])
    return "\n".join([lines[0], sep] + lines[1:])


def _render_figures(report: EvalReport, stem: Path) -> list[Path]:
    written = []
    if report.design_choice:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        labels = ["overall"] + sorted(report.design_choice.get("groups", {}))
        values = [report.design_choice.get("overall", 0.0)] + [
            report.design_choice["groups"][g] for g in labels[1:]
        ]
        ax.bar(labels, values, color="#2a6fb8")
        ax.set_ylim(0, 1)
        ax.set_ylabel("design-choice accuracy")
        ax.axhline(0.5, color="gray", linestyle=":", linewidth=1)
        fig.tight_layout()
        path = stem.with_name(stem.name + "_choice.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    if report.suggestion.get("per_principle"):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        principles = list(report.suggestion["per_principle"])
        f1 = [report.suggestion["per_principle"][p]["f1"] for p in principles]
        adj = [report.suggestion["per_principle"][p]["choice_adjusted_f1"] for p in principles]
        x = np.arange(len(principles))
        ax.bar(x - 0.2, f1, width=0.4, label="macro F1", color="#1e8449")
        ax.bar(x + 0.2, adj, width=0.4, label="choice-adjusted", color="#c0392b")
        ax.set_xticks(x, principles)
        ax.set_ylim(0, 1)
        ax.legend()
        fig.tight_layout()
        path = stem.with_name(stem.name + "_suggestions.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    if report.mrr:
        fig, ax = plt.subplots(figsize=(6, 3.5))
        datasets = sorted({ds for row in report.mrr.values() for ds in row})
        x = np.arange(len(report.mrr))
        width = 0.8 / max(1, len(datasets))
        for j, ds in enumerate(datasets):
            vals = [row.get(ds, 0.0) for row in report.mrr.values()]
            ax.bar(x + j * width, vals, width=width, label=ds)
        ax.set_xticks(x + 0.4 - width / 2, list(report.mrr), rotation=15, ha="right")
        ax.set_ylabel("MRR")
        ax.legend()
        fig.tight_layout()
        path = stem.with_name(stem.name + "_mrr.png")
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def emit_report(report: EvalReport, path) -> list[Path]:
    """Write JSON, text table, CSV, and figures; returns the written paths."""
    path = Path(path)
    if not path.parent.exists():
        raise IOFailure(f"directory {path.parent} does not exist")
    written = [path]
    try:
        path.write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
        txt_path = path.with_suffix(".txt")
        sections = []
        if report.design_choice:
            sections.append(
                f"design-choice accuracy: {report.design_choice.get('overall', float('nan')):.4f}"
                f" over {report.design_choice.get('count', 0)} pairs"
            )
            for group, value in sorted(report.design_choice.get("groups", {}).items()):
                sections.append(f"  {group}: {value:.4f}")
        if report.suggestion:
            sections.append(
                f"suggestion macro-F1: {report.suggestion.get('macro_f1', float('nan')):.4f}"
                f" (choice-adjusted {report.suggestion.get('choice_adjusted_macro_f1', float('nan')):.4f})"
            )
        if report.mrr:
            sections.append(_mrr_table_text(report.mrr))
        txt_path.write_text("\n".join(sections) + "\n", encoding="utf-8")
        written.append(txt_path)

        csv_path = path.with_suffix(".csv")
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["section", "metric", "value"])
            if report.design_choice:
                writer.writerow(["design_choice", "overall", report.design_choice.get("overall")])
                for group, value in sorted(report.design_choice.get("groups", {}).items()):
                    writer.writerow(["design_choice", group, value])
            if report.suggestion:
                writer.writerow(["suggestion", "macro_f1", report.suggestion.get("macro_f1")])
                writer.writerow(["suggestion", "choice_adjusted_macro_f1", report.suggestion.get("choice_adjusted_macro_f1")])
            for model, row in report.mrr.items():
                for dataset, value in row.items():
                    writer.writerow(["mrr", f"{model}/{dataset}", value])
        written.append(csv_path)
        written.extend(_render_figures(report, path.with_suffix("")))
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return written
