"""Confusion-matrix accumulation, F1 metrics, and report rendering.

Rows are actual classes, columns predicted. The headline comparison metric
is micro-averaged F1, which for single-label multiclass problems equals
accuracy (trace over total); macro-F1 and per-class precision/recall/F1 are
always reported alongside it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .pipeline.segmentation import CLASS_NAMES

N_CLASSES = len(CLASS_NAMES)


class LabelOutOfRange(ValueError):
    """Class label outside 0..4."""


class EmptyMatrix(ValueError):
    """Metric requested on a matrix with no counts."""


class ConfusionMatrix:
    def __init__(self, counts: np.ndarray | None = None):
        if counts is None:
            self.counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
        else:
            counts = np.asarray(counts, dtype=np.int64)
            if counts.shape != (N_CLASSES, N_CLASSES) or (counts < 0).any():
                raise ValueError(f"expected non-negative ({N_CLASSES}, {N_CLASSES}) counts")
            self.counts = counts.copy()

    def add(self, actual: int, predicted: int, n: int = 1) -> "ConfusionMatrix":
        if not (0 <= actual < N_CLASSES and 0 <= predicted < N_CLASSES):
            raise LabelOutOfRange(f"actual {actual}, predicted {predicted}")
        self.counts[actual, predicted] += n
        return self

    def add_batch(self, actual: np.ndarray, predicted: np.ndarray) -> "ConfusionMatrix":
        for a, p in zip(np.asarray(actual).ravel(), np.asarray(predicted).ravel()):
            self.add(int(a), int(p))
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def trace(self) -> int:
        return int(np.trace(self.counts))

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def micro_f1(cm: ConfusionMatrix) -> float:
    """Micro-averaged F1 = trace / total (equals accuracy for single-label tasks)."""
    if cm.total == 0:
        raise EmptyMatrix("no counts accumulated")
    return cm.trace / cm.total


def per_class_prf(cm: ConfusionMatrix) -> tuple[list[dict], float]:
    """Per-class precision/recall/F1 and macro-F1.

    Empty denominators yield 0 with a flag on the affected class.
    """
    if cm.total == 0:
        raise EmptyMatrix("no counts accumulated")
    out = []
    for c in range(N_CLASSES):
        tp = int(cm.counts[c, c])
        col = int(cm.counts[:, c].sum())
        row = int(cm.counts[c, :].sum())
        flags = []
        if col == 0:
            flags.append("never_predicted")
        if row == 0:
            flags.append("no_actuals")
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out.append(
            {
                "class": CLASS_NAMES[c],
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "flags": flags,
            }
        )
    macro = sum(e["f1"] for e in out) / N_CLASSES
    return out, macro


def row_normalize(cm: ConfusionMatrix) -> np.ndarray:
    """Counts divided by their row sums; zero rows pass through as zeros."""
    counts = cm.counts.astype(np.float64)
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        normalized = np.where(sums > 0, counts / np.maximum(sums, 1e-300), 0.0)
    return normalized


@dataclass
class EvalReport:
    matrix: ConfusionMatrix
    per_class: list[dict]
    micro_f1: float
    macro_f1: float
    accuracy: float
    row_normalized: np.ndarray
    dataset_id: str = ""
    checkpoint_id: str = ""


def build_report(cm: ConfusionMatrix, dataset_id: str = "", checkpoint_id: str = "") -> EvalReport:
    per_class, macro = per_class_prf(cm)
    micro = micro_f1(cm)
    return EvalReport(
        matrix=cm,
        per_class=per_class,
        micro_f1=micro,
        macro_f1=macro,
        accuracy=micro,  # identical by construction; asserted in tests
        row_normalized=row_normalize(cm),
        dataset_id=dataset_id,
        checkpoint_id=checkpoint_id,
    )


def render_report(report: EvalReport, format: str) -> bytes:
    if format == "json":
        return _render_json(report)
    if format == "text":
        return _render_text(report)
    if format == "svg":
        return _render_svg(report)
    raise ValueError(f"unknown report format {format!r}")


def _render_json(report: EvalReport) -> bytes:
    doc = {
        "dataset": report.dataset_id,
        "checkpoint": report.checkpoint_id,
        "classes": list(CLASS_NAMES),
        "counts": report.matrix.counts.tolist(),
        "row_normalized": report.row_normalized.tolist(),
        "per_class": report.per_class,
        "micro_f1": report.micro_f1,
        "macro_f1": report.macro_f1,
        "accuracy": report.accuracy,
        "total": report.matrix.total,
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def _render_text(report: EvalReport) -> bytes:
    width = max(len(n) for n in CLASS_NAMES) + 2
    lines = []
    if report.dataset_id or report.checkpoint_id:
        lines.append(f"dataset: {report.dataset_id}  checkpoint: {report.checkpoint_id}")
    lines.append(f"sequences: {report.matrix.total}")
    lines.append("")
    header = " " * width + "".join(f"{n:>{width}}" for n in CLASS_NAMES)
    lines.append(header + "   (columns: predicted)")
    for c, name in enumerate(CLASS_NAMES):
        cells = "".join(f"{int(v):>{width}}" for v in report.matrix.counts[c])
        lines.append(f"{name:<{width}}{cells}")
    lines.append("")
    lines.append(f"{'class':<{width}}{'precision':>12}{'recall':>12}{'f1':>12}")
    for e in report.per_class:
        lines.append(
            f"{e['class']:<{width}}{e['precision']:>12.4f}{e['recall']:>12.4f}{e['f1']:>12.4f}"
        )
    lines.append("")
    lines.append(f"micro-F1 (= accuracy): {report.micro_f1:.4f}")
    lines.append(f"macro-F1:              {report.macro_f1:.4f}")
    return ("\n".join(lines) + "\n").encode()


def _render_svg(report: EvalReport) -> bytes:
    """Self-contained SVG: per-class F1 bars plus a row-normalized heatmap."""
    cell = 58
    bar_w = 46
    bar_h = 120
    pad = 70
    heat_x = pad
    heat_y = 60
    bars_y = heat_y + N_CLASSES * cell + 80
    width = pad * 2 + max(N_CLASSES * cell, N_CLASSES * (bar_w + 18))
    height = bars_y + bar_h + 70
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="11">',
        f'<text x="{pad}" y="24">confusion matrix (row-normalized) and per-class F1</text>',
    ]
    norm = report.row_normalized
    for r in range(N_CLASSES):
        for c in range(N_CLASSES):
            v = norm[r, c]
            # white -> blue ramp
            shade = int(255 - 155 * v)
            color = f"rgb({shade},{shade},255)"
            x = heat_x + c * cell
            y = heat_y + r * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell - 2}" height="{cell - 2}" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{x + 4}" y="{y + cell // 2}" fill="black">{100 * v:.1f}%</text>'
            )
        name = escape(CLASS_NAMES[r])
        parts.append(
            f'<text x="{heat_x - 6}" y="{heat_y + r * cell + cell // 2}" text-anchor="end">{name}</text>'
        )
        parts.append(
            f'<text x="{heat_x + r * cell + 4}" y="{heat_y + N_CLASSES * cell + 14}" '
            f'transform="rotate(30 {heat_x + r * cell + 4} {heat_y + N_CLASSES * cell + 14})">{name}</text>'
        )
    for i, e in enumerate(report.per_class):
        h = e["f1"] * bar_h
        x = pad + i * (bar_w + 18)
        y = bars_y + bar_h - h
        parts.append(f'<rect x="{x}" y="{y:.1f}" width="{bar_w}" height="{h:.1f}" fill="steelblue"/>')
        parts.append(f'<text x="{x}" y="{bars_y + bar_h + 14}">{escape(e["class"][:7])}</text>')
        parts.append(f'<text x="{x}" y="{y - 4:.1f}">{e["f1"]:.3f}</text>')
    parts.append(
        f'<text x="{pad}" y="{bars_y - 10}">per-class F1 (micro-F1 {report.micro_f1:.4f})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts).encode()
