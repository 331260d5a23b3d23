"""Evaluation metrics: accuracy, Cohen's kappa, ECE, AURC, density tables.

Conventions adopted here and used everywhere in the repo:

* ECE: equal-width confidence bins on [0, 1] (15 by default), weighted mean
  absolute gap between bin accuracy and bin mean confidence.
* AURC: records sorted by confidence descending (ties keep input order);
  risk at coverage k/N is the error rate of the top-k records; AURC is the
  mean risk over k = 1..N.
* Kappa: Cohen's unweighted kappa; defined as 0 when chance agreement is 1.
* Density tables: normalized counts over fixed bin edges; values outside
  the edges are clipped into the end bins.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "EvalRecord",
    "EvalReport",
    "Histogram",
    "accuracy",
    "cohen_kappa",
    "ece",
    "aurc",
    "density_summary",
    "build_report",
    "CONFIDENCE_BIN_EDGES",
    "UNCERTAINTY_BIN_EDGES",
    "REPORT_COLUMNS",
    "write_report_csv",
    "write_report_json",
]

# fixed bin edges for the density tables emitted with every report
CONFIDENCE_BIN_EDGES = tuple(float(x) for x in np.linspace(0.0, 1.0, 21))
UNCERTAINTY_BIN_EDGES = tuple(float(x) for x in np.linspace(0.0, 5.0, 26))

REPORT_COLUMNS = ("condition", "sigma", "acc", "kappa", "ece", "aurc")


@dataclass(frozen=True)
class EvalRecord:
    """Per-sample atom of every metric."""

    label: int
    predicted: int
    confidence: float
    aleatoric: float
    epistemic: float
    fused_uncertainty: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")
        for name in ("aleatoric", "epistemic", "fused_uncertainty"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    mass: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    acc: float
    kappa: float
    ece: float
    aurc: float
    confidence_density: Histogram
    uncertainty_density: Histogram


def _require_nonempty(records: Sequence[EvalRecord]) -> None:
    if len(records) == 0:
        raise ValueError("no records to evaluate")


def accuracy(records: Sequence[EvalRecord]) -> float:
    _require_nonempty(records)
    return float(sum(r.predicted == r.label for r in records) / len(records))


def cohen_kappa(records: Sequence[EvalRecord]) -> float:
    """Cohen's unweighted kappa between labels and predictions.

    Returns 0 in the degenerate case where chance agreement is 1 (every
    label and every prediction in a single shared class).
    """
    _require_nonempty(records)
    n = len(records)
    classes = sorted({r.label for r in records} | {r.predicted for r in records})
    idx = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for r in records:
        confusion[idx[r.label], idx[r.predicted]] += 1
    p_o = np.trace(confusion) / n
    p_e = float((confusion.sum(axis=1) / n) @ (confusion.sum(axis=0) / n))
    if p_e >= 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def ece(records: Sequence[EvalRecord], bins: int = 15) -> float:
    """Expected calibration error over equal-width confidence bins."""
    _require_nonempty(records)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    conf = np.array([r.confidence for r in records])
    correct = np.array([float(r.predicted == r.label) for r in records])
    which = np.minimum((conf * bins).astype(int), bins - 1)
    total = 0.0
    n = len(records)
    for b in range(bins):
        mask = which == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        gap = abs(correct[mask].mean() - conf[mask].mean())
        total += (n_b / n) * gap
    return float(total)


def aurc(records: Sequence[EvalRecord]) -> float:
    """Area under the risk-coverage curve.

    Mean over k = 1..N of the error rate among the k most confident
    records; confidence ties keep the input order.
    """
    _require_nonempty(records)
    conf = np.array([r.confidence for r in records])
    errors = np.array([float(r.predicted != r.label) for r in records])
    order = np.argsort(-conf, kind="stable")
    cum_err = np.cumsum(errors[order])
    ks = np.arange(1, len(records) + 1)
    return float(np.mean(cum_err / ks))


def density_summary(values: Sequence[float], bin_edges: Sequence[float]) -> Histogram:
    """Normalized histogram over fixed edges; out-of-range values are
    clipped into the end bins, empty bins report zero mass."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise ValueError("bin_edges must be strictly increasing with >= 2 entries")
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("no values to bin")
    lo, hi = edges[0], edges[-1]
    clipped = np.clip(vals, lo, hi)
    counts, _ = np.histogram(clipped, bins=edges)
    mass = counts / counts.sum()
    return Histogram(
        bin_edges=tuple(float(e) for e in edges),
        mass=tuple(float(m) for m in mass),
    )


def build_report(records: Sequence[EvalRecord], ece_bins: int = 15) -> EvalReport:
    _require_nonempty(records)
    return EvalReport(
        acc=accuracy(records),
        kappa=cohen_kappa(records),
        ece=ece(records, ece_bins),
        aurc=aurc(records),
        confidence_density=density_summary(
            [r.confidence for r in records], CONFIDENCE_BIN_EDGES
        ),
        uncertainty_density=density_summary(
            [r.fused_uncertainty for r in records], UNCERTAINTY_BIN_EDGES
        ),
    )


# --- report emission ---------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def write_report_csv(path: str | Path, rows: Sequence[dict]) -> None:
    """Write metric rows with the fixed column order
    (condition, sigma, acc, kappa, ece, aurc); floats via repr for
    byte-stable output."""
    lines = [",".join(REPORT_COLUMNS)]
    for row in rows:
        cells = [str(row["condition"])]
        cells += [_fmt(row[c]) for c in REPORT_COLUMNS[1:]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(path: str | Path, rows: Sequence[dict]) -> None:
    """JSON twin of the CSV report: same fields plus any histograms."""
    payload = []
    for row in rows:
        entry = {"condition": str(row["condition"])}
        for c in REPORT_COLUMNS[1:]:
            entry[c] = float(row[c])
        for key in ("confidence_density", "uncertainty_density"):
            if key in row:
                hist = row[key]
                entry[key] = asdict(hist) if isinstance(hist, Histogram) else hist
        payload.append(entry)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
