"""Training objective terms.

Four pieces make up the total objective for one sample:

* a per-modality NIG negative log-likelihood over per-class heads, plus an
  evidence-weighted cross-entropy term,
* a fused Student's t negative log-likelihood over the fused per-class
  distributions, plus a plain cross-entropy term,
* a confidence-ranking hinge that, on correctly fused samples, penalizes any
  unimodal confidence exceeding the fused confidence,
* the weighted sum of the above.

Class "logits" are the per-class location parameters: gamma values for a
single modality, fused locations for the fused head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .core import NIGParams, StudentT

__all__ = [
    "LossBreakdown",
    "nig_nll",
    "evidence",
    "cross_entropy",
    "confidence",
    "softmax",
    "modality_loss",
    "fused_st_nll",
    "fused_loss",
    "ranking_loss",
    "total_loss",
]

DEFAULT_LAMBDA_M = 0.01
DEFAULT_LAMBDA_F = 0.5
DEFAULT_LAMBDA_C = 10.0


@dataclass(frozen=True)
class LossBreakdown:
    """Per-term decomposition of the total objective for one sample.

    ``total`` always equals ``sum(per_modality_nig) + fused_st +
    lambda_c * ranking``.
    """

    per_modality_nig: tuple[float, ...]
    fused_st: float
    ranking: float
    total: float
    lambda_m: float
    lambda_f: float
    lambda_c: float


def nig_nll(p: NIGParams, y: float) -> float:
    """Negative log-likelihood of ``y`` under the NIG predictive marginal.

    Computed in the NIG parameterization; analytically identical to
    ``-st_log_density(nig_to_student_t(p), y)``.
    """
    two_b_od = 2.0 * p.beta * (1.0 + p.delta)
    t = p.delta * (y - p.gamma) ** 2 + two_b_od
    return float(
        gammaln(p.alpha)
        - gammaln(p.alpha + 0.5)
        + 0.5 * math.log(math.pi / p.delta)
        - p.alpha * math.log(two_b_od)
        + (p.alpha + 0.5) * math.log(t)
    )


def evidence(p: NIGParams) -> float:
    """Overall model evidence alpha + delta + 1/beta."""
    return p.alpha + p.delta + 1.0 / p.beta


def softmax(class_means: Sequence[float]) -> np.ndarray:
    z = np.asarray(class_means, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def cross_entropy(class_means: Sequence[float], label: int) -> float:
    """-log softmax(class_means)[label]; invariant under constant shifts."""
    z = np.asarray(class_means, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("class_means must be a vector of length >= 2")
    if not 0 <= label < z.size:
        raise IndexError(f"label {label} out of range for {z.size} classes")
    shifted = z - z.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def confidence(class_means: Sequence[float]) -> float:
    """Max softmax probability over the class means; in [1/K, 1)."""
    z = np.asarray(class_means, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("class_means must be a vector of length >= 2")
    return float(softmax(z).max())


def modality_loss(
    heads: Sequence[NIGParams], label: int, lambda_m: float = DEFAULT_LAMBDA_M
) -> float:
    """Per-modality objective: summed per-class NIG NLL against the one-hot
    target, plus the evidence-weighted cross-entropy term.

    The cross-entropy weight is the mean per-class evidence, so the loss
    scale does not grow with the class count.
    """
    if lambda_m < 0:
        raise ValueError("lambda_m must be >= 0")
    k = len(heads)
    gammas = [h.gamma for h in heads]
    nll = sum(nig_nll(h, 1.0 if i == label else 0.0) for i, h in enumerate(heads))
    mean_evidence = sum(evidence(h) for h in heads) / k
    return float(nll + lambda_m * cross_entropy(gammas, label) * mean_evidence)


def fused_st_nll(st: StudentT, y: float) -> float:
    """Negative log-likelihood of ``y`` under a fused Student's t.

    Written directly in (u, sigma, v); identical to ``-st_log_density``.
    """
    q = 1.0 + (y - st.u) ** 2 / (st.v * st.sigma)
    return float(
        0.5 * math.log(st.sigma)
        + gammaln(0.5 * st.v)
        - gammaln(0.5 * (st.v + 1.0))
        + 0.5 * math.log(st.v * math.pi)
        + 0.5 * (st.v + 1.0) * math.log(q)
    )


def fused_loss(
    per_class: Sequence[StudentT], label: int, lambda_f: float = DEFAULT_LAMBDA_F
) -> float:
    """Fused objective: summed per-class St NLL against the one-hot target
    plus a cross-entropy term over the fused locations."""
    if lambda_f < 0:
        raise ValueError("lambda_f must be >= 0")
    locations = [st.u for st in per_class]
    nll = sum(fused_st_nll(st, 1.0 if i == label else 0.0) for i, st in enumerate(per_class))
    return float(nll + lambda_f * cross_entropy(locations, label))


def ranking_loss(
    conf_modalities: Sequence[float], conf_fused: float, fused_correct: bool
) -> float:
    """Confidence-ranking hinge, applied only when the fused prediction is
    correct: sum over modalities of max(0, conf_m - conf_fused).

    Always >= 0; zero exactly when gated off or when the fused confidence
    dominates every unimodal confidence.
    """
    confs = list(conf_modalities) + [conf_fused]
    for c in confs:
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidences must lie in [0, 1], got {c}")
    if not fused_correct:
        return 0.0
    return float(sum(max(0.0, c - conf_fused) for c in conf_modalities))


def total_loss(
    heads_m1: Sequence[NIGParams],
    heads_m2: Sequence[NIGParams],
    fused: Sequence[StudentT],
    label: int,
    lambda_m: float = DEFAULT_LAMBDA_M,
    lambda_f: float = DEFAULT_LAMBDA_F,
    lambda_c: float = DEFAULT_LAMBDA_C,
) -> LossBreakdown:
    """Assemble the full objective for one sample.

    total = sum_m modality_loss_m + fused_loss + lambda_c * ranking_loss.
    """
    if not (len(heads_m1) == len(heads_m2) == len(fused)):
        raise ValueError("modality heads and fused distributions must share one class count")
    per_modality = (
        modality_loss(heads_m1, label, lambda_m),
        modality_loss(heads_m2, label, lambda_m),
    )
    fused_term = fused_loss(fused, label, lambda_f)

    fused_means = np.array([st.u for st in fused])
    correct = int(np.argmax(fused_means)) == label
    rank = ranking_loss(
        (
            confidence([h.gamma for h in heads_m1]),
            confidence([h.gamma for h in heads_m2]),
        ),
        confidence(fused_means),
        correct,
    )
    total = per_modality[0] + per_modality[1] + fused_term + lambda_c * rank
    return LossBreakdown(
        per_modality_nig=per_modality,
        fused_st=fused_term,
        ranking=rank,
        total=float(total),
        lambda_m=lambda_m,
        lambda_f=lambda_f,
        lambda_c=lambda_c,
    )
