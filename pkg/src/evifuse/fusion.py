"""Confidence-aware fusion of two Student's t distributions.

Two unimodal predictive distributions are merged into one approximate
Student's t.  The fused dof is the smaller of the two (keeping the heavier
tail), the fused location is a dof-weighted convex combination, and the
fused squared scale averages the lower-dof scale with the other scale
rescaled onto the lower-dof tail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import NIGParams, StudentT, nig_to_student_t, st_variance
from .losses import confidence

__all__ = [
    "FusionWeights",
    "FusedPrediction",
    "confidence_weights",
    "fuse_student_t",
    "fuse_per_class",
]


@dataclass(frozen=True)
class FusionWeights:
    """Per-modality mixing weights; c1 + c2 = 1 and c1/c2 = v1/v2."""

    c1: float
    c2: float


@dataclass(frozen=True)
class FusedPrediction:
    """Classification read-out of the fused per-class distributions.

    ``uncertainty`` is the fused predictive variance of the argmax class;
    ``confidence`` the max softmax probability over the fused locations.
    """

    class_means: tuple[float, ...]
    predicted_class: int
    uncertainty: float
    confidence: float


def confidence_weights(v1: float, v2: float) -> FusionWeights:
    """Mixing weights proportional to each modality's degrees of freedom."""
    if v1 <= 2.0 or v2 <= 2.0:
        raise ValueError(f"degrees of freedom must be > 2, got ({v1}, {v2})")
    s = v1 + v2
    return FusionWeights(c1=v1 / s, c2=v2 / s)


def fuse_student_t(st1: StudentT, st2: StudentT) -> StudentT:
    """Fuse two Student's t distributions into one.

    The location mixes with dof-proportional weights in the original
    argument order.  The dof and scale use the dof-sorted pair (ties treat
    the first argument as the lower-dof side), so the result is invariant
    under argument swap.
    """
    w = confidence_weights(st1.v, st2.v)
    u_f = w.c1 * st1.u + w.c2 * st2.u
    lo, hi = (st1, st2) if st1.v <= st2.v else (st2, st1)
    ratio = hi.v * (lo.v - 2.0) / (lo.v * (hi.v - 2.0))
    sigma_f = 0.5 * (lo.sigma + ratio * hi.sigma)
    return StudentT(u=u_f, sigma=sigma_f, v=lo.v)


def fuse_per_class(
    m1: Sequence[NIGParams], m2: Sequence[NIGParams]
) -> tuple[list[StudentT], FusedPrediction]:
    """Fuse two modalities' per-class heads and read out a prediction.

    Class k of the result fuses the two modalities' class-k marginals.  The
    predicted class is the argmax of the fused locations, its uncertainty
    the fused variance of that class.
    """
    if len(m1) != len(m2):
        raise ValueError(f"modalities must have equal class counts, got {len(m1)} and {len(m2)}")
    if len(m1) < 2:
        raise ValueError("need at least 2 classes")
    fused = [
        fuse_student_t(nig_to_student_t(a), nig_to_student_t(b))
        for a, b in zip(m1, m2)
    ]
    means = np.array([st.u for st in fused])
    predicted = int(np.argmax(means))
    prediction = FusedPrediction(
        class_means=tuple(float(u) for u in means),
        predicted_class=predicted,
        uncertainty=st_variance(fused[predicted]),
        confidence=confidence(means),
    )
    return fused, prediction
