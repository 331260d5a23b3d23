"""Evidential distribution primitives.

A per-class evidential head predicts the parameters of a Normal-Inverse-Gamma
(NIG) prior over the mean and variance of a Gaussian observation model.  The
predictive marginal of that prior is a non-standardized Student's t
distribution with an analytic parameter map, which is what everything
downstream (fusion, losses) consumes.

Conventions: ``StudentT.sigma`` is the *squared* scale, so the predictive
variance is ``sigma * v / (v - 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

__all__ = [
    "InvalidParameterError",
    "NIGParams",
    "StudentT",
    "UncertaintyReport",
    "nig_to_student_t",
    "st_log_density",
    "st_variance",
    "aleatoric",
    "epistemic",
]


class InvalidParameterError(ValueError):
    """Distribution parameters violate their domain constraints.

    Raised at construction time; seeing this from a model forward pass means
    an upstream activation failed to enforce its floors.
    """


@dataclass(frozen=True)
class NIGParams:
    """Normal-Inverse-Gamma parameters for one scalar target.

    gamma: location, unbounded.
    delta: virtual observation count, > 0.
    alpha: inverse-gamma shape, > 1 (keeps every uncertainty finite and the
        derived Student's t dof above 2).
    beta: inverse-gamma scale, > 0.
    """

    gamma: float
    delta: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        vals = (self.gamma, self.delta, self.alpha, self.beta)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidParameterError(f"NIG parameters must be finite, got {vals}")
        if self.delta <= 0.0:
            raise InvalidParameterError(f"delta must be > 0, got {self.delta}")
        if self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must be > 1, got {self.alpha}")
        if self.beta <= 0.0:
            raise InvalidParameterError(f"beta must be > 0, got {self.beta}")


@dataclass(frozen=True)
class StudentT:
    """Non-standardized Student's t: location ``u``, squared scale ``sigma``,
    degrees of freedom ``v``.

    ``v > 2`` is required so the variance ``sigma * v / (v - 2)`` is finite
    and positive.
    """

    u: float
    sigma: float
    v: float

    def __post_init__(self) -> None:
        vals = (self.u, self.sigma, self.v)
        if not all(math.isfinite(x) for x in vals):
            raise InvalidParameterError(f"StudentT parameters must be finite, got {vals}")
        if self.sigma <= 0.0:
            raise InvalidParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.v <= 2.0:
            raise InvalidParameterError(f"v must be > 2, got {self.v}")


@dataclass(frozen=True)
class UncertaintyReport:
    """Uncertainty decomposition for one modality plus the fused variance."""

    aleatoric: float
    epistemic: float
    fused_uncertainty: float


def nig_to_student_t(p: NIGParams) -> StudentT:
    """Analytic predictive marginal of an NIG head.

    Marginalizing the Gaussian likelihood over the NIG prior gives a
    Student's t with location gamma, squared scale
    ``beta * (1 + delta) / (delta * alpha)`` and dof ``2 * alpha``.
    """
    sigma = p.beta * (1.0 + p.delta) / (p.delta * p.alpha)
    return StudentT(u=p.gamma, sigma=sigma, v=2.0 * p.alpha)


def st_log_density(st: StudentT, y: float) -> float:
    """Log density of the non-standardized Student's t at ``y``.

    Finite for every finite ``y``.
    """
    half = 0.5 * (st.v + 1.0)
    return float(
        gammaln(half)
        - gammaln(0.5 * st.v)
        - 0.5 * math.log(st.v * math.pi * st.sigma)
        - half * math.log1p((y - st.u) ** 2 / (st.v * st.sigma))
    )


def st_variance(st: StudentT) -> float:
    """Predictive variance ``sigma * v / (v - 2)``; strictly exceeds sigma."""
    return st.sigma * st.v / (st.v - 2.0)


def aleatoric(p: NIGParams) -> float:
    """Expected observation noise E[sigma^2] = beta / (alpha - 1)."""
    return p.beta / (p.alpha - 1.0)


def epistemic(p: NIGParams) -> float:
    """Uncertainty about the mean Var[mu] = beta / (delta * (alpha - 1)).

    Equals ``aleatoric(p) / delta``: more virtual observations shrink it.
    """
    return p.beta / (p.delta * (p.alpha - 1.0))
