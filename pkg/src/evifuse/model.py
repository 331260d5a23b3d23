"""Desk-scale trainable two-modality evidential classifier.

Each modality has its own small tanh MLP encoder ending in an affine head
that emits 4 raw values per class; a softplus activation maps those onto
the NIG parameter domain.  Class-k marginals of the two modalities are
fused into one Student's t per class, and the combined objective couples
per-modality NIG likelihoods, the fused likelihood, and the
confidence-ranking hinge.

Gradients are hand-written reverse mode over the whole objective (no
autograd), so every parameter is enumerable in one flat vector and
checkable against central finite differences.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import digamma, gammaln

from .core import NIGParams, StudentT, UncertaintyReport, aleatoric, epistemic
from .data import Dataset, Sample, Split
from .fusion import FusedPrediction, fuse_per_class
from .losses import (
    DEFAULT_LAMBDA_C,
    DEFAULT_LAMBDA_F,
    DEFAULT_LAMBDA_M,
)

__all__ = [
    "ACTIVATION_FLOOR",
    "TrainConfig",
    "ModelParams",
    "ForwardOutput",
    "EpochStats",
    "TrainingLog",
    "EvalBatch",
    "GradCheckReport",
    "init_params",
    "activate_head",
    "forward",
    "predict_batch",
    "objective",
    "backward",
    "train",
    "gradient_check",
    "save_checkpoint",
    "load_checkpoint",
]

ACTIVATION_FLOOR = 1e-6
DEFAULT_HIDDEN = (32, 32)

Batch = tuple[np.ndarray, np.ndarray, np.ndarray]  # (x1, x2, labels)
TermWeights = tuple[float, float, float]  # (nig, fused st, ranking) groups


@dataclass(frozen=True)
class TrainConfig:
    lambda_m: float = DEFAULT_LAMBDA_M
    lambda_f: float = DEFAULT_LAMBDA_F
    lambda_c: float = DEFAULT_LAMBDA_C
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.lambda_m, self.lambda_f, self.lambda_c, self.learning_rate) < 0:
            raise ValueError("rates must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class ModelParams:
    """Weights of the two encoder + head stacks.

    ``encoderN`` holds (W, b) per hidden layer; ``headN`` is the final
    affine map emitting 4K raw values.  ``to_flat``/``with_flat`` expose the
    whole model as one fixed-length vector for optimizers and gradient
    checks.
    """

    encoder1: list[tuple[np.ndarray, np.ndarray]]
    head1: tuple[np.ndarray, np.ndarray]
    encoder2: list[tuple[np.ndarray, np.ndarray]]
    head2: tuple[np.ndarray, np.ndarray]
    n_classes: int

    def _layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(self.encoder1) + [self.head1] + list(self.encoder2) + [self.head2]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self._layers())

    def to_flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in self._layers()])

    def with_flat(self, flat: np.ndarray) -> "ModelParams":
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        out = []
        pos = 0
        for w, b in self._layers():
            nw, nb = w.size, b.size
            out.append(
                (
                    flat[pos : pos + nw].reshape(w.shape).copy(),
                    flat[pos + nw : pos + nw + nb].reshape(b.shape).copy(),
                )
            )
            pos += nw + nb
        n1 = len(self.encoder1)
        n2 = len(self.encoder2)
        return ModelParams(
            encoder1=out[:n1],
            head1=out[n1],
            encoder2=out[n1 + 1 : n1 + 1 + n2],
            head2=out[n1 + 1 + n2],
            n_classes=self.n_classes,
        )

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    @property
    def dims(self) -> tuple[int, int]:
        return self.encoder1[0][0].shape[0], self.encoder2[0][0].shape[0]

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(w.shape[1] for w, _ in self.encoder1)


@dataclass(frozen=True)
class ForwardOutput:
    heads_m1: list[NIGParams]
    heads_m2: list[NIGParams]
    fused: list[StudentT]
    prediction: FusedPrediction
    uncertainties: tuple[UncertaintyReport, UncertaintyReport]


def init_params(
    d1: int,
    d2: int,
    n_classes: int,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    seed: int | np.random.Generator = 0,
) -> ModelParams:
    """Seeded 1/sqrt(fan_in) normal init, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def stack(d_in: int):
        layers = []
        prev = d_in
        for width in hidden:
            layers.append((rng.normal(0.0, 1.0 / np.sqrt(prev), (prev, width)), np.zeros(width)))
            prev = width
        head = (rng.normal(0.0, 1.0 / np.sqrt(prev), (prev, 4 * n_classes)), np.zeros(4 * n_classes))
        return layers, head

    enc1, head1 = stack(d1)
    enc2, head2 = stack(d2)
    return ModelParams(encoder1=enc1, head1=head1, encoder2=enc2, head2=head2, n_classes=n_classes)


# --- activations --------------------------------------------------------------


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate_raw(raw: np.ndarray, k: int):
    """Map raw head outputs (..., 4K) onto the NIG domain, per class.

    gamma passes through; softplus floors keep delta, beta > 0 and
    alpha > 1 for every finite input.
    """
    gamma = raw[..., :k]
    delta = _softplus(raw[..., k : 2 * k]) + ACTIVATION_FLOOR
    alpha = _softplus(raw[..., 2 * k : 3 * k]) + 1.0 + ACTIVATION_FLOOR
    beta = _softplus(raw[..., 3 * k :]) + ACTIVATION_FLOOR
    return gamma, delta, alpha, beta


def activate_head(raw: np.ndarray) -> list[NIGParams]:
    """Turn one head's 4K raw outputs into K NIGParams."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 1 or raw.size % 4 != 0 or raw.size < 8:
        raise ValueError("raw head output must be a flat array of 4K values, K >= 2")
    k = raw.size // 4
    gamma, delta, alpha, beta = _activate_raw(raw, k)
    return [
        NIGParams(gamma=float(gamma[i]), delta=float(delta[i]), alpha=float(alpha[i]), beta=float(beta[i]))
        for i in range(k)
    ]


# --- batched forward ----------------------------------------------------------


@dataclass
class _ModalityCache:
    inputs: list[np.ndarray]  # input to each tanh layer
    outputs: list[np.ndarray]  # tanh activations
    raw: np.ndarray  # (B, 4K)
    gamma: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


@dataclass
class _BatchCache:
    m: tuple[_ModalityCache, _ModalityCache]
    mask_lo: np.ndarray  # True where modality 1 is the lower-dof side
    c1: np.ndarray
    c2: np.ndarray
    ratio: np.ndarray
    u_f: np.ndarray
    sigma_f: np.ndarray
    v_f: np.ndarray


def _encode_modality(layers, head, x: np.ndarray, k: int) -> _ModalityCache:
    inputs, outputs = [], []
    h = x
    for w, b in layers:
        inputs.append(h)
        h = np.tanh(h @ w + b)
        outputs.append(h)
    raw = h @ head[0] + head[1]
    gamma, delta, alpha, beta = _activate_raw(raw, k)
    sigma = beta * (1.0 + delta) / (delta * alpha)
    return _ModalityCache(
        inputs=inputs,
        outputs=outputs,
        raw=raw,
        gamma=gamma,
        delta=delta,
        alpha=alpha,
        beta=beta,
        u=gamma,
        sigma=sigma,
        v=2.0 * alpha,
    )


def _forward_batch(params: ModelParams, x1: np.ndarray, x2: np.ndarray) -> _BatchCache:
    k = params.n_classes
    m1 = _encode_modality(params.encoder1, params.head1, x1, k)
    m2 = _encode_modality(params.encoder2, params.head2, x2, k)

    s = m1.v + m2.v
    c1 = m1.v / s
    c2 = m2.v / s
    u_f = c1 * m1.u + c2 * m2.u

    mask_lo = m1.v <= m2.v  # ties: first modality is the lower-dof side
    v_a = np.where(mask_lo, m1.v, m2.v)
    v_b = np.where(mask_lo, m2.v, m1.v)
    s_a = np.where(mask_lo, m1.sigma, m2.sigma)
    s_b = np.where(mask_lo, m2.sigma, m1.sigma)
    ratio = v_b * (v_a - 2.0) / (v_a * (v_b - 2.0))
    sigma_f = 0.5 * (s_a + ratio * s_b)
    return _BatchCache(
        m=(m1, m2), mask_lo=mask_lo, c1=c1, c2=c2, ratio=ratio,
        u_f=u_f, sigma_f=sigma_f, v_f=v_a,
    )


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _batch_terms(cache: _BatchCache, labels: np.ndarray, cfg: TrainConfig):
    """Per-sample loss terms; returns (nig_1, nig_2, fused_st, ranking) arrays."""
    b = labels.shape[0]
    k = cache.u_f.shape[1]
    y = np.zeros((b, k))
    y[np.arange(b), labels] = 1.0

    nig = []
    for mc in cache.m:
        two_b_od = 2.0 * mc.beta * (1.0 + mc.delta)
        t = mc.delta * (y - mc.gamma) ** 2 + two_b_od
        nll = (
            gammaln(mc.alpha)
            - gammaln(mc.alpha + 0.5)
            + 0.5 * (np.log(np.pi) - np.log(mc.delta))
            - mc.alpha * np.log(two_b_od)
            + (mc.alpha + 0.5) * np.log(t)
        ).sum(axis=1)
        p = _softmax_rows(mc.gamma)
        ce = -np.log(p[np.arange(b), labels])
        eta_bar = (mc.alpha + mc.delta + 1.0 / mc.beta).mean(axis=1)
        nig.append(nll + cfg.lambda_m * ce * eta_bar)

    z = (y - cache.u_f) ** 2
    st_nll = (
        0.5 * np.log(cache.sigma_f)
        + gammaln(0.5 * cache.v_f)
        - gammaln(0.5 * (cache.v_f + 1.0))
        + 0.5 * np.log(cache.v_f * np.pi)
        + 0.5 * (cache.v_f + 1.0) * np.log1p(z / (cache.v_f * cache.sigma_f))
    ).sum(axis=1)
    p_f = _softmax_rows(cache.u_f)
    ce_f = -np.log(p_f[np.arange(b), labels])
    fused_st = st_nll + cfg.lambda_f * ce_f

    conf_f = p_f.max(axis=1)
    gate = (np.argmax(cache.u_f, axis=1) == labels).astype(float)
    ranking = np.zeros(b)
    for mc in cache.m:
        conf_m = _softmax_rows(mc.gamma).max(axis=1)
        ranking += np.maximum(0.0, conf_m - conf_f)
    ranking *= gate
    return nig[0], nig[1], fused_st, ranking


def objective(
    params: ModelParams,
    batch: Batch,
    config: TrainConfig,
    term_weights: TermWeights = (1.0, 1.0, 1.0),
) -> float:
    """Batch-mean training objective; the quantity ``backward`` differentiates."""
    x1, x2, labels = batch
    cache = _forward_batch(params, x1, x2)
    nig1, nig2, fused_st, ranking = _batch_terms(cache, labels, config)
    w_nig, w_st, w_rank = term_weights
    return float(
        w_nig * (nig1.mean() + nig2.mean())
        + w_st * fused_st.mean()
        + w_rank * config.lambda_c * ranking.mean()
    )


# --- backward -----------------------------------------------------------------


def _grad_max_softmax(z: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """d(max softmax(z)) / dz times upstream, rowwise.

    The argmax index is treated as a constant.
    """
    p = _softmax_rows(z)
    j = np.argmax(p, axis=1)
    b = z.shape[0]
    pj = p[np.arange(b), j]
    e_j = np.zeros_like(p)
    e_j[np.arange(b), j] = 1.0
    return upstream[:, None] * pj[:, None] * (e_j - p)


def backward(
    params: ModelParams,
    batch: Batch,
    config: TrainConfig,
    term_weights: TermWeights = (1.0, 1.0, 1.0),
) -> np.ndarray:
    """Exact reverse-mode gradient of ``objective`` wrt the flat parameters."""
    x1, x2, labels = batch
    b = labels.shape[0]
    k = params.n_classes
    cache = _forward_batch(params, x1, x2)
    m1, m2 = cache.m
    w_nig, w_st, w_rank = term_weights

    y = np.zeros((b, k))
    y[np.arange(b), labels] = 1.0
    scale = 1.0 / b

    g_gamma = [np.zeros((b, k)), np.zeros((b, k))]
    g_delta = [np.zeros((b, k)), np.zeros((b, k))]
    g_alpha = [np.zeros((b, k)), np.zeros((b, k))]
    g_beta = [np.zeros((b, k)), np.zeros((b, k))]
    g_uf = np.zeros((b, k))
    g_sf = np.zeros((b, k))
    g_vf = np.zeros((b, k))

    # per-modality NIG NLL + evidence-weighted CE
    if w_nig != 0.0:
        coef = w_nig * scale
        for i, mc in enumerate((m1, m2)):
            two_b_od = 2.0 * mc.beta * (1.0 + mc.delta)
            resid = y - mc.gamma
            t = mc.delta * resid**2 + two_b_od
            g_gamma[i] += coef * (mc.alpha + 0.5) * (-2.0 * mc.delta * resid) / t
            g_delta[i] += coef * (
                -0.5 / mc.delta
                - mc.alpha / (1.0 + mc.delta)
                + (mc.alpha + 0.5) * (resid**2 + 2.0 * mc.beta) / t
            )
            g_alpha[i] += coef * (
                digamma(mc.alpha) - digamma(mc.alpha + 0.5) - np.log(two_b_od) + np.log(t)
            )
            g_beta[i] += coef * (-mc.alpha / mc.beta + (mc.alpha + 0.5) * 2.0 * (1.0 + mc.delta) / t)

            p = _softmax_rows(mc.gamma)
            ce = -np.log(p[np.arange(b), labels])
            eta_bar = (mc.alpha + mc.delta + 1.0 / mc.beta).mean(axis=1)
            lam = coef * config.lambda_m
            g_gamma[i] += lam * eta_bar[:, None] * (p - y)
            g_eta = lam * ce  # (B,)
            g_alpha[i] += g_eta[:, None] / k
            g_delta[i] += g_eta[:, None] / k
            g_beta[i] += -g_eta[:, None] / (k * mc.beta**2)

    # fused St NLL + CE on fused locations
    if w_st != 0.0:
        coef = w_st * scale
        resid_f = y - cache.u_f
        z = resid_f**2
        den = cache.v_f * cache.sigma_f + z
        g_uf += coef * (-(cache.v_f + 1.0) * resid_f / den)
        g_sf += coef * (0.5 / cache.sigma_f - (cache.v_f + 1.0) * z / (2.0 * cache.sigma_f * den))
        g_vf += coef * (
            0.5 * (digamma(0.5 * cache.v_f) - digamma(0.5 * (cache.v_f + 1.0)))
            + 0.5 / cache.v_f
            + 0.5 * np.log1p(z / (cache.v_f * cache.sigma_f))
            - (cache.v_f + 1.0) * z / (2.0 * cache.v_f * den)
        )
        p_f = _softmax_rows(cache.u_f)
        g_uf += coef * config.lambda_f * (p_f - y)

    # confidence-ranking hinge (argmax gate and indices held constant)
    if w_rank != 0.0 and config.lambda_c != 0.0:
        coef = w_rank * scale * config.lambda_c
        p_f = _softmax_rows(cache.u_f)
        conf_f = p_f.max(axis=1)
        gate = (np.argmax(cache.u_f, axis=1) == labels).astype(float)
        n_active = np.zeros(b)
        for i, mc in enumerate((m1, m2)):
            conf_m = _softmax_rows(mc.gamma).max(axis=1)
            active = gate * (conf_m > conf_f)
            n_active += active
            g_gamma[i] += _grad_max_softmax(mc.gamma, coef * active)
        g_uf += _grad_max_softmax(cache.u_f, -coef * n_active)

    # fusion backward
    s = m1.v + m2.v
    g_u = [cache.c1 * g_uf, cache.c2 * g_uf]
    g_v = [
        g_uf * m2.v * (m1.u - m2.u) / s**2,
        g_uf * m1.v * (m2.u - m1.u) / s**2,
    ]
    v_a = cache.v_f
    v_b = np.where(cache.mask_lo, m2.v, m1.v)
    s_b = np.where(cache.mask_lo, m2.sigma, m1.sigma)
    g_sa = 0.5 * g_sf
    g_sb = 0.5 * cache.ratio * g_sf
    d_ratio_va = 2.0 * v_b / ((v_b - 2.0) * v_a**2)
    d_ratio_vb = -2.0 * (v_a - 2.0) / (v_a * (v_b - 2.0) ** 2)
    g_va = 0.5 * g_sf * s_b * d_ratio_va + g_vf
    g_vb = 0.5 * g_sf * s_b * d_ratio_vb
    g_s = [
        np.where(cache.mask_lo, g_sa, g_sb),
        np.where(cache.mask_lo, g_sb, g_sa),
    ]
    g_v[0] += np.where(cache.mask_lo, g_va, g_vb)
    g_v[1] += np.where(cache.mask_lo, g_vb, g_va)

    # St parameters back to NIG parameters
    for i, mc in enumerate((m1, m2)):
        g_gamma[i] += g_u[i]
        g_alpha[i] += 2.0 * g_v[i]
        g_beta[i] += g_s[i] * (1.0 + mc.delta) / (mc.delta * mc.alpha)
        g_delta[i] += g_s[i] * (-mc.beta / (mc.delta**2 * mc.alpha))
        g_alpha[i] += g_s[i] * (-mc.sigma / mc.alpha)

    # activation and encoder backward
    grads: list[np.ndarray] = []
    stacks = (
        (params.encoder1, params.head1, m1, 0, x1),
        (params.encoder2, params.head2, m2, 1, x2),
    )
    for layers, head, mc, i, x in stacks:
        g_raw = np.empty((b, 4 * k))
        g_raw[:, :k] = g_gamma[i]
        g_raw[:, k : 2 * k] = g_delta[i] * _sigmoid(mc.raw[:, k : 2 * k])
        g_raw[:, 2 * k : 3 * k] = g_alpha[i] * _sigmoid(mc.raw[:, 2 * k : 3 * k])
        g_raw[:, 3 * k :] = g_beta[i] * _sigmoid(mc.raw[:, 3 * k :])

        layer_grads: list[tuple[np.ndarray, np.ndarray]] = []
        h_last = mc.outputs[-1] if layers else x
        layer_grads.append((h_last.T @ g_raw, g_raw.sum(axis=0)))  # head
        g_h = g_raw @ head[0].T
        for (w, _), inp, out in zip(reversed(layers), reversed(mc.inputs), reversed(mc.outputs)):
            g_a = g_h * (1.0 - out**2)
            layer_grads.append((inp.T @ g_a, g_a.sum(axis=0)))
            g_h = g_a @ w.T
        layer_grads = layer_grads[::-1]  # encoder layers first, head last
        for gw, gb in layer_grads:
            grads.append(np.concatenate([gw.ravel(), gb.ravel()]))
    return np.concatenate(grads)


# --- single-sample forward ----------------------------------------------------


def _raw_single(layers, head, x: np.ndarray) -> np.ndarray:
    h = x
    for w, b in layers:
        h = np.tanh(h @ w + b)
    return h @ head[0] + head[1]


def forward(params: ModelParams, sample: Sample) -> ForwardOutput:
    """Deterministic composition: encoders -> head activation -> analytic
    Student's t conversion -> per-class fusion."""
    d1, d2 = params.dims
    if sample.x1.shape != (d1,) or sample.x2.shape != (d2,):
        raise ValueError(
            f"sample dims {sample.x1.shape}/{sample.x2.shape} do not match model ({d1},)/({d2},)"
        )
    heads_m1 = activate_head(_raw_single(params.encoder1, params.head1, sample.x1))
    heads_m2 = activate_head(_raw_single(params.encoder2, params.head2, sample.x2))
    fused, prediction = fuse_per_class(heads_m1, heads_m2)
    k_star = prediction.predicted_class
    reports = tuple(
        UncertaintyReport(
            aleatoric=aleatoric(heads[k_star]),
            epistemic=epistemic(heads[k_star]),
            fused_uncertainty=prediction.uncertainty,
        )
        for heads in (heads_m1, heads_m2)
    )
    return ForwardOutput(
        heads_m1=heads_m1,
        heads_m2=heads_m2,
        fused=fused,
        prediction=prediction,
        uncertainties=reports,
    )


# --- batched evaluation -------------------------------------------------------


@dataclass(frozen=True)
class EvalBatch:
    """Vectorized read-outs for a batch of samples."""

    predicted: np.ndarray
    conf_fused: np.ndarray
    conf_m1: np.ndarray
    conf_m2: np.ndarray
    pred_m1: np.ndarray
    pred_m2: np.ndarray
    fused_uncertainty: np.ndarray  # fused variance at the predicted class
    aleatoric_m1: np.ndarray
    epistemic_m1: np.ndarray
    aleatoric_m2: np.ndarray
    epistemic_m2: np.ndarray
    ranking_penalty: np.ndarray  # gated hinge given true labels
    class_means: np.ndarray  # fused locations (B, K)


def predict_batch(params: ModelParams, x1: np.ndarray, x2: np.ndarray, labels: np.ndarray) -> EvalBatch:
    cache = _forward_batch(params, x1, x2)
    m1, m2 = cache.m
    b = x1.shape[0]
    rows = np.arange(b)
    predicted = np.argmax(cache.u_f, axis=1)
    p_f = _softmax_rows(cache.u_f)
    conf_f = p_f.max(axis=1)
    p_1 = _softmax_rows(m1.gamma)
    p_2 = _softmax_rows(m2.gamma)
    conf_1 = p_1.max(axis=1)
    conf_2 = p_2.max(axis=1)
    u_var = cache.sigma_f[rows, predicted] * cache.v_f[rows, predicted] / (
        cache.v_f[rows, predicted] - 2.0
    )
    gate = (predicted == labels).astype(float)
    penalty = gate * (
        np.maximum(0.0, conf_1 - conf_f) + np.maximum(0.0, conf_2 - conf_f)
    )

    def au_eu(mc: _ModalityCache):
        au = mc.beta[rows, predicted] / (mc.alpha[rows, predicted] - 1.0)
        return au, au / mc.delta[rows, predicted]

    au1, eu1 = au_eu(m1)
    au2, eu2 = au_eu(m2)
    return EvalBatch(
        predicted=predicted,
        conf_fused=conf_f,
        conf_m1=conf_1,
        conf_m2=conf_2,
        pred_m1=np.argmax(m1.gamma, axis=1),
        pred_m2=np.argmax(m2.gamma, axis=1),
        fused_uncertainty=u_var,
        aleatoric_m1=au1,
        epistemic_m1=eu1,
        aleatoric_m2=au2,
        epistemic_m2=eu2,
        ranking_penalty=penalty,
        class_means=cache.u_f,
    )


# --- training -----------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    per_modality_nig_1: float
    per_modality_nig_2: float
    fused_st: float
    ranking: float
    total: float
    val_acc: float


@dataclass
class TrainingLog:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0


def train(
    config: TrainConfig,
    dataset: Dataset,
    hidden: Sequence[int] = DEFAULT_HIDDEN,
    term_weights: TermWeights = (1.0, 1.0, 1.0),
) -> tuple[ModelParams, TrainingLog]:
    """Mini-batch Adam on the batch-mean objective.

    Returns the checkpoint with the best validation accuracy (earliest
    epoch on ties) plus the per-epoch log.  Fully deterministic per
    (config, dataset).
    """
    train_split, val_split = dataset.train, dataset.val
    k = dataset.config.classes
    if train_split.labels.max() >= k:
        raise ValueError("labels exceed configured class count")
    rng = np.random.default_rng(config.seed)
    params = init_params(
        train_split.x1.shape[1], train_split.x2.shape[1], k, hidden, rng
    )
    flat = params.to_flat()
    m_t = np.zeros_like(flat)
    v_t = np.zeros_like(flat)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    w_nig, w_st, w_rank = term_weights

    log = TrainingLog()
    best_params = params.copy()
    best_acc = -1.0
    best_epoch = 0
    n = train_split.n

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(4)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = (train_split.x1[idx], train_split.x2[idx], train_split.labels[idx])
            cur = params.with_flat(flat)
            nig1, nig2, fused_st, ranking = _batch_terms(
                _forward_batch(cur, batch[0], batch[1]), batch[2], config
            )
            sums += np.array([nig1.sum(), nig2.sum(), fused_st.sum(), ranking.sum()])
            grad = backward(cur, batch, config, term_weights)
            step += 1
            m_t = beta1 * m_t + (1.0 - beta1) * grad
            v_t = beta2 * v_t + (1.0 - beta2) * grad**2
            m_hat = m_t / (1.0 - beta1**step)
            v_hat = v_t / (1.0 - beta2**step)
            flat = flat - config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        params = params.with_flat(flat)
        means = sums / n
        total = w_nig * (means[0] + means[1]) + w_st * means[2] + w_rank * config.lambda_c * means[3]
        ev = predict_batch(params, val_split.x1, val_split.x2, val_split.labels)
        val_acc = float((ev.predicted == val_split.labels).mean())
        log.epochs.append(
            EpochStats(
                epoch=epoch,
                per_modality_nig_1=float(means[0]),
                per_modality_nig_2=float(means[1]),
                fused_st=float(means[2]),
                ranking=float(means[3]),
                total=float(total),
                val_acc=val_acc,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = params.copy()

    log.best_epoch = best_epoch
    log.best_val_acc = best_acc
    return best_params, log


# --- gradient checking ----------------------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_param_index: int
    per_term: dict[str, float]
    threshold: float
    passed: bool


_TERM_SETS: dict[str, TermWeights] = {
    "total": (1.0, 1.0, 1.0),
    "nig": (1.0, 0.0, 0.0),
    "st": (0.0, 1.0, 0.0),
    "ranking": (0.0, 0.0, 1.0),
}


def _fd_gradient(params: ModelParams, batch: Batch, config: TrainConfig,
                 weights: TermWeights, h: float) -> np.ndarray:
    flat = params.to_flat()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        f_plus = objective(params.with_flat(flat + bump), batch, config, weights)
        f_minus = objective(params.with_flat(flat - bump), batch, config, weights)
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return out


def _rel_errors(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def gradient_check(
    params: ModelParams,
    batch: Batch,
    config: TrainConfig,
    h: float = 1e-4,
    threshold: float = 1e-4,
) -> GradCheckReport:
    """Analytic vs central finite-difference gradients, per objective term.

    The reported max and worst index come from the full objective; the
    per-term map isolates the NIG, fused-St, and ranking paths.
    """
    per_term: dict[str, float] = {}
    worst_idx = 0
    max_rel = 0.0
    for name, weights in _TERM_SETS.items():
        analytic = backward(params, batch, config, weights)
        numeric = _fd_gradient(params, batch, config, weights, h)
        rel = _rel_errors(analytic, numeric)
        per_term[name] = float(rel.max())
        if name == "total":
            max_rel = float(rel.max())
            worst_idx = int(rel.argmax())
    return GradCheckReport(
        max_rel_error=max_rel,
        worst_param_index=worst_idx,
        per_term=per_term,
        threshold=threshold,
        passed=max_rel < threshold,
    )


# --- checkpoint io --------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    config: TrainConfig,
    extra: dict | None = None,
) -> None:
    """Versioned JSON parameter dump; floats round-trip bit-exactly."""
    d1, d2 = params.dims
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "n_classes": params.n_classes,
        "d1": d1,
        "d2": d2,
        "hidden": list(params.hidden),
        "train_config": asdict(config),
        "extra": extra or {},
        "params_flat": [float(v) for v in params.to_flat()],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, TrainConfig, dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    skeleton = init_params(
        payload["d1"], payload["d2"], payload["n_classes"], tuple(payload["hidden"]), seed=0
    )
    params = skeleton.with_flat(np.array(payload["params_flat"], dtype=np.float64))
    config = TrainConfig(**payload["train_config"])
    return params, config, payload["extra"]
