"""Dual-channel dense primitives with exact reverse-mode gradients.

Every primitive propagates a batch of (value, tangent) pairs where the
tangent is the per-sample derivative of the value with respect to the scalar
time input. Because the training loss consumes both channels (the physics
residual needs d(EDA)/dt), each primitive's backward returns

    adj_input_value   = J^T @ adj_value + (d[J @ xdot]/dx)^T @ adj_tangent
    adj_input_tangent = J^T @ adj_tangent

so nonlinear primitives carry their second derivative. All math is float64;
matrices are plain 2-D numpy arrays (batch x width, row-major).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, NumericError
from .rng import Pcg32


@dataclass
class DualBatch:
    """Batch of values paired with their derivative along the time input."""

    value: np.ndarray
    tangent: np.ndarray

    def __post_init__(self):
        if self.value.shape != self.tangent.shape:
            raise ContractError(
                f"value shape {self.value.shape} != tangent shape {self.tangent.shape}"
            )

    @property
    def shape(self):
        return self.value.shape


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite entries in {what}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def swish_d1(x: np.ndarray) -> np.ndarray:
    """s'(x) = sigma(x) * (1 + x * (1 - sigma(x)))."""
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def swish_d2(x: np.ndarray) -> np.ndarray:
    """s''(x) = sigma(x) * (1 - sigma(x)) * (2 + x * (1 - 2 sigma(x)))."""
    s = sigmoid(x)
    return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))


def softplus(x: float) -> float:
    if x > 30.0:
        return float(x)
    return float(np.log1p(np.exp(x)))


def softplus_inv(y: float) -> float:
    """Inverse of softplus; y must be > 0."""
    if y <= 0:
        raise ContractError("softplus_inv requires y > 0")
    if y > 30.0:
        return float(y)
    return float(np.log(np.expm1(y)))


# ---------------------------------------------------------------------------
# affine: y = x @ W + b
# ---------------------------------------------------------------------------


@dataclass
class AffineCache:
    x_value: np.ndarray
    x_tangent: np.ndarray
    w: np.ndarray


def affine_forward(x: DualBatch, w: np.ndarray, b: np.ndarray):
    if x.value.shape[1] != w.shape[0]:
        raise ContractError(
            f"affine fan-in mismatch: input width {x.value.shape[1]}, W rows {w.shape[0]}"
        )
    out = DualBatch(x.value @ w + b, x.tangent @ w)
    return out, AffineCache(x.value, x.tangent, w)


def affine_backward(cache: AffineCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    adj_x_value = adj_value @ cache.w.T
    adj_x_tangent = adj_tangent @ cache.w.T
    dw = cache.x_value.T @ adj_value + cache.x_tangent.T @ adj_tangent
    db = adj_value.sum(axis=0)
    return adj_x_value, adj_x_tangent, [dw, db]


# ---------------------------------------------------------------------------
# concat: join the time column with the emotion columns
# ---------------------------------------------------------------------------


@dataclass
class ConcatCache:
    widths: tuple[int, ...]


def concat_forward(parts: list[DualBatch]):
    if not parts:
        raise ContractError("concat requires at least one part")
    rows = parts[0].value.shape[0]
    for p in parts:
        if p.value.shape[0] != rows:
            raise ContractError("concat parts must share the batch dimension")
    out = DualBatch(
        np.concatenate([p.value for p in parts], axis=1),
        np.concatenate([p.tangent for p in parts], axis=1),
    )
    return out, ConcatCache(tuple(p.value.shape[1] for p in parts))


def concat_backward(cache: ConcatCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    splits = np.cumsum(cache.widths)[:-1]
    adj_vals = np.split(adj_value, splits, axis=1)
    adj_tans = np.split(adj_tangent, splits, axis=1)
    return adj_vals, adj_tans, []


# ---------------------------------------------------------------------------
# swish activation
# ---------------------------------------------------------------------------


@dataclass
class SwishCache:
    x_value: np.ndarray
    x_tangent: np.ndarray


def swish_forward(x: DualBatch):
    out = DualBatch(swish(x.value), swish_d1(x.value) * x.tangent)
    return out, SwishCache(x.value, x.tangent)


def swish_backward(cache: SwishCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    d1 = swish_d1(cache.x_value)
    adj_x_value = d1 * adj_value + swish_d2(cache.x_value) * cache.x_tangent * adj_tangent
    adj_x_tangent = d1 * adj_tangent
    return adj_x_value, adj_x_tangent, []


# ---------------------------------------------------------------------------
# batch normalization
# ---------------------------------------------------------------------------
#
# Train mode normalizes with the batch's own (population) statistics. The
# tangent channel treats mu and var as constants so d(EDA)/dt stays a
# per-sample quantity; the backward pass nevertheless differentiates the
# *actual computed function*, which includes the tangent output's dependence
# on var(x), so analytic gradients match finite differences exactly.


@dataclass
class BatchNormCache:
    mode: str
    scale: np.ndarray
    x_centered: np.ndarray
    x_tangent: np.ndarray
    istd: np.ndarray
    new_running_mean: np.ndarray | None
    new_running_var: np.ndarray | None


def batchnorm_forward(
    x: DualBatch,
    scale: np.ndarray,
    shift: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str,
    eps: float = 1e-5,
    momentum: float = 0.9,
):
    if mode == "train":
        mu = x.value.mean(axis=0)
        var = x.value.var(axis=0)
        new_rm = momentum * running_mean + (1.0 - momentum) * mu
        new_rv = momentum * running_var + (1.0 - momentum) * var
    elif mode == "eval":
        mu = running_mean
        var = running_var
        new_rm = None
        new_rv = None
    else:
        raise ContractError(f"unknown batch-norm mode {mode!r}")
    istd = 1.0 / np.sqrt(var + eps)
    x_centered = x.value - mu
    out = DualBatch(
        scale * (x_centered * istd) + shift,
        scale * istd * x.tangent,
    )
    cache = BatchNormCache(mode, scale, x_centered, x.tangent, istd, new_rm, new_rv)
    return out, cache


def batchnorm_backward(cache: BatchNormCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    g, istd = cache.scale, cache.istd
    xc, xt = cache.x_centered, cache.x_tangent
    n = xc.shape[0]
    x_hat = xc * istd

    adj_scale = (adj_value * x_hat).sum(axis=0) + (adj_tangent * xt * istd).sum(axis=0)
    adj_shift = adj_value.sum(axis=0)

    if cache.mode == "eval":
        adj_x_value = adj_value * (g * istd)
        adj_x_tangent = adj_tangent * (g * istd)
        return adj_x_value, adj_x_tangent, [adj_scale, adj_shift]

    # value channel: standard batch-norm gradient through mu and var
    dxhat = adj_value * g
    dvar = (dxhat * xc).sum(axis=0) * (-0.5) * istd**3
    dmu = -(dxhat.sum(axis=0)) * istd
    adj_x_value = dxhat * istd + dvar * (2.0 / n) * xc + dmu / n
    # tangent channel: output g*istd*xt depends on x through var(x)
    s_t = (adj_tangent * xt).sum(axis=0)
    adj_x_value = adj_x_value - (g * s_t / n) * istd**3 * xc
    adj_x_tangent = adj_tangent * (g * istd)
    return adj_x_value, adj_x_tangent, [adj_scale, adj_shift]


# ---------------------------------------------------------------------------
# inverted dropout: one mask per forward call, shared by value and tangent
# ---------------------------------------------------------------------------


@dataclass
class DropoutCache:
    mask: np.ndarray | None


def make_dropout_mask(shape: tuple[int, int], rate: float, rng: Pcg32) -> np.ndarray:
    u = rng.random(shape[0] * shape[1]).reshape(shape)
    return (u >= rate).astype(np.float64) / (1.0 - rate)


def dropout_forward(
    x: DualBatch,
    rate: float,
    mode: str,
    rng: Pcg32 | None = None,
    mask: np.ndarray | None = None,
):
    if mode == "eval" or rate == 0.0:
        return DualBatch(x.value, x.tangent), DropoutCache(None)
    if mask is None:
        if rng is None:
            raise ContractError("train-mode dropout needs an rng or a precomputed mask")
        mask = make_dropout_mask(x.value.shape, rate, rng)
    return DualBatch(x.value * mask, x.tangent * mask), DropoutCache(mask)


def dropout_backward(cache: DropoutCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    if cache.mask is None:
        return adj_value, adj_tangent, []
    return adj_value * cache.mask, adj_tangent * cache.mask, []


# ---------------------------------------------------------------------------
# output heads
# ---------------------------------------------------------------------------

_PROB_CLIP = 1e-12  # keeps head probabilities strictly inside (0, 1)


@dataclass
class SigmoidCache:
    x_value: np.ndarray
    x_tangent: np.ndarray
    clamped: np.ndarray


def sigmoid_forward(x: DualBatch):
    p = sigmoid(x.value)
    clipped = np.clip(p, _PROB_CLIP, 1.0 - _PROB_CLIP)
    clamped = clipped != p
    tangent = np.where(clamped, 0.0, p * (1.0 - p) * x.tangent)
    return DualBatch(clipped, tangent), SigmoidCache(x.value, x.tangent, clamped)


def sigmoid_backward(cache: SigmoidCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    s = sigmoid(cache.x_value)
    d1 = s * (1.0 - s)
    d2 = d1 * (1.0 - 2.0 * s)
    live = ~cache.clamped
    adj_x_value = live * (d1 * adj_value + d2 * cache.x_tangent * adj_tangent)
    adj_x_tangent = live * d1 * adj_tangent
    return adj_x_value, adj_x_tangent, []


@dataclass
class IdentityCache:
    pass


def identity_forward(x: DualBatch):
    return DualBatch(x.value, x.tangent), IdentityCache()


def identity_backward(cache: IdentityCache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    return adj_value, adj_tangent, []


# ---------------------------------------------------------------------------
# generic dispatch over the primitive catalog
# ---------------------------------------------------------------------------

PRIMITIVES = (
    "affine",
    "concat",
    "swish",
    "batchnorm",
    "dropout",
    "sigmoid",
    "identity",
)


def dual_forward(
    prim: str,
    params: list[np.ndarray],
    x,
    mode: str = "train",
    rng: Pcg32 | None = None,
    **kwargs,
):
    """Run one primitive on a DualBatch (or a list of them, for concat).

    Returns (output DualBatch, cache). The cache feeds dual_backward.
    """
    inputs = x if isinstance(x, list) else [x]
    for part in inputs:
        _require_finite(part.value, f"{prim} input value")
        _require_finite(part.tangent, f"{prim} input tangent")
    if prim == "affine":
        return affine_forward(x, params[0], params[1])
    if prim == "concat":
        return concat_forward(x)
    if prim == "swish":
        return swish_forward(x)
    if prim == "batchnorm":
        return batchnorm_forward(x, params[0], params[1], params[2], params[3], mode, **kwargs)
    if prim == "dropout":
        return dropout_forward(x, kwargs.get("rate", 0.0), mode, rng, kwargs.get("mask"))
    if prim == "sigmoid":
        return sigmoid_forward(x)
    if prim == "identity":
        return identity_forward(x)
    raise ContractError(f"unknown primitive {prim!r}")


_BACKWARD = {
    AffineCache: affine_backward,
    ConcatCache: concat_backward,
    SwishCache: swish_backward,
    BatchNormCache: batchnorm_backward,
    DropoutCache: dropout_backward,
    SigmoidCache: sigmoid_backward,
    IdentityCache: identity_backward,
}


def dual_backward(prim: str, cache, adj_value: np.ndarray, adj_tangent: np.ndarray):
    """Reverse rule matching a dual_forward call with the same primitive id."""
    expected = {
        "affine": AffineCache,
        "concat": ConcatCache,
        "swish": SwishCache,
        "batchnorm": BatchNormCache,
        "dropout": DropoutCache,
        "sigmoid": SigmoidCache,
        "identity": IdentityCache,
    }.get(prim)
    if expected is None:
        raise ContractError(f"unknown primitive {prim!r}")
    if type(cache) is not expected:
        raise ContractError(
            f"cache of type {type(cache).__name__} does not match primitive {prim!r}"
        )
    return _BACKWARD[expected](cache, adj_value, adj_tangent)
