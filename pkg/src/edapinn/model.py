"""The multi-task network: shared trunk, regression and classification heads.

Two input branches (scalar time proxy, three emotion features) are
concatenated and passed through hidden blocks of
affine -> batch-norm -> swish -> dropout. Hidden affines carry no bias: the
batch-norm shift directly behind them plays that role, and a bias there
would have an identically-zero training gradient (batch centering removes
it), which would poison finite-difference gradient validation. Both output
heads are affine with bias; the regression head is linear, the
classification head logistic.

The time column's tangent is seeded to 1 and the emotion columns' to 0, so
the dual channel carries d(EDA)/dt with respect to the (normalized) time
proxy of each sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import DualBatch, softplus_inv
from .data import Normalizer
from .errors import (
    CheckpointReadError,
    CheckpointSchemaError,
    CheckpointVersionError,
    ConfigError,
    ContractError,
    NumericError,
)
from .objective import PhysicsParams
from .rng import Pcg32

CHECKPOINT_VERSION = "1"
INPUT_WIDTH = 4  # 1 time column + 3 emotion features


@dataclass
class ModelConfig:
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    dropout: float = 0.1
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    seed: int = 1
    threshold: float = 0.5
    lambda_floor: float = 1e-3
    lambda_frozen: bool = False
    residual_on_raw_features: bool = False

    def validate(self) -> None:
        if not self.hidden or any(w < 1 for w in self.hidden):
            raise ConfigError("hidden widths must be a nonempty list of counts >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout rate must lie in [0, 1)")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("classification threshold must lie in (0, 1)")
        if self.lambda_floor < 0.0:
            raise ConfigError("lambda floor must be >= 0")
        if self.bn_eps <= 0.0:
            raise ConfigError("batch-norm epsilon must be positive")
        if not 0.0 <= self.bn_momentum < 1.0:
            raise ConfigError("batch-norm momentum must lie in [0, 1)")


@dataclass
class HiddenLayer:
    w: np.ndarray
    bn_scale: np.ndarray
    bn_shift: np.ndarray
    bn_running_mean: np.ndarray
    bn_running_var: np.ndarray


@dataclass
class Head:
    w: np.ndarray
    b: np.ndarray


@dataclass
class ModelParams:
    layers: list[HiddenLayer]
    head_reg: Head
    head_cls: Head
    physics: PhysicsParams
    normalizer: Normalizer | None
    config: ModelConfig

    def copy(self) -> "ModelParams":
        return ModelParams(
            [
                HiddenLayer(
                    l.w.copy(),
                    l.bn_scale.copy(),
                    l.bn_shift.copy(),
                    l.bn_running_mean.copy(),
                    l.bn_running_var.copy(),
                )
                for l in self.layers
            ],
            Head(self.head_reg.w.copy(), self.head_reg.b.copy()),
            Head(self.head_cls.w.copy(), self.head_cls.b.copy()),
            self.physics.copy(),
            self.normalizer,
            self.config,
        )


@dataclass
class LayerCaches:
    affine: ad.AffineCache
    bn: ad.BatchNormCache
    swish: ad.SwishCache
    dropout: ad.DropoutCache


@dataclass
class ForwardCaches:
    concat: ad.ConcatCache
    layers: list[LayerCaches]
    reg_affine: ad.AffineCache
    cls_affine: ad.AffineCache
    cls_sigmoid: ad.SigmoidCache


@dataclass
class Predictions:
    y_eda: np.ndarray
    dydt: np.ndarray
    p_emotion: np.ndarray
    caches: ForwardCaches


def init_model(config: ModelConfig, normalizer: Normalizer | None = None) -> ModelParams:
    """Glorot-uniform weights, unit batch-norm, softplus(rho) = 0.1."""
    config.validate()
    rng = Pcg32(config.seed).derive("init")
    widths = [INPUT_WIDTH] + list(config.hidden)
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, fan_in * fan_out).reshape(fan_in, fan_out)
        layers.append(
            HiddenLayer(w, np.ones(fan_out), np.zeros(fan_out), np.zeros(fan_out), np.ones(fan_out))
        )
    top = widths[-1]
    limit = np.sqrt(6.0 / (top + 1))
    head_reg = Head(rng.uniform(-limit, limit, top).reshape(top, 1), np.zeros(1))
    head_cls = Head(rng.uniform(-limit, limit, top).reshape(top, 1), np.zeros(1))
    physics = PhysicsParams(1.0, np.array([0.1, 0.1, 0.1]), 1.0, softplus_inv(0.1))
    return ModelParams(layers, head_reg, head_cls, physics, normalizer, config)


def draw_dropout_masks(params: ModelParams, n: int, rng: Pcg32) -> list[np.ndarray]:
    """Materialize one mask per hidden layer, as a train-mode forward would."""
    rate = params.config.dropout
    return [ad.make_dropout_mask((n, l.w.shape[1]), rate, rng) for l in params.layers]


def forward(
    params: ModelParams,
    t: np.ndarray,
    e: np.ndarray,
    mode: str = "eval",
    rng: Pcg32 | None = None,
    dropout_masks: list[np.ndarray] | None = None,
    time_tangent: float = 1.0,
    emotion_tangent: float = 0.0,
) -> Predictions:
    """Dual-channel forward pass over a normalized batch.

    Train mode uses batch statistics and fresh dropout masks (from ``rng``
    unless ``dropout_masks`` pins them); eval mode uses running statistics,
    disables dropout and never consumes randomness.
    """
    t = np.asarray(t, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if t.ndim != 1 or t.size == 0 or e.shape != (t.size, 3):
        raise ContractError(f"need t of shape (n,) and e of shape (n, 3), got {t.shape}, {e.shape}")
    n = t.size
    cfg = params.config
    branch_t = DualBatch(t[:, None], np.full((n, 1), time_tangent))
    branch_e = DualBatch(e, np.full((n, 3), emotion_tangent))
    # divergence is reported through the explicit per-layer checks below;
    # numpy's warnings on the already-poisoned arithmetic are redundant
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        x, concat_cache = ad.concat_forward([branch_t, branch_e])

        layer_caches = []
        for i, layer in enumerate(params.layers):
            x, c_aff = ad.affine_forward(x, layer.w, np.zeros(layer.w.shape[1]))
            x, c_bn = ad.batchnorm_forward(
                x,
                layer.bn_scale,
                layer.bn_shift,
                layer.bn_running_mean,
                layer.bn_running_var,
                mode,
                eps=cfg.bn_eps,
                momentum=cfg.bn_momentum,
            )
            x, c_sw = ad.swish_forward(x)
            mask = dropout_masks[i] if dropout_masks is not None else None
            x, c_do = ad.dropout_forward(x, cfg.dropout, mode, rng, mask)
            if not np.all(np.isfinite(x.value)) or not np.all(np.isfinite(x.tangent)):
                raise NumericError(f"non-finite activations after hidden layer {i}")
            layer_caches.append(LayerCaches(c_aff, c_bn, c_sw, c_do))

        y_out, reg_cache = ad.affine_forward(x, params.head_reg.w, params.head_reg.b)
        z_out, cls_cache = ad.affine_forward(x, params.head_cls.w, params.head_cls.b)
        p_out, sig_cache = ad.sigmoid_forward(z_out)
        if not np.all(np.isfinite(y_out.value)) or not np.all(np.isfinite(y_out.tangent)):
            raise NumericError("non-finite activations in the regression head")

    caches = ForwardCaches(concat_cache, layer_caches, reg_cache, cls_cache, sig_cache)
    return Predictions(y_out.value[:, 0], y_out.tangent[:, 0], p_out.value[:, 0], caches)


def forward_batch(
    params: ModelParams,
    batch,
    mode: str = "eval",
    rng: Pcg32 | None = None,
    dropout_masks: list[np.ndarray] | None = None,
) -> Predictions:
    """Forward over a (normalized) Dataset."""
    return forward(params, batch.t, batch.e, mode, rng, dropout_masks)


def backward(
    params: ModelParams,
    caches: ForwardCaches,
    adj_y_value: np.ndarray,
    adj_y_tangent: np.ndarray,
    adj_p_value: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss wrt every network block.

    The loss is described by its adjoints on the three model outputs:
    d(loss)/d(y_eda), d(loss)/d(dy/dt) and d(loss)/d(p_emotion). Physics
    parameters are handled by the objective module, not here.
    """
    n = adj_y_value.shape[0]
    grads: dict[str, np.ndarray] = {}

    av, at, (dw_reg, db_reg) = ad.affine_backward(
        caches.reg_affine, adj_y_value[:, None], adj_y_tangent[:, None]
    )
    grads["head_reg.w"] = dw_reg
    grads["head_reg.b"] = db_reg

    pv, pt, _ = ad.sigmoid_backward(caches.cls_sigmoid, adj_p_value[:, None], np.zeros((n, 1)))
    cv, ct, (dw_cls, db_cls) = ad.affine_backward(caches.cls_affine, pv, pt)
    grads["head_cls.w"] = dw_cls
    grads["head_cls.b"] = db_cls

    adj_v = av + cv
    adj_t = at + ct
    for i in reversed(range(len(params.layers))):
        c = caches.layers[i]
        adj_v, adj_t, _ = ad.dropout_backward(c.dropout, adj_v, adj_t)
        adj_v, adj_t, _ = ad.swish_backward(c.swish, adj_v, adj_t)
        adj_v, adj_t, (d_scale, d_shift) = ad.batchnorm_backward(c.bn, adj_v, adj_t)
        grads[f"layer{i}.bn_scale"] = d_scale
        grads[f"layer{i}.bn_shift"] = d_shift
        adj_v, adj_t, (dw, _db) = ad.affine_backward(c.affine, adj_v, adj_t)
        grads[f"layer{i}.w"] = dw
    return grads


def commit_batchnorm(params: ModelParams, caches: ForwardCaches) -> None:
    """Adopt the running statistics produced by a train-mode forward."""
    for layer, c in zip(params.layers, caches.layers):
        if c.bn.new_running_mean is not None:
            layer.bn_running_mean = c.bn.new_running_mean
            layer.bn_running_var = c.bn.new_running_var


# ---------------------------------------------------------------------------
# trainable-block packing (drives Adam and the gradient checker)
# ---------------------------------------------------------------------------


def trainable_blocks(params: ModelParams) -> dict[str, np.ndarray]:
    blocks: dict[str, np.ndarray] = {}
    for i, layer in enumerate(params.layers):
        blocks[f"layer{i}.w"] = layer.w
        blocks[f"layer{i}.bn_scale"] = layer.bn_scale
        blocks[f"layer{i}.bn_shift"] = layer.bn_shift
    blocks["head_reg.w"] = params.head_reg.w
    blocks["head_reg.b"] = params.head_reg.b
    blocks["head_cls.w"] = params.head_cls.w
    blocks["head_cls.b"] = params.head_cls.b
    blocks["physics.alpha0"] = np.array([params.physics.alpha0])
    blocks["physics.beta"] = params.physics.beta.copy()
    blocks["physics.gamma"] = np.array([params.physics.gamma])
    if not params.config.lambda_frozen:
        blocks["physics.rho"] = np.array([params.physics.rho])
    return blocks


def with_blocks(params: ModelParams, blocks: dict[str, np.ndarray]) -> ModelParams:
    """New ModelParams with block values replaced (running stats shared)."""
    out = params.copy()
    for i, layer in enumerate(out.layers):
        layer.w = blocks[f"layer{i}.w"]
        layer.bn_scale = blocks[f"layer{i}.bn_scale"]
        layer.bn_shift = blocks[f"layer{i}.bn_shift"]
    out.head_reg.w = blocks["head_reg.w"]
    out.head_reg.b = blocks["head_reg.b"]
    out.head_cls.w = blocks["head_cls.w"]
    out.head_cls.b = blocks["head_cls.b"]
    out.physics.alpha0 = float(blocks["physics.alpha0"][0])
    out.physics.beta = np.asarray(blocks["physics.beta"], dtype=np.float64)
    out.physics.gamma = float(blocks["physics.gamma"][0])
    if "physics.rho" in blocks:
        out.physics.rho = float(blocks["physics.rho"][0])
    return out


# ---------------------------------------------------------------------------
# checkpoint serialization: versioned JSON, byte-deterministic
# ---------------------------------------------------------------------------


def _params_to_doc(params: ModelParams) -> dict:
    cfg = params.config
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "config": {
            "hidden": list(cfg.hidden),
            "dropout": cfg.dropout,
            "bn_eps": cfg.bn_eps,
            "bn_momentum": cfg.bn_momentum,
            "seed": cfg.seed,
            "threshold": cfg.threshold,
            "lambda_floor": cfg.lambda_floor,
            "lambda_frozen": cfg.lambda_frozen,
            "residual_on_raw_features": cfg.residual_on_raw_features,
        },
        "normalizer": None,
        "physics": {
            "alpha0": params.physics.alpha0,
            "beta": params.physics.beta.tolist(),
            "gamma": params.physics.gamma,
            "rho": params.physics.rho,
        },
        "layers": [
            {
                "w": layer.w.flatten().tolist(),
                "w_shape": list(layer.w.shape),
                "bn_scale": layer.bn_scale.tolist(),
                "bn_shift": layer.bn_shift.tolist(),
                "bn_running_mean": layer.bn_running_mean.tolist(),
                "bn_running_var": layer.bn_running_var.tolist(),
            }
            for layer in params.layers
        ],
        "head_reg": {"w": params.head_reg.w.flatten().tolist(), "b": params.head_reg.b.tolist()},
        "head_cls": {"w": params.head_cls.w.flatten().tolist(), "b": params.head_cls.b.tolist()},
    }
    if params.normalizer is not None:
        doc["normalizer"] = {
            "input_mean": params.normalizer.input_mean.tolist(),
            "input_std": params.normalizer.input_std.tolist(),
            "y_min": params.normalizer.y_min,
            "y_max": params.normalizer.y_max,
        }
    return doc


def checkpoint_text(params: ModelParams) -> str:
    """Canonical serialized form; identical models give identical bytes."""
    return json.dumps(_params_to_doc(params), sort_keys=True, indent=1) + "\n"


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    Path(path).write_text(checkpoint_text(params), encoding="utf-8")


def load_checkpoint(path: str | Path) -> ModelParams:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CheckpointReadError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointReadError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise CheckpointSchemaError("missing format_version field")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"unsupported checkpoint version {doc['format_version']!r}, expected {CHECKPOINT_VERSION!r}"
        )
    try:
        cfg = ModelConfig(
            hidden=[int(w) for w in doc["config"]["hidden"]],
            dropout=float(doc["config"]["dropout"]),
            bn_eps=float(doc["config"]["bn_eps"]),
            bn_momentum=float(doc["config"]["bn_momentum"]),
            seed=int(doc["config"]["seed"]),
            threshold=float(doc["config"]["threshold"]),
            lambda_floor=float(doc["config"]["lambda_floor"]),
            lambda_frozen=bool(doc["config"]["lambda_frozen"]),
            residual_on_raw_features=bool(doc["config"]["residual_on_raw_features"]),
        )
        norm = None
        if doc["normalizer"] is not None:
            norm = Normalizer(
                np.array(doc["normalizer"]["input_mean"], dtype=np.float64),
                np.array(doc["normalizer"]["input_std"], dtype=np.float64),
                float(doc["normalizer"]["y_min"]),
                float(doc["normalizer"]["y_max"]),
            )
        physics = PhysicsParams(
            float(doc["physics"]["alpha0"]),
            np.array(doc["physics"]["beta"], dtype=np.float64),
            float(doc["physics"]["gamma"]),
            float(doc["physics"]["rho"]),
        )
        layers = []
        for entry in doc["layers"]:
            shape = tuple(entry["w_shape"])
            layers.append(
                HiddenLayer(
                    np.array(entry["w"], dtype=np.float64).reshape(shape),
                    np.array(entry["bn_scale"], dtype=np.float64),
                    np.array(entry["bn_shift"], dtype=np.float64),
                    np.array(entry["bn_running_mean"], dtype=np.float64),
                    np.array(entry["bn_running_var"], dtype=np.float64),
                )
            )
        top = cfg.hidden[-1]
        head_reg = Head(
            np.array(doc["head_reg"]["w"], dtype=np.float64).reshape(top, 1),
            np.array(doc["head_reg"]["b"], dtype=np.float64),
        )
        head_cls = Head(
            np.array(doc["head_cls"]["w"], dtype=np.float64).reshape(top, 1),
            np.array(doc["head_cls"]["b"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointSchemaError(f"malformed checkpoint field: {exc}") from exc
    return ModelParams(layers, head_reg, head_cls, physics, norm, cfg)
