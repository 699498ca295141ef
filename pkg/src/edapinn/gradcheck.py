"""Finite-difference validation of the analytic gradients.

Checks every trainable block of the full objective (EDA MSE + emotion BCE +
lambda * physics penalty), including the path through d(EDA)/dt. Dropout
masks are materialized once and pinned for every evaluation so the checked
function is deterministic; batch-norm runs in train mode, so the finite
differences see the batch statistics' dependence on the perturbed weights,
exactly as the analytic backward does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from . import objective as obj
from .data import Dataset
from .errors import ContractError
from .model import ModelParams
from .rng import Pcg32


@dataclass
class GradCheckReport:
    block_errors: dict[str, float]
    max_rel_error: float
    worst_block: str
    tolerance: float
    passed: bool


def _loss_value(params: ModelParams, batch: Dataset, masks) -> float:
    preds = model_mod.forward_batch(params, batch, "train", dropout_masks=masks)
    breakdown = obj.total_loss(
        preds,
        batch.y,
        batch.label.astype(np.float64),
        batch.e,
        params.physics,
        params.config.lambda_floor,
    )
    return breakdown.total


def analytic_gradients(params: ModelParams, batch: Dataset, masks) -> dict[str, np.ndarray]:
    preds = model_mod.forward_batch(params, batch, "train", dropout_masks=masks)
    lg = obj.loss_gradients(
        preds,
        batch.y,
        batch.label.astype(np.float64),
        batch.e,
        params.physics,
        lambda_floor=params.config.lambda_floor,
        lambda_frozen=params.config.lambda_frozen,
    )
    grads = model_mod.backward(params, preds.caches, lg.adj_y, lg.adj_dydt, lg.adj_p)
    grads["physics.alpha0"] = np.array([lg.d_alpha0])
    grads["physics.beta"] = lg.d_beta
    grads["physics.gamma"] = np.array([lg.d_gamma])
    if not params.config.lambda_frozen:
        grads["physics.rho"] = np.array([lg.d_rho])
    return grads


def check_gradients(
    params: ModelParams,
    batch: Dataset,
    step: float = 1e-5,
    tol: float = 1e-6,
    rng: Pcg32 | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Relative error per coordinate is |a - f| / max(|a|, |f|, 1e-8); the
    report carries the per-block maximum. Never raises on mismatch - the
    pass flag carries the verdict.
    """
    if len(batch) < 2:
        raise ContractError("gradient check needs a batch of size >= 2")
    masks = None
    if params.config.dropout > 0.0:
        masks = model_mod.draw_dropout_masks(
            params, len(batch), rng if rng is not None else Pcg32(params.config.seed).derive("gradcheck")
        )
    analytic = analytic_gradients(params, batch, masks)
    blocks = model_mod.trainable_blocks(params)
    block_errors: dict[str, float] = {}
    for name, block in blocks.items():
        a = analytic[name]
        worst = 0.0
        flat = block.reshape(-1)
        a_flat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = _loss_value(model_mod.with_blocks(params, blocks), batch, masks)
            flat[i] = orig - step
            lm = _loss_value(model_mod.with_blocks(params, blocks), batch, masks)
            flat[i] = orig
            fd = (lp - lm) / (2.0 * step)
            rel = abs(a_flat[i] - fd) / max(abs(a_flat[i]), abs(fd), 1e-8)
            worst = max(worst, rel)
        block_errors[name] = worst
    worst_block = max(block_errors, key=block_errors.get)
    max_rel = block_errors[worst_block]
    return GradCheckReport(block_errors, max_rel, worst_block, tol, max_rel <= tol)
