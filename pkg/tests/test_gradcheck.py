"""The gradient checker itself: catches corruption, honors zero cases."""

import numpy as np
import pytest

import edapinn.gradcheck as gradcheck_mod
from edapinn.data import Dataset
from edapinn.gradcheck import analytic_gradients, check_gradients
from edapinn.errors import ContractError
from edapinn.model import ModelConfig, init_model
from edapinn.rng import Pcg32


def make_batch(n, seed):
    rng = Pcg32(seed).derive("batch")
    return Dataset(
        rng.normal(n),
        rng.normal(3 * n).reshape(n, 3),
        0.5 + 0.3 * rng.normal(n),
        (rng.random(n) < 0.5).astype(np.int64),
    )


def test_seeded_net_passes_at_tolerance():
    params = init_model(ModelConfig(hidden=[8, 8], seed=11))
    report = check_gradients(params, make_batch(16, 11), step=1e-5, tol=1e-6)
    assert report.passed
    assert report.max_rel_error <= 1e-6
    assert set(report.block_errors) == {
        "layer0.w", "layer0.bn_scale", "layer0.bn_shift",
        "layer1.w", "layer1.bn_scale", "layer1.bn_shift",
        "head_reg.w", "head_reg.b", "head_cls.w", "head_cls.b",
        "physics.alpha0", "physics.beta", "physics.gamma", "physics.rho",
    }


def test_corrupted_gradient_is_caught(monkeypatch):
    params = init_model(ModelConfig(hidden=[8, 8], seed=13))
    real = analytic_gradients

    def corrupted(p, batch, masks):
        grads = real(p, batch, masks)
        grads["layer1.w"] = grads["layer1.w"] + 0.1
        return grads

    monkeypatch.setattr(gradcheck_mod, "analytic_gradients", corrupted)
    report = check_gradients(params, make_batch(16, 13), step=1e-5, tol=1e-6)
    assert not report.passed
    assert report.worst_block == "layer1.w"


def test_zero_network_zero_targets_regression_gradients_vanish():
    params = init_model(ModelConfig(hidden=[8, 8], seed=15, dropout=0.0))
    for layer in params.layers:
        layer.w[:] = 0.0
    params.head_reg.w[:] = 0.0
    params.head_cls.w[:] = 0.0
    batch = make_batch(12, 15)
    batch.y[:] = 0.0  # targets match the zero network's output exactly

    import edapinn.model as model_mod
    from edapinn import objective as obj

    preds = model_mod.forward_batch(params, batch, "train")
    lg = obj.loss_gradients(
        preds, batch.y, batch.label.astype(float), batch.e, params.physics,
        use_emotion=False, use_physics=False,
    )
    grads = model_mod.backward(params, preds.caches, lg.adj_y, lg.adj_dydt, lg.adj_p)
    for name, g in grads.items():
        assert not np.any(g), name


def test_small_batch_rejected():
    params = init_model(ModelConfig(seed=17))
    with pytest.raises(ContractError):
        check_gradients(params, make_batch(1, 17))


def test_frozen_lambda_drops_rho_from_blocks():
    params = init_model(ModelConfig(hidden=[4, 4], seed=19, lambda_frozen=True))
    report = check_gradients(params, make_batch(8, 19), step=1e-5, tol=1e-6)
    assert report.passed
    assert "physics.rho" not in report.block_errors
