"""Self-contained verification suites behind the ``check`` command.

Each suite pits an implementation path against an independent oracle:
analytic gradients vs central finite differences, the dual tangent channel
vs finite differences in t, the closed-form ODE solution vs classic RK4,
synthetic data vs the residual definition, gradient-descent recovery vs the
normal-equations solution, and the metric implementations vs brute-force
recounts. Results carry a measured figure plus the pass verdict; nothing
raises on failure.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import model as model_mod
from .data import (
    Dataset,
    SynthSpec,
    ode_solution,
    rk4_integrate,
    stratified_kfold,
    synth_generate,
)
from .evaluation import classification_metrics, regression_metrics
from .gradcheck import check_gradients
from .model import ModelConfig, init_model
from .objective import PhysicsParams, mse, physics_residual
from .rng import Pcg32
from .trainer import recover_physics


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_batch(n: int, seed: int) -> Dataset:
    rng = Pcg32(seed).derive("suite-batch")
    t = rng.normal(n)
    e = rng.normal(3 * n).reshape(n, 3)
    y = 0.5 + 0.25 * rng.normal(n)
    label = (rng.random(n) < 0.5).astype(np.int64)
    return Dataset(t, e, y, label)


def suite_gradient_check(seed: int = 1) -> SuiteResult:
    t0 = time.perf_counter()
    params = init_model(ModelConfig(hidden=[8, 8], seed=seed))
    batch = _random_batch(16, seed)
    report = check_gradients(params, batch, step=1e-5, tol=1e-6)
    return SuiteResult(
        "gradient-check",
        report.passed,
        f"max rel error {report.max_rel_error:.3e} (worst block {report.worst_block}, tol 1e-6)",
        time.perf_counter() - t0,
    )


def suite_tangent_check(seed: int = 1, n: int = 100, tol: float = 1e-5) -> SuiteResult:
    """Dual-channel d(EDA)/dt vs central finite differences in t, eval mode."""
    t0 = time.perf_counter()
    params = init_model(ModelConfig(hidden=[16, 16], seed=seed))
    rng = Pcg32(seed).derive("tangent")
    t = rng.normal(n)
    e = rng.normal(3 * n).reshape(n, 3)
    # populate running statistics so eval mode is nontrivial
    warm = model_mod.forward(params, t, e, "train", rng.derive("warm"))
    model_mod.commit_batchnorm(params, warm.caches)
    preds = model_mod.forward(params, t, e, "eval")
    h = 1e-6
    up = model_mod.forward(params, t + h, e, "eval").y_eda
    dn = model_mod.forward(params, t - h, e, "eval").y_eda
    fd = (up - dn) / (2 * h)
    rel = np.abs(preds.dydt - fd) / np.maximum.reduce(
        [np.abs(preds.dydt), np.abs(fd), np.full(n, 1e-8)]
    )
    worst = float(rel.max())
    return SuiteResult(
        "tangent-check",
        worst <= tol,
        f"max rel error {worst:.3e} over {n} samples (tol {tol:g})",
        time.perf_counter() - t0,
    )


def suite_ode_oracle(seed: int = 1, draws: int = 20) -> SuiteResult:
    """Closed form vs RK4 at step 1e-3, plus the fourth-order halving check."""
    t0 = time.perf_counter()
    rng = Pcg32(seed).derive("ode")
    e_mix = np.array([0.5, 0.3, 0.2])
    worst = 0.0
    for _ in range(draws):
        phys = PhysicsParams(
            rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0, 3), rng.uniform(0.1, 10.0)
        )
        y0 = rng.uniform(0.1, 10.0)
        grid = np.linspace(0.0, 1.0, 1001)
        err = float(np.max(np.abs(rk4_integrate(phys, e_mix, y0, grid) - ode_solution(phys, e_mix, y0, grid))))
        worst = max(worst, err)
    # halving check in a stiffness regime where truncation dominates roundoff
    stiff = PhysicsParams(8.0, np.array([4.0, 3.0, 3.0]), 0.4)
    y0 = 0.1
    grid1 = np.linspace(0.0, 1.0, 1001)
    grid2 = np.linspace(0.0, 1.0, 2001)
    e1 = float(np.max(np.abs(rk4_integrate(stiff, e_mix, y0, grid1) - ode_solution(stiff, e_mix, y0, grid1))))
    e2 = float(np.max(np.abs(rk4_integrate(stiff, e_mix, y0, grid2) - ode_solution(stiff, e_mix, y0, grid2))))
    ratio = e1 / e2 if e2 > 0 else float("inf")
    ok = worst <= 1e-8 and e1 <= 1e-8 and ratio >= 12.0
    return SuiteResult(
        "ode-oracle",
        ok,
        f"max abs error {worst:.3e} over {draws} draws (tol 1e-8); halving ratio {ratio:.1f}x (need >= 12)",
        time.perf_counter() - t0,
    )


def suite_residual_free(seed: int = 1, n: int = 10000) -> SuiteResult:
    t0 = time.perf_counter()
    spec = SynthSpec(n=n, noise=0.0, seed=seed)
    data, dydt = synth_generate(spec)
    r = physics_residual(dydt, data.y, data.e, spec.physics())
    worst = float(np.max(np.abs(r)))
    return SuiteResult(
        "residual-free-synthesis",
        worst <= 1e-10,
        f"max |residual| {worst:.3e} over {n} noise-free samples (tol 1e-10)",
        time.perf_counter() - t0,
    )


def suite_recovery(seed: int = 1) -> SuiteResult:
    """+50% perturbed (alpha0, beta) must return to the least-squares oracle."""
    t0 = time.perf_counter()
    spec = SynthSpec(n=2000, noise=0.0, seed=seed)
    data, dydt = synth_generate(spec)
    result = recover_physics(dydt, data.y, data.e, spec.gamma, init_perturbation=0.5)
    rec = np.concatenate([[result.params.alpha0], result.params.beta])
    ora = np.concatenate([[result.oracle.alpha0], result.oracle.beta])
    worst = float(np.max(np.abs(rec - ora) / np.abs(ora)))
    return SuiteResult(
        "physics-recovery",
        result.converged and worst <= 0.01,
        f"max component deviation from least-squares oracle {worst:.2%} (tol 1%)",
        time.perf_counter() - t0,
    )


def suite_metric_oracles(seed: int = 1, instances: int = 200) -> SuiteResult:
    """Metrics vs brute-force recounts; rmse^2 vs the objective's mse."""
    t0 = time.perf_counter()
    rng = Pcg32(seed).derive("metrics")
    ok = True
    detail = "all brute-force recounts matched"
    for i in range(instances):
        n = 2 + int(rng.next_u32() % 40)
        prob = rng.random(n)
        label = (rng.random(n) < 0.5).astype(np.int64)
        m = classification_metrics(prob, label, 0.5)
        tp = sum(1 for j in range(n) if prob[j] >= 0.5 and label[j] == 1)
        tn = sum(1 for j in range(n) if prob[j] < 0.5 and label[j] == 0)
        fp = sum(1 for j in range(n) if prob[j] >= 0.5 and label[j] == 0)
        fn = sum(1 for j in range(n) if prob[j] < 0.5 and label[j] == 1)
        acc = (tp + tn) / n
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        if (m.tp, m.tn, m.fp, m.fn) != (tp, tn, fp, fn) or (
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
        ) != (acc, prec, rec, f1):
            ok, detail = False, f"classification mismatch on instance {i}"
            break
        pred = rng.normal(n)
        target = rng.normal(n)
        rm = regression_metrics(pred, target)
        if abs(rm.rmse**2 - mse(pred, target)) > 1e-12:
            ok, detail = False, f"rmse^2 != mse on instance {i}"
            break
        brute_rmse = (sum((pred[j] - target[j]) ** 2 for j in range(n)) / n) ** 0.5
        brute_mae = sum(abs(pred[j] - target[j]) for j in range(n)) / n
        if abs(rm.rmse - brute_rmse) > 1e-12 or abs(rm.mae - brute_mae) > 1e-12:
            ok, detail = False, f"regression mismatch on instance {i}"
            break
    return SuiteResult(
        "metric-oracles", ok, f"{detail} ({instances} instances)", time.perf_counter() - t0
    )


def suite_stratification(seed: int = 1, datasets: int = 50) -> SuiteResult:
    t0 = time.perf_counter()
    rng = Pcg32(seed).derive("strat")
    worst = 0.0
    for i in range(datasets):
        n = 60 + int(rng.next_u32() % 500)
        frac = 0.2 + 0.6 * rng.random()
        label = (rng.random(n) < frac).astype(np.int64)
        if label.sum() < 5 or (1 - label).sum() < 5:
            label[:5] = 1
            label[5:10] = 0
        data = Dataset(np.arange(n, dtype=float), np.zeros((n, 3)), np.zeros(n), label)
        for _, va in stratified_kfold(data, 5, int(rng.next_u32())):
            for cls in (0, 1):
                exact = np.sum(label == cls) / 5
                got = np.sum(label[va] == cls)
                worst = max(worst, abs(got - exact))
    return SuiteResult(
        "stratification",
        worst <= 1.0,
        f"max deviation from exact proportionality {worst:.2f} samples (tol 1)",
        time.perf_counter() - t0,
    )


ALL_SUITES = (
    suite_gradient_check,
    suite_tangent_check,
    suite_ode_oracle,
    suite_residual_free,
    suite_recovery,
    suite_metric_oracles,
    suite_stratification,
)


def run_all_suites(seed: int = 1) -> list[SuiteResult]:
    return [suite(seed) for suite in ALL_SUITES]
