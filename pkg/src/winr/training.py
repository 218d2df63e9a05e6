"""Training: reverse-mode gradients, Adam, and the frozen-atom linear fit.

The loss is the mean squared error between the real part of the network
output and real targets (fitting the real part of a progressive network is
how real-valued signals are approximated); complex-target MSE is available
as a non-default option.  Gradients are exact reverse-mode derivatives with
respect to every free real parameter, with complex weights handled as
independent real/imaginary parts: for a holomorphic stage u = g(z) the
adjoint pulls back as conj(g'(z)) * a_u, and the (non-holomorphic) template
stage contributes Re(conj(a) * dpsi/dv) per input coordinate.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import (
    INRModel,
    SplitModel,
    _as_points,
    forward_batch,
    split_forward_batch,
)
from .numerics import lstsq
from .templates import eval_template_many, eval_value_grad_axes


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 1000
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    loss: str = "mse_real"

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.loss not in ("mse_real", "mse_complex"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class TrainHistory:
    losses: np.ndarray
    wall_time: float
    final_mse: float
    final_psnr: float


def parameter_views(model) -> list[tuple[str, np.ndarray]]:
    """Named float64 views of every trainable array (in-place updatable).

    Complex arrays appear through their interleaved re/im float views, so
    one real optimizer step updates the underlying complex storage.
    """
    if isinstance(model, SplitModel):
        return (
            [("scaling." + n, a) for n, a in parameter_views(model.scaling)]
            + [("gabor." + n, a) for n, a in parameter_views(model.gabor)]
        )
    first = model.first
    views: list[tuple[str, np.ndarray]] = [("first.b", first.b)]
    if first.constraint == "free":
        views.append(("first.W", first.W))
    elif first.constraint == "scale_only":
        views.append(("first.log_scale", first.log_scale))
    for i, layer in enumerate(model.hidden):
        views.append((f"hidden{i}.W", layer.W.view(np.float64)))
        views.append((f"hidden{i}.b", layer.b.view(np.float64)))
    views.append(("final.W", model.final_W.view(np.float64)))
    if model.train_final_bias:
        views.append(("final.b", model.final_b.view(np.float64)))
    return views


def _forward_cached(model: INRModel, pts: np.ndarray):
    """Forward pass keeping template gradients and layer intermediates."""
    first = model.first
    axes = first.preactivation_axes(pts)
    z, tgrads = eval_value_grad_axes(first.template, axes)
    zs, ders = [z], []
    for layer in model.hidden:
        pre = z @ layer.W.T + layer.b
        z, der = layer.act.value_and_derivative(pre)
        ders.append(der)
        zs.append(z)
    out = z @ model.final_W[0] + model.final_b[0]
    return out, (tgrads, zs, ders)


def _backprop_single(model: INRModel, pts: np.ndarray, cache,
                     a_f: np.ndarray) -> dict:
    """Gradients of one network given its forward cache and output adjoint."""
    first = model.first
    tgrads, zs, ders = cache
    grads: dict = {}
    grads["final.W"] = (a_f @ np.conj(zs[-1]))[None, :].view(np.float64)
    if model.train_final_bias:
        grads["final.b"] = np.atleast_1d(a_f.sum()).view(np.float64)
    a_z = a_f[:, None] * np.conj(model.final_W[0])[None, :]

    for i in range(len(model.hidden) - 1, -1, -1):
        layer = model.hidden[i]
        a_pre = np.conj(ders[i]) * a_z
        grads[f"hidden{i}.W"] = (a_pre.T @ np.conj(zs[i])).view(np.float64)
        grads[f"hidden{i}.b"] = a_pre.sum(axis=0).view(np.float64)
        a_z = a_pre @ np.conj(layer.W)

    # template stage: dL/dv per coordinate, then to (W, b) under constraint
    conj_az = np.conj(a_z)
    dvs = []                                        # per-axis (N, F1) real
    for m in range(model.d):
        g = tgrads[m]
        if first.template.kind in ("bump", "meyer"):
            bad = ~np.isfinite(g)
            if np.any(bad):
                warnings.warn(f"skipping {int(bad.sum())} samples with "
                              f"non-differentiable template values")
                g = np.where(bad, 0.0, g)
        dvs.append((conj_az * g).real)
    grads["first.b"] = np.stack([dv.sum(axis=0) for dv in dvs], axis=-1)
    if first.constraint == "free":
        grads["first.W"] = np.stack(
            [dv.T @ pts for dv in dvs], axis=1)     # (F1, d, d)
    elif first.constraint == "scale_only":
        grads["first.log_scale"] = np.stack(
            [dvs[m].T @ pts[:, m] for m in range(model.d)],
            axis=-1) * first.scales()
    return grads


def _loss_and_adjoint(out: np.ndarray, targets: np.ndarray,
                      loss_kind: str) -> tuple[float, np.ndarray]:
    n = out.shape[0]
    if loss_kind == "mse_real":
        res = out.real - targets
        return float(np.mean(res * res)), (2.0 / n) * res.astype(
            np.complex128)
    res = out - targets
    return float(np.mean(np.abs(res) ** 2)), (2.0 / n) * res


def mse_real_loss(model, points, targets) -> float:
    """Mean over samples of (Re f(r) - target)^2."""
    pts = _as_points(points, model.d)
    y = np.asarray(targets, dtype=np.float64)
    if pts.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError("points and targets must have equal nonzero length")
    if isinstance(model, SplitModel):
        out = split_forward_batch(model, pts)
    else:
        out = forward_batch(model, pts)
    return float(np.mean((out.real - y) ** 2))


def backward(model, points, targets,
             loss_kind: str = "mse_real") -> tuple[float, dict]:
    """Loss and exact gradients for every parameter view of the model."""
    pts = _as_points(points, model.d)
    y = np.asarray(targets)
    if pts.shape[0] != y.shape[0] or y.shape[0] < 1:
        raise ValueError("points and targets must have equal nonzero length")
    if isinstance(model, SplitModel):
        # both halves see the adjoint of the summed output
        out_s, cache_s = _forward_cached(model.scaling, pts)
        out_g, cache_g = _forward_cached(model.gabor, pts)
        loss, a_f = _loss_and_adjoint(out_s + out_g, y, loss_kind)
        g_s = _backprop_single(model.scaling, pts, cache_s, a_f)
        g_g = _backprop_single(model.gabor, pts, cache_g, a_f)
        grads = {("scaling." + k): g for k, g in g_s.items()}
        grads.update({("gabor." + k): g for k, g in g_g.items()})
        return loss, grads
    out, cache = _forward_cached(model, pts)
    loss, a_f = _loss_and_adjoint(out, y, loss_kind)
    return loss, _backprop_single(model, pts, cache, a_f)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(views: list, grads: dict, state: AdamState,
              config: TrainConfig) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    bc1 = 1.0 - config.beta1 ** state.t
    bc2 = 1.0 - config.beta2 ** state.t
    for name, param in views:
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        m = state.m[name]
        v = state.v[name]
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * (g * g)
        param -= config.lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


def train(model, points, targets, config: TrainConfig) -> TrainHistory:
    """Full-batch Adam for config.steps; the model is mutated in place."""
    pts = _as_points(points, model.d)
    y = np.asarray(targets, dtype=np.float64)
    if y.shape[0] != pts.shape[0] or y.shape[0] < 1:
        raise ValueError("dataset is empty or mismatched")
    views = parameter_views(model)
    state = AdamState()
    losses = np.empty(config.steps)
    start = time.perf_counter()
    for step in range(config.steps):
        loss, grads = backward(model, pts, y, config.loss)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: {loss}")
        losses[step] = loss
        adam_step(views, grads, state, config)
        for name, param in views:
            if name.endswith("first.log_scale"):
                assert np.all(np.isfinite(param)), \
                    f"scale parameterization left the positive cone: {name}"
    wall = time.perf_counter() - start
    final_mse = mse_real_loss(model, pts, y)
    psnr = float(-10.0 * np.log10(final_mse)) if final_mse > 0 else np.inf
    return TrainHistory(losses, wall, final_mse, psnr)


def atoms_design(first_layer, points) -> np.ndarray:
    """(N, F1) complex matrix of atom values on the sample points."""
    pts = _as_points(points, first_layer.d)
    v = first_layer.preactivations(pts)
    n, f1 = v.shape[0], v.shape[1]
    return eval_template_many(first_layer.template,
                              v.reshape(n * f1, first_layer.d)
                              ).reshape(n, f1)


def fit_linear(first_layer, points, targets):
    """Optimal linear combination of frozen first-layer atoms.

    Minimizes ||Re(A c) - y||^2 over complex coefficients c by solving the
    equivalent real system [Re A | -Im A] through the QR least-squares path.
    Returns (coefficients, fitted real values).
    """
    y = np.asarray(targets, dtype=np.float64)
    a = atoms_design(first_layer, points)
    stacked = np.hstack([a.real, -a.imag])
    sol = lstsq(stacked, y.astype(np.complex128)).real
    f1 = a.shape[1]
    coeffs = sol[:f1] + 1j * sol[f1:]
    fitted = a.real @ sol[:f1] - a.imag @ sol[f1:]
    return coeffs, fitted


def gradient_check(model, points, targets, step: float = 1e-6,
                   active_tol: float = 1e-8) -> dict:
    """Central-finite-difference validation of backward().

    Returns per-parameter-group max relative error over coordinates whose
    analytic gradient exceeds active_tol.
    """
    pts = _as_points(points, model.d)
    y = np.asarray(targets, dtype=np.float64)
    _, grads = backward(model, pts, y)
    report = {}
    for name, param in parameter_views(model):
        g = grads[name]
        flat = param.reshape(-1)
        gflat = g.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            if abs(gflat[i]) <= active_tol:
                continue
            orig = flat[i]
            flat[i] = orig + step
            up = mse_real_loss(model, pts, y)
            flat[i] = orig - step
            dn = mse_real_loss(model, pts, y)
            flat[i] = orig
            fd = (up - dn) / (2.0 * step)
            worst = max(worst, abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i])))
        report[name] = worst
    return report
