"""The INR architecture: a template first layer followed by a complex MLP.

A model maps real coordinates r to a complex value through

    z0_t = psi(W_t r + b_t)                 t = 1..F1, W_t real d x d
    z_l  = rho_l(W_l z_{l-1} + b_l)         complex affine + analytic rho
    f(r) = W_L z_{L-1} + b_L                final layer affine, width 1

First-layer weights come in three flavors: free d x d matrices, positive
diagonal scales stored as log-parameters (so optimization can never leave
the positive cone), and frozen identity weights where only the abscissa
vary.  The split architecture pairs a linear gaussian-atom network with a
deeper Gabor-atom network and sums their outputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .numerics import Grid1D, Grid2D
from .templates import TemplateSpec, eval_template_many

MODEL_SCHEMA = "winr-model-v1"


@dataclass(frozen=True)
class ActivationSpec:
    """Elementwise activation: polynomial, complex sine, or identity."""

    kind: str
    coeffs: tuple = ()          # ascending, complex; polynomial only
    scale: float = 1.0          # complex sine only

    @staticmethod
    def polynomial(coeffs) -> "ActivationSpec":
        c = tuple(complex(v) for v in coeffs)
        if len(c) < 2 or c[-1] == 0:
            raise ValueError("polynomial needs degree >= 1 with nonzero "
                             "leading coefficient")
        return ActivationSpec("polynomial", coeffs=c)

    @staticmethod
    def complex_sine(scale: float = 1.0) -> "ActivationSpec":
        return ActivationSpec("complex_sine", scale=scale)

    @staticmethod
    def identity() -> "ActivationSpec":
        return ActivationSpec("identity")

    @property
    def degree(self) -> int:
        if self.kind == "polynomial":
            return len(self.coeffs) - 1
        if self.kind == "identity":
            return 1
        raise ValueError(f"{self.kind} activation has no polynomial degree")

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return z
        if self.kind == "complex_sine":
            return np.sin(self.scale * z)
        out = np.full_like(z, self.coeffs[-1])
        for c in self.coeffs[-2::-1]:
            out = out * z + c
        return out

    def derivative(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.ones_like(z)
        if self.kind == "complex_sine":
            return self.scale * np.cos(self.scale * z)
        dcoeffs = [k * c for k, c in enumerate(self.coeffs)][1:]
        out = np.full_like(z, dcoeffs[-1])
        for c in dcoeffs[-2::-1]:
            out = out * z + c
        return out

    def value_and_derivative(self, z: np.ndarray):
        """Both at once, sharing the power table (training hot path)."""
        if self.kind == "identity":
            return z, np.ones_like(z)
        if self.kind == "complex_sine":
            return np.sin(self.scale * z), self.scale * np.cos(self.scale * z)
        degree = len(self.coeffs) - 1
        powers = [None, z]
        for k in range(2, degree + 1):
            powers.append(powers[-1] * z)
        val = np.full_like(z, self.coeffs[0])
        der = np.full_like(z, self.coeffs[1])
        for k in range(1, degree + 1):
            val += self.coeffs[k] * powers[k]
            if k >= 2:
                der += (k * self.coeffs[k]) * powers[k - 1]
        return val, der


# The cubic used throughout the band-pass constructions.
def wave_cubic() -> ActivationSpec:
    """rho(z) = -z + z^2 - z^3 (no constant term, so no injected DC)."""
    return ActivationSpec.polynomial([0.0, -1.0, 1.0, -1.0])


@dataclass
class FirstLayer:
    """Template atoms psi(W_t r + b_t) with a weight-constraint flavor."""

    template: TemplateSpec
    constraint: str                     # 'free' | 'scale_only' | 'unit'
    b: np.ndarray                       # (F1, d) float64
    W: np.ndarray | None = None         # (F1, d, d) float64, free only
    log_scale: np.ndarray | None = None  # (F1, d) float64, scale_only only

    def __post_init__(self):
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        if self.b.ndim != 2:
            raise ValueError("b must have shape (F1, d)")
        d = self.b.shape[1]
        if d != self.template.d_in:
            raise ValueError("bias dimension does not match template d_in")
        if self.constraint == "free":
            self.W = np.ascontiguousarray(self.W, dtype=np.float64)
            if self.W.shape != (self.f1, d, d):
                raise ValueError("W must have shape (F1, d, d)")
            dets = np.abs(np.linalg.det(self.W))
            if np.any(dets <= 1e-12):
                t = int(np.argmin(dets))
                raise ValueError(f"first-layer matrix {t} is singular "
                                 f"(|det| = {dets[t]:.3e})")
        elif self.constraint == "scale_only":
            self.log_scale = np.ascontiguousarray(self.log_scale,
                                                  dtype=np.float64)
            if self.log_scale.shape != (self.f1, d):
                raise ValueError("log_scale must have shape (F1, d)")
        elif self.constraint != "unit":
            raise ValueError(f"unknown constraint {self.constraint!r}")

    @property
    def f1(self) -> int:
        return self.b.shape[0]

    @property
    def d(self) -> int:
        return self.b.shape[1]

    def scales(self) -> np.ndarray:
        if self.constraint != "scale_only":
            raise ValueError("scales() only applies to scale_only layers")
        return np.exp(self.log_scale)

    def weight_matrices(self) -> np.ndarray:
        """Dense (F1, d, d) weight matrices under the active constraint."""
        if self.constraint == "free":
            return self.W
        if self.constraint == "unit":
            return np.broadcast_to(np.eye(self.d), (self.f1, self.d, self.d))
        mats = np.zeros((self.f1, self.d, self.d))
        idx = np.arange(self.d)
        mats[:, idx, idx] = self.scales()
        return mats

    def atom_centers(self) -> np.ndarray:
        """Spatial center of each atom: the r solving W_t r + b_t = 0."""
        mats = self.weight_matrices()
        return -np.linalg.solve(mats, self.b[..., None])[..., 0]

    def preactivations(self, points: np.ndarray) -> np.ndarray:
        """v[n, t, :] = W_t points[n] + b_t, shape (N, F1, d)."""
        if self.constraint == "unit":
            return points[:, None, :] + self.b[None, :, :]
        if self.constraint == "scale_only":
            return points[:, None, :] * self.scales()[None, :, :] \
                + self.b[None, :, :]
        return np.einsum("tij,nj->nti", self.W, points) + self.b[None, :, :]

    def preactivation_axes(self, points: np.ndarray) -> list:
        """Per-coordinate contiguous (N, F1) arrays of W_t r + b_t.

        Elementwise broadcasting only (no BLAS), so results are bitwise
        independent of the batch size.
        """
        if self.constraint == "unit":
            return [points[:, m, None] + self.b[None, :, m]
                    for m in range(self.d)]
        if self.constraint == "scale_only":
            s = self.scales()
            return [points[:, m, None] * s[None, :, m] + self.b[None, :, m]
                    for m in range(self.d)]
        out = []
        for m in range(self.d):
            acc = points[:, 0, None] * self.W[None, :, m, 0]
            for j in range(1, self.d):
                acc += points[:, j, None] * self.W[None, :, m, j]
            acc += self.b[None, :, m]
            out.append(acc)
        return out


def first_layer_unit(template: TemplateSpec, b) -> FirstLayer:
    return FirstLayer(template, "unit", np.atleast_2d(b))


def first_layer_scale_only(template: TemplateSpec, scales, b) -> FirstLayer:
    scales = np.asarray(scales, dtype=np.float64)
    if np.any(scales <= 0):
        raise ValueError("scale_only weights must be positive")
    return FirstLayer(template, "scale_only", np.atleast_2d(b),
                      log_scale=np.log(np.atleast_2d(scales)))


def first_layer_free(template: TemplateSpec, W, b) -> FirstLayer:
    return FirstLayer(template, "free", np.atleast_2d(b),
                      W=np.asarray(W, dtype=np.float64))


@dataclass
class HiddenLayer:
    W: np.ndarray                       # (F_out, F_in) complex128
    b: np.ndarray                       # (F_out,) complex128
    act: ActivationSpec

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=np.complex128)
        self.b = np.ascontiguousarray(self.b, dtype=np.complex128)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ValueError("hidden layer shape mismatch")


@dataclass
class INRModel:
    first: FirstLayer
    hidden: list[HiddenLayer] = field(default_factory=list)
    final_W: np.ndarray = None          # (1, F_L) complex128
    final_b: np.ndarray = None          # (1,) complex128
    train_final_bias: bool = True

    def __post_init__(self):
        width = self.first.f1
        for i, layer in enumerate(self.hidden):
            if layer.W.shape[1] != width:
                raise ValueError(f"hidden layer {i} expects width "
                                 f"{layer.W.shape[1]}, got {width}")
            width = layer.W.shape[0]
        if self.final_W is None:
            self.final_W = np.zeros((1, width), dtype=np.complex128)
        self.final_W = np.ascontiguousarray(self.final_W,
                                            dtype=np.complex128)
        if self.final_W.shape != (1, width):
            raise ValueError("final layer width mismatch")
        if self.final_b is None:
            self.final_b = np.zeros(1, dtype=np.complex128)
        self.final_b = np.ascontiguousarray(
            np.atleast_1d(self.final_b), dtype=np.complex128)

    @property
    def d(self) -> int:
        return self.first.d

    @property
    def num_layers(self) -> int:
        """L of the architecture: hidden layers plus the final affine map."""
        return len(self.hidden) + 1

    @property
    def widths(self) -> tuple:
        return (self.first.f1,) + tuple(h.W.shape[0] for h in self.hidden)

    def degree_bound(self) -> int:
        """Max polynomial order of the expansion: product of hidden degrees."""
        k = 1
        for h in self.hidden:
            k *= h.act.degree
        return k


@dataclass
class ForwardTrace:
    """Intermediates of a batched forward pass, consumed by backprop."""

    points: np.ndarray                  # (N, d)
    v: np.ndarray                       # (N, F1, d) first-layer preacts
    z: list                             # z[l]: (N, F_{l+1}) post-activations
    pre: list                           # pre[l]: hidden pre-activations
    output: np.ndarray                  # (N,)


def _as_points(points, d: int) -> np.ndarray:
    if isinstance(points, Grid1D):
        return points.points()[:, None]
    if isinstance(points, Grid2D):
        return points.points()
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None] if d == 1 else pts[None, :]
    if pts.shape[-1] != d:
        raise ValueError(f"points have dimension {pts.shape[-1]}, model "
                         f"expects {d}")
    return pts


def forward_batch(model: INRModel, points, trace: bool = False):
    """Evaluate the model on many points (raster order for grids)."""
    from .templates import eval_axes
    pts = _as_points(points, model.d)
    axes = model.first.preactivation_axes(pts)
    z = np.asarray(eval_axes(model.first.template, axes),
                   dtype=np.complex128)
    v = np.stack(axes, axis=-1)
    zs, pres = [z], []
    for layer in model.hidden:
        pre = z @ layer.W.T + layer.b
        z = layer.act.apply(pre)
        pres.append(pre)
        zs.append(z)
    out = z @ model.final_W[0] + model.final_b[0]
    if trace:
        return out, ForwardTrace(pts, v, zs, pres, out)
    return out


def forward(model: INRModel, r, trace: bool = False):
    """Single-point evaluation of Eq.-style composition."""
    res = forward_batch(model, _as_points(r, model.d).reshape(1, -1),
                        trace=trace)
    if trace:
        return complex(res[0][0]), res[1]
    return complex(res[0])


def forward_real(model: INRModel, r) -> float:
    return forward(model, r).real


def forward_real_batch(model: INRModel, points) -> np.ndarray:
    return forward_batch(model, points).real


@dataclass
class SplitModel:
    """Sum of a low-pass scaling network and a band-pass Gabor network."""

    scaling: INRModel
    gabor: INRModel

    def __post_init__(self):
        if self.scaling.d != self.gabor.d:
            raise ValueError("split halves disagree on input dimension")

    @property
    def d(self) -> int:
        return self.scaling.d


def split_forward(split: SplitModel, r) -> complex:
    return forward(split.scaling, r) + forward(split.gabor, r)


def split_forward_batch(split: SplitModel, points) -> np.ndarray:
    return forward_batch(split.scaling, points) \
        + forward_batch(split.gabor, points)


# ---------------------------------------------------------------------------
# Serialization (schema winr-model-v1): row-major weights, re/im interleaved.
# json round-trips Python floats exactly, so loading reproduces every bit.
# ---------------------------------------------------------------------------

def _complex_to_list(arr: np.ndarray) -> list:
    return np.ascontiguousarray(arr).view(np.float64).ravel().tolist()


def _complex_from_list(data, shape) -> np.ndarray:
    flat = np.asarray(data, dtype=np.float64).view(np.complex128)
    return flat.reshape(shape).copy()


def _template_to_dict(spec: TemplateSpec) -> dict:
    return {"kind": spec.kind, "d_in": spec.d_in, "sigma": spec.sigma,
            "omega": spec.omega, "radius": spec.radius,
            "env_sigma": spec.env_sigma}


def _activation_to_dict(act: ActivationSpec) -> dict:
    out = {"kind": act.kind}
    if act.kind == "polynomial":
        out["coeffs"] = _complex_to_list(np.array(act.coeffs))
    elif act.kind == "complex_sine":
        out["scale"] = act.scale
    return out


def _activation_from_dict(doc: dict) -> ActivationSpec:
    if doc["kind"] == "polynomial":
        return ActivationSpec.polynomial(
            _complex_from_list(doc["coeffs"], (-1,)))
    if doc["kind"] == "complex_sine":
        return ActivationSpec.complex_sine(doc["scale"])
    return ActivationSpec.identity()


def model_to_dict(model) -> dict:
    if isinstance(model, SplitModel):
        return {"schema": MODEL_SCHEMA, "kind": "split",
                "scaling": model_to_dict(model.scaling),
                "gabor": model_to_dict(model.gabor)}
    first = model.first
    doc = {
        "schema": MODEL_SCHEMA,
        "kind": "inr",
        "template": _template_to_dict(first.template),
        "constraint": first.constraint,
        "widths": list(model.widths),
        "b0": first.b.ravel().tolist(),
        "hidden": [
            {"shape": list(h.W.shape), "w": _complex_to_list(h.W),
             "b": _complex_to_list(h.b), "act": _activation_to_dict(h.act)}
            for h in model.hidden
        ],
        "final_w": _complex_to_list(model.final_W),
        "final_b": _complex_to_list(model.final_b),
        "train_final_bias": model.train_final_bias,
    }
    if first.constraint == "free":
        doc["w0"] = first.W.ravel().tolist()
    elif first.constraint == "scale_only":
        doc["log_scale"] = first.log_scale.ravel().tolist()
    return doc


def model_from_dict(doc: dict):
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
    if doc["kind"] == "split":
        return SplitModel(model_from_dict(doc["scaling"]),
                          model_from_dict(doc["gabor"]))
    tdoc = doc["template"]
    template = TemplateSpec(tdoc["kind"], d_in=tdoc["d_in"],
                            sigma=tdoc["sigma"], omega=tdoc["omega"],
                            radius=tdoc["radius"],
                            env_sigma=tdoc["env_sigma"])
    f1 = doc["widths"][0]
    d = template.d_in
    b0 = np.asarray(doc["b0"], dtype=np.float64).reshape(f1, d)
    if doc["constraint"] == "free":
        first = FirstLayer(template, "free", b0,
                           W=np.asarray(doc["w0"]).reshape(f1, d, d))
    elif doc["constraint"] == "scale_only":
        first = FirstLayer(template, "scale_only", b0,
                           log_scale=np.asarray(
                               doc["log_scale"]).reshape(f1, d))
    else:
        first = FirstLayer(template, "unit", b0)
    hidden = [
        HiddenLayer(_complex_from_list(h["w"], tuple(h["shape"])),
                    _complex_from_list(h["b"], (h["shape"][0],)),
                    _activation_from_dict(h["act"]))
        for h in doc["hidden"]
    ]
    width = doc["widths"][-1] if doc["hidden"] else f1
    return INRModel(first, hidden,
                    final_W=_complex_from_list(doc["final_w"], (1, width)),
                    final_b=_complex_from_list(doc["final_b"], (1,)),
                    train_final_bias=doc.get("train_final_bias", True))


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
