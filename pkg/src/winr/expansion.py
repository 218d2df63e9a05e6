"""Polynomial expansion of an INR over its first-layer atoms.

A network with polynomial hidden activations is, pointwise, a multivariate
polynomial in the atom values psi(W_t r + b_t).  This module computes those
coefficients constructively by composing layer polynomials, evaluates the
expansion independently of the network forward pass, and derives the
frequency-box bound implied by the expansion (each monomial's spectrum
lives in the Minkowski sum of its factors' supports).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

import numpy as np

from .model import INRModel
from .templates import eval_template_many

#: coefficients smaller than this are dropped during composition
PRUNE_TOL = 1e-14

#: refuse expansions with more candidate multi-indices than this
MAX_INDICES = 10**7


class UnsupportedActivationError(ValueError):
    """Expansion requires polynomial (or identity) hidden activations."""


class ExpansionSizeError(ValueError):
    """The multi-index set would exceed the expansion size guard."""


def enumerate_multiindices(f1: int, k: int) -> list[tuple[int, ...]]:
    """All ordered f1-tuples of nonnegative integers summing to k.

    Ordered with the leading entries largest first, matching the order in
    which monomials of (a_1 + ... + a_f1)^k are conventionally listed;
    size is C(k + f1 - 1, f1 - 1).
    """
    if f1 < 1 or k < 0:
        raise ValueError("need f1 >= 1 and k >= 0")
    count = comb(k + f1 - 1, f1 - 1)
    if count > MAX_INDICES:
        raise ExpansionSizeError(
            f"|Delta({f1},{k})| = {count} exceeds the {MAX_INDICES} guard")
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int):
        if slots == 1:
            out.append(prefix + (remaining,))
            return
        for head in range(remaining, -1, -1):
            rec(prefix + (head,), remaining - head, slots - 1)

    rec((), k, f1)
    return out


@dataclass
class PolynomialExpansion:
    """Map from multi-index over the F1 atoms to its complex coefficient."""

    f1: int
    coeffs: dict

    @property
    def max_order(self) -> int:
        return max((sum(ix) for ix in self.coeffs), default=0)

    def coefficient(self, index) -> complex:
        return self.coeffs.get(tuple(index), 0.0 + 0.0j)


Poly = dict  # tuple[int, ...] -> complex


def _poly_scale_add(target: Poly, poly: Poly, factor: complex) -> None:
    for ix, c in poly.items():
        target[ix] = target.get(ix, 0.0) + factor * c


def _poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ixa, ca in a.items():
        for ixb, cb in b.items():
            ix = tuple(i + j for i, j in zip(ixa, ixb))
            out[ix] = out.get(ix, 0.0) + ca * cb
    return {ix: c for ix, c in out.items() if abs(c) > PRUNE_TOL}


def _check_size_guard(model: INRModel) -> None:
    f1 = model.first.f1
    kmax = model.degree_bound()
    total = comb(kmax + f1, f1)   # sum over k <= kmax of |Delta(f1, k)|
    if total > MAX_INDICES:
        raise ExpansionSizeError(
            f"expansion up to order {kmax} over {f1} atoms has {total} "
            f"candidate multi-indices, above the {MAX_INDICES} guard")


def expand_polynomial(model: INRModel) -> PolynomialExpansion:
    """Symbolic expansion of the network output over first-layer atoms.

    Hidden activations must be polynomial (identity counts as degree 1);
    complex-sine layers are rejected.  The result satisfies, for every r,
    forward(model, r) == sum over multi-indices of
    coeff * prod_t psi(W_t r + b_t)^l_t.
    """
    for i, layer in enumerate(model.hidden):
        if layer.act.kind not in ("polynomial", "identity"):
            raise UnsupportedActivationError(
                f"hidden layer {i} uses {layer.act.kind!r}; expansion "
                f"requires polynomial activations")
    _check_size_guard(model)

    f1 = model.first.f1
    zero = tuple(0 for _ in range(f1))
    polys: list[Poly] = []
    for t in range(f1):
        unit = tuple(1 if i == t else 0 for i in range(f1))
        polys.append({unit: 1.0 + 0.0j})

    for layer in model.hidden:
        coeffs = ((0.0, 1.0) if layer.act.kind == "identity"
                  else layer.act.coeffs)
        new_polys: list[Poly] = []
        for i in range(layer.W.shape[0]):
            pre: Poly = {}
            for j, pj in enumerate(polys):
                wij = layer.W[i, j]
                if wij != 0:
                    _poly_scale_add(pre, pj, wij)
            if layer.b[i] != 0:
                pre[zero] = pre.get(zero, 0.0) + layer.b[i]
            acc: Poly = {}
            if coeffs[0] != 0:
                acc[zero] = complex(coeffs[0])
            power: Poly = {zero: 1.0 + 0.0j}
            for c in coeffs[1:]:
                power = _poly_mul(power, pre)
                if c != 0:
                    _poly_scale_add(acc, power, c)
            new_polys.append({ix: v for ix, v in acc.items()
                              if abs(v) > PRUNE_TOL})
        polys = new_polys

    result: Poly = {}
    for j, pj in enumerate(polys):
        wj = model.final_W[0, j]
        if wj != 0:
            _poly_scale_add(result, pj, wj)
    bias = model.final_b[0]
    if bias != 0:
        result[zero] = result.get(zero, 0.0) + bias
    result = {ix: c for ix, c in result.items() if abs(c) > PRUNE_TOL}
    return PolynomialExpansion(f1, result)


def eval_expansion(exp: PolynomialExpansion, model: INRModel,
                   points) -> np.ndarray:
    """Evaluate the expansion at points using only first-layer atom values."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[-1] != model.d:
        raise ValueError("point dimension mismatch")
    if exp.f1 != model.first.f1:
        raise ValueError("expansion was built for a different first layer")
    v = model.first.preactivations(pts)
    n, f1 = v.shape[0], v.shape[1]
    atoms = eval_template_many(model.first.template,
                               v.reshape(n * f1, model.d)).reshape(n, f1)

    max_pow = [0] * f1
    for ix in exp.coeffs:
        for t, p in enumerate(ix):
            max_pow[t] = max(max_pow[t], p)
    powers = []
    for t in range(f1):
        table = np.empty((max_pow[t] + 1, n), dtype=np.complex128)
        table[0] = 1.0
        for p in range(1, max_pow[t] + 1):
            table[p] = table[p - 1] * atoms[:, t]
        powers.append(table)

    out = np.zeros(n, dtype=np.complex128)
    for ix, c in exp.coeffs.items():
        term = np.full(n, c, dtype=np.complex128)
        for t, p in enumerate(ix):
            if p:
                term = term * powers[t][p]
        out += term
    return out


def eval_expansion_point(exp: PolynomialExpansion, model: INRModel,
                         r) -> complex:
    return complex(eval_expansion(exp, model, np.atleast_1d(r)[None, :]
                                  if np.ndim(r) else [[r]])[0])


@dataclass
class SupportBound:
    """Union of frequency boxes covering the expansion's effective spectrum.

    Each region is a per-axis (lo, hi) tuple; the order-zero region is the
    origin.  Regions come from the box arithmetic
    sum_t l_t * (W_t^T A): scalar multiples and Minkowski sums of boxes.
    """

    regions: list


def _transform_box(mat: np.ndarray, box) -> list[tuple[float, float]]:
    """Axis-aligned bounding box of mat^T applied to a box."""
    d = mat.shape[0]
    if d == 1:
        w = float(mat[0, 0])
        lo, hi = box[0]
        ends = sorted((w * lo, w * hi))
        return [(ends[0], ends[1])]
    corners = np.array([[box[0][i0], box[1][i1]]
                        for i0 in range(2) for i1 in range(2)])
    mapped = corners @ mat            # rows are corner^T W = (W^T corner)^T
    return [(float(mapped[:, i].min()), float(mapped[:, i].max()))
            for i in range(d)]


def effective_support_bound(model: INRModel, box) -> SupportBound:
    """All boxes sum_t l_t W_t^T A over multi-indices up to the degree bound.

    `box` is the template's effective frequency box: (lo, hi) for d=1 or a
    pair of per-axis (lo, hi) for d=2.  Regions are deduplicated.
    """
    for i, layer in enumerate(model.hidden):
        if layer.act.kind not in ("polynomial", "identity"):
            raise UnsupportedActivationError(
                f"hidden layer {i} uses {layer.act.kind!r}")
    _check_size_guard(model)
    d = model.d
    if d == 1 and np.ndim(box[0]) == 0:
        box = (tuple(box),)
    box = tuple(tuple(map(float, ax)) for ax in box)
    if len(box) != d:
        raise ValueError("box dimension mismatch")

    mats = model.first.weight_matrices()
    atom_boxes = [_transform_box(mats[t], box) for t in range(model.first.f1)]

    seen = {}
    kmax = model.degree_bound()
    for k in range(kmax + 1):
        for ix in enumerate_multiindices(model.first.f1, k):
            lo = np.zeros(d)
            hi = np.zeros(d)
            for t, l in enumerate(ix):
                if l:
                    for ax in range(d):
                        lo[ax] += l * atom_boxes[t][ax][0]
                        hi[ax] += l * atom_boxes[t][ax][1]
            region = tuple((float(a), float(b)) for a, b in zip(lo, hi))
            key = tuple((round(a, 12), round(b, 12)) for a, b in region)
            seen.setdefault(key, region)
    return SupportBound(list(seen.values()))


def expansion_to_json(exp: PolynomialExpansion) -> str:
    """JSON dump: list of [multi-index, re, im], largest coefficient first."""
    items = sorted(exp.coeffs.items(), key=lambda kv: -abs(kv[1]))
    return json.dumps([[list(ix), c.real, c.imag] for ix, c in items])
