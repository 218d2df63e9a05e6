"""Experiment pipelines behind the CLI: model builders, benchmark loops,
and the verification suites.

Everything here is a pure function of its configuration and seed: seeds
are derived per trial with SeedSequence, summation orders are fixed, and
independent trials may run in worker processes without changing results.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import init as init_schemes
from .expansion import eval_expansion, expand_polynomial
from .model import (
    INRModel,
    SplitModel,
    first_layer_free,
    first_layer_unit,
    forward,
    forward_batch,
    split_forward_batch,
    wave_cubic,
)
from .numerics import Grid1D, Grid2D
from .signals import Image2D, Signal1D, gen_image, gen_signal
from .spectral import (
    cone_energy_fraction,
    half_line,
    measure_spectrum,
    progressivity_check,
    weakly_conic,
)
from .templates import (
    MEYER_LO,
    bump,
    complex_sinusoid,
    gabor,
    gaussian,
    meyer,
    split_gabor,
    split_gaussian,
)
from .training import (
    TrainConfig,
    atoms_design,
    backward,
    fit_linear,
    gradient_check,
    mse_real_loss,
    train,
)
from .numerics import lstsq

#: hidden widths of the band-pass network in the 1D experiments
HIDDEN_1D = (32, 32)
#: hidden widths for images (downsized for the larger sample counts)
HIDDEN_2D = (16, 16)
#: scale-weight interval for image atoms (edge-resolving frequencies)
SCALE_RANGE_2D = (8.0, 24.0)
#: 1D training coordinates: the unit-domain signal is stretched to
#: [0, DOMAIN_SCALE_1D] so that scale-1 template atoms (envelope ~0.55)
#: are local relative to the signal's features, which is what makes atom
#: placement matter at all
DOMAIN_SCALE_1D = 32.0
#: gaussian atoms in the 1D scaling network (covering the wide domain)
SCALING_ATOMS_1D = 48


def _child_seeds(*entropy) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy)


def build_scaling_inr(n_atoms: int, seed: int, d: int = 1,
                      domain=(0.0, 1.0)) -> INRModel:
    """Linear low-pass network: unit-weight gaussian atoms on an even grid."""
    template = split_gaussian(d_in=d)
    if d == 1:
        centers = domain[0] + (domain[1] - domain[0]) \
            * (np.arange(n_atoms) + 0.5) / n_atoms
        b = -centers[:, None]
    else:
        side = int(round(np.sqrt(n_atoms)))
        ticks = (np.arange(side) + 0.5) / side
        xx, yy = np.meshgrid(ticks, ticks)
        b = -np.column_stack([xx.ravel(), yy.ravel()])
    rng = np.random.default_rng(seed)
    f1 = b.shape[0]
    bound = 1.0 / np.sqrt(f1)
    final_w = rng.uniform(-bound, bound, (1, f1)) \
        + 1j * rng.uniform(-bound, bound, (1, f1))
    return INRModel(first_layer_unit(template, b), [], final_W=final_w)


def build_gabor_inr(first_layer, hidden_widths: tuple, seed: int) -> INRModel:
    """Band-pass network: given first layer, cubic-activation MLP on top.

    The final bias stays frozen at zero; the scaling network owns the DC
    component of the split.
    """
    widths = (first_layer.f1,) + tuple(hidden_widths)
    hidden, final_w = init_schemes.random_mlp(widths, seed, wave_cubic())
    return INRModel(first_layer, hidden, final_W=final_w,
                    train_final_bias=False)


def rescale_signal(signal: Signal1D, scale: float = DOMAIN_SCALE_1D
                   ) -> Signal1D:
    """Same samples on a stretched coordinate axis [lo*scale, hi*scale)."""
    g = signal.grid
    return Signal1D(Grid1D(g.n, g.lo * scale, g.hi * scale), signal.values)


def build_split_1d(signal: Signal1D, scheme: str, k_per_point: int,
                   seed_entropy: tuple,
                   scaling_atoms: int = SCALING_ATOMS_1D,
                   wmm=None) -> tuple[SplitModel, object]:
    """Split model for a 1D signal under one initialization scheme.

    The signal is expected in training coordinates (see rescale_signal).
    The hidden/final draws share a seed across schemes, so the two schemes
    differ only in first-layer placement.  Returns (model, wmm_points).
    """
    if wmm is None:
        wmm = init_schemes.wmm_points_1d(init_schemes.cwt_1d(signal))
    ss = _child_seeds(*seed_entropy)
    seed_first, seed_mlp, seed_scaling = [
        int(s.generate_state(1)[0]) for s in ss.spawn(3)]
    m = len(wmm)
    f1 = k_per_point * max(m, 1)
    template = split_gabor()
    if scheme == "wmm":
        first = init_schemes.wmm_initialize(template, f1, wmm, k_per_point,
                                            seed_first,
                                            domain=(signal.grid.lo,
                                                    signal.grid.hi))
    elif scheme == "random":
        first = init_schemes.random_initialize(
            template, f1, (signal.grid.lo, signal.grid.hi), k_per_point,
            seed_first)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    gabor_net = build_gabor_inr(first, HIDDEN_1D, seed_mlp)
    scaling = build_scaling_inr(scaling_atoms, seed_scaling, d=1,
                                domain=(signal.grid.lo, signal.grid.hi))
    return SplitModel(scaling, gabor_net), wmm


def linear_baseline_mse(split: SplitModel, points, targets
                        ) -> tuple[float, np.ndarray]:
    """Best linear combination of ALL frozen first-layer atoms plus 1.

    This is the no-nonlinearity competitor: the gabor and scaling atoms of
    the trained model, fitted to the signal by least squares on the real
    part.  Returns (mse, fitted values).
    """
    a = np.hstack([
        atoms_design(split.gabor.first, points),
        atoms_design(split.scaling.first, points),
        np.ones((np.shape(targets)[0], 1), dtype=np.complex128),
    ])
    stacked = np.hstack([a.real, -a.imag])
    sol = lstsq(stacked, np.asarray(targets, dtype=np.complex128)).real
    half = a.shape[1]
    fitted = a.real @ sol[:half] - a.imag @ sol[half:]
    mse = float(np.mean((fitted - targets) ** 2))
    return mse, fitted


# ---------------------------------------------------------------------------
# init-bench: random vs. WMM placement over K in {1,3,5,7}, many trials
# ---------------------------------------------------------------------------

def _bench_trial(args) -> tuple:
    (name, n, k, scheme, trial, base_seed, steps, lr) = args
    signal = rescale_signal(gen_signal(name, n))
    model, _ = build_split_1d(signal, scheme, k,
                              (base_seed, k, trial))
    config = TrainConfig(steps=steps, lr=lr, seed=base_seed)
    history = train(model, signal.grid.points(), signal.values, config)
    return (k, scheme, trial, history.final_mse)


def run_init_bench(signal_name: str = "bumps", n: int = 1024,
                   k_values=(1, 3, 5, 7), trials: int = 10,
                   steps: int = 1000, lr: float = 5e-3, seed: int = 0,
                   jobs: int = 1) -> list[tuple]:
    """Rows (k, scheme, trial, final MSE) for both schemes, fixed order."""
    specs = [(signal_name, n, k, scheme, trial, seed, steps, lr)
             for k in k_values
             for scheme in ("random", "wmm")
             for trial in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_bench_trial, specs))
    else:
        rows = [_bench_trial(s) for s in specs]
    return rows


def summarize_bench(rows: list[tuple]) -> dict:
    cells: dict = {}
    for k, scheme, _, mse in rows:
        cells.setdefault(k, {}).setdefault(scheme, []).append(mse)
    summary = {}
    for k, schemes in sorted(cells.items()):
        entry = {}
        for scheme, mses in schemes.items():
            arr = np.array(mses)
            entry[scheme] = {"mean": float(arr.mean()),
                             "std": float(arr.std()),
                             "median": float(np.median(arr))}
        if {"wmm", "random"} <= set(entry):
            entry["wmm_to_random_median_ratio"] = (
                entry["wmm"]["median"] / entry["random"]["median"])
        summary[f"K={k}"] = entry
    return summary


# ---------------------------------------------------------------------------
# fit1d: train the split model, emit decomposition / spectra / baseline
# ---------------------------------------------------------------------------

def run_fit1d(signal_name: str = "bumps", n: int = 2048, k_per_point: int = 3,
              steps: int = 1000, lr: float = 5e-3, seed: int = 0,
              scheme: str = "wmm") -> dict:
    signal = rescale_signal(gen_signal(signal_name, n))
    model, wmm = build_split_1d(signal, scheme, k_per_point, (seed,))
    config = TrainConfig(steps=steps, lr=lr, seed=seed)
    pts = signal.grid.points()
    history = train(model, pts, signal.values, config)
    linear_mse, linear_fit = linear_baseline_mse(model, pts, signal.values)
    combined = split_forward_batch(model, signal.grid)
    parts = {
        "combined": combined,
        "scaling": forward_batch(model.scaling, signal.grid),
        "gabor": forward_batch(model.gabor, signal.grid),
    }
    spectra = {name: measure_spectrum(vals, signal.grid)
               for name, vals in parts.items()}
    return {
        "signal": signal,
        "model": model,
        "wmm": wmm,
        "history": history,
        "linear_mse": linear_mse,
        "linear_fit": linear_fit,
        "parts": parts,
        "spectra": spectra,
    }


# ---------------------------------------------------------------------------
# fit2d: random vs. Canny placement on an image
# ---------------------------------------------------------------------------

def build_split_2d(image: Image2D, scheme: str, k_per_point: int,
                   m_points: int, seed_entropy: tuple,
                   scaling_atoms: int = 36) -> SplitModel:
    mask, orientation = init_schemes.canny_edges(image)
    count = int(mask.sum())
    m = min(m_points, count) if count else 0
    ss = _child_seeds(*seed_entropy)
    seed_first, seed_mlp, seed_scaling = [
        int(s.generate_state(1)[0]) for s in ss.spawn(3)]
    template = split_gabor(d_in=2)
    f1 = k_per_point * max(m, 1)
    if scheme == "canny" and m > 0:
        pts = init_schemes.edge_points(mask, orientation, None, m)
        first = init_schemes.wmm_initialize(template, f1, pts, k_per_point,
                                            seed_first,
                                            scale_range=SCALE_RANGE_2D)
    else:
        if scheme == "canny":
            warnings.warn("no edges found; canny scheme falls back to "
                          "random placement")
        first = init_schemes.random_initialize(
            template, f1, ((0.0, 1.0), (0.0, 1.0)), k_per_point, seed_first,
            scale_range=SCALE_RANGE_2D)
    gabor_net = build_gabor_inr(first, HIDDEN_2D, seed_mlp)
    scaling = build_scaling_inr(scaling_atoms, seed_scaling, d=2)
    return SplitModel(scaling, gabor_net)


def _image_points(image: Image2D) -> np.ndarray:
    ny, nx = image.values.shape
    iy, ix = np.mgrid[0:ny, 0:nx]
    return np.column_stack([((ix + 0.5) / nx).ravel(),
                            ((iy + 0.5) / ny).ravel()])


def _fit2d_one(args) -> tuple:
    image_values, scheme, k_per_point, m_points, seed, steps, lr = args
    grid = Grid2D(image_values.shape[1], image_values.shape[0])
    image = Image2D(grid, image_values)
    model = build_split_2d(image, scheme, k_per_point, m_points, (seed,))
    pts = _image_points(image)
    targets = image.values.ravel()
    config = TrainConfig(steps=steps, lr=lr, seed=seed)
    history = train(model, pts, targets, config)
    recon = split_forward_batch(model, pts).real.reshape(image.values.shape)
    return scheme, history, recon


def run_fit2d(image: Image2D, k_per_point: int = 2, m_points: int = 48,
              steps: int = 2000, lr: float = 2e-3, seed: int = 0,
              jobs: int = 1, schemes=("random", "canny")) -> dict:
    specs = [(image.values, scheme, k_per_point, m_points, seed, steps, lr)
             for scheme in schemes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(specs))) as pool:
            results = list(pool.map(_fit2d_one, specs))
    else:
        results = [_fit2d_one(s) for s in specs]
    out = {}
    for scheme, history, recon in results:
        psnr_curve = -10.0 * np.log10(np.maximum(history.losses, 1e-300))
        out[scheme] = {"history": history, "recon": recon,
                       "psnr_curve": psnr_curve,
                       "final_psnr": history.final_psnr}
    return out


# ---------------------------------------------------------------------------
# verification suites (theorem-level checks with a tamper hook for tests)
# ---------------------------------------------------------------------------

def _random_poly_model(seed: int) -> INRModel:
    rng = np.random.default_rng(seed)
    f1 = int(rng.integers(1, 5))
    n_hidden = int(rng.integers(0, 3))          # L = n_hidden + 1 <= 3
    template = [gaussian(0.3 + rng.uniform(0, 0.7)),
                gabor(1.0 + rng.uniform(0, 1), 0.3 + rng.uniform(0, 0.5)),
                complex_sinusoid(1.0 + rng.uniform(0, 2))][
                    int(rng.integers(0, 3))]
    scales = rng.uniform(0.5, 2.0, (f1, 1))
    abscissa = rng.uniform(-0.5, 0.5, (f1, 1))
    from .model import first_layer_scale_only
    first = first_layer_scale_only(template, scales, abscissa)
    widths = [f1] + [int(rng.integers(2, 5)) for _ in range(n_hidden)]
    hidden = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        degree = int(rng.integers(1, 4))
        coeffs = 0.5 * (rng.normal(size=degree + 1)
                        + 1j * rng.normal(size=degree + 1))
        if abs(coeffs[-1]) < 0.1:
            coeffs[-1] = 0.5
        from .model import ActivationSpec, HiddenLayer
        hidden.append(HiddenLayer(
            0.5 * (rng.normal(size=(fan_out, fan_in))
                   + 1j * rng.normal(size=(fan_out, fan_in))),
            0.3 * (rng.normal(size=fan_out) + 1j * rng.normal(size=fan_out)),
            ActivationSpec.polynomial(coeffs)))
    final_w = 0.5 * (rng.normal(size=(1, widths[-1]))
                     + 1j * rng.normal(size=(1, widths[-1])))
    final_b = 0.3 * (rng.normal(size=1) + 1j * rng.normal(size=1))
    return INRModel(first, hidden, final_W=final_w, final_b=final_b)


def suite_expansion_equivalence(seeds=range(10), n_points: int = 256,
                                tamper: bool = False) -> dict:
    """Forward pass vs. polynomial expansion on random polynomial models."""
    worst = 0.0
    for seed in seeds:
        model = _random_poly_model(seed)
        exp = expand_polynomial(model)
        if tamper and exp.coeffs:
            key = next(iter(exp.coeffs))
            exp.coeffs[key] = exp.coeffs[key] + 0.1
        rng = np.random.default_rng(1000 + seed)
        pts = rng.uniform(-1.0, 1.0, (n_points, 1))
        ref = forward_batch(model, pts)
        got = eval_expansion(exp, model, pts)
        scale = max(float(np.max(np.abs(ref))), 1e-12)
        worst = max(worst, float(np.max(np.abs(ref - got)) / scale))
    return {"max_relative_error": worst, "passed": worst <= 1e-9,
            "tolerance": 1e-9}


def suite_support_locality(cases: int = 100) -> dict:
    """Bit-exact independence from atoms whose support excludes the point."""
    rng = np.random.default_rng(7)
    failures = 0
    for _ in range(cases):
        template = bump(0.4)
        f1 = int(rng.integers(2, 5))
        w = rng.uniform(0.8, 1.5, (f1, 1, 1))
        centers = np.concatenate([[0.0], rng.uniform(3.0, 6.0, f1 - 1)])
        b = -w[:, 0, :] * centers[:, None]
        first = first_layer_free(template, w, b)
        hidden, final_w = init_schemes.random_mlp(
            (f1, 3), int(rng.integers(0, 2**31)), wave_cubic())
        model = INRModel(first, hidden, final_W=final_w)
        r0 = float(rng.uniform(-0.1, 0.1))
        before = forward(model, r0)
        # perturb every atom whose (padded) support misses r0
        for t in range(1, f1):
            v = w[t, 0, 0] * r0 + b[t, 0]
            if abs(v) > template.radius * w[t, 0, 0] + 0.5:
                b[t, 0] += rng.uniform(-0.1, 0.1)
                w[t, 0, 0] += rng.uniform(-0.05, 0.05)
        after = forward(model, r0)
        if before != after:                     # bit-level comparison
            failures += 1
    return {"cases": cases, "failures": failures, "passed": failures == 0}


def suite_progressivity() -> dict:
    """Corollary-style energy containment for the standard templates."""
    results = {}
    grid = Grid1D(4096, 0.0, 1.0)
    # exact case: integer-scaled sinusoids stay on nonnegative bins
    from .model import first_layer_scale_only
    first = first_layer_scale_only(complex_sinusoid(1.0),
                                   np.array([[1.0], [2.0], [3.0]]),
                                   np.array([[0.0], [0.1], [0.2]]))
    hidden, final_w = init_schemes.random_mlp((3, 4), 5, wave_cubic())
    sin_model = INRModel(first, hidden, final_W=final_w)
    res = progressivity_check(sin_model, grid, half_line(+1), tol=1e-10)
    results["sinusoid"] = {"passed": res.passed,
                           "out_fraction": 1.0 - res.fraction}
    # essentially progressive: the split Gabor atoms
    rng = np.random.default_rng(11)
    first_g = first_layer_scale_only(split_gabor(),
                                     rng.uniform(1.0, 7.0, (4, 1)),
                                     -rng.uniform(0.2, 0.8, (4, 1)))
    hidden_g, final_g = init_schemes.random_mlp((4, 8), 6, wave_cubic())
    gab_model = INRModel(first_g, hidden_g, final_W=final_g)
    res_g = progressivity_check(gab_model, grid, half_line(+1), tol=1e-2)
    results["gabor"] = {"passed": res_g.passed,
                        "out_fraction": 1.0 - res_g.fraction}
    # weakly conic: unit-weight Meyer atoms on a wide grid
    wide = Grid1D(4096, -16.0, 16.0)
    first_m = first_layer_unit(meyer(), np.array([[0.0], [0.3], [-0.4]]))
    meyer_model = INRModel(first_m, [], final_W=np.array(
        [[1.0 + 0j, 0.7 + 0.2j, -0.4 + 0.1j]]))
    res_m = progressivity_check(
        meyer_model, wide, weakly_conic(half_line(+1), MEYER_LO), tol=1e-6)
    results["meyer"] = {"passed": res_m.passed,
                        "out_fraction": 1.0 - res_m.fraction}
    passed = all(v["passed"] for v in results.values())
    return {"results": results, "passed": passed}


def suite_gradients(threshold: float = 1e-5) -> dict:
    """Finite-difference agreement for every template kind and constraint."""
    rng = np.random.default_rng(21)
    report = {}
    worst = 0.0
    cases = [
        ("gaussian", gaussian(0.4), "scale_only"),
        ("gabor", split_gabor(), "scale_only"),
        ("sinusoid", complex_sinusoid(1.5), "free"),
        ("gaussian-unit", split_gaussian(), "unit"),
    ]
    for name, template, constraint in cases:
        f1 = 3
        abscissa = rng.uniform(-0.3, 0.3, (f1, 1))
        if constraint == "scale_only":
            from .model import first_layer_scale_only
            first = first_layer_scale_only(
                template, rng.uniform(0.8, 2.5, (f1, 1)), abscissa)
        elif constraint == "free":
            first = first_layer_free(
                template, rng.uniform(0.8, 2.0, (f1, 1, 1)), abscissa)
        else:
            first = first_layer_unit(template, abscissa)
        hidden, final_w = init_schemes.random_mlp(
            (f1, 4), int(rng.integers(0, 2**31)), wave_cubic())
        model = INRModel(first, hidden, final_W=final_w)
        pts = rng.uniform(-0.5, 0.5, (48, 1))
        targets = rng.normal(0.0, 1.0, 48)
        rep = gradient_check(model, pts, targets)
        worst_case = max(rep.values())
        report[name] = worst_case
        worst = max(worst, worst_case)
    return {"per_case": report, "max_relative_error": worst,
            "passed": worst <= threshold, "tolerance": threshold}


VERIFY_SUITES = {
    "expansion-equivalence": suite_expansion_equivalence,
    "support-locality": suite_support_locality,
    "progressivity": suite_progressivity,
    "gradients": suite_gradients,
}


def run_verify(suites=None, tamper_expansion: bool = False) -> dict:
    """Run the requested suites; returns {suite: result} with pass flags."""
    names = list(VERIFY_SUITES) if not suites else list(suites)
    results = {}
    for name in names:
        if name not in VERIFY_SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from "
                             f"{sorted(VERIFY_SUITES)}")
        if name == "expansion-equivalence":
            results[name] = suite_expansion_equivalence(
                tamper=tamper_expansion)
        else:
            results[name] = VERIFY_SUITES[name]()
    return results
