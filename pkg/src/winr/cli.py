"""Command-line interface: reproducible experiments with file artifacts.

Subcommands: verify, fit1d, fit2d, init-bench, fig3, spectrum, gen.
Configuration comes from a JSON document (schema winr-config-v1) merged
over built-in defaults, with --seed/--out/--jobs/--suite flag overrides;
unknown keys are rejected.  Every run is deterministic given (config,
seed): reports echo the resolved configuration and its hash, floats are
formatted with 17 significant digits, and summation orders are fixed.

Exit codes: 0 success, 1 verification/experiment failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from . import experiments
from .model import save_model
from .numerics import Grid2D
from .signals import (
    Image2D,
    gen_image,
    gen_signal,
    load_pgm,
    save_csv,
    save_csv_signal,
    save_json_report,
    save_pgm,
)
from .spectral import band_energy_fraction, fig3_construction, measure_spectrum
from .templates import bump
from .training import TrainingDivergedError
from .init import wmm_to_csv

CONFIG_SCHEMA = "winr-config-v1"

DEFAULTS: dict = {
    "schema": CONFIG_SCHEMA,
    "experiment": None,
    "seed": 0,
    "out": None,
    "jobs": 1,
    "verify": {
        "suites": None,
    },
    "fit1d": {
        "signal": "bumps",
        "n": 2048,
        "k_per_point": 3,
        "steps": 1000,
        "lr": 5e-3,
        "scheme": "wmm",
    },
    "init_bench": {
        "signal": "bumps",
        "n": 1024,
        "k_values": [1, 3, 5, 7],
        "trials": 10,
        "steps": 1000,
        "lr": 5e-3,
    },
    "fit2d": {
        "image": "disk",
        "size": 128,
        "radius": 32.0,
        "pgm": None,
        "k_per_point": 2,
        "m_points": 48,
        "steps": 2000,
        "lr": 2e-3,
    },
    "spectrum": {
        "signal": "bumps",
        "n": 2048,
        "window": None,
        "window_radius": 0.25,
    },
    "gen": {
        "kind": "signal",
        "name": "bumps",
        "n": 2048,
        "size": 128,
        "radius": 32.0,
    },
}


class ConfigError(ValueError):
    pass


def _merge_section(defaults: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in override.items():
        if key not in defaults:
            raise ConfigError(f"unknown config key {path}{key!r}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge_section(defaults[key], value, f"{path}{key}.")
        else:
            out[key] = value
    return out


def resolve_config(file_config: dict | None, args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if file_config is not None:
        if file_config.get("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ConfigError(
                f"unsupported config schema {file_config.get('schema')!r}")
        cfg = _merge_section(cfg, file_config, "")
    if cfg["experiment"] not in (None, args.command):
        raise ConfigError(f"config is for experiment "
                          f"{cfg['experiment']!r}, not {args.command!r}")
    cfg["experiment"] = args.command
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if getattr(args, "suite", None):
        cfg["verify"]["suites"] = [args.suite]
    if cfg["out"] is None:
        cfg["out"] = os.environ.get("WINR_OUT", "winr-out")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        raise ConfigError("jobs must be a positive integer")
    return cfg


def _outdir(cfg: dict) -> str:
    path = os.path.join(cfg["out"], cfg["experiment"])
    os.makedirs(path, exist_ok=True)
    return path


def cmd_verify(cfg: dict) -> int:
    out = _outdir(cfg)
    results = experiments.run_verify(cfg["verify"]["suites"])
    all_passed = True
    for name, result in results.items():
        flag = "PASS" if result["passed"] else "FAIL"
        all_passed &= result["passed"]
        print(f"[{flag}] {name}")
    save_json_report(os.path.join(out, "report.json"),
                     {"results": results, "passed": all_passed},
                     config=cfg)
    return 0 if all_passed else 1


def cmd_fit1d(cfg: dict) -> int:
    out = _outdir(cfg)
    sub = cfg["fit1d"]
    try:
        res = experiments.run_fit1d(sub["signal"], sub["n"],
                                    sub["k_per_point"], sub["steps"],
                                    sub["lr"], cfg["seed"], sub["scheme"])
    except TrainingDivergedError as err:
        save_json_report(os.path.join(out, "report.json"),
                         {"error": str(err), "passed": False}, config=cfg)
        print(f"training aborted: {err}", file=sys.stderr)
        return 1
    signal = res["signal"]
    xs = signal.grid.points()
    save_model(res["model"], os.path.join(out, "model.json"))
    hist = res["history"]
    save_csv(os.path.join(out, "history.csv"), ("step", "loss"),
             [np.arange(hist.losses.size), hist.losses])
    spec = res["spectra"]
    order = np.argsort(spec["combined"].freqs[0])
    save_csv(os.path.join(out, "spectrum.csv"),
             ("freq", "combined", "scaling", "gabor"),
             [spec["combined"].freqs[0][order],
              spec["combined"].magnitude[order],
              spec["scaling"].magnitude[order],
              spec["gabor"].magnitude[order]])
    save_csv(os.path.join(out, "decomposition.csv"),
             ("x", "target", "combined", "scaling", "gabor", "linear"),
             [xs, signal.values,
              res["parts"]["combined"].real,
              res["parts"]["scaling"].real,
              res["parts"]["gabor"].real,
              res["linear_fit"]])
    wmm_to_csv(os.path.join(out, "wmm_points.csv"), res["wmm"])
    save_json_report(
        os.path.join(out, "report.json"),
        {"final_mse": hist.final_mse, "final_psnr": hist.final_psnr,
         "linear_baseline_mse": res["linear_mse"],
         "beats_linear_baseline": hist.final_mse < res["linear_mse"],
         "wmm_point_count": len(res["wmm"]), "seed": cfg["seed"]},
        config=cfg)
    return 0


def cmd_init_bench(cfg: dict) -> int:
    out = _outdir(cfg)
    sub = cfg["init_bench"]
    rows = experiments.run_init_bench(
        sub["signal"], sub["n"], tuple(sub["k_values"]), sub["trials"],
        sub["steps"], sub["lr"], cfg["seed"], cfg["jobs"])
    save_csv(os.path.join(out, "bench.csv"),
             ("k", "scheme", "trial", "mse"),
             [[r[0] for r in rows], [r[1] for r in rows],
              [r[2] for r in rows], np.array([r[3] for r in rows])])
    summary = experiments.summarize_bench(rows)
    save_json_report(os.path.join(out, "summary.json"),
                     {"cells": summary, "seed": cfg["seed"]}, config=cfg)
    return 0


def cmd_fit2d(cfg: dict) -> int:
    out = _outdir(cfg)
    sub = cfg["fit2d"]
    if sub["pgm"]:
        try:
            image = load_pgm(sub["pgm"])
        except (OSError, ValueError) as err:
            print(f"cannot read image {sub['pgm']!r}: {err}",
                  file=sys.stderr)
            return 2
    else:
        image = gen_image(sub["image"], sub["size"], radius=sub["radius"])
    try:
        results = experiments.run_fit2d(
            image, sub["k_per_point"], sub["m_points"], sub["steps"],
            sub["lr"], cfg["seed"], cfg["jobs"])
    except TrainingDivergedError as err:
        save_json_report(os.path.join(out, "report.json"),
                         {"error": str(err), "passed": False}, config=cfg)
        print(f"training aborted: {err}", file=sys.stderr)
        return 1
    summary = {"seed": cfg["seed"]}
    for scheme, res in results.items():
        save_csv(os.path.join(out, f"psnr_{scheme}.csv"),
                 ("step", "psnr"),
                 [np.arange(res["psnr_curve"].size), res["psnr_curve"]])
        grid = image.grid
        recon = Image2D(grid, np.clip(res["recon"], 0.0, 1.0))
        save_pgm(os.path.join(out, f"recon_{scheme}.pgm"), recon)
        err_img = Image2D(grid, np.clip(np.abs(res["recon"] - image.values),
                                        0.0, 1.0))
        save_pgm(os.path.join(out, f"error_{scheme}.pgm"), err_img)
        summary[f"{scheme}_final_psnr"] = res["final_psnr"]
    if {"canny", "random"} <= set(results):
        summary["canny_gain_db"] = (results["canny"]["final_psnr"]
                                    - results["random"]["final_psnr"])
    save_json_report(os.path.join(out, "report.json"), summary, config=cfg)
    return 0


def cmd_fig3(cfg: dict) -> int:
    out = _outdir(cfg)
    rep = fig3_construction()
    for tag, sr in (("pre", rep.pre), ("post", rep.post)):
        fx, fy = sr.freqs
        gx, gy = np.meshgrid(fx, fy)
        save_csv(os.path.join(out, f"spectrum_{tag}.csv"),
                 ("fx", "fy", "magnitude"),
                 [gx.ravel(), gy.ravel(), sr.magnitude.ravel()])
    near_origin = band_energy_fraction(rep.post, 0.0, 0.9 * rep.r_min)
    from .spectral import cone_contains, dilate_cone
    coords = rep.post.bin_freq_coords()
    energy = rep.post.magnitude.ravel() ** 2
    inside = np.zeros(coords.shape[0], dtype=bool)
    for cone in rep.cones:
        inside |= cone_contains(dilate_cone(cone, 1.25), coords)
    cone_fraction = float(energy[inside].sum() / energy.sum())
    save_json_report(
        os.path.join(out, "report.json"),
        {"r_min": rep.r_min,
         "near_origin_energy_fraction": near_origin,
         "dilated_cone_energy_fraction": cone_fraction,
         "cones": [{"center_angle": c.center_angle,
                    "half_angle": c.half_angle, "r_min": c.r_min}
                   for c in rep.cones]},
        config=cfg)
    return 0


def cmd_spectrum(cfg: dict) -> int:
    out = _outdir(cfg)
    sub = cfg["spectrum"]
    signal = gen_signal(sub["signal"], sub["n"])
    window = None
    if sub["window"] == "bump":
        window = bump(sub["window_radius"])
    elif sub["window"] is not None:
        raise ConfigError(f"unknown window {sub['window']!r}")
    rep = measure_spectrum(signal.values.astype(complex), signal.grid,
                           window=window)
    order = np.argsort(rep.freqs[0])
    save_csv(os.path.join(out, "spectrum.csv"), ("freq", "magnitude"),
             [rep.freqs[0][order], rep.magnitude[order]])
    save_json_report(os.path.join(out, "report.json"),
                     {"total_energy": rep.total_energy,
                      "window": sub["window"]}, config=cfg)
    return 0


def cmd_gen(cfg: dict) -> int:
    out = _outdir(cfg)
    sub = cfg["gen"]
    if sub["kind"] == "signal":
        signal = gen_signal(sub["name"], sub["n"])
        save_csv_signal(os.path.join(out, "signal.csv"),
                        signal.grid.points(), signal.values)
    elif sub["kind"] == "image":
        image = gen_image(sub["name"], sub["size"], radius=sub["radius"])
        save_pgm(os.path.join(out, "image.pgm"), image)
    else:
        raise ConfigError(f"gen.kind must be 'signal' or 'image', got "
                          f"{sub['kind']!r}")
    save_json_report(os.path.join(out, "report.json"), {"kind": sub["kind"]},
                     config=cfg)
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "fit1d": cmd_fit1d,
    "fit2d": cmd_fit2d,
    "init-bench": cmd_init_bench,
    "fig3": cmd_fig3,
    "spectrum": cmd_spectrum,
    "gen": cmd_gen,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="winr",
        description="complex-wavelet INR experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory root")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel independent trials")
        p.add_argument("--suite", default=None,
                       help="run a single verification suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    file_config = None
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_config = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            print(f"cannot read config {args.config!r}: {err}",
                  file=sys.stderr)
            return 2
    try:
        cfg = resolve_config(file_config, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    # config keys named with hyphens are awkward in JSON; map the command
    key = args.command.replace("-", "_")
    if key not in cfg and args.command not in COMMANDS:
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
