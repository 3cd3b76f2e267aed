"""Command-line interface.

``rom run CONFIG`` drives the full pipeline (model -> spectral frame ->
parametrisation -> realification -> optional continuation) from a TOML or
JSON config file, writing a versioned ROM bundle, CSV curves, and a run
manifest into the output directory.  ``rom export-model`` writes a built-in
model recipe to disk in the exchange format (Matrix Market matrices plus
1-based text tensors).

Exit codes: 0 success, 1 analysis/validation error, 2 missing input file.
The environment variable ``MANROM_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from ._kernels import using_numba
from .models import RECIPES, build_model
from .parametrise import parametrise
from .realify import oscillator_form, polar_single_mode, realify
from .romdyn import ReducedODE, hbm_backbone, hbm_frf, multiple_scales
from .spectral import spectral_frame
from .tensors import ModelError, load_model, save_model

log = logging.getLogger("manrom")

DEFAULT_TOLS = {
    "resonance_tol": 1e-3,
    "cond_limit": 1e12,
    "sym_rtol": 1e-10,
    "classical_rtol": 1e-8,
    "imag_rtol": 1e-12,
    "newton_tol": 1e-10,
    "nonclassical": "error",
}


def _load_config(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _get_model(cfg):
    mcfg = cfg.get("model", {})
    if "path" in mcfg:
        return load_model(mcfg["path"],
                          sym_rtol=cfg["tolerances"]["sym_rtol"])
    if "name" in mcfg:
        return build_model(mcfg["name"], mcfg.get("params", {}))
    raise ValueError("config [model] needs either 'name' or 'path'")


def _run_continuation(cfg, model, rpar_damped, frame_args, out, manifest):
    ccfg = cfg.get("continuation")
    if not ccfg:
        return
    kind = ccfg.get("kind", "backbone")
    H = int(ccfg.get("H", 7))
    tol = cfg["tolerances"]["newton_tol"]
    if kind == "backbone":
        rpar = rpar_damped
        if np.abs(rpar.frame.xi).max() > 1e-12:
            log.info("re-parametrising the conservative system for the "
                     "backbone (damping removed before the expansion)")
            cons = model.without_damping()
            frame = spectral_frame(cons, **frame_args)
            par = parametrise(cons, frame, style=rpar.style,
                              order=rpar.order,
                              resonance_tol=cfg["tolerances"]
                              ["resonance_tol"],
                              cond_limit=cfg["tolerances"]["cond_limit"])
            rpar = realify(par, imag_rtol=cfg["tolerances"]["imag_rtol"])
            manifest["backbone_reparametrised_conservative"] = True
        rho_max = float(ccfg.get("rho_max", 0.1))
        n_pts = int(ccfg.get("n_points", 30))
        rho0 = float(ccfg.get("rho_min", rho_max / n_pts))
        grid = np.linspace(rho0, rho_max, n_pts)
        curve = hbm_backbone(rpar, grid, H=H, tol=tol)
        fn = os.path.join(out, "backbone.csv")
    elif kind == "frf":
        ode = ReducedODE(rpar_damped, kappa=float(ccfg.get("kappa", 0.0)),
                         forced_master=int(ccfg.get("forced_master", 1)) - 1)
        om = ccfg.get("omega_range")
        if om is None:
            w1 = float(rpar_damped.frame.omega[0])
            om = [0.8 * w1, 1.3 * w1]
        curve = hbm_frf(ode, om, H=H, tol=tol,
                        amp_cap=ccfg.get("amp_cap"),
                        max_points=int(ccfg.get("max_points", 2000)),
                        stability=bool(ccfg.get("stability", True)))
        fn = os.path.join(out, "frf.csv")
    else:
        raise ValueError(f"unknown continuation kind {kind!r}")
    curve.to_csv(fn)
    manifest["outputs"].append(os.path.basename(fn))
    manifest["continuation"] = {"kind": kind, "H": H,
                                "n_points": int(curve.omega.size)}
    log.info("wrote %s (%d points)", fn, curve.omega.size)


def cmd_run(args):
    cfg = _load_config(args.config)
    tols = dict(DEFAULT_TOLS)
    tols.update(cfg.get("tolerances", {}))
    cfg["tolerances"] = tols

    red = cfg.get("reduction", {})
    style = args.style or red.get("style", "rnf")
    order = args.order or int(red.get("order", 3))
    if args.masters:
        masters = [int(s) for s in args.masters.split(",")]
    else:
        masters = list(red.get("masters", [1]))
    out = args.out or cfg.get("output", {}).get("dir", "rom_out")
    threads = args.threads or int(red.get("threads", 1))

    t_start = time.perf_counter()
    model = _get_model(cfg)
    os.makedirs(out, exist_ok=True)
    frame_args = dict(masters=[m - 1 for m in masters],
                      n_compute=red.get("n_compute"),
                      classical_rtol=tols["classical_rtol"],
                      nonclassical=tols["nonclassical"])
    frame = spectral_frame(model, **frame_args)
    t_frame = time.perf_counter()
    par = parametrise(model, frame, style=style, order=order,
                      resonance_tol=tols["resonance_tol"],
                      cond_limit=tols["cond_limit"], threads=threads)
    t_par = time.perf_counter()
    rpar = realify(par, imag_rtol=tols["imag_rtol"])
    t_real = time.perf_counter()

    par.to_npz(os.path.join(out, "manifold.npz"))
    rpar.to_npz(os.path.join(out, "realrom.npz"))
    manifest = {
        "package": "manrom",
        "version": __version__,
        "config_file": os.path.abspath(args.config),
        "model": model.name,
        "ndof": model.ndof,
        "style": style,
        "order": order,
        "masters": masters,
        "master_frequencies": [float(w) for w in frame.omega],
        "master_damping": [float(x) for x in frame.xi],
        "tolerances": tols,
        "threads": threads,
        "numba": bool(using_numba),
        "solve_counts": {str(k): v for k, v in par.solve_counts.items()},
        "order_stats": par.stats,
        "imag_residue": rpar.imag_residue,
        "outputs": ["manifold.npz", "realrom.npz"],
        "timings_s": {
            "spectral": t_frame - t_start,
            "parametrise": t_par - t_frame,
            "realify": t_real - t_par,
        },
    }
    _run_continuation(cfg, model, rpar, frame_args, out, manifest)
    manifest["timings_s"]["total"] = time.perf_counter() - t_start
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    n_terms = rpar.exps.shape[0]
    print(f"{model.name}: style={style} order={order} "
          f"masters={masters} -> {n_terms} monomials, "
          f"solves per order {par.solve_counts}")
    print(f"outputs in {out}/: " + ", ".join(manifest["outputs"]
                                             + ["manifest.json"]))
    return 0


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_export_model(args):
    params = {}
    for item in args.set or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        params[key] = _parse_value(val)
    model = build_model(args.model, params)
    save_model(model, args.out)
    print(f"wrote {args.model} (N={model.ndof}, G nnz={model.G.nnz}, "
          f"H nnz={model.H.nnz}) to {args.out}/")
    return 0


def make_parser():
    ap = argparse.ArgumentParser(
        prog="rom",
        description="Invariant-manifold reduced-order models for "
                    "geometrically nonlinear structures")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a reduction pipeline from a "
                                     "TOML/JSON config")
    run.add_argument("config", help="config file (.toml or .json)")
    run.add_argument("--style", choices=["graph", "cnf", "rnf", "frnf"],
                     help="override the parametrisation style")
    run.add_argument("--order", type=int, help="override expansion order")
    run.add_argument("--masters",
                     help="override master modes, e.g. --masters 1,3")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--threads", type=int,
                     help="thread count for the homological solves")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("export-model",
                         help="write a built-in model to disk")
    exp.add_argument("--model", required=True, choices=sorted(RECIPES))
    exp.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="model parameter override (repeatable)")
    exp.add_argument("--out", required=True, help="output directory")
    exp.set_defaults(func=cmd_export_model)
    return ap


def main(argv=None):
    logging.basicConfig(
        level=os.environ.get("MANROM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc}", file=sys.stderr)
        return 2
    except (ModelError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
