"""Command line front-end: risk profiles, optimal allocations, SCR comparison and validation."""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import warnings

import numpy as np

from . import acceptance
from . import expansions as ex
from .config import (SCHEMA_VERSION, ConfigError, config_hash, load_config, mc_from_config, model_from_config,
                     phi_grid_from_config)
from .errors import DomainError, NumericError, TailSampleWarning
from .mc_oracle import SurplusSimulation, default_jobs, minimize_risk_mc
from .models import build_asset, claim_quantile, driver_from_skew, univariate_model
from .scr_modular import scr_comparison_report

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def fmt(x):
    """Locale-independent decimal with 12 significant digits; empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, str):
        return x
    return np.format_float_positional(float(x), precision=12, unique=False, fractional=False, trim="-")


def write_csv(path, header, rows, cfg, seed):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION} seed={seed} config_sha256={config_hash(cfg)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _effective_config(cfg, seed):
    cfg = copy.deepcopy(cfg)
    if seed is not None:
        cfg.setdefault("mc", {})["seed"] = seed
    return cfg


def _safe(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (DomainError, NotImplementedError):
        return float("nan")


def cmd_profile(cfg, out, seed, measures, jobs):
    model = model_from_config(cfg)
    mc = mc_from_config(cfg, seed, jobs)
    grid = phi_grid_from_config(cfg)
    sim = SurplusSimulation(model, mc)
    a = mc.alpha
    orders = cfg.get("orders", [2, 3, 4])
    rows = []
    for measure in measures:
        for phi in grid:
            phi_vec = np.atleast_1d(phi).astype(float)
            est = sim.estimate(phi_vec, measure)
            exps = []
            for order in (2, 3, 4):
                if order not in orders:
                    exps.append(float("nan"))
                elif model.n == 1:
                    fn = ex.var_expand_1d if measure == "var" else ex.es_expand_1d
                    exps.append(_safe(lambda: fn(model, phi_vec[0], a, order).value))
                elif order == 2:
                    fn = ex.var2_multi if measure == "var" else ex.es2_multi
                    exps.append(_safe(lambda: fn(model, phi_vec, a).value))
                else:
                    exps.append(float("nan"))
            cf = _safe(lambda: ex.cornish_fisher_var(model, phi_vec, a)) if measure == "var" else float("nan")
            rows.append([";".join(fmt(p) for p in phi_vec), measure, est.value, est.std_error, *exps, cf])
    path = os.path.join(out, "profile.csv")
    write_csv(path, ["phi", "measure", "mc_value", "mc_se", "exp2", "exp3", "exp4", "cornish_fisher"], rows,
              cfg, mc.seed)
    return path


def cmd_optimize(cfg, out, seed, jobs):
    mc = mc_from_config(cfg, seed, jobs)
    opt = cfg.get("optimize", {})
    sigmas = opt.get("sigmas", [0.1, 0.2, 0.3])
    skews = opt.get("skews", [0.0, -0.3])
    bounds = opt.get("bounds", [0.4, 1.6])
    base = model_from_config(cfg)
    if base.n != 1:
        raise ConfigError("optimize works on a single asset")
    claims = base.claims
    q = claim_quantile(claims, mc.alpha)
    rows = []
    for skew in skews:
        for sigma in sigmas:
            model = univariate_model(build_asset("lognormal", sigma, driver_from_skew(skew)), claims)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                formula = float(ex.phi_star_var3_1d(model, mc.alpha).phi_star[0])
            res = minimize_risk_mc(model, [bounds], mc, "var", refine="surface")
            rows.append([sigma, skew, formula / q, res.phi[0] / q, formula / q - res.phi[0] / q])
    path = os.path.join(out, "optimize.csv")
    write_csv(path, ["sigma", "mu3", "phi_star_formula", "phi_star_mc", "gap"], rows, cfg, mc.seed)
    return path


def cmd_scr(cfg, out, seed, jobs):
    model = model_from_config(cfg)
    mc = mc_from_config(cfg, seed, jobs)
    grid = phi_grid_from_config(cfg, default=(0.0, 2.0, 41))
    opts = cfg.get("scr", {})
    rep = scr_comparison_report(model, grid, mc, opts.get("phi_star"), opts.get("understate_threshold", 0.10),
                                opts.get("literal_mismatch", False))
    path = os.path.join(out, "scr.csv")
    rows = zip(rep.phi_grid, rep.scr_integrated, rep.scr_integrated_se, rep.scr_modular_enp, rep.scr_modular_rp)
    write_csv(path, ["phi", "scr_integrated", "scr_integrated_se", "scr_enp", "scr_rp"], rows, cfg, mc.seed)
    summary = {"phi_star": rep.phi_star, "scr_L": rep.scr_L, "scr_L_unnormalized": rep.scale,
               "enp_max_rel_gap": rep.enp_max_rel_gap, "rp_understatement_region": rep.understatement_region}
    with open(os.path.join(out, "scr_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_validate(cfg, out, seed, jobs):
    spec = cfg.get("validate", {})
    params = {}
    if "n_samples" in spec:
        params["n_samples"] = spec["n_samples"]
    if seed is not None:
        params["seed"] = seed
    if jobs is not None:
        os.environ["STATICHEDGE_JOBS"] = str(jobs)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TailSampleWarning)
        results = acceptance.run_all(spec.get("checks"), spec.get("overrides"), **params)
    lines = [r.line() for r in results]
    tail = {str(w.message) for w in caught if issubclass(w.category, TailSampleWarning)}
    lines += [f"[WARN] {msg}" for msg in sorted(tail)]
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if out:
        with open(os.path.join(out, "validate.txt"), "w", encoding="utf-8") as fh:
            fh.write(report)
    return all(r.passed for r in results)


def build_parser():
    p = argparse.ArgumentParser(prog="statichedge", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_text in (("profile", "risk profile phi -> rho[S(phi)] with MC and expansions"),
                            ("optimize", "third-order formula vs MC minimizer over (sigma, mu3) grids"),
                            ("scr", "integrated vs modular SCR comparison"),
                            ("validate", "run the acceptance checks")):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="scenario JSON file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the MC seed")
        sp.add_argument("--measure", choices=["var", "es"], default=None, help="restrict profile to one measure")
        sp.add_argument("--jobs", type=int, default=None,
                        help="sampling threads (default $STATICHEDGE_JOBS or CPU count)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(load_config(args.config), args.seed)
        os.makedirs(args.out, exist_ok=True)
        jobs = args.jobs or default_jobs()
        if args.command == "profile":
            measures = [args.measure] if args.measure else cfg.get("measures", ["var", "es"])
            print(cmd_profile(cfg, args.out, args.seed, measures, jobs))
        elif args.command == "optimize":
            print(cmd_optimize(cfg, args.out, args.seed, jobs))
        elif args.command == "scr":
            print(cmd_scr(cfg, args.out, args.seed, jobs))
        else:
            return EXIT_OK if cmd_validate(cfg, args.out, args.seed, args.jobs) else EXIT_VALIDATION
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
