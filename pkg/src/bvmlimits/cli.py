"""Config-driven experiment runner.

Configuration lives in a TOML document (JSON is accepted too); a run is fully
determined by the config plus a seed.  Outputs are plain CSV/JSON files in the
chosen directory, listed with checksums in ``manifest.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import classify, local_quadratic
from .diagnostics import (agreement_stats, credible_interval, delta0_numeric,
                          region_functional, region_weights, tv_bound, tv_quadrature_1d)
from .exceptions import BvmLimitsError, ConfigError
from .families import PoissonGLM, PowerLawPrior, make_prior
from .limitdist import gamma_logpdf, gamma_quantile
from .mcmc import ChainConfig, ChainOutput, run_chain, tune_step_sizes
from .spect import (SpectGeometry, SpectInstance, SpectPosterior, build_system_matrix,
                    default_prior, disk_phantom, map_estimate, plugin_approx)

_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": ["poisson", "binomial", "spect"]},
        "seed": {"type": "integer"},
        "poisson": {
            "type": "object",
            "properties": {
                "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "ns": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "bound_sigmas": {"type": "array", "items": {"type": "number"}},
                "bound_c1": {"type": "number"},
            },
        },
        "binomial": {
            "type": "object",
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "omega": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "ns": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "beta": {"type": "number"},
            },
        },
        "spect": {
            "type": "object",
            "properties": {
                "geometry": {"type": "object"},
                "phantom": {"type": "object"},
                "prior": {"type": "object"},
                "map": {"type": "object"},
                "plugin": {"type": "object"},
                "mcmc": {"type": "object"},
                "regions": {"type": "object"},
            },
        },
    },
}

PRESETS = {
    "poisson-example": {
        "experiment": "poisson",
        "seed": 0,
        "poisson": {"alphas": [0.5, 0.05], "ns": [1, 10, 100], "beta": 0.05,
                    "bound_sigmas": [0.2, 0.1, 0.05], "bound_c1": 3.0},
    },
    "binomial-limit": {
        "experiment": "binomial",
        "seed": 0,
        "binomial": {"alpha": 1.0, "omega": 0.5, "ns": [100, 1000, 10000], "beta": 0.1},
    },
    "spect-desk": {
        "experiment": "spect",
        "seed": 20240601,
        "spect": {
            "geometry": {"rows": 16, "cols": 16, "n_angles": 32, "n_bins": 24,
                         "exposure": 1000.0},
            "phantom": {"background": 1.0, "hot": 3.0},
            "prior": {"kind": "LogCoshMRF", "gamma": 25.0, "zeta": 8.0},
            "map": {"tol": 1e-7, "max_iter": 8000},
            "plugin": {"eps": 0.5},
            "mcmc": {"sweeps": 14000, "burn_in": 2000, "thinning": 1, "step": 0.25,
                     "tune": True},
        },
    },
}

_PRESET_HELP = {
    "poisson-example": "credible-interval table and nonasymptotic bound for the exact-Gamma case",
    "binomial-limit": "total variation to the Gamma limit as the sample size grows",
    "spect-desk": "desk-scale scan: simulate, mode, plug-in posterior, chain, agreement tables",
}


# --------------------------------------------------------------------------
# Config handling
# --------------------------------------------------------------------------

def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def validate_config(cfg):
    import jsonschema

    try:
        jsonschema.validate(cfg, _SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


def _config_from_args(args):
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; see the presets subcommand")
        cfg = json.loads(json.dumps(PRESETS[args.preset]))
    elif getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        raise ConfigError("either --config or --preset is required")
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    return validate_config(cfg)


# --------------------------------------------------------------------------
# Output helpers
# --------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    return Path(path)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True))
    return Path(path)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, cfg, outputs):
    import scipy

    out_dir = Path(out_dir)
    entries = []
    for f in sorted(set(Path(p) for p in outputs)):
        entries.append({"path": str(f.relative_to(out_dir)),
                        "sha256": _sha256(f), "bytes": f.stat().st_size})
    manifest = {"version": __version__,
                "numpy": np.__version__, "scipy": scipy.__version__,
                "seed": cfg.get("seed"), "config": cfg, "outputs": entries}
    return _write_json(out_dir / "manifest.json", manifest)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------

def _run_poisson(cfg, out_dir):
    sub = cfg.get("poisson", {})
    alphas = sub.get("alphas", [0.5, 0.05])
    ns = sub.get("ns", [1, 10, 100])
    beta = sub.get("beta", 0.05)
    rows = []
    for alpha in alphas:
        for n in ns:
            m = PoissonGLM.iid(np.zeros(1), n=n)
            part = classify([0.0], m.limit_gradient([0.0], [0.0]))
            lq = local_quadratic(m, part, [0.0], prior=PowerLawPrior([alpha]))
            lm = lq.limit_measure()
            lo, hi = credible_interval(lm, 0, beta, m.sigma)
            exact_hi = gamma_quantile(beta, alpha) / n
            post = lambda v: (alpha - 1) * math.log(v) - v if v > 0 else -np.inf
            lim = lambda v: gamma_logpdf(v, alpha, 1.0)
            tv = tv_quadrature_1d(post, lim, (0.0, np.inf)).value
            rows.append([alpha, float(n), lo, hi, 0.0, exact_hi, tv])
    files = [_write_csv(out_dir / "poisson_ci.csv",
                        ["alpha", "n", "limit_lo", "limit_hi", "exact_lo", "exact_hi",
                         "tv_exact_vs_limit"], rows)]
    sigmas = sub.get("bound_sigmas", [])
    if sigmas:
        c1 = sub.get("bound_c1", 3.0)
        alpha = alphas[0]
        brows = []
        for s_target in sigmas:
            n = round(s_target ** -2)
            m = PoissonGLM.iid(np.zeros(1), n=n)
            part = classify([0.0], m.limit_gradient([0.0], [0.0]))
            prior = PowerLawPrior([alpha])
            lq = local_quadratic(m, part, [0.0], prior=prior)
            s = m.sigma
            delta1 = c1 * s * s * math.log(1.0 / s)
            ds1 = min(0.5 * delta1, 0.5 * lq.a_min)
            d0 = delta0_numeric(m, prior, part, [0.0], (0.0, delta1))
            rep = tv_bound(lq, part, [0.0], (0.0, delta1), (0.0, ds1), 0.0, d0)
            post = lambda v: (alpha - 1) * math.log(v) - v if v > 0 else -np.inf
            lim = lambda v: gamma_logpdf(v, alpha, 1.0)
            tv = tv_quadrature_1d(post, lim, (0.0, np.inf)).value
            brows.append([s, delta1, ds1, rep.terms["gamma_block"], rep.terms["prior"],
                          rep.terms["mass"], rep.total, tv])
        files.append(_write_csv(out_dir / "poisson_bound.csv",
                                ["sigma", "delta1", "delta_star1", "term_gamma",
                                 "term_prior", "term_mass", "total", "tv_exact"], brows))
    return files


def _beta_logpdf(x, a, b):
    from scipy.special import betaln
    if x <= 0 or x >= 1:
        return -np.inf
    return (a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - betaln(a, b)


def _run_binomial(cfg, out_dir):
    sub = cfg.get("binomial", {})
    alpha = sub.get("alpha", 1.0)
    omega = sub.get("omega", 0.5)
    ns = sub.get("ns", [100, 1000, 10000])
    beta = sub.get("beta", 0.1)
    rows = []
    for n in ns:
        n_b = int(round(n * omega))
        post = lambda v: _beta_logpdf(v / n_b, alpha, n_b + 1)
        lim = lambda v: gamma_logpdf(v, alpha, 1.0)
        tv = tv_quadrature_1d(post, lim, (0.0, float(n_b)), points=[50.0]).value
        ci_hi = gamma_quantile(beta, alpha) / (n * omega)
        rows.append([int(n), n_b, tv, 0.0, ci_hi])
    return [_write_csv(out_dir / "binomial_tv.csv",
                       ["n", "n_boundary", "tv_exact_vs_limit", "ci_lo", "ci_hi"], rows)]


def _spect_instance(cfg, rng, n_jobs=1):
    sub = cfg.get("spect", {})
    geom = SpectGeometry(**sub.get("geometry", {"rows": 8, "cols": 8}))
    phantom = disk_phantom(geom, **sub.get("phantom", {}))
    prior_cfg = dict(sub.get("prior", {"kind": "LogCoshMRF", "gamma": 25.0, "zeta": 8.0}))
    kind = prior_cfg.pop("kind", "LogCoshMRF")
    if kind == "LogCoshMRF":
        prior = default_prior(geom, **prior_cfg)
    else:
        prior = make_prior(kind, **prior_cfg)
    inst = simulate_with_seed(geom, phantom, prior, rng, n_jobs)
    return inst


def simulate_with_seed(geom, phantom, prior, rng, n_jobs=1):
    from .spect import simulate
    A = build_system_matrix(geom, n_jobs=n_jobs)
    return simulate(geom, phantom, rng, A=A, prior=prior)


def _run_spect(cfg, out_dir, n_jobs=1):
    sub = cfg.get("spect", {})
    seq = np.random.SeedSequence(cfg.get("seed", 0))
    rng_sim, rng_mcmc, rng_tune = [np.random.default_rng(s) for s in seq.spawn(3)]
    files = []
    inst = _spect_instance(cfg, rng_sim, n_jobs=n_jobs)
    inst.seed = cfg.get("seed", 0)
    inst.save(out_dir / "instance")
    files += sorted((out_dir / "instance").glob("*"))

    map_cfg = sub.get("map", {})
    theta_hat = map_estimate(inst, tol=map_cfg.get("tol", 1e-7),
                             max_iter=map_cfg.get("max_iter", 8000))
    np.savetxt(out_dir / "theta_hat.csv", theta_hat, fmt="%.17g", header="theta_hat")
    files.append(out_dir / "theta_hat.csv")

    pa = plugin_approx(inst, theta_hat, eps=sub.get("plugin", {}).get("eps", 0.0))
    files.append(_write_json(out_dir / "plugin.json", pa.to_dict()))

    mc = sub.get("mcmc", {})
    target = SpectPosterior(inst)
    step = mc.get("step", 0.25)
    base = ChainConfig(sweeps=mc.get("sweeps", 14000), burn_in=mc.get("burn_in", 2000),
                       thinning=mc.get("thinning", 1), step=step,
                       seed=cfg.get("seed", 0))
    if mc.get("tune", True):
        step = tune_step_sizes(target, theta_hat, base, rng=rng_tune)
        base = ChainConfig(base.sweeps, base.burn_in, base.thinning, step, base.seed)
    chain = run_chain(target, theta_hat, base, rng=rng_mcmc)
    chain.save(out_dir / "chain.npz")
    files.append(out_dir / "chain.npz")

    stats = agreement_stats(chain, pa, inst.sigma)
    files.append(_write_csv(out_dir / "agreement.csv", ["pixel", "class", "plugin", "mcmc"],
                            [[r["pixel"], r["class"], r["plugin"], r["mcmc"]]
                             for r in stats.to_table()]))
    files.append(_write_json(out_dir / "agreement_summary.json", {
        "median_rel_err_nonregular": stats.median_rel_err_nonregular,
        "q90_rel_err_nonregular": stats.q90_rel_err_nonregular,
        "median_rel_err_regular": stats.median_rel_err_regular,
        "q90_rel_err_regular": stats.q90_rel_err_regular,
        "n_nonregular": int(stats.nonregular_pixels.size),
        "n_regular": int(stats.regular_pixels.size),
        "ess_min": float(chain.ess.min()),
    }))

    # plot-ready bivariate marginals: one mixed pair, one regular pair
    if pa.nonregular.size and pa.regular.size >= 2:
        j_dark = int(pa.nonregular[np.argmax(pa.rates)])
        reg_sorted = pa.regular[np.argsort(-theta_hat[pa.regular])]
        j_bright, j_bright2 = int(reg_sorted[0]), int(reg_sorted[1])
        files.append(_write_csv(out_dir / "pairs_chain.csv",
                                ["dark", "bright", "bright2"],
                                np.column_stack([chain.samples[:, j_dark],
                                                 chain.samples[:, j_bright],
                                                 chain.samples[:, j_bright2]]).tolist()))
        files.append(_write_json(out_dir / "pairs_params.json", {
            "dark_pixel": j_dark, "bright_pixel": j_bright, "bright_pixel2": j_bright2,
            "dark_rate_over_sigma2": float(pa.rates[np.argmax(pa.rates)] / inst.sigma ** 2),
            "bright_mean": float(theta_hat[j_bright]),
        }))

    regions = sub.get("regions")
    if regions:
        w = region_weights(inst.geometry.p, regions["hot"], regions.get("cold"))
        summary = region_functional(chain.samples, w)
        files.append(_write_json(out_dir / "region_summary.json", {
            "mean": summary.mean, "var": summary.var, "interval": list(summary.interval)}))
    return files


def run_experiment(cfg, out_dir, n_jobs=1):
    """Execute the configured pipeline; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kind = cfg["experiment"]
    if kind == "poisson":
        files = _run_poisson(cfg, out_dir)
    elif kind == "binomial":
        files = _run_binomial(cfg, out_dir)
    elif kind == "spect":
        files = _run_spect(cfg, out_dir, n_jobs=n_jobs)
    else:  # pragma: no cover - schema forbids
        raise ConfigError(f"unknown experiment {kind!r}")
    return write_manifest(out_dir, cfg, files)


# --------------------------------------------------------------------------
# Stage subcommands operating on an output directory
# --------------------------------------------------------------------------

def _load_instance(out_dir):
    d = Path(out_dir) / "instance"
    if not d.exists():
        raise ConfigError(f"no instance directory under {out_dir}; run simulate first")
    return SpectInstance.load(d)


def _cmd_simulate(args):
    cfg = _config_from_args(args)
    if cfg["experiment"] != "spect":
        raise ConfigError("simulate applies to spect experiments")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(cfg["seed"]).spawn(1)[0])
    inst = _spect_instance(cfg, rng, n_jobs=args.threads)
    inst.seed = cfg["seed"]
    inst.save(out / "instance")
    print(f"instance written to {out / 'instance'}")
    return 0


def _cmd_map(args):
    inst = _load_instance(args.out)
    theta = map_estimate(inst, tol=args.tol, max_iter=args.max_iter)
    np.savetxt(Path(args.out) / "theta_hat.csv", theta, fmt="%.17g", header="theta_hat")
    print(f"mode written to {Path(args.out) / 'theta_hat.csv'}")
    return 0


def _load_theta_hat(out_dir):
    f = Path(out_dir) / "theta_hat.csv"
    if not f.exists():
        raise ConfigError(f"{f} not found; run map first")
    return np.loadtxt(f, ndmin=1)


def _cmd_approx(args):
    inst = _load_instance(args.out)
    theta = _load_theta_hat(args.out)
    pa = plugin_approx(inst, theta, eps=args.eps)
    _write_json(Path(args.out) / "plugin.json", pa.to_dict())
    print(f"plug-in approximation written to {Path(args.out) / 'plugin.json'}")
    return 0


def _cmd_mcmc(args):
    inst = _load_instance(args.out)
    theta = _load_theta_hat(args.out)
    cfg = ChainConfig(sweeps=args.sweeps, burn_in=args.burn_in, thinning=args.thinning,
                      step=args.step, seed=args.seed if args.seed is not None else 0)
    target = SpectPosterior(inst)
    chain = run_chain(target, theta, cfg)
    chain.save(Path(args.out) / "chain.npz")
    print(f"chain written to {Path(args.out) / 'chain.npz'}; "
          f"min ESS {chain.ess.min():.0f}")
    return 0


def _cmd_compare(args):
    from .spect import PluginApprox

    out = Path(args.out)
    chain = ChainOutput.load(out / "chain.npz")
    d = json.loads((out / "plugin.json").read_text())
    pa = PluginApprox(np.asarray(d["theta_hat"]), np.asarray(d["nonregular"], dtype=int),
                      np.asarray(d["regular"], dtype=int),
                      np.asarray(d["regular_boundary"], dtype=int),
                      np.asarray(d["zero_rays"], dtype=int),
                      np.asarray(d["information"]), np.asarray(d["rates"]),
                      float(d["sigma"]))
    stats = agreement_stats(chain, pa, pa.sigma)
    _write_csv(out / "agreement.csv", ["pixel", "class", "plugin", "mcmc"],
               [[r["pixel"], r["class"], r["plugin"], r["mcmc"]] for r in stats.to_table()])
    print(f"median relative error: nonregular {stats.median_rel_err_nonregular:.3f}, "
          f"regular {stats.median_rel_err_regular:.3f}")
    return 0


def _cmd_bound(args):
    cfg = _config_from_args(args)
    if cfg["experiment"] != "poisson":
        raise ConfigError("the bound table is implemented for poisson experiments")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _run_poisson(cfg, out)
    write_manifest(out, cfg, files)
    print(f"bound table written under {out}")
    return 0


def _cmd_sweep_eps(args):
    inst = _load_instance(args.out)
    theta = _load_theta_hat(args.out)
    grid = np.asarray(args.eps_grid if args.eps_grid else
                      [0.0, 1e-6, 1e-4, 1e-2, 0.1, 0.3, 1.0])
    rows = []
    for eps in grid:
        pa = plugin_approx(inst, theta, eps=float(eps))
        rows.append([float(eps), int(pa.nonregular.size),
                     float(pa.rates.min()) if pa.rates.size else float("nan"),
                     int(pa.regular_boundary.size)])
    _write_csv(Path(args.out) / "sweep_eps.csv",
               ["eps", "n_nonregular", "min_rate", "n_regular_boundary"], rows)
    print(f"sensitivity table written to {Path(args.out) / 'sweep_eps.csv'}")
    return 0


def _cmd_presets(args):
    for name in sorted(PRESETS):
        print(f"{name}: {_PRESET_HELP[name]}")
    return 0


def _cmd_run(args):
    cfg = _config_from_args(args)
    manifest = run_experiment(cfg, args.out, n_jobs=args.threads)
    print(f"manifest written to {manifest}")
    return 0


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="bvmlimits",
                                description="boundary-limit posterior experiments")
    p.add_argument("--threads", type=int, default=1, help="worker threads for matrix build")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--out", required=True, help="output directory")
        if config:
            sp.add_argument("--config", help="TOML or JSON config file")
            sp.add_argument("--preset", help="named preset (see presets)")
            sp.add_argument("--seed", type=int, help="override the config seed")

    sp = sub.add_parser("run", help="full pipeline for the configured experiment")
    common(sp)
    sp.set_defaults(fn=_cmd_run)

    sp = sub.add_parser("simulate", help="draw a scan instance")
    common(sp)
    sp.set_defaults(fn=_cmd_simulate)

    sp = sub.add_parser("map", help="posterior mode of a stored instance")
    common(sp, config=False)
    sp.add_argument("--tol", type=float, default=1e-7)
    sp.add_argument("--max-iter", type=int, default=8000)
    sp.set_defaults(fn=_cmd_map)

    sp = sub.add_parser("approx", help="plug-in posterior at the stored mode")
    common(sp, config=False)
    sp.add_argument("--eps", type=float, default=0.0)
    sp.set_defaults(fn=_cmd_approx)

    sp = sub.add_parser("mcmc", help="reference chain for a stored instance")
    common(sp, config=False)
    sp.add_argument("--sweeps", type=int, default=14000)
    sp.add_argument("--burn-in", type=int, default=2000)
    sp.add_argument("--thinning", type=int, default=1)
    sp.add_argument("--step", type=float, default=0.25)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(fn=_cmd_mcmc)

    sp = sub.add_parser("compare", help="agreement table from stored chain and plug-in")
    common(sp, config=False)
    sp.set_defaults(fn=_cmd_compare)

    sp = sub.add_parser("bound", help="nonasymptotic bound table")
    common(sp)
    sp.set_defaults(fn=_cmd_bound)

    sp = sub.add_parser("sweep-eps", help="score-threshold sensitivity of the plug-in sets")
    common(sp, config=False)
    sp.add_argument("--eps-grid", type=float, nargs="*", default=None)
    sp.set_defaults(fn=_cmd_sweep_eps)

    sp = sub.add_parser("presets", help="list available presets")
    sp.set_defaults(fn=_cmd_presets)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except BvmLimitsError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
