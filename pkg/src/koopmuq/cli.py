"""Command-line interface.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides on top, and writes its outputs only after all computation has
succeeded. Exit codes: 0 success, 2 usage or input error, 3 violated
mathematical precondition, 4 numerical failure.

The default seed can be overridden with the ``KOOPMUQ_SEED`` environment
variable; ``--seed`` and the config file take precedence over it.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidParameter, IoError, KoopmuqError
from .estimators import Dictionary, estimate, lift_noise, residual_norm
from .ingest import (
    NoiseModel,
    build_snapshots,
    format_csv,
    load_csv,
    variance_detrend_poly,
    variance_manufacturer,
    variance_steady_window,
)
from .montecarlo import MCConfig, compare_report, histograms, iid_benchmark, mc_variance
from .muq import analytic_variance, check_dof, element_distribution
from .numkernel import RngHandle
from .spectral import (
    MPParams,
    SpectralUQ,
    density_curve,
    eigenvalue_moments,
    haar_sample,
    mp_params_from_variance,
    mp_sample,
    tuple_decorrelation_check,
)
from .sysgen import SimConfig, SwingSystem, add_measurement_noise, swing_trajectory

SEED_ENV = "KOOPMUQ_SEED"

DEFAULTS = {
    "seed": 0,
    "input": None,
    "output": "out",
    "method": "DMD",
    "dictionary": "identity",
    "tol": 1e-12,
    "noise": None,
    "mc": {
        "replicates": 1000,
        "parallel": False,
        "workers": 0,
        "perturb": "state",
        "noise_scale": 1.0,
        "bins": 50,
    },
    "benchmark": None,
    "generator": {
        "system": {},
        "sim": {},
        "noise": None,
        "file": "data.csv",
    },
    "spectral": {
        "ratio": None,
        "sigma2": None,
        "order": 4,
        "haar_samples": 1000,
        "haar_dim": 4,
        "mc_report": None,
    },
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameter(f"expected comma-separated numbers, got {text!r}") from None


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            raise InvalidParameter(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read config {args.config}: {exc.strerror or exc}") from exc
        try:
            cfg = _merge(cfg, json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidParameter(f"config {args.config} is not valid JSON: {exc}") from None

    for key in ("seed", "input", "output", "method", "dictionary"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "noise_window", None):
        cfg["noise"] = {"source": "steady-window", "t_start": args.noise_window[0], "t_end": args.noise_window[1]}
    if getattr(args, "noise_detrend", None) is not None:
        cfg["noise"] = {"source": "polynomial-detrend", "degree": args.noise_detrend}
    if getattr(args, "noise_manufacturer", None):
        cfg["noise"] = {"source": "manufacturer", "variances": _parse_floats(args.noise_manufacturer)}
    if getattr(args, "replicates", None) is not None:
        cfg["mc"]["replicates"] = args.replicates
    if getattr(args, "parallel", False):
        cfg["mc"]["parallel"] = True
    if getattr(args, "noise_scale", None) is not None:
        cfg["mc"]["noise_scale"] = args.noise_scale
    if getattr(args, "benchmark", False) and not cfg.get("benchmark"):
        cfg["benchmark"] = {"m": 200, "variances": [1.0, 4.0, 0.25, 9.0]}
    for key in ("ratio", "sigma2"):
        value = getattr(args, key, None)
        if value is not None:
            cfg["spectral"][key] = value
    if getattr(args, "mc_report", None):
        cfg["spectral"]["mc_report"] = args.mc_report
    if getattr(args, "gen_noise", None):
        cfg["generator"]["noise"] = _parse_floats(args.gen_noise)
    for key in ("h", "duration"):
        value = getattr(args, key, None)
        if value is not None:
            cfg["generator"]["sim"][key] = value
    cfg["method"] = str(cfg["method"]).upper()
    if cfg["method"] not in ("DMD", "EDMD"):
        raise InvalidParameter(f"method must be DMD or EDMD, got {cfg['method']!r}")
    return cfg


def _echo(cfg):
    """Config as embedded in reports; the output location is not part of a result."""
    return {k: v for k, v in cfg.items() if k != "output"}


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_outputs(outdir, files):
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (outdir / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write into {outdir}: {exc.strerror or exc}") from exc
    return [str(outdir / name) for name in files]


def _header(cfg, command):
    return {"tool": "koopmuq", "version": __version__, "command": command, "config": _echo(cfg)}


# --------------------------------------------------------------------------- pipeline


def _load(cfg):
    if not cfg.get("input"):
        raise InvalidParameter("no input file given (use --input or the 'input' config key)")
    return load_csv(cfg["input"])


def _noise(cfg, ts):
    spec = cfg.get("noise")
    if not spec:
        raise InvalidParameter("no noise source configured (window, detrend or manufacturer)")
    source = spec.get("source")
    if source == "steady-window":
        noise = variance_steady_window(ts, float(spec["t_start"]), float(spec["t_end"]))
    elif source == "polynomial-detrend":
        noise = variance_detrend_poly(ts, int(spec.get("degree", 9)))
    elif source == "manufacturer":
        noise = variance_manufacturer(spec["variances"])
    else:
        raise InvalidParameter(f"unknown noise source {source!r}")
    noise.check_length(ts.n)
    return noise


def _dictionary(cfg, n):
    kind = cfg["dictionary"] if cfg["method"] == "EDMD" else "identity"
    return Dictionary(kind, n)


def _muq_pipeline(cfg):
    ts = _load(cfg)
    snap = build_snapshots(ts)
    d = _dictionary(cfg, snap.n)
    check_dof(snap.m, d.feature_dim)
    noise = _noise(cfg, ts)
    est = estimate(snap, cfg["method"], d, cfg["tol"])
    lifted = lift_noise(d, noise)
    vm = analytic_variance(est, lifted)
    return ts, snap, d, noise, lifted, est, vm


def cmd_gen_data(cfg):
    gen = cfg["generator"]
    system = SwingSystem(**gen.get("system", {}))
    sim_kwargs = dict(gen.get("sim", {}))
    if "x0" in sim_kwargs:
        sim_kwargs["x0"] = tuple(sim_kwargs["x0"])
    sim = SimConfig(**sim_kwargs)
    ts = swing_trajectory(system, sim)
    if gen.get("noise"):
        noise = variance_manufacturer(gen["noise"])
        ts = add_measurement_noise(ts, noise, RngHandle(int(cfg["seed"])))
    outdir = Path(cfg["output"])
    echo = _header(cfg, "gen-data")
    echo["system"] = {k: getattr(system, k) for k in ("H", "omega_R", "P_M", "P_max", "D")}
    echo["sim"] = sim.to_json()
    echo["state_names"] = list(ts.state_names)
    echo["rows"] = ts.T

    data_name = gen.get("file", "data.csv")
    return _write_outputs(outdir, {data_name: format_csv(ts), "gen-config.json": _dump(echo)})


def cmd_estimate(cfg):
    ts = _load(cfg)
    snap = build_snapshots(ts)
    d = _dictionary(cfg, snap.n)
    est = estimate(snap, cfg["method"], d, cfg["tol"])
    out = _header(cfg, "estimate")
    out["estimate"] = est.to_json()
    out["features"] = d.feature_names(ts.state_names)
    out["residual_norm"] = residual_norm(snap, est, d)
    return _write_outputs(cfg["output"], {"estimate.json": _dump(out)})


def cmd_muq(cfg):
    ts, snap, d, noise, lifted, est, vm = _muq_pipeline(cfg)
    out = _header(cfg, "muq")
    out["noise"] = noise.to_json()
    out["lifted_noise"] = lifted.to_json()
    out["features"] = d.feature_names(ts.state_names)
    out["variance_matrix"] = vm.to_json()
    rows = []
    for i in range(vm.p):
        for j in range(vm.p):
            mean, var = element_distribution(vm, i, j)
            rows.append((i, j, mean, var))
    out["elements"] = [{"i": i, "j": j, "mean": mu, "variance": v} for i, j, mu, v in rows]
    return _write_outputs(cfg["output"], {
        "muq.json": _dump(out),
        "elements.csv": _csv(["i", "j", "mean", "variance"], rows),
    })


def _spectrum_histogram(samples, lo, hi, bins):
    counts, edges = np.histogram(samples, bins=bins, range=(lo, hi), density=True)
    return [(float(a), float(b), float(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]


def cmd_mc_validate(cfg):
    seed = int(cfg["seed"])
    mc_cfg = cfg["mc"]
    if cfg.get("benchmark"):
        bench = cfg["benchmark"]
        snap, noise = iid_benchmark(bench["m"], bench["variances"])
        d = Dictionary("identity", snap.n)
        est = estimate(snap, "DMD", d, cfg["tol"])
        check_dof(snap.m, d.feature_dim)
        vm = analytic_variance(est, noise)
        method, dictionary = "DMD", "identity"
    else:
        ts, snap, d, noise, lifted, est, vm = _muq_pipeline(cfg)
        method, dictionary = cfg["method"], d.kind
    mcc = MCConfig(
        replicates=int(mc_cfg["replicates"]),
        seed=seed,
        method=method,
        dictionary=dictionary,
        perturb=mc_cfg.get("perturb", "state"),
        parallel=bool(mc_cfg.get("parallel", False)),
        workers=int(mc_cfg.get("workers", 0)),
        tol=cfg["tol"],
    )
    scale = float(mc_cfg.get("noise_scale", 1.0))
    if scale < 0:
        raise InvalidParameter("mc.noise_scale must be non-negative")
    mc_noise = NoiseModel(noise.variances * scale, noise.provenance)
    mc = mc_variance(snap, mc_noise, mcc)
    sp_cfg = cfg["spectral"]
    params = mp_params_from_variance(vm.S, vm.m, sp_cfg.get("ratio"))
    spectral = SpectralUQ(params, eigenvalue_moments(params, int(sp_cfg.get("order", 4))), vm.p)
    report = compare_report(mc, vm, spectral, seed=seed)

    out = _header(cfg, "mc-validate")
    out["seed"] = seed
    out["mc_config"] = mcc.to_json()
    out["spectral"] = spectral.to_json()
    out["report"] = report.to_json()

    bins = int(mc_cfg.get("bins", 50))
    hist_rows = histograms(mc, bins)
    x, f = density_curve(params)
    s = (mc.spectra**2).ravel()
    hi = max(params.upper, float(s.max()))
    return _write_outputs(cfg["output"], {
        "report.json": _dump(out),
        "histograms.csv": _csv(["i", "j", "bin_left", "bin_right", "count"], hist_rows),
        "mp_density.csv": _csv(["x", "density"], [(float(a), float(b)) for a, b in zip(x, f)]),
        "mc_spectrum.csv": _csv(["bin_left", "bin_right", "density"], _spectrum_histogram(s, 0.0, hi, bins)),
    })


def cmd_spectral(cfg):
    sp = cfg["spectral"]
    seed = int(cfg["seed"])
    order = int(sp.get("order", 4))
    if sp.get("sigma2") is not None:
        params = MPParams(float(sp["ratio"] if sp.get("ratio") is not None else 1.0), float(sp["sigma2"]))
        dim = int(sp.get("haar_dim", 4))
    else:
        *_, vm = _muq_pipeline(cfg)
        params = mp_params_from_variance(vm.S, vm.m, sp.get("ratio"))
        dim = vm.p
    moments = eigenvalue_moments(params, order)

    count = int(sp.get("haar_samples", 1000))
    root = RngHandle(seed)
    Qs = np.stack(haar_sample(root.child(1), dim, count)) if count else np.zeros((0, dim, dim))
    summary = {"dim": dim, "samples": count}
    if count:
        eye = np.eye(dim)
        ortho = max(float(np.max(np.abs(q.T @ q - eye))) for q in Qs)
        q11 = Qs[:, 0, 0]
        # zero-mean symmetric eigenvalues around Haar eigenvectors
        mags = np.sqrt(mp_sample(root.child(2), params, count * dim)).reshape(count, dim)
        signs = np.where(root.child(3).generator().random((count, dim)) < 0.5, -1.0, 1.0)
        lam = mags * signs
        Ks = np.einsum("kij,kj,klj->kil", Qs, lam, Qs)
        dec = tuple_decorrelation_check(Ks, Qs) if count >= 2 else None
        summary.update({
            "max_orthogonality_error": ortho,
            "entry11_mean": float(q11.mean()),
            "entry11_variance": float(q11.var(ddof=1)) if count > 1 else 0.0,
            "entry11_variance_expected": 1.0 / dim,
            "decorrelation_statistic": dec.statistic if dec else 0.0,
            "decorrelation_degenerate": dec.degenerate if dec else True,
        })

    out = _header(cfg, "spectral")
    out["mp"] = params.to_json()
    out["moments"] = moments.tolist()
    out["haar"] = summary
    if sp.get("mc_report"):
        try:
            mc_out = json.loads(Path(sp["mc_report"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read {sp['mc_report']}: {exc.strerror or exc}") from exc
        mc_moments = np.asarray(mc_out["report"]["moments_mc"], dtype=float)[:order]
        out["moments_mc"] = mc_moments.tolist()
        out["moment_deltas"] = (moments[: mc_moments.size] - mc_moments).tolist()
    x, f = density_curve(params)
    return _write_outputs(cfg["output"], {
        "spectral.json": _dump(out),
        "mp_density.csv": _csv(["x", "density"], [(float(a), float(b)) for a, b in zip(x, f)]),
    })


COMMANDS = {
    "gen-data": cmd_gen_data,
    "estimate": cmd_estimate,
    "muq": cmd_muq,
    "mc-validate": cmd_mc_validate,
    "spectral": cmd_spectral,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="koopmuq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"koopmuq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--output", "-o", help="output directory")
    common.add_argument("--seed", type=int)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", "-i", help="CSV time series")
    data.add_argument("--method", choices=["DMD", "EDMD", "dmd", "edmd"])
    data.add_argument("--dictionary", choices=["identity", "quadratic"])

    noise = argparse.ArgumentParser(add_help=False)
    group = noise.add_mutually_exclusive_group()
    group.add_argument("--noise-window", nargs=2, type=float, metavar=("T_START", "T_END"))
    group.add_argument("--noise-detrend", type=int, metavar="DEGREE")
    group.add_argument("--noise-manufacturer", metavar="V1,V2,...")

    g = sub.add_parser("gen-data", parents=[common], help="simulate the swing system")
    g.add_argument("--h", type=float, help="RK4 step in seconds")
    g.add_argument("--duration", type=float)
    g.add_argument("--gen-noise", metavar="V1,V2,...", help="measurement noise variances to inject")

    sub.add_parser("estimate", parents=[common, data], help="DMD/EDMD estimate of K")
    sub.add_parser("muq", parents=[common, data, noise], help="analytic elementwise variances")

    mc = sub.add_parser("mc-validate", parents=[common, data, noise], help="Monte Carlo comparison")
    mc.add_argument("--replicates", "-N", type=int)
    mc.add_argument("--parallel", action="store_true")
    mc.add_argument("--benchmark", action="store_true", help="use the i.i.d. synthetic benchmark")
    mc.add_argument("--noise-scale", type=float, help="multiplier on the perturbation variances")

    sp = sub.add_parser("spectral", parents=[common, data, noise], help="spectral distributions")
    sp.add_argument("--ratio", type=float)
    sp.add_argument("--sigma2", type=float)
    sp.add_argument("--mc-report", help="report.json from mc-validate for moment deltas")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        for path in COMMANDS[args.command](cfg):
            print(path)
    except KoopmuqError as exc:
        print(f"koopmuq {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, KeyError) as exc:
        print(f"koopmuq {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"koopmuq {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
