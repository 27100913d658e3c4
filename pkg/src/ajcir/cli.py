"""Batch experiment runner: ``ajcir <command> [options]``.

Each run resolves one configuration (built-in defaults, then the config
file, then ``--set`` overrides, then explicit flags), dispatches to the
named experiment and writes CSV tables, JSON metadata, a short text
summary and ``manifest.json`` into the output directory. Only the
manifest carries timestamps, so CSV files from equal configurations are
byte-identical.

Exit status: 0 success, 1 invalid input, 2 numerical failure.
"""
import argparse
import csv
import datetime as _dt
import json
import math
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND, get_threads, set_threads
from .errors import AjcirError, NumericalError, ValidationError
from .model import params_from_dict, validate
from .presets import preset_dict
from .simulator import write_provenance, write_rows

try:
    import tomllib as _toml
except ImportError:  # python < 3.11
    import tomli as _toml

OUT_ENV = "AJCIR_OUT"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


# -- configuration --------------------------------------------------------------------

def _y_axis(origin=0.0, step=0.02, count=2001):
    return {"y_origin": origin, "y_step": step, "y_count": count}


DEFAULTS = {
    "simulate": {"x0": None, "T": 1.0, "dt": None, "n_paths": 1000, "keep": "terminal",
                 "record_times": None, "diagonal": False, "dump_terminal": False,
                 "char_probes": None, "char_tol": 1e-10, "mean_check": False},
    "riccati-check": {"u0": -1.0, "T": 5.0, "n_t": 101, "rtol": 1e-10, "atol": 1e-12,
                      "tolerance": 1e-8},
    "density1d": {"x": 1.0, "t": 1.0, **_y_axis(), "n": 0, "k": 0,
                  "trunc_tol": 1e-12, "rtol": 1e-8},
    "invariant1d": {**_y_axis(), "trunc_tol": 1e-12, "rtol": 1e-10},
    "condition-a": {"xi_min": 1.0, "xi_max": 1e6, "n_xi": 25, "k": None,
                    "slope_tolerance": 0.02},
    "rates": {"x0": None, "t": 1.0, "eps": [0.2, 0.1, 0.05, 0.025], "eta": 0.5,
              "n_paths": 10000, "ref_factor": 25},
    "boundary": {"x0": None, "t": 1.0, "eps": [0.02, 0.05, 0.1, 0.2], "n_paths": 10000,
                 "dt": None},
    "lyapunov": {"r_max": 1e3, "n_radii": 25, "n_dirs": 9, "c2_cap": None,
                 "quad_tol": 1e-10},
    "ergodicity": {"x": None, "y": None, "t_grid": [0.5, 1.0, 2.0, 3.0, 4.0, 6.0],
                   "n_paths": 10000, "dt": None, "n_bins": 20, "n_boot": 200},
    "besov": {"x_bar": None, "t_fixed": 0.5, "t_list": [0.1, 0.2, 0.4, 0.8],
              "x_scales": [0.0, 1.0, 2.0, 4.0], "n_paths": 20000, "delta": 1.0,
              "steps": 200, "lam_factors": [0.05, 0.1, 0.2], "main_factor": 0.1},
    "dobrushin": {"R": 10.0, "h": 1.0, "n_pairs": 12, "n_paths": 5000, "dt": None,
                  "n_bins": 20},
}

# commands that fall back to a preset when no model is configured
DEFAULT_MODEL = {"riccati-check": "pure1d"}


def _read_structured(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    data = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(data.decode())
        return _toml.loads(data.decode())
    except (ValueError, _toml.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from None


def load_config(path):
    """Read a TOML/JSON config, or a manifest written by a previous run."""
    cfg = _read_structured(path)
    if cfg.get("tool") == "ajcir" and "config" in cfg:
        cfg = cfg["config"]
    if "model_file" in cfg:
        ref = Path(cfg["model_file"])
        if not ref.is_absolute():
            ref = Path(path).parent / ref
        sub = _read_structured(ref)
        cfg = dict(cfg, model=sub.get("model", sub))
        del cfg["model_file"]
    return cfg


def parse_override(text):
    """``key=value`` with the value read as a TOML literal (bare words stay strings)."""
    if "=" not in text:
        raise ValidationError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = _toml.loads(f"v = {raw.strip()}")["v"]
    except _toml.TOMLDecodeError:
        value = raw.strip()
    return key, value


def resolve(command, cfg=None, overrides=(), seed=None, model_preset=None):
    """Merge defaults, config file and overrides into a resolved configuration."""
    if command not in DEFAULTS:
        raise ValidationError(f"unknown experiment {command!r}")
    cfg = dict(cfg or {})
    if cfg.get("command") not in (None, command):
        raise ValidationError(f"config is for {cfg['command']!r}, not {command!r}")
    knobs = dict(DEFAULTS[command])
    file_knobs = dict(cfg.get("experiment", {}))
    file_knobs.update(cfg.get(command, {}))
    for key, value in list(file_knobs.items()) + list(overrides):
        if key not in knobs:
            raise ValidationError(f"unknown setting {key!r} for {command}; "
                                  f"known: {sorted(knobs)}")
        knobs[key] = value
    if model_preset is not None:
        model = preset_dict(model_preset)
    elif "model" in cfg:
        model = cfg["model"]
    elif "model_preset" in cfg:
        model = preset_dict(cfg["model_preset"])
    elif command in DEFAULT_MODEL:
        model = preset_dict(DEFAULT_MODEL[command])
    else:
        raise ValidationError("no model given: use --model, --config with a [model] "
                              "table, or model_file")
    params = params_from_dict(model)
    validate(params).raise_if_invalid()
    s = cfg.get("seed", 0) if seed is None else seed
    if not isinstance(s, int) or s < 0:
        raise ValidationError("seed must be a nonnegative integer")
    return {"command": command, "model": params.to_dict(), "experiment": knobs,
            "seed": int(s)}


# -- helpers ------------------------------------------------------------------------------

def _positive_int(knobs, key):
    v = knobs[key]
    if isinstance(v, float) and v.is_integer():
        v = int(v)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ValidationError(f"{key} must be a positive integer, got {v!r}")
    return v


def _state(knobs, key, m, default=1.0):
    v = knobs[key]
    if v is None:
        return np.full(m, default)
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.size == 1:
        a = np.full(m, a[0])
    if a.shape != (m,) or np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValidationError(f"{key} must be {m} nonnegative numbers")
    return a


def _axis(knobs):
    from .density import Axis
    count = _positive_int(knobs, "y_count")
    if not knobs["y_step"] > 0:
        raise ValidationError("y_step must be positive")
    return Axis(float(knobs["y_origin"]), float(knobs["y_step"]), count)


class Run:
    """Output directory bookkeeping for one experiment."""

    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []

    def path(self, name):
        self.artifacts.append(name)
        return self.out / name

    def csv(self, name, header, rows, seed=None):
        with open(self.path(name), "w", newline="") as fh:
            if seed is not None:
                write_provenance(fh, seed)
            write_rows(fh, header, rows)

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"not serialisable: {type(v).__name__}")


# -- experiments ------------------------------------------------------------------------
# each takes (params, knobs, seed, run) and returns a flat summary dict

def _simulate(params, k, seed, run):
    from .riccati import char_values
    from .simulator import empirical_char, mean_formula, simulate_ensemble
    n = _positive_int(k, "n_paths")
    x0 = _state(k, "x0", params.m)
    ens = simulate_ensemble(params, x0, float(k["T"]), k["dt"], n, seed, keep=k["keep"],
                            record_times=k["record_times"], diagonal=bool(k["diagonal"]))
    header, rows = ens.summary_rows()
    run.csv("summary.csv", header, rows, seed)
    run.json("ensemble.json", ens.manifest())
    if k["dump_terminal"]:
        ens.dump_terminal(run.path("terminal.bin"))
    out = {"n_paths": n, "dt": ens.dt, "T": ens.T}
    if k["char_probes"] is not None:
        y = np.atleast_2d(np.asarray(k["char_probes"], dtype=float))
        if y.shape[1] != params.m:
            raise ValidationError(f"char_probes rows need {params.m} entries")
        emp, se = empirical_char(ens, 1j * y)
        exact = char_values(params, x0, ens.T, 1j * y, tol=float(k["char_tol"]))
        z = np.where(se > 0, np.abs(emp - exact) / np.where(se > 0, se, 1.0), 0.0)
        run.csv("char_check.csv",
                [f"y{i}" for i in range(params.m)]
                + ["emp_re", "emp_im", "se", "exact_re", "exact_im", "z"],
                [list(yy) + [e.real, e.imag, s, x.real, x.imag, zz]
                 for yy, e, s, x, zz in zip(y, emp, se, exact, z)], seed)
        out["char_max_z"] = float(z.max())
    if k["mean_check"]:
        mu, mse = ens.mean()
        ref = mean_formula(params, x0, ens.T)
        z = np.abs(mu[-1] - ref) / mse[-1]
        run.csv("mean_check.csv", ["coord", "sample_mean", "se", "formula", "z"],
                [[i, mu[-1, i], mse[-1, i], ref[i], z[i]] for i in range(params.m)],
                seed)
        out["mean_max_z"] = float(z.max())
    return out


def riccati_reference(params, u0, t):
    """Closed-form psi(t) when the model has no jumps and no immigration, else None."""
    from .model import Zero
    from .riccati import closed_form_psi_1d
    if params.m != 1 or not isinstance(params.levy, Zero) or params.b[0] != 0.0:
        return None
    u0 = complex(np.atleast_1d(u0)[0])
    if u0.imag != 0.0 or not u0.real < 0.0:
        return None
    alpha, sigma, kappa = params.alpha[0], params.sigma[0], params.beta[0, 0]
    # g = sigma^(1/(alpha-1)) psi solves the sigma = 1 equation
    c = sigma ** (1.0 / (alpha - 1.0))
    return closed_form_psi_1d(alpha, kappa, -u0.real * c, t) / c


def _riccati_check(params, k, seed, run):
    from .riccati import solve_riccati
    T = float(k["T"])
    t = np.linspace(0.0, T, _positive_int(k, "n_t"))
    u0 = np.atleast_1d(np.asarray(k["u0"], dtype=float))
    if u0.size == 1:
        u0 = np.full(params.m, u0[0])
    tr = solve_riccati(params, u0, T, rtol=float(k["rtol"]), atol=float(k["atol"]),
                       t_eval=t)
    header = ["t", "phi_re", "phi_im"] + [f"psi{j}_{p}" for j in range(params.m)
                                          for p in ("re", "im")]
    rows = [[tt, p.real, p.imag] + [v for s in ps for v in (s.real, s.imag)]
            for tt, p, ps in zip(tr.t, tr.phi, tr.psi)]
    out = {"n_steps": tr.n_steps}
    ref = riccati_reference(params, u0, t)
    if ref is not None:
        rel = np.abs(tr.psi[:, 0] - ref) / np.abs(ref)
        header += ["closed_form", "rel_err"]
        rows = [r + [c, e] for r, c, e in zip(rows, ref, rel)]
        out.update(max_rel_err=float(rel.max()), tolerance=float(k["tolerance"]),
                   passed=bool(rel.max() <= float(k["tolerance"])))
    run.csv("riccati.csv", header, rows)
    if ref is not None and not out["passed"]:
        raise NumericalError(f"max relative error {out['max_rel_err']:.3g} exceeds "
                             f"{out['tolerance']:g}")
    return out


def _density1d(params, k, seed, run):
    from .density import heat_kernel_derivative_1d
    if params.m != 1:
        raise ValidationError("density1d needs a one-dimensional model")
    g = heat_kernel_derivative_1d(params, float(k["x"]), float(k["t"]), _axis(k),
                                  int(k["n"]), int(k["k"]), float(k["trunc_tol"]),
                                  float(k["rtol"]))
    run.csv("density.csv", ["y0", "value"], g.rows().tolist())
    run.json("density.json", g.header())
    return {"integral": g.integral(), "clipped_mass": g.clipped_mass,
            "suspect": bool(g.suspect), "sup_abs": float(np.max(np.abs(g.values)))}


def _invariant1d(params, k, seed, run):
    from .density import invariant_density_1d
    g = invariant_density_1d(params, _axis(k), float(k["trunc_tol"]), float(k["rtol"]))
    run.csv("density.csv", ["y0", "value"], g.rows().tolist())
    run.json("density.json", g.header())
    return {"integral": g.integral(), "clipped_mass": g.clipped_mass,
            "suspect": bool(g.suspect)}


def _condition_a(params, k, seed, run):
    from .model import check_condition_a
    xi = np.geomspace(float(k["xi_min"]), float(k["xi_max"]), _positive_int(k, "n_xi"))
    rep = check_condition_a(params, xi, k["k"], float(k["slope_tolerance"]))
    run.csv("condition_a.csv", ["k", "vartheta_fit", "C_fit", "M_used", "satisfied"],
            [[kk, v, c, mm, int(s)] for kk, v, c, mm, s in
             zip(rep.k, rep.vartheta_fit, rep.C_fit, rep.M_used, rep.satisfied)])
    run.json("condition_a.json", rep.to_dict())
    return {"satisfied": rep.overall, "shared_C": rep.shared_C}


def _rates(params, k, seed, run):
    from .simulator import weak_error_rate_experiment
    res = weak_error_rate_experiment(params, _state(k, "x0", params.m), float(k["t"]),
                                     k["eps"], float(k["eta"]),
                                     _positive_int(k, "n_paths"), seed,
                                     _positive_int(k, "ref_factor"))
    run.csv("rates.csv", ["eps", "coord", "moment", "se"], res.rows(), seed)
    run.csv("rates_fit.csv", ["coord", "fitted", "target"],
            [[i, f, t] for i, (f, t) in enumerate(zip(res.fitted, res.target))])
    out = {"dt_ref": res.dt_ref, "eta": res.eta}
    for i, (f, t) in enumerate(zip(res.fitted, res.target)):
        out[f"fitted_{i}"], out[f"target_{i}"] = float(f), float(t)
    if res.notice:
        out["notice"] = res.notice
    return out


def _boundary(params, k, seed, run):
    from .simulator import boundary_hit_probability
    tab = boundary_hit_probability(params, _state(k, "x0", params.m), float(k["t"]),
                                   k["eps"], _positive_int(k, "n_paths"), k["dt"], seed)
    run.csv("boundary.csv", ["eps", "estimate", "ci_low", "ci_high"], tab.rows(), seed)
    return {"slope": tab.slope, "max_ci_over_eps": float(np.max(tab.ci_high / tab.eps))}


def _lyapunov(params, k, seed, run):
    from .ergodic import default_drift_grid, drift_certificate
    grid = default_drift_grid(params.m, float(k["r_max"]), _positive_int(k, "n_radii"),
                              _positive_int(k, "n_dirs"))
    cert = drift_certificate(params, grid, k["c2_cap"], float(k["quad_tol"]))
    run.csv("lyapunov.csv", [f"x{i}" for i in range(params.m)] + ["V", "LV", "slack"],
            [list(x) + [v, lv, -cert.c1 * v + cert.c2 - lv]
             for x, v, lv in zip(cert.grid, cert.V, cert.LV)])
    run.json("lyapunov.json", cert.to_dict())
    return {"c1": cert.c1, "c2": cert.c2, "residual": cert.lyap.residual,
            "certified": bool(cert.ok)}


def _ergodicity(params, k, seed, run):
    from .ergodic import ergodicity_experiment
    m = params.m
    x = _state(k, "x", m, 0.0) if k["x"] is not None else np.eye(m)[0] * 5.0
    y = _state(k, "y", m, 0.0) if k["y"] is not None else np.eye(m)[-1] * 5.0
    tab = ergodicity_experiment(params, x, y, k["t_grid"], _positive_int(k, "n_paths"),
                                seed, k["dt"], _positive_int(k, "n_bins"),
                                _positive_int(k, "n_boot"))
    run.csv("decay.csv", tab.header, tab.rows(), seed)
    run.json("decay.json", {"delta_hat": tab.delta_hat, "delta_ci": list(tab.delta_ci),
                            "monotone_violations": tab.monotone_violations,
                            "notes": tab.notes, "n_paths": tab.n_paths})
    return {"delta_hat": tab.delta_hat, "delta_ci_low": tab.delta_ci[0],
            "delta_ci_high": tab.delta_ci[1],
            "monotone_violations": tab.monotone_violations}


def _besov(params, k, seed, run):
    from .density import besov_experiment
    res = besov_experiment(params, _state(k, "x_bar", params.m), float(k["t_fixed"]),
                           tuple(k["t_list"]), tuple(k["x_scales"]),
                           _positive_int(k, "n_paths"), seed, float(k["delta"]),
                           tuple(k["lam_factors"]), float(k["main_factor"]),
                           _positive_int(k, "steps"))
    run.csv("besov.csv", ["kind", "scale", "norm", "rescaled"], res.rows(), seed)
    run.csv("besov_sensitivity.csv", ["lam", "x_slope", "band_ratio"],
            [[lam, s, b] for lam, (s, b) in sorted(res.sensitivity.items())])
    return {"lam": res.lam, "x_slope": res.x_slope, "band_ratio": res.band_ratio}


def _dobrushin(params, k, seed, run):
    from .ergodic import dobrushin_check
    res = dobrushin_check(params, float(k["R"]), float(k["h"]), _positive_int(k, "n_pairs"),
                          _positive_int(k, "n_paths"), seed, k["dt"],
                          _positive_int(k, "n_bins"))
    m = params.m
    run.csv("dobrushin.csv", [f"x{i}" for i in range(m)] + [f"y{i}" for i in range(m)]
            + ["tv"], [list(a) + list(b) + [tv] for a, b, tv in res.pairs], seed)
    return {"max_tv": res.max_tv, "margin": res.margin}


EXPERIMENTS = {"simulate": _simulate, "riccati-check": _riccati_check,
               "density1d": _density1d, "invariant1d": _invariant1d,
               "condition-a": _condition_a, "rates": _rates, "boundary": _boundary,
               "lyapunov": _lyapunov, "ergodicity": _ergodicity, "besov": _besov,
               "dobrushin": _dobrushin}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(config, out, threads=None, stream=None):
    """Execute a resolved configuration; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    command = config["command"]
    params = params_from_dict(config["model"])
    used = set_threads(threads)
    r = Run(out)
    manifest = {"tool": "ajcir", "version": __version__, "backend": BACKEND,
                "threads": used if threads is not None else get_threads(),
                "started": _now(), "config": config}
    status, summary = EXIT_OK, {}
    try:
        summary = EXPERIMENTS[command](params, dict(config["experiment"]),
                                       config["seed"], r)
    except ValidationError as exc:
        status, summary = EXIT_INVALID, {"error": f"{type(exc).__name__}: {exc}"}
    except NumericalError as exc:
        status = EXIT_NUMERICAL
        summary = dict(summary, error=f"{type(exc).__name__}: {exc}",
                       traceback=traceback.format_exc(limit=4))
    manifest.update(finished=_now(), exit_status=status, artifacts=list(r.artifacts),
                    summary=summary)
    with open(r.out / "summary.txt", "w") as fh:
        for key, value in summary.items():
            if key != "traceback":
                fh.write(f"{key}: {_show(value)}\n")
    r.json("manifest.json", manifest)
    for key, value in summary.items():
        if key != "traceback":
            print(f"{key}: {_show(value)}", file=stream)
    print(f"artifacts in {r.out}", file=stream)
    return status


def _show(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# -- plot data ------------------------------------------------------------------------

def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
    if not rows:
        raise ValidationError(f"{path} is empty")
    return rows[0], [r for r in rows[1:] if r]


def _log(v):
    return math.log(v) if v > 0 else float("nan")


def _tidy(header, raw):
    nan = float("nan")
    if header == ["kind", "scale", "norm", "rescaled"]:
        out = [[f"norm_{r[0]}", float(r[1]), float(r[2]), nan, nan] for r in raw]
        return out + [["rescaled_t", float(r[1]), float(r[3]), nan, nan]
                      for r in raw if r[0] == "t"]
    rows = [[float(v) for v in r] for r in raw]
    if header[:2] == ["t", "tv"]:
        return [["TV", r[0], r[1], r[2], r[3]] for r in rows]
    if header == ["y0", "value"]:
        return [["p_t", r[0], r[1], nan, nan] for r in rows]
    if header == ["eps", "coord", "moment", "se"]:
        return [[f"coord_{int(i)}", _log(e), _log(mom), _log(mom - 1.96 * se),
                 _log(mom + 1.96 * se)] for e, i, mom, se in rows]
    if header == ["eps", "estimate", "ci_low", "ci_high"]:
        return [["P_hit", r[0], r[1], r[2], r[3]] for r in rows]
    if header[:2] == ["t", "mean_0"]:
        out = []
        for i in range(sum(1 for h in header if h.startswith("mean_"))):
            j = header.index(f"mean_{i}")
            out += [[f"mean_{i}", r[0], r[j], r[j] - 1.96 * r[j + 1],
                     r[j] + 1.96 * r[j + 1]] for r in rows]
        return out
    if header[:3] == ["t", "phi_re", "phi_im"]:
        return [[name, r[0], r[j], nan, nan]
                for j, name in enumerate(header[1:], start=1) for r in rows]
    raise ValidationError(f"unknown artifact schema: {','.join(header)}")


def emit_plot_data(artifact, out=None):
    """Long-format table (series, x, y, lo, hi) for an artifact CSV; returns its path."""
    artifact = Path(artifact)
    if not artifact.is_file():
        raise ValidationError(f"artifact not found: {artifact}")
    header, raw = _read_csv(artifact)
    try:
        tidy = _tidy(header, raw)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed artifact {artifact}: {exc}") from None
    dest = Path(out) if out is not None else artifact.parent
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / f"plot_{artifact.stem}.csv"
    with open(path, "w", newline="") as fh:
        write_rows(fh, ["series", "x", "y", "lo", "hi"], tidy)
    return path


# -- argument parsing -------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML/JSON config or manifest")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--threads", type=int, help="kernel threads (default: all)")
    common.add_argument("--out", metavar="DIR",
                        help=f"output directory (default ${OUT_ENV}/<command>)")
    common.add_argument("--model", metavar="PRESET", help="named model preset")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one experiment setting (repeatable)")
    p = _Parser(prog="ajcir", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"ajcir {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    pd = sub.add_parser("plot-data", help="tidy CSV for external plotting")
    pd.add_argument("artifact")
    pd.add_argument("--out", metavar="DIR")
    return p


def default_out(command):
    root = os.environ.get(OUT_ENV) or "ajcir-out"
    return str(Path(root) / command)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot-data":
            print(emit_plot_data(args.artifact, args.out))
            return EXIT_OK
        cfg = load_config(args.config) if args.config else {}
        overrides = [parse_override(s) for s in args.set]
        config = resolve(args.command, cfg, overrides, args.seed, args.model)
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be positive")
    except ValidationError as exc:
        print(f"ajcir: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AjcirError as exc:
        print(f"ajcir: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return run(config, args.out or default_out(args.command), args.threads)


if __name__ == "__main__":
    sys.exit(main())
