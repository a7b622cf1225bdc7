"""Command-line front end: ``mtlab <command> [options]``.

Every run writes a JSON report holding the fully resolved configuration, so
feeding a report's config back in reproduces it bit for bit. Exit status is
0 on success, 2 for invalid input and 3 for numerical failure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional

import click
import numpy as np

from . import __version__
from .errors import NumericalFailure, SaturationWarning

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ parameters


def _floatlist(s) -> list[float]:
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).split(",") if x.strip()]


_TYPES: dict[str, Callable] = {"float": float, "int": int, "str": str, "floatlist": _floatlist}

COMMON = {
    "dim": ("int", 2, "space dimension N"),
    "grid_tmin": ("float", -20.0, "grid start in t = -N ln r"),
    "grid_tmax": ("float", 60.0, "grid end in t"),
    "grid_h": ("float", 0.01, "grid step in t"),
}

COMMANDS: dict[str, dict[str, tuple]] = {
    "constants": {},
    "functional": {
        "beta": ("float", None, "exponent (default beta_N/2)"),
        "alpha": ("float", 0.0, "L^N perturbation weight"),
        "profile": ("str", "gaussian", "named profile, or 'moser' with --k"),
        "k": ("float", 5.0, "Moser parameter for profile=moser"),
    },
    "moser-diverge": {
        "alpha": ("float", 1.0, "L^N perturbation weight"),
        "R": ("float", 1.0, "support radius"),
        "k_max": ("float", 40.0, "largest k"),
        "k_step": ("float", 10.0, "k spacing, starting at k_step"),
    },
    "lower-bound": {
        "beta": ("float", None, "exponent (default beta_N/2)"),
        "alpha": ("float", 0.0, "L^N perturbation weight"),
        "profile": ("str", "gaussian", "named profile"),
        "t_values": ("floatlist", "0.001,0.002,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1", "scaling parameters"),
    },
    "ishiwata": {
        "beta": ("float", 0.1, "exponent"),
        "alpha": ("float", 0.0, "L^N perturbation weight"),
        "profile": ("str", "gaussian", "named profile"),
    },
    "blowup": {
        "deltas": ("floatlist", "0,0.1,0.5", "moment exponents"),
    },
    "b2": {},
    "green": {
        "alpha": ("float", 0.0, "perturbation weight in [0,1)"),
        "direct": ("int", 0, "1 to also solve the alpha-equation directly"),
    },
    "testfn": {
        "eps": ("float", 1e-3, "bubble scale"),
        "alpha": ("float", 0.05, "L^N perturbation weight"),
    },
    "maximize": {
        "beta": ("float", None, "exponent (default beta_N/2)"),
        "alpha": ("float", 0.0, "L^N perturbation weight"),
        "seed": ("str", "gaussian", "seed profile name"),
        "budget": ("int", 2000, "iteration budget"),
    },
}


def _schema(command: str) -> dict[str, tuple]:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    return {**COMMON, **COMMANDS[command]}


def _norm_key(key: str) -> str:
    return key.strip().replace("-", "_")


def parse_config_file(path, command: str) -> dict[str, Any]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    schema = _schema(command)
    out: dict[str, Any] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _norm_key(key)
        if key == "command":
            if val != command:
                raise ConfigError(f"{path}:{lineno}: file is for command {val!r}, not {command!r}")
            continue
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r} for {command}")
        try:
            out[key] = _TYPES[schema[key][0]](val)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def resolve_config(command: str, file_values: Optional[dict] = None, overrides: Optional[dict] = None) -> dict:
    """Defaults, then file values, then explicit overrides; unknown keys are errors."""
    schema = _schema(command)
    cfg: dict[str, Any] = {}
    for src in (file_values or {}), (overrides or {}):
        for key, val in src.items():
            key = _norm_key(key)
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} for {command}")
            if val is None:
                continue
            try:
                cfg[key] = _TYPES[schema[key][0]](val)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
    for key, (typ, default, _) in schema.items():
        if key not in cfg and default is not None:
            cfg[key] = _TYPES[typ](default)
    return {"command": command, **{k: cfg.get(k) for k in schema}}


# ------------------------------------------------------------ commands


def _dim(cfg):
    from .dims import make_dimension

    return make_dimension(cfg["dim"])


def _grid(cfg, dim):
    from .radial import RadialGrid

    return RadialGrid.uniform(dim, t_min=cfg["grid_tmin"], t_max=cfg["grid_tmax"], h=cfg["grid_h"])


def _beta(cfg, dim):
    if cfg.get("beta") is None:
        cfg["beta"] = dim.beta_N / 2
    return cfg["beta"]


def _profile(name, dim, grid, k=5.0):
    from .battery import named_profile
    from .sequences import MoserParams, normalized_moser

    if name == "moser":
        return normalized_moser(MoserParams(k=k), dim, grid=grid)
    return named_profile(name, dim, grid)


def _cmd_constants(cfg):
    from .dims import harmonic_sum

    d = _dim(cfg)
    res = {"omega": d.omega, "beta_N": d.beta_N, "c_N": d.c_N, "conj": d.conj, "harmonic": harmonic_sum(d)}
    return res, {}, None, None


def _cmd_functional(cfg):
    from .functional import FunctionalParams, mt_functional, mt_functional_psi, psi_gap
    from .radial import full_sobolev_norm, functional_change_of_variables

    d = _dim(cfg)
    p = FunctionalParams(beta=_beta(cfg, d), alpha=cfg["alpha"])
    u = _profile(cfg["profile"], d, _grid(cfg, d), cfg["k"])
    ev = mt_functional(u, p, detailed=True)
    lhs, rhs = functional_change_of_variables(u, p.beta * (1 + p.alpha * u.lp_power(d.N)) ** (1 / (d.N - 1)))
    res = {
        "value": ev.value,
        "value_psi": mt_functional_psi(u, p),
        "psi_gap": psi_gap(u, p),
        "norm": full_sobolev_norm(u),
        "lN_mass": u.lp_power(d.N),
        "grad_power": u.grad_power(),
        "change_of_variables": {"lhs": lhs, "rhs": rhs},
    }
    return res, {"saturated_nodes": ev.saturated}, u, None


def _cmd_moser_diverge(cfg):
    from .sequences import moser_divergence_table

    d = _dim(cfg)
    n = int(math.floor(cfg["k_max"] / cfg["k_step"] + 1e-9))
    if n < 1:
        raise ConfigError("k_max must be at least k_step")
    ks = [cfg["k_step"] * (i + 1) for i in range(n)]
    rows = moser_divergence_table(d, cfg["alpha"], cfg["R"], ks)
    limit = cfg["R"] ** d.N * d.omega / d.N
    res = {
        "rows": [{"k": k, "value": v} for k, v in rows],
        "ball_volume": limit,
        "last_over_volume": rows[-1][1] / limit,
        "monotone_increasing": all(b[1] > a[1] for a, b in zip(rows, rows[1:])),
    }
    return res, {}, None, (["k", "value"], [list(r) for r in rows])


def _cmd_lower_bound(cfg):
    from .functional import FunctionalParams, lower_bound_curve, lower_bound_threshold

    d = _dim(cfg)
    p = FunctionalParams(beta=_beta(cfg, d), alpha=cfg["alpha"])
    v = _profile(cfg["profile"], d, _grid(cfg, d))
    curve = lower_bound_curve(v, p, cfg["t_values"])
    thr = lower_bound_threshold(p, d)
    best = max(curve, key=lambda row: row[1])
    res = {
        "threshold": thr,
        "curve": [{"t": t, "value": J, "expansion": E} for t, J, E in curve],
        "best_t": best[0],
        "best_value": best[1],
        "exceeds_threshold": best[1] > thr,
    }
    return res, {}, None, (["t", "value", "expansion"], [list(r) for r in curve])


def _cmd_ishiwata(cfg):
    from .functional import FunctionalParams, ishiwata_derivative

    if cfg["dim"] != 2:
        raise ConfigError("ishiwata is defined for dim = 2")
    d = _dim(cfg)
    p = FunctionalParams(beta=cfg["beta"], alpha=cfg["alpha"])
    v = _profile(cfg["profile"], d, _grid(cfg, d))
    r = ishiwata_derivative(v, p)
    res = {
        "derivative": r.derivative,
        "series": r.series,
        "forward": r.forward,
        "backward": r.backward,
        "relative_gap": abs(r.derivative - r.series) / abs(r.series),
        "sign": int(np.sign(r.derivative)),
    }
    return res, {"iterations": r.terms}, v, None


def _cmd_blowup(cfg):
    from .sequences import blowup_mass, blowup_profile, liouville_moment

    d = _dim(cfg)
    moments = []
    for delta in cfg["deltas"]:
        quad_val, closed = liouville_moment(d, delta)
        moments.append({"delta": delta, "quadrature": quad_val, "closed_form": closed})
    res = {"mass": blowup_mass(d), "moments": moments}
    return res, {}, blowup_profile(d), None


def _cmd_b2(cfg):
    from .odes import b2_family_lower_bound, gaussian_quotient, gn_ground_state

    if cfg["dim"] != 2:
        raise ConfigError("b2 is defined for dim = 2")
    d = _dim(cfg)
    gs = gn_ground_state(grid=_grid(cfg, d))
    fam, params = b2_family_lower_bound()
    res = {
        "b2": gs.b2,
        "b2_from_l2": 2.0 / gs.l2_squared,
        "q0": gs.q0,
        "residual": gs.residual,
        "gaussian_quotient": gaussian_quotient(),
        "family_lower_bound": fam,
        "family_params": list(params),
        "margin_over_1_2pi": gs.b2 - 1.0 / (2.0 * math.pi),
    }
    return res, {"bracket": list(gs.bracket)}, gs.profile, None


def _cmd_green(cfg):
    from .odes import green_alpha, green_direct_check, green_g0, green_solve

    if not 0.0 <= cfg["alpha"] < 1.0:
        raise ConfigError("alpha must lie in [0, 1)")
    d = _dim(cfg)
    grid = _grid(cfg, d)
    g0 = green_g0(d, grid=grid)
    g = green_alpha(g0, cfg["alpha"], d)
    res = {
        "A_0": g0.A_alpha,
        "A_alpha": g.A_alpha,
        "log_coefficient": g.log_coefficient,
        "norm_N_power": g.norm_N,
        "weak_defect": green_direct_check(g, d),
    }
    if cfg["direct"]:
        gd = green_solve(d, alpha=cfg["alpha"], grid=grid)
        res["A_alpha_direct"] = gd.A_alpha
        res["direct_minus_scaled"] = gd.A_alpha - g.A_alpha
    return res, {"bracket": list(g0.bracket)}, g.profile, None


def _cmd_testfn(cfg):
    from .odes import green_alpha, green_g0
    from .sequences import TestFunctionParams, carleson_chang_bound, test_function, test_function_excess

    d = _dim(cfg)
    g = green_alpha(green_g0(d), cfg["alpha"], d)
    tp = TestFunctionParams(eps=cfg["eps"], alpha=cfg["alpha"], green=g)
    tf = test_function(tp, d)
    res = {
        "c": tf.c,
        "A": tf.A,
        "A_alpha": tf.A_alpha,
        "excess": test_function_excess(tp, d, tf),
        "carleson_chang_bound": carleson_chang_bound(d, tf.A_alpha),
        "continuity_defect": tf.continuity_defect,
        "norm_defect": tf.norm_defect,
    }
    return res, {"iterations": tf.iterations}, tf.profile, None


def _cmd_maximize(cfg):
    from .functional import FunctionalParams
    from .maximizer import maximize, seed_profile

    d = _dim(cfg)
    p = FunctionalParams(beta=_beta(cfg, d), alpha=cfg["alpha"])
    seed = seed_profile(cfg["seed"], d, _grid(cfg, d))
    rep = maximize(p, d, seed, budget=cfg["budget"])
    res = {
        "value": rep.value,
        "multipliers": {
            "lambda": rep.multipliers.lam,
            "alpha_eps": rep.multipliers.alpha_eps,
            "gamma_eps": rep.multipliers.gamma_eps,
        },
        "el_residual": rep.el_residual,
        "concentration": {
            "c0": rep.concentration.c0,
            "lN_mass": rep.concentration.lN_mass,
            "r_concentration": rep.concentration.r_concentration,
        },
        "converged": rep.converged,
        "experimental": rep.experimental,
    }
    diag = {"iterations": rep.iterations, "rejected_saturated_steps": rep.rejected_saturated}
    return res, diag, rep.profile, None


_RUNNERS = {
    "constants": _cmd_constants,
    "functional": _cmd_functional,
    "moser-diverge": _cmd_moser_diverge,
    "lower-bound": _cmd_lower_bound,
    "ishiwata": _cmd_ishiwata,
    "blowup": _cmd_blowup,
    "b2": _cmd_b2,
    "green": _cmd_green,
    "testfn": _cmd_testfn,
    "maximize": _cmd_maximize,
}


# ------------------------------------------------------------ reporting


def _clean(x):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def execute(cfg: dict, timing: bool = False) -> tuple[int, dict, Any, Any]:
    """Run a resolved config; returns (exit status, report, profile, table)."""
    from .radial import tail_estimates

    cfg = dict(cfg)
    start = time.perf_counter()
    status = EXIT_OK
    results: dict = {}
    diag: dict = {}
    profile = table = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            results, diag, profile, table = _RUNNERS[cfg["command"]](cfg)
            if results.get("converged") is False:
                status = EXIT_NUMERICAL
        except ConfigError as exc:
            status, diag = EXIT_INVALID, {"error": str(exc)}
        except NumericalFailure as exc:
            status, diag = EXIT_NUMERICAL, {"error": f"{type(exc).__name__}: {exc}"}
        except ValueError as exc:
            status, diag = EXIT_INVALID, {"error": f"{type(exc).__name__}: {exc}"}
    sat = sum(1 for w in caught if issubclass(w.category, SaturationWarning))
    diagnostics = {
        "saturation_events": sat + int(diag.pop("saturated_nodes", 0)),
        "tail_estimates": tail_estimates(profile) if profile is not None else None,
        "iterations": diag.pop("iterations", None),
        "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
        **diag,
    }
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg,
        "results": results,
        "diagnostics": diagnostics,
        "wall_time_s": (time.perf_counter() - start) if timing else None,
        "version": __version__,
    }
    return status, _clean(report), profile, table


def dumps_report(report: dict) -> str:
    # repr floats are the shortest strings that round-trip exactly
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def write_outputs(report, profile, table, output: Optional[str], fmt: str) -> None:
    from .radial import profile_to_csv

    text = dumps_report(report)
    if fmt == "csv":
        if output is None:
            raise ConfigError("--format csv needs --output")
        if profile is not None:
            profile_to_csv(profile, output)
        elif table is not None:
            Path(output).write_text(_table_csv(*table), encoding="utf-8", newline="\n")
        else:
            raise ConfigError(f"{report['config']['command']} has no profile or table to write as CSV")
        Path(str(output) + ".json").write_text(text, encoding="utf-8", newline="\n")
    elif output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8", newline="\n")


# ------------------------------------------------------------ click surface


def _make_command(name: str):
    schema = _schema(name)

    def callback(config_path, output, fmt, timing, **flags):
        try:
            file_vals = parse_config_file(config_path, name) if config_path else {}
            cfg = resolve_config(name, file_vals, flags)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INVALID)
        status, report, profile, table = execute(cfg, timing=timing)
        try:
            write_outputs(report, profile, table, output, fmt)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INVALID)
        if status != EXIT_OK:
            click.echo(f"error: {report['diagnostics'].get('error', 'run did not converge')}", err=True)
        sys.exit(status)

    cmd = click.Command(name, callback=callback, help=f"Run the {name} computation.")
    params = []
    for key, (typ, default, helptext) in schema.items():
        flag = "--" + (key if key == "R" else key.replace("_", "-"))
        ptype = {"float": float, "int": int}.get(typ, str)
        shown = f" [default: {default}]" if default is not None else ""
        params.append(click.Option([flag, key], type=ptype, default=None, help=helptext + shown))
    params += [
        click.Option(["--config", "config_path"], type=click.Path(exists=True, dir_okay=False), default=None),
        click.Option(["--output", "-o", "output"], type=click.Path(dir_okay=False), default=None),
        click.Option(["--format", "fmt"], type=click.Choice(["json", "csv"]), default="json"),
        click.Option(["--timing"], is_flag=True, help="record wall time (breaks bit-identical reports)"),
    ]
    cmd.params = params
    return cmd


@click.group()
@click.version_option(__version__, prog_name="mtlab")
def main():
    """Numerics for the perturbed Moser-Trudinger problem."""


for _name in COMMANDS:
    main.add_command(_make_command(_name))


def _sweep_entry(args):
    cfg, idx = args
    status, report, _, _ = execute(cfg)
    return idx, status, report


def _flatten(prefix, x, out):
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}{k}.", v, out)
    elif isinstance(x, (int, float, str, bool)) or x is None:
        out[prefix[:-1]] = x


def run_sweep(command: str, base: dict, axis: str, values: list, jobs: int = 1) -> list[dict]:
    """Rows ordered by input index, one per axis value; failures stay in their row."""
    schema = _schema(command)
    key = _norm_key(axis)
    if key not in schema or schema[key][0] not in ("float", "int"):
        raise ConfigError(f"{axis!r} is not a numeric parameter of {command}")
    cfgs = [resolve_config(command, base, {key: v}) for v in values]
    tasks = [(c, i) for i, c in enumerate(cfgs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_sweep_entry, tasks))
    else:
        done = [_sweep_entry(t) for t in tasks]
    rows = []
    for idx, status, report in sorted(done, key=lambda x: x[0]):
        row = {"index": idx, key: report["config"][key], "status": status}
        flat: dict = {}
        _flatten("", report["results"], flat)
        row.update(flat)
        if "error" in report["diagnostics"]:
            row["error"] = report["diagnostics"]["error"]
        rows.append(row)
    return rows


def sweep_csv(rows: list[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in cols])
    return buf.getvalue()


@main.command("sweep")
@click.argument("command", type=click.Choice(sorted(COMMANDS)))
@click.option("--axis", required=True, help="numeric parameter to vary")
@click.option("--values", "values_text", required=True, help="comma-separated values")
@click.option("--set", "sets", multiple=True, help="fixed parameter as key=value (repeatable)")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--jobs", type=int, default=1, help="parallel worker processes")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None)
def sweep(command, axis, values_text, sets, config_path, jobs, output):
    """Run COMMAND once per value of AXIS and collect one CSV row per value."""
    try:
        base = parse_config_file(config_path, command) if config_path else {}
        for item in sets:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            base[_norm_key(k)] = v.strip()
        values = _floatlist(values_text)
        rows = run_sweep(command, base, axis, values, jobs=jobs)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID)
    text = sweep_csv(rows)
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    sys.exit(EXIT_OK if all(r["status"] == EXIT_OK for r in rows) else EXIT_NUMERICAL)


if __name__ == "__main__":
    main()
