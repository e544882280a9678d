"""Command-line entry point, configuration and data export.

Usage::

    kdvda <subcommand> [--config FILE] [--set section.key=value ...] --out DIR

Exit codes: 0 success, 1 blow-up (or a failed selftest), 2 non-convergence,
3 infeasible minimal m, 4 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import spectral as sp
from .assimilation import (
    AssimilationRun,
    FitError,
    case_summary,
    fit_decay,
    relative_to_free_decay,
    run_assimilation,
)
from .attractor import (
    ConvergenceError,
    WMapError,
    classify_terminal,
    integrate_determining_form,
    solve_steady_state,
    verify_steady_by_flow,
)
from .bounds import BoundInputs, InfeasibleError, check_conditions, compute_bounds, minimal_m
from .functionals import phi1, phi2
from .integrator import BlowUpError, ModelParams, constant_window, integrate

SUBCOMMANDS = ("simulate", "assimilate", "steady", "bounds", "dform", "sweep", "selftest")
WORKERS_ENV = "KDVDA_WORKERS"
GENERATOR = "numpy.random.default_rng (PCG64)"

EXIT_OK, EXIT_BLOWUP, EXIT_NOCONV, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


# ---- configuration --------------------------------------------------------


def _modes(text: str) -> tuple[tuple[int, float, float], ...]:
    """'k amp phase; k amp phase' -> triples."""
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ValueError(f"expected 'k amplitude phase', got {chunk.strip()!r}")
        out.append((int(parts[0]), float(parts[1]), float(parts[2])))
    return tuple(out)


def _format_modes(modes) -> str:
    return "; ".join(f"{k} {a!r} {p!r}" for k, a, p in modes)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_KINDS = {
    "float": (float, repr),
    "int": (int, str),
    "str": (str, str),
    "bool": (_bool, lambda v: "true" if v else "false"),
    "modes": (_modes, _format_modes),
    "floats": (_floats, lambda v: " ".join(repr(x) for x in v)),
    "optfloat": (_opt_float, lambda v: "auto" if v is None else repr(v)),
}

SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "model": {
        "L": ("float", 2 * math.pi),
        "N": ("int", 128),
        "gamma": ("float", 0.5),
        "mu": ("float", 0.0),
        "m": ("int", 8),
        "epsilon": ("float", 0.0),
        "dt": ("float", 1e-3),
        "T": ("float", 10.0),
        "forcing": ("modes", ((1, 1.0, 0.0),)),
    },
    "init": {
        "seed": ("int", 1),
        "kmax": ("int", 8),
        "h2": ("float", 10.0),
        "policy": ("str", sp.ENFORCED_ZERO),
    },
    "output": {
        "sample_every": ("int", 100),
        "snapshots": ("bool", False),
    },
    "assimilate": {
        "ref_seed": ("int", 1),
        "nudged_seed": ("int", 2),
        "spinup": ("float", 50.0),
        "horizon": ("float", 100.0),
        "obs_stride": ("int", 1),
        "floor_guard": ("float", 1e-11),
        "control_run": ("bool", True),
    },
    "bounds": {
        "alpha": ("float", 1.0),
        "beta": ("float", 4 / 3),
        "rho": ("float", 4.0),
        "c": ("float", 1.0),
        "f_l2": ("optfloat", None),
        "f_linf": ("optfloat", None),
        "f_h2": ("optfloat", None),
    },
    "steady": {
        "tol": ("float", 1e-12),
        "flow_T": ("float", 10.0),
    },
    "dform": {
        "spinup": ("float", 30.0),
        "window": ("float", 1.0),
        "d_tau": ("float", 2.0),
        "tau_end": ("float", 6.0),
        "perturbation": ("modes", ((3, 0.5, 0.3), (1, 0.2, 0.0))),
        "w_tol": ("float", 1e-8),
        "r_proxy": ("optfloat", None),
    },
    "sweep": {
        "experiment": ("str", "bounds"),
        "param": ("str", "mu"),
        "values": ("floats", (1e6, 1e7, 1e8, 1e9)),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        section, name = key.split(".", 1)
        return self.values[section][name]

    def model_params(self) -> ModelParams:
        mdl = self.values["model"]
        g = sp.GridSpec(mdl["L"], mdl["N"])
        f = sp.from_modes(g, mdl["forcing"])
        return ModelParams(g, f, mdl["gamma"], mdl["mu"], mdl["m"], mdl["epsilon"], mdl["dt"])

    def bound_inputs(self) -> BoundInputs:
        b, mdl = self.values["bounds"], self.values["model"]
        fn = sp.norms(self.model_params().forcing)
        return BoundInputs(
            gamma=mdl["gamma"], L=mdl["L"], mu=mdl["mu"], rho=b["rho"], alpha=b["alpha"],
            beta=b["beta"], epsilon=mdl["epsilon"], c_universal=b["c"],
            f_l2=fn.l2 if b["f_l2"] is None else b["f_l2"],
            f_linf=fn.linf if b["f_linf"] is None else b["f_linf"],
            f_h2=fn.h2 if b["f_h2"] is None else b["f_h2"],
        )


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    b = v["bounds"]
    if not 1 <= b["alpha"] < 2:
        raise ConfigError(f"bounds.alpha={b['alpha']} violates alpha in [1, 2)")
    if v["init"]["policy"] not in (sp.ENFORCED_ZERO, sp.FREE):
        raise ConfigError(f"init.policy must be {sp.ENFORCED_ZERO} or {sp.FREE}")
    if v["sweep"]["experiment"] not in ("bounds", "assimilate", "probe"):
        raise ConfigError("sweep.experiment must be bounds, assimilate or probe")
    for key in ("sample_every",):
        if v["output"][key] < 1:
            raise ConfigError(f"output.{key} must be >= 1")
    try:
        cfg.model_params()
        if cfg.subcommand in ("assimilate", "bounds", "sweep"):
            cfg.bound_inputs()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(source: str = "", subcommand: str = "simulate", overrides=()) -> RunConfig:
    """Parse sectioned key=value text; unknown sections and keys are rejected."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    raw = {s: dict(cp[s]) for s in cp.sections()}
    if "run" in raw:
        sub = raw.pop("run")
        subcommand = sub.pop("subcommand", subcommand)
        if sub:
            raise ConfigError(f"unknown key(s) in [run]: {', '.join(sorted(sub))}")
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        section, name = key.strip().split(".", 1)
        raw.setdefault(section, {})[name] = value.strip()

    values = {}
    for section, keys in SCHEMA.items():
        given = raw.pop(section, {})
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        resolved = {}
        for name, (kind, default) in keys.items():
            if name in given:
                try:
                    resolved[name] = _KINDS[kind][0](given[name])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{section}.{name}: expected {kind}, got {given[name]!r} ({exc})")
            else:
                resolved[name] = default
        values[section] = resolved
    if raw:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(raw))}")
    cfg = RunConfig(subcommand, values)
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    _validate(cfg)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Full resolved config; parse_config(serialize_config(c)) == c."""
    out = io.StringIO()
    out.write(f"[run]\nsubcommand = {cfg.subcommand}\n")
    for section, keys in SCHEMA.items():
        out.write(f"\n[{section}]\n")
        for name, (kind, _) in keys.items():
            out.write(f"{name} = {_KINDS[kind][1](cfg.values[section][name])}\n")
    return out.getvalue()


# ---- export ---------------------------------------------------------------


def _cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def export_csv(series, columns, path) -> None:
    """Write rows (mappings or sequences) with a header; floats at 17 significant digits."""
    columns = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in series:
            if isinstance(row, dict):
                row = [row[c] for c in columns]
            elif hasattr(row, "__dataclass_fields__"):
                row = [getattr(row, c) for c in columns]
            w.writerow([_cell(x) for x in row])


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(x) for x in r] for r in rows[1:]]


# ---- manifest -------------------------------------------------------------


def build_id() -> str:
    h = hashlib.sha1()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if hasattr(x, "__dataclass_fields__"):
        return _jsonable({k: getattr(x, k) for k in x.__dataclass_fields__})
    return x


def _bound_inputs_or_none(cfg: RunConfig):
    try:
        return _jsonable(cfg.bound_inputs())
    except ValueError:
        return None


def write_manifest(out: Path, cfg: RunConfig, summary: dict, started: float, status: str) -> dict:
    manifest = {
        "artifact": "kdvda",
        "version": __version__,
        "build_id": build_id(),
        "numpy": np.__version__,
        "generator": GENERATOR,
        "subcommand": cfg.subcommand,
        "config": _jsonable(cfg.values),
        "config_text": serialize_config(cfg),
        "bound_inputs": _bound_inputs_or_none(cfg),
        "status": status,
        "wall_clock_s": time.time() - started,
        "summary": _jsonable(summary),
        "notes": "floating-point results are reproducible per build; reduction order follows numpy's FFT",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


# ---- experiments ----------------------------------------------------------


def _initial(cfg: RunConfig, params: ModelParams) -> sp.SpectralField:
    ini = cfg.values["init"]
    u = sp.random_field(params.grid, ini["seed"], min(ini["kmax"], params.grid.dealias_cutoff), ini["h2"])
    return sp.SpectralField(params.grid, u.coeffs, ini["policy"])


def _table_dict(table) -> dict:
    return {"m": table.m, **{n: {"lhs": lhs, "rhs": rhs, "ok": ok} for n, lhs, rhs, ok in table.rows()}}


def run_simulate(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model_params()
    T = cfg["model.T"]
    traj = integrate(_initial(cfg, p), 0.0, T, p.replace(mu=0.0),
                     sample_every=cfg["output.sample_every"], record_norms=True)
    rows = [
        {"t": t, "l2": n.l2, "h1": n.h1, "h2": n.h2, "linf": n.linf, "phi1": phi1(s), "phi2": phi2(s)}
        for t, n, s in zip(traj.times, traj.norms, traj.states)
    ]
    export_csv(rows, ["t", "l2", "h1", "h2", "linf", "phi1", "phi2"], out / "trajectory.csv")
    (out / "final_state.txt").write_text(sp.write_field(traj.state(-1)))
    return {"samples": len(rows), "final": rows[-1]}


def run_assimilate(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model_params()
    a = cfg.values["assimilate"]
    ini = cfg.values["init"]
    common = dict(ref_seed=a["ref_seed"], nudged_seed=a["nudged_seed"], spinup=a["spinup"],
                  obs_stride=a["obs_stride"], horizon=a["horizon"],
                  sample_every=cfg["output.sample_every"], init_kmax=ini["kmax"], init_h2=ini["h2"])
    run = run_assimilation(AssimilationRun(p, **common), keep_states=False)
    cols = ["t", "dl2", "dh1", "dh2", "psi", "case"]
    export_csv(run.error_series, cols, out / "errors.csv")
    t, d = run.series("t"), run.series("dl2")
    fit = fit_decay(t, d, floor_guard=a["floor_guard"])
    inputs = cfg.bound_inputs()
    table = check_conditions(compute_bounds(inputs), inputs, p.m)
    summary = {
        "decay_fit": fit,
        "min_dl2": float(d.min()),
        "terminal_dl2": float(d[-1]),
        "psi_case": case_summary(run.error_series),
        "sup_low_h2_reference": run.ref_sup_low_h2,
        "rho_hypothesis": "unverifiable exactly; empirical sup recorded",
        "condition_table": _table_dict(table),
    }
    if a["control_run"]:
        ctrl = run_assimilation(AssimilationRun(p.replace(mu=0.0), **common), keep_states=False)
        export_csv(ctrl.error_series, cols, out / "control_errors.csv")
        cd = ctrl.series("dl2")
        summary["control_terminal_dl2"] = float(cd[-1])
        summary["control_relative_to_free_decay"] = float(
            relative_to_free_decay(ctrl.series("t"), cd, p.gamma)[-1])
    return summary


def run_steady(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model_params()
    s = cfg.values["steady"]
    ss = solve_steady_state(p, tol=s["tol"], c_universal=cfg["bounds.c"])
    drift = verify_steady_by_flow(ss.u_star, p, s["flow_T"])
    (out / "steady_state.txt").write_text(sp.write_field(ss.u_star))
    n = sp.norms(ss.u_star)
    return {"residual_l2": ss.residual_l2, "iterations": ss.iterations, "bounds_ok": ss.bounds_ok,
            "bound_slack": ss.bound_slack, "flow_drift_h2": drift, "l2": n.l2, "h2": n.h2}


def run_bounds(cfg: RunConfig, out: Path) -> dict:
    inputs = cfg.bound_inputs()
    rep = compute_bounds(inputs)
    export_csv(sorted(rep.as_dict().items()), ["name", "value"], out / "bounds.csv")
    table = check_conditions(rep, inputs, cfg["model.m"])
    export_csv(table.rows(), ["condition", "lhs", "rhs", "ok"],
               out / "conditions.csv")
    summary = {"bounds": rep.as_dict(),
               "condition_table": _table_dict(table)}
    try:
        summary["minimal_m"] = minimal_m(inputs, report=rep)
    except InfeasibleError as exc:
        summary["minimal_m"] = None
        summary["infeasible"] = str(exc)
        raise _Partial(summary, exc)
    return summary


def run_dform(cfg: RunConfig, out: Path) -> dict:
    p = cfg.model_params()
    d = cfg.values["dform"]
    ss = solve_steady_state(p, tol=cfg["steady.tol"], c_universal=cfg["bounds.c"])
    base = sp.project_low(ss.u_star, p.m)
    pert = sp.project_low(sp.from_modes(p.grid, d["perturbation"]), p.m) if d["perturbation"] else sp.zeros(p.grid)
    v0 = constant_window(base + pert, 0.0, d["spinup"] + d["window"], p.m)
    states = integrate_determining_form(
        v0, p, ss.u_star, d["d_tau"], d["tau_end"], d["spinup"], tol=d["w_tol"], r_proxy=d["r_proxy"])
    export_csv([(s.tau, s.theta, s.rho_tau) for s in states], ["tau", "theta", "rho"], out / "dform.csv")
    last = states[-1]
    return {"terminal": {"tau": last.tau, "theta": last.theta, "rho": last.rho_tau, "gap": last.gap},
            "classification": classify_terminal(states), "steps": len(states) - 1,
            "max_collinearity": max(s.collinearity for s in states)}


def _override(param: str, value: float) -> str:
    key = param if "." in param else f"model.{param}"
    section, name = key.split(".", 1)
    kind = SCHEMA.get(section, {}).get(name, ("float",))[0]
    if kind == "int":
        if value != int(value):
            raise ConfigError(f"{key} needs integer sweep values, got {value}")
        return f"{key}={int(value)}"
    return f"{key}={value!r}"


def _sweep_point(args):
    text, param, value = args
    cfg = parse_config(text, "sweep", [_override(param, value)])
    exp = cfg["sweep.experiment"]
    row = {"value": value}
    if exp == "bounds":
        inputs = cfg.bound_inputs()
        rep = compute_bounds(inputs)
        row.update({k: getattr(rep, k) for k in ("r0", "r1", "r2", "r_inf", "c3")})
        try:
            row["minimal_m"] = minimal_m(inputs, report=rep)
        except InfeasibleError:
            row["minimal_m"] = -1
    else:
        p = cfg.model_params()
        a = cfg.values["assimilate"]
        if exp == "probe":
            from .assimilation import determining_modes_probe

            pr = determining_modes_probe(p, p.m, (a["ref_seed"], a["nudged_seed"]), a["horizon"], a["spinup"])
            row.update({"terminal_dl2": pr.terminal_l2, "synchronized": pr.synchronized})
        else:
            run = run_assimilation(AssimilationRun(
                p, ref_seed=a["ref_seed"], nudged_seed=a["nudged_seed"], spinup=a["spinup"],
                horizon=a["horizon"], obs_stride=a["obs_stride"], sample_every=cfg["output.sample_every"]),
                keep_states=False)
            d = run.series("dl2")
            row["terminal_dl2"] = float(d[-1])
            try:
                row["rate"] = fit_decay(run.series("t"), d, a["floor_guard"]).rate
            except FitError:
                row["rate"] = float("nan")
    return row


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, min(4, os.cpu_count() or 1))


def run_sweep(cfg: RunConfig, out: Path) -> dict:
    text = serialize_config(cfg)
    param = cfg["sweep.param"]
    vals = sorted(cfg["sweep.values"])
    jobs = [(text, param, v) for v in vals]
    n = workers()
    if n == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    rows.sort(key=lambda r: r["value"])
    cols = list(rows[0]) if rows else ["value"]
    export_csv(rows, cols, out / "sweep.csv")
    return {"points": len(rows), "param": param, "workers": n}


def run_selftest(cfg: RunConfig, out: Path) -> dict:
    """Quick invariant checks across modules."""
    results = {}
    g = sp.GridSpec(2 * math.pi, 64)
    u = sp.from_function(g, lambda x: np.cos(5 * x))
    err = np.max(np.abs(sp.derivative(u, 2).coeffs - (-25) * u.coeffs))
    results["spectral_derivative"] = bool(err < 1e-12)
    a = sp.random_field(g, 3, 6, h2_norm=2.0)
    n = sp.norms(a)
    results["agmon"] = bool(n.linf <= math.sqrt(n.l2 * n.h1) * (1 + 1e-12))
    results["parseval"] = bool(abs(sp.inner(a, a) - sp.integrate_physical(a.physical() ** 2, g.L))
                               < 1e-12 * n.l2**2)
    p = ModelParams(g, sp.zeros(g), gamma=0.5, dt=1e-3)
    w = integrate(a, 0.0, 1.0, p, sample_every=1000, include_advection=True, record_norms=False)
    ratio = sp.sobolev_norm(w.coeffs[-1], g, 0) / n.l2
    results["damping_law"] = bool(abs(ratio - math.exp(-0.5)) < 1e-8)
    ss = solve_steady_state(ModelParams(g, sp.from_modes(g, [(1, 1.0, 0.0)]), gamma=1.0))
    results["steady_state"] = bool(ss.residual_l2 < 1e-12 and all(ss.bounds_ok.values()))
    r1 = compute_bounds(BoundInputs(gamma=1.0, mu=1e6))
    r2 = compute_bounds(BoundInputs(gamma=1.0, mu=1e7))
    results["bounds_monotone_in_mu"] = bool(r2.r2 >= r1.r2 and r2.r1 >= r1.r1)
    export_csv(sorted(results.items()), ["check", "passed"], out / "selftest.csv")
    for name, ok in results.items():
        print(f"{name:24s} {'PASS' if ok else 'FAIL'}")
    if not all(results.values()):
        raise _SelftestFailure(results)
    return results


class _Partial(Exception):
    def __init__(self, summary, cause):
        self.summary = summary
        self.cause = cause


class _SelftestFailure(Exception):
    def __init__(self, results):
        self.results = results


RUNNERS = {
    "simulate": run_simulate,
    "assimilate": run_assimilate,
    "steady": run_steady,
    "bounds": run_bounds,
    "dform": run_dform,
    "sweep": run_sweep,
    "selftest": run_selftest,
}


def dispatch(cfg: RunConfig, out) -> tuple[int, dict]:
    """Run the configured experiment; returns (exit code, manifest)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        # overflow on the way to a blow-up is reported by the guard, not numpy
        with np.errstate(over="ignore", invalid="ignore"):
            summary = RUNNERS[cfg.subcommand](cfg, out)
        code, status = EXIT_OK, "ok"
    except BlowUpError as exc:
        summary, code, status = {"error": str(exc), "time": exc.time}, EXIT_BLOWUP, "blow-up"
    except (ConvergenceError, WMapError, FitError) as exc:
        summary, code, status = {"error": str(exc)}, EXIT_NOCONV, "non-convergence"
    except _Partial as exc:
        summary, code, status = exc.summary, EXIT_INFEASIBLE, "infeasible"
    except InfeasibleError as exc:
        summary, code, status = {"error": str(exc)}, EXIT_INFEASIBLE, "infeasible"
    except _SelftestFailure as exc:
        summary, code, status = exc.results, EXIT_BLOWUP, "selftest-failed"
    manifest = write_manifest(out, cfg, summary, started, status)
    return code, manifest


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kdvda", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="sectioned key=value file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, args.subcommand, args.overrides)
        cfg.subcommand = args.subcommand
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, manifest = dispatch(cfg, args.out)
    print(json.dumps({"status": manifest["status"], "out": str(args.out)}))
    return code


if __name__ == "__main__":
    sys.exit(main())
