"""Command-line experiment runner.

    fklab run   <config> [--threads K] [--out-dir DIR]
    fklab sweep <config> --axis {steps,n_paths,t} --values v1,v2,... [--threads K] [--out-dir DIR]

``run`` writes one CSV row per estimate and a JSON array of bound reports;
``sweep`` reruns the estimates for every value and writes a long-format CSV.
The master seed can be overridden with the FKLAB_SEED environment variable.
Exit codes: 0 all verdicts pass, 1 a verdict failed or a value is not finite,
2 usage or configuration error (no output is written).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bounds, estimators, oracle, potential
from .registry import ConfigError, Experiment, build_experiment, read_config
from .stochastics import RngStream, SimConfig, set_threads, simulate_paths

SEED_ENV = "FKLAB_SEED"
CSV_FIELDS = ("name", "manifold", "t", "mean", "stderr", "n_paths", "steps", "seed")
SWEEP_AXES = ("steps", "n_paths", "t")


@dataclass
class Row:
    name: str
    t: float
    mean: float
    stderr: float
    n_paths: int
    steps: int
    seed: int

    @property
    def finite(self) -> bool:
        return math.isfinite(self.mean) and math.isfinite(self.stderr)


def fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def manifold_label(m) -> str:
    return f"{m.kind}{m.dim}[{m.scale:g}]"


# ------------------------------------------------------------------ estimates
def _rows(name, est, exp: Experiment, t=None, steps=None):
    mean = np.atleast_1d(np.asarray(est.mean, dtype=float))
    se = np.atleast_1d(np.asarray(est.stderr, dtype=float))
    t = exp.t if t is None else t
    steps = exp.steps if steps is None else steps
    if mean.size == 1:
        return [Row(name, t, float(mean[0]), float(se[0]), est.n_paths, steps, exp.seed)]
    return [Row(f"{name}[{i}]", t, float(a), float(b), est.n_paths, steps, exp.seed) for i, (a, b) in enumerate(zip(mean, se))]


def _exact(name, value, exp: Experiment, t=None, steps=0):
    return Row(name, exp.t if t is None else t, float(value), 0.0, 0, steps, exp.seed)


def run_estimates(exp: Experiment, threads=None) -> tuple:
    """CSV rows for every requested estimate, plus the PDE grid if one was solved."""
    m, x, t, V, f = exp.m, exp.x, exp.t, exp.V, exp.f
    cfg = SimConfig(t, exp.steps)
    kw = dict(cfg=cfg, n_paths=exp.n_paths, seed=exp.seed, antithetic=exp.antithetic, threads=threads)
    raw = exp.raw
    rows, grid = [], None
    base = exp
    for j, name in enumerate(base.estimates):
        if base.independent_seeds:
            # seed + j: estimates of the same quantity become independent, so
            # their standard errors combine in quadrature
            exp = dataclasses.replace(base, seed=base.seed + j)
            kw["seed"] = exp.seed
            cfg = SimConfig(t, exp.steps)
        if name == "semigroup":
            rows += _rows(name, estimators.semigroup(m, x, t, V, f, **kw), exp)
        elif name == "bismut_gradient":
            rows += _rows(name, estimators.bismut_gradient(m, x, t, V, f, **kw), exp)
        elif name == "derivative_formula":
            v = None if "derivative.v" not in raw else np.array([float(s) for s in raw["derivative.v"].split(",")])
            rows += _rows(name, estimators.derivative_formula(m, x, v, t, V, f, **kw), exp)
        elif name == "fd_gradient":
            eps = float(raw.get("eps", 1e-3))
            rows += _rows(name, estimators.fd_gradient(m, x, t, V, f, eps=eps, **kw), exp)
        elif name == "divergence_formula":
            rows += _rows(name, estimators.divergence_formula(m, x, t, V, exp.extras["form"], **kw), exp)
        elif name == "divergence_direct":
            rows += _rows(name, estimators.semigroup(m, x, t, V, exp.extras["form"].costar_field(), **kw), exp)
        elif name == "inside_derivative":
            rows += _rows(name, estimators.inside_derivative(m, x, t, V, f, exp.extras["flow"], **kw), exp)
        elif name == "inside_direct":
            flow = exp.extras["flow"]
            g = estimators.directional_field(m, f, lambda p: flow.Y(0.0, p))
            rows += _rows(name, estimators.semigroup(m, x, t, V, g, **kw), exp)
        elif name == "kappa_v":
            rows += _rows(name, potential.kappa_v(m, x, t, V, cfg, exp.n_paths, exp.seed), exp)
        elif name == "kappa_vq":
            rows += _rows(name, potential.kappa_vq(m, x, t, exp.q, V, cfg, exp.n_paths, exp.seed), exp)
        elif name == "charac_limit":
            rows += _charac_rows(exp, cfg, threads)
        elif name == "pde_reference":
            dt = float(raw.get("pde.dt", 1e-3))
            A = float(raw["pde.A"]) if "pde.A" in raw else None
            grid = oracle.pde_reference_1d(V, f, t, A=A, dx=float(raw.get("pde.dx", 1e-3)), dt=dt)
            rows.append(_exact(name, grid(x[0]), exp, steps=max(1, int(math.ceil(t / dt - 1e-12)))))
        elif name == "mehler":
            rows.append(_exact(name, oracle.mehler_value(x[0], t), exp))
        elif name == "linear_potential_value":
            a = V.params["a"][0]
            val, der = oracle.linear_potential_value(x[0], t, a)
            rows += [_exact(f"{name}.value", val, exp), _exact(f"{name}.derivative", der, exp)]
        elif name == "q_closed_form":
            rows.append(_exact(name, oracle.q_closed_form(m, t), exp))
        elif name == "constants":
            cc = bounds.ConstantsConfig.for_manifold(m)
            C1, C2 = bounds.harnack_constants(t, cc.K)
            rows += [
                _exact("constants.C1", C1, exp),
                _exact("constants.C2", C2, exp),
                _exact("constants.alpha_bracket", bounds.alpha_bracket(t, cc.L), exp),
                _exact("constants.decay_factor", bounds.decay_factor(t, cc.K), exp),
            ]
        elif name == "q_deviation":
            rows.append(Row(name, t, q_deviation(exp), 0.0, exp.n_paths, exp.steps, exp.seed))
    return rows, grid


def q_deviation(exp: Experiment) -> float:
    """max over paths and stored times of |Q_s - q_closed_form(s) I|."""
    streams = [RngStream(exp.seed, i) for i in range(exp.n_paths)]
    rec = simulate_paths(exp.m, exp.x, SimConfig(exp.t, exp.steps), streams)
    c = oracle.q_closed_form(exp.m, rec.times)
    ref = c[:, None, None] * np.eye(exp.m.dim)
    return float(np.max(np.abs(rec.q_samples - ref)))


def _charac_rows(exp: Experiment, cfg, threads):
    raw = exp.raw
    X = np.array([float(s) for s in raw["charac.X"].split(",")])
    f = exp.f if raw.get("field") == "charac" else None
    anti = exp.antithetic if "antithetic" in raw else True
    V = None if exp.V.is_constant and exp.V.inf_V == 0.0 else exp.V
    res = estimators.charac_limit(
        exp.m, exp.x, X, exp.p, V, f, tuple(exp.t_grid), cfg, exp.n_paths, exp.seed,
        alpha=float(raw.get("charac.alpha", 0.0)), antithetic=anti, threads=threads,
    )
    rows = [
        Row("charac_limit", 0.0, res.extrapolant, res.stderr, exp.n_paths, exp.steps, exp.seed),
        Row("charac_limit.target", 0.0, res.target, 0.0, 0, 0, exp.seed),
    ]
    for tk, d, se in zip(res.t_grid, res.D, res.D_stderr):
        rows.append(Row("charac_limit.D", float(tk), float(d), float(se), exp.n_paths, exp.steps, exp.seed))
    return rows


# --------------------------------------------------------------------- checks
def _oracle_report(kind, exp: Experiment, threads):
    m, x, t, V, f = exp.m, exp.x, exp.t, exp.V, exp.f
    kw = dict(n_paths=exp.n_paths, seed=exp.seed, antithetic=exp.antithetic, threads=threads)
    if kind == "mehler":
        target = oracle.mehler_value(x[0], t)

        def est(steps, coarsen):
            return estimators.semigroup(m, x, t, V, f, SimConfig(t, steps), coarsen=coarsen, **kw)
    else:
        target = oracle.linear_potential_value(x[0], t, V.params["a"][0])[1]

        def est(steps, coarsen):
            return estimators.bismut_gradient(m, x, t, V, f, SimConfig(t, steps), coarsen=coarsen, **kw)

    inputs = {"kind": f"oracle:{kind}", "manifold": manifold_label(m), "x": x, "t": t,
              "potential": V.describe(), "field": f.describe(), "n_paths": exp.n_paths,
              "seed": exp.seed, "antithetic": exp.antithetic}
    return bounds.check_against_oracle(f"oracle:{kind}", est, target, exp.steps, refine=exp.refine, inputs=inputs)


def run_checks(exp: Experiment, threads=None) -> list:
    m, V, f = exp.m, exp.V, exp.f
    Vp = None if V.is_constant and V.inf_V == 0.0 else V
    cfg = SimConfig(exp.t, exp.steps)
    common = dict(refine=exp.refine, antithetic=exp.antithetic, threads=threads)
    reports = []
    grad_kinds = [c.split(":", 1)[1] for c in exp.checks if c.startswith("gradient:")]
    if grad_kinds:
        scn = bounds.Scenario(
            m, exp.points if exp.points is not None else exp.x, exp.t, Vp, f, exp.steps, exp.n_paths, exp.seed,
            p=exp.p, delta=exp.delta, quad_size=int(exp.raw["quad.size"]) if "quad.size" in exp.raw else None,
            **common,
        )
        reports += bounds.check_gradient_bounds(grad_kinds, scn)
    for c in exp.checks:
        head, _, tail = c.partition(":")
        if head == "harnack":
            for y in exp.y:
                reports += bounds.check_harnack_family(m, exp.x, y, exp.ps, exp.t, Vp, f, cfg, exp.n_paths, exp.seed, **common)
        elif head == "shift_harnack":
            reports.append(
                bounds.check_shift_harnack(tail, m, exp.x, exp.extras["flow"], exp.p, exp.t, Vp, f, cfg, exp.n_paths, exp.seed, **common)
            )
        elif head == "oracle":
            reports.append(_oracle_report(tail, exp, threads))
    return reports


# --------------------------------------------------------------------- output
def rows_to_csv(rows, manifold: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        w.writerow([r.name, manifold, fmt(r.t), fmt(r.mean), fmt(r.stderr), fmt(r.n_paths), fmt(r.steps), fmt(r.seed)])
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def _out_path(exp: Experiment, key: str, default: str, out_dir) -> Path:
    name = exp.raw.get(key, default)
    p = Path(name)
    return p if p.is_absolute() else Path(out_dir) / p


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _seed_override():
    v = os.environ.get(SEED_ENV)
    if v is None or v.strip() == "":
        return None
    try:
        seed = int(v)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be a non-negative integer, got {v!r}") from None
    if seed < 0:
        raise ConfigError(f"{SEED_ENV} must be a non-negative integer, got {v!r}")
    return seed


def load(config_path) -> Experiment:
    return build_experiment(read_config(config_path), seed_override=_seed_override())


def run(config_path, out_dir=".", threads=None, log=None) -> int:
    log = sys.stderr if log is None else log
    try:
        exp = load(config_path)
        rows, grid = run_estimates(exp, threads)
        reports = run_checks(exp, threads)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=log)
        return 2
    stem = Path(config_path).stem
    _write(_out_path(exp, "out_csv", f"{stem}.csv", out_dir), rows_to_csv(rows, manifold_label(exp.m)))
    _write(_out_path(exp, "out_json", f"{stem}.json", out_dir), reports_to_json(reports))
    if grid is not None and "out_grid" in exp.raw:
        grid.to_csv(_out_path(exp, "out_grid", f"{stem}_grid.csv", out_dir))
    code = 0
    for r in rows:
        if not r.finite:
            print(f"non-finite estimate: {r.name} mean={r.mean} stderr={r.stderr}", file=log)
            code = 1
    for rep in reports:
        print(f"{rep.verdict.upper():4s} {rep.name}: lhs={rep.lhs.mean:.6g} rhs={rep.rhs_value:.6g} "
              f"slack={rep.slack:.4g} margin={rep.margin:.3g}", file=log)
        if not rep.passed:
            code = 1
    return code


def _oracle_targets(exp: Experiment) -> dict:
    kind = exp.raw.get("oracle")
    if kind == "mehler":
        return {"semigroup": oracle.mehler_value(exp.x[0], exp.t)}
    if kind == "linear_potential":
        val, der = oracle.linear_potential_value(exp.x[0], exp.t, exp.V.params["a"][0])
        return {"semigroup": val, "bismut_gradient": der, "derivative_formula": der, "fd_gradient": der}
    return {}


def parse_values(axis: str, text: str) -> list:
    try:
        vals = [float(s) for s in text.replace(";", ",").split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--values must be a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("--values is empty")
    if axis in ("steps", "n_paths"):
        if any(v != int(v) for v in vals):
            raise ConfigError(f"{axis} values must be integers")
        return [int(v) for v in vals]
    return vals


def sweep(config_path, axis, values, out_dir=".", threads=None, log=None) -> int:
    log = sys.stderr if log is None else log
    try:
        if axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {SWEEP_AXES}")
        base = load(config_path)
        if not base.estimates:
            raise ConfigError("a sweep needs at least one estimate")
        vals = parse_values(axis, values) if isinstance(values, str) else list(values)
        exps = [base.with_value(axis, v) for v in vals]  # validate every point first
        results = [(v, e, run_estimates(e, threads)[0]) for v, e in zip(vals, exps)]
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=log)
        return 2
    with_oracle = "oracle" in base.raw
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("axis", "value") + CSV_FIELDS + (("oracle", "abs_error") if with_oracle else ()))
    code = 0
    manifold = manifold_label(base.m)
    for v, e, rows in results:
        targets = _oracle_targets(e) if with_oracle else {}
        for r in rows:
            cells = [axis, fmt(v), r.name, manifold, fmt(r.t), fmt(r.mean), fmt(r.stderr), fmt(r.n_paths), fmt(r.steps), fmt(r.seed)]
            if with_oracle:
                key = r.name.split("[", 1)[0]
                if key in targets:
                    cells += [fmt(float(targets[key])), fmt(abs(r.mean - float(targets[key])))]
                else:
                    cells += ["", ""]
            w.writerow(cells)
            if not r.finite:
                print(f"non-finite estimate: {r.name} at {axis}={v}", file=log)
                code = 1
    stem = Path(config_path).stem
    _write(Path(out_dir) / f"{stem}_sweep_{axis}.csv", buf.getvalue())
    return code


# ------------------------------------------------------------------------ main
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fklab", description="Feynman-Kac semigroup Monte Carlo experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out-dir", default=".", help="directory for relative output paths")
    r = sub.add_parser("run", parents=[common], help="run the estimates and checks of a config")
    r.add_argument("config")
    s = sub.add_parser("sweep", parents=[common], help="rerun a config over values of one parameter")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=SWEEP_AXES)
    s.add_argument("--values", required=True, help="comma-separated values")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    set_threads(args.threads)
    if args.command == "run":
        return run(args.config, args.out_dir, args.threads)
    return sweep(args.config, args.axis, args.values, args.out_dir, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
