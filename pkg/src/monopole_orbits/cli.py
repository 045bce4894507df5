"""Command-line experiment runner.

Usage::

    monopole-orbits COMMAND --config run.json [--out DIR] [--seed N]
                    [--format csv|json|both] [--plot | --no-plot]

Exit status: 0 all checks pass, 1 a check failed, 2 configuration or input
error, 3 numerical failure.
"""

import argparse
from dataclasses import dataclass, field
import csv
import io
import json
import math
import os
import sys
import time
import warnings

import numpy as np

from . import svg
from .config import ConfigError, load_config, parse_config
from .dynamics import integrate, measure_period, sweep_q
from .errors import BranchFlip, DomainError, MonopoleOrbitsError, NumericalFailure
from .experiments import closure_check, parallel_map, random_e0_states
from .geometry import (
    centered_orbit_determinant,
    constraint_residuals,
    determinant_roots,
    e0_state_for,
    fit_circle,
    hodograph_analysis,
    period_formula,
    predict_geometry,
    stability_determinant,
)
from .invariants import casimir_residual, constants_of_motion_array, verify_algebra
from .model import ModelParams, PhaseState, bound_angular_momentum_limit, make_e0_state
from .quantum import (
    alpha_for_zero_mode,
    analytic_zero_mode,
    build_radial_operator,
    count_zero_modes,
    eigenvalues,
    kernel_residual,
    log_grid,
    solve_modes,
)
from .stereo import (
    metric_ratio,
    conformal_factor,
    monopole_data,
    plane_flux_closed_form,
    plane_flux_integral,
    project_array,
    sphere_circle_analysis,
)

__all__ = ["COMMANDS", "RunReport", "run", "main"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class RunReport:
    """Outcome of one command.

    ``wall_time`` is kept out of ``report.json`` so that identical inputs
    give byte-identical files.
    """

    command: str
    config: dict
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def check(self, name, value, threshold, passed=None, relation="<="):
        value = _jsonable(value)
        if passed is None:
            passed = bool(value <= threshold) if relation == "<=" else bool(value == threshold)
        self.checks.append(
            dict(name=name, passed=bool(passed), value=value, threshold=_jsonable(threshold), relation=relation)
        )

    def to_json(self):
        doc = dict(
            command=self.command,
            passed=self.passed,
            checks=self.checks,
            results=self.results,
            files=sorted(self.files),
            config=self.config,
        )
        return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


class _Outputs:
    """Collects output documents and writes them at the end of a run."""

    def __init__(self, fmt, plot):
        self.fmt = fmt
        self.plot = plot
        self.docs = {}

    def table(self, stem, header, rows):
        if self.fmt in ("csv", "both"):
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt_cell(x) for x in row])
            self.docs[stem + ".csv"] = buf.getvalue()
        if self.fmt in ("json", "both"):
            cols = {h: [_jsonable(r[i]) for r in rows] for i, h in enumerate(header)}
            self.docs[stem + ".json"] = json.dumps(cols) + "\n"

    def figure(self, name, panels):
        if self.plot:
            self.docs[name] = svg.render(panels)


def _fmt_cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _orbit_state(params, spec):
    if spec.state is not None:
        return PhaseState(*spec.state)
    if spec.e0 is not None:
        return make_e0_state(params, spec.e0.x, spec.e0.y, spec.e0.heading)
    l_z = spec.l_z if spec.l_z is not None else 0.8 * bound_angular_momentum_limit(params, 1)
    return e0_state_for(params, l_z, spec.axis_angle)


def _trajectory_rows(params, t, z):
    c = constants_of_motion_array(params, z)
    return [
        (t[i], *z[i], c["energy"][i], c["l_z"][i], c["jx"][i], c["jy"][i]) for i in range(len(t))
    ]


_TRAJ_HEADER = ["t", "x", "y", "px", "py", "E", "Lz", "Jx", "Jy"]


def cmd_simulate(cfg, rep, out):
    p = cfg.params
    b = cfg.simulate
    s = _orbit_state(p, b.orbit)
    c0 = constants_of_motion_array(p, s.as_array()[None, :])
    lz = float(c0["l_z"][0])
    e0 = float(c0["energy"][0])
    on_shell = abs(e0) <= 1e-12 * p.alpha / p.r_cal**4
    if b.t_max is not None:
        t_max = b.t_max
    elif on_shell and lz != 0.0:
        t_max = b.periods * period_formula(p, lz)
    else:
        t_max = b.periods * 2.0 * math.pi * p.r_cal**2 / max(abs(lz), 1e-3)
    traj = integrate(p, s, t_max, b.tol)
    t, z = traj.resample(b.n_out)
    c = constants_of_motion_array(p, traj.z)
    rep.results.update(
        energy0=e0, l_z=lz, t_max=t_max, steps=len(traj.t) - 1, energy_drift=traj.energy_drift
    )
    rep.check("energy_drift", traj.energy_drift, 100.0 * b.tol * max(1.0, abs(e0)))
    rep.check("l_z_drift", float(np.ptp(c["l_z"])), 1e-7 * (abs(lz) + 1.0) * max(1.0, b.periods))
    if on_shell:
        jd = float(max(np.ptp(c["jx"]), np.ptp(c["jy"])))
        jmag = float(math.hypot(c["jx"][0], c["jy"][0]))
        rep.check("j_drift", jd, 1e-7 * (jmag + 1.0) * max(1.0, b.periods))
    out.table("trajectory", _TRAJ_HEADER, _trajectory_rows(p, t, z))
    out.figure(
        "orbit.svg",
        [
            svg.Panel("orbit", "x", "y", equal=True).line(z[:, 0], z[:, 1], "orbit").scatter([0.0], [0.0], "origin"),
            svg.Panel("hodograph", "px", "py", equal=True).line(z[:, 2], z[:, 3], "velocity"),
        ],
    )


def cmd_period(cfg, rep, out):
    p = cfg.params
    b = cfg.period
    s = _orbit_state(p, b.orbit)
    geom = predict_geometry(p, s)
    t = measure_period(p, s, b.tol)
    rel = abs(t - geom.period_pred) / geom.period_pred
    rep.results.update(l_z=geom.l_z, period_measured=t, period_predicted=geom.period_pred, rel_err=rel)
    rep.check("period_rel_err", rel, b.rel_tol)


def cmd_algebra(cfg, rep, out):
    p = cfg.params
    b = cfg.algebra_check
    r = verify_algebra(p, b.n_samples, cfg.seed, b.h, box=b.box)
    for name, val in r.residuals.items():
        rep.check("bracket {" + name + "}", val, b.threshold)
    rep.check("central_term", abs(r.central_term + p.q), b.threshold * (1.0 + abs(p.q)))
    cas = casimir_residual(p, b.n_samples, cfg.seed + 1, b.box)
    rep.check("casimir", cas, b.casimir_threshold)
    rep.results.update(jh_sign=r.jh_sign, central_term=r.central_term, central_spread=r.central_spread)


def cmd_geometry(cfg, rep, out):
    p = cfg.params
    b = cfg.geometry
    states = random_e0_states(p, b.n_cases, cfg.seed, b.min_abs_l_z)
    res = parallel_map(lambda s: closure_check(p, s, b.tol), states)
    worst = lambda f: max(f(r) for r in res)
    rep.results.update(n_cases=len(res))
    rep.check("fit_residual", worst(lambda r: r.fit_residual), b.fit_tol * p.r_cal)
    rep.check("center_match", worst(lambda r: r.center_err), b.match_tol * p.r_cal)
    rep.check("radius_match", worst(lambda r: r.radius_err), b.match_tol * p.r_cal)
    rep.check("period_rel_err", worst(lambda r: r.period_rel_err), b.period_tol)


def cmd_stability(cfg, rep, out):
    p = cfg.params
    b = cfg.stability
    grid = np.linspace(b.a_min * p.r_cal, b.a_max * p.r_cal, b.n)
    roots, vals = determinant_roots(p, b.energy, grid)
    rep.results.update(roots=roots, det_at_rcal=stability_determinant(p, p.r_cal, b.energy).det_m)
    if b.energy == 0.0:
        rep.check("root_count", len(roots), 1, relation="==")
        rep.check("root_at_r_cal", abs(roots[0] - p.r_cal) if roots else math.inf, 1e-12 * p.r_cal)
    ctr = [centered_orbit_determinant(p, a, both=True) for a in grid[:: max(1, b.n // 50)]]
    rep.results["centered_det_samples"] = ctr
    out.table("stability", ["a", "det_m"], list(zip(grid, vals)))
    out.figure("stability.svg", [svg.Panel("det M(a)", "a", "det").line(grid, vals, "det")])


def cmd_hodograph(cfg, rep, out):
    p = cfg.params
    b = cfg.hodograph
    s = _orbit_state(p, b.orbit)
    geom = predict_geometry(p, s)
    traj = integrate(p, s, geom.period_pred, b.tol)
    fit = hodograph_analysis(traj, geom)
    rep.results.update(
        radius=geom.radius_r,
        offset=geom.offset_l,
        eccentricity=fit.eccentricity,
        eccentricity_pred=fit.eccentricity_pred,
        axis_error=fit.axis_error,
        circular=fit.circular,
    )
    rep.check("eccentricity", abs(fit.eccentricity - fit.eccentricity_pred), b.ecc_tol)
    if not fit.circular and math.isfinite(fit.axis_error):
        rep.check("axis_perpendicular", fit.axis_error, b.axis_tol)
    _, z = traj.resample(400)
    out.figure("hodograph.svg", [svg.Panel("hodograph", "px", "py", equal=True).line(z[:, 2], z[:, 3])])


def cmd_stereo(cfg, rep, out):
    p = cfg.params
    b = cfg.stereo
    rng = np.random.default_rng(cfg.seed)
    worst_ratio = 0.0
    for x, y in rng.uniform(-3, 3, (b.n_metric, 2)) * p.r_cal:
        ratio, aniso = metric_ratio(p, x, y)
        worst_ratio = max(worst_ratio, abs(ratio / conformal_factor(p, math.hypot(x, y)) - 1.0), aniso)
    rep.check("metric_conformal", worst_ratio, b.metric_tol)
    eq = project_array(p, p.r_cal * np.cos(np.linspace(0, 2 * np.pi, 64)), p.r_cal * np.sin(np.linspace(0, 2 * np.pi, 64)))
    rep.check("equator", float(np.max(np.abs(eq[:, 2]))), 1e-12 * p.r_cal)
    states = random_e0_states(p, b.n_orbits, cfg.seed, 0.3)

    def one(s):
        g = predict_geometry(p, s)
        tr = integrate(p, s, g.period_pred, b.tol)
        return sphere_circle_analysis(p, tr), tr

    res = parallel_map(one, states)
    rep.check("planarity", max(a.planarity_residual for a, _ in res), b.planar_tol * p.r_cal)
    rep.results["gamma"] = [a.gamma for a, _ in res]
    views = [svg.Panel("sphere (x-z view)", "x", "z", equal=True), svg.Panel("sphere (x-y view)", "x", "y", equal=True)]
    th = np.linspace(0, 2 * np.pi, 200)
    views[0].line(p.r_cal * np.cos(th), p.r_cal * np.sin(th), "sphere")
    views[1].line(p.r_cal * np.cos(th), p.r_cal * np.sin(th), "sphere")
    for _, tr in res[:8]:
        _, z = tr.resample(200)
        pts = project_array(p, z[:, 0], z[:, 1])
        views[0].line(pts[:, 0], pts[:, 2])
        views[1].line(pts[:, 0], pts[:, 1])
    out.figure("sphere.svg", views)


def cmd_flux(cfg, rep, out):
    p = cfg.params
    b = cfg.flux
    md = monopole_data(p)
    val = plane_flux_integral(p, b.r_max * p.r_cal, b.n)
    closed = plane_flux_closed_form(p, b.r_max * p.r_cal)
    rel = abs(val - md.total_flux) / abs(md.total_flux) if md.total_flux != 0.0 else abs(val)
    rep.results.update(flux=val, closed_form=closed, total_flux=md.total_flux, b_sphere=md.b_sphere, m_charge=md.m_charge)
    rep.check("flux_vs_total", rel, b.rel_tol)


def cmd_sweep(cfg, rep, out):
    p = cfg.params
    b = cfg.sweep_q
    q_from = p.q if b.q_from is None else b.q_from
    q_to = q_from + 2.0 if b.q_to is None else b.q_to
    p0 = p.with_q(q_from)
    s = _orbit_state(p0, b.orbit)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        recs = sweep_q(p0, s, q_from, q_to, b.rate, tol=b.tol, every=b.every, l_threshold=b.l_threshold)
    flips = [str(w.message) for w in caught if issubclass(w.category, BranchFlip)]
    other = [str(w.message) for w in caught if not issubclass(w.category, BranchFlip)]
    rep.results.update(n_records=len(recs), branch_flip=flips, warnings=other)
    rep.check("record_count", len(recs), b.min_records, passed=len(recs) >= b.min_records, relation=">=")
    if len(recs) >= 3:
        c = np.array([r.geometry.center for r in recs])
        mu = c.mean(axis=0)
        _, _, vt = np.linalg.svd(c - mu)
        dev = float(np.max(np.abs((c - mu) @ vt[1])))
        rep.check("collinearity", dev, b.collinear_tol * p.r_cal)
        last = recs[-1].geometry
        l2 = p.alpha / (2.0 * last.l_z**2) - p.r_cal**2 + recs[-1].q / (2.0 * last.l_z)
        rep.check("endpoint_offset", abs(last.offset_l - math.sqrt(max(l2, 0.0))), b.endpoint_tol * p.r_cal)
    rows = [
        (r.t, r.q, r.geometry.center[0], r.geometry.center[1], r.geometry.radius_r, r.geometry.offset_l,
         r.geometry.l_z, r.geometry.fit_residual)
        for r in recs
    ]
    out.table("sweep", ["t", "q", "cx", "cy", "R", "l", "Lz", "fit_residual"], rows)
    if rows:
        arr = np.array(rows)
        out.figure("sweep.svg", [svg.Panel("orbit centers", "cx", "cy").scatter(arr[:, 2], arr[:, 3])])


def _grid(g, r_cal):
    return log_grid(g.r_min * r_cal, g.r_max * r_cal, g.n)


def cmd_quantum_zero_mode(cfg, rep, out):
    b = cfg.quantum_zero_mode
    rc = cfg.r_cal
    grid = _grid(b.grid, rc)
    rows = []
    for lvl in b.levels:
        a0 = 2.0 * rc**2 * lvl * (lvl + 1)
        p = ModelParams(a0, rc, 0.0)
        op = build_radial_operator(p, lvl, grid)
        res = kernel_residual(op, analytic_zero_mode(p, lvl, grid.nodes))
        lam = float(eigenvalues(op, 1)[0])
        below = float(eigenvalues(build_radial_operator(ModelParams(a0 * (1 - b.flow_eps), rc, 0.0), lvl, grid), 1)[0])
        above = float(eigenvalues(build_radial_operator(ModelParams(a0 * (1 + b.flow_eps), rc, 0.0), lvl, grid), 1)[0])
        rep.check(f"I={lvl} kernel_residual", res, b.residual_tol)
        rep.check(f"I={lvl} lowest_eigenvalue", abs(lam), b.eigen_tol * a0 / rc**4)
        rep.check(f"I={lvl} spectral_flow", [below, above], "sign change", passed=below > 0.0 > above, relation="sign")
        rows.append((lvl, a0, res, lam, below, above))
    out.table("zero_modes", ["I", "alpha", "kernel_residual", "eigenvalue", "below", "above"], rows)


def cmd_quantum_count(cfg, rep, out):
    b = cfg.quantum_count
    rc = cfg.r_cal
    grid = _grid(b.grid, rc)
    rows = []
    for lvl, mc in b.cases:
        a = alpha_for_zero_mode(rc, lvl, mc)
        p = ModelParams(a, rc, -2.0 * rc**2 * mc)
        r = count_zero_modes(p, lvl, mc, grid, b.tol, criterion=b.criterion, details=True)
        rep.check(f"(I={lvl},M={mc}) count", r.count, abs(mc), relation="==")
        edge = [s for s in r.sectors if s.in_window and abs(s.m) == 2 * lvl]
        rep.check(
            f"(I={lvl},M={mc}) edge_excluded",
            [s.tail_class for s in edge],
            "not normalizable",
            passed=bool(edge) and all(not s.normalizable for s in edge),
            relation="excluded",
        )
        if b.check_gauge:
            alt = count_zero_modes(p, lvl, mc, grid, b.tol, criterion=b.criterion, gauge="origin")
            rep.check(f"(I={lvl},M={mc}) gauge_invariance", alt, r.count, relation="==")
        if b.check_chirality:
            pm = ModelParams(a, rc, 2.0 * rc**2 * mc)
            flipped = count_zero_modes(pm, lvl, -mc, grid, b.tol, criterion=b.criterion)
            rep.check(f"(I={lvl},M={mc}) chirality", flipped, r.count, relation="==")
        for s in r.sectors:
            rows.append((lvl, mc, s.m, s.eigenvalue, s.tail_slope, s.tail_class, int(bool(s.normalizable))))
    out.table("count", ["I", "M", "m", "eigenvalue", "tail_slope", "tail_class", "counted"], rows)


def cmd_quantum_spectrum(cfg, rep, out):
    b = cfg.quantum_spectrum
    p = cfg.params
    grid = _grid(b.grid, p.r_cal)
    rows = []
    for m in b.m_values:
        for i, mode in enumerate(solve_modes(build_radial_operator(p, m, grid), b.k, criterion=b.criterion)):
            rows.append((m, i, mode.eigenvalue, mode.tail_slope, mode.tail_class, mode.plane_norm))
    rep.results["n_eigenvalues"] = len(rows)
    out.table("spectrum", ["m", "index", "eigenvalue", "tail_slope", "tail_class", "plane_norm"], rows)
    if rows:
        arr = np.array([(r[0], r[2]) for r in rows], dtype=float)
        out.figure("spectrum.svg", [svg.Panel("spectrum", "m", "E").scatter(arr[:, 0], arr[:, 1])])


COMMANDS = {
    "simulate": cmd_simulate,
    "period": cmd_period,
    "algebra-check": cmd_algebra,
    "geometry": cmd_geometry,
    "stability": cmd_stability,
    "hodograph": cmd_hodograph,
    "stereo": cmd_stereo,
    "flux": cmd_flux,
    "sweep-q": cmd_sweep,
    "quantum-zero-mode": cmd_quantum_zero_mode,
    "quantum-count": cmd_quantum_count,
    "quantum-spectrum": cmd_quantum_spectrum,
}


def run(config, command, out_dir=None, fmt=None, plot=None):
    """Run one command and write its files.

    Parameters
    ----------
    config : RunConfig or str
        Validated configuration or JSON text.
    command : str
        One of :data:`COMMANDS`.
    out_dir, fmt, plot : optional
        Override the ``output`` block.

    Returns
    -------
    RunReport
    """
    if isinstance(config, (str, bytes)):
        config = parse_config(config)
    if command not in COMMANDS:
        raise DomainError(f"unknown command {command!r}")
    out_dir = config.output.dir if out_dir is None else out_dir
    fmt = config.output.format if fmt is None else fmt
    plot = config.output.plot if plot is None else plot
    rep = RunReport(command, config.model_dump(mode="json"))
    outs = _Outputs(fmt, plot)
    t0 = time.perf_counter()
    COMMANDS[command](config, rep, outs)
    rep.wall_time = time.perf_counter() - t0
    os.makedirs(out_dir, exist_ok=True)
    rep.files = sorted(list(outs.docs) + ["report.json"])
    for name, text in sorted(outs.docs.items()):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="") as fh:
        fh.write(rep.to_json())
    return rep


def _parser():
    ap = argparse.ArgumentParser(prog="monopole-orbits", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", default=None, help="output directory (overrides config)")
    ap.add_argument("--seed", type=int, default=None, help="random seed (overrides config)")
    ap.add_argument("--format", choices=["csv", "json", "both"], default=None)
    ap.add_argument("--plot", dest="plot", action="store_true", default=None)
    ap.add_argument("--no-plot", dest="plot", action="store_false")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError(["seed: must be non-negative"])
            cfg = cfg.model_copy(update={"seed": args.seed})
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run(cfg, args.command, args.out, args.format, args.plot)
    except DomainError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, MonopoleOrbitsError, FloatingPointError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for c in rep.checks:
        mark = "PASS" if c["passed"] else "FAIL"
        print(f"{mark}  {c['name']}: {c['value']} ({c['relation']} {c['threshold']})")
    print(f"{args.command}: {'all checks passed' if rep.passed else 'check failure'} in {rep.wall_time:.2f} s")
    return EXIT_OK if rep.passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
