"""Command-line front door: check, simulate, measure, verify, sweep.

Exit codes: 0 when every executed check passes, 1 on a property failure,
2 on configuration or runtime errors.  Outputs are written atomically and
floats are formatted as shortest round-trip decimals, so identical configs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import itertools
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from kolsys.config import (
    DATA_BUILDERS,
    ConfigError,
    data_callable,
    data_from_config,
    field_from_config,
    grid_from_config,
    ladder_from_config,
    parse_config,
    time_from_config,
)
from kolsys.coefficients import BuiltinFamily, derivative_bundle, make_builtin
from kolsys.discretization import (
    GridFunction,
    assemble_scalar_operator,
    assemble_system_operator,
    grid_function_from_callable,
)
from kolsys.hypotheses import (
    SampleSpec,
    check_growth,
    check_hypotheses,
    check_lyapunov,
    compute_common_kernel,
    estimate_kp,
    spectral_check_C,
)
from kolsys.invariant_measure import (
    build_measure_system,
    bump_function,
    functional_Mf,
    oracle_density_1d,
    solve_scalar_invariant_density,
)
from kolsys.properties import (
    counterexample_mode,
    estimate_gradient_rate,
    jordan_asymptotics_check,
    rate_report,
    verify_fixed_points,
    verify_invariance,
    verify_l2_gradient_decay,
    verify_longtime,
    verify_lp_bound,
    verify_positivity,
    verify_semigroup_bounds,
)
from kolsys.reports import CheckRecord, PropertyReport
from kolsys.semigroup import SolveError, cesaro_average, discrete_average, evolve, solve_nested

SUITES = ("core", "rates", "asymptotic", "counterexample")


def fmt(x):
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def atomic_write(path, text):
    """Write via a temp file in the target directory plus rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".kolsys-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _records_text(records):
    blocks = []
    for rec in records:
        lines = [f"check = {rec.name}", f"status = {rec.status}"]
        for key, value in rec.constants.items():
            out = fmt(value) if isinstance(value, (int, float, np.floating)) else str(value)
            lines.append(f"{key} = {out}")
        if rec.witness is not None:
            for key, value in rec.witness.as_dict().items():
                lines.append(f"{key} = {value}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _report_text(reports):
    lines = ["property, status, measured, bound, tolerance, witness_t, witness_x"]
    lines += [rep.report_line() for rep in reports]
    return "\n".join(lines) + "\n"


def _sample_spec(cfg):
    radius = cfg.get_float("grid", "L", 6.0)
    return SampleSpec(radius=radius, n_per_axis=81)


def _out_path(args, cfg, fallback):
    """--out wins over the [output] section, which wins over the default name."""
    return args.out or cfg.get_str("output", "out", fallback)


def cmd_check(args):
    cfg = parse_config(args.config)
    field = field_from_config(cfg)
    spec = _sample_spec(cfg)
    sigma = cfg.get_float("verify", "phi_exponent", 1.0)

    report = check_hypotheses(field, spec)
    records = list(report.records)

    try:
        kv = compute_common_kernel(field, spec)
        constants = {f"xi_{j + 1}": float(v) for j, v in enumerate(kv.xi)}
        constants["residual"] = kv.residual
        records.append(CheckRecord(name="common_kernel", status="pass",
                                   constants=constants))
    except ValueError as exc:
        records.append(CheckRecord(name="common_kernel", status="fail",
                                   constants={"reason": str(exc)}))

    lyap = check_lyapunov(field, sigma, spec)
    constants = {"a": lyap.a, "c": lyap.c, "phi_exponent": lyap.sigma}
    if lyap.passed:
        # int phi dmu <= a/c, so the mass outside the sampled ball is at
        # most (a/c) / inf phi there; qualitative, not certified
        constants["tail_mass_bound"] = \
            lyap.best_tail_ratio / (1.0 + spec.radius ** 2) ** sigma
    records.append(CheckRecord(name="lyapunov", status=lyap.status,
                               witness=lyap.witness, constants=constants))

    growth = check_growth(field, sigma, spec)
    records.append(CheckRecord(name="growth", status=growth.status,
                               witness=growth.witness,
                               constants={"c": growth.c, "q_sup": growth.q_sup,
                                          "drift_sup": growth.drift_sup}))

    if args.kp:
        for cp in (0.25, 1.0, 4.0):
            est = estimate_kp(field, p=2.0, sample_spec=spec, constants={"c_p": cp})
            records.append(CheckRecord(
                name=f"kp_sup_cp_{fmt(cp)}",
                status="pass" if est.bounded else "inconclusive",
                constants={"sup": est.sups["K_p"], "trend": est.trend}))

    atomic_write(_out_path(args, cfg, "report.txt"), _records_text(records))
    return 0 if all(r.status == "pass" for r in records) else 1


def _trajectory_csv(traj):
    grid = traj.grid
    m = traj.m
    coord_cols = ["x1"] if grid.d == 1 else ["x1", "x2"]
    header = ["t", "node_index"] + coord_cols + [f"u_{k + 1}" for k in range(m)]
    lines = [",".join(header)]
    for t, snap in zip(traj.times, traj.snapshots):
        for idx in range(grid.n_nodes):
            cells = [fmt(t), str(idx)]
            cells += [fmt(c) for c in grid.nodes[idx]]
            cells += [fmt(snap.values[k, idx]) for k in range(m)]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_simulate(args):
    cfg = parse_config(args.config)
    field = field_from_config(cfg)
    dt, t_final, theta, store_every = time_from_config(cfg)
    if args.nested:
        ladder = ladder_from_config(cfg)
        nest_tol = cfg.get_float("nest", "nest_tol", 1e-4)
        r_obs = cfg.get_float("nest", "R_obs", 3.0)
        boundary = cfg.get_choice("grid", "boundary",
                                  {"dirichlet", "neumann"}, "neumann")
        result = solve_nested(field, data_callable(cfg, field.dim_m), t_final,
                              ladder, nest_tol, r_obs, dt=dt, theta=theta,
                              boundary_kind=boundary, store_every=store_every)
        atomic_write(_out_path(args, cfg, "traj.csv"),
                     _trajectory_csv(result.trajectory))
        for k, disc in enumerate(result.discrepancies, start=1):
            print(f"rung {k} discrepancy = {fmt(disc)}")
        print(f"dirichlet_neumann_gap = {fmt(result.dirichlet_neumann_gap)}")
        print(f"converged = {result.converged}")
        return 0 if result.converged else 1
    grid = grid_from_config(cfg)
    op = assemble_system_operator(field, grid)
    f = data_from_config(cfg, grid, field.dim_m)
    traj = evolve(op, f, t_final, dt=dt, theta=theta, store_every=store_every)
    atomic_write(_out_path(args, cfg, "traj.csv"), _trajectory_csv(traj))
    return 0


def cmd_measure(args):
    cfg = parse_config(args.config)
    field = field_from_config(cfg)
    grid = grid_from_config(cfg)
    mu = solve_scalar_invariant_density(field, grid)
    coord_cols = ["x1"] if grid.d == 1 else ["x1", "x2"]
    header = ["node_index"] + coord_cols + ["rho"]
    oracle = None
    if args.oracle:
        if grid.d != 1:
            raise ConfigError("--oracle requires d = 1")
        oracle = oracle_density_1d(field, grid)
        header += ["rho_oracle", "diff"]
    lines = [",".join(header)]
    for idx in range(grid.n_nodes):
        cells = [str(idx)] + [fmt(c) for c in grid.nodes[idx]] + [fmt(mu.rho[idx])]
        if oracle is not None:
            cells += [fmt(oracle.rho[idx]), fmt(mu.rho[idx] - oracle.rho[idx])]
        lines.append(",".join(cells))
    atomic_write(_out_path(args, cfg, "density.csv"), "\n".join(lines) + "\n")
    return 0


def _orthogonal_constant(xi):
    """A unit constant direction orthogonal to the kernel vector."""
    m = len(xi)
    e1 = np.zeros(m)
    e1[0] = 1.0
    eta = e1 - np.dot(e1, xi) * xi
    return eta / np.linalg.norm(eta)


def _constant_function(grid, vec):
    return GridFunction(grid, np.repeat(np.asarray(vec, dtype=float)[:, None],
                                        grid.n_nodes, axis=1))


def _measure_pipeline(cfg, field, grid):
    spec = _sample_spec(cfg)
    xi = compute_common_kernel(field, spec)
    mu = solve_scalar_invariant_density(field, grid)
    return xi, mu, build_measure_system(xi, mu, 1.0)


def _suite_core(cfg, field):
    grid = grid_from_config(cfg, boundary_override="neumann")
    dt, t_final, theta, _ = time_from_config(cfg)
    r_obs = cfg.get_float("verify", "R_obs", 3.0)
    seed = cfg.get_int("run", "seed", 0)
    xi, mu, sys = _measure_pipeline(cfg, field, grid)
    reports = []

    rng = np.random.default_rng(seed)
    pts = rng.uniform(-grid.L, grid.L, size=(1000, grid.d))
    reports.append(spectral_check_C(field, pts))

    xi_gf = _constant_function(grid, xi.xi)
    eta_gf = _constant_function(grid, _orthogonal_constant(xi.xi))
    sine = grid_function_from_callable(
        grid, lambda x: [np.sin(x[0])] * field.dim_m, m=field.dim_m)
    reports.append(verify_fixed_points(
        field, grid, [(xi_gf, True), (eta_gf, False), (sine, False)], dt=dt,
        theta=theta, fp_tol=cfg.get_float("verify", "fp_tol", 1e-8),
        fp_gap=cfg.get_float("verify", "fp_gap", 0.1)))

    op = assemble_system_operator(field, grid)
    op_s = assemble_scalar_operator(field, grid)

    pos_datum = grid_function_from_callable(
        grid, lambda x: [np.exp(-np.dot(x, x))] + [0.0] * (field.dim_m - 1),
        m=field.dim_m)
    t_pos = max(1.0, min(2.0, t_final))
    traj_pos = evolve(op, pos_datum, t_pos, dt=dt, theta=1.0,
                      store_times=[t_pos / 2, 1.0, t_pos])
    reports.append(verify_positivity(
        traj_pos, pos_tol=cfg.get_float("verify", "pos_tol", None), r_obs=r_obs))

    f = data_from_config(cfg, grid, field.dim_m)
    absf2 = GridFunction(grid, np.sum(f.values ** 2, axis=0))
    dom_tol = cfg.get_float("verify", "dom_tol", 1e-6)
    traj_v1 = evolve(op, f, t_final, dt=dt, theta=1.0)
    traj_s1 = evolve(op_s, absf2, t_final, dt=dt, theta=1.0)
    reports.append(verify_semigroup_bounds(traj_v1, traj_s1, p=2.0,
                                           dom_tol=dom_tol, sup_tol=dom_tol))

    inv_tol = cfg.get_float("verify", "inv_tol", 1e-2)
    check_times = sorted({min(0.1, t_final), min(1.0, t_final), t_final})
    traj_v = evolve(op, f, t_final, dt=dt, theta=theta, store_times=check_times)
    reports.append(verify_invariance(traj_v, sys, inv_tol=inv_tol))

    scal_tol = 1e-3
    worst = 0.0
    for name in ("tanh", "gauss"):
        g = grid_function_from_callable(grid, DATA_BUILDERS[name], m=1)
        traj_g = evolve(op_s, g, t_final, dt=dt, theta=theta, store_times=check_times)
        base = mu.integrate(g.values[0])
        drift = max(abs(mu.integrate(s.values[0]) - base) for s in traj_g.snapshots)
        worst = max(worst, drift / max(np.max(np.abs(g.values)), 1e-300))
    reports.append(PropertyReport(
        name="scalar_invariance", status="pass" if worst <= scal_tol else "fail",
        measured=worst, bound=0.0, tolerance=scal_tol))

    lp_tol = cfg.get_float("verify", "lp_tol", 1e-6)
    for p in (1.0, 2.0, 4.0):
        reports.append(verify_lp_bound(traj_v, sys, p, lp_tol=lp_tol))
    return reports


def _suite_rates(cfg, field):
    grid = grid_from_config(cfg, boundary_override="neumann")
    dt, _, theta, _ = time_from_config(cfg)
    r_obs = cfg.get_float("verify", "R_obs", 3.0)
    slope_margin = cfg.get_float("verify", "slope_margin", 0.25)
    eps = 2.0 * grid.h

    def radial(x):
        return x[0] if grid.d == 1 else float(np.linalg.norm(x)) * np.sign(x[0] + 1e-300)

    pad = [0.0] * (field.dim_m - 1)
    f_step = grid_function_from_callable(
        grid, lambda x: [np.tanh(radial(x) / eps)] + pad, m=field.dim_m)
    f_kink = grid_function_from_callable(
        grid, lambda x: [eps * np.log(np.cosh(radial(x) / eps))] + pad, m=field.dim_m)
    f_smooth = grid_function_from_callable(
        grid, lambda x: [np.tanh(x[0]), np.exp(-np.dot(x, x))] + pad[1:], m=field.dim_m)

    cases = [(1, 0, f_step, 50.0), (2, 0, f_step, 50.0),
             (2, 1, f_kink, 50.0), (1, 1, f_smooth, 10.0)]
    reports = []
    for k, h, f, cap in cases:
        fit = estimate_gradient_rate(field, f, p=2.0, k=k, h=h, r_obs=r_obs,
                                     dt=dt, theta=theta, ratio_cap=cap)
        reports.append(rate_report(fit, k=k, h=h, p=2.0,
                                   slope_margin=slope_margin, ratio_cap=cap))
    return reports


def _suite_asymptotic(cfg, field):
    grid = grid_from_config(cfg, boundary_override="neumann")
    dt, t_final, theta, store_every = time_from_config(cfg)
    r_obs = cfg.get_float("verify", "R_obs", 3.0)
    longtime_tol = cfg.get_float("verify", "longtime_tol", 1e-2)
    xi, mu, sys = _measure_pipeline(cfg, field, grid)
    op = assemble_system_operator(field, grid)
    reports = []

    e1 = np.zeros(field.dim_m)
    e1[0] = 1.0
    traj = evolve(op, _constant_function(grid, e1), t_final, dt=dt, theta=theta,
                  store_every=store_every)
    reports.append(verify_longtime(traj, sys, r_obs=r_obs,
                                   longtime_tol=longtime_tol))

    bumps = [bump_function([0.0] * grid.d, 2.0), bump_function([0.5] * grid.d, 1.5)]
    fb = grid_function_from_callable(
        grid, lambda x: [bumps[k % len(bumps)](x) for k in range(field.dim_m)],
        m=field.dim_m)
    traj_b = evolve(op, fb, t_final, dt=dt, theta=theta, store_every=store_every)
    spec = _sample_spec(cfg)
    bundle = derivative_bundle(field)
    mu0 = min(bundle.mu_q(x) for x in spec.points(field.dim_d)[::4])
    reports.append(verify_l2_gradient_decay(traj_b, mu, mu0=mu0))

    # Cesaro consistency: at integer t the running average of the semigroup
    # equals the discrete average of the unit-interval averages.
    n = max(2, int(t_final))
    f = data_from_config(cfg, grid, field.dim_m)
    traj_f = evolve(op, f, float(n), dt=dt, theta=theta, store_every=store_every)
    p_n = cesaro_average(traj_f)
    traj_1 = evolve(op, f, 1.0, dt=dt, theta=theta,
                    store_every=max(1, int(0.01 / dt)))
    p_1 = cesaro_average(traj_1)
    r_n = discrete_average(op, p_1, n, dt=dt, theta=theta)
    window = grid.window_mask(r_obs)
    gap = float(np.max(np.abs(p_n.values - r_n.values)[:, window]))
    reports.append(PropertyReport(
        name="cesaro_identity", status="pass" if gap <= 1e-3 else "fail",
        measured=gap, bound=0.0, tolerance=1e-3, details={"n": n}))

    if cfg.has_section("nest"):
        ladder = ladder_from_config(cfg)
        nest_tol = cfg.get_float("nest", "nest_tol", 1e-4)
        nest_r = cfg.get_float("nest", "R_obs", r_obs)
        result = solve_nested(field, data_callable(cfg, field.dim_m), t_final,
                              ladder, nest_tol, nest_r, dt=dt, theta=theta,
                              store_every=store_every)
        # a ladder whose rungs all agree to tolerance is converged outright;
        # ordering only matters while the discrepancies are above nest_tol
        all_within = all(d <= nest_tol for d in result.discrepancies)
        decreasing = all_within or all(
            b < a for a, b in zip(result.discrepancies, result.discrepancies[1:]))
        gap_ok = result.dirichlet_neumann_gap <= max(
            2.0 * result.discrepancies[-1], nest_tol)
        ok = result.converged and decreasing and gap_ok
        reports.append(PropertyReport(
            name="nested_convergence", status="pass" if ok else "fail",
            measured=result.discrepancies[-1], bound=nest_tol, tolerance=nest_tol,
            details={"discrepancies": result.discrepancies,
                     "dirichlet_neumann_gap": result.dirichlet_neumann_gap}))
    return reports


def _suite_counterexample(cfg, field):
    grid = grid_from_config(cfg, boundary_override="neumann")
    dt, t_final, theta, _ = time_from_config(cfg)
    mu = solve_scalar_invariant_density(field, grid)
    m = field.dim_m
    gamma = cfg.get_float("problem", "gamma", 0.0)
    beta = cfg.get_float("problem", "beta", 1.0)
    b0 = cfg.get_float("problem", "b0", 1.0)
    reports = []
    f = _constant_function(grid, np.full(m, 1.0 / np.sqrt(m)))
    for C0 in (np.eye(m), -np.eye(m)):
        cfield = make_builtin(BuiltinFamily(
            dim_d=field.dim_d, dim_m=m, gamma=gamma, beta=beta, b0=b0,
            Q0=np.eye(field.dim_d), coupling_kind="constant_matrix", C0=C0))
        reports.append(counterexample_mode(cfield, f, t_final=min(t_final, 5.0),
                                           dt=dt, theta=theta, mu_hat=mu))
    g = np.zeros(m)
    g[0] = 1.0
    reports.append(jordan_asymptotics_check(field.C(np.zeros(field.dim_d)), g,
                                            np.linspace(0.0, 8.0, 17)))
    return reports


def cmd_verify(args):
    cfg = parse_config(args.config)
    field = field_from_config(cfg)
    suite = args.suite or cfg.get_choice("verify", "suite", set(SUITES), "core")
    runner = {"core": _suite_core, "rates": _suite_rates,
              "asymptotic": _suite_asymptotic,
              "counterexample": _suite_counterexample}[suite]
    reports = runner(cfg, field)
    atomic_write(_out_path(args, cfg, "report.txt"), _report_text(reports))
    return 0 if all(r.passed for r in reports) else 1


def _sweep_row(cfg, gamma, beta, b0, p):
    field = make_builtin(BuiltinFamily(
        dim_d=cfg.get_int("problem", "d", 1),
        dim_m=cfg.get_int("problem", "m", 2),
        gamma=gamma, beta=beta if beta > 0 else 0.0, b0=b0,
        Q0=np.eye(cfg.get_int("problem", "d", 1)),
        coupling_kind=cfg.get_choice("problem", "coupling_kind",
                                     {"exchange2", "zeta3"}, "exchange2")))
    grid = grid_from_config(cfg, boundary_override="neumann")
    dt, t_final, theta, store_every = time_from_config(cfg)
    spec = _sample_spec(cfg)
    sigma = cfg.get_float("verify", "phi_exponent", 1.0)
    r_obs = cfg.get_float("verify", "R_obs", 3.0)

    lyap = check_lyapunov(field, sigma, spec)
    growth = check_growth(field, sigma, spec)
    row = {"gamma": gamma, "beta": beta, "b0": b0, "p": p,
           "lyapunov": lyap.status, "growth": growth.status}
    if not lyap.passed:
        row.update({"invariance": "", "lp_bound": "", "longtime_err": "",
                    "decay_rate": "", "m_f": ""})
        return row

    xi, mu, sys = _measure_pipeline(cfg, field, grid)
    op = assemble_system_operator(field, grid)
    f = data_from_config(cfg, grid, field.dim_m)
    traj = evolve(op, f, t_final, dt=dt, theta=theta, store_every=store_every)
    inv = verify_invariance(traj, sys)
    lp = verify_lp_bound(traj, sys, p)
    m_f = functional_Mf(f, sys)

    errs = []
    window = grid.window_mask(r_obs)
    target = m_f * xi.xi[:, None]
    for snap in traj.snapshots:
        diff = snap.values - target
        errs.append(float(np.max(np.sqrt(np.sum(diff ** 2, axis=0))[window])))
    errs = np.array(errs)
    usable = errs > 1e-12
    if np.sum(usable) >= 2:
        slope, _ = np.polyfit(traj.times[usable], np.log(errs[usable]), 1)
        decay = -float(slope)
    else:
        decay = float("inf")

    row.update({"invariance": inv.status, "lp_bound": lp.status,
                "longtime_err": fmt(errs[-1]), "decay_rate": fmt(decay),
                "m_f": fmt(m_f)})
    return row


SWEEP_COLUMNS = ("gamma", "beta", "b0", "p", "lyapunov", "growth",
                 "invariance", "lp_bound", "longtime_err", "decay_rate", "m_f")


def cmd_sweep(args):
    cfg = parse_config(args.config)
    cfg.require_section("sweep")
    gammas = cfg.get_floats("sweep", "gamma", [cfg.get_float("problem", "gamma", 0.0)])
    betas = cfg.get_floats("sweep", "beta", [cfg.get_float("problem", "beta", 1.0)])
    b0s = cfg.get_floats("sweep", "b0", [cfg.get_float("problem", "b0", 1.0)])
    ps = cfg.get_floats("sweep", "p", [2.0])
    cap = cfg.get_int("sweep", "cap", 64)
    workers = cfg.get_int("sweep", "workers", 4)
    combos = sorted(itertools.product(gammas, betas, b0s, ps))
    if len(combos) > cap:
        raise ConfigError(f"sweep of {len(combos)} runs exceeds the cap {cap}")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(lambda c: _sweep_row(cfg, *c), combos))

    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        cells = []
        for col in SWEEP_COLUMNS:
            value = row[col]
            cells.append(fmt(value) if isinstance(value, float) else str(value))
        lines.append(",".join(cells))
    atomic_write(_out_path(args, cfg, "summary.csv"), "\n".join(lines) + "\n")
    bad = any(row["lyapunov"] != "pass" or row["growth"] != "pass"
              or row.get("invariance") not in ("pass", "")
              or row.get("lp_bound") not in ("pass", "") for row in rows)
    return 1 if bad else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="kolsys",
        description="Simulate weakly coupled Kolmogorov systems and verify "
                    "their semigroup properties.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="certify the standing hypotheses")
    p_check.add_argument("--config", required=True)
    p_check.add_argument("--out", default=None)
    p_check.add_argument("--kp", action="store_true",
                         help="also report curvature suprema on a grid of c_p")
    p_check.set_defaults(func=cmd_check)

    p_sim = sub.add_parser("simulate", help="evolve the system and dump a CSV")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", default=None)
    p_sim.add_argument("--nested", action="store_true",
                       help="run the nested-domain ladder from [nest]")
    p_sim.set_defaults(func=cmd_simulate)

    p_meas = sub.add_parser("measure", help="solve the invariant density")
    p_meas.add_argument("--config", required=True)
    p_meas.add_argument("--out", default=None)
    p_meas.add_argument("--oracle", action="store_true",
                        help="add the 1-D closed-form density and the difference")
    p_meas.set_defaults(func=cmd_measure)

    p_ver = sub.add_parser("verify", help="run a property suite")
    p_ver.add_argument("--config", required=True)
    p_ver.add_argument("--suite", choices=SUITES)
    p_ver.add_argument("--out", default=None)
    p_ver.set_defaults(func=cmd_verify)

    p_sweep = sub.add_parser("sweep", help="parameter sweep with a CSV summary")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def run(argv) -> int:
    """Entry point used by tests: argv excludes the program name."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolveError, RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
