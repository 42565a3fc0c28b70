"""Executable checks of the semigroup's quantitative properties.

Every verify_* call is a pure, deterministic function of trajectories and
measures; sup-norms over R^d are taken over a finite observation window,
matching the locally uniform statements being tested.  Checks may run
concurrently: inputs are immutable.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from kolsys.coefficients import CoefficientField
from kolsys.discretization import (
    GridFunction,
    assemble_scalar_operator,
    assemble_system_operator,
    fd_gradient,
    fd_hessian_frobenius_sq,
)
from kolsys.invariant_measure import MeasureDensity, MeasureSystem
from kolsys.reports import PropertyReport, RateFit, Witness
from kolsys.semigroup import Trajectory, evolve

DOM_TOL = 1e-6
SUP_TOL = 1e-6
POS_TOL_IMPLICIT = 1e-8
POS_TOL_CRANK = 1e-4
INV_TOL = 1e-2
LONGTIME_TOL = 1e-2
SLOPE_MARGIN = 0.25


def _vector_magnitude(values):
    return np.sqrt(np.sum(values ** 2, axis=0))


def _check_same_times(a: Trajectory, b: Trajectory):
    if len(a.times) != len(b.times) or np.max(np.abs(a.times - b.times)) > 1e-9:
        raise ValueError("trajectories store different time grids")


def verify_semigroup_bounds(traj_vec: Trajectory, traj_scalar_abs_p: Trajectory,
                            p, dom_tol=DOM_TOL, sup_tol=SUP_TOL) -> PropertyReport:
    """Pointwise domination |T(t)f|^p <= T(t)|f|^p and sup-norm contraction.

    `traj_scalar_abs_p` must be the scalar evolution of |f|^p on the same
    grid and time grid.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    _check_same_times(traj_vec, traj_scalar_abs_p)
    f_sup = traj_vec.snapshots[0].sup_norm_vector()
    worst_dom = -np.inf
    worst_sup = -np.inf
    witness = None
    for t, snap, scal in zip(traj_vec.times, traj_vec.snapshots,
                             traj_scalar_abs_p.snapshots):
        mag = _vector_magnitude(snap.values)
        dom_violation = np.max(mag ** p - scal.values[0])
        sup_violation = np.max(mag) - f_sup
        if dom_violation > worst_dom:
            worst_dom = float(dom_violation)
            node = int(np.argmax(mag ** p - scal.values[0]))
            witness = Witness(tuple(snap.grid.nodes[node]), worst_dom, t=float(t))
        worst_sup = max(worst_sup, float(sup_violation))
    ok = worst_dom <= dom_tol and worst_sup <= sup_tol
    return PropertyReport(name="domination_contraction",
                          status="pass" if ok else "fail",
                          measured=max(worst_dom, worst_sup), bound=0.0,
                          tolerance=min(dom_tol, sup_tol), witness=witness,
                          details={"domination_margin": worst_dom,
                                   "contraction_margin": worst_sup, "p": p})


def verify_positivity(traj_vec: Trajectory, pos_tol=None, pos_floor=1e-6,
                      r_obs=3.0, floor_time=1.0,
                      floor_components=None) -> PropertyReport:
    """Componentwise nonnegativity plus strict positivity at a later time.

    Requires a componentwise nonnegative initial datum.  With irreducible
    coupling every component of a nontrivial datum is checked against the
    floor on the window; pass `floor_components` to restrict that check.
    """
    f = traj_vec.snapshots[0]
    if np.min(f.values) < -1e-12:
        raise ValueError("initial datum must be componentwise nonnegative")
    if pos_tol is None:
        pos_tol = POS_TOL_IMPLICIT if traj_vec.theta == 1.0 else POS_TOL_CRANK
    worst = np.inf
    witness = None
    for t, snap in zip(traj_vec.times, traj_vec.snapshots):
        mn = float(np.min(snap.values))
        if mn < worst:
            worst = mn
            _, node = np.unravel_index(np.argmin(snap.values), snap.values.shape)
            witness = Witness(tuple(snap.grid.nodes[node]), mn, t=float(t))
    ok = worst >= -pos_tol

    floor_min = None
    if np.max(f.values) > 0:
        snap = traj_vec.snapshot_at(floor_time)
        window = snap.grid.window_mask(r_obs)
        comps = range(snap.m) if floor_components is None else floor_components
        floor_min = float(min(np.min(snap.values[k][window]) for k in comps))
        ok = ok and floor_min >= pos_floor
    return PropertyReport(name="positivity", status="pass" if ok else "fail",
                          measured=worst, bound=0.0, tolerance=pos_tol,
                          witness=witness,
                          details={"min_value": worst, "floor_min": floor_min,
                                   "theta_flagged": traj_vec.theta != 1.0})


def verify_invariance(traj_vec: Trajectory, sys: MeasureSystem,
                      inv_tol=INV_TOL) -> PropertyReport:
    """Relative drift of sum_j int (T(t)f)_j dmu_j over the stored times."""
    f = traj_vec.snapshots[0]
    baseline = sum(sys.component_integrate(j, f.values[j]) for j in range(f.m))
    denom = max(abs(baseline), sys.scale * f.sup_norm_vector())
    worst = 0.0
    witness = None
    for t, snap in zip(traj_vec.times, traj_vec.snapshots):
        total = sum(sys.component_integrate(j, snap.values[j]) for j in range(snap.m))
        rel = abs(total - baseline) / denom
        if rel >= worst:
            worst = float(rel)
            witness = Witness((0.0,) * snap.grid.d, total, t=float(t))
    return PropertyReport(name="system_invariance",
                          status="pass" if worst <= inv_tol else "fail",
                          measured=worst, bound=0.0, tolerance=inv_tol,
                          witness=witness, details={"baseline": baseline})


def verify_fixed_points(field: CoefficientField, grid, candidates, dt=1e-3,
                        theta=0.5, t_check=1.0, fp_tol=1e-8,
                        fp_gap=0.1) -> PropertyReport:
    """Fixed candidates must return to themselves at t = 1; others must move.

    `candidates` is a list of (GridFunction, expect_fixed) pairs; the kernel
    direction is the only expected fixed point up to scale.
    """
    op = assemble_system_operator(field, grid)
    worst_fixed = 0.0
    worst_gap = np.inf
    witness = None
    saw_moving = False
    for gf, expect_fixed in candidates:
        traj = evolve(op, gf, t_final=t_check, dt=dt, theta=theta,
                      store_times=[t_check])
        diff = np.max(np.abs(traj.snapshots[-1].values - gf.values))
        if expect_fixed:
            worst_fixed = max(worst_fixed, float(diff))
            if diff > fp_tol:
                node = int(np.argmax(np.max(np.abs(traj.snapshots[-1].values - gf.values), axis=0)))
                witness = Witness(tuple(grid.nodes[node]), float(diff), t=t_check)
        else:
            saw_moving = True
            worst_gap = min(worst_gap, float(diff))
    ok = worst_fixed <= fp_tol and (not saw_moving or worst_gap >= fp_gap)
    return PropertyReport(name="fixed_points", status="pass" if ok else "fail",
                          measured=worst_fixed, bound=fp_gap, tolerance=fp_tol,
                          witness=witness,
                          details={"fixed_residual": worst_fixed,
                                   "moving_gap": None if not saw_moving else worst_gap})


def _derivative_magnitude_p(values, grid, k, p):
    """(sum_j |D^k u_j|^2)^(p/2) nodewise from central differences."""
    total = np.zeros(values.shape[1])
    for comp in values:
        if k == 1:
            g = fd_gradient(comp, grid)
            total += np.sum(g ** 2, axis=0)
        else:
            total += fd_hessian_frobenius_sq(comp, grid)
    return total ** (p / 2.0)


def derivative_data(f: GridFunction, h):
    """(sum_{j<=h} |D^j f|^2)^(1/2)-squared pile used in the rate denominators."""
    total = np.sum(f.values ** 2, axis=0)
    if h >= 1:
        for comp in f.values:
            g = fd_gradient(comp, f.grid)
            total = total + np.sum(g ** 2, axis=0)
    if h >= 2:
        for comp in f.values:
            total = total + fd_hessian_frobenius_sq(comp, f.grid)
    return total


def estimate_gradient_rate(field: CoefficientField, f: GridFunction, p, k, h,
                           time_window=(1e-3, 1e-1), r_obs=3.0, dt=1e-4,
                           theta=0.5, n_samples=9, ratio_cap=50.0,
                           den_floor=1e-14) -> RateFit:
    """Blow-up rate of |D^k T(t)f|^p against T(t) (sum_{j<=h} |D^j f|^2)^(p/2).

    Samples R(t) = sup over the window of the pointwise ratio at
    geometrically spaced times, fits a log-log slope, and reports whether
    R(t) * t^((k-h) p / 2) stays within `ratio_cap` of flat over the window.
    Only the bound direction is asserted; constants are informational.
    """
    if k not in (1, 2) or not 0 <= h <= k:
        raise ValueError("need k in {1,2} and 0 <= h <= k")
    if p <= 1:
        raise ValueError("p must exceed 1")
    if n_samples < 8:
        raise ValueError("at least 8 geometric samples are required")
    t_min, t_max = time_window
    raw = np.geomspace(t_min, t_max, n_samples)
    times = sorted({max(1, int(round(t / dt))) * dt for t in raw})
    if len(times) < 8:
        raise ValueError("dt too coarse to resolve the requested time window")

    grid = f.grid
    op_sys = assemble_system_operator(field, grid)
    op_scal = assemble_scalar_operator(field, grid)
    traj = evolve(op_sys, f, t_final=times[-1], dt=dt, theta=theta, store_times=times)
    g = GridFunction(grid, derivative_data(f, h) ** (p / 2.0))
    traj_den = evolve(op_scal, g, t_final=times[-1], dt=dt, theta=theta,
                      store_times=times)

    window = grid.window_mask(r_obs)
    values = []
    excluded = 0
    for t in times:
        num = _derivative_magnitude_p(traj.snapshot_at(t).values, grid, k, p)[window]
        den = traj_den.snapshot_at(t).values[0][window]
        good = den > den_floor
        excluded += int(np.sum(~good))
        values.append(float(np.max(num[good] / den[good])))
    values = np.array(values)
    ts = np.array(times)

    slope, intercept = np.polyfit(np.log(ts), np.log(values), 1)
    resid = float(np.sqrt(np.mean(
        (np.log(values) - slope * np.log(ts) - intercept) ** 2)))
    exponent = (k - h) * p / 2.0
    product = values * ts ** exponent
    product_ratio = float(np.max(product) / np.min(product))
    return RateFit(t_min=float(ts[0]), t_max=float(ts[-1]),
                   times=ts.tolist(), values=values.tolist(),
                   slope=float(slope), intercept=float(intercept),
                   fit_residual=resid, product_exponent=exponent,
                   product_ratio=product_ratio,
                   bounded_product=product_ratio <= ratio_cap,
                   excluded_nodes=excluded)


def rate_report(fit: RateFit, k, h, p, slope_margin=SLOPE_MARGIN,
                ratio_cap=50.0) -> PropertyReport:
    """Turn a RateFit into a pass/fail record against the theoretical exponent."""
    exponent = (k - h) * p / 2.0
    slope_ok = fit.slope >= -exponent - slope_margin
    ok = slope_ok and fit.product_ratio <= ratio_cap
    return PropertyReport(name=f"gradient_rate_k{k}_h{h}",
                          status="pass" if ok else "fail",
                          measured=fit.slope, bound=-exponent - slope_margin,
                          tolerance=slope_margin,
                          details={"product_ratio": fit.product_ratio,
                                   "ratio_cap": ratio_cap, "p": p,
                                   "excluded_nodes": fit.excluded_nodes})


def verify_lp_bound(traj_vec: Trajectory, sys: MeasureSystem, p,
                    lp_tol=1e-6) -> PropertyReport:
    """Discrete L^p_mu operator bound with constant 2^((p-1)/p)."""
    if p < 1:
        raise ValueError("p must be at least 1")
    f_norm = sys.lp_norm(traj_vec.snapshots[0], p)
    bound = 2.0 ** ((p - 1.0) / p) * f_norm + lp_tol
    worst = -np.inf
    witness = None
    for t, snap in zip(traj_vec.times, traj_vec.snapshots):
        norm = sys.lp_norm(snap, p)
        if norm > worst:
            worst = float(norm)
            witness = Witness((0.0,) * snap.grid.d, norm, t=float(t))
    return PropertyReport(name=f"lp_bound_p{p}",
                          status="pass" if worst <= bound else "fail",
                          measured=worst, bound=bound, tolerance=lp_tol,
                          witness=witness, details={"initial_norm": f_norm, "p": p})


def verify_longtime(traj_vec: Trajectory, sys: MeasureSystem, r_obs=3.0,
                    longtime_tol=LONGTIME_TOL, plateau_tol=1e-3,
                    jitter=1e-6, decrease_from=1.0) -> PropertyReport:
    """Locally uniform convergence of T(t)f to the constant M_f xi.

    The limit value is computed two independent ways: the measure-system
    quadrature M_f and the plateau of <T(t)f, xi>; they must agree within
    `plateau_tol`.  The L^2_mu distance at the final time is checked as well.
    """
    from kolsys.invariant_measure import functional_Mf

    f = traj_vec.snapshots[0]
    grid = f.grid
    window = grid.window_mask(r_obs)
    xi = sys.xi.xi
    m_f = functional_Mf(f, sys) / sys.scale

    errs = []
    for snap in traj_vec.snapshots:
        diff = snap.values - m_f * xi[:, None]
        errs.append(float(np.max(_vector_magnitude(diff)[window])))
    errs = np.array(errs)

    after = traj_vec.times >= decrease_from
    tail = errs[after]
    monotone = bool(np.all(np.diff(tail) <= jitter)) if len(tail) > 1 else True
    final_err = float(errs[-1])

    final = traj_vec.snapshots[-1]
    plateau = np.einsum("k,kn->n", xi, final.values)
    plateau_gap = float(np.max(np.abs(plateau[window] - m_f)))

    unit = MeasureSystem(xi=sys.xi, mu=sys.mu, scale=1.0)
    diff_gf = GridFunction(grid, final.values - m_f * xi[:, None])
    l2_dist = unit.lp_norm(diff_gf, 2)

    ok = monotone and final_err <= longtime_tol and \
        plateau_gap <= plateau_tol and l2_dist <= longtime_tol
    node = int(np.argmax(_vector_magnitude(final.values - m_f * xi[:, None])))
    return PropertyReport(name="longtime_convergence",
                          status="pass" if ok else "fail",
                          measured=final_err, bound=longtime_tol,
                          tolerance=longtime_tol,
                          witness=Witness(tuple(grid.nodes[node]), final_err,
                                          t=float(traj_vec.times[-1])),
                          details={"monotone_after": monotone,
                                   "plateau_gap": plateau_gap,
                                   "l2_distance": l2_dist, "m_f": m_f})


def verify_l2_gradient_decay(traj_vec: Trajectory, mu: MeasureDensity, mu0,
                             t_ref=0.1, decay_factor=0.05, jitter=1e-8,
                             integral_slack=1.1) -> PropertyReport:
    """Decay of h(t) = sum_j int |grad (T(t)f)_j|^2 dmu and its time integral.

    The integral of h is bounded by mu0^{-1} sum_j int f_j^2 dmu up to the
    stated slack; mu0 is the ellipticity constant of the field.
    """
    grid = traj_vec.grid
    hs = []
    for snap in traj_vec.snapshots:
        total = 0.0
        for comp in snap.values:
            g = fd_gradient(comp, grid)
            total += mu.integrate(np.sum(g ** 2, axis=0))
        hs.append(total)
    hs = np.array(hs)
    times = traj_vec.times

    h_ref = float(hs[np.argmin(np.abs(times - t_ref))])
    h_final = float(hs[-1])
    decay_ok = h_final <= decay_factor * h_ref
    tail = hs[times >= 1.0]
    scale = max(h_ref, 1e-300)
    monotone = bool(np.all(np.diff(tail) <= jitter * scale)) if len(tail) > 1 else True

    integral = float(np.trapezoid(hs, times))
    f = traj_vec.snapshots[0]
    f_l2_sq = sum(mu.integrate(f.values[j] ** 2) for j in range(f.m))
    integral_bound = integral_slack * f_l2_sq / mu0
    ok = decay_ok and monotone and integral <= integral_bound
    return PropertyReport(name="l2_gradient_decay",
                          status="pass" if ok else "fail",
                          measured=h_final, bound=decay_factor * h_ref,
                          tolerance=decay_factor,
                          details={"h_ref": h_ref, "integral": integral,
                                   "integral_bound": integral_bound,
                                   "monotone_after": monotone})


def counterexample_mode(field: CoefficientField, f: GridFunction, t_final,
                        dt=1e-3, theta=0.5, weights=None,
                        mu_hat: MeasureDensity | None = None,
                        rate_window=None) -> PropertyReport:
    """Behaviour of the semigroup when the coupling sign condition is dropped.

    With a constant coupling matrix whose quadratic form takes positive
    values, a weighted mass functional grows exponentially (no invariant
    system can exist); with a strictly negative form the sup-norm decays
    exponentially; along a kernel direction the mass stays constant.
    """
    grid = f.grid
    probes = [np.zeros(grid.d), np.full(grid.d, 0.7), np.full(grid.d, -1.3)]
    C0 = field.C(probes[0])
    for x in probes[1:]:
        if not np.allclose(field.C(x), C0, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(C0))):
            raise ValueError("counterexample mode requires a constant coupling matrix")
    sym_max = float(np.max(np.linalg.eigvalsh(0.5 * (C0 + C0.T))))
    sym_min = float(np.min(np.linalg.eigvalsh(0.5 * (C0 + C0.T))))

    op = assemble_system_operator(field, grid)
    traj = evolve(op, f, t_final=t_final, dt=dt, theta=theta)
    times = traj.times
    if rate_window is not None:
        sel = (times >= rate_window[0]) & (times <= rate_window[1])
    else:
        sel = np.ones(len(times), dtype=bool)

    if weights is None:
        weights = np.full(field.dim_m, 1.0 / np.sqrt(field.dim_m))
    weights = np.asarray(weights, dtype=float)

    tol = 1e-12 * max(1.0, np.linalg.norm(C0))
    if sym_max > tol:
        if mu_hat is None:
            from kolsys.invariant_measure import solve_scalar_invariant_density
            mu_hat = solve_scalar_invariant_density(field, grid)
        mass = np.array([sum(weights[j] * mu_hat.integrate(s.values[j])
                             for j in range(s.m)) for s in traj.snapshots])
        usable = mass > 0
        lam, _ = np.polyfit(times[usable & sel], np.log(mass[usable & sel]), 1)
        factor = mass[-1] / mass[0]
        ok = lam > 0 and factor >= np.exp(lam * (times[-1] - times[0])) / 2.0
        return PropertyReport(name="counterexample_growth",
                              status="pass" if ok else "fail",
                              measured=float(lam), bound=0.0, tolerance=0.0,
                              details={"mode": "growth", "mass_factor": float(factor)})
    if sym_min < -tol and sym_max < -tol:
        sup = np.array([s.sup_norm_vector() for s in traj.snapshots])
        usable = sup > 1e-300
        sigma, _ = np.polyfit(times[usable & sel], np.log(sup[usable & sel]), 1)
        sigma = -sigma
        envelope_ok = bool(np.all(sup <= np.exp(-sigma * times) * sup[0] * 1.1))
        ok = sigma > 0 and envelope_ok
        return PropertyReport(name="counterexample_decay",
                              status="pass" if ok else "fail",
                              measured=float(sigma), bound=0.0, tolerance=0.1,
                              details={"mode": "decay", "envelope_ok": envelope_ok})

    # neutral direction: mass along the kernel of C is conserved
    if mu_hat is None:
        from kolsys.invariant_measure import solve_scalar_invariant_density
        mu_hat = solve_scalar_invariant_density(field, grid)
    null = scipy.linalg.null_space(C0, rcond=1e-10)
    if null.shape[1] >= 1:
        weights = null[:, 0] if null[0, 0] > 0 else -null[:, 0]
    mass = np.array([sum(weights[j] * mu_hat.integrate(s.values[j])
                         for j in range(s.m)) for s in traj.snapshots])
    drift = float(np.max(np.abs(mass - mass[0])))
    ok = drift <= 1e-6 * max(1.0, abs(mass[0]))
    return PropertyReport(name="counterexample_neutral",
                          status="pass" if ok else "fail",
                          measured=drift, bound=0.0, tolerance=1e-6,
                          details={"mode": "neutral", "mass0": float(mass[0])})


def jordan_asymptotics_check(C0, g, t_grid, rate_slack=0.05,
                             tol=1e-10) -> PropertyReport:
    """Exponential convergence of exp(t C0) g to its kernel projection.

    The matrix exponential is evaluated by scaling and squaring; the fitted
    decay rate must reach the spectral gap (largest nonzero real part, in
    absolute value) up to `rate_slack`.
    """
    C0 = np.asarray(C0, dtype=float)
    g = np.asarray(g, dtype=float)
    scale = max(1.0, float(np.linalg.norm(C0)))
    eig = np.linalg.eigvals(C0)
    if np.max(eig.real) > tol * scale:
        raise ValueError("C0 has an eigenvalue with positive real part")
    nonzero = eig[np.abs(eig) > tol * scale]
    gap = float(np.min(-nonzero.real)) if len(nonzero) else np.inf

    null = scipy.linalg.null_space(C0, rcond=1e-10)
    if null.shape[1] == 0:
        proj = np.zeros_like(g)
    elif null.shape[1] == 1:
        left = scipy.linalg.null_space(C0.T, rcond=1e-10)[:, 0]
        xi = null[:, 0]
        proj = xi * (left @ g) / (left @ xi)
    else:
        raise ValueError("kernel dimension >= 2 is not supported")

    ts = np.asarray(t_grid, dtype=float)
    dists = np.array([float(np.linalg.norm(scipy.linalg.expm(t * C0) @ g - proj))
                      for t in ts])
    usable = dists > 1e-13 * max(1.0, np.linalg.norm(g))
    if np.sum(usable) >= 2 and np.any(dists[usable] > 0):
        slope, _ = np.polyfit(ts[usable], np.log(dists[usable]), 1)
        rate = -float(slope)
    else:
        rate = np.inf
    ok = rate >= gap - rate_slack
    return PropertyReport(name="jordan_asymptotics",
                          status="pass" if ok else "fail",
                          measured=rate, bound=gap - rate_slack,
                          tolerance=rate_slack,
                          details={"gap": gap, "final_distance": float(dists[-1]),
                                   "limit": proj.tolist()})
