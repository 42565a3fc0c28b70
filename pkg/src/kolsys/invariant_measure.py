"""Invariant density of the scalar semigroup and the induced measure system.

The density is the kernel of the discrete stationary Fokker-Planck operator,
found by inverse iteration; a closed-form 1-D oracle provides the independent
cross-check.  A kernel direction xi turns the scalar measure mu into the
family mu_j = c xi_j mu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from kolsys.coefficients import CoefficientField
from kolsys.discretization import (
    Grid,
    GridFunction,
    assemble_adjoint_operator,
    assemble_scalar_operator,
    fd_gradient,
    fd_hessian_frobenius_sq,
)
from kolsys.hypotheses import KernelVector
from kolsys.reports import PropertyReport, Witness


@dataclass
class MeasureDensity:
    """Nonnegative nodal density with unit trapezoidal mass."""

    grid: Grid
    rho: np.ndarray
    weights: np.ndarray
    norm_residual: float
    clip_mass: float = 0.0

    def integrate(self, values):
        """Quadrature of `values` against the density."""
        return float(np.sum(self.weights * self.rho * values))

    def mass(self):
        return float(np.sum(self.weights * self.rho))


@dataclass
class MeasureSystem:
    """System of measures mu_j = c xi_j mu induced by the kernel direction."""

    xi: KernelVector
    mu: MeasureDensity
    scale: float = 1.0

    def masses(self):
        return self.scale * self.xi.xi * self.mu.mass()

    def component_integrate(self, j, values):
        return self.scale * float(self.xi.xi[j]) * self.mu.integrate(values)

    def lp_norm(self, f: GridFunction, p):
        """Discrete norm (sum_j int |f_j|^p dmu_j)^(1/p)."""
        total = 0.0
        for j in range(f.m):
            total += self.component_integrate(j, np.abs(f.values[j]) ** p)
        return float(total ** (1.0 / p))


def _normalize(grid, rho, clip_tol):
    weights = grid.quadrature_weights()
    total = float(np.sum(weights * rho))
    if total < 0:
        rho, total = -rho, -total
    neg = np.minimum(rho, 0.0)
    clip_mass = float(-np.sum(weights * neg))
    denom = max(abs(total), 1e-300)
    if clip_mass / denom > clip_tol:
        raise RuntimeError(
            f"negative density mass {clip_mass / denom:.3e} exceeds {clip_tol:.1e}; "
            "grid too coarse or box too small for this field")
    rho = np.maximum(rho, 0.0)
    total = float(np.sum(weights * rho))
    if total <= 0:
        raise RuntimeError("density vanished after clipping")
    rho = rho / total
    residual = abs(float(np.sum(weights * rho)) - 1.0)
    return rho, weights, residual, clip_mass / denom


def solve_scalar_invariant_density(field: CoefficientField, grid: Grid,
                                   tol=1e-10, max_iter=50,
                                   clip_tol=1e-6) -> MeasureDensity:
    """Kernel of the discrete adjoint operator by shifted inverse iteration.

    Stops when ||A* rho|| <= tol * ||A*|| * ||rho|| in the max norm (the
    residual is scaled by the operator norm).  Tiny negative kernel entries
    are clipped and their relative mass reported; more than `clip_tol` of
    clipped mass aborts with a diagnostic.
    """
    adj = assemble_adjoint_operator(field, grid)
    A = adj.matrix.tocsc()
    op_scale = float(np.abs(A).sum(axis=1).max())
    try:
        lu = spla.splu(A)
    except RuntimeError:
        shift = 1e-12 * op_scale
        lu = spla.splu((A - shift * sp.identity(A.shape[0], format="csc")).tocsc())

    x_int = grid.nodes[adj.dof_indices]
    y = np.exp(-0.5 * np.sum(x_int * x_int, axis=1))
    y /= np.linalg.norm(y)
    last_res = np.inf
    for _ in range(max_iter):
        y = lu.solve(y)
        norm = np.linalg.norm(y)
        if not np.isfinite(norm) or norm == 0.0:
            raise RuntimeError("inverse iteration produced a non-finite iterate")
        y /= norm
        res = float(np.max(np.abs(A @ y))) / (op_scale * float(np.max(np.abs(y))))
        if res <= tol:
            break
        if res > 0.9 * last_res and last_res < np.inf:
            raise RuntimeError(
                f"inverse iteration stagnated at residual {res:.3e} "
                f"(tolerance {tol:.1e}); refine the grid or enlarge the box")
        last_res = res
    else:
        raise RuntimeError(f"inverse iteration did not converge in {max_iter} steps")

    full = np.zeros(grid.n_nodes)
    full[adj.dof_indices] = y
    rho, weights, residual, clip_mass = _normalize(grid, full, clip_tol)
    return MeasureDensity(grid=grid, rho=rho, weights=weights,
                          norm_residual=residual, clip_mass=clip_mass)


def oracle_density_1d(field: CoefficientField, grid: Grid,
                      quad_tol=1e-12) -> MeasureDensity:
    """Closed-form 1-D stationary density rho = Z^-1 q^-1 exp(int_0^x b/q).

    The inner integral is accumulated per grid interval with adaptive
    quadrature; Z comes from the trapezoid rule on the grid.
    """
    if grid.d != 1:
        raise ValueError("the density oracle is one-dimensional")

    def q_of(x):
        return float(np.atleast_2d(field.Q(np.array([x])))[0, 0])

    def ratio(x):
        q = q_of(x)
        if q <= 0:
            raise ValueError(f"diffusion vanishes at x = {x}")
        return float(np.atleast_1d(field.b(np.array([x])))[0]) / q

    xs = grid.axis
    i0 = int(np.argmin(np.abs(xs)))
    cumulative = np.zeros(len(xs))
    for i in range(i0, len(xs) - 1):
        seg, _ = scipy.integrate.quad(ratio, xs[i], xs[i + 1],
                                      epsabs=quad_tol, epsrel=quad_tol)
        cumulative[i + 1] = cumulative[i] + seg
    for i in range(i0, 0, -1):
        seg, _ = scipy.integrate.quad(ratio, xs[i], xs[i - 1],
                                      epsabs=quad_tol, epsrel=quad_tol)
        cumulative[i - 1] = cumulative[i] + seg
    if xs[i0] != 0.0:
        offset, _ = scipy.integrate.quad(ratio, 0.0, xs[i0],
                                         epsabs=quad_tol, epsrel=quad_tol)
        cumulative += offset

    log_rho = cumulative - np.log([q_of(x) for x in xs])
    log_rho -= log_rho.max()
    rho = np.exp(log_rho)
    rho, weights, residual, clip_mass = _normalize(grid, rho, clip_tol=1.0)
    return MeasureDensity(grid=grid, rho=rho, weights=weights,
                          norm_residual=residual, clip_mass=clip_mass)


def build_measure_system(xi: KernelVector, mu: MeasureDensity, c=1.0) -> MeasureSystem:
    """Scale the kernel direction into the measure family mu_j = c xi_j mu."""
    if c <= 0:
        raise ValueError("the scale c must be positive")
    return MeasureSystem(xi=xi, mu=mu, scale=float(c))


def functional_Mf(f: GridFunction, sys: MeasureSystem) -> float:
    """sum_k int f_k dmu_k, the long-time mass functional."""
    if f.grid is not sys.mu.grid and f.grid.n_nodes != sys.mu.grid.n_nodes:
        raise ValueError("grid mismatch between function and measure")
    total = 0.0
    for k in range(f.m):
        total += sys.component_integrate(k, f.values[k])
    return float(total)


def l1_distance(a: MeasureDensity, b: MeasureDensity) -> float:
    return float(np.sum(a.weights * np.abs(a.rho - b.rho)))


def check_infinitesimal_invariance(field: CoefficientField, mu: MeasureDensity,
                                   test_functions, inv_tol=1e-4) -> PropertyReport:
    """|int A0 psi dmu| <= inv_tol * ||psi||_C2 for compactly supported psi."""
    grid = mu.grid
    op = assemble_scalar_operator(
        field, grid if grid.boundary_kind == "dirichlet" else
        _dirichlet_twin(grid))
    test_functions = list(test_functions)
    worst = 0.0
    witness = None
    for psi_fn in test_functions:
        psi = np.array([float(psi_fn(x)) for x in grid.nodes])
        c2 = _c2_norm(psi, grid)
        a_psi = np.zeros(grid.n_nodes)
        a_psi[op.dof_indices] = op.matrix @ psi[op.dof_indices]
        residual = abs(mu.integrate(a_psi))
        rel = residual / max(c2, 1e-300) if c2 > 0 else residual
        if rel >= worst:
            worst = rel
            peak = int(np.argmax(np.abs(psi)))
            witness = Witness(tuple(grid.nodes[peak]), residual)
    status = "pass" if worst <= inv_tol else "fail"
    return PropertyReport(name="infinitesimal_invariance", status=status,
                          measured=worst, bound=0.0, tolerance=inv_tol,
                          witness=witness,
                          details={"n_test_functions": len(test_functions)})


def _dirichlet_twin(grid):
    from kolsys.discretization import build_grid
    return build_grid(grid.d, grid.L, grid.n_per_axis, "dirichlet")


def _c2_norm(psi, grid):
    grad = fd_gradient(psi, grid)
    hess_sq = fd_hessian_frobenius_sq(psi, grid)
    return float(np.max(np.abs(psi))
                 + np.max(np.linalg.norm(grad, axis=0))
                 + np.max(np.sqrt(hess_sq)))


def bump_function(center, width):
    """C^2 polynomial bump (1 - r^2)^3 supported on |x - center| < width."""
    center = np.atleast_1d(np.asarray(center, dtype=float))

    def psi(x):
        r2 = float(np.sum((np.atleast_1d(x) - center) ** 2)) / width ** 2
        return (1.0 - r2) ** 3 if r2 < 1.0 else 0.0

    return psi
