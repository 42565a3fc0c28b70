"""Tensor-product grids on truncated boxes and finite-difference operators.

Assembles second-order central-difference matrices for the coupled operator
Tr(Q D^2) + <b, grad> + C, its scalar part, and the formal adjoint
(stationary Fokker-Planck) operator.  Boxes [-L, L]^d stand in for an
exhausting family of balls; d <= 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp

BOUNDARY_KINDS = ("dirichlet", "neumann")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-L, L]^d with lexicographic node ordering."""

    d: int
    L: float
    n_per_axis: int
    boundary_kind: str
    h: float
    axis: np.ndarray                      # node coordinates along one axis
    nodes: np.ndarray                     # (N, d)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def shape(self):
        return (self.n_per_axis,) * self.d

    def interior_mask(self):
        n = self.n_per_axis
        if self.d == 1:
            m = np.zeros(n, dtype=bool)
            m[1:-1] = True
            return m
        m1 = np.zeros((n, n), dtype=bool)
        m1[1:-1, 1:-1] = True
        return m1.ravel()

    def boundary_mask(self):
        return ~self.interior_mask()

    def interior_indices(self):
        return np.flatnonzero(self.interior_mask())

    def window_mask(self, r_obs):
        """Nodes inside the closed observation box [-r_obs, r_obs]^d."""
        tol = 1e-9 * max(self.h, 1.0)
        return np.all(np.abs(self.nodes) <= r_obs + tol, axis=1)

    def quadrature_weights(self):
        """Trapezoidal weights, tensor-product in d = 2."""
        w1 = np.full(self.n_per_axis, self.h)
        w1[0] = w1[-1] = 0.5 * self.h
        if self.d == 1:
            return w1
        return np.outer(w1, w1).ravel()


def build_grid(d, L, n_per_axis, boundary_kind="neumann") -> Grid:
    """Build a grid; n_per_axis must be odd (>= 3) so the origin is a node."""
    if d not in (1, 2):
        raise ValueError("only d in {1, 2} is supported")
    if L <= 0:
        raise ValueError("L must be positive")
    n = int(n_per_axis)
    if n < 3 or n % 2 == 0:
        raise ValueError("n_per_axis must be an odd integer >= 3")
    if boundary_kind not in BOUNDARY_KINDS:
        raise ValueError(f"boundary_kind must be one of {BOUNDARY_KINDS}")
    axis = np.linspace(-L, L, n)
    axis[n // 2] = 0.0
    if d == 1:
        nodes = axis[:, None].copy()
    else:
        X1, X2 = np.meshgrid(axis, axis, indexing="ij")
        nodes = np.column_stack([X1.ravel(), X2.ravel()])
    h = 2.0 * L / (n - 1)
    return Grid(d=d, L=float(L), n_per_axis=n, boundary_kind=boundary_kind,
                h=h, axis=axis, nodes=nodes)


@dataclass
class GridFunction:
    """Values of an m-component function on the nodes of a grid."""

    grid: Grid
    values: np.ndarray                    # (m, N)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.grid.n_nodes:
            raise ValueError("values do not match the grid node count")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite grid function values")

    @property
    def m(self):
        return self.values.shape[0]

    def component(self, i):
        return self.values[i]

    def copy(self):
        return GridFunction(self.grid, self.values.copy())

    def sup_norm_vector(self):
        """Vector sup norm: sqrt(sum_k sup_x |f_k(x)|^2)."""
        return float(np.sqrt(np.sum(np.max(np.abs(self.values), axis=1) ** 2)))


def grid_function_from_callable(grid, fn, m=None):
    """Sample a callable x -> scalar or x -> (m,) on the grid nodes."""
    first = np.atleast_1d(np.asarray(fn(grid.nodes[0]), dtype=float))
    m = len(first) if m is None else m
    values = np.empty((m, grid.n_nodes))
    for idx, x in enumerate(grid.nodes):
        values[:, idx] = np.atleast_1d(np.asarray(fn(x), dtype=float))
    return GridFunction(grid, values)


@dataclass
class DiscreteOperator:
    """Assembled sparse operator with block structure over components.

    `dof_indices` maps operator rows to grid nodes: all nodes for Neumann,
    interior nodes for Dirichlet (zero extension outside).
    """

    matrix: sp.csr_matrix
    grid: Grid
    m: int
    boundary_kind: str
    dof_indices: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    @property
    def n_dof(self):
        return len(self.dof_indices)

    def restrict(self, f: GridFunction):
        """Flatten full-grid values into the component-major dof vector."""
        if f.values.shape[0] != self.m:
            raise ValueError("component count mismatch")
        return f.values[:, self.dof_indices].ravel()

    def embed(self, u):
        """Inverse of restrict; zero on eliminated boundary nodes."""
        vals = np.zeros((self.m, self.grid.n_nodes))
        vals[:, self.dof_indices] = np.asarray(u).reshape(self.m, self.n_dof)
        return GridFunction(self.grid, vals)

    def apply(self, f: GridFunction) -> GridFunction:
        return self.embed(self.matrix @ self.restrict(f))

    def component_block(self, k, l):
        """(k, l) component-coupling block as a sparse matrix."""
        n = self.n_dof
        return self.matrix[k * n:(k + 1) * n, l * n:(l + 1) * n]


def _scalar_stencil_entries(field, grid):
    """COO entries of the scalar operator Tr(Q D^2) + <b, grad>.

    Neumann boundaries use second-order ghost elimination: the ghost node
    obtained by stepping outside is reflected back inside, which encodes a
    vanishing normal derivative at the boundary node.  Dirichlet keeps
    interior rows only and drops boundary-neighbor contributions.
    """
    n = grid.n_per_axis
    h = grid.h
    d = grid.d
    dirichlet = grid.boundary_kind == "dirichlet"

    rows, cols, vals = [], [], []

    def reflect(i):
        if i == -1:
            return 1
        if i == n:
            return n - 2
        return i

    def on_boundary(multi):
        return any(i == 0 or i == n - 1 for i in multi)

    def flat(multi):
        if d == 1:
            return multi[0]
        return multi[0] * n + multi[1]

    def add(row_multi, col_multi, v):
        if v == 0.0:
            return
        if dirichlet:
            if on_boundary(col_multi):
                return                      # zero extension
            rows.append(flat(row_multi))
            cols.append(flat(col_multi))
        else:
            col = tuple(reflect(i) for i in col_multi)
            rows.append(flat(row_multi))
            cols.append(flat(col))
        vals.append(v)

    inv_h2 = 1.0 / (h * h)
    inv_2h = 1.0 / (2.0 * h)

    if d == 1:
        it = ((i,) for i in range(n))
    else:
        it = ((i, j) for i in range(n) for j in range(n))

    for multi in it:
        if dirichlet and on_boundary(multi):
            continue
        x = grid.nodes[flat(multi)]
        Q = np.atleast_2d(field.Q(x))
        b = np.atleast_1d(field.b(x))
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(b))):
            raise ValueError(f"coefficient evaluation failed at node {x}")
        for axis_i in range(d):
            q = Q[axis_i, axis_i]
            bi = b[axis_i]
            up = list(multi); up[axis_i] += 1
            dn = list(multi); dn[axis_i] -= 1
            add(multi, tuple(up), q * inv_h2 + bi * inv_2h)
            add(multi, tuple(dn), q * inv_h2 - bi * inv_2h)
            add(multi, multi, -2.0 * q * inv_h2)
        if d == 2:
            q12 = Q[0, 1]
            if q12 != 0.0:
                c = 2.0 * q12 / (4.0 * h * h)   # Tr picks up q12 twice
                i, j = multi
                add(multi, (i + 1, j + 1), c)
                add(multi, (i + 1, j - 1), -c)
                add(multi, (i - 1, j + 1), -c)
                add(multi, (i - 1, j - 1), c)

    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n ** d, n ** d)).tocsr()
    if dirichlet:
        keep = grid.interior_indices()
        mat = mat[keep][:, keep]
        dof = keep
    else:
        dof = np.arange(n ** d)
    return mat, dof


def assemble_scalar_operator(field, grid) -> DiscreteOperator:
    """Finite-difference matrix for the scalar operator (no coupling)."""
    if grid.d != field.dim_d:
        raise ValueError("grid dimension does not match the field")
    mat, dof = _scalar_stencil_entries(field, grid)
    return DiscreteOperator(matrix=mat, grid=grid, m=1,
                            boundary_kind=grid.boundary_kind, dof_indices=dof)


def assemble_system_operator(field, grid) -> DiscreteOperator:
    """Block operator: m copies of the scalar stencil plus node-diagonal coupling."""
    if grid.d != field.dim_d:
        raise ValueError("grid dimension does not match the field")
    a0, dof = _scalar_stencil_entries(field, grid)
    m = field.dim_m
    c_nodes = np.empty((len(dof), m, m))
    for row, idx in enumerate(dof):
        c_nodes[row] = field.C(grid.nodes[idx])
    if not np.all(np.isfinite(c_nodes)):
        raise ValueError("coupling evaluation failed at a node")
    blocks = [[None] * m for _ in range(m)]
    for k in range(m):
        for l in range(m):
            coupling = sp.diags(c_nodes[:, k, l])
            blocks[k][l] = a0 + coupling if k == l else coupling
    mat = sp.bmat(blocks, format="csr")
    return DiscreteOperator(matrix=mat, grid=grid, m=m,
                            boundary_kind=grid.boundary_kind, dof_indices=dof)


def assemble_adjoint_operator(field, grid) -> DiscreteOperator:
    """Conservative-form stationary Fokker-Planck operator.

    Discretizes rho -> sum_ij D_ij(q_ij rho) - sum_i D_i(b_i rho) with zero
    far-field values.  On a uniform grid the central-difference conservative
    form is exactly the transpose of the Dirichlet scalar stencil, which
    makes the discrete duality <A0 u, rho> = <u, A0* rho> an identity.
    """
    dgrid = grid if grid.boundary_kind == "dirichlet" else \
        build_grid(grid.d, grid.L, grid.n_per_axis, "dirichlet")
    mat, dof = _scalar_stencil_entries(field, dgrid)
    return DiscreteOperator(matrix=mat.T.tocsr(), grid=grid, m=1,
                            boundary_kind="dirichlet", dof_indices=dof,
                            meta={"adjoint": True})


def fd_gradient(values, grid):
    """Central-difference gradient of nodal values, one-sided at the box edge.

    Returns an array of shape (d, N).
    """
    if grid.d == 1:
        g = np.gradient(values, grid.h)
        return g[None, :]
    f = values.reshape(grid.shape)
    g1, g2 = np.gradient(f, grid.h, grid.h)
    return np.stack([g1.ravel(), g2.ravel()])


def fd_hessian_diag(values, grid):
    """Pure second differences D_ii of nodal values, shape (d, N).

    Boundary entries are copied from the adjacent interior node; callers
    restrict to an interior observation window anyway.
    """
    if grid.d == 1:
        out = np.empty_like(values)
        out[1:-1] = (values[2:] - 2 * values[1:-1] + values[:-2]) / grid.h ** 2
        out[0], out[-1] = out[1], out[-2]
        return out[None, :]
    f = values.reshape(grid.shape)
    d11 = np.empty_like(f)
    d11[1:-1, :] = (f[2:, :] - 2 * f[1:-1, :] + f[:-2, :]) / grid.h ** 2
    d11[0, :], d11[-1, :] = d11[1, :], d11[-2, :]
    d22 = np.empty_like(f)
    d22[:, 1:-1] = (f[:, 2:] - 2 * f[:, 1:-1] + f[:, :-2]) / grid.h ** 2
    d22[:, 0], d22[:, -1] = d22[:, 1], d22[:, -2]
    return np.stack([d11.ravel(), d22.ravel()])


def fd_hessian_frobenius_sq(values, grid):
    """|D^2 u|^2 = sum over ordered index pairs (i,j) of (D_ij u)^2, shape (N,)."""
    diag = fd_hessian_diag(values, grid)
    total = np.sum(diag ** 2, axis=0)
    if grid.d == 2:
        g = fd_gradient(values, grid)
        d12 = fd_gradient(g[0], grid)[1]
        total = total + 2.0 * d12 ** 2
    return total
