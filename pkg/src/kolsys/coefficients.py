"""Coefficient fields (diffusion Q, drift b, zero-order coupling C) and their derivatives.

Builtin families follow the polynomial pattern

    Q(x) = (1 + |x|^2)^gamma * Q0,      b(x) = -b0 * x * (1 + |x|^2)^beta,

with coupling chosen among a 2x2 exchange matrix, a 3x3 zero-row-and-column-sum
family, or a user-supplied constant matrix.  All derivatives are analytic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

COUPLING_KINDS = ("exchange2", "zeta3", "constant_matrix")


@dataclass(frozen=True)
class CoefficientField:
    """Evaluators for the coefficients of a weakly coupled elliptic operator.

    Q maps a point to a symmetric d x d matrix, b to a d-vector, C to an
    m x m matrix with nonnegative off-diagonal entries.  Derivative
    evaluators are present up to `smoothness_order`.  Instances are
    immutable and safe to share across workers.
    """

    dim_d: int
    dim_m: int
    Q: Callable
    b: Callable
    C: Callable
    smoothness_order: int = 1
    # first derivatives: dQ[k,i,j] = D_k q_ij, jac_b[i,j] = D_j b_i, dC[k,h,l] = D_k c_hl
    dQ: Callable | None = None
    jac_b: Callable | None = None
    dC: Callable | None = None
    # second derivatives: d2Q[k,l,i,j] = D_kl q_ij, d2b[k,l,i] = D_kl b_i, d2C[k,l,h,s]
    d2Q: Callable | None = None
    d2b: Callable | None = None
    d2C: Callable | None = None


@dataclass(frozen=True)
class BuiltinFamily:
    """Parameters of the builtin coefficient family."""

    dim_d: int
    dim_m: int
    gamma: float
    beta: float
    b0: float
    Q0: np.ndarray
    coupling_kind: str = "exchange2"
    C0: np.ndarray | None = None      # only for coupling_kind == "constant_matrix"


def _as_point(x, d):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise ValueError(f"expected point in R^{d}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite evaluation point")
    return x


def _coupling_scalar(x):
    """Decay profile 1/(1+|x|^2) and its first two radial building blocks."""
    s = float(np.dot(x, x))
    c = 1.0 / (1.0 + s)
    dc = -2.0 * x * c * c                       # gradient
    d2c = -2.0 * np.eye(len(x)) * c * c + 8.0 * np.outer(x, x) * c ** 3
    return c, dc, d2c


_EXCHANGE2 = np.array([[-1.0, 1.0], [1.0, -1.0]])

# Zero row- and column-sum 3x3 pattern built from three positive weights.
def _zeta3_matrix(z1, z2, z3):
    return np.array([
        [-z1 - z2, z1, z2],
        [z2, -z1 - z2 - z3, z1 + z3],
        [z1, z2 + z3, -z1 - z2 - z3],
    ])


def make_builtin(family: BuiltinFamily) -> CoefficientField:
    """Build a CoefficientField for a builtin family with analytic derivatives.

    Rejects a non-symmetric or non-positive-definite Q0, an m mismatched with
    the coupling kind, and b0 <= 0.  beta = 0 is accepted so the
    Ornstein-Uhlenbeck drift b(x) = -b0 x is representable.
    """
    d, m = family.dim_d, family.dim_m
    Q0 = np.asarray(family.Q0, dtype=float)
    if Q0.shape != (d, d):
        raise ValueError(f"Q0 must be {d}x{d}, got {Q0.shape}")
    if not np.allclose(Q0, Q0.T, rtol=0, atol=1e-12 * max(1.0, np.linalg.norm(Q0))):
        raise ValueError("Q0 must be symmetric")
    if np.min(np.linalg.eigvalsh(Q0)) <= 0:
        raise ValueError("Q0 must be positive definite")
    if family.b0 <= 0:
        raise ValueError("b0 must be positive")
    if family.beta < 0:
        raise ValueError("beta must be nonnegative")
    if family.coupling_kind not in COUPLING_KINDS:
        raise ValueError(f"unknown coupling_kind {family.coupling_kind!r}")
    if family.coupling_kind == "exchange2" and m != 2:
        raise ValueError("exchange2 coupling requires dim_m = 2")
    if family.coupling_kind == "zeta3" and m != 3:
        raise ValueError("zeta3 coupling requires dim_m = 3")
    if family.coupling_kind == "constant_matrix":
        if family.C0 is None:
            raise ValueError("constant_matrix coupling requires C0")
        C0 = np.asarray(family.C0, dtype=float)
        if C0.shape != (m, m):
            raise ValueError(f"C0 must be {m}x{m}, got {C0.shape}")
    else:
        C0 = None

    gamma, beta, b0 = float(family.gamma), float(family.beta), float(family.b0)

    def phi_pow(x, p):
        return (1.0 + float(np.dot(x, x))) ** p

    def Q(x):
        x = _as_point(x, d)
        return phi_pow(x, gamma) * Q0

    def dQ(x):
        x = _as_point(x, d)
        fac = 2.0 * gamma * phi_pow(x, gamma - 1.0)
        return fac * x[:, None, None] * Q0[None, :, :]

    def d2Q(x):
        x = _as_point(x, d)
        eye = np.eye(d)
        fac1 = 2.0 * gamma * phi_pow(x, gamma - 1.0)
        fac2 = 4.0 * gamma * (gamma - 1.0) * phi_pow(x, gamma - 2.0)
        core = fac1 * eye + fac2 * np.outer(x, x)
        return core[:, :, None, None] * Q0[None, None, :, :]

    def b(x):
        x = _as_point(x, d)
        return -b0 * x * phi_pow(x, beta)

    def jac_b(x):
        x = _as_point(x, d)
        p = phi_pow(x, beta)
        pm1 = phi_pow(x, beta - 1.0)
        return -b0 * (p * np.eye(d) + 2.0 * beta * pm1 * np.outer(x, x))

    def d2b(x):
        x = _as_point(x, d)
        eye = np.eye(d)
        pm1 = phi_pow(x, beta - 1.0)
        pm2 = phi_pow(x, beta - 2.0)
        out = np.zeros((d, d, d))
        for k in range(d):
            for l in range(d):
                for i in range(d):
                    sym = eye[i, k] * x[l] + eye[i, l] * x[k] + eye[k, l] * x[i]
                    out[k, l, i] = -b0 * (2.0 * beta * pm1 * sym
                                          + 4.0 * beta * (beta - 1.0) * pm2 * x[i] * x[k] * x[l])
        return out

    if family.coupling_kind == "exchange2":
        def C(x):
            x = _as_point(x, d)
            c, _, _ = _coupling_scalar(x)
            return c * _EXCHANGE2

        def dC(x):
            x = _as_point(x, d)
            _, dc, _ = _coupling_scalar(x)
            return dc[:, None, None] * _EXCHANGE2[None, :, :]

        def d2C(x):
            x = _as_point(x, d)
            _, _, d2c = _coupling_scalar(x)
            return d2c[:, :, None, None] * _EXCHANGE2[None, None, :, :]

    elif family.coupling_kind == "zeta3":
        # zeta_i(x) = i / (1 + |x|^2), a concrete smooth positive choice.
        pattern = _zeta3_matrix(1.0, 2.0, 3.0)

        def C(x):
            x = _as_point(x, d)
            c, _, _ = _coupling_scalar(x)
            return c * pattern

        def dC(x):
            x = _as_point(x, d)
            _, dc, _ = _coupling_scalar(x)
            return dc[:, None, None] * pattern[None, :, :]

        def d2C(x):
            x = _as_point(x, d)
            _, _, d2c = _coupling_scalar(x)
            return d2c[:, :, None, None] * pattern[None, None, :, :]

    else:
        def C(x):
            x = _as_point(x, d)
            return C0.copy()

        def dC(x):
            x = _as_point(x, d)
            return np.zeros((d, m, m))

        def d2C(x):
            x = _as_point(x, d)
            return np.zeros((d, d, m, m))

    return CoefficientField(dim_d=d, dim_m=m, Q=Q, b=b, C=C, smoothness_order=2,
                            dQ=dQ, jac_b=jac_b, dC=dC, d2Q=d2Q, d2b=d2b, d2C=d2C)


def evaluate(field: CoefficientField, x):
    """Evaluate (Q(x), b(x), C(x)) at a finite point."""
    x = _as_point(x, field.dim_d)
    return field.Q(x), field.b(x), field.C(x)


class DerivativeBundle:
    """Derivative evaluators plus the scalar quantities derived from them.

    Exposes r(x) (largest eigenvalue of the symmetrized drift Jacobian),
    mu_q(x) (smallest eigenvalue of Q), and the multi-index derivative
    magnitudes q1, q2, c1, c2 and b2 used in the curvature-type suprema.
    """

    def __init__(self, field: CoefficientField):
        if field.jac_b is None or field.dQ is None or field.dC is None:
            raise ValueError("field supplies no analytic first derivatives")
        self.field = field
        self.jac_b = field.jac_b
        self.dQ = field.dQ
        self.dC = field.dC
        self.d2Q = field.d2Q
        self.d2b = field.d2b
        self.d2C = field.d2C

    @property
    def has_second_order(self):
        return (self.field.smoothness_order >= 2 and self.d2Q is not None
                and self.d2b is not None and self.d2C is not None)

    def _require_second(self):
        if not self.has_second_order:
            raise ValueError("field smoothness_order < 2: second derivatives unavailable")

    def r(self, x):
        jb = self.jac_b(x)
        return float(np.max(np.linalg.eigvalsh(0.5 * (jb + jb.T))))

    def mu_q(self, x):
        return float(np.min(np.linalg.eigvalsh(self.field.Q(x))))

    def q1(self, x):
        return float(np.sqrt(np.sum(self.dQ(x) ** 2)))

    def c1(self, x):
        return float(np.sqrt(np.sum(self.dC(x) ** 2)))

    def q2(self, x):
        # sum over multi-indices |alpha| = 2: mixed pairs counted once
        self._require_second()
        d2 = self.d2Q(x)
        d = self.field.dim_d
        total = 0.0
        for k in range(d):
            for l in range(k, d):
                total += np.sum(d2[k, l] ** 2)
        return float(np.sqrt(total))

    def c2(self, x):
        self._require_second()
        d2 = self.d2C(x)
        d = self.field.dim_d
        total = 0.0
        for k in range(d):
            for l in range(k, d):
                total += np.sum(d2[k, l] ** 2)
        return float(np.sqrt(total))

    def b2(self, x):
        # ordered index pairs, matching sum_{i,j} |D_ij b|^2
        self._require_second()
        return float(np.sqrt(np.sum(self.d2b(x) ** 2)))


def derivative_bundle(field: CoefficientField) -> DerivativeBundle:
    """Return the analytic derivative bundle of a field."""
    return DerivativeBundle(field)


def finite_difference_jacobian(fn, x, h=1e-4):
    """Central-difference Jacobian of a vector/matrix-valued map, O(h^2)."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x))
    out = np.zeros((len(x),) + base.shape)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)
    return out
