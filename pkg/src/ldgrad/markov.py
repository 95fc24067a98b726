"""Finite-state Markov generators and their rate-functional building blocks.

A generator is a J x J intensity matrix Q with Q_ij >= 0 off the diagonal
and zero row sums; probability vectors live on the simplex.  This module
provides the invariant measure, detailed-balance diagnosis, the relative
entropy E_pi(rho) = sum_i rho_i log(rho_i / pi_i), the empirical-process
Hamiltonian

    H(rho, xi) = sum_ij rho_i Q_ij (exp(xi_j - xi_i) - 1)

with closed-form gradient and Hessian in xi, and its conjugate

    L(rho, s) = sup_xi <xi, s> - H(rho, xi),

the cost functional whose zero set is the forward equation rho' = Q^T rho.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import convex
from .errors import (BoundaryPoint, DegenerateInvariantMeasure,
                     ExponentOverflow, InfiniteEntropy, InvalidGenerator,
                     InvalidInput, ReducibleChain)

ROW_SUM_TOL = 1e-9
INTERIOR_FLOOR = 1e-12
EXP_GUARD = 700.0


@dataclass
class GeneratorMatrix:
    q: np.ndarray
    state_labels: list = field(default_factory=list)

    @property
    def size(self):
        return self.q.shape[0]

    @property
    def weakly_reversible(self):
        off = self.q > 0
        return bool(np.array_equal(off, off.T))

    @property
    def max_exit_rate(self):
        """gamma = max_i sum_{j != i} Q_ij."""
        return float(np.max(self.q.sum(axis=1) - np.diag(self.q)))


def validate_generator(raw, state_labels=None):
    """Check intensity-matrix structure and force exact zero row sums.

    Off-diagonal entries must be >= 0 and each row sum must vanish within
    1e-9; diagonals are then recomputed as minus the off-diagonal row sum.
    """
    q = np.asarray(raw, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise InvalidGenerator("generator must be a square matrix")
    J = q.shape[0]
    if J < 2:
        raise InvalidGenerator("need at least two states")
    if not np.all(np.isfinite(q)):
        raise InvalidGenerator("non-finite entries")
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0):
        raise InvalidGenerator("negative off-diagonal rate")
    row_dev = np.abs(q.sum(axis=1))
    if np.any(row_dev > ROW_SUM_TOL):
        raise InvalidGenerator(
            "row sums deviate from zero by up to %.3e" % row_dev.max())
    q = off
    np.fill_diagonal(q, -off.sum(axis=1))
    if state_labels is None:
        state_labels = [str(i + 1) for i in range(J)]
    if len(state_labels) != J:
        raise InvalidGenerator("label count does not match matrix size")
    return GeneratorMatrix(q=q, state_labels=list(state_labels))


def load_generator(path):
    """Read {"labels": [...], "Q": [[...]]} and validate."""
    with open(path) as fh:
        data = json.load(fh)
    if "Q" not in data:
        raise InvalidGenerator("generator file lacks a 'Q' entry")
    return validate_generator(data["Q"], data.get("labels"))


def save_generator(g, path):
    with open(path, "w") as fh:
        json.dump({"labels": g.state_labels, "Q": g.q.tolist()}, fh, indent=2)


def as_simplex(v, tol=1e-9):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v < -tol):
        raise InvalidInput("not a probability vector")
    if abs(v.sum() - 1.0) > tol:
        raise InvalidInput("entries must sum to one")
    return np.clip(v, 0.0, None) / np.clip(v, 0.0, None).sum()


def project_interior(rho, floor=1e-12):
    """Clip to a strictly positive floor and renormalize (explicit, never silent)."""
    rho = np.asarray(rho, dtype=float)
    out = np.clip(rho, floor, None)
    return out / out.sum()


def is_interior(rho, floor=INTERIOR_FLOOR):
    return bool(np.all(np.asarray(rho) >= floor))


@dataclass
class BalanceReport:
    invariant_measure: np.ndarray
    is_irreducible: bool
    detailed_balance: bool
    max_violation: float
    weakly_reversible: bool
    tol: float

    def to_dict(self):
        return {
            "invariant_measure": self.invariant_measure.tolist(),
            "is_irreducible": self.is_irreducible,
            "detailed_balance": self.detailed_balance,
            "max_violation": self.max_violation,
            "weakly_reversible": self.weakly_reversible,
            "tol": self.tol,
        }


def analyze_balance(g, tol=1e-9):
    """Invariant measure, irreducibility, and detailed-balance diagnosis.

    pi solves Q^T pi = 0 (dense solve with a normalization row); detailed
    balance holds when max_ij |pi_i Q_ij - pi_j Q_ji| <= tol relative to the
    largest flux pi_i Q_ij.
    """
    Q = g.q
    J = g.size
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    n_comp, _ = connected_components(csr_matrix(off > 0), directed=True,
                                     connection="strong")
    irreducible = n_comp == 1
    sv = np.linalg.svd(Q.T, compute_uv=False)
    nullity = J if sv[0] == 0 else int(np.sum(sv <= sv[0] * 1e-12))
    if nullity > 1:
        raise ReducibleChain(
            "null space of Q^T has dimension %d" % nullity)
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(J)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    if np.any(pi <= 1e-14):
        raise DegenerateInvariantMeasure(
            "invariant measure has a non-positive coordinate")
    pi = pi / pi.sum()
    flux = pi[:, None] * off
    max_violation = float(np.abs(flux - flux.T).max())
    scale = float(flux.max())
    db = max_violation <= tol * max(scale, 1e-300)
    return BalanceReport(invariant_measure=pi, is_irreducible=bool(irreducible),
                         detailed_balance=bool(db), max_violation=max_violation,
                         weakly_reversible=g.weakly_reversible, tol=tol)


def relative_entropy(rho, pi):
    """E_pi(rho) = sum rho_i log(rho_i/pi_i), with 0 log 0 := 0."""
    rho = np.asarray(rho, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if np.any((rho > 0) & (pi <= 0)):
        raise InfiniteEntropy("rho charges a state with zero reference mass")
    pos = rho > 0
    return float(np.sum(rho[pos] * np.log(rho[pos] / pi[pos])))


def relative_entropy_gradient(rho, pi):
    """Nodal gradient log(rho_i/pi_i) + 1, raw and as zero-sum representative."""
    rho = np.asarray(rho, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if not is_interior(rho):
        raise BoundaryPoint("entropy gradient requested at the simplex boundary")
    raw = np.log(rho / pi) + 1.0
    return raw, convex.project_zero_sum(raw)


def _exp_diff(xi):
    D = xi[None, :] - xi[:, None]
    if np.abs(D).max() > EXP_GUARD:
        raise ExponentOverflow("potential difference exceeds %g" % EXP_GUARD)
    return D


def hamiltonian(rho, xi, g):
    """H(rho, xi) = sum_ij rho_i Q_ij (e^{xi_j - xi_i} - 1)."""
    rho = np.asarray(rho, dtype=float)
    xi = np.asarray(xi, dtype=float)
    D = _exp_diff(xi)
    return float(np.sum(rho[:, None] * g.q * np.expm1(D)))


def hamiltonian_gradient(rho, xi, g):
    """d/dxi_k H = sum_i rho_i Q_ik e^{xi_k-xi_i} - rho_k sum_j Q_kj e^{xi_j-xi_k}."""
    rho = np.asarray(rho, dtype=float)
    xi = np.asarray(xi, dtype=float)
    D = _exp_diff(xi)
    M = rho[:, None] * g.q * np.exp(D)
    return M.sum(axis=0) - M.sum(axis=1)


def hamiltonian_hessian(rho, xi, g):
    rho = np.asarray(rho, dtype=float)
    xi = np.asarray(xi, dtype=float)
    D = _exp_diff(xi)
    M = rho[:, None] * g.q * np.exp(D)
    np.fill_diagonal(M, 0.0)
    H = -(M + M.T)
    np.fill_diagonal(H, M.sum(axis=0) + M.sum(axis=1))
    return H


def lagrangian(rho, s, g, tol=convex.DEFAULT_TOL, x0=None):
    """L(rho, s) = sup_xi <xi,s> - H(rho,xi) via Newton with exact Hessian.

    The value is clamped to zero only when it is within tol of zero; genuine
    negatives (which cannot occur for valid inputs) are left visible.
    """
    rho = np.asarray(rho, dtype=float)
    res = convex.conjugate(
        lambda xi: hamiltonian(rho, xi, g), s, x0=x0, tol=tol,
        grad=lambda xi: hamiltonian_gradient(rho, xi, g),
        hess=lambda xi: hamiltonian_hessian(rho, xi, g))
    if abs(res.value) <= tol:
        res.value = max(res.value, 0.0)
    return res


def drift(rho, g):
    """Forward-equation right-hand side Q^T rho; sums to zero exactly."""
    return g.q.T @ np.asarray(rho, dtype=float)
