"""Numerical convex duality on the zero-sum subspace.

Potentials on a finite state space are defined modulo additive constants, so
every conjugate here is taken over vectors summing to zero.  The transform

    f*(s) = sup_xi  <xi, s> - f(xi)

is computed by damped Newton over J-1 free coordinates (the last coordinate
is determined by the zero-sum constraint), with a deterministic multistart /
coarse-grid fallback when Newton stalls.  An explicit box |xi|_inf <= 50
converts genuinely unbounded problems into a clean error.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NoConvergence, UnboundedConjugate

DEFAULT_TOL = 1e-10
MAX_ITER = 200
ARMIJO_FACTOR = 0.5
ARMIJO_SLOPE = 1e-4
BOX = 50.0


def project_zero_sum(v):
    """Canonical representative of v modulo constants: v - mean(v)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInput("non-finite entries in vector")
    return v - v.mean()


def finite_diff_gradient(f, x, h):
    """Central-difference gradient of a scalar function, O(h^2) for C^3 f."""
    if h <= 0:
        raise InvalidInput("step h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise InvalidInput("function not finite at stencil point")
        g[i] = (fp - fm) / (2.0 * h)
    return g


@dataclass
class ConjugateResult:
    value: float
    argmax: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float


def _fd_grad_factory(f):
    def grad(x):
        h = 1e-6 * (1.0 + np.abs(x).max())
        return finite_diff_gradient(f, x, h)

    return grad


def _fd_hess_factory(grad):
    def hess(x):
        h = 1e-6 * (1.0 + np.abs(x).max())
        n = x.size
        H = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            H[:, i] = (grad(x + e) - grad(x - e)) / (2.0 * h)
        return 0.5 * (H + H.T)

    return hess


def _reduce_hessian(H):
    # T = [I; -1^T] parametrizes xi = (u, -sum u); returns T^T H T
    m = H.shape[0] - 1
    return H[:m, :m] - H[:m, -1:] - H[-1:, :m] + H[-1, -1]


def _full(u):
    return np.append(u, -u.sum())


def _newton(f, grad, hess, s, u0, tol, max_iter):
    """Damped Newton ascent of <xi,s> - f(xi) over the reduced coordinates.

    Returns (u, converged, iterations, residual, hit_box).
    """
    u = u0.copy()
    best = (np.inf, u)
    for it in range(max_iter):
        xi = _full(u)
        if np.abs(xi).max() >= BOX:
            return u, False, it, np.inf, True
        gf = grad(xi) - s
        resid = np.linalg.norm(project_zero_sum(gf))
        if resid < best[0]:
            best = (resid, u.copy())
        if resid <= tol:
            return u, True, it, resid, False
        g_red = gf[:-1] - gf[-1]
        H_red = _reduce_hessian(hess(xi))
        try:
            d = np.linalg.solve(H_red, -g_red)
        except np.linalg.LinAlgError:
            d = None
        if d is None or g_red @ d >= 0:
            # Hessian unusable; fall back to a plain ascent direction.
            d = -g_red
        elif resid <= 1e-6:
            # Endgame: objective differences are below rounding, so Armijo
            # cannot certify descent; pure Newton converges quadratically.
            u_try = u + d
            if np.abs(_full(u_try)).max() <= BOX:
                u = u_try
                continue
        phi0 = f(xi) - xi @ s
        slope = g_red @ d
        alpha = 1.0
        accepted = False
        while alpha > 1e-14:
            u_try = u + alpha * d
            xi_try = _full(u_try)
            if np.abs(xi_try).max() > BOX:
                alpha *= ARMIJO_FACTOR
                continue
            phi_try = f(xi_try) - xi_try @ s
            if np.isfinite(phi_try) and phi_try <= phi0 + ARMIJO_SLOPE * alpha * slope:
                accepted = True
                break
            alpha *= ARMIJO_FACTOR
        if not accepted:
            # Stalled: either pressed against the box or genuinely stuck.
            hit = np.abs(_full(u)).max() >= 0.98 * BOX
            return best[1], False, it, best[0], hit
        u = u_try
    return best[1], False, max_iter, best[0], False


def _fallback_starts(s, m):
    """Deterministic multistart points in reduced coordinates."""
    starts = [np.zeros(m)]
    sz = project_zero_sum(s)
    for scale in (0.5, 2.0, -1.0):
        starts.append(scale * sz[:m] if m < s.size else scale * sz)
    rng = np.random.default_rng(12345)
    for _ in range(4):
        starts.append(rng.uniform(-2.0, 2.0, m))
    if m <= 2:
        # Coarse tensor grid, then the best point seeds a polish below.
        axes = [np.arange(-5.0, 5.0 + 1e-9, 0.5)] * m
        mesh = np.meshgrid(*axes, indexing="ij")
        starts.extend(np.stack([g.ravel() for g in mesh], axis=-1))
    return starts


def conjugate(f, s, x0=None, tol=DEFAULT_TOL, grad=None, hess=None,
              max_iter=MAX_ITER):
    """Legendre transform sup_xi <xi,s> - f(xi) over zero-sum xi.

    f must be convex and finite on the zero-sum subspace; grad/hess are
    optional closed forms (finite differences are used when absent).
    Raises UnboundedConjugate when the objective is still ascending at the
    box boundary and NoConvergence (with the best iterate attached) when the
    iteration budget is exhausted.
    """
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InvalidInput("non-finite slope vector")
    if abs(s.sum()) > 1e-9 * max(1.0, np.abs(s).max()):
        raise InvalidInput("slope must lie in the zero-sum tangent space")
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    J = s.size
    if grad is None:
        grad = _fd_grad_factory(f)
    if hess is None:
        hess = _fd_hess_factory(grad)

    m = J - 1
    if x0 is None:
        u0 = np.zeros(m)
    else:
        u0 = project_zero_sum(np.asarray(x0, dtype=float))[:m].copy()

    u, ok, its, resid, hit_box = _newton(f, grad, hess, s, u0, tol, max_iter)
    total_its = its
    if not ok:
        if hit_box:
            raise UnboundedConjugate(
                "objective still increasing at the box |xi|_inf = %g" % BOX)
        # Multistart / coarse-grid fallback, then Newton polish.
        best_u, best_phi = u, f(_full(u)) - _full(u) @ s
        for start in _fallback_starts(s, m):
            phi = f(_full(start)) - _full(start) @ s
            if np.isfinite(phi) and phi < best_phi:
                best_phi, best_u = phi, np.asarray(start, dtype=float)
        u, ok, its, resid, hit_box = _newton(f, grad, hess, s, best_u, tol,
                                             max_iter)
        total_its += its
        if hit_box:
            raise UnboundedConjugate(
                "objective still increasing at the box |xi|_inf = %g" % BOX)

    xi = _full(u)
    value = float(xi @ s - f(xi))
    result = ConjugateResult(value=value, argmax=xi, converged=bool(ok),
                             iterations=total_its, residual_norm=float(resid))
    if not ok:
        raise NoConvergence(
            "no convergence after %d iterations (residual %.3e)"
            % (total_its, resid), best=result)
    return result
