"""Gradient structures induced by the Markov rate functional.

Given L(rho, s) = sup_xi <xi,s> - H(rho,xi), any covector field V yields the
split

    L(rho, s) = Psi(rho, s) + Psi*(rho, -V(rho)) + <V(rho), s>,
    Psi*(rho, xi) = H(rho, V(rho) + xi) - H(rho, V(rho)),

and both potentials are non-negative exactly when V is the critical covector
V_L(rho) = argmin_xi H(rho, .) = D_s L(rho, 0).  Under detailed balance
V_L = (1/2) D E_pi and Psi* takes the closed form

    Psi*(rho, xi) = sum_ij sqrt(rho_i rho_j pi_i / pi_j) Q_ij (e^{xi_j-xi_i} - 1).

Besides this exact structure, the module implements the two-parameter family

    Psi*(rho, xi) = sum_ij L_ij(rho) psi_ij(xi_j - xi_i),
    L_ij = pi_i Q_ij (r_j - r_i) / psi'_ij(log r_j - log r_i),   r = rho/pi,

whose quadratic member psi(z) = z^2/2 carries logarithmic-mean weights
(the discrete-transport metric) and whose cosh member psi(z) = cosh z - 1
carries harmonic-type weights.  The driving entropy normalization per member
is not hardcoded; `determine_entropy_scale` measures which multiple of E_pi
makes the induced flow match Q^T rho and the answer is recorded in reports.
"""

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import convex, markov
from .errors import (BoundaryPoint, NotGradientSystem, NotWeaklyReversible)

DIAG_TOL = 1e-6
LOG_RATIO_GUARD = 1e-8


class Family(enum.Enum):
    LDP_EXACT = "ldp"
    COSH_FAMILY = "cosh_family"
    QUADRATIC_FAMILY = "quadratic_family"


@dataclass
class GradientStructure:
    generator: markov.GeneratorMatrix
    family: Family
    entropy_scale: float
    balance: markov.BalanceReport
    scale_report: dict = field(default_factory=dict)

    @property
    def pi(self):
        return self.balance.invariant_measure

    def entropy(self, rho):
        return self.entropy_scale * markov.relative_entropy(rho, self.pi)

    def entropy_gradient(self, rho):
        raw, zs = markov.relative_entropy_gradient(rho, self.pi)
        return self.entropy_scale * raw, self.entropy_scale * zs


def build_structure(g, family=Family.LDP_EXACT, entropy_scale=None, seed=0):
    """Assemble (pi, S, dissipation family) for a generator.

    entropy_scale defaults to 1/2 for the exact structure; for family tags
    it is determined numerically when the chain is reversible (see
    `determine_entropy_scale`), since the family formula does not pin it.
    """
    if isinstance(family, str):
        family = Family(family)
    balance = markov.analyze_balance(g)
    if family is not Family.LDP_EXACT and not balance.weakly_reversible:
        raise NotWeaklyReversible(
            "family dissipation needs Q_ij > 0 iff Q_ji > 0")
    scale_report = {}
    if entropy_scale is None:
        if family is Family.LDP_EXACT:
            entropy_scale = 0.5
        elif balance.detailed_balance:
            entropy_scale, scale_report = determine_entropy_scale(
                g, family, seed=seed, balance=balance)
        else:
            entropy_scale = 0.5
    return GradientStructure(generator=g, family=family,
                             entropy_scale=float(entropy_scale),
                             balance=balance, scale_report=scale_report)


def critical_covector(rho, g, tol=convex.DEFAULT_TOL, x0=None):
    """V_L(rho) = argmin_xi H(rho, .), zero-sum representative.

    This is also D_s L(rho, 0); computed by Newton on the convex H.
    """
    rho = np.asarray(rho, dtype=float)
    if not markov.is_interior(rho):
        raise BoundaryPoint("critical covector needs interior rho")
    if x0 is None:
        # Half log-ratio is exact under detailed balance; a good start always.
        balance_guess = 0.5 * np.log(rho / np.abs(rho).sum() * rho.size)
        x0 = convex.project_zero_sum(balance_guess)
    res = convex.conjugate(
        lambda xi: markov.hamiltonian(rho, xi, g),
        np.zeros(rho.size), x0=x0, tol=tol,
        grad=lambda xi: markov.hamiltonian_gradient(rho, xi, g),
        hess=lambda xi: markov.hamiltonian_hessian(rho, xi, g))
    return res.argmax


def shifted_dual(rho, V, xi, g):
    """Psi*_{L,V}(rho, xi) = H(rho, V + xi) - H(rho, V) for any covector V."""
    rho = np.asarray(rho, dtype=float)
    V = np.asarray(V, dtype=float)
    return markov.hamiltonian(rho, V + xi, g) - markov.hamiltonian(rho, V, g)


def _ldp_weights(rho, pi, Q):
    W = np.sqrt(np.outer(rho, rho) * np.outer(pi, 1.0 / pi)) * Q
    np.fill_diagonal(W, 0.0)
    return W


def _family_weights(rho, pi, Q, family):
    """Edge weights L_ij of the dissipation family; L_jj = 0.

    At r_j = r_i the formula has a removable singularity with continuity
    value pi_i Q_ij r_i / psi''(0) = rho_i Q_ij; the quadratic member uses a
    guard band on |log r_j - log r_i|, the cosh member has the globally
    regular closed form 2 r_i r_j / (r_i + r_j).
    """
    r = rho / pi
    L = np.zeros_like(Q)
    ii, jj = np.nonzero((Q > 0) & ~np.eye(len(rho), dtype=bool))
    ri, rj = r[ii], r[jj]
    base = pi[ii] * Q[ii, jj]
    if family is Family.QUADRATIC_FAMILY:
        d = np.log(rj) - np.log(ri)
        lam = np.where(np.abs(d) < LOG_RATIO_GUARD,
                       0.5 * (ri + rj),
                       (rj - ri) / np.where(np.abs(d) < LOG_RATIO_GUARD, 1.0, d))
        L[ii, jj] = base * lam
    elif family is Family.COSH_FAMILY:
        L[ii, jj] = base * 2.0 * ri * rj / (ri + rj)
    else:
        raise ValueError("not a family tag: %r" % (family,))
    return L


def _psi_scalar(family):
    if family is Family.QUADRATIC_FAMILY:
        return (lambda z: 0.5 * z * z), (lambda z: z), (lambda z: np.ones_like(z))
    return (lambda z: np.cosh(z) - 1.0), np.sinh, np.cosh


def psi_star(gs, rho, xi):
    """Dual dissipation potential of the structure at (rho, xi)."""
    rho = np.asarray(rho, dtype=float)
    xi = np.asarray(xi, dtype=float)
    Q = gs.generator.q
    D = xi[None, :] - xi[:, None]
    if gs.family is Family.LDP_EXACT:
        W = _ldp_weights(rho, gs.pi, Q)
        return float(np.sum(W * np.expm1(D)))
    L = _family_weights(rho, gs.pi, Q, gs.family)
    p, _, _ = _psi_scalar(gs.family)
    return float(np.sum(L * p(D)))


def _psi_star_derivatives(gs, rho):
    """Closures (f, grad, hess) of xi -> Psi*(rho, xi) for conjugation."""
    Q = gs.generator.q
    if gs.family is Family.LDP_EXACT:
        W = _ldp_weights(rho, gs.pi, Q)

        def f(xi):
            return float(np.sum(W * np.expm1(xi[None, :] - xi[:, None])))

        def grad(xi):
            M = W * np.exp(xi[None, :] - xi[:, None])
            return M.sum(axis=0) - M.sum(axis=1)

        def hess(xi):
            M = W * np.exp(xi[None, :] - xi[:, None])  # zero diagonal via W
            H = -(M + M.T)
            np.fill_diagonal(H, M.sum(axis=0) + M.sum(axis=1))
            return H
    else:
        L = _family_weights(rho, gs.pi, Q, gs.family)
        p, dp, ddp = _psi_scalar(gs.family)

        def f(xi):
            return float(np.sum(L * p(xi[None, :] - xi[:, None])))

        def grad(xi):
            M = L * dp(xi[None, :] - xi[:, None])
            return M.sum(axis=0) - M.sum(axis=1)

        def hess(xi):
            M = L * ddp(xi[None, :] - xi[:, None])
            np.fill_diagonal(M, 0.0)
            H = -(M + M.T)
            np.fill_diagonal(H, M.sum(axis=0) + M.sum(axis=1))
            return H
    return f, grad, hess


def psi(gs, rho, s, check=True, tol=convex.DEFAULT_TOL):
    """Primal dissipation potential at (rho, s).

    The exact structure uses Psi = L(rho,s) - L(rho,0) - <V_L, s>; for family
    tags Psi is the numerical conjugate of Psi*.  With `check` (exact
    structure under detailed balance only) both routes are computed and must
    agree within 1e-7.
    """
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    g = gs.generator
    if gs.family is Family.LDP_EXACT:
        V = critical_covector(rho, g)
        HV = markov.hamiltonian(rho, V, g)
        lag = markov.lagrangian(rho, s, g)
        value = lag.value + HV - float(V @ s)
        if check and gs.balance.detailed_balance:
            f, grad, hess = _psi_star_derivatives(gs, rho)
            dual = convex.conjugate(f, s, tol=tol, grad=grad, hess=hess)
            if abs(dual.value - value) > 1e-7:
                raise NoCrossCheck(value, dual.value)
        return float(value)
    f, grad, hess = _psi_star_derivatives(gs, rho)
    return float(convex.conjugate(f, s, tol=tol, grad=grad, hess=hess).value)


class NoCrossCheck(AssertionError):
    def __init__(self, direct, dual):
        super().__init__(
            "psi routes disagree: direct %.12e vs conjugate %.12e"
            % (direct, dual))
        self.direct = direct
        self.dual = dual


def decompose(gs, rho, s):
    """Split L(rho,s) into Psi + Psi*(-V) + <V,s> with V the critical covector.

    Each component is computed by an independent optimization so the residual
    measures real numerical consistency; |residual| <= 1e-7 holds for every
    irreducible chain, detailed balance or not.  Output is labelled a
    gradient system only under detailed balance (the covector field is then
    conservative and equals the entropy gradient).
    """
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    g = gs.generator
    V = critical_covector(rho, g)
    HV = markov.hamiltonian(rho, V, g)
    lag = markov.lagrangian(rho, s, g)
    psi_star_at_minus_v = -HV

    def f_shift(xi):
        return markov.hamiltonian(rho, V + xi, g) - HV

    dual = convex.conjugate(
        f_shift, s,
        grad=lambda xi: markov.hamiltonian_gradient(rho, V + xi, g),
        hess=lambda xi: markov.hamiltonian_hessian(rho, V + xi, g))
    pairing = float(V @ s)
    residual = lag.value - (dual.value + psi_star_at_minus_v + pairing)
    return {
        "lagrangian": lag.value,
        "psi": dual.value,
        "psi_star": psi_star_at_minus_v,
        "pairing": pairing,
        "residual": float(residual),
        "system_label": ("gradient system" if gs.balance.detailed_balance
                         else "covector system"),
    }


def flow_field(gs, rho):
    """Evolution right-hand side D_xi Psi*(rho, -DS(rho)), closed form.

    Requires detailed balance (gradient reading) and interior rho; the
    output sums to zero.
    """
    rho = np.asarray(rho, dtype=float)
    if not gs.balance.detailed_balance:
        raise NotGradientSystem("flow field needs detailed balance")
    if np.any(rho < 1e-300):
        raise BoundaryPoint("flow field needs interior rho")
    xi = -gs.entropy_scale * (np.log(rho / gs.pi) + 1.0)
    D = xi[None, :] - xi[:, None]
    Q = gs.generator.q
    if gs.family is Family.LDP_EXACT:
        M = _ldp_weights(rho, gs.pi, Q) * np.exp(D)
    else:
        _, dp, _ = _psi_scalar(gs.family)
        M = _family_weights(rho, gs.pi, Q, gs.family) * dp(D)
    return M.sum(axis=0) - M.sum(axis=1)


def determine_entropy_scale(g, family, seed=0, samples=20,
                            candidates=(0.5, 1.0), balance=None):
    """Find which multiple of E_pi makes the family flow match Q^T rho.

    Returns (best_scale, report); the report carries the flow residual of
    every candidate so a family member that matches no candidate is visible
    rather than silently normalized.
    """
    if isinstance(family, str):
        family = Family(family)
    balance = balance or markov.analyze_balance(g)
    rng = np.random.default_rng(seed)
    J = g.size
    rhos = []
    for _ in range(samples):
        r = rng.dirichlet(np.ones(J))
        rhos.append(markov.project_interior(r, 1e-6))
    residuals = {}
    for c in candidates:
        gs = GradientStructure(generator=g, family=family, entropy_scale=c,
                               balance=balance)
        worst = 0.0
        for rho in rhos:
            gap = np.abs(flow_field(gs, rho) - markov.drift(rho, g)).max()
            worst = max(worst, float(gap))
        residuals[c] = worst
    best = min(candidates, key=lambda c: residuals[c])
    report = {
        "family": family.value,
        "candidates": {str(c): residuals[c] for c in candidates},
        "selected_scale": best,
        "selected_residual": residuals[best],
        "reproduces_drift": residuals[best] <= 1e-8,
        "samples": samples,
        "seed": seed,
    }
    return best, report


def cosh_vs_ldp_report(g, samples=50, seed=0):
    """Pointwise comparison of the cosh family member against the exact
    dual potential on random interior (rho, xi); the maximum discrepancy is
    reported as a finding, never reconciled."""
    balance = markov.analyze_balance(g)
    gs_c = GradientStructure(generator=g, family=Family.COSH_FAMILY,
                             entropy_scale=0.5, balance=balance)
    gs_l = GradientStructure(generator=g, family=Family.LDP_EXACT,
                             entropy_scale=0.5, balance=balance)
    rng = np.random.default_rng(seed)
    J = g.size
    worst = 0.0
    worst_at = None
    for _ in range(samples):
        rho = markov.project_interior(rng.dirichlet(np.ones(J)), 1e-6)
        xi = convex.project_zero_sum(rng.standard_normal(J))
        gap = abs(psi_star(gs_c, rho, xi) - psi_star(gs_l, rho, xi))
        if gap > worst:
            worst, worst_at = float(gap), (rho.tolist(), xi.tolist())
    return {
        "max_abs_discrepancy": worst,
        "coincide_within_1e-7": worst <= 1e-7,
        "worst_sample": worst_at,
        "samples": samples,
        "seed": seed,
    }


@dataclass
class StructureDiagnostics:
    decomposition_residual_max: float
    psi_star_symmetry_defect: float
    time_symmetry_defect_max: float
    integrability_defect: float
    critical_covector_is_half_entropy_gradient: bool
    detailed_balance: bool
    tol: float
    seed: int
    sample_count: int
    worst_cases: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "decomposition_residual_max": self.decomposition_residual_max,
            "psi_star_symmetry_defect": self.psi_star_symmetry_defect,
            "time_symmetry_defect_max": self.time_symmetry_defect_max,
            "integrability_defect": self.integrability_defect,
            "critical_covector_is_half_entropy_gradient":
                self.critical_covector_is_half_entropy_gradient,
            "detailed_balance": self.detailed_balance,
            "tol": self.tol,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "worst_cases": self.worst_cases,
            "extras": self.extras,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, **kw)


def _loop_integral_midpoint(vertices, field, segments):
    """Midpoint-rule line integral of a covector field around the closed
    piecewise-linear loop through `vertices` (each edge split into
    `segments` pieces)."""
    total = 0.0
    n = len(vertices)
    for e in range(n):
        a = vertices[e]
        b = vertices[(e + 1) % n]
        d = (b - a) / segments
        x0 = None
        for k in range(segments):
            mid = a + (k + 0.5) * d
            v = field(mid, x0)
            x0 = v
            total += float(v @ d)
    return total


def diagnostics(g, sample_count, seed, tol=DIAG_TOL, segments=100):
    """Numerical verdict on the structure of a chain.

    Over seeded random interior rho and zero-sum s, xi:
      * time_symmetry_defect_max = max |L(rho,s) - L(rho,-s) - 2 <V_L, s>|
      * psi_star_symmetry_defect = max |H(rho, V_L - xi) - H(rho, V_L + xi)|
      * integrability_defect     = max |loop integral of V_L| over random
        triangles (midpoint rule per edge at `segments` and 2 x `segments`
        resolutions, Richardson-extrapolated)
      * critical_covector_is_half_entropy_gradient compares V_L against
        (1/2) the zero-sum entropy gradient.
    All defects vanish together exactly when detailed balance holds; they
    are always reported numerically, never only as booleans.
    """
    if sample_count < 1:
        raise markov.InvalidInput("sample_count must be >= 1")
    balance = markov.analyze_balance(g)
    if not balance.is_irreducible:
        raise markov.ReducibleChain("diagnostics need an irreducible chain")
    J = g.size
    pi = balance.invariant_measure

    ts_max = sym_max = cc_max = dec_max = 0.0
    worst = {}
    for i in range(sample_count):
        rng = np.random.default_rng([seed, i])
        rho = markov.project_interior(rng.dirichlet(np.ones(J)), 1e-6)
        s = convex.project_zero_sum(rng.standard_normal(J))
        xi = convex.project_zero_sum(rng.standard_normal(J))
        V = critical_covector(rho, g)

        Lf = markov.lagrangian(rho, s, g).value
        Lb = markov.lagrangian(rho, -s, g).value
        ts = abs(Lf - Lb - 2.0 * float(V @ s))
        if ts > ts_max:
            ts_max = ts
            worst["time_symmetry"] = {"sample": i, "defect": ts}

        sym = abs(markov.hamiltonian(rho, V - xi, g)
                  - markov.hamiltonian(rho, V + xi, g))
        if sym > sym_max:
            sym_max = sym
            worst["psi_star_symmetry"] = {"sample": i, "defect": sym}

        _, half_grad = markov.relative_entropy_gradient(rho, pi)
        cc = float(np.abs(V - 0.5 * half_grad).max())
        if cc > cc_max:
            cc_max = cc
            worst["critical_covector"] = {"sample": i, "defect": cc}

        gs = GradientStructure(generator=g, family=Family.LDP_EXACT,
                               entropy_scale=0.5, balance=balance)
        dec = abs(decompose(gs, rho, s)["residual"])
        if dec > dec_max:
            dec_max = dec
            worst["decomposition"] = {"sample": i, "defect": dec}

    def v_field(rho, x0):
        return critical_covector(rho, g, x0=x0)

    n_tri = max(2, sample_count // 10)
    triangles = []
    if J == 3:
        triangles.append(np.array([[0.5, 0.3, 0.2],
                                   [0.2, 0.5, 0.3],
                                   [0.3, 0.2, 0.5]]))
    for t in range(n_tri):
        rng = np.random.default_rng([seed, 10_000 + t])
        verts = np.stack([
            0.7 * markov.project_interior(rng.dirichlet(np.ones(J)), 1e-6)
            + 0.3 / J for _ in range(3)])
        triangles.append(verts)
    integ_max = 0.0
    loops = []
    for verts in triangles:
        i1 = _loop_integral_midpoint(verts, v_field, segments)
        i2 = _loop_integral_midpoint(verts, v_field, 2 * segments)
        rich = (4.0 * i2 - i1) / 3.0
        loops.append({"midpoint_coarse": i1, "midpoint_fine": i2,
                      "richardson": rich})
        if abs(rich) > integ_max:
            integ_max = abs(rich)
            worst["integrability"] = {"vertices": verts.tolist(),
                                      "defect": abs(rich)}

    return StructureDiagnostics(
        decomposition_residual_max=float(dec_max),
        psi_star_symmetry_defect=float(sym_max),
        time_symmetry_defect_max=float(ts_max),
        integrability_defect=float(integ_max),
        critical_covector_is_half_entropy_gradient=bool(cc_max <= tol),
        detailed_balance=balance.detailed_balance,
        tol=tol,
        seed=seed,
        sample_count=sample_count,
        worst_cases=worst,
        extras={"critical_covector_gap_max": float(cc_max),
                "loop_integrals": loops,
                "segments_per_edge": [segments, 2 * segments],
                "quadrature": "midpoint + Richardson"},
    )
