"""Resolvent of the network transport operator -c_j d/dx with u(0) = K u(1).

Integrating lam u + c u' = f along each edge,

    u(x) = E_lam(x) v + C^-1 int_0^x E_lam(x - s) f(s) ds,

and the inflow vector v solves (I - K E_lam(1)) v = K C^-1 int_0^1 E_lam(1 - s) f(s) ds.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NearSpectrum, SeriesDiverges, ValidationError
from .gridfn import KernelExpansion, NetworkState, causal_sweep

COND_LIMIT = 1e12
SERIES_MAX_TERMS = 100_000


def e_lambda(lam, s, c):
    """diag(exp(-(lam / c_j) s))."""
    c = np.asarray(c, dtype=float)
    return np.diag(np.exp(-(complex(lam) / c) * s))


def condition_estimate(A, KE):
    """(1 + |KE|_1) |A^-1|_1: scale-aware, so a 1x1 system near a root is caught."""
    with np.errstate(all="ignore"):
        try:
            inv = np.linalg.inv(A)
        except np.linalg.LinAlgError:
            return np.inf
        c = (1.0 + np.linalg.norm(KE, 1)) * np.linalg.norm(inv, 1)
    return float(c) if np.isfinite(c) else np.inf


@dataclass
class TransportResolvent:
    u: NetworkState
    v: np.ndarray
    lam: complex
    method: str
    condition_estimate: float = float("nan")
    terms: int = 0
    exact: KernelExpansion = None
    inflow_integral: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


def _exp_particular(lam, tc, rho, g):
    """Particular solutions, vanishing at x=0, for the causal kernel families of ``g``."""
    m, R, n1 = g.coefs.shape
    old = np.zeros_like(g.coefs)
    new = np.zeros((m, n1), dtype=complex)
    for j in range(m):
        for r in range(R):
            a = g.coefs[j, r]
            if not np.any(a):
                continue
            b = g.rates[j, r]
            den = lam - tc.c[j] * b
            if abs(den) <= 1e-10 * abs(lam):
                raise ValidationError("input kernel rate coincides with the resolvent rate")
            old[j, r] = a / den
            new[j] -= a * (1.0 / den - 1.0 / lam)
    part = KernelExpansion(g.grid, np.zeros_like(g.pl), g.rates, old, "causal")
    return part.add_terms(rho, new)


def _closed_form_pl(lam, c, x, p):
    """C^-1 int_0^x E(x-s) p(s) ds for PL p, as PL part + causal kernels at the kinks."""
    slope = np.diff(p) / np.diff(x)
    p0 = p[0] / lam - c / lam ** 2 * slope[0]
    pl = (p - p[0]) / lam
    coef = np.zeros(p.shape, dtype=complex)
    coef[1:-1] = c * (slope[1:] - slope[:-1]) / lam ** 2
    coef[0] = -p0
    return pl, coef


def solve_resolvent_transport(lam, tc, f, method="direct"):
    """u = R(lam, A_K) f.  ``method`` is 'direct' (LU) or 'neumann' (series for v)."""
    lam = complex(lam)
    if isinstance(f, KernelExpansion):
        g, p = f, f.pl
    else:
        g, p = None, np.asarray(f.values, dtype=complex)
    grid = f.grid
    x = grid.nodes
    if p.shape[0] != tc.m:
        raise ValidationError("state and coupling disagree on m")
    c = tc.c
    rho = lam / c
    Q = causal_sweep(rho, x, p) / c[:, None]
    extra = None
    if g is not None and g.coefs.shape[1]:
        extra = _exp_particular(lam, tc, rho, g)
        Q = Q + extra.evaluate()
    q1 = Q[:, -1]
    E1 = np.exp(-rho)
    KE = tc.k * E1[None, :]
    rhs = tc.k @ q1
    A = np.eye(tc.m) - KE
    cond = float("nan")
    terms = 0
    if method == "direct":
        cond = condition_estimate(A, KE)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise NearSpectrum(f"I - K E(1) condition {cond:.3g} exceeds {COND_LIMIT:g}", cond)
        v = scipy.linalg.lu_solve(scipy.linalg.lu_factor(A), rhs)
    elif method == "neumann":
        nrm = float(np.linalg.norm(KE, 2))
        if nrm >= 1.0:
            raise SeriesDiverges(f"|K E(1)| = {nrm:.6g} >= 1")
        term = rhs.copy()
        v = term.copy()
        for terms in range(1, SERIES_MAX_TERMS):
            term = KE @ term
            v = v + term
            if np.max(np.abs(term)) <= 1e-17 * max(np.max(np.abs(v)), 1e-300):
                break
        else:
            raise SeriesDiverges("Neumann series did not settle")
    else:
        raise ValueError(f"unknown method {method!r}")

    u = np.exp(-rho[:, None] * x) * v[:, None] + Q

    pl = np.zeros_like(p)
    coef = np.zeros_like(p)
    for j in range(tc.m):
        pl[j], coef[j] = _closed_form_pl(lam, c[j], x, p[j])
    pl = pl + v[:, None]
    coef[:, 0] += v
    if extra is None:
        exact = KernelExpansion(grid, pl, rho[:, None], coef[:, None, :], "causal")
    else:
        exact = KernelExpansion(grid, pl, extra.rates, extra.coefs, "causal").add_terms(rho, coef)

    fn = g.evaluate() if g is not None else p
    bres = float(np.max(np.abs(u[:, 0] - tc.k @ u[:, -1])))
    d = np.gradient(u, x, axis=1)
    ires = float(np.max(np.abs(lam * u + c[:, None] * d - fn)))
    return TransportResolvent(
        u=NetworkState(grid, u), v=v, lam=lam, method=method, condition_estimate=cond,
        terms=terms, exact=exact, inflow_integral=q1 * c,
        diagnostics={"boundary_residual": bres, "interior_residual": ires})


def column_sum_identity_check(lam, tc, f):
    """|sum v - (sum kappa e^{-lam/c} v + sum kappa/c int e^{lam(s-1)/c} f)| for one solve."""
    lam = float(lam)
    if lam <= 0:
        raise ValidationError("column-sum identity needs real lam > 0")
    sol = solve_resolvent_transport(lam, tc, f)
    kappa = tc.k.sum(axis=0)
    c = tc.c
    integral = sol.inflow_integral
    lhs = np.sum(sol.v)
    rhs = np.sum(kappa * np.exp(-lam / c) * sol.v) + np.sum(kappa / c * integral)
    return float(abs(lhs - rhs))
