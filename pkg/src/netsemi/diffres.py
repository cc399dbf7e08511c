"""Resolvent of the network diffusion operator sigma_j d^2/dx^2 with general coupling.

On every edge the resolvent equation lam u - sigma u'' = f has the
solution C1 exp(-mu x) + C2 exp(mu x) + U(x), mu = sqrt(lam / sigma).
The 2m constants follow from the boundary conditions

    u'(0) = K00 u(0) + K01 u(1),   u'(1) = K10 u(0) + K11 u(1).

Internally C2 exp(mu x) is carried as D2 exp(-mu (1 - x)), D2 = C2 exp(mu),
so every exponential has a nonpositive real exponent.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BranchCut, NearSpectrum, NoContraction, ValidationError
from .gridfn import (KernelExpansion, NetworkState, PLFunction, kernel_integral_U,
                     kernel_integral_closed_form)
from .netmodel import DiffusionCoupling

COND_LIMIT = 1e12

# the dual coupling is again a DiffusionCoupling
AdjointCoupling = DiffusionCoupling


def mu_from_lambda(lam, sigma=1.0):
    """Principal sqrt(lam / sigma), Re mu > 0."""
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real <= 0.0:
        raise BranchCut(f"lambda={lam} lies on (-inf, 0]")
    if np.ndim(sigma):
        return np.sqrt(lam / np.asarray(sigma, dtype=float) + 0j)
    return complex(np.sqrt(lam / float(sigma) + 0j))


@dataclass
class ResolventSolution:
    u: NetworkState
    c1: np.ndarray
    c2: np.ndarray
    mu: np.ndarray
    condition_estimate: float
    lam: complex
    d2: np.ndarray = None
    derivative: np.ndarray = None
    exact: KernelExpansion = None
    boundary_residual: float = 0.0
    interior_residual: float = float("nan")
    iterations: int = 0

    def reconstruct(self, x=None):
        """Re-evaluate the general solution C1 e^{-mu x} + D2 e^{-mu(1-x)} + particular."""
        return self.exact.evaluate(x)


def boundary_matrix(mu, dc):
    """2m x 2m matrix of the homogeneous boundary system in (C1, D2)."""
    e = np.exp(-mu)
    M = np.diag(mu)
    E = np.diag(e)
    I = np.eye(dc.m)
    # traces of C1 e^{-mu x} + D2 e^{-mu(1-x)}: u0 = [I, E], u1 = [E, I],
    # du0 = [-M, ME], du1 = [-ME, M]
    u0 = np.hstack([I, E])
    u1 = np.hstack([E, I])
    du0 = np.hstack([-M, M @ E])
    du1 = np.hstack([-M @ E, M])
    top = du0 - dc.k00 @ u0 - dc.k01 @ u1
    bot = du1 - dc.k10 @ u0 - dc.k11 @ u1
    return np.vstack([top, bot])


def _equilibrated(A):
    scale = np.max(np.abs(A), axis=1)
    scale[scale == 0] = 1.0
    return A / scale[:, None], scale


def _factor(A):
    As, scale = _equilibrated(A)
    with np.errstate(all="ignore"):
        try:
            cond = float(np.real(np.linalg.cond(As, 1)))
        except np.linalg.LinAlgError:
            cond = np.inf
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NearSpectrum(f"boundary system condition {cond:.3g} exceeds {COND_LIMIT:g}", cond)
    return scipy.linalg.lu_factor(As), scale, cond


def _bc_rhs(dc, p0, p1, dp0, dp1):
    """Right-hand side making the particular traces satisfy the coupling."""
    r0 = -(dp0 - dc.k00 @ p0 - dc.k01 @ p1)
    r1 = -(dp1 - dc.k10 @ p0 - dc.k11 @ p1)
    return np.concatenate([r0, r1])


def _homogeneous(x, mu, c1, d2):
    ex = np.exp(-mu[..., None] * x)
    ex1 = np.exp(-mu[..., None] * (1.0 - x))
    val = c1[..., None] * ex + d2[..., None] * ex1
    der = mu[..., None] * (-c1[..., None] * ex + d2[..., None] * ex1)
    return val, der


def _exp_particular(lam, dc, mu, g):
    """Particular solution for the kernel families of ``g`` (no PL part).

    exp(-b|x-c|) is mapped to exp(-b|x-c|)/(lam - sigma b^2) minus a
    mu-kernel that cancels the slope jump at c.
    """
    m, R, n1 = g.coefs.shape
    old = np.zeros_like(g.coefs)
    new = np.zeros((m, n1), dtype=complex)
    for j in range(m):
        for r in range(R):
            b = g.rates[j, r]
            a = g.coefs[j, r]
            if not np.any(a):
                continue
            den = lam - dc.sigma[j] * b * b
            if abs(den) <= 1e-10 * abs(lam):
                raise ValidationError("input kernel rate coincides with the resolvent rate")
            old[j, r] = a / den
            new[j] -= a * b / (mu[j] * den)
    part = KernelExpansion(g.grid, np.zeros_like(g.pl), g.rates, old, "symmetric")
    return part.add_terms(mu, new)


def solve_resolvent(lam, dc, f, check=True):
    """u = R(lam, A_Phi) f for a NetworkState or a symmetric KernelExpansion ``f``."""
    lam = complex(lam)
    mu = mu_from_lambda(lam, dc.sigma)
    if isinstance(f, KernelExpansion):
        g = f
        p = f.pl
    else:
        g = None
        p = np.asarray(f.values, dtype=complex)
    grid = f.grid
    x = grid.nodes
    if p.shape[0] != dc.m:
        raise ValidationError("state and coupling disagree on m")

    K = kernel_integral_U(mu, dc.sigma, p, x)
    pv, pd = K.values, K.derivative
    p0, p1, dp0, dp1 = K.u0, K.u1, K.du0, K.du1
    extra = None
    if g is not None and g.coefs.shape[1]:
        extra = _exp_particular(lam, dc, mu, g)
        e0, e1, ed0, ed1 = extra.end_traces()
        pv = pv + extra.evaluate()
        pd = None
        p0, p1, dp0, dp1 = p0 + e0, p1 + e1, dp0 + ed0, dp1 + ed1

    A = boundary_matrix(mu, dc)
    lu, scale, cond = _factor(A)
    z = scipy.linalg.lu_solve(lu, _bc_rhs(dc, p0, p1, dp0, dp1) / scale)
    c1, d2 = z[:dc.m], z[dc.m:]
    hv, hd = _homogeneous(x, mu, c1, d2)
    u = hv + pv
    du = hd + pd if pd is not None else None

    exact = _exact_form(lam, dc, mu, grid, p, c1, d2, extra)

    e = np.exp(-mu)
    u0 = c1 + e * d2 + p0
    u1 = e * c1 + d2 + p1
    du0 = mu * (-c1 + e * d2) + dp0
    du1 = mu * (-e * c1 + d2) + dp1
    bres = max(np.max(np.abs(du0 - dc.k00 @ u0 - dc.k01 @ u1)),
               np.max(np.abs(du1 - dc.k10 @ u0 - dc.k11 @ u1)))
    fnodal = g.evaluate() if g is not None else p
    ires = _interior_residual(lam, dc.sigma, x, u, fnodal)
    sol = ResolventSolution(
        u=NetworkState(grid, u), c1=c1, c2=d2 * e, d2=d2, mu=mu,
        condition_estimate=cond, lam=lam, derivative=du, exact=exact,
        boundary_residual=float(bres), interior_residual=ires)
    if check:
        fnorm = float(np.max(np.abs(fnodal)))
        if bres > 1e-9 * (1.0 + fnorm) * max(1.0, float(np.max(np.abs(mu)))):
            raise NearSpectrum(f"boundary residual {bres:.3g} too large", cond)
    return sol


def _exact_form(lam, dc, mu, grid, p, c1, d2, extra):
    x = grid.nodes
    pl = np.zeros_like(p)
    coefs = np.zeros_like(p)
    for j in range(dc.m):
        pl[j], coefs[j] = kernel_integral_closed_form(mu[j], dc.sigma[j], x, p[j])
    coefs[:, 0] += c1
    coefs[:, -1] += d2
    if extra is None:
        return KernelExpansion(grid, pl, mu[:, None], coefs[:, None, :], "symmetric")
    out = KernelExpansion(grid, pl, extra.rates, extra.coefs, "symmetric")
    return out.add_terms(mu, coefs)


def _interior_residual(lam, sigma, x, u, f):
    """max |lam u - sigma D_h u - f| at interior nodes (three-point second difference)."""
    if x.size < 3:
        return float("nan")
    h0 = x[1:-1] - x[:-2]
    h1 = x[2:] - x[1:-1]
    d2 = 2.0 * (u[:, 2:] / (h1 * (h0 + h1)) - u[:, 1:-1] / (h0 * h1)
                + u[:, :-2] / (h0 * (h0 + h1)))
    r = lam * u[:, 1:-1] - sigma[:, None] * d2 - f[:, 1:-1]
    return float(np.max(np.abs(r)))


def resolvent_matrix(lam, dc, grid):
    """Nodal matrix of R(lam, A_Phi) on PL inputs: column (j, k) is R applied to the hat at node k of edge j.

    Index order is edge-major: row/column ``j * (N+1) + k``.
    """
    lam = complex(lam)
    mu = mu_from_lambda(lam, dc.sigma)
    x = grid.nodes
    n1 = x.size
    m = dc.m
    B = m * n1
    F = np.zeros((B, m, n1))
    for j in range(m):
        F[j * n1 + np.arange(n1), j, np.arange(n1)] = 1.0
    K = kernel_integral_U(mu[None, :], dc.sigma[None, :], F, x)
    lu, scale, _ = _factor(boundary_matrix(mu, dc))
    rhs = np.stack([_bc_rhs(dc, K.u0[b], K.u1[b], K.du0[b], K.du1[b]) for b in range(B)], axis=1)
    z = scipy.linalg.lu_solve(lu, rhs / scale[:, None])
    c1, d2 = z[:m].T, z[m:].T
    hv, _ = _homogeneous(x, mu[None, :], c1, d2)
    U = hv + K.values
    return U.reshape(B, B).T


def adjoint_coupling(dc):
    """Dual coupling Phi*: blocks (K00^T, -K10^T; -K01^T, K11^T), conjugated by diag(sigma).

    The conjugation keeps the boundary form of Green's identity symmetric
    when the sigma_j differ; for equal sigma it is the plain transpose.
    """
    s = dc.sigma
    def conj(k):
        return (k.T * s[None, :]) / s[:, None]
    return AdjointCoupling(conj(dc.k00), -conj(dc.k10), -conj(dc.k01), conj(dc.k11), s.copy())


# ---------------------------------------------------------------------------
# closed-form scalar constants and the Greiner iteration

def _scaled_constants(mu, u0, u1, bc):
    """(C1, D2) for the scalar Dirichlet/Neumann problem, D2 = C2 e^{mu}."""
    e = np.exp(-mu)
    den = 1.0 - e * e
    if bc == "neumann":
        c1 = (u0 + u1 * e) / den
        d2 = (u1 + u0 * e) / den
    elif bc == "dirichlet":
        c1 = (u1 * e - u0) / den
        d2 = (u0 * e - u1) / den
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return c1, d2


def scalar_oracle(lam, sigma, f, bc="dirichlet"):
    """Scalar resolvent with Dirichlet or Neumann data from the closed-form constants."""
    mu = mu_from_lambda(lam, sigma)
    K = kernel_integral_U(mu, sigma, f)
    c1, d2 = _scaled_constants(mu, K.u0, K.u1, bc)
    x = f.grid.nodes
    u = c1 * np.exp(-mu * x) + d2 * np.exp(-mu * (1.0 - x)) + K.values
    return PLFunction(f.grid, u)


def scalar_oracle_derivative(lam, sigma, f, bc="dirichlet"):
    mu = mu_from_lambda(lam, sigma)
    K = kernel_integral_U(mu, sigma, f)
    c1, d2 = _scaled_constants(mu, K.u0, K.u1, bc)
    x = f.grid.nodes
    return mu * (-c1 * np.exp(-mu * x) + d2 * np.exp(-mu * (1.0 - x))) + K.derivative


def _kernel_lift(mu, y0, y1):
    """(C1, D2) of the kernel element w with w'(0) = y0, w'(1) = y1 (per edge)."""
    e = np.exp(-mu)
    # [-mu, mu e; -mu e, mu] (C1, D2) = (y0, y1)
    det = mu * mu * (e * e - 1.0)
    c1 = (mu * y0 - mu * e * y1) / det
    d2 = (mu * e * y0 - mu * y1) / det
    return c1, d2


def solve_resolvent_greiner(lam, dc, f, max_iter=200, tol=1e-14):
    """R(lam, A_Phi) f from the fixed point u = R(lam, A_N) f + L_lam Phi u.

    L_lam lifts boundary derivative data into ker(lam - A).  Only the end
    traces take part in the iteration; the converged traces fix the
    kernel element added to the Neumann solution.
    """
    lam = complex(lam)
    mu = mu_from_lambda(lam, dc.sigma)
    x = f.grid.nodes
    p = np.asarray(f.values, dtype=complex)
    K = kernel_integral_U(mu, dc.sigma, p, x)
    c1n, d2n = _scaled_constants(mu, K.u0, K.u1, "neumann")
    e = np.exp(-mu)
    base0 = c1n + e * d2n + K.u0
    base1 = e * c1n + d2n + K.u1

    def lift(b0, b1):
        y0 = dc.k00 @ b0 + dc.k01 @ b1
        y1 = dc.k10 @ b0 + dc.k11 @ b1
        return _kernel_lift(mu, y0, y1)

    b0, b1 = base0.copy(), base1.copy()
    c1w = np.zeros(dc.m, dtype=complex)
    d2w = np.zeros(dc.m, dtype=complex)
    prev = np.inf
    growth = 0
    it = 0
    scale = max(float(np.max(np.abs(np.concatenate([base0, base1])))), 1e-300)
    for it in range(1, max_iter + 1):
        c1w, d2w = lift(b0, b1)
        n0 = base0 + c1w + e * d2w
        n1 = base1 + e * c1w + d2w
        step = float(np.max(np.abs(np.concatenate([n0 - b0, n1 - b1]))))
        b0, b1 = n0, n1
        if step <= tol * scale:
            break
        growth = growth + 1 if step >= prev else 0
        if growth >= 3 or not np.isfinite(step) or step > 1e8 * scale:
            raise NoContraction(f"Greiner iteration diverges at lambda={lam}")
        prev = step
    else:
        raise NoContraction(f"Greiner iteration did not converge in {max_iter} steps")
    c1 = c1n + c1w
    d2 = d2n + d2w
    hv, hd = _homogeneous(x, mu, c1, d2)
    u = hv + K.values
    return ResolventSolution(
        u=NetworkState(f.grid, u), c1=c1, c2=d2 * e, d2=d2, mu=mu,
        condition_estimate=float("nan"), lam=lam, derivative=hd + K.derivative,
        iterations=it)
