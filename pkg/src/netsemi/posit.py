"""Positivity criteria for both models and explicit counterexamples.

Diffusion: the semigroup is positive iff -K00, K11 have nonnegative
off-diagonal entries and -K01, K10 are entrywise nonnegative.  When this
fails we build a nonnegative u in the domain with u = 0 and u'' < 0 at
an endpoint, which breaks the positive minimum principle.

Transport: positive iff K >= 0.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import NotViolating
from .gridfn import Grid, NetworkState, PiecewiseLinear

BLOCKS = ("00", "01", "10", "11")
DELTA_MIN = 2.0 ** -60


@dataclass
class Violation:
    block: str
    i: int
    j: int
    value: float
    required: str  # ">= 0" or "<= 0"

    def as_dict(self):
        return {"block": self.block, "i": self.i, "j": self.j,
                "value": self.value, "required": self.required}


@dataclass
class PositivityVerdict:
    positive: bool
    violations: list = field(default_factory=list)


def check_diffusion_positivity(dc):
    """Row-major scan over blocks 00, 01, 10, 11 of the sign pattern."""
    out = []
    for name in BLOCKS:
        r, s = int(name[0]), int(name[1])
        k = dc.blocks()[name]
        sign = -1.0 if r == 0 else 1.0
        for i in range(dc.m):
            for j in range(dc.m):
                if r == s and i == j:
                    continue
                if sign * k[i, j] < 0:
                    out.append(Violation(name, i, j, float(k[i, j]),
                                         "<= 0" if r == 0 else ">= 0"))
    return PositivityVerdict(not out, out)


def check_transport_positivity(tc):
    out = [Violation("K", int(i), int(j), float(tc.k[i, j]), ">= 0")
           for i, j in zip(*np.nonzero(tc.k < 0))]
    return PositivityVerdict(not out, out)


# ---------------------------------------------------------------------------
# smooth plateau bump

def bump(x, a):
    """phi and its first two derivatives in x: 1 on |x| <= a, 0 on |x| >= 2a, C-infinity."""
    x = np.asarray(x, dtype=float)
    sgn = np.where(x < 0, -1.0, 1.0)
    x = np.abs(x)
    phi = np.where(x <= a, 1.0, 0.0)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    mid = (x > a) & (x < 2 * a)
    if np.any(mid):
        t = (x[mid] - a) / a
        q = 1.0 / t - 1.0 / (1.0 - t)
        s = expit(q)
        w = s * (1.0 - s)
        q1 = -1.0 / t ** 2 - 1.0 / (1.0 - t) ** 2
        q2 = 2.0 / t ** 3 - 2.0 / (1.0 - t) ** 3
        phi[mid] = s
        d1[mid] = w * q1 / a
        d2[mid] = w * ((1.0 - 2.0 * s) * q1 ** 2 + q2) / a ** 2
    return phi, sgn * d1, d2


# ---------------------------------------------------------------------------
# diffusion witness

@dataclass
class WitnessSpec:
    violation: Violation
    r: int
    s: int
    alpha: np.ndarray  # (2, m): alpha[t, l]
    beta: np.ndarray   # (2, m): Xi alpha
    delta: float
    a: float
    omega: np.ndarray
    certificate: dict

    def certificate_json(self):
        doc = {"violation": self.violation.as_dict(), **self.certificate}
        return json.dumps(doc, indent=2, sort_keys=True)


def xi_apply(dc, alpha):
    """(Xi alpha)^r = (-1)^{r+1} (K^{r0} alpha^0 + K^{r1} alpha^1)."""
    b0 = -(dc.k00 @ alpha[0] + dc.k01 @ alpha[1])
    b1 = dc.k10 @ alpha[0] + dc.k11 @ alpha[1]
    return np.vstack([b0, b1])


def _omega(alpha, beta):
    """Length of the one-sided interval where beta x(x-1) + alpha >= 0."""
    om = np.full(alpha.shape, 0.5)
    pos = (alpha > 0) & (beta > 0) & (4 * alpha < beta)
    om[pos] = 0.5 * (1.0 - np.sqrt(1.0 - 4.0 * alpha[pos] / beta[pos]))
    return om


class DiffusionWitness:
    """u_j(x) = phi(x) f^0_j(x) + phi(1-x) f^1_j(x), f^r_j = beta^r_j x(x-1) + alpha^r_j."""

    def __init__(self, alpha, beta, a):
        self.alpha, self.beta, self.a = alpha, beta, a

    def derivatives(self, x):
        """(u, u', u'') with shape (m, len(x)), from the analytic formula."""
        x = np.asarray(x, dtype=float)
        p0, p0d, p0dd = bump(x, self.a)
        p1, p1d, p1dd = bump(1.0 - x, self.a)
        p1d = -p1d
        q = x * (x - 1.0)
        out = []
        for r, (p, pd, pdd) in enumerate([(p0, p0d, p0dd), (p1, p1d, p1dd)]):
            b = self.beta[r][:, None]
            f = b * q + self.alpha[r][:, None]
            fd = b * (2 * x - 1.0)
            fdd = 2.0 * b * np.ones_like(x)
            out.append((p * f, pd * f + p * fd, pdd * f + 2 * pd * fd + p * fdd))
        return tuple(out[0][k] + out[1][k] for k in range(3))


def diffusion_pmp_witness(dc, grid=None, oversample=16):
    """Nonnegative domain element violating the positive minimum principle."""
    verdict = check_diffusion_positivity(dc)
    if verdict.positive:
        raise NotViolating("coupling satisfies the positivity criterion")
    v = verdict.violations[0]
    r, s, i, j = int(v.block[0]), int(v.block[1]), v.i, v.j
    grid = Grid.uniform(200) if grid is None else grid
    m = dc.m
    delta = 1.0
    while True:
        alpha = np.full((2, m), delta)
        alpha[s, j] = 1.0
        alpha[r, i] = 0.0
        beta = xi_apply(dc, alpha)
        if beta[r, i] < 0:
            break
        delta *= 0.5
        if delta < DELTA_MIN:
            raise NotViolating("no admissible delta found")
    omega = _omega(alpha, beta)
    a = min(0.125, 0.45 * float(omega.min()))
    w = DiffusionWitness(alpha, beta, a)

    x0 = float(r)
    u0, _, d2 = w.derivatives(np.array([x0]))
    # Robin data from the analytic derivatives
    e, ed, _ = w.derivatives(np.array([0.0, 1.0]))
    ua, ub = e[:, 0], e[:, 1]
    da, db = ed[:, 0], ed[:, 1]
    res = max(np.max(np.abs(da - dc.k00 @ ua - dc.k01 @ ub)),
              np.max(np.abs(db - dc.k10 @ ua - dc.k11 @ ub)))
    xs = np.linspace(0.0, 1.0, oversample * grid.n_segments + 1)
    dense_min = float(w.derivatives(xs)[0].min())
    nodal = w.derivatives(grid.nodes)[0]
    cert = {
        "edge": i,
        "end": r,
        "x0": x0,
        "u_x0": float(u0[i, 0]),
        "d2u": float(d2[i, 0]),
        "boundary_residual": float(res),
        "min_nodal": float(nodal.min()),
        "min_dense": dense_min,
        "verified": bool(u0[i, 0] == 0.0 and d2[i, 0] < 0 and res <= 1e-10
                         and dense_min >= 0.0 and nodal.min() >= 0.0),
    }
    spec = WitnessSpec(v, r, s, alpha, beta, delta, a, omega, cert)
    spec.function = w
    return NetworkState(grid, nodal), spec


def witness_negativity_time(dc, state, steps=None):
    """First backward-Euler step size (largest first) whose step turns the witness negative.

    Returns (h, min value) or (None, min over all tried) when no step does.
    The bump derivatives grow like a^-4, so the negative window can be very short.
    """
    from .evolve import diffusion_step
    steps = 10.0 ** -np.arange(2, 10) if steps is None else steps
    lowest = np.inf
    for h in steps:
        low = float(np.min(diffusion_step(state, dc, float(h)).values.real))
        if low < 0:
            return float(h), low
        lowest = min(lowest, low)
    return None, lowest


# ---------------------------------------------------------------------------
# transport witness

@dataclass
class TransportWitness:
    edge: int
    source: int
    k: float
    t_window: tuple
    initial: NetworkState
    speeds: np.ndarray
    _fj: PiecewiseLinear = field(repr=False, default=None)

    def predict(self, x, t, smooth=False):
        """k_ij f_j(1 + c_j x / c_i - c_j t), valid for x / c_i <= t < t_window[1]."""
        ci, cj = self.speeds[self.edge], self.speeds[self.source]
        y = 1.0 + cj * np.asarray(x, dtype=float) / ci - cj * t
        if smooth:
            return self.k * y * (1.0 - y)
        return self.k * self._fj(np.clip(y, 0.0, 1.0))

    def valid(self, x, t):
        ci = self.speeds[self.edge]
        return (np.asarray(x) / ci <= t) & (t < self.t_window[1])


def transport_negativity_witness(tc, grid=None):
    verdict = check_transport_positivity(tc)
    if verdict.positive:
        raise NotViolating("K is entrywise nonnegative")
    v = verdict.violations[0]
    grid = Grid.uniform(200) if grid is None else grid
    x = grid.nodes
    vals = np.zeros((tc.m, x.size))
    vals[v.j] = x * (1.0 - x)
    init = NetworkState(grid, vals)
    return TransportWitness(v.i, v.j, v.value, (0.0, float(np.min(1.0 / tc.c))), init,
                            tc.c.copy(), PiecewiseLinear.from_nodes(x, vals[v.j]))
