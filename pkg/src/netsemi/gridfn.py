"""Piecewise-linear network states on [0, 1]^m.

Every edge carries a function sampled on one shared grid.  Norms, traces
and the exponential-kernel integrals needed by the resolvents are computed
exactly for piecewise-linear data, so the only approximation anywhere is
the choice of grid.

Two richer representations live here as well:

* :class:`KernelExpansion` -- a PL part plus sums of exponential kernels
  centred on grid nodes.  Resolvents map this class into itself, which
  lets products such as ``R(lam) R(nu) f`` be evaluated without
  resampling.
* :class:`PiecewiseLinear` -- a scalar PL function on its own breakpoints
  with optional jumps (left/right limits), used for transport traces and
  exact transport snapshots.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMu, OutOfDomain, ValidationError

# below this |z| the closed-form segment weights lose digits; use series
_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 20


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValidationError("grid needs at least two nodes", "grid")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValidationError("grid must start at 0 and end at 1", "grid")
        if np.any(np.diff(x) <= 0):
            raise ValidationError("grid nodes must be strictly increasing", "grid")
        x.setflags(write=False)
        object.__setattr__(self, "nodes", x)

    @classmethod
    def uniform(cls, n):
        """Uniform grid with ``n`` segments (``n + 1`` nodes)."""
        if n < 1:
            raise ValidationError("grid needs n >= 1 segments", "grid.n")
        x = np.linspace(0.0, 1.0, n + 1)
        return cls(x)

    @property
    def n_segments(self):
        return self.nodes.size - 1

    @property
    def spacing(self):
        return np.diff(self.nodes)

    @property
    def h(self):
        return float(self.spacing.max())

    def is_uniform(self):
        d = self.spacing
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0.0))

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.nodes, other.nodes)

    def __hash__(self):
        return hash(self.nodes.tobytes())


@dataclass(frozen=True)
class PLFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.nodes.shape:
            raise ValidationError("values do not match grid", "values")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite values", "values")
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        return _interp(self.grid.nodes, self.values, x)


@dataclass(frozen=True)
class NetworkState:
    """``m`` PL functions on a shared grid; ``values`` has shape (m, N+1)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[1] != self.grid.nodes.size or v.shape[0] < 1:
            raise ValidationError(
                f"state values must have shape (m, {self.grid.nodes.size})", "values")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite state values", "values")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def x(self):
        return self.grid.nodes

    @classmethod
    def constant(cls, grid, m, c=1.0):
        return cls(grid, np.full((m, grid.nodes.size), c, dtype=float))

    @classmethod
    def from_callables(cls, grid, funcs):
        return cls(grid, np.array([np.asarray(f(grid.nodes)) * np.ones_like(grid.nodes)
                                   for f in funcs]))

    def component(self, edge):
        return PLFunction(self.grid, self.values[edge])

    def eval(self, edge, x):
        return eval_state(self, edge, x)

    def real(self):
        return NetworkState(self.grid, np.real(self.values).copy())

    def __add__(self, other):
        _check_same_grid(self, other)
        return NetworkState(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return NetworkState(self.grid, self.values - other.values)

    def __mul__(self, a):
        return NetworkState(self.grid, self.values * a)

    __rmul__ = __mul__


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValidationError("states live on different grids")


def _interp(x, v, q):
    q = np.asarray(q, dtype=float)
    if np.any((q < 0.0) | (q > 1.0)):
        raise OutOfDomain("evaluation point outside [0, 1]")
    if np.iscomplexobj(v):
        return np.interp(q, x, v.real) + 1j * np.interp(q, x, v.imag)
    return np.interp(q, x, v)


def eval_state(s, edge, x):
    """Linear interpolation of component ``edge`` at ``x``; exact at nodes."""
    if not 0 <= edge < s.m:
        raise OutOfDomain(f"edge {edge} out of range")
    out = _interp(s.grid.nodes, s.values[edge], x)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# exact norms

def _segment_abs_integrals(x, v):
    """Integral of |PL| over each segment, splitting at sign changes."""
    d = np.diff(x)
    a = np.abs(v[..., :-1])
    b = np.abs(v[..., 1:])
    same = (v[..., :-1] * v[..., 1:]) >= 0
    s = a + b
    with np.errstate(invalid="ignore", divide="ignore"):
        crossing = np.where(s > 0, (a * a + b * b) / np.where(s > 0, s, 1.0), 0.0)
    return d * np.where(same, 0.5 * s, 0.5 * crossing)


def pl_abs_integral(x, v):
    return _segment_abs_integrals(np.asarray(x), np.asarray(v)).sum(axis=-1)


def pl_integral(x, v):
    x = np.asarray(x)
    v = np.asarray(v)
    return (0.5 * np.diff(x) * (v[..., :-1] + v[..., 1:])).sum(axis=-1)


@dataclass(frozen=True)
class Norms:
    sup: float
    l1: float
    weighted: float = float("nan")


def norms(s, c=None):
    """sup, L1 and (with speeds ``c``) the weighted norm sum_j c_j^-1 |u_j|_1."""
    v = np.abs(s.values) if np.iscomplexobj(s.values) else s.values
    per_edge = pl_abs_integral(s.grid.nodes, v)
    sup = float(np.max(np.abs(s.values)))
    weighted = float("nan")
    if c is not None:
        c = np.asarray(c, dtype=float)
        if c.shape != (s.m,) or np.any(c <= 0):
            raise ValidationError("weighted norm needs m positive speeds", "speeds")
        weighted = float(np.sum(per_edge / c))
    return Norms(sup=sup, l1=float(per_edge.sum()), weighted=weighted)


def abs_state(s):
    """Componentwise |u| on a grid refined at every sign change.

    The refined grid is shared by all edges and contains the original
    nodes, so the L1 norm is preserved exactly.
    """
    x = s.grid.nodes
    v = np.real(s.values)
    extra = []
    for row in v:
        a, b = row[:-1], row[1:]
        k = np.nonzero(a * b < 0)[0]
        if k.size:
            t = a[k] / (a[k] - b[k])
            extra.append(x[k] + t * (x[k + 1] - x[k]))
    if not extra:
        return NetworkState(s.grid, np.abs(v))
    nodes = np.union1d(x, np.concatenate(extra))
    nodes = _dedupe(nodes, 1e-15)
    grid = Grid(nodes)
    vals = np.array([np.interp(nodes, x, row) for row in v])
    return NetworkState(grid, np.abs(vals))


def _dedupe(t, tol):
    t = np.sort(t)
    if t.size < 2:
        return t
    keep = np.concatenate(([True], np.diff(t) > tol))
    out = t[keep]
    out[-1] = t[-1]
    return out


def restrict(s, grid):
    """Values of ``s`` at the nodes of ``grid`` (PL interpolation)."""
    return NetworkState(grid, np.array([np.interp(grid.nodes, s.grid.nodes, row)
                                        for row in s.values]))


# ---------------------------------------------------------------------------
# exponential-kernel quadrature

def _e1(z):
    """(1 - exp(-z)) / z, stable near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for n in range(1, _SERIES_TERMS):
        acc += term / math.factorial(n) * (-1) ** (n + 1)
        term = term * zs
    out[small] = acc
    zb = z[~small]
    out[~small] = -np.expm1(-zb) / zb
    return out


def _g(z):
    """(1 - exp(-z)(1 + z)) / z**2, stable near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for n in range(2, _SERIES_TERMS + 2):
        acc += term * ((-1) ** n * (n - 1) / math.factorial(n))
        term = term * zs
    out[small] = acc
    zb = z[~small]
    out[~small] = (-np.expm1(-zb) - zb * np.exp(-zb)) / (zb * zb)
    return out


def causal_sweep(rate, x, f):
    """A_k = int_0^{x_k} exp(-rate (x_k - s)) f(s) ds for PL ``f``.

    ``f`` has shape (..., N+1); ``rate`` broadcasts against the leading
    axes.  O(N) prefix recursion with exact segment integrals.
    """
    f = np.asarray(f, dtype=complex)
    rate = np.asarray(rate, dtype=complex)[..., None]
    d = np.diff(x)
    z = rate * d
    decay = np.exp(-z)
    w_far = d * _g(z)
    w_near = d * _e1(z) - w_far
    inc = w_near * f[..., 1:] + w_far * f[..., :-1]
    decay = np.broadcast_to(decay, inc.shape)
    out = np.zeros(f.shape, dtype=complex)
    acc = np.zeros(f.shape[:-1], dtype=complex)
    for k in range(d.size):
        acc = decay[..., k] * acc + inc[..., k]
        out[..., k + 1] = acc
    return out


def anticausal_sweep(rate, x, f):
    """B_k = int_{x_k}^1 exp(-rate (s - x_k)) f(s) ds for PL ``f``."""
    f = np.asarray(f, dtype=complex)
    xr = 1.0 - x[::-1]
    return causal_sweep(rate, xr, f[..., ::-1])[..., ::-1]


@dataclass(frozen=True)
class KernelIntegral:
    """U on the grid plus its end traces; derivatives follow U'(0)=mu U(0), U'(1)=-mu U(1)."""

    values: np.ndarray
    derivative: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    du0: np.ndarray
    du1: np.ndarray


def kernel_integral_U(mu, sigma, f, x=None):
    """U(x) = 1/(2 mu sigma) int_0^1 exp(-mu |x - s|) f(s) ds, exact for PL f.

    ``f`` may be a :class:`PLFunction` or an array (..., N+1) together with
    the grid nodes ``x``.  ``mu`` and ``sigma`` broadcast over the leading
    axes of ``f``.
    """
    if isinstance(f, PLFunction):
        x, fv = f.grid.nodes, f.values
    else:
        fv = np.asarray(f)
        if x is None:
            raise ValueError("grid nodes required for array input")
        x = x.nodes if isinstance(x, Grid) else np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=complex)
    if np.any(mu.real <= 0):
        raise InvalidMu("kernel integral needs Re mu > 0")
    sigma = np.asarray(sigma, dtype=float)
    fwd = causal_sweep(mu, x, fv)
    bwd = anticausal_sweep(mu, x, fv)
    pref = (1.0 / (2.0 * mu * sigma))[..., None]
    u = pref * (fwd + bwd)
    du = pref * mu[..., None] * (bwd - fwd)
    mu_ = mu * np.ones(u.shape[:-1])
    return KernelIntegral(values=u, derivative=du, u0=u[..., 0], u1=u[..., -1],
                          du0=mu_ * u[..., 0], du1=-mu_ * u[..., -1])


def kernel_integral_closed_form(mu, sigma, x, f):
    """Same U as :func:`kernel_integral_U`, written as f/lambda plus kernels at the kinks.

    For PL f the kernel integral equals
    (1/lam)[f + sum_k J_k e^{-mu|x-x_k|}/(2mu) + end terms], lam = sigma mu^2,
    J_k the slope jumps.  Returns (pl_part, coef) where coef[k] multiplies
    exp(-mu |x - x_k|).  Independent of the prefix recursion; used both as a
    check and to seed :class:`KernelExpansion`.
    """
    f = np.asarray(f, dtype=complex)
    mu = complex(mu)
    lam = sigma * mu * mu
    slope = np.diff(f) / np.diff(x)
    coef = np.zeros(f.shape, dtype=complex)
    coef[1:-1] = (slope[1:] - slope[:-1]) / (2.0 * mu)
    coef[0] = slope[0] / (2.0 * mu) - f[0] / 2.0
    coef[-1] = -slope[-1] / (2.0 * mu) - f[-1] / 2.0
    return f / lam, coef / lam


# ---------------------------------------------------------------------------
# exact function classes


@dataclass
class KernelExpansion:
    """u_j(x) = p_j(x) + sum_r sum_k a[j,r,k] K_r(x - x_k).

    ``kind='symmetric'`` uses K_r(y) = exp(-rates[j,r] |y|) (diffusion);
    ``kind='causal'`` uses K_r(y) = (exp(-rates[j,r] y) - 1) H(y) (transport).
    ``p`` is PL on the grid.
    """

    grid: Grid
    pl: np.ndarray
    rates: np.ndarray = None
    coefs: np.ndarray = None
    kind: str = "symmetric"
    _dist: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.pl = np.asarray(self.pl, dtype=complex)
        m, n1 = self.pl.shape
        if self.rates is None:
            self.rates = np.zeros((m, 0), dtype=complex)
            self.coefs = np.zeros((m, 0, n1), dtype=complex)
        self.rates = np.asarray(self.rates, dtype=complex)
        self.coefs = np.asarray(self.coefs, dtype=complex)

    @classmethod
    def from_state(cls, s, kind="symmetric"):
        if isinstance(s, KernelExpansion):
            return s
        return cls(s.grid, np.array(s.values, dtype=complex), kind=kind)

    @property
    def m(self):
        return self.pl.shape[0]

    def _kernel(self, rate, xq):
        y = np.asarray(xq)[:, None] - self.grid.nodes[None, :]
        if self.kind == "symmetric":
            return np.exp(-rate * np.abs(y))
        pos = y > 0
        return np.where(pos, np.expm1(-rate * np.where(pos, y, 0.0)), 0.0)

    def evaluate(self, xq=None):
        """Values at ``xq`` (default: grid nodes), shape (m, len(xq))."""
        x = self.grid.nodes
        xq = x if xq is None else np.asarray(xq, dtype=float)
        out = np.array([np.interp(xq, x, p.real) + 1j * np.interp(xq, x, p.imag)
                        for p in self.pl])
        for j in range(self.m):
            for r in range(self.rates.shape[1]):
                a = self.coefs[j, r]
                if np.any(a):
                    out[j] += self._kernel(self.rates[j, r], xq) @ a
        return out

    def to_state(self):
        return NetworkState(self.grid, self.evaluate())

    def end_traces(self):
        """(u(0), u(1), u'(0+), u'(1-)) per edge."""
        x = self.grid.nodes
        p = self.pl
        u0 = p[:, 0].copy()
        u1 = p[:, -1].copy()
        d0 = (p[:, 1] - p[:, 0]) / (x[1] - x[0])
        d1 = (p[:, -1] - p[:, -2]) / (x[-1] - x[-2])
        for j in range(self.m):
            for r in range(self.rates.shape[1]):
                a = self.coefs[j, r]
                if not np.any(a):
                    continue
                b = self.rates[j, r]
                if self.kind == "symmetric":
                    e0 = np.exp(-b * x)
                    e1 = np.exp(-b * (1.0 - x))
                    u0[j] += e0 @ a
                    u1[j] += e1 @ a
                    # one-sided derivative of exp(-b|x - c|) at x=0 and x=1
                    s0 = np.where(x > 0, 1.0, -1.0)
                    s1 = np.where(x < 1, -1.0, 1.0)
                    d0[j] += (b * s0 * e0) @ a
                    d1[j] += (b * s1 * e1) @ a
                else:
                    y = 1.0 - x
                    d0[j] += -b * a[0]
                    u1[j] += np.where(y > 0, np.expm1(-b * y), 0.0) @ a
                    d1[j] += np.where(y > 0, -b * np.exp(-b * y), 0.0) @ a
        return u0, u1, d0, d1

    def add_terms(self, rates, coefs):
        """Append one kernel family per edge (``rates`` (m,), ``coefs`` (m, N+1))."""
        rates = np.asarray(rates, dtype=complex)[:, None]
        coefs = np.asarray(coefs, dtype=complex)[:, None, :]
        # merge into an existing family when the rate already occurs
        if self.rates.shape[1]:
            hit = np.all(np.isclose(self.rates, rates, rtol=1e-14, atol=0.0), axis=0)
            idx = np.nonzero(hit)[0]
            if idx.size:
                r = idx[0]
                new = self.coefs.copy()
                new[:, r, :] += coefs[:, 0, :]
                return KernelExpansion(self.grid, self.pl, self.rates, new, self.kind)
        return KernelExpansion(self.grid, self.pl, np.concatenate([self.rates, rates], 1),
                               np.concatenate([self.coefs, coefs], 1), self.kind)


class PiecewiseLinear:
    """Scalar PL function on its own breakpoints, with optional jumps.

    ``left[i]``/``right[i]`` are the one-sided limits at ``t[i]``; between
    breakpoints the function is linear from ``right[i]`` to ``left[i+1]``.
    Point evaluation defaults to the left limit.
    """

    __slots__ = ("t", "left_values", "right_values")

    def __init__(self, t, left, right=None):
        self.t = np.asarray(t, dtype=float)
        self.left_values = np.asarray(left, dtype=float)
        self.right_values = self.left_values if right is None else np.asarray(right, dtype=float)
        if self.t.ndim != 1 or self.t.size < 1 or np.any(np.diff(self.t) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")

    @classmethod
    def from_nodes(cls, x, v):
        return cls(np.asarray(x, dtype=float), np.asarray(v, dtype=float))

    def __repr__(self):
        return f"PiecewiseLinear({self.t.size} breakpoints on [{self.t[0]}, {self.t[-1]}])"

    def _between(self, s, i):
        t = self.t
        i = np.clip(i, 1, t.size - 1)
        t0, t1 = t[i - 1], t[i]
        w = (s - t0) / (t1 - t0)
        return (1 - w) * self.right_values[i - 1] + w * self.left_values[i]

    def left(self, s):
        s = np.asarray(s, dtype=float)
        t = self.t
        if t.size == 1:
            return np.full_like(s, self.left_values[0])
        i = np.searchsorted(t, s, side="left")
        ic = np.minimum(i, t.size - 1)
        exact = (i < t.size) & (t[ic] == s)
        out = self._between(s, i)
        return np.where(exact, self.left_values[ic], out)

    def right(self, s):
        s = np.asarray(s, dtype=float)
        t = self.t
        if t.size == 1:
            return np.full_like(s, self.right_values[0])
        i = np.searchsorted(t, s, side="right")
        im = np.maximum(i - 1, 0)
        exact = (i > 0) & (t[im] == s)
        out = self._between(s, i)
        return np.where(exact, self.right_values[im], out)

    __call__ = left

    def _segments(self):
        return self.right_values[:-1], self.left_values[1:], np.diff(self.t)

    def integral(self):
        a, b, d = self._segments()
        return float(np.sum(0.5 * d * (a + b)))

    def abs_integral(self):
        a, b, d = self._segments()
        same = a * b >= 0
        s = np.abs(a) + np.abs(b)
        with np.errstate(invalid="ignore", divide="ignore"):
            cross = np.where(s > 0, (a * a + b * b) / np.where(s > 0, s, 1.0), 0.0)
        return float(np.sum(d * np.where(same, 0.5 * s, 0.5 * cross)))

    def sup_abs(self):
        return float(max(np.max(np.abs(self.left_values)), np.max(np.abs(self.right_values))))

    def minimum(self):
        return float(min(np.min(self.left_values), np.min(self.right_values)))

    def abs(self):
        """|f| with breakpoints inserted at interior sign changes."""
        a, b, d = self._segments()
        k = np.nonzero(a * b < 0)[0]
        if not k.size:
            return PiecewiseLinear(self.t, np.abs(self.left_values), np.abs(self.right_values))
        tz = self.t[k] + d[k] * a[k] / (a[k] - b[k])
        t = np.concatenate([self.t, tz])
        lv = np.concatenate([np.abs(self.left_values), np.zeros(k.size)])
        rv = np.concatenate([np.abs(self.right_values), np.zeros(k.size)])
        o = np.argsort(t, kind="stable")
        t, lv, rv = t[o], lv[o], rv[o]
        keep = np.concatenate(([True], np.diff(t) > 0))
        return PiecewiseLinear(t[keep], lv[keep], rv[keep])


# ---------------------------------------------------------------------------
# CSV

def format_float(v):
    """Shortest round-trip decimal."""
    return repr(float(v))


def state_to_csv(s, fh=None):
    """Write ``edge,x,value`` rows; returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["edge", "x", "value"])
    x = s.grid.nodes
    vals = np.real(s.values)
    for j in range(s.m):
        for xi, vi in zip(x, vals[j]):
            w.writerow([j, format_float(xi), format_float(vi)])
    return buf.getvalue() if fh is None else None


def state_from_csv(text_or_fh):
    fh = io.StringIO(text_or_fh) if isinstance(text_or_fh, str) else text_or_fh
    rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"edge", "x", "value"}:
        raise ValidationError("state CSV needs header edge,x,value")
    edges = sorted({int(r["edge"]) for r in rows})
    per = {j: [] for j in edges}
    for r in rows:
        per[int(r["edge"])].append((float(r["x"]), float(r["value"])))
    xs = np.array([p[0] for p in per[edges[0]]])
    vals = []
    for j in edges:
        xj = np.array([p[0] for p in per[j]])
        if not np.array_equal(xj, xs):
            raise ValidationError("state CSV edges use different grids")
        vals.append([p[1] for p in per[j]])
    return NetworkState(Grid(xs), np.array(vals))
