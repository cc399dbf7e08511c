"""Time evolution.

Diffusion: backward Euler through the exact resolvent, u_{n+1} = (1/h) R(1/h) u_n.

Transport: characteristics.  The head traces h_j(t) = u_j(1, t) obey the
delay recursion

    h_j(t) = u0_j(1 - c_j t)                    t <= 1/c_j
    h_j(t) = sum_k K_jk h_k(t - 1/c_j)          t >  1/c_j

and are carried as piecewise-linear functions of t on the union of all
shifted breakpoints, so for PL initial data every snapshot is exact.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .diffres import solve_resolvent
from .errors import ValidationError
from .gridfn import (NetworkState, PiecewiseLinear, format_float, norms,
                     pl_integral)

MERGE_TOL = 1e-13


# ---------------------------------------------------------------------------
# diffusion

def diffusion_step(state, dc, h):
    """One backward-Euler step of size ``h``."""
    if not h > 0:
        raise ValidationError("step size must be positive", "run.steps")
    lam = 1.0 / h
    sol = solve_resolvent(lam, dc, state)
    return NetworkState(state.grid, np.real(lam * sol.u.values))


def euler_exponential(state, dc, t, n):
    """((n/t) R(n/t))^n u, the Euler approximation of e^{tA} u."""
    if not t > 0 or int(n) < 1:
        raise ValidationError("need t > 0 and n >= 1")
    n = int(n)
    h = t / n
    u = state
    for _ in range(n):
        u = diffusion_step(u, dc, h)
    return u


def diffusion_evolve(state, dc, T, steps, dt_out=None):
    """Backward-Euler trajectory with ``steps`` equal steps on [0, T]."""
    steps = int(steps)
    if not T > 0 or steps < 1:
        raise ValidationError("need T > 0 and steps >= 1", "run")
    h = T / steps
    every = 1 if dt_out is None else max(1, int(round(dt_out / h)))
    times, states = [0.0], [state]
    u = state
    for n in range(1, steps + 1):
        u = diffusion_step(u, dc, h)
        if n % every == 0 or n == steps:
            times.append(n * h)
            states.append(u)
    return Trajectory(np.array(times), states)


# ---------------------------------------------------------------------------
# transport

@dataclass
class BoundaryHistory:
    """Head and tail traces sampled at every trace breakpoint in [0, T]."""

    t: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    head_exact: list = field(default=None, repr=False)

    def residual(self, k):
        return float(np.max(np.abs(self.tail - k @ self.head))) if self.t.size else 0.0

    def interpolate(self, s):
        """Linear interpolation in time of (head, tail)."""
        s = np.asarray(s, dtype=float)
        head = np.array([np.interp(s, self.t, row) for row in self.head])
        tail = np.array([np.interp(s, self.t, row) for row in self.tail])
        return head, tail


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    exact: list = None
    history: BoundaryHistory = None

    def final(self):
        return self.states[-1]


def _merge(t, left, right, tol=MERGE_TOL):
    """Collapse breakpoints closer than ``tol``; the run keeps its outer limits."""
    if t.size < 2:
        return t, left, right
    start = np.concatenate(([True], np.diff(t) > tol))
    first = np.nonzero(start)[0]
    last = np.concatenate((first[1:] - 1, [t.size - 1]))
    return t[first], left[first], right[last]


def _initial_pl(u0):
    if isinstance(u0, NetworkState):
        x = u0.grid.nodes
        return [PiecewiseLinear.from_nodes(x, np.real(row)) for row in u0.values]
    out = list(u0)
    for f in out:
        if not isinstance(f, PiecewiseLinear):
            raise ValidationError("initial data must be a NetworkState or PiecewiseLinear list")
        if abs(f.t[0]) > 1e-15 or abs(f.t[-1] - 1.0) > 1e-15:
            raise ValidationError("initial PL data must live on [0, 1]")
    return out


def _combine(weights, funcs, lo, hi):
    """sum_k w_k f_k on [lo, hi] as (t, left, right) on the union of breakpoints."""
    pts = [np.array([lo, hi])]
    for w, f in zip(weights, funcs):
        if w != 0.0:
            inside = f.t[(f.t > lo) & (f.t < hi)]
            pts.append(inside)
    t = np.unique(np.concatenate(pts))
    left = np.zeros_like(t)
    right = np.zeros_like(t)
    for w, f in zip(weights, funcs):
        if w != 0.0:
            left += w * f.left(t)
            right += w * f.right(t)
    return t, left, right


def _head_histories(init, tc, T):
    m = tc.m
    tau = 1.0 / tc.c
    pieces = []
    horizon = np.empty(m)
    for j in range(m):
        f = init[j]
        end = min(tau[j], T)
        xs = f.t[f.t >= 1.0 - tc.c[j] * end]
        x_end = 1.0 - tc.c[j] * end
        xs = np.unique(np.concatenate([xs, [max(x_end, 0.0)]]))[::-1]
        t = (1.0 - xs) / tc.c[j]
        t[0], t[-1] = 0.0, end
        # x decreasing as t increases: left limit in t is the right limit in x
        left = f.right(xs)
        right = f.left(xs)
        left[0] = right[0]
        pieces.append(_merge(t, left, right))
        horizon[j] = end

    def as_pl(p):
        return PiecewiseLinear(*p) if p[0].size > 1 else PiecewiseLinear(p[0], p[1], p[2])

    while np.any(horizon < T):
        H = float(np.min(horizon))
        funcs = [as_pl(p) for p in pieces]
        new = list(pieces)
        for j in range(m):
            if horizon[j] >= T:
                continue
            lo, hi = horizon[j], min(T, H + tau[j])
            if hi <= lo:
                continue
            s, sl, sr = _combine(tc.k[j], funcs, lo - tau[j], hi - tau[j])
            t = s + tau[j]
            t[0], t[-1] = lo, hi
            ot, ol, orr = pieces[j]
            tt = np.concatenate([ot, t[1:]])
            ll = np.concatenate([ol, sl[1:]])
            rr = np.concatenate([orr[:-1], sr])
            new[j] = _merge(tt, ll, rr)
            horizon[j] = hi
        pieces = new
    return [as_pl(p) for p in pieces]


def _snapshot(init, heads, tc, t):
    """Exact per-edge PL in x of the solution at time t."""
    out = []
    for j in range(tc.m):
        a = tc.c[j] * t
        parts_t, parts_l, parts_r = [], [], []
        if a > 0:
            xe = min(a, 1.0)
            s, sl, sr = _combine(tc.k[j], heads, t - xe / tc.c[j], t)
            x = tc.c[j] * (t - s)
            x[-1] = 0.0
            x[0] = xe
            # s decreasing in x: left limit in x is the right limit in s
            xl, xr = sr[::-1].copy(), sl[::-1].copy()
            x = x[::-1]
            xl[0] = xr[0]
            parts_t.append(x)
            parts_l.append(xl)
            parts_r.append(xr)
        if a < 1.0:
            f = init[j]
            ys = f.t[f.t <= 1.0 - a]
            ys = np.unique(np.concatenate([ys, [1.0 - a]]))
            x = ys + a
            x[-1] = 1.0
            xl, xr = f.left(ys), f.right(ys)
            if parts_t:
                # junction x = a: left limit from the tail part, right from the initial part
                parts_r[0][-1] = xr[0]
                x, xl, xr = x[1:], xl[1:], xr[1:]
            else:
                xl = xl.copy()
                xl[0] = xr[0]
            xr = xr.copy()
            if x.size:
                xr[-1] = xl[-1]
            parts_t.append(x)
            parts_l.append(xl)
            parts_r.append(xr)
        else:
            parts_r[0][-1] = parts_l[0][-1]
        tt = np.concatenate(parts_t)
        ll = np.concatenate(parts_l)
        rr = np.concatenate(parts_r)
        out.append(PiecewiseLinear(*_merge(tt, ll, rr)))
    return out


def output_times(T, dt_out):
    if dt_out is None or dt_out >= T:
        return np.array([0.0, T])
    n = T / dt_out
    k = int(math.floor(n + 1e-9))
    times = dt_out * np.arange(k + 1)
    if abs(n - round(n)) <= 1e-9:
        times[-1] = T
        return times
    return np.concatenate([times, [T]])


def transport_evolve(state, tc, T, dt_out=None, grid=None):
    """Trajectory of the transport semigroup from ``state`` up to time ``T``.

    ``state`` is a NetworkState or a list of per-edge PiecewiseLinear on [0, 1].
    Nodal snapshots live on ``grid`` (default: the state's grid).
    """
    if not T > 0:
        raise ValidationError("T must be positive", "run.time")
    init = _initial_pl(state)
    if len(init) != tc.m:
        raise ValidationError("state and coupling disagree on m")
    if grid is None:
        if not isinstance(state, NetworkState):
            raise ValidationError("grid required for PL initial data")
        grid = state.grid
    heads = _head_histories(init, tc, T)
    times = output_times(T, dt_out)
    exact, states = [], []
    for t in times:
        snap = _snapshot(init, heads, tc, float(t))
        exact.append(snap)
        states.append(NetworkState(grid, np.array([f.left(grid.nodes) for f in snap])))
    ts = np.unique(np.concatenate([h.t for h in heads]))
    head = np.array([h.left(ts) for h in heads])
    hist = BoundaryHistory(ts, head, tc.k @ head, heads)
    return Trajectory(times, states, exact, hist)


# ---------------------------------------------------------------------------
# observables

@dataclass
class Observables:
    t: np.ndarray
    mass: np.ndarray
    l1: np.ndarray
    sup: np.ndarray
    weighted: np.ndarray
    min: np.ndarray


def _pl_obs(funcs, c):
    mass = sum(f.integral() for f in funcs)
    per = np.array([f.abs_integral() for f in funcs])
    sup = max(f.sup_abs() for f in funcs)
    mn = min(f.minimum() for f in funcs)
    return mass, float(per.sum()), sup, float(np.sum(per / c)), mn


def observables(traj, model=None):
    """Per-snapshot mass, L1, sup, weighted norm and minimum.

    With a transport coupling the weighted norm is sum_j |u_j|_1 / c_j;
    otherwise it equals the L1 norm.
    """
    rows = []
    c = getattr(model, "c", None)
    for k, s in enumerate(traj.states):
        if traj.exact is not None:
            cc = np.ones(s.m) if c is None else c
            rows.append(_pl_obs(traj.exact[k], cc))
            continue
        x = s.grid.nodes
        v = np.real(s.values)
        n = norms(s, c)
        w = n.weighted if c is not None else n.l1
        rows.append((float(pl_integral(x, v).sum()), n.l1, n.sup, w, float(v.min())))
    a = np.array(rows, dtype=float).reshape(-1, 5)
    return Observables(np.asarray(traj.times, dtype=float), *a.T)


def trajectory_to_csv(traj, fh=None):
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "edge", "x", "value"])
    for t, s in zip(traj.times, traj.states):
        x = s.grid.nodes
        v = np.real(s.values)
        for j in range(s.m):
            for xi, vi in zip(x, v[j]):
                w.writerow([format_float(t), j, format_float(xi), format_float(vi)])
    return buf.getvalue() if fh is None else None


def trajectory_from_csv(text_or_fh):
    """Inverse of trajectory_to_csv: (times, list of NetworkState)."""
    from .gridfn import state_from_csv
    fh = io.StringIO(text_or_fh) if isinstance(text_or_fh, str) else text_or_fh
    rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "edge", "x", "value"]:
        raise ValidationError("trajectory CSV needs header t,edge,x,value")
    blocks = {}
    for r in rows[1:]:
        blocks.setdefault(r[0], []).append(r[1:])
    times, states = [], []
    for key, body in blocks.items():
        text = "edge,x,value\n" + "".join(",".join(b) + "\n" for b in body)
        times.append(float(key))
        states.append(state_from_csv(text))
    return np.array(times), states


def observables_to_csv(obs, fh=None):
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "mass", "l1", "sup", "weighted", "min"])
    for row in zip(obs.t, obs.mass, obs.l1, obs.sup, obs.weighted, obs.min):
        w.writerow([format_float(v) for v in row])
    return buf.getvalue() if fh is None else None
