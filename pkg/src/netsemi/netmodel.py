"""Network graphs and the boundary-coupling matrices built from them.

Edges are identified with [0, 1], tail at 0 and head at 1.  Vertices and
edges are 0-based indices.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InconsistentRates, SinkPresent, ValidationError

CONSERVATION_TOL = 1e-12
STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class NetworkGraph:
    n: int
    tail: tuple
    head: tuple

    def __post_init__(self):
        tail = tuple(int(v) for v in self.tail)
        head = tuple(int(v) for v in self.head)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "head", head)
        if len(tail) != len(head) or not tail:
            raise ValidationError("graph needs m >= 1 edges with a tail and a head", "graph.edges")
        for v in tail + head:
            if not 0 <= v < self.n:
                raise ValidationError(f"vertex {v} out of range", "graph.edges")
        used = set(tail) | set(head)
        isolated = sorted(set(range(self.n)) - used)
        if isolated:
            raise ValidationError(f"isolated vertices {isolated}", "graph.vertices")

    @classmethod
    def from_edges(cls, n, edges):
        edges = list(edges)
        return cls(n, [e[0] for e in edges], [e[1] for e in edges])

    @property
    def m(self):
        return len(self.tail)

    def has_loops(self):
        return any(t == h for t, h in zip(self.tail, self.head))

    def outgoing_incidence(self):
        """Phi^-: (n, m), 1 where edge j leaves vertex i."""
        phi = np.zeros((self.n, self.m))
        phi[list(self.tail), range(self.m)] = 1.0
        return phi

    def incoming_incidence(self):
        """Phi^+: (n, m), 1 where edge j enters vertex i."""
        phi = np.zeros((self.n, self.m))
        phi[list(self.head), range(self.m)] = 1.0
        return phi


@dataclass
class FickRates:
    """Outflow rates ``l`` (tail), ``r`` (head) and cross inflow rates.

    ``l_cross[(i, j)]`` is the rate into edge i at its tail coming from
    edge j; ``r_cross[(i, j)]`` the same at the head of i.  The shared
    vertex is therefore fixed by i, which also settles parallel edges.
    """

    l: np.ndarray
    r: np.ndarray
    l_cross: dict = field(default_factory=dict)
    r_cross: dict = field(default_factory=dict)


@dataclass
class FlowNetwork:
    graph: NetworkGraph
    w: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    c: np.ndarray


@dataclass
class DiffusionCoupling:
    k00: np.ndarray
    k01: np.ndarray
    k10: np.ndarray
    k11: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mats = [np.atleast_2d(np.asarray(k, dtype=float)) for k in
                (self.k00, self.k01, self.k10, self.k11)]
        self.k00, self.k01, self.k10, self.k11 = mats
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        m = self.sigma.size
        for name, k in zip(("k00", "k01", "k10", "k11"), mats):
            if k.shape != (m, m):
                raise ValidationError(f"{name} must be {m}x{m}", f"matrices.{name}")
            if not np.all(np.isfinite(k)):
                raise ValidationError(f"{name} has non-finite entries", f"matrices.{name}")
        if np.any(~np.isfinite(self.sigma)) or np.any(self.sigma <= 0):
            raise ValidationError("sigma must be strictly positive", "sigma")

    @property
    def m(self):
        return self.sigma.size

    @classmethod
    def zero(cls, sigma):
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        z = np.zeros((sigma.size, sigma.size))
        return cls(z, z.copy(), z.copy(), z.copy(), sigma)

    def blocks(self):
        return {"00": self.k00, "01": self.k01, "10": self.k10, "11": self.k11}

    def full(self):
        """The 2m x 2m matrix [[K00, K01], [K10, K11]]."""
        return np.block([[self.k00, self.k01], [self.k10, self.k11]])

    def norm(self):
        return float(np.linalg.norm(self.full(), ord=np.inf))


@dataclass
class TransportCoupling:
    k: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.k = np.atleast_2d(np.asarray(self.k, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        m = self.c.size
        if self.k.shape != (m, m):
            raise ValidationError(f"K must be {m}x{m}", "matrices.k")
        if not np.all(np.isfinite(self.k)):
            raise ValidationError("K has non-finite entries", "matrices.k")
        if np.any(~np.isfinite(self.c)) or np.any(self.c <= 0):
            raise ValidationError("speeds must be strictly positive", "speeds")

    @property
    def m(self):
        return self.c.size

    def abs(self):
        return TransportCoupling(np.abs(self.k), self.c)

    def with_speeds(self, c):
        return TransportCoupling(self.k, np.broadcast_to(np.asarray(c, float), self.c.shape).copy())


def build_diffusion_coupling(g, rates, sigma=None):
    """Fick-law coupling matrices.

    Diagonal blocks carry the outflow rates (k00_ii = l_i, k11_ii = -r_i);
    a cross rate lands in the block selected by which end of edge j sits
    at the shared vertex.
    """
    if g.has_loops():
        raise ValidationError("Fick coupling is defined for graphs without loops", "graph.edges")
    m = g.m
    l = np.asarray(rates.l, dtype=float)
    r = np.asarray(rates.r, dtype=float)
    if l.shape != (m,) or r.shape != (m,):
        raise ValidationError("l and r need one rate per edge", "graph.rates")
    if np.any(l < 0) or np.any(r < 0):
        raise ValidationError("rates must be nonnegative", "graph.rates")
    k00, k01, k10, k11 = (np.zeros((m, m)) for _ in range(4))
    k00[np.diag_indices(m)] = l
    k11[np.diag_indices(m)] = -r

    def place(i, j, rate, at_vertex, kind):
        if rate < 0:
            raise ValidationError(f"{kind}_cross({i},{j}) is negative", f"graph.rates.{kind}_cross")
        if rate == 0:
            return
        if i == j:
            raise InconsistentRates(f"{kind}_cross({i},{i}) couples an edge to itself")
        if g.tail[j] == at_vertex:
            end = 0
        elif g.head[j] == at_vertex:
            end = 1
        else:
            raise InconsistentRates(
                f"{kind}_cross({i},{j}): edges {i} and {j} share no vertex at {kind} end of {i}")
        if kind == "l":
            (k00 if end == 0 else k01)[i, j] = -rate
        else:
            (k10 if end == 0 else k11)[i, j] = rate

    for (i, j), rate in rates.l_cross.items():
        place(i, j, float(rate), g.tail[i], "l")
    for (i, j), rate in rates.r_cross.items():
        place(i, j, float(rate), g.head[i], "r")
    for (i, j) in set(rates.l_cross) & set(rates.r_cross):
        both = rates.l_cross[(i, j)] != 0 and rates.r_cross[(i, j)] != 0
        parallel = {g.tail[i], g.head[i]} == {g.tail[j], g.head[j]}
        if both and not parallel:
            raise InconsistentRates(f"edge pair ({i},{j}) has both l and r cross rates")
    if sigma is None:
        sigma = np.ones(m)
    return DiffusionCoupling(k00, k01, k10, k11, sigma)


def exchange_coupling(p, sigma, absorb=None):
    """Coupling from nonnegative exchange rates between edge ends.

    ``p`` is 2m x 2m, indexed by end (r, i) -> r * m + i; p[a, b] is the rate
    at which mass at end b is moved to end a.  Mass leaving an end is
    balanced by what arrives elsewhere, so the coupling satisfies the
    conservation condition and the sign criterion; ``absorb`` (2m, >= 0)
    adds extra loss at each end.
    """
    p = np.array(p, dtype=float)
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    m = sigma.size
    if p.shape != (2 * m, 2 * m) or np.any(p < 0):
        raise ValidationError("exchange rates must be a nonnegative 2m x 2m matrix", "matrices")
    np.fill_diagonal(p, 0.0)
    d = p.sum(axis=0)
    if absorb is not None:
        d = d + np.asarray(absorb, dtype=float)
    # -sigma u'(0) and sigma u'(1) are the inflows at the tail and the head
    g = p - np.diag(d)
    s = np.concatenate([sigma, sigma])
    k = g / s[:, None]
    k[:m] *= -1.0
    return DiffusionCoupling(k[:m, :m], k[:m, m:], k[m:, :m], k[m:, m:], sigma)


def detect_sinks(g):
    """Vertices with at least one incoming and no outgoing edge."""
    out = set(g.tail)
    return sorted(v for v in set(g.head) if v not in out)


def validate_flow_network(fn):
    g = fn.graph
    w = np.asarray(fn.w, dtype=float)
    if w.shape != (g.n, g.m):
        raise ValidationError("w must be n x m", "graph.w")
    if np.any(w < 0):
        raise ValidationError("w must be nonnegative", "graph.w")
    phi_out = g.outgoing_incidence()
    if np.any((w != 0) & (phi_out == 0)):
        raise ValidationError("w has entries off the outgoing incidences", "graph.w")
    for name in ("xi", "gamma", "c"):
        a = np.asarray(getattr(fn, name), dtype=float)
        if a.shape != (g.m,) or np.any(a <= 0):
            raise ValidationError(f"{name} needs m positive entries", f"graph.{name}")
    sums = (w * phi_out).sum(axis=1)
    has_out = phi_out.sum(axis=1) > 0
    bad = np.nonzero(has_out & (np.abs(sums - 1.0) > STOCHASTIC_TOL))[0]
    if bad.size:
        raise ValidationError(
            f"flow split at vertices {bad.tolist()} does not sum to 1", "graph.w")


def build_transport_coupling(fn):
    """K = Xi^-1 C^-1 B Gamma C with the line-graph adjacency B weighted by w."""
    g = fn.graph
    sinks = detect_sinks(g)
    if sinks:
        raise SinkPresent(sinks)
    validate_flow_network(fn)
    w = np.asarray(fn.w, dtype=float)
    xi, gamma, c = (np.asarray(a, dtype=float) for a in (fn.xi, fn.gamma, fn.c))
    phi_in = g.incoming_incidence()
    tails = np.asarray(g.tail)
    wt = w[tails, np.arange(g.m)]
    k = (wt / (xi * c))[:, None] * phi_in[tails, :] * (gamma * c)[None, :]
    return TransportCoupling(k, c)


def kappa_column_sums(tc):
    return tc.k.sum(axis=0)


def check_conservation_condition(dc, tol=CONSERVATION_TOL):
    """Zero-mass-flux test: sum_i sigma_i (K10 - K00)_ij = sum_i sigma_i (K11 - K01)_ij = 0.

    Returns (ok, residual) with residual of shape (2, m).
    """
    s = dc.sigma[:, None]
    res = np.vstack([(s * (dc.k10 - dc.k00)).sum(axis=0),
                     (s * (dc.k11 - dc.k01)).sum(axis=0)])
    return bool(np.all(np.abs(res) <= tol)), res


def line_graph(g, directed=True):
    """Line graph of ``g`` and its adjacency matrix.

    Directed: the returned matrix B has B[k, j] = 1 when head(j) = tail(k),
    i.e. the transposed adjacency, matching the support of the transport K.
    Undirected: B[j, k] = 1 when edges j != k share a vertex.
    """
    m = g.m
    b = np.zeros((m, m))
    for j in range(m):
        for k in range(m):
            if directed:
                if g.head[j] == g.tail[k]:
                    b[k, j] = 1.0
            elif j != k and {g.tail[j], g.head[j]} & {g.tail[k], g.head[k]}:
                b[j, k] = 1.0
    rows, cols = np.nonzero(b)
    # edge of the line graph: source column -> target row
    try:
        lg = NetworkGraph(m, cols.tolist(), rows.tolist())
    except ValidationError:
        lg = None  # some edge of g has no neighbour
    return lg, b
