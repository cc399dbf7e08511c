import json

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from netsemi.errors import NotViolating
from netsemi.evolve import diffusion_evolve, transport_evolve
from netsemi.gridfn import Grid, NetworkState
from netsemi.netmodel import DiffusionCoupling, TransportCoupling
from netsemi.posit import (bump, check_diffusion_positivity, check_transport_positivity,
                           diffusion_pmp_witness, transport_negativity_witness,
                           witness_negativity_time, xi_apply)

from conftest import positive_coupling, random_state, violating_coupling

Z2 = np.zeros((2, 2))


def test_zero_coupling_positive():
    v = check_diffusion_positivity(DiffusionCoupling.zero([1, 1, 1]))
    assert v.positive and v.violations == []


def test_single_cross_violation():
    k01 = np.array([[0.0, 0.5], [0.0, 0.0]])
    v = check_diffusion_positivity(DiffusionCoupling(Z2, k01, Z2, Z2, [1, 1]))
    assert not v.positive
    assert [(w.block, w.i, w.j, w.value) for w in v.violations] == [("01", 0, 1, 0.5)]


def test_diagonals_are_unconstrained():
    dc = DiffusionCoupling([[5.0]], [[0.0]], [[0.0]], [[-7.0]], [1.0])
    assert check_diffusion_positivity(dc).positive
    dc = DiffusionCoupling([[-5.0]], [[0.0]], [[0.0]], [[7.0]], [1.0])
    assert check_diffusion_positivity(dc).positive
    with pytest.raises(NotViolating):
        diffusion_pmp_witness(dc)


def test_violation_order_row_major():
    rng = np.random.default_rng(3)
    dc = DiffusionCoupling(*[rng.normal(size=(3, 3)) for _ in range(4)], [1, 1, 1])
    v = check_diffusion_positivity(dc).violations
    keys = [(["00", "01", "10", "11"].index(w.block), w.i, w.j)
            for w in v]
    assert keys == sorted(keys)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_verdict_iff_sign_pattern(m, seed):
    rng = np.random.default_rng(seed)
    blocks = [rng.normal(size=(m, m)) for _ in range(4)]
    dc = DiffusionCoupling(*blocks, np.ones(m))
    off = ~np.eye(m, dtype=bool)
    ok = (np.all(blocks[0][off] <= 0) and np.all(blocks[1] <= 0)
          and np.all(blocks[2] >= 0) and np.all(blocks[3][off] >= 0))
    v = check_diffusion_positivity(dc)
    assert v.positive == ok == (not v.violations)


def test_transport_verdicts():
    assert check_transport_positivity(TransportCoupling([[1.0]], [1.0])).positive
    v = check_transport_positivity(TransportCoupling([[0, -0.1], [1, 0]], [1, 1]))
    assert [(w.i, w.j) for w in v.violations] == [(0, 1)]
    rng = np.random.default_rng(0)
    assert check_transport_positivity(TransportCoupling(rng.normal(size=(4, 4)), np.ones(4)).abs()).positive


def test_bump_shape():
    a = 0.1
    x = np.linspace(-0.3, 0.3, 601)
    phi, d1, d2 = bump(x, a)
    assert np.all(phi[np.abs(x) <= a] == 1) and np.all(phi[np.abs(x) >= 2 * a] == 0)
    assert np.all((phi >= 0) & (phi <= 1))
    # analytic derivatives against central differences
    h = 1e-6
    xs = np.array([0.13, 0.15, 0.17, -0.14])
    p_plus, p_minus = bump(xs + h, a)[0], bump(xs - h, a)[0]
    assert np.allclose(bump(xs, a)[1], (p_plus - p_minus) / (2 * h), rtol=1e-6, atol=1e-6)
    d1p, d1m = bump(xs + h, a)[1], bump(xs - h, a)[1]
    assert np.allclose(bump(xs, a)[2], (d1p - d1m) / (2 * h), rtol=1e-5, atol=1e-5)


def test_witness_worked_example():
    k10 = np.array([[0.0, -1.0], [0.0, 0.0]])
    dc = DiffusionCoupling(Z2, Z2, k10, Z2, [1, 1])
    u, spec = diffusion_pmp_witness(dc)
    assert (spec.r, spec.s, spec.violation.i, spec.violation.j) == (1, 0, 0, 1)
    assert spec.alpha[0, 1] == 1.0 and spec.alpha[1, 0] == 0.0
    assert spec.beta[1, 0] < 0
    cert = spec.certificate
    assert cert["d2u"] == pytest.approx(2 * spec.beta[1, 0])
    assert cert["d2u"] < 0 and cert["u_x0"] == 0.0 and cert["verified"]
    assert u.values[0, -1] == 0.0
    doc = json.loads(spec.certificate_json())
    assert doc["violation"]["block"] == "10" and doc["x0"] == 1.0


def test_witness_beta_matches_xi(rng):
    dc = violating_coupling(rng, 3)
    _, spec = diffusion_pmp_witness(dc)
    assert np.array_equal(spec.beta, xi_apply(dc, spec.alpha))


def test_witness_derivatives_consistent(rng):
    dc = violating_coupling(rng, 2)
    _, spec = diffusion_pmp_witness(dc)
    w = spec.function
    x = np.linspace(0.01, 0.99, 50)
    h = 1e-5
    u, du, d2u = w.derivatives(x)
    assert np.allclose(du, (w.derivatives(x + h)[0] - w.derivatives(x - h)[0]) / (2 * h), atol=1e-5)
    assert np.allclose(d2u, (w.derivatives(x + h)[1] - w.derivatives(x - h)[1]) / (2 * h), atol=1e-4)


def test_witness_certificates_random(rng):
    for _ in range(100):
        dc = violating_coupling(rng, int(rng.integers(1, 5)))
        u, spec = diffusion_pmp_witness(dc)
        c = spec.certificate
        assert c["verified"], c
        assert c["min_nodal"] >= 0 and c["min_dense"] >= 0
        assert c["u_x0"] == 0 and c["d2u"] < 0 and c["boundary_residual"] <= 1e-10
        assert np.all(u.values >= 0)


def test_witness_goes_negative_under_evolution(rng):
    for _ in range(10):
        dc = violating_coupling(rng, 3)
        u, _ = diffusion_pmp_witness(dc, Grid.uniform(400))
        h, low = witness_negativity_time(dc, u)
        assert h is not None and low < 0


def test_forward_positivity(rng):
    g = Grid.uniform(100)
    for _ in range(10):
        dc = positive_coupling(rng, int(rng.integers(1, 4)))
        traj = diffusion_evolve(random_state(rng, g, dc.m, positive=True), dc, 0.1, 50)
        assert min(float(s.values.min()) for s in traj.states) >= -1e-9


def test_transport_witness_example():
    g = Grid.uniform(400)
    tc = TransportCoupling([[0, -1.0], [0, 0]], [1, 1])
    w = transport_negativity_witness(tc, g)
    assert (w.edge, w.source, w.k) == (0, 1, -1.0)
    x = g.nodes
    t = 0.5
    exact = -(1 + x - t) * (t - x)
    ok = w.valid(x, t)
    assert np.max(np.abs(w.predict(x, t, smooth=True)[ok] - exact[ok])) < 1e-15
    u = transport_evolve(w.initial, tc, t).final().values[0]
    assert np.max(np.abs(u[ok] - exact[ok])) < 1e-5
    assert np.max(np.abs(u[ok] - w.predict(x, t)[ok])) < 1e-12
    assert np.min(u) < 0


def test_transport_witness_random(rng):
    g = Grid.uniform(200)
    for _ in range(20):
        m = int(rng.integers(1, 4))
        k = rng.uniform(0, 1, (m, m))
        k[rng.integers(m), rng.integers(m)] = -rng.uniform(0.1, 2)
        tc = TransportCoupling(k, rng.uniform(0.5, 2, m))
        w = transport_negativity_witness(tc, g)
        t = 0.5 * w.t_window[1]
        u = transport_evolve(w.initial, tc, t).final().values[w.edge]
        ok = w.valid(g.nodes, t)
        assert np.max(np.abs(u[ok] - w.predict(g.nodes, t)[ok])) < 1e-6
        assert np.min(u[ok]) < 0


def test_transport_witness_needs_violation():
    with pytest.raises(NotViolating):
        transport_negativity_witness(TransportCoupling([[0.5]], [1.0]))


def test_nonnegative_k_keeps_positivity(rng, grid):
    for _ in range(10):
        m = int(rng.integers(1, 4))
        tc = TransportCoupling(rng.uniform(0, 1.5, (m, m)), rng.uniform(0.5, 2, m))
        traj = transport_evolve(random_state(rng, grid, m, positive=True), tc, 2.0, dt_out=0.1)
        assert min(float(s.values.min()) for s in traj.states) >= -1e-12
