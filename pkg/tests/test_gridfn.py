import io

import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st
import hypothesis.extra.numpy as nph
from scipy.integrate import quad

from netsemi.errors import InvalidMu, OutOfDomain, ValidationError
from netsemi.gridfn import (Grid, KernelExpansion, NetworkState, PLFunction,
                            PiecewiseLinear, abs_state, eval_state,
                            kernel_integral_U, kernel_integral_closed_form,
                            norms, state_from_csv, state_to_csv)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid([0.0, 0.5, 0.5, 1.0])
    with pytest.raises(ValidationError):
        Grid([0.1, 1.0])
    g = Grid.uniform(4)
    assert g.is_uniform and g.h == pytest.approx(0.25)


def test_eval_examples():
    g = Grid.uniform(10)
    s = NetworkState.constant(g, 2, 1.0)
    assert eval_state(s, 1, 0.37) == pytest.approx(1.0)
    s = NetworkState(Grid([0.0, 1.0]), [[0.0, 1.0]])
    assert eval_state(s, 0, 0.25) == 0.25
    hat = np.zeros(11)
    hat[4] = 1.0
    s = NetworkState(g, [hat])
    assert eval_state(s, 0, 0.4) == 1.0
    with pytest.raises(OutOfDomain):
        eval_state(s, 0, 1.5)


def test_norm_examples():
    g = Grid.uniform(8)
    one = NetworkState.constant(g, 2, 1.0)
    n = norms(one, c=[1.0, 2.0])
    assert (n.sup, n.l1, n.weighted) == (1.0, 2.0, 1.5)
    n = norms(NetworkState(g, [g.nodes]))
    assert n.l1 == pytest.approx(0.5) and n.sup == 1.0


def test_abs_state_inserts_breakpoint():
    s = NetworkState(Grid([0.0, 1.0]), [[-1.0, 1.0]])
    a = abs_state(s)
    assert 0.5 in a.grid.nodes
    assert norms(a).l1 == pytest.approx(0.5)
    assert norms(s).l1 == pytest.approx(0.5)


@given(nph.arrays(float, (2, 9), elements=finite))
def test_abs_state_preserves_l1(v):
    s = NetworkState(Grid.uniform(8), v)
    a = abs_state(s)
    assert np.all(a.values >= 0)
    assert norms(a).l1 == pytest.approx(norms(s).l1, rel=1e-12, abs=1e-12)
    assert norms(a, [1, 3]).weighted == pytest.approx(norms(s, [1, 3]).weighted, rel=1e-12, abs=1e-12)


def test_l1_exact_against_dense_riemann(rng):
    g = Grid.uniform(20)
    s = NetworkState(g, rng.normal(size=(2, 21)))
    xs = np.linspace(0, 1, 200001)
    dense = sum(np.trapezoid(np.abs(np.interp(xs, g.nodes, row)), xs) for row in s.values)
    assert norms(s).l1 == pytest.approx(dense, abs=1e-6)


def test_kernel_integral_constant():
    mu, sigma = 2.5, 1.7
    g = Grid.uniform(50)
    K = kernel_integral_U(mu, sigma, PLFunction(g, np.ones(51)))
    x = g.nodes
    exact = (2 - np.exp(-mu * x) - np.exp(-mu * (1 - x))) / (2 * mu * mu * sigma)
    assert np.max(np.abs(K.values - exact)) < 1e-15
    assert K.u0 == pytest.approx((1 - np.exp(-mu)) / (2 * mu * mu * sigma), rel=1e-14)


def test_kernel_integral_zero():
    g = Grid.uniform(10)
    K = kernel_integral_U(1 + 1j, 1.0, PLFunction(g, np.zeros(11)))
    assert np.all(K.values == 0)


@pytest.mark.parametrize("mu", [0.01, 0.7, 3.0 + 4.0j, 40.0, 1e-3 + 2.0j])
def test_kernel_integral_against_quadrature(rng, mu):
    g = Grid(np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 13)])))
    f = PLFunction(g, rng.normal(size=g.nodes.size))
    sigma = 0.8
    K = kernel_integral_U(mu, sigma, f)
    x = g.nodes
    for k in (0, 3, 7, x.size - 1):
        xk = x[k]

        def part(fn, a, b):
            return quad(lambda s: fn(np.exp(-mu * abs(xk - s)) * f(s)), a, b,
                        epsabs=1e-15, epsrel=1e-13)[0]
        ref = 0.0
        for a, b in zip(x[:-1], x[1:]):
            ref += part(np.real, a, b) + 1j * part(np.imag, a, b)
        ref /= 2 * mu * sigma
        assert abs(K.values[k] - ref) <= 1e-12 * max(1.0, abs(ref))


def test_kernel_integral_closed_form_agrees(rng):
    g = Grid.uniform(30)
    f = rng.normal(size=31)
    for mu in (0.3, 2.0 + 1.0j, 25.0):
        K = kernel_integral_U(mu, 1.3, f, g.nodes)
        pl, coef = kernel_integral_closed_form(mu, 1.3, g.nodes, f)
        e = KernelExpansion(g, pl[None], [[mu]], coef[None, None])
        # the closed form carries f/lam terms that cancel for small |lam|
        scale = np.max(np.abs(pl))
        assert np.max(np.abs(e.evaluate()[0] - K.values)) < 1e-13 * scale


def test_kernel_integral_derivative_traces(rng):
    g = Grid.uniform(40)
    f = rng.normal(size=41)
    mu = 1.5 + 0.5j
    K = kernel_integral_U(mu, 1.0, f, g.nodes)
    assert K.du0 == pytest.approx(mu * K.u0)
    assert K.du1 == pytest.approx(-mu * K.u1)
    assert K.derivative[0] == pytest.approx(K.du0, rel=1e-12)


def test_kernel_integral_invalid_mu():
    with pytest.raises(InvalidMu):
        kernel_integral_U(-1.0, 1.0, np.ones(3), np.array([0, 0.5, 1.0]))


@given(mu_re=st.floats(1e-3, 50), mu_im=st.floats(-50, 50), sigma=st.floats(0.1, 10),
       seed=st.integers(0, 2**32 - 1))
def test_kernel_integral_bounds(mu_re, mu_im, sigma, seed):
    rng = np.random.default_rng(seed)
    g = Grid.uniform(30)
    f = rng.normal(size=31)
    mu = complex(mu_re, mu_im)
    K = kernel_integral_U(mu, sigma, f, g.nodes)
    fsup = np.max(np.abs(f))
    bound = fsup / (abs(mu) * mu.real * sigma)
    end = fsup * (1 - np.exp(-mu.real)) / (2 * abs(mu) * mu.real * sigma)
    assert np.max(np.abs(K.values)) <= bound * (1 + 1e-12)
    assert abs(K.u0) <= end * (1 + 1e-12) and abs(K.u1) <= end * (1 + 1e-12)


def test_piecewise_linear_limits():
    f = PiecewiseLinear([0.0, 0.5, 1.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0])
    assert f.left(0.5) == 1.0 and f.right(0.5) == 2.0
    assert f(0.75) == pytest.approx(1.0)
    assert f.integral() == pytest.approx(0.25 + 0.5)
    g = PiecewiseLinear([0.0, 1.0], [-1.0, 1.0])
    assert g.abs_integral() == pytest.approx(0.5)
    assert g.abs().minimum() == 0.0


@given(nph.arrays(float, (3, 6), elements=finite))
def test_csv_round_trip(v):
    s = NetworkState(Grid.uniform(5), v)
    back = state_from_csv(state_to_csv(s))
    assert np.array_equal(back.values, s.values)
    assert np.array_equal(back.grid.nodes, s.grid.nodes)


def test_csv_nonuniform_round_trip(rng):
    g = Grid(np.concatenate([[0.0], np.sort(rng.uniform(0, 1, 7)), [1.0]]))
    s = NetworkState(g, rng.normal(size=(2, 9)) * 1e-7)
    buf = io.StringIO()
    state_to_csv(s, buf)
    back = state_from_csv(buf.getvalue())
    assert np.array_equal(back.values, s.values)
