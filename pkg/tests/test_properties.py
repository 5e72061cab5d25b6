import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fracphi import MCEstimate, config
from fracphi.gibbs import GibbsWindow, build_chain, gibbs_kernel
from fracphi.montecarlo import chunk_sizes
from fracphi.potentials import add, catalog
from fracphi.stable import (
    StableParams,
    density_1d_direct,
    density_bounds_check,
    transition_density,
)

# a few fixed indices keep table builds out of the example loop
ALPHAS = st.sampled_from([0.7, 1.0, 1.3, 1.5])
FIXTURE_OK = settings(suppress_health_check=[HealthCheck.function_scoped_fixture],
                      max_examples=25, deadline=None)
finite = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(ALPHAS, st.floats(0.05, 20.0), st.floats(0.0, 200.0))
def test_density_symmetric_and_radially_decreasing(alpha, t, x):
    p = StableParams(alpha)
    a, b, c = transition_density(p, t, np.array([x, -x, x + 0.5]))
    assert a == b and a > 0
    assert c <= a * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(ALPHAS, st.floats(0.05, 20.0), st.floats(0.01, 5.0), st.floats(-50.0, 50.0))
def test_density_scaling(alpha, t, c, x):
    p = StableParams(alpha)
    lhs = transition_density(p, c**alpha * t, c * x)
    rhs = transition_density(p, t, x) / c
    assert lhs == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(ALPHAS, st.floats(0.01, 100.0), st.floats(-1e4, 1e4))
def test_two_sided_bounds_hold(alpha, t, x):
    lo, val, hi = density_bounds_check(StableParams(alpha), t, x)
    assert lo <= val <= hi


@settings(max_examples=10, deadline=None)
@given(st.sampled_from([0.7, 1.3]), st.floats(0.0, 8.0))
def test_table_matches_direct_quadrature(alpha, r):
    assert transition_density(StableParams(alpha), 1.0, r) == pytest.approx(
        density_1d_direct(alpha, r), rel=1e-6)


@given(st.lists(finite, min_size=2, max_size=50))
def test_mc_estimate_mean_and_stderr(values):
    est = MCEstimate.from_samples(values)
    assert min(values) - 1e-9 <= est.mean <= max(values) + 1e-9
    assert est.stderr >= 0 and est.n_samples == len(values)
    shifted = MCEstimate.from_samples(np.asarray(values) + 7.0)
    assert shifted.stderr == pytest.approx(est.stderr, rel=1e-6, abs=1e-9)


@given(st.integers(1, 10**6), st.integers(1, 10**5))
def test_chunk_sizes_partition(n, size):
    parts = chunk_sizes(n, size)
    assert sum(parts) == n and max(parts) <= size and all(p > 0 for p in parts)


keys = st.lists(st.text("abcdefgh", min_size=1, max_size=5), min_size=1, max_size=3)
scalars = st.one_of(st.integers(-10**6, 10**6), st.booleans(),
                    st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != int(v)),
                    st.text("xyzw", min_size=1, max_size=6))


@given(keys, scalars)
def test_override_round_trip(path, value):
    cfg = {}
    config.apply_override(cfg, ".".join(path) + "=" + repr(value).replace("'", ""))
    node = cfg
    for p in path:
        node = node[p]
    assert node == value


@given(st.dictionaries(st.text("abc", min_size=1, max_size=3), st.integers(), max_size=6))
def test_digest_ignores_insertion_order(d):
    rev = dict(reversed(list(d.items())))
    assert config.digest(d) == config.digest(rev)


@given(st.floats(-5, 5), st.floats(0.5, 4), st.floats(-30, 30))
def test_potential_shift_and_add(c, delta, x):
    V = catalog("power", delta=delta)
    W = catalog("well", a=1.0, b=1.0)
    xs = np.array([x])
    assert V.shifted(c)(xs)[0] == pytest.approx(V(xs)[0] + c, rel=1e-12, abs=1e-12)
    assert add(V, W)(xs)[0] == pytest.approx(add(W, V)(xs)[0])


@FIXTURE_OK
@given(st.floats(1.0, 4.0))
def test_chain_rows_stochastic(oscillator_full, t):
    chain = build_chain(oscillator_full, t)
    assert np.all(chain.P >= 0)
    assert np.max(np.abs(chain.P.sum(axis=1) - 1)) < 1e-12
    assert np.max(np.abs(chain.rho @ chain.P - chain.rho)) < 1e-6


@FIXTURE_OK
@given(st.floats(0.5, 4.0), st.floats(-3, 3), st.floats(0.1, 3), st.floats(-3, 3),
       st.floats(0.1, 3))
def test_gibbs_kernel_is_probability(oscillator_full, T, a, w, b, v):
    win = GibbsWindow(T, 0.0, 0.0)
    p1 = gibbs_kernel(oscillator_full, win, [(0.0, a, a + w)])
    p2 = gibbs_kernel(oscillator_full, win, [(0.0, a, a + w), (T / 2, b, b + v)])
    assert -1e-12 <= p2 <= p1 + 1e-12 <= 1 + 2e-12
