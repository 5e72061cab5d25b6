import math

import numpy as np
import pytest
from scipy.special import gamma

from fracphi import ConfigError, NumericalError, PreconditionError
from fracphi.stable import (
    DensityTable,
    MCEstimate,
    PathSkeleton,
    StableParams,
    bridge_weight,
    density_1d_direct,
    density_at_zero,
    density_bounds_check,
    envelope,
    fitted_bounds_constant,
    get_table,
    levy_measure_density,
    potential_kernel,
    radial_density,
    sample_bridge_skeleton,
    sample_bridges,
    sample_increment,
    sample_paths,
    set_cache_dir,
    tail_series,
    transition_density,
)


def cauchy_1d(t, x):
    return t / (np.pi * (t * t + x * x))


def test_params_validation():
    with pytest.raises(ConfigError):
        StableParams(0.0)
    with pytest.raises(ConfigError):
        StableParams(2.0)
    with pytest.raises(ConfigError):
        StableParams(1.0, 0)
    assert StableParams(1, 2).alpha == 1.0


def test_cauchy_density_oracle(cauchy):
    x = np.linspace(-50, 50, 401)
    for t in (0.5, 1.0, 2.0):
        p = transition_density(cauchy, t, x)
        assert np.max(np.abs(p / cauchy_1d(t, x) - 1)) < 1e-8


def test_cauchy_far_tail(cauchy):
    x = np.array([150.0, 1e3, 1e5])
    p = transition_density(cauchy, 1.0, x)
    assert np.max(np.abs(p / cauchy_1d(1.0, x) - 1)) < 1e-8


def test_scalar_input_returns_float(cauchy):
    assert isinstance(transition_density(cauchy, 1.0, 0.3), float)


def test_cauchy_higher_dimensions():
    r = np.linspace(0, 20, 81)
    p2 = transition_density(StableParams(1.0, 2), 1.0, np.column_stack([r, 0 * r]))
    assert np.max(np.abs(p2 / (1 / (2 * np.pi * (1 + r * r) ** 1.5)) - 1)) < 1e-7
    p3 = transition_density(StableParams(1.0, 3), 1.0, np.column_stack([r, 0 * r, 0 * r]))
    assert np.max(np.abs(p3 / (1 / (np.pi**2 * (1 + r * r) ** 2)) - 1)) < 1e-7


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.3, 1.7])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_density_at_zero_closed_form(alpha, d):
    expected = gamma(d / alpha) / (alpha * 2 ** (d - 1) * np.pi ** (d / 2) * gamma(d / 2))
    assert density_at_zero(alpha, d) == pytest.approx(expected, rel=1e-12)
    x = np.zeros(d) if d > 1 else 0.0
    assert transition_density(StableParams(alpha, d), 1.0, x) == pytest.approx(expected, rel=1e-7)


@pytest.mark.parametrize("alpha", [0.5, 0.9, 1.5, 1.9])
def test_table_matches_direct_quadrature(alpha):
    r = np.array([0.0, 0.05, 0.7, 3.0, 12.0, 60.0])
    tab = transition_density(StableParams(alpha), 1.0, r)
    direct = np.array([density_1d_direct(alpha, v) for v in r])
    assert np.max(np.abs(tab / direct - 1)) < 1e-6


def test_tail_series_first_term():
    a, r = 1.5, 500.0
    first = a * math.sin(math.pi * a / 2) * gamma(a) / np.pi * r ** (-1 - a)
    assert tail_series(a, 1, r, n_terms=1) == pytest.approx(first, rel=1e-12)


def test_low_alpha_warns():
    with pytest.warns(UserWarning):
        DensityTable(0.35)


def test_density_integrates_to_one():
    for alpha in (0.8, 1.5):
        x = np.linspace(-2000, 2000, 400001)
        p = transition_density(StableParams(alpha), 1.0, x)
        mass = np.trapezoid(p, x) if hasattr(np, "trapezoid") else np.trapz(p, x)
        tail = 2 * (2000.0 ** (-alpha)) * gamma(alpha) * math.sin(math.pi * alpha / 2) / np.pi
        assert mass + tail == pytest.approx(1.0, abs=2e-4)


def test_time_must_be_positive(cauchy):
    with pytest.raises(PreconditionError):
        transition_density(cauchy, 0.0, 1.0)


def test_wrong_trailing_dimension():
    with pytest.raises(ConfigError):
        transition_density(StableParams(1.0, 2), 1.0, np.zeros((3, 3)))


def test_bounds_sandwich():
    for alpha, d in [(0.7, 1), (1.3, 1), (1.0, 2), (1.5, 3)]:
        p = StableParams(alpha, d)
        r = np.geomspace(1e-3, 1e4, 60)
        pts = r if d == 1 else np.column_stack([r] + [0 * r] * (d - 1))
        lo, val, hi = density_bounds_check(p, 0.7, pts)
        assert np.all(lo <= val) and np.all(val <= hi)
    with pytest.raises(NumericalError):
        density_bounds_check(StableParams(1.0), 1.0, np.array([0.0, 5.0]), C=1.0 + 1e-6)


def test_bounds_constant_reasonable():
    assert 1.0 < fitted_bounds_constant(1.0) < 10.0


def test_envelope_shape(cauchy):
    assert envelope(cauchy, 1.0, 0.0) == pytest.approx(1.0)
    assert envelope(cauchy, 1.0, 10.0) == pytest.approx(1.0 / 100.0)


def test_radial_density_matches(cauchy):
    r = np.array([0.0, 1.0, 4.0])
    assert np.allclose(radial_density(cauchy, 2.0, r), cauchy_1d(2.0, r), rtol=1e-8)


def test_table_disk_cache(tmp_path):
    set_cache_dir(tmp_path)
    try:
        get_table.cache_clear()
        t1 = get_table(1.1, 1)
        files = list(tmp_path.glob("density_v*.npz"))
        assert len(files) == 1
        get_table.cache_clear()
        t2 = get_table(1.1, 1)
        r = np.linspace(0, 30, 50)
        assert np.array_equal(t1(r), t2(r))
    finally:
        set_cache_dir(None)
        get_table.cache_clear()


def test_table_load_rejects_wrong_key(tmp_path):
    tab = DensityTable(1.2)
    path = tmp_path / "t.npz"
    tab.save(path)
    with pytest.raises(ValueError):
        DensityTable.load(path, expected_key=(1.3, 1, tab.step))


def test_potential_kernel_cases():
    assert potential_kernel(StableParams(1.0, 3), np.array([2.0, 0, 0])) == pytest.approx(
        1 / (2 * np.pi**2 * 4.0))
    assert potential_kernel(StableParams(1.0, 1), 1.0) == 0.0
    assert potential_kernel(StableParams(1.5, 1), 1.0) == pytest.approx(
        1 / (2 * gamma(1.5) * np.cos(0.75 * np.pi)))
    assert potential_kernel(StableParams(1.5, 1), 1.0) == pytest.approx(-0.798, abs=1e-3)
    with pytest.raises(PreconditionError):
        potential_kernel(StableParams(1.0, 3), np.zeros(3))


def test_potential_kernel_time_integral():
    from scipy.integrate import quad

    p = StableParams(0.5)
    # int_T^inf p(t, 2) dt ~ int_T^inf p(1,0) t^{-2} dt = p(1,0)/T
    T = 1e6
    head = quad(lambda t: transition_density(p, t, 2.0), 0, T, limit=500, points=[1, 10, 100])[0]
    tail = density_at_zero(0.5, 1) / T
    assert head + tail == pytest.approx(potential_kernel(p, 2.0), rel=1e-3)


def test_levy_density_cauchy(cauchy):
    assert levy_measure_density(cauchy, 2.0) == pytest.approx(1 / (np.pi * 4.0))


def test_bridge_weight_is_density(cauchy):
    assert bridge_weight(cauchy, 0.0, 1.0, 0.0, 2.0) == pytest.approx(cauchy_1d(2.0, 1.0))


def test_increment_shapes(rng):
    assert sample_increment(StableParams(1.2), 0.5, rng, 7).shape == (7,)
    assert sample_increment(StableParams(1.2, 3), 0.5, rng, 7).shape == (7, 3)


def test_increment_scaling_cauchy(rng):
    x = sample_increment(StableParams(1.0), 4.0, rng, 200_000)
    # median of |X| is t for the Cauchy law
    assert np.median(np.abs(x)) == pytest.approx(4.0, rel=0.02)


def test_sample_paths_start(rng):
    times = np.linspace(0, 1, 11)
    pos = sample_paths(StableParams(1.5), times, rng, 5, x0=2.0)
    assert pos.shape == (5, 11)
    assert np.all(pos[:, 0] == 2.0)


def test_bridge_endpoints_pinned(rng):
    p = StableParams(0.8)
    full, pos, diag = sample_bridges(p, -1.0, 0.0, 3.0, 2.0, np.linspace(0.2, 1.8, 9), rng, 50,
                                     return_diagnostics=True)
    assert np.all(pos[:, 0] == -1.0) and np.all(pos[:, -1] == 3.0)
    assert 0 < diag["min_acceptance"] <= 1
    sk = sample_bridge_skeleton(p, 0.0, 0.0, 0.0, 1.0, [0.5], rng)
    assert isinstance(sk, PathSkeleton) and len(sk) == 3


def test_bridge_midpoint_law(rng):
    """Cauchy bridge from 0 to 0 on [0, 2]: midpoint density p(1,z)^2/p(2,0)."""
    p = StableParams(1.0)
    _, pos = sample_bridges(p, 0.0, 0.0, 0.0, 2.0, [1.0], rng, 40_000)
    z = pos[:, 1]
    # P(|Z| < 1) under density (1/pi^2)(1+z^2)^{-2} / (1/(2 pi)) = (2/pi)(1+z^2)^{-2}
    exact = (2 / np.pi) * (0.5 + np.pi / 4)
    assert np.mean(np.abs(z) < 1) == pytest.approx(exact, abs=0.01)


def test_bridge_times_must_increase(rng):
    with pytest.raises(PreconditionError):
        sample_bridges(StableParams(1.0), 0, 0, 0, 1, [0.6, 0.4], rng, 3)


def test_mc_estimate():
    est = MCEstimate.from_samples([1.0, 2.0, 3.0], seed=1)
    assert est.mean == 2.0 and est.n_samples == 3
    assert est.stderr == pytest.approx(1 / np.sqrt(3))
    assert est.zscore(2.0) == 0.0
    assert est.as_dict()["seed"] == 1
    with pytest.raises(ValueError):
        MCEstimate(0.0, -1.0, 1)


def test_path_skeleton_validation():
    with pytest.raises(ValueError):
        PathSkeleton([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        PathSkeleton([0.0, 1.0], [1.0])
