import numpy as np
import pytest

from fracphi import ConfigError, PreconditionError
from fracphi.errors import MassBlowupError
from fracphi.feynman_kac import (
    FKConfig,
    exit_functionals,
    fk_expectation,
    fk_kernel_bridge,
    greenop_bounds,
    survival_growth,
    tail_integral,
)
from fracphi.potentials import catalog
from fracphi.stable import StableParams, transition_density

P1 = StableParams(1.0)


def small(**kw):
    base = dict(n_paths=2000, dt=0.05, seed=3)
    base.update(kw)
    return FKConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        FKConfig(dt=0.0)
    with pytest.raises(ConfigError):
        FKConfig(n_paths=10)
    with pytest.raises(ConfigError):
        FKConfig(integral_rule="simpson")
    assert small().with_(dt=0.1).dt == 0.1


def test_free_kernel_is_density():
    est = fk_kernel_bridge(0.0, 1.5, 2.0, catalog("zero"), P1, small())
    assert est.mean == pytest.approx(transition_density(P1, 2.0, 1.5), rel=1e-12)
    assert est.stderr == pytest.approx(0.0, abs=1e-15)


def test_constant_potential_kernel():
    c = 0.7
    est = fk_kernel_bridge(0.0, 0.0, 1.0, catalog("constant", c=c), P1, small())
    assert est.mean == pytest.approx(np.exp(-c) / np.pi, rel=1e-12)


def test_constant_potential_expectation():
    est = fk_expectation(0.3, 2.0, lambda x: np.ones_like(x), catalog("constant", c=0.5), P1, small())
    assert est.mean == pytest.approx(np.exp(-1.0), rel=1e-12)


def test_free_expectation_probability():
    est = fk_expectation(0.0, 1.0, lambda x: (np.abs(x) < 1).astype(float), catalog("zero"), P1,
                         small(n_paths=20000))
    assert abs(est.mean - 0.5) < 4 * est.stderr


def test_oscillator_kernel_matches_spectral(oscillator_full):
    from fracphi.spectral import semigroup_kernel

    est = fk_kernel_bridge(0.0, 0.0, 1.0, catalog("power", delta=2), P1,
                           small(n_paths=4000, dt=0.02))
    ref = semigroup_kernel(oscillator_full, 1.0, 0.0, 0.0)
    assert est.zscore(ref) < 4


def test_reproducible_and_thread_invariant():
    V = catalog("power", delta=2)
    a = fk_kernel_bridge(0.0, 0.5, 1.0, V, P1, small(chunk_size=500), return_samples=True)[1]
    b = fk_kernel_bridge(0.0, 0.5, 1.0, V, P1, small(chunk_size=500), return_samples=True)[1]
    c = fk_kernel_bridge(0.0, 0.5, 1.0, V, P1, small(chunk_size=500, threads=3),
                         return_samples=True)[1]
    assert np.array_equal(a, b) and np.array_equal(a, c)
    d = fk_kernel_bridge(0.0, 0.5, 1.0, V, P1, small(chunk_size=500, seed=4), return_samples=True)[1]
    assert not np.array_equal(a, d)


def test_left_rule_available():
    V = catalog("power", delta=2)
    a = fk_expectation(0.0, 1.0, lambda x: np.ones_like(x), V, P1, small(integral_rule="left"))
    b = fk_expectation(0.0, 1.0, lambda x: np.ones_like(x), V, P1, small())
    assert a.mean != b.mean
    assert abs(a.mean - b.mean) < 0.05


def test_blowup_guard():
    with pytest.raises(MassBlowupError):
        fk_expectation(0.0, 1.0, lambda x: np.ones_like(x), catalog("constant", c=-800.0), P1,
                       small())


def test_bad_time():
    with pytest.raises(PreconditionError):
        fk_kernel_bridge(0.0, 0.0, 0.0, catalog("zero"), P1, small())


def test_survival_growth_constant():
    res = survival_growth(catalog("constant", c=-0.5), P1, [1.0, 2.0, 3.0], [0.0, 1.0], small())
    assert res["C1"] == pytest.approx(0.5, abs=1e-10)
    assert res["exponential"]


def test_exit_free_motion():
    u, v = exit_functionals(0.0, 1.0, catalog("zero"), 0.0, P1, small(n_paths=4000, dt=0.01))
    assert u.mean == 1.0
    # E^0 tau for the unit ball, alpha = 1, d = 1 equals 1
    assert v.mean == pytest.approx(1.0, abs=max(4 * v.stderr, 0.03))
    assert u.extra["censored"] == 0.0


def test_exit_greenop_sandwich():
    V = catalog("power", delta=2)
    u, v = exit_functionals(3.0, 1.0, V, 3.0, P1, small(n_paths=2000, dt=0.01))
    lo, hi = greenop_bounds(u.extra["zeta"], u.extra["beta"], u.extra["p_tau_gt_1"])
    assert lo <= v.mean <= hi
    assert 0 < u.mean < 1


def test_exit_start_outside():
    with pytest.raises(PreconditionError):
        exit_functionals(0.0, 1.0, catalog("zero"), 2.0, P1, small())


def test_greenop_bounds_validation():
    with pytest.raises(PreconditionError):
        greenop_bounds(2.0, 1.0, 0.5)


def test_tail_integral_oracle():
    res = tail_integral(0.0, 10.0, P1)
    assert res["value"] == pytest.approx(0.8, rel=1e-8)
    assert res["exponent"] == 1.0
    assert res["within"]
    with pytest.raises(PreconditionError):
        tail_integral(1.0, 10.0, P1)
