import numpy as np
import pytest

from fracphi import ConfigError, PreconditionError
from fracphi.potentials import (
    CATALOG,
    add,
    catalog,
    comparability_constant,
    from_config,
    growth_check,
    kato_check,
    kato_semigroup_check,
)
from fracphi.stable import StableParams


def test_power_values():
    V = catalog("power", delta=2, c=3.0)
    assert np.allclose(V(np.array([0.0, 2.0, -2.0])), [0.0, 12.0, 12.0])
    assert V.growth[0] == "polynomial"
    assert V.is_nonnegative


def test_well_values():
    V = catalog("well", a=2.0, b=1.5)
    assert np.allclose(V(np.array([0.0, 1.5, 1.6, -3.0])), [-2.0, -2.0, 0.0, 0.0])
    assert V.negative_part(np.array([0.0]))[0] == 2.0
    assert V.positive_part(np.array([0.0]))[0] == 0.0


def test_well_plus_log_ratio():
    V = catalog("well_plus_log")
    x = np.array([10.0, 1e3, 1e5])
    assert np.allclose(V(x) / np.log(x), 1.0)


def test_shift_and_add():
    V = catalog("power", delta=2)
    W = V.shifted(5.0)
    x = np.linspace(-3, 3, 7)
    assert np.allclose(W(x), V(x) + 5.0)
    S = add(V, catalog("well", a=1, b=1))
    assert np.allclose(S(x), V(x) - (np.abs(x) <= 1))
    assert np.allclose((V + catalog("constant", c=1.0))(x), V(x) + 1)


def test_every_catalog_entry_builds():
    for name in CATALOG:
        if name in ("tabulated", "singular_sum"):
            continue
        V = catalog(name)
        assert np.all(np.isfinite(V(np.array([0.5, 3.0, 40.0]))))


def test_singular_sum_and_kato_warning():
    V = catalog("singular_sum", terms=[(1, 0.5, 0.0), (-1, 0.3, 2.0)])
    assert len(V.singularities) == 2
    assert not V.metadata.get("kato_warning")
    W = catalog("singular_sum", terms=[{"sign": 1, "beta": 1.2, "location": 0.0}])
    assert W.metadata.get("kato_warning")


def test_tabulated_interpolates():
    V = catalog("tabulated", grid=[0.0, 1.0, 2.0], values=[0.0, 2.0, 0.0])
    assert V(np.array([0.5]))[0] == pytest.approx(1.0)


def test_unknown_name_and_bad_params():
    with pytest.raises(ConfigError):
        catalog("nope")
    with pytest.raises(ConfigError):
        catalog("zero", delta=2)


def test_from_config_forms():
    V = from_config({"name": "power", "delta": 2, "shift": 1.0})
    assert V(np.array([1.0]))[0] == pytest.approx(2.0)
    S = from_config([{"name": "power", "delta": 2}, {"name": "well", "a": 5, "b": 1}])
    assert S(np.array([0.0]))[0] == pytest.approx(-5.0)
    assert from_config("zero")(np.array([3.0]))[0] == 0.0
    with pytest.raises(ConfigError):
        from_config({"delta": 2})


@pytest.mark.parametrize("name,kw", [("power", {"delta": 2}), ("power", {"delta": 0.5}),
                                     ("power_log", {"beta": 1}), ("exponential", {"beta": 1}),
                                     ("log_plus", {}), ("sublog", {}), ("constant", {"c": 2})])
def test_growth_check_consistent(name, kw):
    ok, measured = growth_check(catalog(name, **kw))
    assert ok, measured


def test_comparability_oracles():
    assert comparability_constant(catalog("power", delta=2), 2.0) == pytest.approx(9.0, rel=1e-9)
    assert comparability_constant(catalog("exponential", beta=1), 2.0) == pytest.approx(
        np.e**2, rel=1e-9)
    with pytest.raises(PreconditionError):
        comparability_constant(catalog("power", delta=2), 0.5)


def test_kato_verdicts():
    p1 = StableParams(1.0)
    assert kato_check(catalog("singular_sum", terms=[(1, 0.5, 0.0)]), p1).verdict == "kato"
    assert kato_check(catalog("singular_sum", terms=[(1, 1.2, 0.0)]), p1).verdict == "not_kato"
    assert kato_check(catalog("well"), p1).verdict == "kato"
    assert kato_check(catalog("constant", c=1.0), p1).verdict == "kato"
    assert kato_check(catalog("power", delta=2), p1).verdict == "kato_local_only"


def test_kato_l1loc_for_alpha_above_one():
    rep = kato_check(catalog("singular_sum", terms=[(1, 1.2, 0.0)]), StableParams(1.5))
    assert rep.verdict == "not_kato"


def test_kato_report_fields():
    rep = kato_check(catalog("well"), StableParams(1.0))
    assert len(rep.sup_integrals) == len(rep.epsilon_grid)
    assert all(v >= 0 for v in rep.sup_integrals)
    assert list(rep.sup_integrals) == sorted(rep.sup_integrals, reverse=True)


def test_kato_semigroup_decreases():
    vals = kato_semigroup_check(catalog("well"), StableParams(1.0))
    assert len(vals) == 3
    assert np.all(np.diff(vals) < 0)
    # t = 0.01 should land near the spatial integral at eps = 0.01 in scale
    assert 0.0 < vals[-1] < 0.1
