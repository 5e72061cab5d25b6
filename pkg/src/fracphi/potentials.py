"""Catalog of Kato-decomposable potentials and a numerical Kato-class test."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from math import gamma, pi
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ConfigError, PreconditionError
from .stable import StableParams, riesz_constant, transition_density

GROWTH_KINDS = ("bounded", "logarithmic", "polynomial", "exponential", "decaying")
DEFAULT_EPS_GRID = (0.5, 0.25, 0.1, 0.05, 0.01)
DEFAULT_KATO_THRESHOLD = 1e-3
DEFAULT_KATO_MIN_SLOPE = 0.2


def _norm(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1:
        return np.abs(x)
    return np.sqrt(np.sum(x * x, axis=-1))


@dataclass(frozen=True)
class Singularity:
    location: float | tuple
    beta: float
    sign: int


@dataclass(frozen=True)
class PotentialSpec:
    """A potential ``V = V_+ - V_-`` with metadata.

    Attributes
    ----------
    name : catalog name, used in configs and output headers.
    func : vectorized evaluator on points (``d == 1``: any shape; else trailing ``d``).
    d : dimension.
    singularities : local singular points ``(location, beta, sign)`` with
        behaviour ``sign * |x - location|^{-beta}``.
    growth : ``(kind, parameter)`` with kind in ``GROWTH_KINDS``.
    negative_support : radius bounding ``supp V_-`` (``inf`` if unbounded).
    params : construction parameters.
    metadata : free-form flags, e.g. Kato warnings or the comparability constant.
    """

    name: str
    func: Callable = field(repr=False, compare=False)
    d: int = 1
    singularities: tuple = ()
    growth: tuple = ("bounded", None)
    negative_support: float = 0.0
    params: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.growth[0] not in GROWTH_KINDS:
            raise ConfigError(f"unknown growth class {self.growth[0]!r}")

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.func(np.asarray(x, dtype=float))
        return float(v) if np.ndim(v) == 0 else v

    def positive_part(self, x):
        return np.maximum(self.evaluate(x), 0.0)

    def negative_part(self, x):
        return np.maximum(-np.asarray(self.evaluate(x)), 0.0)

    @property
    def is_nonnegative(self):
        return self.negative_support == 0.0

    def shifted(self, c):
        """``V + c``. Growth metadata is kept; the negative part may change."""
        f = self.func
        neg = self.negative_support if c >= 0 else np.inf
        return replace(self, name=f"{self.name}+{c:g}", func=lambda x: f(x) + c,
                       negative_support=neg, params={**self.params, "shift": c})

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self.shifted(float(other))
        return add(self, other)


def add(v1: PotentialSpec, v2: PotentialSpec) -> PotentialSpec:
    """Pointwise sum. Growth is taken from the faster-growing summand."""
    if v1.d != v2.d:
        raise ConfigError("cannot add potentials of different dimension")
    order = {k: i for i, k in enumerate(("decaying", "bounded", "logarithmic",
                                         "polynomial", "exponential"))}
    growth = max(v1.growth, v2.growth, key=lambda g: (order[g[0]], g[1] or 0))
    f1, f2 = v1.func, v2.func
    return PotentialSpec(
        name=f"{v1.name}+{v2.name}",
        func=lambda x: f1(x) + f2(x),
        d=v1.d,
        singularities=v1.singularities + v2.singularities,
        growth=growth,
        negative_support=max(v1.negative_support, v2.negative_support),
        params={"terms": [v1.params | {"name": v1.name}, v2.params | {"name": v2.name}]},
    )


# ---------------------------------------------------------------------------
# Catalog
# ---------------------------------------------------------------------------


def _power(delta=2.0, c=1.0, d=1):
    delta, c = float(delta), float(c)
    if delta <= 0:
        raise ConfigError("power(delta) needs delta > 0")
    return PotentialSpec("power", lambda x: c * _norm(x, d) ** delta, d,
                         growth=("polynomial", delta), params={"delta": delta, "c": c})


def _power_log(beta=1.0, d=1):
    beta = float(beta)
    return PotentialSpec(
        "power_log", lambda x: _norm(x, d) ** beta * np.log1p(_norm(x, d)), d,
        growth=("polynomial", beta), params={"beta": beta},
    )


def _exponential(beta=1.0, d=1):
    beta = float(beta)
    return PotentialSpec("exponential", lambda x: np.exp(beta * _norm(x, d)), d,
                         growth=("exponential", beta), params={"beta": beta})


def _singular_sum(terms, d=1):
    """``sum_i sign_i |x - x_i|^{-beta_i}``; terms are ``(sign, beta, location)``."""
    parsed = []
    for term in terms:
        if isinstance(term, dict):
            sign, beta, loc = term["sign"], term["beta"], term.get("location", 0.0)
        else:
            sign, beta, loc = term
        if sign not in (-1, 1):
            raise ConfigError("singular_sum signs must be +1 or -1")
        parsed.append(Singularity(loc if d == 1 else tuple(loc), float(beta), int(sign)))

    def f(x):
        out = np.zeros(np.shape(x) if d == 1 else np.shape(x)[:-1])
        for s in parsed:
            out = out + s.sign * _norm(x - np.asarray(s.location, float), d) ** (-s.beta)
        return out

    neg = np.inf if any(s.sign < 0 for s in parsed) else 0.0
    meta = {}
    bad = [s for s in parsed if s.beta >= min(d, 2)]
    if bad:
        meta["kato_warning"] = "some exponents are not locally integrable against the kernel"
    return PotentialSpec("singular_sum", f, d, singularities=tuple(parsed),
                         growth=("decaying", None), negative_support=neg,
                         params={"terms": [(s.sign, s.beta, s.location) for s in parsed]},
                         metadata=meta)


def _well(a=1.0, b=1.0, d=1):
    a, b = float(a), float(b)
    if a < 0 or b <= 0:
        raise ConfigError("well(a, b) needs a >= 0 and b > 0")
    return PotentialSpec("well", lambda x: np.where(_norm(x, d) <= b, -a, 0.0), d,
                         growth=("decaying", None), negative_support=b if a > 0 else 0.0,
                         params={"a": a, "b": b})


def _log_plus(c=1.0, d=1):
    c = float(c)

    def f(x):
        r = _norm(x, d)
        return np.where(r > 1.0, c * np.log(np.maximum(r, 1.0)), 0.0)

    return PotentialSpec("log_plus", f, d, growth=("logarithmic", c), params={"c": c})


def _well_plus_log(alpha=1.0, d=1):
    alpha = float(alpha)

    def f(x):
        r = _norm(x, d)
        inner = -(np.maximum(r, 1e-300) ** (-alpha / 2))
        return np.where(r > 1.0, np.log(np.maximum(r, 1.0)), inner)

    return PotentialSpec("well_plus_log", f, d,
                         singularities=(Singularity(0.0 if d == 1 else (0.0,) * d, alpha / 2, -1),),
                         growth=("logarithmic", 1.0), negative_support=1.0,
                         params={"alpha": alpha})


def _sublog(d=1):
    e2 = np.exp(2.0)
    inside = 2.0 / np.log(2.0)

    def f(x):
        r = np.maximum(_norm(x, d), e2)
        return np.where(_norm(x, d) > e2, np.log(r) / np.log(np.log(r)), inside)

    return PotentialSpec("sublog", f, d, growth=("logarithmic", 0.0), params={})


def _constant(c=0.0, d=1):
    c = float(c)

    def f(x):
        return np.full(np.shape(x) if d == 1 else np.shape(x)[:-1], c)

    return PotentialSpec("constant", f, d, growth=("bounded", None),
                         negative_support=np.inf if c < 0 else 0.0, params={"c": c})


def _zero(d=1):
    spec = _constant(0.0, d)
    return replace(spec, name="zero", params={})


def _tabulated(grid, values, d=1):
    if d != 1:
        raise ConfigError("tabulated potentials are one-dimensional")
    grid = np.asarray(grid, float)
    values = np.asarray(values, float)
    if grid.ndim != 1 or grid.shape != values.shape or np.any(np.diff(grid) <= 0):
        raise ConfigError("tabulated potential needs increasing grid and matching values")
    neg = float(np.max(np.abs(grid[values < 0]))) if np.any(values < 0) else 0.0
    if values[0] < 0 or values[-1] < 0:
        neg = np.inf
    return PotentialSpec("tabulated", lambda x: np.interp(x, grid, values), 1,
                         growth=("bounded", None), negative_support=neg,
                         params={"n": len(grid)})


CATALOG = {
    "power": _power,
    "power_log": _power_log,
    "exponential": _exponential,
    "singular_sum": _singular_sum,
    "well": _well,
    "log_plus": _log_plus,
    "well_plus_log": _well_plus_log,
    "sublog": _sublog,
    "constant": _constant,
    "zero": _zero,
    "tabulated": _tabulated,
}


def catalog(name, **parameters) -> PotentialSpec:
    """Build a catalog potential by name.

    Examples
    --------
    >>> catalog("power", delta=2)(3.0)
    9.0
    >>> catalog("well", a=1, b=1)(0.5)
    -1.0
    """
    if name not in CATALOG:
        raise ConfigError(f"unknown potential {name!r}; choose from {sorted(CATALOG)}")
    try:
        return CATALOG[name](**parameters)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for potential {name!r}: {exc}") from None


def from_config(section) -> PotentialSpec:
    """Build from ``{"name": ..., **params}`` or a list of such dicts (summed)."""
    if isinstance(section, (list, tuple)):
        specs = [from_config(s) for s in section]
        out = specs[0]
        for s in specs[1:]:
            out = add(out, s)
        return out
    if isinstance(section, str):
        return catalog(section)
    section = dict(section)
    name = section.pop("name", None)
    if name is None:
        raise ConfigError("potential section needs a name")
    shift = section.pop("shift", None)
    spec = catalog(name, **section)
    return spec.shifted(float(shift)) if shift else spec


# ---------------------------------------------------------------------------
# Growth diagnostic
# ---------------------------------------------------------------------------


def growth_check(V: PotentialSpec, R=None, tol=0.15):
    """Check ``V.growth`` against values on ``|x| in [R, 10R]``.

    Returns ``(ok, measured)`` where ``measured`` is the local exponent that
    the growth class predicts (log-log slope, ``V/log|x|``, ``log V/|x|``,
    or ``sup |V|``).
    """
    kind, par = V.growth
    if R is None:
        R = 20.0 / par if kind == "exponential" else 1e4
    r = np.geomspace(R, 10 * R, 9)
    pts = r if V.d == 1 else np.stack([r] + [np.zeros_like(r)] * (V.d - 1), axis=-1)
    v = np.asarray(V.evaluate(pts), float)
    if kind == "polynomial":
        measured = float(np.polyfit(np.log(r), np.log(v), 1)[0])
        return abs(measured - par) <= tol, measured
    if kind == "exponential":
        measured = float(np.polyfit(r, np.log(v), 1)[0])
        return abs(measured - par) <= tol * par, measured
    if kind == "logarithmic":
        measured = float(np.mean(v / np.log(r)))
        if par == 0:
            ratios = v / np.log(r)
            return bool(np.all(np.diff(ratios) < 0) and measured < 0.5), measured
        return abs(measured - par) <= tol * par, measured
    measured = float(np.max(np.abs(v)))
    if kind == "decaying":
        return measured <= 1e-2, measured
    return np.isfinite(measured), measured


# ---------------------------------------------------------------------------
# Comparability on unit balls
# ---------------------------------------------------------------------------


def comparability_constant(V: PotentialSpec, R, R_max=None, n_centers=201, n_ball=65):
    """Numerical ``sup_{|x| >= R} sup_{z, y in B(x,1)} V(z)/V(y)`` (d = 1).

    Raises
    ------
    PreconditionError
        If ``V < 1`` somewhere on a sampled ball; the witness is the center.
    """
    if V.d != 1:
        raise ConfigError("comparability_constant is implemented for d = 1")
    R = float(R)
    R_max = 10.0 * R if R_max is None else float(R_max)
    centers = np.linspace(R, R_max, n_centers)
    centers = np.concatenate([-centers[::-1], centers])
    offsets = np.linspace(-1.0, 1.0, n_ball)
    vals = np.asarray(V.evaluate(centers[:, None] + offsets[None, :]), float)
    low = vals.min(axis=1)
    if np.any(low < 1.0):
        i = int(np.argmin(low))
        raise PreconditionError("V < 1 on a unit ball in the region", witness=float(centers[i]))
    return float(np.max(vals.max(axis=1) / low))


# ---------------------------------------------------------------------------
# Kato class surrogate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KatoReport:
    epsilon_grid: tuple
    sup_integrals: tuple
    verdict: str
    argmax: tuple = ()
    slope: float = float("nan")
    diagnostics: dict = field(default_factory=dict, compare=False)


def kernel_abs(params: StableParams, y):
    """``|Pi_alpha(y)|`` in d = 1, using the compensated kernel when alpha >= 1."""
    y = np.abs(np.asarray(y, float))
    a = params.alpha
    if a < 1:
        return riesz_constant(1, a) * y ** (a - 1.0)
    if a == 1:
        return np.abs(np.log(y)) / pi
    return np.abs(y ** (a - 1.0) / (2.0 * gamma(a) * np.cos(pi * a / 2)))


class _Divergent(Exception):
    def __init__(self, point):
        self.point = point


def _shell_integral(g, a, b, singular_at_a, n_shells=11):
    """``int_a^b g`` with geometric shells toward a singular endpoint.

    Shell contributions of an integrable power-type singularity decay
    geometrically. If the last three do not, the integral is declared
    divergent.
    """
    length = b - a
    if length <= 0:
        return 0.0
    if not singular_at_a:
        return integrate.quad(g, a, b, limit=200, epsabs=1e-13, epsrel=1e-10)[0]
    contrib = []
    for k in range(n_shells):
        lo, hi = length * 10.0 ** (-(k + 1)), length * 10.0 ** (-k)
        val = integrate.quad(lambda s: g(a + s), lo, hi, limit=200,
                             epsabs=1e-15, epsrel=1e-10)[0]
        contrib.append(abs(val))
    c = np.array(contrib)
    tail = c[-4:]
    if tail[0] > 0 and np.all(tail[1:] >= 0.9 * tail[:-1]):
        raise _Divergent(a)
    q = tail[-1] / tail[-2] if tail[-2] > 0 else 0.0
    return float(np.sum(c) + (tail[-1] * q / (1.0 - q) if q < 1 else 0.0))


def _local_integral(V, params, x, eps):
    """``int_{|u|<eps} |V(x+u)| |Pi(u)| du`` split at all singular points."""
    pts = {-eps, eps}
    sing = set()
    if params.alpha <= 1:
        pts.add(0.0)
        sing.add(0.0)
    for s in V.singularities:
        off = float(s.location) - x
        for p in (-eps, 0.0, eps):
            if abs(off - p) < 1e-9 * eps:
                off = p
        if -eps <= off <= eps:
            pts.add(off)
            sing.add(off)
    pts = sorted(pts)

    def g(u):
        return abs(V.evaluate(x + u)) * kernel_abs(params, u)

    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        m = 0.5 * (a + b)
        total += _shell_integral(g, a, m, a in sing)
        # reflect so the singular end of [m, b] sits at the left
        total += _shell_integral(lambda u: g(-u), -b, -m, b in sing)
    return total


def kato_check(V: PotentialSpec, params: StableParams, epsilon_grid=DEFAULT_EPS_GRID,
               x_grid=None, threshold=DEFAULT_KATO_THRESHOLD,
               min_slope=DEFAULT_KATO_MIN_SLOPE) -> KatoReport:
    """Numerical surrogate of the spatial Kato condition in d = 1.

    For each ``eps`` the supremum over ``x_grid`` of the local integral of
    ``|V| |Pi_alpha|`` is computed. The verdict is ``kato`` when the sequence
    is monotone decreasing and either reaches ``threshold`` or decays with
    log-log slope at least ``min_slope``. Unbounded growth at infinity turns
    ``kato`` into ``kato_local_only``. A divergent local integral gives
    ``not_kato`` with the offending point.
    """
    if V.d != 1 or params.d != 1:
        raise PreconditionError("kato_check is implemented for d = 1")
    eps = tuple(float(e) for e in epsilon_grid)
    if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
        raise ConfigError("epsilon_grid must be strictly decreasing")
    if x_grid is None:
        locs = [float(s.location) for s in V.singularities]
        x_grid = np.unique(np.concatenate([np.linspace(-2, 2, 41), locs,
                                           [l + o for l in locs for o in (-0.3, 0.3)]]))
    x_grid = np.asarray(x_grid, float)
    sups, argmax = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            # the class sits inside L^1_loc; for alpha > 1 the compensated
            # kernel vanishes at 0 and cannot detect this by itself
            for s in V.singularities:
                loc = float(s.location)
                for side in (1.0, -1.0):
                    _shell_integral(lambda u: abs(V.evaluate(loc + side * u)), 0.0, eps[0], True)
            for e in eps:
                vals = [_local_integral(V, params, float(x), e) for x in x_grid]
                i = int(np.argmax(vals))
                sups.append(float(vals[i]))
                argmax.append(float(x_grid[i]))
        except _Divergent as div:
            return KatoReport(eps, tuple(sups), "not_kato", tuple(argmax),
                              diagnostics={"divergent_at": float(div.point)})
    s = np.array(sups)
    if not np.all(np.isfinite(s)):
        return KatoReport(eps, tuple(sups), "inconclusive", tuple(argmax))
    slope = float(np.polyfit(np.log(eps), np.log(np.maximum(s, 1e-300)), 1)[0]) \
        if np.all(s > 0) else np.inf
    monotone = bool(np.all(np.diff(s) <= 1e-14 * s.max()))
    small = s[-1] < threshold
    if monotone and (small or slope >= min_slope):
        verdict = "kato"
        if V.growth[0] in ("polynomial", "exponential") or (
                V.growth[0] == "logarithmic" and (V.growth[1] or 0) > 0):
            verdict = "kato_local_only"
    else:
        verdict = "inconclusive"
    return KatoReport(eps, tuple(sups), verdict, tuple(argmax), slope,
                      {"below_threshold": bool(small), "monotone": monotone})


def kato_semigroup_check(V: PotentialSpec, params: StableParams, t_grid=(0.1, 0.03, 0.01),
                         x_grid=None, window=20.0):
    """``sup_x int_0^t P_s|V|(x) ds`` for bounded, compactly supported ``V`` (d = 1).

    Used as a cross-check of the spatial criterion on the well potential.
    """
    if V.d != 1:
        raise PreconditionError("kato_semigroup_check is implemented for d = 1")
    if x_grid is None:
        x_grid = np.linspace(-3, 3, 25)
    y = np.linspace(-window, window, 8001)
    hy = y[1] - y[0]
    absv = np.abs(V.evaluate(y))
    nodes, weights = np.polynomial.legendre.leggauss(24)
    out = []
    for t in t_grid:
        # s = t u^2 removes the s^{-1/alpha} scale singularity at s = 0
        u = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        s = t * u * u
        vals = []
        for x in x_grid:
            ps = np.array([np.sum(transition_density(params, si, y - x) * absv) * hy for si in s])
            vals.append(float(np.sum(w * ps * 2 * t * u)))
        out.append(max(vals))
    return tuple(out)
