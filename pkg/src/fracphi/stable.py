"""Rotationally invariant alpha-stable processes: samplers, densities, kernels.

The process has characteristic function ``exp(-t |xi|^alpha)``. Densities are
evaluated from a radial table of ``p(1, r)`` per ``(alpha, d)`` and reduced to
general ``(t, x)`` by scaling, ``p(t, x) = t^{-d/alpha} p(1, |x| t^{-1/alpha})``.
"""

from __future__ import annotations

import hashlib
import os
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import BridgeSamplingError, ConfigError, NumericalError, PreconditionError

TABLE_FORMAT_VERSION = 2
DEFAULT_TABLE_STEP = 0.01
DEFAULT_SWITCH_RADIUS = 100.0
DEFAULT_TAIL_TERMS = 12
CONVERGENT_TAIL_TERMS = 60


# ---------------------------------------------------------------------------
# Core types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StableParams:
    """Stability index and dimension of the process."""

    alpha: float
    d: int = 1

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 2.0) or not np.isfinite(a):
            raise ConfigError(f"alpha must lie in (0, 2), got {self.alpha!r}")
        if int(self.d) != self.d or int(self.d) < 1:
            raise ConfigError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "d", int(self.d))

    def const(self, gam):
        """The constant ``A_{d,gamma}`` used by the Levy and Riesz kernels."""
        return riesz_constant(self.d, gam)


def riesz_constant(d, gam):
    """``2^{-gam} pi^{-d/2} Gamma((d-gam)/2) / |Gamma(gam/2)|``."""
    return 2.0 ** (-gam) * pi ** (-d / 2) * gamma((d - gam) / 2) / abs(gamma(gam / 2))


@dataclass(frozen=True)
class PathSkeleton:
    """Positions of a path on a finite, strictly increasing time grid."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float)
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("times must be a non-empty 1-d array")
        if len(pos) != len(times):
            raise ValueError("times and positions must have equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    stderr: float
    n_samples: int
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    @classmethod
    def from_samples(cls, values, **extra):
        v = np.asarray(values, dtype=float).ravel()
        n = v.size
        sd = float(np.std(v, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(v)), float(sd / np.sqrt(n)), n, dict(extra))

    def zscore(self, value, other_stderr=0.0):
        s = np.hypot(self.stderr, other_stderr)
        if s == 0:
            return 0.0 if value == self.mean else np.inf
        return abs(self.mean - value) / s

    def as_dict(self):
        out = {"mean": self.mean, "stderr": self.stderr, "n": self.n_samples}
        out.update(self.extra)
        return out


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise PreconditionError("time must be positive", witness=float(np.min(t)))
    return t


def _radius(params, x):
    x = np.asarray(x, dtype=float)
    if params.d == 1:
        return np.abs(x)
    if x.shape[-1] != params.d:
        raise ConfigError(f"points must have trailing dimension {params.d}")
    return np.sqrt(np.sum(x * x, axis=-1))


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _symmetric_stable_1d(alpha, rng, size):
    """Chambers-Mallows-Stuck variates with ``E exp(i xi X) = exp(-|xi|^alpha)``."""
    u = rng.uniform(-pi / 2, pi / 2, size)
    if alpha == 1.0:
        return np.tan(u)
    w = rng.standard_exponential(size)
    return (
        np.sin(alpha * u)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    )


def _positive_stable(beta, rng, size):
    """Kanter variates with Laplace transform ``exp(-lambda^beta)``, 0 < beta < 1."""
    u = rng.uniform(0.0, pi, size)
    w = rng.standard_exponential(size)
    a = (
        np.sin(beta * u) ** (beta / (1.0 - beta))
        * np.sin((1.0 - beta) * u)
        / np.sin(u) ** (1.0 / (1.0 - beta))
    )
    return (a / w) ** ((1.0 - beta) / beta)


def sample_increment(params: StableParams, t, rng, size=None):
    """Draw increments ``X_t - X_0``.

    Parameters
    ----------
    params : StableParams
    t : float
        Positive time.
    rng : numpy.random.Generator
    size : int or tuple, optional
        Sample shape. For ``d == 1`` the result has exactly this shape; for
        ``d >= 2`` a trailing axis of length ``d`` is appended.

    Notes
    -----
    In ``d >= 2`` the variate is ``sqrt(2 A) G`` with ``G`` standard normal and
    ``A`` positive ``alpha/2``-stable, which is rotationally invariant.
    """
    t = float(_check_t(t))
    shape = () if size is None else (size if isinstance(size, tuple) else (int(size),))
    scale = t ** (1.0 / params.alpha)
    if params.d == 1:
        x = _symmetric_stable_1d(params.alpha, rng, shape)
    else:
        a = _positive_stable(params.alpha / 2.0, rng, shape)
        g = rng.standard_normal(shape + (params.d,))
        x = np.sqrt(2.0 * a)[..., None] * g
    return scale * x


def sample_paths(params: StableParams, times, rng, n_paths, x0=0.0):
    """Free paths started at ``x0`` on ``times`` (``times[0]`` carries ``x0``)."""
    times = np.asarray(times, dtype=float)
    dts = np.diff(times)
    if np.any(dts <= 0):
        raise PreconditionError("times must be strictly increasing")
    shape = (n_paths, len(times)) + ((params.d,) if params.d > 1 else ())
    out = np.empty(shape)
    out[:, 0] = x0
    for j, dt in enumerate(dts):
        out[:, j + 1] = out[:, j] + sample_increment(params, dt, rng, n_paths)
    return out


# ---------------------------------------------------------------------------
# Density of p(1, r)
# ---------------------------------------------------------------------------


def _cutoff(alpha, power=2):
    """Frequency beyond which ``xi^power exp(-xi^alpha)`` is negligible."""
    x = 50.0 ** (1.0 / alpha)
    for _ in range(30):
        x = (50.0 + power * np.log(max(x, 1.0))) ** (1.0 / alpha)
    return x


def _fourier_moment(alpha, r, k, kind):
    """``int_0^Xi xi^k trig(xi r) exp(-xi^alpha) dxi`` by QAWO on a finite range."""
    xi = _cutoff(alpha, k + 2)
    f = (lambda s: s**k * np.exp(-(s**alpha))) if k else (lambda s: np.exp(-(s**alpha)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if r == 0.0:
            if kind == "sin":
                return 0.0
            return integrate.quad(f, 0.0, xi, epsabs=0.0, epsrel=1e-13, limit=400)[0]
        val, err = integrate.quad(
            f, 0.0, xi, weight=kind, wvar=r, epsabs=1e-19, epsrel=1e-12, limit=4000
        )
    if not np.isfinite(val):
        raise NumericalError("oscillatory quadrature failed", {"alpha": alpha, "r": r})
    return val


def density_1d_direct(alpha, r):
    """``p(1, r)`` in one dimension by direct quadrature (slow, accurate)."""
    if r == 0.0:
        return gamma(1.0 + 1.0 / alpha) / pi
    return _fourier_moment(alpha, abs(r), 0, "cos") / pi


def _series_coefficients(alpha, d, n_terms):
    k = np.arange(1, n_terms + 1, dtype=float)
    c = (
        (-1.0) ** (k + 1)
        / special.factorial(k)
        * special.gamma(alpha * k / 2 + 1)
        * special.gamma((alpha * k + d) / 2)
        * np.sin(pi * alpha * k / 2)
        * 2.0 ** (alpha * k)
        * pi ** (-d / 2 - 1)
    )
    return k, c


def tail_series(alpha, d, r, n_terms=DEFAULT_TAIL_TERMS, derivative=False):
    """Large-``r`` expansion of ``p(1, r)`` (or its radial derivative).

    The leading term equals the Levy density ``A_{d,-alpha} r^{-d-alpha}``.
    """
    r = np.asarray(r, dtype=float)
    k, c = _series_coefficients(alpha, d, n_terms)
    e = alpha * k + d
    rr = r[..., None]
    if derivative:
        return np.sum(-e * c * rr ** (-e - 1), axis=-1)
    return np.sum(c * rr ** (-e), axis=-1)


def _default_switch_radius(alpha, d, n_terms):
    """Switch radius for the tail series.

    For ``alpha >= 1`` the series is only asymptotic and the default radius is
    used. For ``alpha < 1`` it converges, and it is used from the smallest
    radius where its terms show little cancellation and are negligible at the
    truncation index. Oscillatory quadrature degrades there anyway.
    """
    if alpha >= 1:
        return DEFAULT_SWITCH_RADIUS
    k, c = _series_coefficients(alpha, d, n_terms)
    for r in np.logspace(0, np.log10(DEFAULT_SWITCH_RADIUS), 41):
        terms = c * r ** (-(alpha * k + d))
        total = terms.sum()
        if np.sum(np.abs(terms)) < 100.0 * abs(total) and abs(terms[-1]) < 1e-15 * abs(total):
            return float(r)
    return DEFAULT_SWITCH_RADIUS


def density_at_zero(alpha, d):
    """``p(1, 0) = Gamma(d/alpha) / (alpha 2^{d-1} pi^{d/2} Gamma(d/2))``."""
    return gamma(d / alpha) / (alpha * 2 ** (d - 1) * pi ** (d / 2) * gamma(d / 2))


class DensityTable:
    """Radial table of ``p(1, r)`` with cubic Hermite interpolation.

    Nodes are uniform in ``u = log1p(r)`` up to ``switch_radius``; beyond it
    the tail series is used. Interpolation is on ``log p``.

    Parameters
    ----------
    alpha, d : stability index and dimension (``d`` in {1, 2, 3}).
    step : node spacing in ``u``.
    switch_radius : radius where the tail series takes over.
    tail_terms : number of tail-series terms.
    """

    def __init__(self, alpha, d=1, step=DEFAULT_TABLE_STEP, switch_radius=None,
                 tail_terms=None, _arrays=None):
        if d not in (1, 2, 3):
            raise ConfigError("density tables support d in {1, 2, 3}")
        self.alpha = float(alpha)
        self.d = int(d)
        self.step = float(step)
        # radial scale of the u-grid; small alpha needs nodes packed near 0
        self.r_scale = min(1.0, self.alpha**2)
        if tail_terms is None:
            tail_terms = DEFAULT_TAIL_TERMS if self.alpha >= 1 else CONVERGENT_TAIL_TERMS
        self.tail_terms = int(tail_terms)
        if switch_radius is None:
            switch_radius = _default_switch_radius(self.alpha, self.d, self.tail_terms)
        self.switch_radius = float(switch_radius)
        if _arrays is None:
            if self.alpha < 0.4:
                warnings.warn("density tables for alpha < 0.4 may miss the 1e-6 "
                              "relative accuracy target near the origin", stacklevel=2)
            _arrays = self._compute()
        self.u, self.logp, self.dlogp = (np.asarray(a, dtype=float) for a in _arrays)
        if self.d == 2:
            self._spline = CubicSpline(self.u, self.logp)
        else:
            self._spline = CubicHermiteSpline(self.u, self.logp, self.dlogp)
        self._dspline = self._spline.derivative()

    def _to_u(self, r):
        return np.log1p(r / self.r_scale)

    @property
    def key(self):
        return (self.alpha, self.d, self.step, self.switch_radius, self.tail_terms)

    def _compute(self):
        a, d = self.alpha, self.d
        c = self.r_scale
        u_max = self._to_u(self.switch_radius)
        u = np.linspace(0.0, u_max, int(np.ceil(u_max / self.step)) + 1)
        r = c * np.expm1(u)
        p1 = np.empty_like(r)
        dp1 = np.empty_like(r)
        d2p1 = np.empty_like(r)
        for i, ri in enumerate(r):
            p1[i] = _fourier_moment(a, ri, 0, "cos") / pi
            dp1[i] = -_fourier_moment(a, ri, 1, "sin") / pi
            d2p1[i] = -_fourier_moment(a, ri, 2, "cos") / pi
        if d == 1:
            p, dp = p1, dp1
        elif d == 3:
            p = np.empty_like(r)
            dp = np.empty_like(r)
            p[0] = -d2p1[0] / (2 * pi)
            dp[0] = 0.0
            p[1:] = -dp1[1:] / (2 * pi * r[1:])
            dp[1:] = -(d2p1[1:] * r[1:] - dp1[1:]) / (2 * pi * r[1:] ** 2)
        else:
            dspline = CubicHermiteSpline(u, dp1, d2p1 * (c + r))
            p = self._abel(r, lambda rho: _eval_dp1(dspline, a, rho, self))
            p[0] = density_at_zero(a, 2)
            dp = np.full_like(r, np.nan)
        if np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise NumericalError("density table contains non-positive values",
                                 {"alpha": a, "d": d})
        return u, np.log(p), dp / p * (c + r)

    def _abel(self, r, dp1):
        # p_2(r) = -(1/pi) int_0^inf p_1'(r cosh s) ds
        x, w = np.polynomial.legendre.leggauss(12)
        out = np.empty_like(r)
        for i, ri in enumerate(r):
            if ri == 0.0:
                continue
            s_sw = np.arccosh(max(self.switch_radius / ri, 1.0))
            s_end = s_sw + 40.0 / (2.0 + self.alpha)
            n_pan = int(np.ceil(s_end / 0.05))
            edges = np.linspace(0.0, s_end, n_pan + 1)
            mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
            half = 0.5 * np.diff(edges)[:, None]
            s = (mid + half * x).ravel()
            ww = (half * w).ravel()
            out[i] = -np.sum(ww * dp1(ri * np.cosh(s))) / pi
        return out

    def __call__(self, r):
        """``p(1, r)`` for radii ``r >= 0`` (vectorized)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inner = r <= self.switch_radius
        if np.any(inner):
            out[inner] = np.exp(self._spline(self._to_u(r[inner])))
        if np.any(~inner):
            out[~inner] = tail_series(self.alpha, self.d, r[~inner], self.tail_terms)
        return out

    def derivative(self, r):
        """Radial derivative ``d/dr p(1, r)``."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inner = r <= self.switch_radius
        if np.any(inner):
            ui = self._to_u(r[inner])
            out[inner] = (np.exp(self._spline(ui)) * self._dspline(ui)
                          / (self.r_scale + r[inner]))
        if np.any(~inner):
            out[~inner] = tail_series(self.alpha, self.d, r[~inner], self.tail_terms,
                                      derivative=True)
        return out

    def save(self, path):
        np.savez(
            path,
            version=TABLE_FORMAT_VERSION,
            key=np.array(self.key, dtype=float),
            u=self.u, logp=self.logp, dlogp=self.dlogp,
        )

    @classmethod
    def load(cls, path, expected_key=None):
        with np.load(path) as z:
            if int(z["version"]) != TABLE_FORMAT_VERSION:
                raise ValueError("density table version mismatch")
            key = tuple(float(v) for v in z["key"])
            if expected_key is not None and key[:3] != tuple(float(v) for v in expected_key[:3]):
                raise ValueError("density table key mismatch")
            arrays = (z["u"], z["logp"], z["dlogp"])
        alpha, d, step, sw, terms = key
        return cls(alpha, int(d), step, sw, int(terms), _arrays=arrays)


def _eval_dp1(dspline, alpha, rho, table):
    out = np.empty_like(rho)
    inner = rho <= table.switch_radius
    out[inner] = dspline(table._to_u(rho[inner]))
    out[~inner] = tail_series(alpha, 1, rho[~inner], table.tail_terms, derivative=True)
    return out


_CACHE_DIR = os.environ.get("FRACPHI_CACHE_DIR")


def set_cache_dir(path):
    """Directory for on-disk density tables (``None`` disables disk caching)."""
    global _CACHE_DIR
    _CACHE_DIR = None if path is None else str(path)


def _cache_file(key):
    digest = hashlib.sha256(repr(key).encode()).hexdigest()[:16]
    return os.path.join(_CACHE_DIR, f"density_v{TABLE_FORMAT_VERSION}_{digest}.npz")


@lru_cache(maxsize=32)
def get_table(alpha, d=1, step=DEFAULT_TABLE_STEP, switch_radius=None,
              tail_terms=None) -> DensityTable:
    """Memoized table lookup, optionally backed by the disk cache."""
    key = (float(alpha), int(d), float(step), switch_radius, tail_terms)
    if _CACHE_DIR:
        path = _cache_file(key)
        if os.path.exists(path):
            try:
                return DensityTable.load(path, expected_key=key)
            except (ValueError, KeyError, OSError):
                pass
        table = DensityTable(*key)
        os.makedirs(_CACHE_DIR, exist_ok=True)
        tmp = path + f".{os.getpid()}.tmp.npz"
        table.save(tmp)
        os.replace(tmp, path)
        return table
    return DensityTable(*key)


# ---------------------------------------------------------------------------
# Public density and kernel operations
# ---------------------------------------------------------------------------


def transition_density(params: StableParams, t, x, table=None):
    """Transition density ``p(t, x)``.

    Parameters
    ----------
    params : StableParams
    t : float or array, positive
    x : array
        Points. In ``d == 1`` any shape; otherwise trailing axis ``d``.
    table : DensityTable, optional
        Defaults to the memoized table for ``(alpha, d)``.

    Returns
    -------
    ndarray or float
    """
    t = _check_t(t)
    if table is None:
        table = get_table(params.alpha, params.d)
    r = _radius(params, x)
    scale = t ** (-1.0 / params.alpha)
    val = scale ** params.d * table(r * scale)
    return float(val) if np.ndim(val) == 0 else val


def radial_density(params: StableParams, t, r, table=None):
    """``p(t, x)`` as a function of ``r = |x|``."""
    if table is None:
        table = get_table(params.alpha, params.d)
    scale = np.asarray(t, dtype=float) ** (-1.0 / params.alpha)
    return scale ** params.d * table(np.asarray(r, dtype=float) * scale)


def density_derivative(params: StableParams, t, r, table=None):
    """Radial derivative ``d/dr p(t, r)``."""
    t = _check_t(t)
    if table is None:
        table = get_table(params.alpha, params.d)
    scale = t ** (-1.0 / params.alpha)
    return scale ** (params.d + 1) * table.derivative(np.abs(np.asarray(r, float)) * scale)


def envelope(params: StableParams, t, x):
    """``min(t |x|^{-d-alpha}, t^{-d/alpha})``."""
    t = np.asarray(t, dtype=float)
    r = _radius(params, x)
    with np.errstate(divide="ignore", over="ignore"):
        far = t * r ** (-params.d - params.alpha)
    return np.minimum(far, t ** (-params.d / params.alpha))


@lru_cache(maxsize=32)
def fitted_bounds_constant(alpha, d=1):
    """Smallest ``C`` with ``envelope/C <= p <= C envelope`` on a log grid.

    The ratio ``p/envelope`` depends on ``(t, x)`` only through
    ``|x| t^{-1/alpha}``, so a radial scan at ``t = 1`` covers every case.
    """
    params = StableParams(alpha, d)
    r = np.concatenate([[0.0], np.logspace(-4, 6, 2001)])
    ratio = transition_density(params, 1.0, _as_points(r, d)) / envelope(params, 1.0, _as_points(r, d))
    return float(max(ratio.max(), (1.0 / ratio).max()) * (1.0 + 1e-9))


def _as_points(r, d):
    r = np.asarray(r, dtype=float)
    if d == 1:
        return r
    pts = np.zeros(r.shape + (d,))
    pts[..., 0] = r
    return pts


def density_bounds_check(params: StableParams, t, x, C=None):
    """Return ``(lower, value, upper)`` for the two-sided density bound.

    Raises
    ------
    NumericalError
        If the value falls outside the fitted sandwich.
    """
    if C is None:
        C = fitted_bounds_constant(params.alpha, params.d)
    value = np.asarray(transition_density(params, t, x))
    env = envelope(params, t, x)
    lower, upper = env / C, env * C
    if np.any(value < lower) or np.any(value > upper):
        raise NumericalError("density outside the two-sided bound", {"C": C})
    if value.ndim == 0:
        return float(lower), float(value), float(upper)
    return lower, value, upper


def potential_kernel(params: StableParams, x):
    """Potential kernel, compensated when the process is recurrent.

    ``alpha < d``: ``A_{d,alpha} |x|^{alpha-d}``.
    ``alpha = d = 1``: ``(1/pi) log(1/|x|)``.
    ``alpha > d = 1``: ``|x|^{alpha-1} / (2 Gamma(alpha) cos(pi alpha/2))``.
    """
    r = _radius(params, x)
    if np.any(r == 0):
        raise PreconditionError("potential kernel has a pole at x = 0")
    a, d = params.alpha, params.d
    if a < d:
        val = riesz_constant(d, a) * r ** (a - d)
    elif d == 1 and a == 1.0:
        val = np.log(1.0 / r) / pi
    elif d == 1:
        val = r ** (a - 1.0) / (2.0 * gamma(a) * np.cos(pi * a / 2))
    else:
        raise PreconditionError("no potential kernel formula for alpha >= d >= 2")
    return float(val) if np.ndim(val) == 0 else val


def levy_measure_density(params: StableParams, x):
    """Levy density ``A_{d,-alpha} |x|^{-d-alpha}``."""
    r = _radius(params, x)
    if np.any(r == 0):
        raise PreconditionError("Levy density is singular at x = 0")
    val = riesz_constant(params.d, -params.alpha) * r ** (-params.d - params.alpha)
    return float(val) if np.ndim(val) == 0 else val


def bridge_weight(params: StableParams, x, y, s, t):
    """Total mass ``p(t - s, y - x)`` of the unnormalized bridge measure."""
    if not s < t:
        raise PreconditionError("bridge requires s < t", witness=(s, t))
    return transition_density(params, t - s, np.asarray(y, float) - np.asarray(x, float))


# ---------------------------------------------------------------------------
# Bridges
# ---------------------------------------------------------------------------

MAX_REJECTION_ROUNDS = 10**6
MIN_ACCEPTANCE = 1e-3


def _bridge_step(params, table, z, y, dt1, dt2, rng, max_rounds):
    """Sample ``z'`` with density proportional to ``p(dt1, z'-z) p(dt2, y-z')``.

    Three exact rejection schemes are available and their acceptance rates
    are known in closed form, so each path uses the best one:

    * forward: propose from ``p(dt1, . - z)``, accept ``p(dt2, y-z')/p(dt2, 0)``;
    * backward: propose from ``p(dt2, y - .)``, accept ``p(dt1, z'-z)/p(dt1, 0)``;
    * split: mixture of both with half-space bounds at distance ``|y-z|/2``.
    """
    d1 = params.d > 1
    dist = _radius(params, y - z)
    dens = lambda dt, r: radial_density(params, dt, r, table)  # noqa: E731
    p1_0, p2_0 = dens(dt1, 0.0), dens(dt2, 0.0)
    p1_h, p2_h = dens(dt1, dist / 2), dens(dt2, dist / 2)
    split_norm = p1_h + p2_h
    mass = dens(dt1 + dt2, dist)
    denom = np.stack([np.full_like(dist, p2_0), np.full_like(dist, p1_0), split_norm])
    scheme = np.argmin(denom, axis=0)
    rate = mass / denom[scheme, np.arange(len(dist))]

    n = len(dist)
    out = np.empty_like(z)
    todo = np.arange(n)
    fallback = rate < MIN_ACCEPTANCE
    todo = todo[~fallback]
    rounds = 0
    while todo.size and rounds < max_rounds:
        rounds += 1
        zz, yy, sc = z[todo], y[todo], scheme[todo]
        inc1 = sample_increment(params, dt1, rng, todo.size)
        inc2 = sample_increment(params, dt2, rng, todo.size)
        if sc.size and np.any(sc == 2):
            pick_first = rng.uniform(size=todo.size) * split_norm[todo] < p2_h[todo]
        else:
            pick_first = np.zeros(todo.size, bool)
        first = (sc == 0) | ((sc == 2) & pick_first)
        mask = first[:, None] if d1 else first
        prop = np.where(mask, zz + inc1, yy - inc2)
        f1 = dens(dt1, _radius(params, prop - zz))
        f2 = dens(dt2, _radius(params, yy - prop))
        env = np.where(sc == 0, f1 * p2_0,
                       np.where(sc == 1, p1_0 * f2, p2_h[todo] * f1 + p1_h[todo] * f2))
        accept = rng.uniform(size=todo.size) * env < f1 * f2
        out[todo[accept]] = prop[accept]
        todo = todo[~accept]
    if todo.size:
        fallback[todo] = True
    idx = np.flatnonzero(fallback)
    if idx.size:
        if d1:
            raise BridgeSamplingError(
                "bridge rejection failed and no grid fallback exists for d >= 2",
                {"n_failed": int(idx.size), "min_rate": float(rate[idx].min())},
            )
        out[idx] = _bridge_step_grid(params, table, z[idx], y[idx], dt1, dt2, rng)
    return out, rate


def _bridge_step_grid(params, table, z, y, dt1, dt2, rng):
    """Inverse-CDF fallback on a graded grid around both modes (d = 1)."""
    g = np.concatenate([-np.logspace(-4, 5, 600)[::-1], [0.0], np.logspace(-4, 5, 600)])
    out = np.empty_like(z)
    for i in range(len(z)):
        grid = np.unique(np.concatenate([z[i] + dt1 ** (1 / params.alpha) * g,
                                         y[i] + dt2 ** (1 / params.alpha) * g]))
        f = (transition_density(params, dt1, grid - z[i], table)
             * transition_density(params, dt2, y[i] - grid, table))
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(grid))])
        out[i] = np.interp(rng.uniform() * cdf[-1], cdf, grid)
    return out


def sample_bridges(params: StableParams, x, s, y, t, times, rng, n_paths,
                   max_rounds=MAX_REJECTION_ROUNDS, return_diagnostics=False):
    """Sample ``n_paths`` bridge skeletons from ``(s, x)`` to ``(t, y)``.

    Returns
    -------
    full_times : ndarray, ``[s, *times, t]``
    positions : ndarray of shape ``(n_paths, len(times) + 2[, d])``
    """
    times = np.asarray(times, dtype=float).ravel()
    full = np.concatenate([[s], times, [t]])
    if np.any(np.diff(full) <= 0):
        raise PreconditionError("need s < times[0] < ... < times[-1] < t")
    table = get_table(params.alpha, params.d)
    tail = (params.d,) if params.d > 1 else ()
    pos = np.empty((n_paths, len(full)) + tail)
    pos[:, 0] = x
    pos[:, -1] = y
    yy = np.broadcast_to(np.asarray(y, float), (n_paths,) + tail).copy()
    min_rate = 1.0
    for i in range(1, len(full) - 1):
        pos[:, i], rate = _bridge_step(params, table, pos[:, i - 1], yy,
                                       full[i] - full[i - 1], t - full[i], rng, max_rounds)
        min_rate = min(min_rate, float(rate.min()))
    if return_diagnostics:
        return full, pos, {"min_acceptance": min_rate}
    return full, pos


def sample_bridge_skeleton(params: StableParams, x, s, y, t, times, rng) -> PathSkeleton:
    """One bridge skeleton with endpoints pinned exactly."""
    full, pos = sample_bridges(params, x, s, y, t, times, rng, 1)
    return PathSkeleton(full, pos[0])
