"""Monte Carlo estimators for Feynman-Kac functionals of the stable process.

All estimators simulate on a time skeleton with step ``dt`` and approximate
``int_0^t V(X_s) ds`` by the trapezoid (default) or left-endpoint rule.
Randomness follows the chunked stream contract of ``montecarlo``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .errors import CensoringError, ConfigError, MassBlowupError, PreconditionError
from .montecarlo import DEFAULT_CHUNK, run_chunked
from .potentials import PotentialSpec
from .stable import (MCEstimate, StableParams, _symmetric_stable_1d, bridge_weight,
                     sample_bridges, sample_increment)

BLOWUP_EXPONENT = 700.0
CENSOR_LIMIT = 1e-3


@dataclass(frozen=True)
class FKConfig:
    """Simulation settings for Feynman-Kac estimators."""

    dt: float = 0.01
    n_paths: int = 10_000
    seed: int = 0
    integral_rule: str = "trapezoid"
    chunk_size: int = DEFAULT_CHUNK
    threads: int = 1
    v_cap: float = 1e6
    horizon: float = 100.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.n_paths < 100:
            raise ConfigError("n_paths must be at least 100")
        if self.integral_rule not in ("left", "trapezoid"):
            raise ConfigError("integral_rule must be 'left' or 'trapezoid'")

    def with_(self, **kw):
        return replace(self, **kw)


def _time_grid(t, dt):
    n = max(1, int(np.ceil(t / dt - 1e-12)))
    return np.linspace(0.0, t, n + 1)


def _v(V, x, cap):
    v = np.asarray(V.evaluate(x), float)
    return np.clip(np.nan_to_num(v, nan=cap, posinf=cap, neginf=-cap), -cap, cap)


def _weights_along(V, params, x0, times, rng, n, cfg):
    """Simulate ``n`` free paths; return ``(int V ds, X_t)``."""
    tail = (params.d,) if params.d > 1 else ()
    x = np.broadcast_to(np.asarray(x0, float), (n,) + tail).copy()
    vprev = _v(V, x, cfg.v_cap)
    acc = np.zeros(n)
    for dt in np.diff(times):
        x = x + sample_increment(params, dt, rng, n)
        vnext = _v(V, x, cfg.v_cap)
        acc += dt * (0.5 * (vprev + vnext) if cfg.integral_rule == "trapezoid" else vprev)
        vprev = vnext
    return acc, x


def _check_blowup(acc):
    worst = float(-acc.min()) if acc.size else 0.0
    if worst > BLOWUP_EXPONENT:
        raise MassBlowupError("Feynman-Kac weight exceeds exp(700)", {"exponent": worst})


def fk_expectation(x, t, f, V: PotentialSpec, params: StableParams, cfg: FKConfig) -> MCEstimate:
    """Estimate ``T_t f(x) = E^x[exp(-int_0^t V(X_s) ds) f(X_t)]``.

    Parameters
    ----------
    x : starting point
    t : positive time
    f : callable, bounded on reachable points, vectorized over positions
    V, params, cfg : potential, process and simulation settings
    """
    if not t > 0:
        raise PreconditionError("t must be positive")
    times = _time_grid(t, cfg.dt)

    def worker(n, rng):
        acc, xt = _weights_along(V, params, x, times, rng, n, cfg)
        _check_blowup(acc)
        return np.exp(-acc) * np.asarray(f(xt), float)

    vals = np.concatenate(run_chunked(worker, cfg.n_paths, cfg.seed, cfg.chunk_size, cfg.threads))
    return MCEstimate.from_samples(vals, dt=float(times[1] - times[0]), seed=cfg.seed)


def fk_kernel_bridge(x, y, t, V: PotentialSpec, params: StableParams, cfg: FKConfig,
                     return_samples=False) -> MCEstimate:
    """Estimate ``u(t, x, y)`` as ``p(t, y-x)`` times the bridge mean of ``e_V(t)``."""
    if not t > 0:
        raise PreconditionError("t must be positive")
    times = _time_grid(t, cfg.dt)
    mass = bridge_weight(params, x, y, 0.0, t)

    def worker(n, rng):
        full, pos = sample_bridges(params, x, 0.0, y, t, times[1:-1], rng, n)
        v = _v(V, pos, cfg.v_cap)
        dts = np.diff(full)
        if cfg.integral_rule == "trapezoid":
            acc = np.sum(0.5 * (v[:, 1:] + v[:, :-1]) * dts, axis=1)
        else:
            acc = np.sum(v[:, :-1] * dts, axis=1)
        _check_blowup(acc)
        return mass * np.exp(-acc)

    vals = np.concatenate(run_chunked(worker, cfg.n_paths, cfg.seed, cfg.chunk_size, cfg.threads))
    est = MCEstimate.from_samples(vals, bridge_mass=float(mass),
                                  dt=float(times[1] - times[0]), seed=cfg.seed)
    return (est, vals) if return_samples else est


def survival_growth(V: PotentialSpec, params: StableParams, t_grid, x_grid, cfg: FKConfig,
                    residual_tol=0.05):
    """Fit ``log sup_x E^x[e_V(t)] ~ C0 + C1 t``.

    Paths from every start share the same increments (common random numbers).

    Returns
    -------
    dict with ``C0``, ``C1``, ``residual`` (max abs fit residual in log
    space), ``exponential`` (residual within ``residual_tol``), and the curve.
    """
    t_grid = np.sort(np.asarray(t_grid, float))
    if np.any(t_grid <= 0):
        raise PreconditionError("t_grid must be positive")
    times = np.union1d(_time_grid(t_grid[-1], cfg.dt), t_grid)
    marks = np.searchsorted(times, t_grid)
    x_grid = np.asarray(x_grid, float)

    def worker(n, rng):
        incs = [sample_increment(params, dt, rng, n) for dt in np.diff(times)]
        out = np.empty((len(x_grid), len(t_grid), n))
        for i, x0 in enumerate(x_grid):
            x = np.full(n, x0) if params.d == 1 else np.broadcast_to(x0, (n, params.d)).copy()
            vprev = _v(V, x, cfg.v_cap)
            acc = np.zeros(n)
            k = 0
            for j, dt in enumerate(np.diff(times)):
                x = x + incs[j]
                vnext = _v(V, x, cfg.v_cap)
                acc += dt * (0.5 * (vprev + vnext) if cfg.integral_rule == "trapezoid" else vprev)
                vprev = vnext
                while k < len(marks) and marks[k] == j + 1:
                    _check_blowup(acc)
                    out[i, k] = np.exp(-acc)
                    k += 1
        return out

    parts = run_chunked(worker, cfg.n_paths, cfg.seed, cfg.chunk_size, cfg.threads)
    vals = np.concatenate(parts, axis=-1)
    means = vals.mean(axis=-1)
    sup = means.max(axis=0)
    A = np.vstack([np.ones_like(t_grid), t_grid]).T
    coef, *_ = np.linalg.lstsq(A, np.log(sup), rcond=None)
    resid = float(np.max(np.abs(A @ coef - np.log(sup))))
    return {"C0": float(coef[0]), "C1": float(coef[1]), "residual": resid,
            "exponential": resid <= residual_tol, "t": t_grid.tolist(), "sup": sup.tolist()}


def exit_functionals(center, radius, V: PotentialSpec, x, params: StableParams, cfg: FKConfig,
                     refine=True, return_samples=False):
    """Estimate ``u_D(x) = E^x[e_V(tau_D)]`` and ``v_D(x) = E^x[int_0^tau e_V(s) ds]``.

    ``D`` is the ball ``B(center, radius)``. Exit is detected on the skeleton;
    the step is halved for paths within ``5 dt^{1/alpha}`` of the boundary.
    The horizon is ``50/zeta`` when ``V >= zeta > 0`` on ``D``, else
    ``cfg.horizon``; weight still alive there is reported as censored.

    Returns
    -------
    (u_D, v_D) : MCEstimate pair. ``u_D.extra`` holds ``censored`` and
    ``p_tau_gt_1`` (fraction of paths with ``tau_D > 1``).
    """
    center = np.asarray(center, float)
    x = np.asarray(x, float)
    dist0 = _dist(params, x - center)
    if not dist0 < radius:
        raise PreconditionError("x must lie inside D", witness=x.tolist())
    zeta, beta = potential_range_on_ball(V, params, center, radius)
    horizon = 50.0 / zeta if zeta > 0 else cfg.horizon
    a = params.alpha
    near = 5.0 * cfg.dt ** (1.0 / a)

    def worker(n, rng):
        tail = (params.d,) if params.d > 1 else ()
        pos = np.broadcast_to(x, (n,) + tail).copy()
        s = np.zeros(n)
        acc = np.zeros(n)
        vint = np.zeros(n)
        u = np.zeros(n)
        tau = np.full(n, np.inf)
        alive = np.ones(n, bool)
        vprev = _v(V, pos, cfg.v_cap)
        while alive.any():
            idx = np.flatnonzero(alive)
            step = np.full(idx.size, cfg.dt)
            if refine:
                gap = radius - _dist(params, pos[idx] - center)
                step[gap < near] *= 0.5
            step = np.minimum(step, horizon - s[idx])
            inc = _unit_increment(params, rng, idx.size) * (step ** (1.0 / a))[(...,) + (None,) * len(tail)]
            new = pos[idx] + inc
            vnew = _v(V, new, cfg.v_cap)
            out = _dist(params, new - center) >= radius
            # left rule on the exit step keeps the integrand inside D
            dv = np.where(out, vprev[idx], 0.5 * (vprev[idx] + vnew)) if cfg.integral_rule == "trapezoid" \
                else vprev[idx]
            e_before = np.exp(-acc[idx])
            acc[idx] += step * dv
            _check_blowup(acc[idx])
            vint[idx] += 0.5 * step * (e_before + np.exp(-acc[idx]))
            s[idx] += step
            pos[idx] = new
            vprev[idx] = vnew
            ex = idx[out]
            u[ex] = np.exp(-acc[ex])
            tau[ex] = s[ex]
            alive[ex] = False
            timed = alive & (s >= horizon - 1e-12)
            alive[timed] = False
        censored = np.where(np.isinf(tau), np.exp(-acc), 0.0)
        return np.stack([u, vint, censored, (tau > 1.0).astype(float)])

    parts = np.concatenate(run_chunked(worker, cfg.n_paths, cfg.seed, cfg.chunk_size, cfg.threads),
                           axis=1)
    censored = float(parts[2].sum() / max(parts[0].sum() + parts[2].sum(), 1e-300))
    if censored > CENSOR_LIMIT:
        raise CensoringError("censored weight at the horizon exceeds 0.1%",
                             {"censored": censored, "horizon": horizon})
    p1 = float(parts[3].mean())
    extra = {"censored": censored, "horizon": horizon, "p_tau_gt_1": p1,
             "zeta": zeta, "beta": beta}
    u_est = MCEstimate.from_samples(parts[0], **extra)
    v_est = MCEstimate.from_samples(parts[1], **extra)
    if return_samples:
        return u_est, v_est, parts
    return u_est, v_est


def _dist(params, z):
    z = np.asarray(z, float)
    return np.abs(z) if params.d == 1 else np.sqrt(np.sum(z * z, axis=-1))


def _unit_increment(params, rng, n):
    if params.d == 1:
        return _symmetric_stable_1d(params.alpha, rng, n)
    return sample_increment(params, 1.0, rng, n)


def potential_range_on_ball(V, params, center, radius, n=401):
    """``(inf V, sup V)`` over a sample of the ball ``B(center, radius)``."""
    if params.d == 1:
        pts = float(center) + np.linspace(-radius, radius, n)[1:-1]
    else:
        rng = np.random.default_rng(0)
        g = rng.standard_normal((n * 4, params.d))
        g *= (rng.uniform(size=(n * 4, 1)) ** (1 / params.d)) / np.linalg.norm(g, axis=1, keepdims=True)
        pts = center + radius * g
    v = np.asarray(V.evaluate(pts), float)
    return float(v.min()), float(v.max())


def greenop_bounds(zeta, beta, p_tau_gt_1):
    """Sandwich ``[(1 - e^{-beta}) P(tau > 1) / beta, 1/zeta]`` for ``v_D``."""
    if not 0 < zeta <= beta:
        raise PreconditionError("need 0 < zeta <= beta")
    return (1.0 - np.exp(-beta)) * p_tau_gt_1 / beta, 1.0 / zeta


def tail_integral(gam, x, params: StableParams, fit_radii=None):
    """``int_{|y-x| > |x|/4} (1+|y|)^{-gam} |x-y|^{-1-alpha} dy`` in d = 1.

    Returns
    -------
    dict with ``value``, ``exponent`` (``min(gam+alpha, 1+alpha)``), the
    envelope constant ``C`` fitted over ``fit_radii`` and ``within`` (value
    below ``C |x|^{-exponent}``).
    """
    if params.d != 1:
        raise PreconditionError("tail_integral is implemented for d = 1")
    if abs(x) < 1 or gam < 0 or gam == params.d:
        raise PreconditionError("need |x| >= 1, gam >= 0, gam != d")
    expo = min(gam + params.alpha, params.d + params.alpha)
    if fit_radii is None:
        fit_radii = np.geomspace(1.0, 1e3, 13)
    vals = np.array([_tail_value(gam, r, params.alpha) for r in fit_radii])
    C = float(np.max(vals * np.asarray(fit_radii) ** expo)) * (1 + 1e-9)
    value = _tail_value(gam, float(x), params.alpha)
    return {"value": value, "exponent": expo, "C": C,
            "within": bool(value <= C * abs(x) ** (-expo))}


def _tail_value(gam, x, alpha):
    r = abs(x) / 4.0
    f = lambda y: (1.0 + abs(y)) ** (-gam) * abs(x - y) ** (-1.0 - alpha)  # noqa: E731
    pieces = []
    lo_end, hi_start = x - r, x + r
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in ((-np.inf, lo_end), (hi_start, np.inf)):
            pts = [p for p in (0.0,) if a < p < b]
            if pts:
                pieces.append(integrate.quad(f, a, pts[0], limit=400)[0])
                pieces.append(integrate.quad(f, pts[0], b, limit=400)[0])
            else:
                pieces.append(integrate.quad(f, a, b, limit=400)[0])
    return float(sum(pieces))
