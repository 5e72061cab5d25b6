"""Intrinsic ultracontractivity (IUC) and asymptotic IUC diagnostics.

The classifier looks at ``r(R) = inf_{|x| in [R, 10R]} V(x)/log|x|`` on a
decade grid. Growth of ``r`` points to IUC, a positive plateau to AIUC
without IUC, and decay to zero to neither. A finite scan cannot certify a
limit, so all thresholds are explicit parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, PreconditionError
from .feynman_kac import FKConfig, _v
from .montecarlo import run_chunked
from .potentials import PotentialSpec
from .spectral import DEFAULT_FLOOR, SpectralModel, _exp_fit, t_min
from .stable import StableParams, sample_increment

CLASSES = ("IUC", "AIUC_only", "not_AIUC", "inconclusive")
DEFAULT_R_GRID = tuple(10.0**k for k in range(1, 7))


@dataclass(frozen=True)
class IUCVerdict:
    cls: str
    liminf_ratio: float
    evidence: tuple = ()
    curve: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")

    def as_dict(self):
        return {"class": self.cls, "liminf_ratio": _finite_or_str(self.liminf_ratio),
                "evidence": [dict(e) for e in self.evidence], "curve": self.curve}


def _finite_or_str(v):
    return v if np.isfinite(v) else ("+inf" if v > 0 else "-inf")


def _shell_points(R, d, per_decade=200):
    r = np.geomspace(R, 10 * R, per_decade)
    if d == 1:
        return np.concatenate([-r[::-1], r]), np.concatenate([r[::-1], r])
    # a few directions suffice for the radial catalog
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts = np.concatenate([np.stack([r * np.cos(a), r * np.sin(a)] + [np.zeros_like(r)] * (d - 2), -1)
                          for a in ang])
    return pts, np.tile(r, len(ang))


def ratio_curve(V: PotentialSpec, R_grid=DEFAULT_R_GRID, ball_sup=False, n_ball=17):
    """``r(R)`` for each ``R``; with ``ball_sup`` the potential is replaced by
    its supremum over the unit ball around each point (``n_ball`` samples)."""
    out = []
    for R in R_grid:
        pts, rad = _shell_points(R, V.d)
        with np.errstate(over="ignore"):
            out.append(_ratio_min(V, pts, rad, ball_sup, n_ball))
    return np.array(out)


def _ratio_min(V, pts, rad, ball_sup, n_ball):
    if not ball_sup:
        vals = np.asarray(V.evaluate(pts), float)
    elif V.d == 1:
        offs = np.linspace(-1.0, 1.0, n_ball)
        vals = np.max(np.asarray(V.evaluate(pts[:, None] + offs[None, :]), float), axis=1)
    else:
        offs = np.linspace(-1.0, 1.0, n_ball)
        vals = np.max(np.stack([np.asarray(V.evaluate(pts + o * pts / rad[:, None]), float)
                                for o in offs]), axis=0)
    return float(np.min(vals / np.log(rad)))


def classify(V: PotentialSpec, R_grid=DEFAULT_R_GRID, grow_ratio=1.5, big=50.0,
             plateau=(0.9, 1.1), decline=0.75, n_decades=3) -> IUCVerdict:
    """Classify ``V`` as IUC, AIUC_only, not_AIUC or inconclusive.

    Rules, applied in order on the last ``n_decades`` ratios of the curve:

    * some ``r(R) <= 0``: not_AIUC with that ``R`` as witness;
    * each ``r(10R)/r(R) >= grow_ratio`` and ``r(R_max) > big``: IUC;
    * ``r`` strictly decreasing over the whole grid with total decline below
      ``decline`` and the unit-ball supremum curve also decreasing:
      not_AIUC (extrapolated liminf 0);
    * each ratio within ``plateau``: AIUC_only;
    * otherwise inconclusive.
    """
    R_grid = np.asarray(R_grid, float)
    if len(R_grid) < n_decades + 1:
        raise PreconditionError("R_grid too short for the decade test")
    r = ratio_curve(V, R_grid)
    rs = ratio_curve(V, R_grid, ball_sup=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = r[1:] / np.where(r[:-1] == 0, np.nan, r[:-1])
    # overflow of V to +inf on both decades still means growth
    ratios[np.isinf(r[1:]) & np.isinf(r[:-1])] = np.inf
    tail = ratios[-n_decades:]
    evidence = []
    curve = {"R": R_grid.tolist(), "r": r.tolist(), "r_ball_sup": rs.tolist()}

    def ev(name, value, passed):
        evidence.append({"name": name, "value": value, "passed": bool(passed)})

    if np.any(r <= 0):
        i = int(np.argmax(r <= 0))
        ev("nonpositive_ratio", {"R": float(R_grid[i]), "r": float(r[i])}, True)
        return IUCVerdict("not_AIUC", float(min(r.min(), 0.0)), tuple(evidence), curve)

    growing = bool(np.all(tail >= grow_ratio))
    ev("decade_growth", tail.tolist(), growing)
    ev("large_at_Rmax", float(r[-1]), r[-1] > big)
    if growing and r[-1] > big:
        return IUCVerdict("IUC", np.inf, tuple(evidence), curve)

    dec = bool(np.all(np.diff(r) < 0) and r[-1] / r[0] < decline)
    dec_sup = bool(np.all(np.diff(rs) < 0))
    ev("decreasing_to_zero", float(r[-1] / r[0]), dec)
    ev("ball_sup_decreasing", rs.tolist(), dec_sup)
    if dec and dec_sup:
        return IUCVerdict("not_AIUC", 0.0, tuple(evidence), curve)

    flat = bool(np.all((tail >= plateau[0]) & (tail <= plateau[1])))
    ev("plateau", tail.tolist(), flat)
    if flat:
        return IUCVerdict("AIUC_only", float(np.min(r[-n_decades - 1:])), tuple(evidence), curve)
    return IUCVerdict("inconclusive", float(r[-1]), tuple(evidence), curve)


def _T_t_one(model: SpectralModel, t, m=None):
    m = model.n_modes if m is None else int(m)
    phi = model.eigenvectors[:, :m]
    coef = phi.sum(axis=0) * model.grid.cell
    return phi @ (np.exp(-model.eigenvalues[:m] * t) * coef)


def tail_bound_scan(model: SpectralModel, t, m_check=True, sensitivity_tol=1e-3):
    """``sup_x T_t 1(x) (1 + |x|)^{d+alpha}`` on the grid.

    Returns
    -------
    dict with ``sup``, ``argmax`` and ``m_sensitive`` (dropping half the
    modes changes the sup by more than ``sensitivity_tol`` relative).
    """
    if t < t_min(model):
        raise PreconditionError("t below t_min for this model", witness=t)
    d, a = model.params.d, model.params.alpha
    w = (1.0 + model.grid.radii()) ** (d + a)
    vals = _T_t_one(model, t) * w
    i = int(np.argmax(vals))
    out = {"t": float(t), "sup": float(vals[i]), "argmax": float(np.atleast_1d(model.x[i])[0])}
    if m_check and model.n_modes >= 4:
        half = _T_t_one(model, t, model.n_modes // 2) * w
        rel = abs(half.max() - vals[i]) / abs(vals[i])
        out["m_sensitive"] = bool(rel > sensitivity_tol)
    else:
        out["m_sensitive"] = None
    return out


def uniform_convergence_scan(model: SpectralModel, t_grid, floor=DEFAULT_FLOOR,
                             min_mass=0.5):
    """``s(t) = max |u~(t,x,y) - 1|`` over the retained region and its decay rate.

    Returns
    -------
    dict with ``s``, ``rate`` (expected near the gap), ``gap`` and
    ``region_ok`` (retained region carries at least ``min_mass`` of
    ``phi0^2``).
    """
    t_grid = np.asarray(t_grid, float)
    keep = model.floor_mask(floor)
    p = model.phi0[keep]
    mass = float(np.sum(p**2) * model.grid.cell)
    phi = model.eigenvectors[keep, 1:] / p[:, None]
    gaps = model.eigenvalues[1:] - model.lambda0
    s = []
    for t in t_grid:
        dev = (phi * np.exp(-gaps * t)) @ phi.T
        s.append(float(np.abs(dev).max()))
    s = np.array(s)
    rate, c = _exp_fit(t_grid, s)
    return {"t": t_grid.tolist(), "s": s.tolist(), "rate": rate, "gap": model.gap,
            "region_mass": mass, "region_ok": mass >= min_mass,
            "monotone": bool(np.all(np.diff(s) < 0))}


def survival_ratio_test(V: PotentialSpec, params: StableParams, t, center, radius, x_grid,
                        cfg: FKConfig, min_ess=30.0):
    """Max over ``x`` of ``E^x[X_t not in D; e_V(t)] / E^x[X_t in D; e_V(t)]``.

    Weights are handled in log space. Starts whose in-``D`` effective sample
    size is below ``min_ess`` are reported as unresolved (a lower bound on
    the ratio) and excluded from the maximum.
    """
    if params.d != 1:
        raise PreconditionError("survival_ratio_test is implemented for d = 1")
    x_grid = np.asarray(x_grid, float)
    n_steps = max(1, int(np.ceil(t / cfg.dt - 1e-12)))
    dt = t / n_steps

    def worker(n, rng):
        incs = np.cumsum([sample_increment(params, dt, rng, n) for _ in range(n_steps)], axis=0)
        logw = np.empty((len(x_grid), n))
        inside = np.empty((len(x_grid), n), bool)
        for i, x0 in enumerate(x_grid):
            path = x0 + incs
            v = _v(V, path, cfg.v_cap)
            v0 = float(_v(V, np.array([x0]), cfg.v_cap)[0])
            if cfg.integral_rule == "trapezoid":
                acc = dt * (0.5 * v0 + v[:-1].sum(axis=0) + 0.5 * v[-1])
            else:
                acc = dt * (v0 + v[:-1].sum(axis=0))
            logw[i] = -acc
            inside[i] = np.abs(path[-1] - center) < radius
        return logw, inside

    parts = run_chunked(worker, cfg.n_paths, cfg.seed, cfg.chunk_size, cfg.threads)
    logw = np.concatenate([p[0] for p in parts], axis=1)
    inside = np.concatenate([p[1] for p in parts], axis=1)
    rows = []
    for i, x0 in enumerate(x_grid):
        lw = logw[i] - logw[i].max()
        w = np.exp(lw)
        win, wout = w * inside[i], w * ~inside[i]
        num, den = wout.mean(), win.mean()
        ess = win.sum() ** 2 / max(np.sum(win**2), 1e-300)
        n = w.size
        if den <= 0 or ess < min_ess:
            lower = num / (win.max() if win.max() > 0 else 1.0 / n) if num > 0 else 0.0
            rows.append({"x": float(x0), "ratio": None, "lower_bound": float(lower),
                         "ess": float(ess), "resolved": False})
            continue
        ratio = num / den
        # delta method on the two correlated means
        cov = np.cov(np.vstack([wout, win]))
        g = np.array([1.0 / den, -num / den**2])
        se = float(np.sqrt(max(g @ cov @ g, 0.0) / n))
        rows.append({"x": float(x0), "ratio": float(ratio), "stderr": se, "ess": float(ess),
                     "resolved": True})
    resolved = [r for r in rows if r["resolved"]]
    if not resolved:
        raise NumericalError("no start point resolved the in-D expectation")
    best = max(resolved, key=lambda r: r["ratio"])
    return {"max_ratio": best["ratio"], "stderr": best["stderr"], "argmax": best["x"],
            "rows": rows, "n_unresolved": len(rows) - len(resolved)}
