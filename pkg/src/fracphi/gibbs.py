"""Gibbs measures on path space built from a spectral model.

Everything here works on a one-dimensional grid with a complete (or nearly
complete) eigenbasis, where ``u(s) h u(t) = u(s + t)`` holds to rounding.
Cylinder events are lists of ``(time, a, b)`` meaning ``a <= omega(time) <= b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, OutOfRangeError, PreconditionError
from .spectral import DEFAULT_FLOOR, SpectralModel, t_min

ROW_SUM_TOL = 1e-6
STATIONARITY_TOL = 1e-6
REVERSIBILITY_TOL = 1e-8
KERNEL_FLOOR = 1e-12


def _require_1d(model):
    if model.params.d != 1:
        raise PreconditionError("Gibbs constructions are implemented for d = 1")


def _indicator(model, a, b):
    x = model.x
    return ((x >= a) & (x <= b)).astype(float)


def _normalize_event(event):
    out = []
    for item in event:
        t, a, b = (float(v) for v in item)
        if a > b:
            raise PreconditionError(f"empty interval [{a}, {b}]")
        out.append((t, a, b))
    return sorted(out)


class _Propagator:
    """Applies ``f -> int u(t, ., y) f(y) dy`` in the eigenbasis."""

    def __init__(self, model: SpectralModel):
        self.model = model
        self.phi = model.eigenvectors
        self.lam = model.eigenvalues
        self.h = model.grid.cell

    def __call__(self, f, t):
        if t < 0:
            raise PreconditionError("negative propagation time")
        if t == 0:
            return f
        c = (f * self.h) @ self.phi
        return self.phi @ (np.exp(-self.lam * t) * c)

    def matrix(self, f_mat, t):
        """Row-wise version: rows of ``f_mat`` are propagated independently."""
        if t == 0:
            return f_mat
        c = (f_mat * self.h) @ self.phi
        return (c * np.exp(-self.lam * t)) @ self.phi.T


def _chain_through(prop, vec, t_start, nodes, t_end):
    """Propagate ``vec`` from ``t_start`` through indicator ``nodes`` to ``t_end``."""
    t = t_start
    for tn, ind in nodes:
        vec = prop(vec, tn - t) * ind
        t = tn
    return prop(vec, t_end - t)


def _chain_rows(prop, mat, t_start, nodes, t_end):
    t = t_start
    for tn, ind in nodes:
        mat = prop.matrix(mat, tn - t) * ind
        t = tn
    return prop.matrix(mat, t_end - t)


def _nodes(model, event):
    return [(t, _indicator(model, a, b)) for t, a, b in _normalize_event(event)]


# ---------------------------------------------------------------- chains


@dataclass
class PPhi1Chain:
    """Discrete-time skeleton of the stationary process at spacing ``t_unit``.

    ``P[i, j]`` is the transition probability between retained grid points,
    ``rho`` the stationary law ``phi0^2 h`` (normalized on the retained set).
    """

    model: SpectralModel
    t_unit: float
    keep: np.ndarray
    P: np.ndarray
    rho: np.ndarray
    checks: dict

    @property
    def x(self):
        return self.model.x[self.keep]

    @property
    def phi0(self):
        return self.model.phi0[self.keep]

    def step_matrix(self, k):
        return np.linalg.matrix_power(self.P, int(k))


def build_chain(model: SpectralModel, t_unit=1.0, floor=DEFAULT_FLOOR, strict=True):
    """Transition matrix ``e^{lambda0 t} u(t,x,y) phi0(y) h / phi0(x)``.

    Row sums, stationarity and reversibility are measured before the rows are
    renormalized; with ``strict`` a failed check raises ``NumericalError``.
    """
    _require_1d(model)
    if t_unit <= 0 or t_unit < t_min(model):
        raise PreconditionError("t_unit must be positive and at least t_min", witness=t_unit)
    keep = model.floor_mask(floor)
    p = model.phi0[keep]
    h = model.grid.cell
    u = model.kernel_matrix(t_unit)[np.ix_(keep, keep)]
    raw = np.exp(model.lambda0 * t_unit) * u * (p[None, :] * h) / p[:, None]
    rho = p**2 * h
    rho = rho / rho.sum()
    flux = rho[:, None] * raw
    checks = {
        "row_sum_err": float(np.max(np.abs(raw.sum(axis=1) - 1.0))),
        "stationarity_err": float(np.sum(np.abs(rho @ raw - rho))),
        "reversibility_err": float(np.max(np.abs(flux - flux.T))),
        "worst_row": int(np.argmax(np.abs(raw.sum(axis=1) - 1.0))),
        "min_entry": float(raw.min()),
        "retained": int(keep.sum()),
        "retained_mass": float(np.sum(model.phi0[keep] ** 2) * h),
    }
    P = np.clip(raw, 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    checks["stationarity_err_normalized"] = float(np.sum(np.abs(rho @ P - rho)))
    failed = [k for k, tol in (("row_sum_err", ROW_SUM_TOL),
                               ("stationarity_err", STATIONARITY_TOL),
                               ("reversibility_err", REVERSIBILITY_TOL)) if checks[k] > tol]
    checks["ok"] = not failed
    if strict and failed:
        raise NumericalError(f"chain checks failed: {failed}", diagnostics=checks)
    return PPhi1Chain(model, float(t_unit), keep, P, rho, checks)


def _categorical_rows(cdf, idx, rng):
    u = rng.random(len(idx))
    out = np.empty(len(idx), dtype=np.intp)
    for s in range(0, len(idx), 4096):
        rows = cdf[idx[s:s + 4096]]
        out[s:s + 4096] = (rows < u[s:s + 4096, None]).sum(axis=1)
    return np.minimum(out, cdf.shape[1] - 1)


def sample_paths(chain: PPhi1Chain, n_steps, rng, n_paths=1, start=None, two_sided=True):
    """Sample chain paths.

    Parameters
    ----------
    n_steps : int
        Steps on each side of time zero.
    start : float or None
        Grid point at time zero; ``None`` draws from the stationary law.
    two_sided : bool
        If true the path covers ``-n_steps .. n_steps``; the two halves are
        independent given the time-zero state, which is valid by reversibility.

    Returns
    -------
    times, positions
        ``positions`` has shape ``(n_paths, len(times))``.
    """
    n_steps = int(n_steps)
    cdf = np.cumsum(chain.P, axis=1)
    if start is None:
        i0 = rng.choice(len(chain.rho), size=n_paths, p=chain.rho)
    else:
        hit = np.flatnonzero(np.isclose(chain.x, float(start), atol=1e-9 * max(1.0, abs(start))))
        if hit.size == 0:
            raise OutOfRangeError("start is not a retained grid point", witness=start)
        i0 = np.full(n_paths, hit[0])

    def half(idx):
        out = [idx]
        for _ in range(n_steps):
            idx = _categorical_rows(cdf, idx, rng)
            out.append(idx)
        return np.stack(out, axis=1)

    fwd = half(i0)
    if two_sided:
        bwd = half(i0)[:, :0:-1]
        idx = np.concatenate([bwd, fwd], axis=1)
        times = chain.t_unit * np.arange(-n_steps, n_steps + 1)
    else:
        idx = fwd
        times = chain.t_unit * np.arange(n_steps + 1)
    return times, chain.x[idx]


def fdd_check(chain: PPhi1Chain, f, g, k, rng, n_paths=20000):
    """MC estimate of ``E[f(w_0) g(w_k)]`` against the matrix value."""
    times, pos = sample_paths(chain, k, rng, n_paths, two_sided=False)
    vals = f(pos[:, 0]) * g(pos[:, -1])
    fx, gx = f(chain.x), g(chain.x)
    exact = float(chain.rho @ (fx * (chain.step_matrix(k) @ gx)))
    # same quantity from the eigenpairs: <f, T~_t g> in L2(rho)
    m = chain.model
    t = k * chain.t_unit
    full_g = np.zeros(m.grid.size)
    full_g[chain.keep] = gx * chain.phi0
    Tg = _Propagator(m)(full_g, t)[chain.keep]
    spectral = float(np.sum(chain.rho * fx * np.exp(m.lambda0 * t) * Tg / chain.phi0))
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_paths))
    return {"mc": mean, "stderr": se, "exact": exact, "spectral": spectral,
            "z": (mean - exact) / se if se > 0 else 0.0}


def inverse_gs_moment(model: SpectralModel, t, floor=DEFAULT_FLOOR):
    """``sup_x e^{lambda0 t} T_t 1(x) / phi0(x)`` over the retained region."""
    keep = model.floor_mask(floor)
    prop = _Propagator(model)
    Tt1 = prop(np.ones(model.grid.size), t)
    vals = np.exp(model.lambda0 * t) * Tt1[keep] / model.phi0[keep]
    i = int(np.argmax(vals))
    return {"t": float(t), "sup": float(vals[i]), "argmax": float(model.x[keep][i]),
            "limit": float(np.sum(model.phi0) * model.grid.cell)}


# ------------------------------------------------------------ windows


@dataclass(frozen=True)
class GibbsWindow:
    """Window ``[-T, T]`` with boundary values ``omega(-T) = left``, ``omega(T) = right``."""

    T: float
    left: float
    right: float

    def __post_init__(self):
        if self.T <= 0:
            raise PreconditionError("window half-width must be positive")


def _grid_index(model, x, floor=DEFAULT_FLOOR):
    try:
        i = model.grid.index_of(x)
    except OutOfRangeError:
        raise
    i = int(np.ravel(i)[0])
    if not model.floor_mask(floor)[i]:
        raise OutOfRangeError("boundary point outside the retained region", witness=x)
    return i


def _event_in_window(event, T, closed=False):
    for t, _, _ in event:
        if (abs(t) > T) if closed else (abs(t) >= T):
            raise PreconditionError(f"event time {t} outside the window (-{T}, {T})")


def gibbs_kernel(model: SpectralModel, window: GibbsWindow, event, floor=DEFAULT_FLOOR):
    """Probability of a cylinder event under the window measure with fixed boundary."""
    _require_1d(model)
    ev = _normalize_event(event)
    _event_in_window(ev, window.T)
    i, j = _grid_index(model, window.left, floor), _grid_index(model, window.right, floor)
    prop = _Propagator(model)
    delta = np.zeros(model.grid.size)
    delta[i] = 1.0 / model.grid.cell
    T = window.T
    w = _chain_through(prop, delta, -T, _nodes(model, ev), T)[j]
    z = prop(delta, 2 * T)[j]
    scale = np.max(np.abs(model.kernel_matrix(2 * T)))
    if not z > KERNEL_FLOOR * scale:
        raise OutOfRangeError("partition function below floor", witness={"Z": float(z)})
    return float(w / z)


def stationary_probability(model: SpectralModel, event):
    """Probability of a cylinder event under the infinite-volume measure."""
    _require_1d(model)
    ev = _normalize_event(event)
    if not ev:
        return 1.0
    prop = _Propagator(model)
    t0, t1 = ev[0][0], ev[-1][0]
    vec = _chain_through(prop, model.phi0.copy(), t0, _nodes(model, ev), t1)
    return float(np.exp(model.lambda0 * (t1 - t0)) * np.sum(vec * model.phi0) * model.grid.cell)


def window_matrix(model: SpectralModel, S, event):
    """``W_A(x, y)``: weight of paths from ``x`` at ``-S`` through ``event`` to ``y`` at ``S``."""
    prop = _Propagator(model)
    eye = np.eye(model.grid.size) / model.grid.cell
    return _chain_rows(prop, eye, -S, _nodes(model, _normalize_event(event)), S)


def dlr_check(model: SpectralModel, S, T, pairs, floor=DEFAULT_FLOOR):
    """Check ``E[mu_S(A and B | boundary)] = mu(A and B)`` for cylinder pairs.

    ``A`` has times in ``(-S, S)``; ``B`` has times in ``[-T, -S]`` or
    ``[S, T]``. The left side conditions on ``(omega(-S), omega(S))`` through
    ``G = W_A / u(2S)`` and integrates against the stationary chain. The right
    side uses the ``phi0 x phi0`` representation over ``[-T, T]``.

    Returns
    -------
    dict with per-pair ``lhs``, ``rhs``, ``abs_err`` and the maximum error.
    """
    _require_1d(model)
    if not 0 < S < T:
        raise PreconditionError("need 0 < S < T")
    prop = _Propagator(model)
    h = model.grid.cell
    u2s = model.kernel_matrix(2 * S)
    keep = model.floor_mask(floor)
    mask2 = np.outer(keep, keep)
    if np.any(u2s[mask2] <= 0):
        raise OutOfRangeError("u(2S) not positive on the retained region")
    phi0 = model.phi0
    rows = []
    for A, B in pairs:
        A, B = _normalize_event(A), _normalize_event(B)
        _event_in_window(A, S)
        if any(-S < t < S or abs(t) > T for t, _, _ in B):
            raise PreconditionError("B must live in [-T, -S] and [S, T]")
        left = [e for e in B if e[0] <= -S]
        right = [(-t, a, b) for t, a, b in B if t >= S]
        # densities at the window edges, started from phi0 at -T (or T, by symmetry)
        f = _chain_through(prop, phi0.copy(), -T, _nodes(model, left), -S)
        g = _chain_through(prop, phi0.copy(), -T, _nodes(model, sorted(right)), -S)
        W = window_matrix(model, S, A)
        G = np.where(mask2, W / np.where(mask2, u2s, 1.0), 0.0)
        lhs = np.exp(2 * model.lambda0 * T) * h * h * float(f @ ((G * u2s) @ g))
        rhs_vec = _chain_through(prop, phi0.copy(), -T, _nodes(model, B + A), T)
        rhs = float(np.exp(2 * model.lambda0 * T) * np.sum(rhs_vec * phi0) * h)
        rows.append({"lhs": lhs, "rhs": rhs, "abs_err": abs(lhs - rhs)})
    return {"pairs": rows, "max_abs_err": max(r["abs_err"] for r in rows)}


def random_cylinder_pairs(model: SpectralModel, S, T, n_pairs, rng, n_times=1, width=(1.0, 4.0),
                          half=1.0):
    """Random cylinder pairs for ``dlr_check``: intervals of length in
    ``width`` centred in ``[-half, half]``."""

    def interval():
        w = rng.uniform(*width)
        c = rng.uniform(-half, half)
        return c - w / 2, c + w / 2

    pairs = []
    for _ in range(n_pairs):
        A = [(float(rng.uniform(-S, S) * 0.99), *interval()) for _ in range(n_times)]
        B = []
        for _ in range(n_times):
            side = rng.choice([-1.0, 1.0])
            B.append((float(side * rng.uniform(S, T)), *interval()))
        pairs.append((A, B))
    return pairs


# ------------------------------------------------------ boundary limits


def boundary_profile(kind, c=0.0, p=1.0, k=1.0):
    """Boundary value as a function of ``N``: constant, polynomial or exponential."""
    if kind == "constant":
        return lambda N: c
    if kind == "polynomial":
        return lambda N: c * float(N) ** p
    if kind == "exponential":
        return lambda N: c * np.exp(k * float(N))
    raise PreconditionError(f"unknown boundary profile {kind!r}")


def _snap(model, x):
    i = int(np.argmin(np.abs(model.x - x)))
    if abs(model.x[i] - x) > model.grid.h:
        raise OutOfRangeError("boundary value outside the computational box", witness=float(x))
    return float(model.x[i])


def boundary_convergence(model: SpectralModel, T, event, N_grid, left=None, right=None,
                         probe=2.0, floor=DEFAULT_FLOOR):
    """Window probabilities ``mu_N(event)`` as ``N`` grows versus the stationary value.

    ``left`` and ``right`` map ``N`` to boundary values (default constant 0);
    they are snapped to the grid and must lie inside the box. Also reports the kernel-ratio deviation
    ``max |R_N(x, y) - 1|`` over ``|x|, |y| <= probe``.
    """
    _require_1d(model)
    left = boundary_profile("constant") if left is None else left
    right = left if right is None else right
    ev = _normalize_event(event)
    _event_in_window(ev, T, closed=True)
    target = stationary_probability(model, ev)
    prop = _Propagator(model)
    inner = np.abs(model.x) <= probe
    phi0 = model.phi0
    rows = []
    for N in N_grid:
        if N <= T:
            raise PreconditionError("N must exceed T")
        xb, yb = _snap(model, left(N)), _snap(model, right(N))
        val = gibbs_kernel(model, GibbsWindow(float(N), xb, yb), ev, floor)
        i, j = _grid_index(model, xb, floor), _grid_index(model, yb, floor)
        di = np.zeros(model.grid.size)
        di[i] = 1.0 / model.grid.cell
        dj = np.zeros(model.grid.size)
        dj[j] = 1.0 / model.grid.cell
        a = prop(di, N - T)[inner]
        b = prop(dj, N - T)[inner]
        z = prop(di, 2 * N)[j]
        ratio = np.outer(a, b) / (z * np.exp(2 * model.lambda0 * T) * np.outer(phi0[inner], phi0[inner]))
        rows.append({"N": float(N), "left": xb, "right": yb, "value": val,
                     "abs_err": abs(val - target), "kernel_dev": float(np.max(np.abs(ratio - 1)))})
    errs = np.array([r["abs_err"] for r in rows])
    return {"target": target, "rows": rows,
            "monotone": bool(np.all(np.diff(errs) <= 0))}


# --------------------------------------------------------- typical paths


def omega_star_check(chain: PPhi1Chain, times, positions, N0=1):
    """Decay of ``e^{-Lambda |N|} / phi0(w(N))`` along sampled paths.

    Membership is judged on the sampled range only: a path counts as inside
    when the sequence over ``|N| >= N0`` has its maximum at the smallest
    ``|N|`` window and ends below its start.
    """
    phi_of = dict(zip(chain.x.tolist(), chain.phi0.tolist()))
    N = np.abs(np.asarray(times, float)) / chain.t_unit
    sel = N >= N0
    ph = np.vectorize(phi_of.get)(np.asarray(positions)[:, sel])
    seq = np.exp(-chain.model.gap * N[sel])[None, :] / ph
    order = np.argsort(N[sel], kind="stable")
    seq = seq[:, order]
    k = max(1, seq.shape[1] // 4)
    inside = (seq[:, -k:].max(axis=1) < seq[:, :k].max(axis=1)) & (seq[:, -1] < seq[:, 0])
    return {"fraction_inside": float(inside.mean()), "final_max": float(seq[:, -1].max()),
            "sampled_range": [float(N[sel].min()), float(N[sel].max())]}


def summability_exponent(a_n, min_terms=8):
    """Log-log slope of ``a_n`` over the second half of the supplied prefix."""
    a = np.asarray(a_n, float)
    if a.size < min_terms:
        raise PreconditionError("need at least %d terms of a_n" % min_terms)
    if np.any(a <= 0):
        raise PreconditionError("a_n must be positive")
    n = np.arange(1, a.size + 1)
    sl = slice(a.size // 2, None)
    return float(-np.polyfit(np.log(n[sl]), np.log(a[sl]), 1)[0])


def _union_bound_constant(chain: PPhi1Chain, kappa, N0, N_max, budget):
    """Smallest ``c`` with ``sum_N 2 P(|w| > c N^kappa) <= budget`` under ``rho``."""
    r = np.abs(chain.x)
    order = np.argsort(r)[::-1]
    rs, tail = r[order], np.cumsum(chain.rho[order])

    def prob_gt(level):
        k = np.searchsorted(-rs, -level, side="left")
        return float(tail[k - 1]) if k > 0 else 0.0

    Ns = np.arange(N0, N_max + 1)

    def total(c):
        return sum(2 * prob_gt(c * N**kappa) for N in Ns)

    lo, hi = 1e-6, float(r.max()) + 1.0
    if total(hi) > budget:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if total(mid) <= budget else (mid, hi)
    return hi


def typical_path_check(chain: PPhi1Chain, a_n, n_paths=200, N0=10, rng=None, pilot_rng=None,
                       pilot_paths=200, theta=None, delta=None, min_exponent=1.05,
                       growth_budget=0.025):
    """Eventual lower bound ``phi0(w(N)) >~ a_|N|`` along stationary paths.

    ``a_n`` is the prefix ``a_1 .. a_Nmax``. Its tail exponent must exceed
    ``min_exponent`` (numerical summability), otherwise the check refuses.
    The statistic ``max_{|N| >= N0} a_|N| / phi0(w(N))`` is thresholded at
    ten times its median on an independent pilot run.

    With ``theta`` and ``delta`` the growth bound
    ``|w(N)| <= c |N|^{(1+theta)/(delta+d+alpha)}`` is also tested, with
    ``c`` chosen by a union bound on the stationary law.
    """
    a = np.asarray(a_n, float)
    p = summability_exponent(a)
    if p < min_exponent:
        raise PreconditionError("a_n does not look summable", witness={"exponent": p})
    N_max = a.size
    if N0 >= N_max:
        raise PreconditionError("N0 must be below the prefix length")
    rng = np.random.default_rng(0) if rng is None else rng
    pilot_rng = np.random.default_rng(1) if pilot_rng is None else pilot_rng
    phi_of = dict(zip(chain.x.tolist(), chain.phi0.tolist()))
    t_idx = np.arange(-N_max, N_max + 1)
    sel = np.abs(t_idx) >= N0
    an = a[np.abs(t_idx[sel]) - 1]

    def stat(pos):
        ph = np.vectorize(phi_of.get)(pos[:, sel])
        return np.max(an[None, :] / ph, axis=1)

    _, pilot = sample_paths(chain, N_max, pilot_rng, pilot_paths)
    threshold = 10.0 * float(np.median(stat(pilot)))
    _, pos = sample_paths(chain, N_max, rng, n_paths)
    s = stat(pos)
    out = {"exponent": p, "threshold": threshold, "violation_fraction": float(np.mean(s > threshold)),
           "n_paths": int(n_paths), "N0": int(N0), "N_max": int(N_max)}
    if theta is not None and delta is not None:
        d, al = chain.model.params.d, chain.model.params.alpha
        kappa = (1.0 + theta) / (delta + d + al)
        c = _union_bound_constant(chain, kappa, N0, N_max, growth_budget)
        bound = c * np.abs(t_idx[sel]).astype(float) ** kappa
        viol = np.any(np.abs(pos[:, sel]) > bound[None, :], axis=1)
        out.update({"kappa": kappa, "c": c, "growth_violation_fraction": float(np.mean(viol)),
                    "bound_exceeds_grid": bool(c * N0**kappa > np.max(np.abs(chain.x)))})
    return out
