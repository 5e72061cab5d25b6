"""Grid discretization of ``H = (-Delta)^{alpha/2} + V`` and its eigenpairs.

The kinetic term is the Fourier multiplier ``|k|^alpha``. With the default
``exterior`` boundary the box is zero-padded before the transform, which
approximates the operator restricted to functions vanishing outside the box
(the process killed on leaving it). ``periodic`` uses the plain periodic box.

Grid functions are normalized so that ``sum_x phi(x)^2 h^d = 1``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, lobpcg

from .errors import ConfigError, NumericalError, OutOfRangeError, PreconditionError
from .potentials import PotentialSpec
from .stable import StableParams

MODEL_FORMAT_VERSION = 1
DEFAULT_V_CAP = 1e6
DEFAULT_FLOOR = 1e-10
DEFAULT_MEMORY_POINTS = 2**22
DEGENERACY_TOL = 1e-9
RESIDUAL_TOL = 1e-8
DENSE_LIMIT = 2048


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``x_j = -L + j h``, ``h = 2L/n``, on ``[-L, L)^d``.

    The origin is always a grid point (index ``n/2`` per axis).
    """

    d: int = 1
    L: float = 20.0
    n: int = 1024
    boundary: str = "exterior"
    pad: int = 4
    max_points: int = DEFAULT_MEMORY_POINTS

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigError("grids support d in {1, 2}")
        if not self.L > 0:
            raise ConfigError("half width L must be positive")
        n = int(self.n)
        if n < 4 or n & (n - 1):
            raise ConfigError("n must be a power of two >= 4")
        if self.boundary not in ("exterior", "periodic"):
            raise ConfigError("boundary must be 'exterior' or 'periodic'")
        if self.pad < 2 and self.boundary == "exterior":
            raise ConfigError("exterior boundary needs pad >= 2")
        if n**self.d > self.max_points:
            raise ConfigError(f"grid has {n**self.d} points, budget is {self.max_points}")

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def size(self):
        return self.n**self.d

    @property
    def cell(self):
        """Quadrature weight ``h^d``."""
        return self.h**self.d

    @property
    def axis(self):
        return -self.L + self.h * np.arange(self.n)

    def points(self):
        """Grid points, shape ``(n,)`` in d = 1 and ``(n*n, 2)`` in d = 2."""
        if self.d == 1:
            return self.axis
        xx, yy = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def radii(self):
        p = self.points()
        return np.abs(p) if self.d == 1 else np.sqrt(np.sum(p * p, axis=-1))

    def index_of(self, x, tol=1e-9):
        """Flat grid index of point ``x``; raises if ``x`` is off the grid."""
        x = np.atleast_1d(np.asarray(x, float))
        if x.size != self.d:
            raise ConfigError(f"point must have {self.d} coordinates")
        j = np.rint((x + self.L) / self.h).astype(int)
        if np.any(j < 0) or np.any(j >= self.n) or np.any(np.abs(-self.L + j * self.h - x) > tol * self.h + 1e-12):
            raise OutOfRangeError(f"point {x.tolist()} is not on the grid", witness=x.tolist())
        return int(j[0]) if self.d == 1 else int(j[0] * self.n + j[1])

    def as_dict(self):
        return {"d": self.d, "L": self.L, "n": self.n, "boundary": self.boundary, "pad": self.pad}


def _symbol(grid: GridSpec, alpha):
    m = grid.n * (grid.pad if grid.boundary == "exterior" else 1)
    k1 = 2 * np.pi * np.fft.fftfreq(m, grid.h)
    kr = 2 * np.pi * np.fft.rfftfreq(m, grid.h)
    if grid.d == 1:
        return np.abs(kr) ** alpha, m
    kk = np.sqrt(k1[:, None] ** 2 + kr[None, :] ** 2)
    return kk**alpha, m


class Hamiltonian:
    """Operator handle for ``H`` on a grid.

    Attributes
    ----------
    grid, params, potential
    v : potential values on the grid after capping
    cap_report : dict describing capped points
    """

    def __init__(self, grid: GridSpec, params: StableParams, V: PotentialSpec,
                 v_cap=DEFAULT_V_CAP, shift=0.0):
        if params.d != grid.d or V.d != grid.d:
            raise ConfigError("grid, process and potential dimensions differ")
        self.grid, self.params, self.potential = grid, params, V
        self.v_cap = v_cap
        self.shift = float(shift)
        self.v, self.cap_report = _potential_on_grid(grid, V, v_cap)
        self.v = self.v + self.shift
        self._symbol, self._m = _symbol(grid, params.alpha)
        self.kinetic_mean = float(np.mean(self._symbol))

    @property
    def shape(self):
        return (self.grid.size, self.grid.size)

    def kinetic(self, f):
        """Apply ``(-Delta)^{alpha/2}`` to grid function(s) ``f`` (columns)."""
        f = np.asarray(f, float)
        g, m = self.grid, self._m
        squeeze = f.ndim == 1
        if squeeze:
            f = f[:, None]
        if g.d == 1:
            out = np.fft.irfft(self._symbol[:, None] * np.fft.rfft(f, n=m, axis=0), n=m, axis=0)
            out = out[: g.n]
        else:
            k = f.shape[1]
            f2 = f.reshape(g.n, g.n, k)
            out = np.fft.irfftn(self._symbol[..., None] * np.fft.rfftn(f2, s=(m, m), axes=(0, 1)),
                                s=(m, m), axes=(0, 1))
            out = out[: g.n, : g.n].reshape(g.size, k)
        return out[:, 0] if squeeze else out

    def apply(self, f):
        f = np.asarray(f, float)
        vf = self.v * f if f.ndim == 1 else self.v[:, None] * f
        return self.kinetic(f) + vf

    __matmul__ = apply

    def as_linear_operator(self):
        return LinearOperator(self.shape, matvec=self.apply, matmat=self.apply, dtype=float)

    def dense(self):
        """Dense symmetric matrix of ``H``."""
        g = self.grid
        if g.d == 1:
            e0 = np.zeros(g.n)
            e0[0] = 1.0
            col = self.kinetic(e0)
            mat = linalg.toeplitz(col)
        else:
            mat = np.empty(self.shape)
            eye_block = 256
            for s in range(0, g.size, eye_block):
                cols = np.zeros((g.size, min(eye_block, g.size - s)))
                cols[np.arange(s, s + cols.shape[1]), np.arange(cols.shape[1])] = 1.0
                mat[:, s: s + cols.shape[1]] = self.kinetic(cols)
            mat = 0.5 * (mat + mat.T)
        mat[np.diag_indices_from(mat)] += self.v
        return mat

    def preconditioner(self):
        """Blend of the inverse kinetic multiplier and the inverse diagonal."""
        vp = np.maximum(self.v, 0.0)
        s = max(0.0, -float(self.v.min())) + 1.0
        km = self.kinetic_mean
        w = vp / (vp + km)
        g, m = self.grid, self._m
        inv_sym = 1.0 / (self._symbol + s)

        def solve(f):
            f = np.asarray(f, float)
            squeeze = f.ndim == 1
            if squeeze:
                f = f[:, None]
            if g.d == 1:
                kf = np.fft.irfft(inv_sym[:, None] * np.fft.rfft(f, n=m, axis=0), n=m, axis=0)[: g.n]
            else:
                f2 = f.reshape(g.n, g.n, -1)
                kf = np.fft.irfftn(inv_sym[..., None] * np.fft.rfftn(f2, s=(m, m), axes=(0, 1)),
                                   s=(m, m), axes=(0, 1))[: g.n, : g.n].reshape(g.size, -1)
            out = (1 - w)[:, None] * kf + (w / (vp + s + km))[:, None] * f
            return out[:, 0] if squeeze else out

        return LinearOperator(self.shape, matvec=solve, matmat=solve, dtype=float)


def _potential_on_grid(grid, V, v_cap):
    pts = grid.points()
    v = np.asarray(V.evaluate(pts), float).copy()
    capped = np.zeros(v.shape, bool)
    for s in V.singularities:
        loc = np.asarray(s.location, float)
        r = np.abs(pts - loc) if grid.d == 1 else np.sqrt(np.sum((pts - loc) ** 2, axis=-1))
        near = r < grid.h / 2
        if np.any(near):
            if v_cap is None:
                raise PreconditionError("singularity on a grid point and no cap set",
                                        witness=loc.tolist())
            v[near] = s.sign * v_cap
            capped |= near
    bad = ~np.isfinite(v)
    if np.any(bad):
        if v_cap is None:
            raise PreconditionError("potential is not finite on the grid")
        v[bad] = np.where(np.isnan(v[bad]), v_cap, np.sign(v[bad]) * v_cap)
        capped |= bad
    return v, {"n_capped": int(capped.sum()), "v_cap": v_cap}


def build_hamiltonian(grid: GridSpec, params: StableParams, V: PotentialSpec,
                      v_cap=DEFAULT_V_CAP) -> Hamiltonian:
    """Operator handle for the fractional Schrodinger operator on ``grid``."""
    return Hamiltonian(grid, params, V, v_cap)


# ---------------------------------------------------------------------------
# Eigen-decomposition
# ---------------------------------------------------------------------------


@dataclass
class SpectralModel:
    """Lowest eigenpairs of ``H`` on a grid.

    ``eigenvectors[:, k]`` is ``phi_k`` on the flattened grid, normalized in
    the grid inner product, with ``phi_0 > 0``.
    """

    grid: GridSpec
    params: StableParams
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    potential_name: str = ""
    potential_params: dict = field(default_factory=dict)
    v: np.ndarray = field(default=None, repr=False)
    residuals: np.ndarray = field(default=None)
    diagnostics: dict = field(default_factory=dict)
    potential: PotentialSpec | None = field(default=None, repr=False, compare=False)

    @property
    def n_modes(self):
        return len(self.eigenvalues)

    @property
    def lambda0(self):
        return float(self.eigenvalues[0])

    @property
    def gap(self):
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    @property
    def phi0(self):
        return self.eigenvectors[:, 0]

    @property
    def x(self):
        return self.grid.points()

    @property
    def complete(self):
        """True when every grid eigenpair is retained."""
        return self.n_modes == self.grid.size

    def floor_mask(self, floor=DEFAULT_FLOOR):
        p = self.phi0
        return p >= floor * p.max()

    def kernel_matrix(self, t, m=None):
        """``u(t, x_i, x_j)`` for all grid pairs from the first ``m`` modes."""
        m = self.n_modes if m is None else int(m)
        phi = self.eigenvectors[:, :m]
        return (phi * np.exp(-self.eigenvalues[:m] * t)) @ phi.T

    def intrinsic_matrix(self, t, floor=DEFAULT_FLOOR):
        """``e^{lambda0 t} u / (phi0 phi0)`` on the retained region."""
        keep = self.floor_mask(floor)
        u = self.kernel_matrix(t)[np.ix_(keep, keep)]
        p = self.phi0[keep]
        return np.exp(self.lambda0 * t) * u / np.outer(p, p), keep

    def save(self, path):
        meta = {
            "version": MODEL_FORMAT_VERSION,
            "grid": self.grid.as_dict(),
            "alpha": self.params.alpha,
            "d": self.params.d,
            "potential": {"name": self.potential_name, "params": self.potential_params},
            "diagnostics": self.diagnostics,
        }
        np.savez_compressed(
            path, meta=np.array(json.dumps(meta, sort_keys=True, default=_json_default)),
            eigenvalues=self.eigenvalues, eigenvectors=self.eigenvectors,
            v=self.v if self.v is not None else np.zeros(0),
            residuals=self.residuals if self.residuals is not None else np.zeros(0),
        )

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("version") != MODEL_FORMAT_VERSION:
                raise ConfigError("spectral model file version mismatch")
            g = meta["grid"]
            return cls(
                grid=GridSpec(g["d"], g["L"], g["n"], g["boundary"], g["pad"]),
                params=StableParams(meta["alpha"], meta["d"]),
                eigenvalues=z["eigenvalues"], eigenvectors=z["eigenvectors"],
                potential_name=meta["potential"]["name"],
                potential_params=meta["potential"]["params"],
                v=z["v"] if z["v"].size else None,
                residuals=z["residuals"] if z["residuals"].size else None,
                diagnostics=meta["diagnostics"],
            )


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def _dense_eigs(H, n_modes):
    mat = H.dense()
    if n_modes >= H.grid.size:
        w, v = linalg.eigh(mat)
    else:
        w, v = linalg.eigh(mat, subset_by_index=[0, n_modes - 1], driver="evr")
    return w, v


def _lobpcg_eigs(H, n_modes, tol, maxiter, seed=0):
    rng = np.random.default_rng(seed)
    N = H.grid.size
    block = n_modes + 2
    r = H.grid.radii()
    x0 = rng.standard_normal((N, block))
    x0[:, 0] = np.exp(-r)
    x0[:, 1] = H.grid.points() if H.grid.d == 1 else H.grid.points()[:, 0]
    x0[:, 1] *= np.exp(-r)
    A = H.as_linear_operator()
    M = H.preconditioner()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        w, v = lobpcg(A, x0, M=M, tol=tol, maxiter=maxiter, largest=False)
    order = np.argsort(w)
    v = v[:, order][:, :n_modes]
    # Rayleigh-Ritz on the converged block removes residual mixing
    q, _ = np.linalg.qr(v)
    hq = H.apply(q)
    w2, s = linalg.eigh(q.T @ hq)
    return w2, q @ s


def ground_state(H: Hamiltonian, n_modes=2, method="auto", tol=None, maxiter=5000,
                 check_residuals=True) -> SpectralModel:
    """Lowest ``n_modes`` eigenpairs of ``H``.

    Parameters
    ----------
    H : Hamiltonian
    n_modes : int
        At least 2 so that the gap is defined. Pass ``H.grid.size`` for the
        complete basis (dense solver).
    method : {"auto", "dense", "lobpcg"}
        ``auto`` uses the dense solver up to ``DENSE_LIMIT`` points.
    """
    if n_modes < 2:
        raise PreconditionError("need n_modes >= 2 for the spectral gap")
    N = H.grid.size
    n_modes = min(int(n_modes), N)
    if method == "auto":
        method = "dense" if (N <= DENSE_LIMIT or n_modes == N) else "lobpcg"
    if method == "dense":
        w, vec = _dense_eigs(H, n_modes)
    elif method == "lobpcg":
        w, vec = _lobpcg_eigs(H, n_modes, tol or 1e-10, maxiter)
    else:
        raise ConfigError(f"unknown eigensolver {method!r}")

    res = np.linalg.norm(H.apply(vec) - vec * w, axis=0)
    if method == "lobpcg":
        for _ in range(20):
            if np.all(res <= RESIDUAL_TOL * (1 + np.abs(w))):
                break
            w, vec = _refine(H, w, vec)
            res = np.linalg.norm(H.apply(vec) - vec * w, axis=0)
    if check_residuals:
        worst = res / (1 + np.abs(w))
        # dense residuals sit at rounding level times the operator norm
        lim = RESIDUAL_TOL if method == "lobpcg" else max(RESIDUAL_TOL, 1e-13 * _op_norm(H))
        if np.any(worst > lim):
            raise NumericalError("eigen-residuals above tolerance",
                                 {"residuals": res.tolist(), "method": method})

    vec = vec / np.sqrt(H.grid.cell)
    if vec[:, 0].sum() < 0:
        vec[:, 0] = -vec[:, 0]
    for k in range(1, vec.shape[1]):
        j = int(np.argmax(np.abs(vec[:, k])))
        if vec[j, k] < 0:
            vec[:, k] = -vec[:, k]
    diag = _diagnostics(H, w, vec)
    return SpectralModel(
        grid=H.grid, params=H.params, eigenvalues=np.asarray(w, float), eigenvectors=vec,
        potential_name=H.potential.name, potential_params=H.potential.params,
        v=H.v, residuals=res, diagnostics=diag, potential=H.potential,
    )


def _op_norm(H):
    return float(H._symbol.max() + np.abs(H.v).max())


def _refine(H, w, vec):
    """One block step: Rayleigh-Ritz on ``[V, M R]``."""
    r = H.apply(vec) - vec * w
    z = H.preconditioner().matmat(r)
    q, _ = np.linalg.qr(np.hstack([vec, z]))
    w2, s = linalg.eigh(q.T @ H.apply(q))
    k = vec.shape[1]
    return w2[:k], q @ s[:, :k]


def _diagnostics(H, w, vec):
    g, a = H.grid, H.params.alpha
    p0 = vec[:, 0]
    edge = g.radii() >= g.L - 2 * g.h if g.d == 1 else np.any(
        np.abs(g.points()) >= g.L - 2 * g.h, axis=-1)
    boundary_ratio = float(np.abs(p0[edge]).max() / np.abs(p0).max())
    resolution = 4.0 * (np.pi / (2 * g.L)) ** a
    gap = float(w[1] - w[0])
    no_gs = gap < resolution
    if H.potential.growth[0] in ("decaying", "bounded") and w[0] > -resolution:
        no_gs = True
    min_p0 = float(p0.min())
    return {
        "boundary_ratio": boundary_ratio,
        "boundary_ok": boundary_ratio < 1e-12,
        "resolution": resolution,
        "no_ground_state": bool(no_gs),
        "degenerate": bool(gap < DEGENERACY_TOL),
        "phi0_positive": bool(min_p0 > 0),
        "min_phi0": min_p0,
        "cap": H.cap_report,
    }


def solve(params: StableParams, V: PotentialSpec, L, n, n_modes=2, boundary="exterior",
          pad=4, method="auto", v_cap=DEFAULT_V_CAP) -> SpectralModel:
    """Convenience wrapper: grid, Hamiltonian and eigenpairs in one call."""
    grid = GridSpec(params.d, L, n, boundary, pad)
    return ground_state(build_hamiltonian(grid, params, V, v_cap), n_modes, method)


def cap_sensitivity(params, V, L, n, v_cap=DEFAULT_V_CAP, **kw):
    """Change of ``lambda_0`` when the singularity cap is raised tenfold."""
    a = solve(params, V, L, n, v_cap=v_cap, **kw).lambda0
    b = solve(params, V, L, n, v_cap=10 * v_cap, **kw).lambda0
    return abs(b - a)


def grid_convergence(params, V, L, ns=(1024, 2048, 4096), floor=1e-9, **kw):
    """``lambda_0`` over refinements and whether successive differences halve.

    Differences below ``floor * (1 + |lambda_0|)`` count as converged since
    they are at the eigensolver's resolution.
    """
    lam = np.array([solve(params, V, L, n, **kw).lambda0 for n in ns])
    diffs = np.abs(np.diff(lam))
    tiny = floor * (1 + abs(lam[-1]))
    ok = all(d2 <= 0.5 * d1 or d2 <= tiny for d1, d2 in zip(diffs[:-1], diffs[1:]))
    return {"ns": list(ns), "lambda0": lam.tolist(), "diffs": diffs.tolist(), "converged": bool(ok)}


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def t_min(model: SpectralModel, rel=1e-8):
    """Time after which dropped modes are below ``rel`` of the ground term."""
    spread = model.eigenvalues[-1] - model.eigenvalues[0]
    if spread <= 0:
        return np.inf
    return float(np.log(1 / rel) / spread)


def _idx(model, x):
    return model.grid.index_of(x)


def semigroup_kernel(model: SpectralModel, t, x, y, m=None, tol=None):
    """``u(t, x, y) = sum_{k<m} e^{-lambda_k t} phi_k(x) phi_k(y)`` at grid points.

    Raises
    ------
    NumericalError
        If ``tol`` is given and the last retained term exceeds it while modes
        are missing (truncation estimate).
    """
    if not t > 0:
        raise PreconditionError("t must be positive")
    m = model.n_modes if m is None else int(m)
    if m > model.n_modes:
        raise PreconditionError("m exceeds retained modes")
    i, j = _idx(model, x), _idx(model, y)
    phi = model.eigenvectors
    terms = np.exp(-model.eigenvalues[:m] * t) * phi[i, :m] * phi[j, :m]
    if tol is not None and m < model.grid.size:
        est = float(np.exp(-model.eigenvalues[m - 1] * t) * np.abs(phi[:, m - 1]).max() ** 2)
        if est > tol:
            raise NumericalError("mode truncation error above tolerance", {"estimate": est})
    return float(terms.sum())


def intrinsic_kernel(model: SpectralModel, t, x, y, floor=DEFAULT_FLOOR):
    """``e^{lambda0 t} u(t,x,y) / (phi0(x) phi0(y))``; refuses points below the floor."""
    i, j = _idx(model, x), _idx(model, y)
    p = model.phi0
    lim = floor * p.max()
    for k, pt in ((i, x), (j, y)):
        if p[k] < lim:
            raise OutOfRangeError("ground state below floor at point", witness=pt)
    if t < t_min(model):
        raise PreconditionError("t below t_min for this model", witness=t)
    u = semigroup_kernel(model, t, x, y)
    return float(np.exp(model.lambda0 * t) * u / (p[i] * p[j]))


def _exp_fit(t, s):
    t = np.asarray(t, float)
    s = np.asarray(s, float)
    ok = s > 0
    if ok.sum() < 2:
        raise NumericalError("decay curve underflowed before the fit window ended")
    A = np.vstack([np.ones(ok.sum()), -t[ok]]).T
    coef, res, *_ = np.linalg.lstsq(A, np.log(s[ok]), rcond=None)
    return float(coef[1]), float(coef[0])


def projection_decay(model: SpectralModel, t_grid, m=None):
    """Decay of ``max |u(t) - e^{-lambda0 t} phi0 phi0|`` over the grid.

    Returns
    -------
    dict with ``rate`` (expected near ``lambda_1``), ``gap_rate`` (``rate``
    minus ``lambda_0``, the shift-invariant part), ``t`` and ``s``.
    """
    t_grid = np.asarray(t_grid, float)
    if np.any(t_grid <= 2):
        raise PreconditionError("projection_decay needs t > 2")
    m = model.n_modes if m is None else int(m)
    phi = model.eigenvectors[:, 1:m]
    s = []
    for t in t_grid:
        corr = (phi * np.exp(-model.eigenvalues[1:m] * t)) @ phi.T
        s.append(float(np.abs(corr).max()))
    rate, c = _exp_fit(t_grid, s)
    return {"rate": rate, "gap_rate": rate - model.lambda0, "log_const": c,
            "t": t_grid.tolist(), "s": s}


def decay_fit(model: SpectralModel, window, V: PotentialSpec | None = None,
              max_retries=3, curvature_tol=0.25, floor=DEFAULT_FLOOR):
    """Power-law fit of the ground-state tail on ``window = (r_lo, r_hi)`` (d = 1).

    Returns ``slope`` of ``log phi0`` against ``log[1/(max(V,1)(1+|x|)^{d+alpha})]``
    and ``exponent``, the slope of ``log phi0`` against ``log|x|``. A window
    with curvature in the log-log plot is shrunk from the outside and refit.
    """
    if model.grid.d != 1:
        raise PreconditionError("decay_fit is implemented for d = 1")
    V = V or model.potential
    lo, hi = map(float, window)
    x = model.grid.axis
    p = model.phi0
    if hi > model.grid.L - model.grid.h or lo <= 0:
        raise PreconditionError("fit window must lie inside the grid")
    if V is not None and np.isfinite(V.negative_support) and lo <= V.negative_support:
        raise PreconditionError("fit window meets the support of the negative part")
    d, a = model.params.d, model.params.alpha
    tried = []
    for attempt in range(max_retries + 1):
        sel = (np.abs(x) >= lo) & (np.abs(x) <= hi)
        if sel.sum() < 8:
            break
        if np.any(p[sel] < floor * p.max()):
            raise PreconditionError("fit window reaches below the ground-state floor")
        r = np.abs(x[sel])
        lp = np.log(p[sel])
        lr = np.log(r)
        quad = np.polyfit(lr, lp, 2)
        span = lr.max() - lr.min()
        curvature = float(abs(quad[0]) * span**2)
        tried.append((lo, hi, curvature))
        if curvature <= curvature_tol:
            exponent = float(np.polyfit(lr, lp, 1)[0])
            vv = np.maximum(np.asarray(V.evaluate(x[sel]), float), 1.0) if V is not None else 1.0
            env = -np.log(vv) - (d + a) * np.log1p(r)
            slope = float(np.polyfit(env, lp, 1)[0])
            return {"slope": slope, "exponent": exponent, "window": (lo, hi),
                    "curvature": curvature, "attempts": tried}
        hi = lo + 0.8 * (hi - lo)
    raise NumericalError("decay fit window contaminated by boundary effects",
                         {"attempts": tried})
