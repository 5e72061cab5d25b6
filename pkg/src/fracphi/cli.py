"""Command-line front end.

Every command reads a YAML config, applies ``--set`` overrides, and writes
CSV curves and a JSON summary into ``--out-dir``. Each output starts with a
header carrying the package version and the sha256 of the effective config,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .errors import ConfigError, FracPhiError, NumericalError, PreconditionError
from .stable import StableParams

COMMANDS = ("density", "spectrum", "fk", "iuc", "gibbs", "paths", "kato")


# ------------------------------------------------------------------ output


def _plain(o):
    """Convert numpy containers and non-finite floats into JSON-safe values."""
    if isinstance(o, dict):
        return {str(k): _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    if isinstance(o, np.ndarray):
        return _plain(o.tolist())
    if isinstance(o, (np.bool_, bool)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "+inf" if f > 0 else "-inf"
        return f
    return o


class Writer:
    """Writes command outputs with a shared header."""

    def __init__(self, out_dir, command, cfg):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.sha = cfgmod.digest(cfg)
        self.files = []

    @property
    def header(self):
        return f"# fracphi {__version__} config_sha256={self.sha} command={self.command}"

    def csv(self, name, columns, rows):
        buf = io.StringIO()
        buf.write(self.header + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        return self._write(name, buf.getvalue())

    def json(self, name, payload):
        doc = {"meta": {"fracphi_version": __version__, "config_sha256": self.sha,
                        "command": self.command}}
        doc.update(_plain(payload))
        return self._write(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def npy(self, name, array):
        path = self.out / name
        with open(path, "wb") as fh:
            np.save(fh, np.ascontiguousarray(array))
        self.files.append(path)
        return path

    def _write(self, name, text):
        path = self.out / name
        path.write_text(text)
        self.files.append(path)
        return path

    def path(self, name):
        p = self.out / name
        self.files.append(p)
        return p


# ---------------------------------------------------------------- helpers


def _params(cfg):
    p = cfgmod.section(cfg, "params")
    try:
        return StableParams(float(p.get("alpha", 1.0)), int(p.get("d", 1)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"params: {exc}") from exc


def _potential(cfg, params):
    from .potentials import from_config

    sec = cfg.get("potential")
    if isinstance(sec, dict) and "d" not in sec and params.d != 1:
        sec = dict(sec, d=params.d)
    try:
        V = from_config(sec)
    except TypeError as exc:
        raise ConfigError(f"potential: {exc}") from exc
    if V.d != params.d:
        raise ConfigError(f"potential dimension {V.d} differs from params.d={params.d}")
    return V


def _axis(spec, default):
    """A grid from ``{start, stop, num}``, ``{geom: [a, b, n]}`` or a list."""
    spec = default if spec is None else spec
    if isinstance(spec, dict):
        if "geom" in spec:
            a, b, n = spec["geom"]
            return np.geomspace(float(a), float(b), int(n))
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    return np.asarray(spec, dtype=float).ravel()


def _fk_config(cfg, **extra):
    from .feynman_kac import FKConfig

    mc = cfgmod.section(cfg, "mc")
    kw = {k: mc[k] for k in ("dt", "n_paths", "threads", "chunk_size") if mc.get(k) is not None}
    kw["seed"] = int(mc["seed"])
    for k in ("integral_rule", "v_cap", "horizon"):
        if k in mc:
            kw[k] = mc[k]
    kw.update(extra)
    return FKConfig(**kw)


def _model(cfg, params, V, full_basis=False, n_modes=2, method="auto"):
    from .spectral import solve

    g = cfgmod.section(cfg, "grid")
    n = int(g.get("n", 1024))
    return solve(params, V, float(g.get("L", 20.0)), n,
                 n_modes=n**params.d if full_basis else int(n_modes),
                 boundary=g.get("boundary", "exterior"), pad=int(g.get("pad", 4)),
                 method="dense" if full_basis else method,
                 v_cap=float(g.get("v_cap", 1e6)))


# --------------------------------------------------------------- commands


def cmd_density(cfg, w, figures=False):
    from .stable import density_bounds_check

    params = _params(cfg)
    sec = cfgmod.section(cfg, "density")
    t = float(sec.get("t", 1.0))
    x = _axis(sec.get("x"), {"start": -10.0, "stop": 10.0, "num": 201})
    pts = x if params.d == 1 else np.column_stack([x] + [np.zeros_like(x)] * (params.d - 1))
    lower, value, upper = density_bounds_check(params, t, pts, sec.get("C"))
    lower, value, upper = (np.atleast_1d(a) for a in (lower, value, upper))
    w.csv("density.csv", ["x", "p", "lower", "upper"], zip(x, value, lower, upper))
    w.json("density.json", {"alpha": params.alpha, "d": params.d, "t": t, "n_points": len(x)})
    if figures:
        from .plotting import line_figure

        line_figure(w.path("density.png"), x, {"p": value, "lower": lower, "upper": upper},
                    "x", "p(t, x)", logy=True)


def cmd_spectrum(cfg, w, figures=False):
    from .spectral import decay_fit

    params = _params(cfg)
    V = _potential(cfg, params)
    sec = cfgmod.section(cfg, "spectrum")
    model = _model(cfg, params, V, n_modes=max(2, int(sec.get("n_modes", 2))),
                   method=sec.get("method", "auto"))
    out = {"lambda0": model.lambda0, "lambda1": float(model.eigenvalues[1]), "gap": model.gap,
           "eigenvalues": model.eigenvalues, "residuals": model.residuals,
           "no_ground_state": model.diagnostics["no_ground_state"],
           "diagnostics": model.diagnostics, "grid": model.grid.as_dict()}
    if sec.get("decay_window"):
        fit = decay_fit(model, tuple(sec["decay_window"]), V)
        out["decay"] = fit
    if sec.get("save_model"):
        model.save(w.path("model.npz"))
    w.json("spectrum.json", out)
    x = model.x
    if params.d == 1:
        w.csv("phi0.csv", ["x", "phi0"], zip(x, model.phi0))
    else:
        w.csv("phi0.csv", [f"x{i + 1}" for i in range(params.d)] + ["phi0"],
              (list(p) + [v] for p, v in zip(x, model.phi0)))
    if figures and params.d == 1:
        from .plotting import line_figure

        pos = x > 0
        line_figure(w.path("phi0.png"), x[pos], {"phi0": np.abs(model.phi0[pos])}, "x", "phi0",
                    logx=True, logy=True)


def cmd_fk(cfg, w, figures=False):
    from . import feynman_kac as fk

    params = _params(cfg)
    V = _potential(cfg, params)
    sec = cfgmod.section(cfg, "fk")
    mode = sec.get("mode", "kernel")
    fcfg = _fk_config(cfg)
    base = {"mode": mode, "n": fcfg.n_paths, "dt": fcfg.dt, "seed": fcfg.seed}
    t = float(sec.get("t", 1.0))
    if mode == "kernel":
        x, y = float(sec.get("x", 0.0)), float(sec.get("y", 0.0))
        res = fk.fk_kernel_bridge(x, y, t, V, params, fcfg, return_samples=bool(sec.get("dump")))
        est, samples = res if isinstance(res, tuple) else (res, None)
        out = dict(base, x=x, y=y, t=t, estimate=est.mean, stderr=est.stderr, censored=0.0,
                   extra=est.extra)
        if sec.get("spectral_check"):
            from .spectral import semigroup_kernel

            model = _model(cfg, params, V, full_basis=True)
            ref = semigroup_kernel(model, t, x, y)
            out["spectral"] = ref
            out["zscore"] = (est.mean - ref) / est.stderr
        if samples is not None:
            w.npy("fk_samples.npy", samples)
    elif mode == "expectation":
        x = float(sec.get("x", 0.0))
        est = fk.fk_expectation(x, t, lambda z: np.ones(np.shape(z)[0]), V, params, fcfg)
        out = dict(base, x=x, t=t, estimate=est.mean, stderr=est.stderr, censored=0.0)
    elif mode == "exit":
        center = float(sec.get("center", 0.0))
        radius = float(sec.get("radius", 1.0))
        x = float(sec.get("x", center))
        u, v = fk.exit_functionals(center, radius, V, x, params, fcfg)
        out = dict(base, x=x, center=center, radius=radius, u=u.as_dict(), v=v.as_dict(),
                   estimate=u.mean, stderr=u.stderr, censored=u.extra.get("censored", 0.0))
    elif mode == "growth":
        t_grid = _axis(sec.get("t_grid"), [1.0, 2.0, 4.0])
        x_grid = _axis(sec.get("x_grid"), {"start": -5.0, "stop": 5.0, "num": 11})
        res = fk.survival_growth(V, params, t_grid, x_grid, fcfg)
        out = dict(base, **res, censored=0.0)
        w.csv("fk_growth.csv", ["t", "log_sup"], zip(res["t"], res["sup"]))
    else:
        raise ConfigError(f"fk.mode must be kernel, expectation, exit or growth, not {mode!r}")
    w.json("fk.json", out)


def cmd_iuc(cfg, w, figures=False):
    from .iuc import classify, tail_bound_scan, uniform_convergence_scan

    params = _params(cfg)
    V = _potential(cfg, params)
    sec = cfgmod.section(cfg, "iuc")
    R_grid = _axis(sec.get("R_grid"), [10.0**k for k in range(1, 7)])
    verdict = classify(V, R_grid)
    out = {"verdict": verdict.as_dict()}
    c = verdict.curve
    w.csv("iuc_ratio.csv", ["R", "r", "r_ball_sup"], zip(c["R"], c["r"], c["r_ball_sup"]))
    if sec.get("spectral", True) and params.d == 1:
        model = _model(cfg, params, V, full_basis=True)
        t_grid = _axis(sec.get("t_grid"), [1.0, 2.0, 4.0])
        scan = uniform_convergence_scan(model, t_grid)
        out["uniform_convergence"] = scan
        out["tail_bound"] = [tail_bound_scan(model, t) for t in t_grid]
        w.csv("iuc_uniform.csv", ["t", "s"], zip(scan["t"], scan["s"]))
        if figures:
            from .plotting import line_figure

            line_figure(w.path("iuc_uniform.png"), scan["t"], {"s(t)": scan["s"]}, "t",
                        "max |u~ - 1|", logy=True)
    w.json("iuc.json", out)
    if figures:
        from .plotting import line_figure

        line_figure(w.path("iuc_ratio.png"), c["R"], {"r": c["r"], "ball sup": c["r_ball_sup"]},
                    "R", "r(R)", logx=True, logy=all(v > 0 for v in c["r"]))


def cmd_gibbs(cfg, w, figures=False):
    from . import gibbs as gb

    params = _params(cfg)
    V = _potential(cfg, params)
    sec = cfgmod.section(cfg, "gibbs")
    model = _model(cfg, params, V, full_basis=True)
    chain = gb.build_chain(model, float(sec.get("t_unit", 1.0)))
    out = {"lambda0": model.lambda0, "gap": model.gap, "chain_checks": chain.checks}
    seed = cfgmod.section(cfg, "mc").get("seed")
    if "dlr" in sec:
        d = sec["dlr"] or {}
        S, T = float(d.get("S", 1.0)), float(d.get("T", 2.0))
        rng = np.random.default_rng(int(d.get("event_seed", 0)))
        pairs = gb.random_cylinder_pairs(model, S, T, int(d.get("n_pairs", 20)), rng)
        res = gb.dlr_check(model, S, T, pairs)
        out["dlr"] = {"S": S, "T": T, "max_abs_err": res["max_abs_err"],
                      "tolerance": 1e-8, "passed": res["max_abs_err"] < 1e-8}
        w.csv("gibbs_dlr.csv", ["pair", "lhs", "rhs", "abs_err"],
              ((i, r["lhs"], r["rhs"], r["abs_err"]) for i, r in enumerate(res["pairs"])))
    if "boundary" in sec:
        b = sec["boundary"] or {}
        prof = b.get("profile", {"kind": "constant", "c": 0.0})
        prof = dict(prof)
        left = gb.boundary_profile(prof.pop("kind", "constant"), **prof)
        event = b.get("event", [[0.0, -1.0, 1.0]])
        N_grid = _axis(b.get("N_grid"), [2.0, 3.0, 4.0, 6.0])
        res = gb.boundary_convergence(model, float(b.get("T", 1.0)), event, N_grid, left)
        out["boundary"] = {"target": res["target"], "monotone": res["monotone"],
                           "final_abs_err": res["rows"][-1]["abs_err"]}
        rows = res["rows"]
        w.csv("gibbs_boundary.csv", ["N", "value", "abs_err", "kernel_dev"],
              ((r["N"], r["value"], r["abs_err"], r["kernel_dev"]) for r in rows))
        if figures:
            from .plotting import line_figure

            line_figure(w.path("gibbs_boundary.png"), [r["N"] for r in rows],
                        {"|mu_N - mu|": [max(r["abs_err"], 1e-300) for r in rows]}, "N",
                        "discrepancy", logy=True)
    if "typical" in sec:
        if seed is None:
            raise ConfigError("gibbs.typical samples paths: set mc.seed or pass --seed")
        ty = sec["typical"] or {}
        N_max = int(ty.get("N_max", 50))
        a_n = np.arange(1, N_max + 1, dtype=float) ** -float(ty.get("a_power", 2.0))
        main, pilot = (np.random.default_rng(s) for s in np.random.SeedSequence(int(seed)).spawn(2))
        res = gb.typical_path_check(chain, a_n, int(ty.get("n_paths", 200)), int(ty.get("N0", 10)),
                                    main, pilot, theta=ty.get("theta"), delta=ty.get("delta"))
        out["typical"] = res
    w.json("gibbs.json", out)


def cmd_paths(cfg, w, figures=False):
    from .montecarlo import run_chunked
    from .stable import sample_bridges, sample_paths

    params = _params(cfg)
    sec = cfgmod.section(cfg, "paths")
    mc = cfgmod.section(cfg, "mc")
    kind = sec.get("kind", "free")
    n_paths = int(sec.get("n_paths", 10))
    seed = int(mc["seed"])
    chunk = int(mc.get("chunk_size") or 20000)
    threads = int(mc.get("threads") or 1)
    if kind == "free":
        times = _axis(sec.get("times"), {"start": 0.0, "stop": 1.0, "num": 101})
        x0 = float(sec.get("x0", 0.0))
        parts = run_chunked(lambda n, rng: sample_paths(params, times, rng, n, x0),
                            n_paths, seed, chunk, threads)
    elif kind == "bridge":
        s, t = float(sec.get("s", 0.0)), float(sec.get("t", 1.0))
        inner = _axis(sec.get("times"), {"start": s, "stop": t, "num": 101})[1:-1]
        x, y = float(sec.get("x", 0.0)), float(sec.get("y", 0.0))
        parts = [p[1] for p in run_chunked(
            lambda n, rng: sample_bridges(params, x, s, y, t, inner, rng, n),
            n_paths, seed, chunk, threads)]
        times = np.concatenate([[s], inner, [t]])
    elif kind == "chain":
        from .gibbs import build_chain, sample_paths as chain_paths

        V = _potential(cfg, params)
        chain = build_chain(_model(cfg, params, V, full_basis=True), float(sec.get("t_unit", 1.0)))
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        times, pos = chain_paths(chain, int(sec.get("n_steps", 50)), rng, n_paths,
                                 sec.get("start"))
        parts = [pos]
    else:
        raise ConfigError(f"paths.kind must be free, bridge or chain, not {kind!r}")
    pos = np.concatenate(parts, axis=0)
    w.npy("paths.npy", pos)
    if params.d == 1:
        w.csv("paths.csv", ["path", "time", "x"],
              ((i, t, v) for i in range(pos.shape[0]) for t, v in zip(times, pos[i])))
    w.json("paths.json", {"kind": kind, "n_paths": pos.shape[0], "n_times": len(times),
                          "seed": seed, "shape": list(pos.shape)})
    if figures and params.d == 1:
        from .plotting import line_figure

        line_figure(w.path("paths.png"), times, {f"{i}": pos[i] for i in range(min(10, len(pos)))},
                    "t", "x")


def cmd_kato(cfg, w, figures=False):
    from .potentials import kato_check

    params = _params(cfg)
    V = _potential(cfg, params)
    sec = cfgmod.section(cfg, "kato")
    kw = {}
    if "epsilon_grid" in sec:
        kw["epsilon_grid"] = tuple(float(e) for e in sec["epsilon_grid"])
    for k in ("threshold", "min_slope"):
        if k in sec:
            kw[k] = float(sec[k])
    if "x_grid" in sec:
        kw["x_grid"] = _axis(sec["x_grid"], None)
    rep = kato_check(V, params, **kw)
    w.csv("kato.csv", ["epsilon", "sup_integral"], zip(rep.epsilon_grid, rep.sup_integrals))
    w.json("kato.json", {"verdict": rep.verdict, "slope": rep.slope,
                         "epsilon_grid": rep.epsilon_grid, "sup_integrals": rep.sup_integrals,
                         "argmax": rep.argmax, "diagnostics": rep.diagnostics})
    if figures:
        from .plotting import line_figure

        line_figure(w.path("kato.png"), rep.epsilon_grid, {"sup integral": rep.sup_integrals},
                    "epsilon", "sup_x integral", logx=True, logy=True)


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


# ------------------------------------------------------------------- main


def build_parser():
    ap = argparse.ArgumentParser(prog="fracphi", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"fracphi {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "") + " command")
        p.add_argument("--config", "-c", help="YAML config file")
        p.add_argument("--seed", type=int, help="overrides mc.seed")
        p.add_argument("--threads", type=int, help="overrides mc.threads")
        p.add_argument("--out-dir", "-o", default=".", help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, e.g. grid.n=2048")
        p.add_argument("--figures", action="store_true",
                       help="also write PNG figures (needs matplotlib)")
    return ap


def effective_config(args):
    cfg = cfgmod.load(args.config)
    for a in args.set:
        cfgmod.apply_override(cfg, a)
    if args.seed is not None:
        cfg["mc"]["seed"] = args.seed
    if args.threads is not None:
        cfg["mc"]["threads"] = args.threads
    # thread count does not change results, so keep it out of the hash
    threads = cfg["mc"].pop("threads", 1)
    cfgmod.validate(cfg, args.command)
    return cfg, threads


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg, threads = effective_config(args)
        w = Writer(args.out_dir, args.command, cfg)
        cfg["mc"]["threads"] = threads
        if cfg.get("cache_dir"):
            from .stable import set_cache_dir

            set_cache_dir(cfg["cache_dir"])
        HANDLERS[args.command](cfg, w, figures=args.figures)
    except FracPhiError as exc:
        kind = {ConfigError: "config", NumericalError: "numerical",
                PreconditionError: "precondition"}
        label = next((v for k, v in kind.items() if isinstance(exc, k)), "error")
        print(f"fracphi {args.command}: {label} error: {exc}", file=sys.stderr)
        return exc.exit_code
    for p in w.files:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
