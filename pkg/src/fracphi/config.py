"""Run configuration: YAML file, dotted overrides and a content hash."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from pathlib import Path

import yaml

from .errors import ConfigError

DEFAULTS = {
    "params": {"alpha": 1.0, "d": 1},
    "grid": {"L": 20.0, "n": 1024, "boundary": "exterior", "pad": 4},
    "potential": {"name": "power", "delta": 2.0},
    "mc": {"n_paths": 10000, "dt": 0.01, "seed": None, "threads": 1, "chunk_size": 20000},
    "cache_dir": None,
}

# sections each command needs beyond the defaults
REQUIRED = {
    "density": ("params",),
    "spectrum": ("params", "grid", "potential"),
    "fk": ("params", "potential", "mc"),
    "iuc": ("params", "potential"),
    "gibbs": ("params", "grid", "potential"),
    "paths": ("params", "mc"),
    "kato": ("params", "potential"),
}
STOCHASTIC = {"fk", "paths"}


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e-3`` style floats (YAML 1.2 form)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def _parse(text):
    return yaml.load(text, Loader=_Loader)


def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in (extra or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load(path=None):
    """Read a YAML config (or ``{}``) and merge it over the defaults."""
    data = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = _parse(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    out = _merge(DEFAULTS, data)
    # potential parameters are name-specific, so a user section replaces the default
    if "potential" in data:
        out["potential"] = copy.deepcopy(data["potential"])
    return out


def apply_override(cfg, assignment):
    """Apply ``"a.b.c=value"``; the value is parsed as YAML.

    Setting ``potential.name`` starts a fresh potential section, since
    parameters of the previous potential would not apply.
    """
    if "=" not in assignment:
        raise ConfigError(f"override must look like key=value: {assignment!r}")
    key, raw = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty override key in {assignment!r}")
    try:
        value = _parse(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}") from exc
    if parts == ["potential", "name"]:
        cfg["potential"] = {"name": value}
        return cfg
    node = cfg
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"override path {key!r} crosses a non-mapping")
        node = nxt
    node[parts[-1]] = value
    return cfg


def validate(cfg, command):
    if command not in REQUIRED:
        raise ConfigError(f"unknown command {command!r}")
    for sec in REQUIRED[command]:
        if not isinstance(cfg.get(sec), (dict, list, str)):
            raise ConfigError(f"section {sec!r} required for {command}")
    if command in STOCHASTIC and cfg["mc"].get("seed") is None:
        raise ConfigError(f"{command} is stochastic: set mc.seed or pass --seed")
    return cfg


def section(cfg, name):
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def digest(cfg):
    """sha256 of the canonical JSON form of the config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
