"""Optional figures for CLI runs. matplotlib is imported only when asked for."""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError("--figures needs matplotlib (pip install 'artifact[figures]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def line_figure(path, x, ys, xlabel, ylabel, title="", logx=False, logy=False):
    """Write one line plot. ``ys`` maps a legend label to a y-array."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(ys) > 1:
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    # fixed metadata keeps repeated runs byte-stable
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path
