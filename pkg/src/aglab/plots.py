"""Deterministic SVG log-log plots of sweep tables."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import atomic_write_text  # noqa: E402
from .verify import RESPONSES, fit_loglog, read_sweep_csv  # noqa: E402

_RC = {"svg.hashsalt": "aglab", "svg.fonttype": "path", "path.simplify": False}


def loglog_svg(x, y, xlabel: str, ylabel: str, title: str) -> str:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        ax.loglog(x, y, "o", color="tab:blue", label="runs")
        try:
            fit = fit_loglog(x, y)
        except ValueError:
            fit = None
        if fit is not None:
            xs = np.geomspace(x[x > 0].min(), x[x > 0].max(), 50)
            ax.loglog(xs, fit.predict(xs), "-", color="tab:red", label=f"slope {fit.slope:.3f}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(loc="best")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def emit_plots(csv_text: str, out_dir) -> list[Path]:
    """One SVG per response column of a sweep table."""
    rows = read_sweep_csv(csv_text)
    out_dir = Path(out_dir)
    written = []
    for name, (xk, yk) in RESPONSES.items():
        x = [float(r[xk]) for r in rows]
        y = [float(r[yk]) for r in rows]
        svg = loglog_svg(x, y, xk, yk, name.replace("_", " "))
        written.append(atomic_write_text(out_dir / f"{name}.svg", svg))
    return written
