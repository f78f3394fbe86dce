"""Optional SVG charts for the dataset analysis (needs matplotlib)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .reports import Table


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("SVG output needs matplotlib (pip install 'artifact[plots]')") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def analysis_svgs(periods: Table, pvalues: Table, acf: Table, out_dir: str | Path) -> list[Path]:
    plt = _pyplot()
    out_dir = Path(out_dir)
    written = []

    idx = periods.column("period")
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(idx, periods.column("n_samples"), marker="o", color="tab:blue")
    ax.set_xlabel("period")
    ax.set_ylabel("samples", color="tab:blue")
    rate = [np.nan if r is None else r for r in periods.column("positive_rate")]
    ax2 = ax.twinx()
    ax2.plot(idx, rate, marker="s", color="tab:red")
    ax2.set_ylabel("positive rate", color="tab:red")
    fig.tight_layout()
    written.append(out_dir / "period_stats.svg")
    fig.savefig(written[-1])
    plt.close(fig)

    grid = np.array([[np.nan if v is None else v for v in row[1:]] for row in pvalues.rows])
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis", origin="lower")
    labels = pvalues.header[1:]
    step = max(1, len(labels) // 12)
    ax.set_xticks(range(0, len(labels), step), labels[::step])
    ax.set_yticks(range(0, len(labels), step), labels[::step])
    ax.set_xlabel("period")
    ax.set_ylabel("period")
    fig.colorbar(im, ax=ax, label="p-value")
    fig.tight_layout()
    written.append(out_dir / "rate_pvalues.svg")
    fig.savefig(written[-1])
    plt.close(fig)

    series = list(dict.fromkeys(acf.column("series")))
    if series:
        fig, axes = plt.subplots(1, len(series), figsize=(4 * len(series), 3), squeeze=False)
        for ax, name in zip(axes[0], series):
            rows = [r for r in acf.rows if r[0] == name]
            lags = [r[1] for r in rows]
            ax.vlines(lags, 0, [r[2] for r in rows])
            ax.axhline(rows[0][3], ls="--", color="grey")
            ax.axhline(-rows[0][3], ls="--", color="grey")
            ax.set_title(name)
            ax.set_xlabel("lag")
        fig.tight_layout()
        written.append(out_dir / "autocorrelation.svg")
        fig.savefig(written[-1])
        plt.close(fig)
    return written
