"""Line plots of per-epoch curves, written as SVG."""

from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# Fixed salt and no date stamp: identical curves give identical files.
plt.rcParams.update({"svg.hashsalt": "zachvit", "font.size": 10, "lines.linewidth": 1.8})

Series = tuple[Sequence[float], Sequence[float | None]]


def line_plot(
    path: Path | str,
    series: Mapping[str, Series],
    title: str,
    x_label: str = "epoch",
    y_label: str = "",
    y_limits: tuple[float, float] | None = None,
) -> Path:
    """
    One polyline per named series. Points whose y value is None are
    skipped, which breaks the line there.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name, (xs, ys) in series.items():
        values = [float("nan") if y is None else y for y in ys]
        ax.plot(list(xs), values, marker="o", markersize=3, label=name)
    ax.set_title(title)
    ax.set_xlabel(x_label)
    if y_label:
        ax.set_ylabel(y_label)
    if y_limits is not None:
        ax.set_ylim(*y_limits)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(loc="best", frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
