"""SVG line charts of run traces (log-scale training error and test loss)."""

from pathlib import Path
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

Y_FLOOR = 1e-16

_CHARTS = (
    ("error_vs_iter", "iter", "train_error", "iteration", "F(w) - F*"),
    ("error_vs_ege", "cum_ege", "train_error", "effective gradient evaluations", "F(w) - F*"),
    ("testloss_vs_ege", "cum_ege", "test_loss", "effective gradient evaluations", "test loss"),
)


def clip_for_log(y) -> np.ndarray:
    """Values below ``Y_FLOOR`` (including zero and negatives) raised to the floor."""
    return np.clip(np.asarray(y, dtype=float), Y_FLOOR, None)


def _columns(trace) -> dict:
    return {
        "iter": np.asarray(trace.iters, dtype=float),
        "cum_ege": np.asarray(trace.cum_ege, dtype=float),
        "train_error": np.asarray(trace.train_error, dtype=float),
        "test_loss": np.asarray(trace.test_loss, dtype=float),
    }


def emit_plots(traces: dict, out_dir, dataset: str = "dataset") -> list[Path]:
    """Write three SVG charts plus ``<dataset>_traces.csv`` for ``{label: RunTrace}``.

    Values below 1e-16 are clipped for the log axis. Returns the written paths.
    """
    if not traces or all(len(t) == 0 for t in traces.values()):
        raise ValueError("no trace rows to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for stem, xkey, ykey, xlabel, ylabel in _CHARTS:
        fig, ax = plt.subplots(figsize=(6, 4))
        for label, trace in traces.items():
            cols = _columns(trace)
            y = clip_for_log(cols[ykey])
            marker = "o" if len(y) == 1 else None
            ax.plot(cols[xkey], y, label=label, marker=marker)
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(dataset)
        ax.legend()
        fig.tight_layout()
        path = out / f"{dataset}_{stem}.svg"
        fig.savefig(path, format="svg")
        plt.close(fig)
        written.append(path)

    path = out / f"{dataset}_traces.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "iter", "cum_ege", "train_error", "test_loss", "step_len", "inner_iters", "wall_ms"])
        for label, t in traces.items():
            for row in zip(t.iters, t.cum_ege, t.train_error, t.test_loss, t.step_len, t.inner_iters, t.wall_ms):
                writer.writerow([label] + [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    written.append(path)
    return written
