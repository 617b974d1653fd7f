"""CSV tables and static SVG figures with byte-stable output."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UsageError

ARTIFACT_VERSION = "0.1.0"
SCHEMA_VERSION = 1

SCHEMAS = {
    "spikes": ("replica", "particle", "time"),
    "snapshot": ("particle", "x1", "x2", "x3", "v_canonical"),
    "density": ("v", "u"),
    "w1_convergence": ("N", "t", "w1_v", "w1_joint_or_nan"),
    "w1_convergence_stats": ("N", "t", "w1_v_mean", "w1_v_stderr", "n_replicas"),
    "fp": ("m", "x1", "x2", "x3", "weight", "k", "v_center", "rho"),
    "firing_rate": ("t", "total_firing_mass"),
    "mkv_samples": ("sample", "x1", "x2", "x3", "v_canonical", "t"),
    "mkv_check": ("t", "n_samples", "w1_v"),
    "energy": ("N", "alpha", "sup_l2_energy", "grad_l2_integral", "time_regularity",
               "sup_martingale_sq", "n_replicas"),
    "mild_check": ("phi", "t", "mild_residual", "weak_residual"),
    "euler_order": ("dt_coarse", "dt_fine", "mean_sup_diff", "stderr", "n_replicas"),
    "euler_order_fit": ("order",),
    "cascade": ("replica", "first_spike", "cascade_fraction", "first_cluster_spike",
                "second_cluster_spike", "delay"),
}


def fmt(x) -> str:
    """17 significant digits for floats (round-trips any double); plain ints and strings."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def csv_text(schema: str, rows) -> str:
    cols = SCHEMAS[schema]
    out = [f"# ifmeanfield {ARTIFACT_VERSION} schema={schema} v{SCHEMA_VERSION}", ",".join(cols)]
    for row in rows:
        if len(row) != len(cols):
            raise UsageError(f"{schema}: row has {len(row)} fields, expected {len(cols)}")
        out.append(",".join(fmt(x) for x in row))
    return "\n".join(out) + "\n"


def write_csv(path, schema: str, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(csv_text(schema, rows))
    return path


def read_csv(path) -> tuple[str, list[str], np.ndarray]:
    """Return (schema, header, float rows) of a file written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    schema = lines[0].split("schema=")[1].split()[0]
    header = lines[1].split(",")
    rows = [[float(c) for c in ln.split(",")] for ln in lines[2:]]
    return schema, header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def time_tag(t: float) -> str:
    """Stable file-name token for a time value: 0.5 -> '0.5', 1.0 -> '1'."""
    return f"{float(t):.10g}"


# ---------------------------------------------------------------- SVG

@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray


@dataclass
class Raster:
    """Spike raster: one row per neuron, one mark per spike."""

    rows: dict = field(default_factory=dict)  # neuron -> spike times


def emit_svg(data, title: str = "", xlabel: str = "", ylabel: str = "", loglog: bool = False,
             path=None) -> str:
    """Render line series (a list of :class:`Series`) or a :class:`Raster` to SVG text.

    Output is deterministic: fixed hash salt, no date metadata, and element ids
    derived from the data order.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(data, Raster):
        if not data.rows or all(len(v) == 0 for v in data.rows.values()):
            raise UsageError("raster has no spikes")
    else:
        data = list(data)
        if not data or any(len(s.x) == 0 for s in data):
            raise UsageError("nothing to plot")

    with matplotlib.rc_context({"svg.hashsalt": "ifmeanfield", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        if isinstance(data, Raster):
            for row, (neuron, times) in enumerate(sorted(data.rows.items())):
                times = np.asarray(times, dtype=float)
                ax.plot(times, np.full(len(times), row), linestyle="none", marker="|",
                        markersize=8, color="black", gid=f"raster-row-{neuron}")
            ax.set_ylabel(ylabel or "neuron")
        else:
            for i, s in enumerate(data):
                plot = ax.loglog if loglog else ax.plot
                plot(np.asarray(s.x, float), np.asarray(s.y, float), marker="o", markersize=3,
                     label=s.label, gid=f"series-{i}")
            if len(data) > 1:
                ax.legend()
            ax.set_ylabel(ylabel)
        ax.set_xlabel(xlabel)
        if title:
            ax.set_title(title)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    text = buf.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    return text
