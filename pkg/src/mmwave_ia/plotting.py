"""Figures rendered next to the CSV/JSON outputs.

Uses the Agg canvas directly (no pyplot state) and strips the PNG software
stamp so identical data gives identical bytes.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .iohelpers import atomic_write_bytes

DPI = 110


def _save(fig: Figure, path: str | Path) -> None:
    FigureCanvasAgg(fig)
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=DPI, metadata={"Software": None})
    atomic_write_bytes(path, buf.getvalue())


def plot_codebook(codebook, path: str | Path, beams=(1, 7, 13, 19)) -> None:
    """Polar view of a few steered beams plus a cartesian view of the base pattern."""
    fig = Figure(figsize=(10, 4.2))
    ax_p = fig.add_subplot(1, 2, 1, projection="polar")
    ax_c = fig.add_subplot(1, 2, 2)
    az = codebook.angles
    floor = -40.0
    for b in beams:
        g = np.maximum(codebook.gain(b, az) - codebook.config.boresight_gain_db, floor)
        ax_p.plot(np.deg2rad(az), g - floor, lw=1, label=f"beam {b}")
    ax_p.set_yticks([])
    ax_p.set_title("steered beams (dB, clipped at -40)", fontsize=9)
    ax_p.legend(fontsize=7, loc="lower left", bbox_to_anchor=(-0.15, -0.15))
    local = np.where(az > 180, az - 360, az)
    order = np.argsort(local)
    ax_c.plot(local[order], codebook.base_pattern[order])
    ax_c.set_xlim(-180, 180)
    ax_c.set_ylim(max(codebook.config.gain_floor, -60), 3)
    ax_c.axhline(-3, color="grey", lw=0.6, ls="--")
    ax_c.set_xlabel("beam-local azimuth (deg)")
    ax_c.set_ylabel("gain (dB)")
    ax_c.set_title("base pattern", fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_confusion(confusion: np.ndarray, path: str | Path, title: str = "") -> None:
    conf = np.asarray(confusion, dtype=np.float64)
    rows = conf.sum(axis=1, keepdims=True)
    frac = np.divide(conf, rows, out=np.zeros_like(conf), where=rows > 0)
    n = conf.shape[0]
    fig = Figure(figsize=(6, 5.2))
    ax = fig.add_subplot(1, 1, 1)
    im = ax.imshow(frac, cmap="viridis", vmin=0, vmax=1, origin="upper", extent=(0.5, n + 0.5, n + 0.5, 0.5))
    fig.colorbar(im, ax=ax, label="fraction of true-beam row")
    ax.set_xlabel("predicted beam")
    ax.set_ylabel("true beam")
    ticks = list(range(1, n + 1, max(1, n // 12)))
    ax.set_xticks(ticks)
    ax.set_yticks(ticks)
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_sweep(rows: list[dict], path: str | Path, title: str = "") -> None:
    """Accuracy against swept-beam count, one line per (policy, subset origin, s)."""
    groups: dict[tuple, list[tuple[int, float]]] = {}
    for r in rows:
        groups.setdefault((r["policy"], r["subset_origin"], r["s"]), []).append((int(r["m"]), float(r["accuracy"])))
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot(1, 1, 1)
    for (policy, origin, s), pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=f"{policy} {origin} s={s}")
    ax.set_xlabel("beams swept (m)")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 101)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7)
    ax.set_title(title, fontsize=9)
    fig.tight_layout()
    _save(fig, path)


def plot_history(history: dict, path: str | Path) -> None:
    epochs = np.arange(1, len(history["train_loss"]) + 1)
    fig = Figure(figsize=(6.4, 3.6))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(epochs, history["train_loss"], marker="o", ms=3, color="C0")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss", color="C0")
    if history.get("val_accuracy"):
        ax2 = ax.twinx()
        ax2.plot(epochs, history["val_accuracy"], marker="s", ms=3, color="C1")
        ax2.set_ylabel("validation accuracy (%)", color="C1")
    fig.tight_layout()
    _save(fig, path)


def plot_sfs(trace, path: str | Path) -> None:
    sizes = [r.size for r in trace.rounds]
    fig = Figure(figsize=(6.4, 3.8))
    ax = fig.add_subplot(1, 1, 1)
    ax.plot(sizes, trace.accuracies, marker="o", ms=3)
    for r in trace.rounds:
        ax.annotate(str(r.chosen), (r.size, r.accuracy), textcoords="offset points", xytext=(0, 5), fontsize=7, ha="center")
    ax.set_xlabel("subset size")
    ax.set_ylabel("validation accuracy (%)")
    ax.set_title("forward selection (labels: beam added)", fontsize=9)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_ia_time(rows: list[dict], path: str | Path) -> None:
    fig = Figure(figsize=(6.4, 3.8))
    ax = fig.add_subplot(1, 1, 1)
    for policy in sorted({r["policy"] for r in rows}):
        pts = [(r["m"], r["total_time_s"] * 1e3) for r in rows if r["policy"] == policy]
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=policy)
    ax.set_xlabel("beams swept (m)")
    ax.set_ylabel("IA time (ms)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)
