"""Figures written next to the CSV reports.

Everything renders through the Agg backend straight to files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import audio  # noqa: E402

STYLE = {
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.color": "gainsboro",
    "font.size": 9,
    "figure.dpi": 120,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_trace(raw: np.ndarray, path, nodes=None, max_steps: int = 60, title: str = ""):
    """Potentials over the first steps, one line per node."""
    nodes = list(range(min(raw.shape[1], 8))) if nodes is None else list(nodes)
    steps = np.arange(1, min(raw.shape[0], max_steps) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for v in nodes:
            ax.plot(steps, raw[: steps.size, v], lw=1, label=f"v{v}")
        ax.set_xlabel("step")
        ax.set_ylabel("potential")
        if title:
            ax.set_title(title)
        if len(nodes) <= 10:
            ax.legend(fontsize=7, ncol=2, frameon=False)
        return _save(fig, path)


def plot_voice(s: np.ndarray, path, nodes=None, sample_rate: int = audio.DEFAULT_RATE,
               spectrogram_node: int = 0, title: str = ""):
    """Spectra of a few nodes (left) and the spectrogram of one node (right)."""
    nodes = list(range(min(s.shape[1], 4))) if nodes is None else list(nodes)
    l = s.shape[0]
    freqs = np.arange(l // 2 + 1) * sample_rate / l
    with plt.rc_context(STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(9, 3), gridspec_kw={"width_ratios": [2.5, 1]})
        for v in nodes:
            left.semilogy(freqs, audio.spectrum(s[:, v]) + 1e-12, lw=0.8, label=f"v{v}")
        left.set_xlabel("frequency (Hz)")
        left.set_ylabel("magnitude")
        left.legend(fontsize=7, frameon=False)
        if l >= 256:
            spec = audio.spectrogram(s[:, spectrogram_node])
            extent = (0, spec.shape[0] * 128 / sample_rate, 0, sample_rate / 2)
            right.imshow(np.log10(spec.T + 1e-12), origin="lower", aspect="auto", extent=extent, cmap="magma")
            right.set_xlabel("time (s)")
            right.set_ylabel("frequency (Hz)")
            right.grid(False)
            right.set_title(f"v{spectrogram_node}", fontsize=8)
        else:
            right.set_axis_off()
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_loss(history, path, title: str = ""):
    """Per-step loss with the per-epoch mean overlaid."""
    if not history:
        return None
    steps = np.array([h[0] for h in history])
    losses = np.array([h[2] for h in history])
    epochs = np.array([h[1] for h in history])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(steps, losses, lw=0.6, color="0.6", label="step")
        uniq = np.unique(epochs)
        ends = [steps[epochs == e].max() for e in uniq]
        means = [losses[epochs == e].mean() for e in uniq]
        ax.plot(ends, means, lw=1.2, color="C0", label="epoch mean")
        ax.set_xlabel("optimisation step")
        ax.set_ylabel("1 - rho")
        ax.set_ylim(bottom=0)
        ax.legend(frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_correlations(reports, path, title: str = ""):
    """Per-graph Pearson correlation, one bar group per measure."""
    graphs: list[str] = []
    for rep in reports:
        for rec in rep.records:
            if rec.graph not in graphs:
                graphs.append(rec.graph)
    measures = [rep.measure for rep in reports]
    width = 0.8 / max(len(reports), 1)
    x = np.arange(len(graphs))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.45 * len(graphs) + 1), 3))
        for i, rep in enumerate(reports):
            vals = {r.graph: (r.rho if not r.degenerate else np.nan) for r in rep.records}
            ax.bar(x + i * width, [vals.get(g, np.nan) for g in graphs], width, label=measures[i])
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(graphs, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("Pearson rho")
        ax.set_ylim(-1, 1)
        ax.axhline(0, color="k", lw=0.5)
        ax.legend(frameon=False, fontsize=7)
        if title:
            ax.set_title(title)
        return _save(fig, path)
