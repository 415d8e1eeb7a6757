"""Figure builders: observable panels, h-profile overlays, heatmaps.

Each takes file paths, validates them against the documented contract,
and returns a matplotlib Figure; saving is the caller's business. An
empty (header-only) time series renders empty axes rather than failing.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from .errors import SchemaMismatch
from .reading import read_field, read_table

HPROFILE_HEADER = ["v", "h"]


def plot_observables(csv_path):
    """2x2 panels over time: mass, momentum components, energy, entropy."""
    header, data = read_table(csv_path)
    for name in ("t", "mass", "energy", "entropy"):
        if name not in header:
            raise SchemaMismatch(f"{csv_path} lacks column {name!r}")
    mom = [k for k, name in enumerate(header) if name.startswith("mom_")]
    t = data[:, header.index("t")]
    fig, axes = plt.subplots(2, 2, figsize=(9.0, 6.0),
                             constrained_layout=True)
    panels = [("mass", [header.index("mass")]),
              ("momentum", mom),
              ("energy", [header.index("energy")]),
              ("entropy", [header.index("entropy")])]
    for ax, (title, cols) in zip(axes.ravel(), panels):
        for c in cols:
            ax.plot(t, data[:, c], label=header[c])
        ax.set_title(title)
        ax.set_xlabel("t")
        if len(cols) > 1:
            ax.legend(fontsize=8)
    return fig


def plot_hprofiles(groups):
    """One panel per group, overlaying h(v) curves at successive times.

    groups: sequence of (label, [csv paths]); all files within a group
    must share one velocity grid.
    """
    if not groups:
        raise ValueError("need at least one group of profiles")
    fig, axes = plt.subplots(1, len(groups),
                             figsize=(4.0 * len(groups), 3.2),
                             squeeze=False, constrained_layout=True)
    for ax, (label, paths) in zip(axes[0], groups):
        if not paths:
            raise ValueError(f"group {label!r} lists no profiles")
        v_ref = None
        for p in paths:
            header, data = read_table(p)
            if header != HPROFILE_HEADER:
                raise SchemaMismatch(
                    f"{p} header {header} does not match "
                    f"{HPROFILE_HEADER}")
            v, h = data[:, 0], data[:, 1]
            if v_ref is None:
                v_ref = v
            elif v.shape != v_ref.shape or not np.array_equal(v, v_ref):
                raise SchemaMismatch(
                    f"{p} lives on a different velocity grid than "
                    f"{paths[0]}")
            ax.plot(v, h, label=Path(p).stem)
        ax.set_title(label)
        ax.set_xlabel("v")
        ax.set_ylabel("h")
        ax.legend(fontsize=7)
    return fig


def plot_heatmap(entries):
    """Side-by-side x-v heatmaps, one per (label, field path) entry.

    d = 2 fields are shown as their (x1, v1) marginal.
    """
    if not entries:
        raise ValueError("need at least one field to draw")
    fig, axes = plt.subplots(1, len(entries),
                             figsize=(4.6 * len(entries), 3.6),
                             squeeze=False, constrained_layout=True)
    for ax, (label, path) in zip(axes[0], entries):
        f = read_field(path)
        if f.d == 1:
            img = f.values
        else:
            img = f.values.sum(axis=(1, 3)) * f.dx * f.dv
        nx, nv = img.shape
        extent = (f.x0, f.x0 + nx * f.dx, f.v0, f.v0 + nv * f.dv)
        ax.imshow(img.T, origin="lower", extent=extent, aspect="auto",
                  cmap="viridis")
        ax.set_title(f"{label} (t = {f.time:g})")
        ax.set_xlabel("x")
        ax.set_ylabel("v")
    return fig
