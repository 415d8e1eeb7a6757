"""make_figures: render the standard figures for finished run directories.

Reads each directory's manifest to find its artifacts, writes PNGs into
--out, and touches nothing inside the run directories. Exit code 1 on
any contract violation.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import SchemaMismatch  # noqa: E402
from .figures import plot_heatmap, plot_hprofiles, plot_observables  # noqa: E402
from .reading import read_manifest  # noqa: E402

SNAP_RE = re.compile(r"^snapshot_(\d+)\.f64$")
HPROF_RE = re.compile(r"^hprofile_(\d+)\.csv$")


def render_all(run_dirs: list[Path], out: Path, dpi: int) -> list[Path]:
    written = []

    def save(fig, name: str) -> None:
        path = out / name
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)

    profile_groups = []
    heat_entries = []
    for rd in run_dirs:
        manifest = read_manifest(rd)
        label = f"gamma = {manifest['config'].get('gamma')}"
        save(plot_observables(rd / "observables.csv"),
             f"observables_{rd.name}.png")
        profs = sorted((int(m.group(1)), name)
                       for name in manifest["artifacts"]
                       if (m := HPROF_RE.match(name)))
        if profs:
            profile_groups.append((label, [rd / n for _, n in profs]))
        snaps = sorted((int(m.group(1)), name)
                       for name in manifest["artifacts"]
                       if (m := SNAP_RE.match(name)))
        if snaps:
            heat_entries.append((label, rd / snaps[-1][1]))
    if profile_groups:
        save(plot_hprofiles(profile_groups), "hprofiles.png")
    if heat_entries:
        save(plot_heatmap(heat_entries), "heatmap.png")
    return written


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="make_figures",
        description="Render observable panels, h-profile overlays, and "
                    "final-snapshot heatmaps for one or more runs.")
    ap.add_argument("--run-dir", action="append", required=True,
                    dest="run_dirs", help="finished run directory "
                    "(repeat for side-by-side figures)")
    ap.add_argument("--out", required=True,
                    help="directory for the PNGs (created if missing)")
    ap.add_argument("--dpi", type=int, default=150)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        written = render_all([Path(p) for p in args.run_dirs], out,
                             args.dpi)
    except SchemaMismatch as exc:
        print(f"schema mismatch: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
