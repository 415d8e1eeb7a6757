"""Contract tests for the figure scripts, on synthetic run directories.

Inputs are written by hand to the documented formats so the tests stay
independent of the solver package.
"""

import json

import matplotlib
import numpy as np
import pytest

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from kineticplots.cli import main  # noqa: E402
from kineticplots.errors import SchemaMismatch  # noqa: E402
from kineticplots.figures import (plot_heatmap, plot_hprofiles,  # noqa: E402
                                  plot_observables)
from kineticplots.reading import read_field, read_table  # noqa: E402

OBS_HEADER = ("t,mass,mom_1,energy,entropy,lp_2,R,S,dE_dt,dH_dt,"
              "dLp_2_dt")


def write_observables(path, flat=False):
    t = np.linspace(0.0, 1.0, 6)
    energy = np.full(6, 0.5) if flat else 0.5 * np.exp(-2.0 * t)
    entropy = np.zeros(6) if flat else t
    lines = [OBS_HEADER]
    for k in range(6):
        lines.append(",".join(repr(float(x)) for x in (
            t[k], 2.0, -0.6, energy[k], entropy[k], 0.25, 1.3, 12.0,
            -0.3, 0.5, 0.1)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_hprofile(path, amp, v=None):
    if v is None:
        v = np.linspace(-2.0, 2.0, 21)
    lines = ["v,h"]
    for vk in v:
        lines.append(f"{float(vk)!r},{amp * float(np.exp(-vk**2))!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_field(path, values, time=3.0):
    nx, nv = values.shape
    path.write_bytes(np.ascontiguousarray(values, dtype="<f8").tobytes())
    meta = {"d": 1, "nx": nx, "nv": nv, "dx": 0.5, "dv": 0.25,
            "x0": 0.0, "v0": -2.0, "time": time}
    path.with_suffix(".json").write_text(json.dumps(meta), encoding="utf-8")


def make_run(root, gamma):
    root.mkdir(parents=True, exist_ok=True)
    write_observables(root / "observables.csv")
    artifacts = ["observables.csv"]
    for k, amp in ((0, 1.0), (5, 1.4), (10, 2.0)):
        write_hprofile(root / f"hprofile_{k}.csv", amp)
        artifacts.append(f"hprofile_{k}.csv")
    x = np.exp(-0.5 * (np.linspace(-2, 2, 16)) ** 2)
    v = np.exp(-(np.linspace(-2, 2, 21)) ** 2)
    write_field(root / "snapshot_10.f64", np.outer(x, v))
    artifacts += ["snapshot_10.f64", "snapshot_10.json"]
    manifest = {"subcommand": "run", "seed": 1,
                "config": {"gamma": gamma, "d": 1},
                "artifacts": artifacts, "schema_versions": {"manifest": 1}}
    (root / "manifest.json").write_text(json.dumps(manifest),
                                        encoding="utf-8")
    return root


def test_observable_panels_render(tmp_path):
    write_observables(tmp_path / "obs.csv")
    fig = plot_observables(tmp_path / "obs.csv")
    assert len(fig.axes) == 4
    assert all(ax.lines for ax in fig.axes)
    plt.close(fig)


def test_header_only_series_renders_empty_axes(tmp_path):
    (tmp_path / "obs.csv").write_text(OBS_HEADER + "\n", encoding="utf-8")
    fig = plot_observables(tmp_path / "obs.csv")
    assert all(len(ax.lines[0].get_xdata()) == 0 for ax in fig.axes[:1])
    plt.close(fig)


def test_missing_column_is_schema_mismatch(tmp_path):
    (tmp_path / "obs.csv").write_text("t,mass\n0.0,1.0\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch, match="energy"):
        plot_observables(tmp_path / "obs.csv")


def test_ragged_row_is_schema_mismatch(tmp_path):
    (tmp_path / "t.csv").write_text("a,b\n1.0\n", encoding="utf-8")
    with pytest.raises(SchemaMismatch, match="line 2"):
        read_table(tmp_path / "t.csv")


def test_hprofile_overlay_and_grid_mismatch(tmp_path):
    write_hprofile(tmp_path / "h0.csv", 1.0)
    write_hprofile(tmp_path / "h1.csv", 2.0)
    fig = plot_hprofiles([("gamma = 1", [tmp_path / "h0.csv",
                                         tmp_path / "h1.csv"])])
    assert len(fig.axes[0].lines) == 2
    plt.close(fig)
    write_hprofile(tmp_path / "h2.csv", 1.0,
                   v=np.linspace(-1.0, 1.0, 21))
    with pytest.raises(SchemaMismatch, match="different velocity grid"):
        plot_hprofiles([("gamma = 1", [tmp_path / "h0.csv",
                                       tmp_path / "h2.csv"])])


def test_single_profile_renders_one_curve(tmp_path):
    write_hprofile(tmp_path / "h0.csv", 1.0)
    fig = plot_hprofiles([("gamma = 1", [tmp_path / "h0.csv"])])
    assert len(fig.axes[0].lines) == 1
    plt.close(fig)


def test_heatmap_renders_and_zero_field_is_uniform(tmp_path):
    write_field(tmp_path / "a.f64", np.zeros((8, 9)))
    fig = plot_heatmap([("zero", tmp_path / "a.f64")])
    img = fig.axes[0].images[0].get_array()
    assert float(np.ptp(img)) == 0.0
    plt.close(fig)


def test_field_length_mismatch_is_schema_mismatch(tmp_path):
    write_field(tmp_path / "a.f64", np.ones((8, 9)))
    raw = (tmp_path / "a.f64").read_bytes()
    (tmp_path / "a.f64").write_bytes(raw[:-8])
    with pytest.raises(SchemaMismatch, match="bytes"):
        read_field(tmp_path / "a.f64")


def test_make_figures_end_to_end_read_only(tmp_path):
    run_a = make_run(tmp_path / "g01", 0.1)
    run_b = make_run(tmp_path / "g50", 5.0)
    before = sorted(p.name for p in run_a.iterdir())
    out = tmp_path / "figs"
    assert main(["--run-dir", str(run_a), "--run-dir", str(run_b),
                 "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["heatmap.png", "hprofiles.png",
                     "observables_g01.png", "observables_g50.png"]
    assert all((out / n).stat().st_size > 0 for n in names)
    assert sorted(p.name for p in run_a.iterdir()) == before


def test_make_figures_is_deterministic(tmp_path):
    run = make_run(tmp_path / "g10", 1.0)
    out1, out2 = tmp_path / "f1", tmp_path / "f2"
    assert main(["--run-dir", str(run), "--out", str(out1)]) == 0
    assert main(["--run-dir", str(run), "--out", str(out2)]) == 0
    for name in ("observables_g10.png", "hprofiles.png", "heatmap.png"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_make_figures_rejects_bad_schema(tmp_path, capsys):
    run = make_run(tmp_path / "g10", 1.0)
    (run / "observables.csv").write_text("t,mass\n0.0,1.0\n",
                                         encoding="utf-8")
    assert main(["--run-dir", str(run), "--out",
                 str(tmp_path / "figs")]) == 1
    assert "schema mismatch" in capsys.readouterr().err
