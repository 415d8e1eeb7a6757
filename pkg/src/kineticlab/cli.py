"""Command line front end.

Every subcommand reads a flat key = value config (or a finished run
directory), writes its artifacts into --out, and finishes with a
manifest.json naming them. Exit codes: 1 config or compatibility
errors, 2 numerical aborts, 3 on-disk contract violations.
"""

from __future__ import annotations

import argparse
import re
import sys
from pathlib import Path

import numpy as np

from . import characteristics as ch
from . import fileio
from . import kernels
from . import monokinetic as mk
from . import particles as pt
from . import scattering as sc
from . import solver
from .config import RunConfig, parse_config
from .errors import (ConfigError, GridMismatch, IOContractError, NotBlownUp,
                     NumericalAbort, SupportClipped, ValidationError)
from .grid import DistributionField, h_profile
from .homogeneous import HomogeneousState, exact_observables

SNAPSHOT_RE = re.compile(r"^snapshot_(\d+)\.f64$")


def _load_config(path_str: str) -> RunConfig:
    path = Path(path_str)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path)


def _out_dir(path_str) -> Path:
    out = Path(path_str)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sidecar_name(name: str) -> str:
    return Path(name).with_suffix(".json").name


def _finish(out: Path, subcommand: str, config: dict, seed: int,
            artifacts: list[str]) -> None:
    manifest = fileio.RunManifest(
        subcommand=subcommand, config=config, seed=seed,
        artifacts=tuple(artifacts),
        schema_versions=dict(fileio.SCHEMA_VERSIONS))
    fileio.write_manifest(out, manifest)
    print(f"run directory: {out}")


def _load_run_snapshots(run_dir: Path) -> tuple[fileio.RunManifest,
                                                list[DistributionField]]:
    """Manifest plus its snapshot fields, sorted by step index."""
    manifest = fileio.read_manifest(run_dir)
    found = []
    for name in manifest.artifacts:
        m = SNAPSHOT_RE.match(name)
        if m:
            found.append((int(m.group(1)), name))
    fields = [fileio.read_field(run_dir / name) for _, name in sorted(found)]
    return manifest, fields


# ------------------------------------------------------------ subcommands


def cmd_run(args) -> None:
    cfg = _load_config(args.config)
    out = _out_dir(args.out)
    res = solver.run(cfg.initial_field(), cfg.gamma, cfg.dt, cfg.n_steps,
                     scheme=cfg.scheme, frame=cfg.frame,
                     obs_stride=cfg.obs_stride,
                     snapshot_stride=cfg.snapshot_stride, with_nl=True)
    artifacts = ["observables.csv", "support.csv", "nonlinearity.csv"]
    fileio.write_observables(out / "observables.csv", res.series, cfg.d)
    fileio.write_support(out / "support.csv", res.support)
    fileio.write_nonlinearity(out / "nonlinearity.csv",
                              res.nl_times, res.nl_values)
    for k in sorted(res.snapshots):
        snap = res.snapshots[k]
        name = f"snapshot_{k}.f64"
        fileio.write_field(out / name, snap)
        artifacts += [name, _sidecar_name(name)]
        if cfg.d == 1:
            hname = f"hprofile_{k}.csv"
            fileio.write_hprofile(out / hname, res.grid.v_centers,
                                  h_profile(snap))
            artifacts.append(hname)
    print(f"{cfg.n_steps} steps at dt = {cfg.dt:g}: mass "
          f"{res.series.rows[-1].mass!r}, outflow {res.outflow_total:.3e}")
    _finish(out, "run", cfg.as_dict(), cfg.seed, artifacts)


def cmd_picard(args) -> None:
    cfg = _load_config(args.config)
    if cfg.nx > ch.MAX_CELLS or cfg.nv > ch.MAX_CELLS:
        raise ValidationError(
            f"iterate stacks are capped at {ch.MAX_CELLS} cells per axis: "
            f"nx = {cfg.nx}, nv = {cfg.nv}")
    out = _out_dir(args.out)
    stack = ch.picard_fixed_point(cfg.initial_field(), cfg.gamma,
                                  t_loc=cfg.t_loc, tol=cfg.picard_tol,
                                  max_iter=cfg.picard_max_iter,
                                  n_slices=cfg.picard_slices or None)
    fileio.write_picard_increments(out / "picard_increments.csv",
                                   stack.increments)
    fileio.write_field(out / "picard_final.f64", stack.slices[-1])
    print(f"{stack.n} iterations to horizon {stack.times[-1]:g}, last "
          f"increment {stack.increments[-1]:.3e}")
    _finish(out, "picard", cfg.as_dict(), cfg.seed,
            ["picard_increments.csv", "picard_final.f64",
             _sidecar_name("picard_final.f64")])


def cmd_particles(args) -> None:
    cfg = _load_config(args.config)
    out = _out_dir(args.out)
    psi = pt.PsiSpec(shape=cfg.psi_shape, radius=cfg.psi_radius)
    cal = pt.calibrate_kappa(cfg.gamma, psi, cfg.d)
    ens = pt.sample_patch(cfg.n_particles, cfg.d, cfg.patch_center_x,
                          cfg.patch_center_v, cfg.patch_half_width,
                          cal.kappa, psi, cfg.seed)
    refs: list[DistributionField] = []
    if args.run_dir is not None:
        _, refs = _load_run_snapshots(Path(args.run_dir))

    # Map each reference time onto a particle step index; times that do
    # not land on the step lattice are reported and skipped.
    wanted: dict[int, DistributionField] = {}
    for f in refs:
        k = int(round(f.time / cfg.dt))
        if abs(k * cfg.dt - f.time) > 1e-9 or k > cfg.n_steps:
            print(f"skipping reference at t = {f.time!r}: not on the "
                  f"particle step lattice", file=sys.stderr)
            continue
        wanted[k] = f

    rows = [pt.ensemble_row(ens)]
    matched: list[tuple[int, pt.ParticleEnsemble, DistributionField]] = []
    if 0 in wanted:
        matched.append((0, ens, wanted[0]))
    for k in range(1, cfg.n_steps + 1):
        ens = pt.step_rk4(ens, cfg.dt)
        if k % cfg.record_stride == 0 or k == cfg.n_steps:
            rows.append(pt.ensemble_row(ens))
        if k in wanted:
            matched.append((k, ens, wanted[k]))

    artifacts = ["particles_obs.csv", "convergence.csv"]
    fileio.write_particle_obs(out / "particles_obs.csv", rows, cfg.d)
    cmp_rows = pt.compare_to_kinetic([e for _, e, _ in matched],
                                     [f for _, _, f in matched])
    fileio.write_convergence(out / "convergence.csv",
                             [[cfg.n_particles, t, l1] for t, l1 in cmp_rows])
    bin_grid = refs[0].grid if refs else cfg.grid()
    empirical_at = {k: e for k, e, _ in matched}
    empirical_at.setdefault(cfg.n_steps, ens)
    for k in sorted(empirical_at):
        binned, n_out = pt.bin_empirical(empirical_at[k], bin_grid)
        binned.time = empirical_at[k].t
        name = f"empirical_{k}.f64"
        fileio.write_field(out / name, binned)
        artifacts += [name, _sidecar_name(name)]
        if n_out:
            print(f"{n_out} of {cfg.n_particles} particles outside the box "
                  f"at t = {binned.time:g}", file=sys.stderr)
    print(f"evolved {cfg.n_particles} particles (eps = {ens.eps:.3e}) to "
          f"t = {ens.t:g}")
    _finish(out, "particles", cfg.as_dict(), cfg.seed, artifacts)


def cmd_monokinetic(args) -> None:
    cfg = _load_config(args.config)
    out = _out_dir(args.out)
    sign = -1.0 if cfg.mono_profile == "collapse" else 1.0
    state = mk.MonokineticState.from_profiles(
        lambda x: sign * x, np.ones_like, cfg.mono_x_min, cfg.mono_x_max,
        cfg.n_markers)
    state, rows = mk.evolve_until(state, cfg.dt, cfg.t_end)
    fileio.write_mono_series(out / "mono_series.csv", rows)
    artifacts = ["mono_series.csv"]
    try:
        t_est, _ = mk.blowup_estimate(rows)
        print(f"markers crossed inside {state.bracket}: gap closes near "
              f"t = {t_est:.6g}")
    except NotBlownUp:
        print(f"no marker crossing up to t = {rows[-1].t:g}")
    if cfg.deposit_width > 0.0:
        f = mk.deposit_to_grid(state, cfg.grid(), cfg.deposit_width)
        fileio.write_field(out / "mono_field.f64", f)
        artifacts += ["mono_field.f64", _sidecar_name("mono_field.f64")]
    _finish(out, "monokinetic", cfg.as_dict(), cfg.seed, artifacts)


def cmd_scatter(args) -> None:
    run_dir = Path(args.run_dir)
    manifest, snaps = _load_run_snapshots(run_dir)
    if manifest.subcommand != "run":
        raise IOContractError(
            f"scatter needs a solver run directory, found a "
            f"{manifest.subcommand!r} manifest in {run_dir}")
    if len(snaps) < 2:
        raise IOContractError(
            f"need at least two snapshots in {run_dir} to form "
            f"residual pairs, found {len(snaps)}")
    nl = fileio.read_csv(run_dir / "nonlinearity.csv", fileio.NL_HEADER)
    out = _out_dir(args.out if args.out else run_dir / "scatter")
    d = int(manifest.config["d"])
    frame = str(manifest.config["frame"])
    if frame == "stream":
        pulls = [sc.PullbackField(f, f.time) for f in snaps]
    else:
        pulls = [sc.pullback(f, f.time) for f in snaps]
    rows = sc.scattering_rows(pulls, nl[:, 0], nl[:, 1], d)
    fileio.write_scattering(out / "scattering.csv", rows)
    if d == 1:
        print(sc.THEORY_FLAG_D1)
    expo = sc.tail_exponent(nl[:, 0], nl[:, 1])
    verdict = "integrable-looking" if expo < -1.0 else "not integrable"
    print(f"nonlinearity tail exponent ~ {expo:.3g} ({verdict})")
    print(f"residual over the last pair: {rows[-1].residual:.6e} "
          f"(bound {rows[-1].tail_t1:.6e})")
    config = dict(manifest.config)
    config["source_run"] = str(run_dir)
    _finish(out, "scatter", config, manifest.seed, ["scattering.csv"])


def cmd_compare(args) -> None:
    if len(args.run_dirs) != 2:
        raise ConfigError("compare needs exactly two --run-dir arguments")
    dir_a, dir_b = (Path(p) for p in args.run_dirs)
    _, snaps_a = _load_run_snapshots(dir_a)
    _, snaps_b = _load_run_snapshots(dir_b)
    out = _out_dir(args.out)
    rows = []
    for fa in snaps_a:
        for fb in snaps_b:
            if abs(fa.time - fb.time) <= 1e-9:
                if fa.grid != fb.grid:
                    raise GridMismatch(
                        f"snapshots at t = {fa.time:g} live on different "
                        f"grids")
                dist = float(np.abs(fa.values - fb.values).sum()
                             * fa.grid.cell_volume)
                rows.append((fa.time, dist))
                break
    if not rows:
        raise IOContractError(
            f"{dir_a} and {dir_b} share no snapshot times")
    fileio.write_compare(out / "compare.csv", rows)
    print(f"{len(rows)} matched times; largest L1 distance "
          f"{max(r[1] for r in rows):.6e}")
    _finish(out, "compare", {"run_a": str(dir_a), "run_b": str(dir_b)}, 0,
            ["compare.csv"])


def cmd_homogeneous(args) -> None:
    cfg = _load_config(args.config)
    if cfg.d != 1:
        raise ValidationError("the closed-form table covers d = 1 only")
    out = _out_dir(args.out)
    state = HomogeneousState.uniform_1d(cfg.gamma, cfg.patch_center_v,
                                        cfg.patch_half_width,
                                        cfg.patch_height)
    steps = sorted(set(range(0, cfg.n_steps + 1, cfg.obs_stride))
                   | {cfg.n_steps})
    rows = []
    for k in steps:
        t = k * cfg.dt
        obs = exact_observables(state, t)
        rows.append((t, obs["linf"], obs["R"], obs["energy"],
                     obs["entropy"]))
    fileio.write_homogeneous(out / "homogeneous.csv", rows)
    print(f"{len(rows)} rows; velocity spread contracts by "
          f"{rows[-1][2] / rows[0][2]:.3e} over [0, {cfg.t_end:g}]")
    _finish(out, "homogeneous", cfg.as_dict(), cfg.seed,
            ["homogeneous.csv"])


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kinetic",
        description="Grid, particle, and fixed-point runs for the "
                    "spatially local alignment model.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str, config=True, out_required=True):
        q = sub.add_parser(name, help=help_text)
        if config:
            q.add_argument("--config", required=True,
                           help="flat key = value config file")
        if out_required:
            q.add_argument("--out", required=True,
                           help="output directory (created if missing)")
        q.set_defaults(func=func)
        return q

    add("run", cmd_run, "integrate the kinetic equation on a phase grid")
    add("picard", cmd_picard,
        "short-horizon fixed-point iteration at coarse resolution")
    q = add("particles", cmd_particles,
            "evolve an interacting particle ensemble")
    q.add_argument("--run-dir", default=None,
                   help="kinetic run directory providing reference "
                        "snapshots for binned comparisons")
    add("monokinetic", cmd_monokinetic,
        "one-dimensional marker cloud with a frozen velocity profile")
    q = add("scatter", cmd_scatter,
            "pull back a run's snapshots and tabulate Cauchy residuals",
            config=False, out_required=False)
    q.add_argument("--run-dir", required=True,
                   help="finished solver run directory")
    q.add_argument("--out", default=None,
                   help="output directory (default: <run-dir>/scatter)")
    q = add("compare", cmd_compare,
            "L1 distances between two runs' matching snapshots",
            config=False)
    q.add_argument("--run-dir", action="append", required=True,
                   dest="run_dirs", help="run directory (give twice)")
    add("homogeneous", cmd_homogeneous,
        "closed-form observable table for the x-independent solution")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kernels.configure_threads()
    try:
        args.func(args)
    except (ConfigError, GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalAbort, SupportClipped) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 2
    except IOContractError as exc:
        print(f"broken run directory: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
