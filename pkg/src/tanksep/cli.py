"""Command-line front end.

    tanksep <command> [--config FILE] [--out DIR] [--seed N] [--grid N]
                      [--workers N] [--emit-snapshots] [duration overrides]

Commands: trajectory, separate, matrix, noise, highdim, lyapunov,
observability.  Configuration is an INI file; keys carry their units in
the name (``t_train_time_units``).  Exit status is 0 on success, 1 on a
numerical failure (including any invalid matrix entry) and 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .attractors import SYSTEM_NAMES, get_attractor, integrate_rk4, lyapunov_spectrum, normalize, on_attractor_state
from .errors import ConfigError, InvalidInputError, NumericalError, TanksepError
from .highdim import KsSpec, Lorenz96Spec, integrate_ks, integrate_lorenz96, ks_initial, lorenz96_initial
from .observability import combined_states, summarize_swaps, swap_symmetry_check, univalence_probe, write_swap_report
from .pipeline import (ExperimentConfig, HIGHDIM_SOURCES, SOURCE_TRANSIENT, source_key, content_hash,
                       correlation_per_channel, labeled_rng, noise_sweep, run_matrix, run_separation,
                       write_manifest)
from .tank import TankConfig
from .trajectory import atomic_write_text, matrix_to_csv

COMMANDS = ("trajectory", "separate", "matrix", "noise", "highdim", "lyapunov", "observability")

# section -> key -> (type, default); None default means "derived elsewhere"
SCHEMA = {
    "experiment": {
        "source_a": (str, "Lorenz"),
        "source_b": (str, "Rossler"),
        "t_dump_time_units": (float, 600.0),
        "t_train_time_units": (float, 600.0),
        "t_test_time_units": (float, 600.0),
        "alpha": (float, 1e-3),
        "noise_sigma": (float, 0.0),
        "master_seed": (int, 0),
    },
    "tank": {
        "grid_cells": (int, 128),
        "gravity_length_per_time2": (float, 9.8),
        "drag_per_time_unit": (float, 0.3),
        "dt_time_units": (float, 0.03),
        "n_probes": (int, 2000),
        "filter_seed": (int, 0),
        "probe_seed": (int, 1),
        "courant_target": (float, 0.45),
        "cfl_limit": (float, 0.6),
        "input_gain": (float, 1.0),
    },
    "trajectory": {
        "source": (str, "Lorenz"),
        "duration_time_units": (float, 5000.0),
        "sample_dt_time_units": (float, 0.03),
        "offset_time_units": (float, 0.0),
        "normalize": (bool, False),
    },
    "matrix": {
        "systems": (str, "all"),
        "include_diagonal": (bool, True),
    },
    "noise": {
        "sigmas": (str, "0.01, 0.1, 1"),
    },
    "highdim": {
        "grid_cells": (int, 256),
        "drag_per_time_unit": (float, 0.6),
        "input_gain": (float, 0.30618621784789724),
    },
    "lyapunov": {
        "systems": (str, "all"),
        "total_time_units": (float, 2000.0),
        "qr_interval_time_units": (float, 0.1),
        "transient_time_units": (float, 100.0),
    },
    "observability": {
        "source_a": (str, "Lorenz"),
        "source_b": (str, "Lorenz"),
        "n_states": (int, 100),
        "k_max": (int, 3),
        "ratio_threshold": (float, 1e-2),
        "collision_threshold": (float, 1e-4),
        "univalence_samples": (int, 200),
    },
}


class Config:
    """Typed view of an INI file with field-level diagnostics."""

    def __init__(self, path=None):
        self.path = path
        self._parser = configparser.ConfigParser(interpolation=None)
        self._lines = []
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {path}")
            text = p.read_text()
            self._lines = text.splitlines()
            try:
                self._parser.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from None
            self._check_known()

    def _where(self, section, key=None):
        """``path:line`` of a section header or key, for messages."""
        sec_re = re.compile(r"^\s*\[\s*" + re.escape(section) + r"\s*\]\s*$")
        in_section = False
        for no, line in enumerate(self._lines, 1):
            if sec_re.match(line):
                in_section = True
                if key is None:
                    return f"{self.path}:{no}"
                continue
            if in_section and re.match(r"^\s*\[", line):
                in_section = False
            if in_section and key is not None and re.match(r"^\s*" + re.escape(key) + r"\s*[=:]", line):
                return f"{self.path}:{no}"
        return str(self.path) if self.path else "<defaults>"

    def _check_known(self):
        for section in self._parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{self._where(section)}: unknown section [{section}]")
            for key in self._parser[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{self._where(section, key)}: unknown field {section}.{key}")

    def get(self, section, key):
        kind, default = SCHEMA[section][key]
        if not self._parser.has_option(section, key):
            return default
        raw = self._parser.get(section, key)
        try:
            if kind is bool:
                return self._parser.getboolean(section, key)
            return kind(raw)
        except ValueError:
            raise ConfigError(
                f"{self._where(section, key)}: field {section}.{key} = {raw!r} is not a valid {kind.__name__}") from None

    def fail(self, section, key, message):
        return ConfigError(f"{self._where(section, key)}: field {section}.{key}: {message}")


def _systems(cfg, section):
    raw = cfg.get(section, "systems")
    if raw.strip().lower() == "all":
        return SYSTEM_NAMES
    try:
        return tuple(get_attractor(s.strip()).name for s in raw.split(",") if s.strip())
    except InvalidInputError as exc:
        raise cfg.fail(section, "systems", str(exc)) from None


def _source(cfg, section, key, allow_highdim=True):
    raw = cfg.get(section, key)
    try:
        name = source_key(raw)
    except InvalidInputError:
        allowed = SYSTEM_NAMES + (HIGHDIM_SOURCES if allow_highdim else ())
        raise cfg.fail(section, key, f"unknown source {raw!r}; expected one of {', '.join(allowed)}") from None
    if name in HIGHDIM_SOURCES and not allow_highdim:
        raise cfg.fail(section, key, f"{name} is not a 3-D attractor")
    return name


def _tank(cfg, args, section="tank", grid=None, drag=None, gain=None):
    n = cfg.get("tank", "grid_cells") if grid is None else grid
    if args.grid is not None:
        n = args.grid
    try:
        return TankConfig(
            nx=n, ny=n,
            g=cfg.get("tank", "gravity_length_per_time2"),
            b=cfg.get("tank", "drag_per_time_unit") if drag is None else drag,
            dt=cfg.get("tank", "dt_time_units"),
            n_probes=cfg.get("tank", "n_probes"),
            filter_seed=cfg.get("tank", "filter_seed"),
            probe_seed=cfg.get("tank", "probe_seed"),
            courant_target=cfg.get("tank", "courant_target"),
            cfl_limit=cfg.get("tank", "cfl_limit"),
            input_gain=cfg.get("tank", "input_gain") if gain is None else gain)
    except InvalidInputError as exc:
        raise ConfigError(f"{cfg._where(section)}: invalid tank settings: {exc}") from None


def _experiment(cfg, args, **overrides):
    seed = cfg.get("experiment", "master_seed") if args.seed is None else args.seed
    values = dict(
        source_a=_source(cfg, "experiment", "source_a"),
        source_b=_source(cfg, "experiment", "source_b"),
        t_dump=cfg.get("experiment", "t_dump_time_units"),
        t_train=cfg.get("experiment", "t_train_time_units"),
        t_test=cfg.get("experiment", "t_test_time_units"),
        alpha=cfg.get("experiment", "alpha"),
        noise_sigma=cfg.get("experiment", "noise_sigma"),
        master_seed=seed,
    )
    for name in ("t_dump", "t_train", "t_test"):
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    values.update(overrides)
    if "tank" not in values:
        values["tank"] = _tank(cfg, args)
    try:
        return ExperimentConfig(**values)
    except InvalidInputError as exc:
        raise ConfigError(f"{cfg._where('experiment')}: invalid experiment settings: {exc}") from None


class Run:
    """Output directory bookkeeping: files written, manifest, timing."""

    def __init__(self, out, command):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.files = []
        self.start = time.time()

    def path(self, name):
        p = self.out / name
        self.files.append(p)
        return p

    def finish(self, cfg=None, extra=None, input_hash=None):
        outputs = [f"{p.name} sha1={content_hash(p.read_bytes())}" for p in self.files if p.exists()]
        extra = dict(extra or {})
        extra.setdefault("command", self.command)
        extra.setdefault("kernel_backend", BACKEND)
        manifest = self.out / "manifest.txt"
        if cfg is not None:
            write_manifest(manifest, cfg, outputs=outputs, extra=extra, input_hash=input_hash)
        else:
            lines = [f"tool = tanksep {__version__}", "[run]"] + [f"{k} = {v}" for k, v in extra.items()]
            lines += ["[outputs]"] + outputs
            atomic_write_text(manifest, "\n".join(lines) + "\n")
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        atomic_write_text(self.out / "timing.txt",
                          f"finished = {stamp}\nwall_clock_seconds = {time.time() - self.start:.3f}\n")


def _write_xyz(path, values):
    atomic_write_text(path, "".join(" ".join("%.17g" % v for v in row) + "\n" for row in values))


def cmd_trajectory(cfg, args):
    run = Run(args.out, "trajectory")
    source = _source(cfg, "trajectory", "source")
    T = cfg.get("trajectory", "duration_time_units") if args.duration is None else args.duration
    sdt = cfg.get("trajectory", "sample_dt_time_units")
    seed = cfg.get("experiment", "master_seed") if args.seed is None else args.seed
    if not T > 0 or not sdt > 0:
        raise cfg.fail("trajectory", "duration_time_units", "duration and sample step must be positive")
    if source == "KS":
        rng = labeled_rng(seed, "trajectory", source)
        warm = integrate_ks(KsSpec(), ks_initial(KsSpec(), rng), SOURCE_TRANSIENT + sdt, sample_dt=sdt)
        traj = integrate_ks(KsSpec(), warm.values[-1], T, sample_dt=sdt)
    elif source == "Lorenz96":
        rng = labeled_rng(seed, "trajectory", source)
        warm = integrate_lorenz96(Lorenz96Spec(), lorenz96_initial(Lorenz96Spec(), rng), SOURCE_TRANSIENT + sdt,
                                  sample_dt=sdt)
        traj = integrate_lorenz96(Lorenz96Spec(), warm.values[-1], T, sample_dt=sdt)
    else:
        spec = get_attractor(source)
        sub = sdt / spec.integration_dt
        if abs(sub - round(sub)) > 1e-9:
            raise cfg.fail("trajectory", "sample_dt_time_units",
                           f"must be a multiple of the RK4 step {spec.integration_dt}")
        x0 = on_attractor_state(spec, offset=cfg.get("trajectory", "offset_time_units"))
        traj = integrate_rk4(spec, x0, int(round(T / spec.integration_dt)), subsample=int(round(sub)))
    if cfg.get("trajectory", "normalize"):
        traj = normalize(traj)
    traj.to_csv(run.path("trajectory.csv"))
    traj.to_binary(run.path("trajectory.trj"))
    if traj.dims == 3:
        _write_xyz(run.path("trajectory_xyz.dat"), traj.values)
    else:
        matrix_to_csv(run.path("trajectory_heatmap.csv"), traj.values)
    run.finish(extra={"source": source, "duration_time_units": T, "sample_dt_time_units": sdt,
                      "samples": traj.n_samples, "master_seed": seed})
    print(f"{source}: {traj.n_samples} samples -> {run.out}")
    return 0


def _snapshot_hook(run, enabled):
    if not enabled:
        return None

    def hook(phase, tank):
        tank.field.save(run.path(f"snapshot_{phase}_end.swe"))
    return hook


def _write_separation(run, res, cfg):
    res.to_csv(run.path("separation.csv"))
    rows = [("a", n, v) for n, v in zip(res.estimated_a.names, res.mse_a_channels)]
    rows += [("b", n, v) for n, v in zip(res.estimated_b.names, res.mse_b_channels)]
    text = "source,channel,mse\n" + "".join(f"{s},{n},{v:.17g}\n" for s, n, v in rows)
    text += f"a,mean,{res.mse_a:.17g}\nb,mean,{res.mse_b:.17g}\n"
    atomic_write_text(run.path("mse.csv"), text)
    res.model.save(run.path("readout.rdo"))
    extra = {"tank_substeps": res.substeps, "probe_set_id": res.probe_set_id,
             "tank_steps": 2 * (cfg.n_dump) + cfg.n_train + cfg.n_test}
    run.finish(cfg, extra=extra, input_hash=res.input_hash)


def cmd_separate(cfg, args):
    run = Run(args.out, "separate")
    exp = _experiment(cfg, args)
    res = run_separation(exp, phase_hook=_snapshot_hook(run, args.emit_snapshots))
    _write_separation(run, res, exp)
    print(res.summary())
    return 0


def cmd_highdim(cfg, args):
    run = Run(args.out, "highdim")
    tank = _tank(cfg, args, "highdim", grid=cfg.get("highdim", "grid_cells"),
                 drag=cfg.get("highdim", "drag_per_time_unit"), gain=cfg.get("highdim", "input_gain"))
    exp = _experiment(cfg, args, source_a="KS", source_b="Lorenz96", tank=tank)
    res = run_separation(exp, phase_hook=_snapshot_hook(run, args.emit_snapshots))
    for label, est, true in (("ks", res.estimated_a, res.true_a), ("l96", res.estimated_b, res.true_b)):
        matrix_to_csv(run.path(f"{label}_true_heatmap.csv"), true.values)
        matrix_to_csv(run.path(f"{label}_estimate_heatmap.csv"), est.values)
    corr = [correlation_per_channel(res.estimated_a, res.true_a), correlation_per_channel(res.estimated_b, res.true_b)]
    text = "source,channel,mse,correlation\n"
    for label, tr, m, cc in (("KS", res.true_a, res.mse_a_channels, corr[0]),
                             ("Lorenz96", res.true_b, res.mse_b_channels, corr[1])):
        text += "".join(f"{label},{n},{v:.17g},{c:.17g}\n" for n, v, c in zip(tr.names, m, cc))
    atomic_write_text(run.path("highdim_channels.csv"), text)
    _write_separation(run, res, exp)
    print(res.summary())
    return 0


def _matrix_progress(a, b, ma, mb, err):
    status = f"FAILED: {err}" if err else f"mse_a={ma:.4g} mse_b={mb:.4g}"
    print(f"  {a}+{b}: {status}", flush=True)


def cmd_matrix(cfg, args):
    run = Run(args.out, "matrix")
    exp = _experiment(cfg, args)
    mat = run_matrix(exp, systems=_systems(cfg, "matrix"), include_diagonal=cfg.get("matrix", "include_diagonal"),
                     workers=args.workers, progress=lambda r: _matrix_progress(*r))
    mat.to_csv(run.path("mse_matrix.csv"))
    run.finish(exp, extra={"failures": len(mat.failures)})
    for pair, err in mat.failures.items():
        print(f"invalid entry {pair[0]}+{pair[1]}: {err}", file=sys.stderr)
    return 1 if mat.failures else 0


def cmd_noise(cfg, args):
    run = Run(args.out, "noise")
    exp = _experiment(cfg, args)
    raw = cfg.get("noise", "sigmas")
    try:
        sigmas = [float(s) for s in raw.split(",") if s.strip()]
    except ValueError:
        raise cfg.fail("noise", "sigmas", f"{raw!r} is not a comma-separated list of numbers") from None
    if not sigmas or min(sigmas) < 0:
        raise cfg.fail("noise", "sigmas", "need at least one non-negative sigma")
    mats = noise_sweep(exp, sigmas, systems=_systems(cfg, "matrix"),
                       include_diagonal=cfg.get("matrix", "include_diagonal"), workers=args.workers,
                       progress=lambda r: _matrix_progress(*r))
    summary = "sigma,off_diagonal_mean_mse,failures\n"
    failed = False
    for s, mat in mats.items():
        mat.to_csv(run.path(f"mse_matrix_sigma_{s:g}.csv"))
        summary += f"{s:.17g},{mat.off_diagonal_mean():.17g},{len(mat.failures)}\n"
        failed |= bool(mat.failures)
    atomic_write_text(run.path("noise_summary.csv"), summary)
    run.finish(exp, extra={"sigmas": ", ".join(f"{s:g}" for s in sigmas)})
    print(summary, end="")
    return 1 if failed else 0


def cmd_lyapunov(cfg, args):
    run = Run(args.out, "lyapunov")
    T = cfg.get("lyapunov", "total_time_units") if args.duration is None else args.duration
    qr = cfg.get("lyapunov", "qr_interval_time_units")
    transient = cfg.get("lyapunov", "transient_time_units")
    lines = ["system,lambda1,lambda2,lambda3,LD,exponent_sum,mean_trace"]
    for name in _systems(cfg, "lyapunov"):
        r = lyapunov_spectrum(name, total_time=T, qr_interval=qr, transient=transient)
        cells = [name] + ["%.17g" % v for v in r.exponents] + ["%.17g" % r.kaplan_yorke_dimension,
                                                                "%.17g" % r.exponent_sum, "%.17g" % r.mean_trace]
        lines.append(",".join(cells))
        print(f"{name}: {np.array2string(r.exponents, precision=4)} LD={r.kaplan_yorke_dimension:.4f}", flush=True)
    atomic_write_text(run.path("lyapunov.csv"), "\n".join(lines) + "\n")
    run.finish(extra={"total_time_units": T, "qr_interval_time_units": qr, "transient_time_units": transient})
    return 0


def cmd_observability(cfg, args):
    run = Run(args.out, "observability")
    a = _source(cfg, "observability", "source_a", allow_highdim=False)
    b = _source(cfg, "observability", "source_b", allow_highdim=False)
    k_max = cfg.get("observability", "k_max")
    if not 0 <= k_max <= 4:
        raise cfg.fail("observability", "k_max", "must lie in [0, 4]")
    seed = cfg.get("experiment", "master_seed") if args.seed is None else args.seed
    rng = labeled_rng(seed, "observability", a, b)
    states = combined_states(a, b, cfg.get("observability", "n_states"), rng)
    reports = [swap_symmetry_check(a, x, k_max, spec_b=b) for x in states]
    write_swap_report(run.path("swap_report.csv"), reports)
    stats = univalence_probe(a, b, cfg.get("observability", "univalence_samples"), k_max, rng,
                             threshold=cfg.get("observability", "collision_threshold"))
    text = f"pair: {a}+{b}, k_max={k_max}\n" + summarize_swaps(reports, cfg.get("observability", "ratio_threshold"))
    text += (f"\nunivalence: {stats.n_pairs} pairs, min ratio {stats.min_ratio:.6g}, "
             f"near-collision fraction {stats.near_collision_fraction:.6g} (threshold {stats.threshold:g})\n")
    atomic_write_text(run.path("summary.txt"), text)
    run.finish(extra={"pair": f"{a}+{b}", "k_max": k_max, "master_seed": seed})
    print(text, end="")
    return 0


HANDLERS = {
    "trajectory": cmd_trajectory, "separate": cmd_separate, "matrix": cmd_matrix, "noise": cmd_noise,
    "highdim": cmd_highdim, "lyapunov": cmd_lyapunov, "observability": cmd_observability,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="tanksep", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"tanksep {__version__} ({BACKEND} kernels)")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "") + " run")
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out", default=f"tanksep_{name}", help="output directory")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--grid", type=int, help="tank grid size override (cells per side)")
        p.add_argument("--workers", type=int, default=1, help="parallel pair jobs")
        p.add_argument("--emit-snapshots", action="store_true", help="write SWE1 tank snapshots")
        p.add_argument("--duration", type=float, help="trajectory / Lyapunov duration override (time units)")
        p.add_argument("--t-dump", type=float, dest="t_dump", help="transient override (time units)")
        p.add_argument("--t-train", type=float, dest="t_train", help="training duration override (time units)")
        p.add_argument("--t-test", type=float, dest="t_test", help="test duration override (time units)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be at least 1")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        cfg = Config(args.config)
        return HANDLERS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"tanksep: config error: {exc}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"tanksep: invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"tanksep: numerical failure: {exc}", file=sys.stderr)
        return 1
    except TanksepError as exc:
        print(f"tanksep: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
