"""Command-line entry point.

Subcommands: run (one scenario), scan (single-cell drive scan), topo
(topology export), matrix (metrics sweep), validate (config check).
Outputs are written atomically (temp file + rename) inside --out, with a
run_manifest.json recording the config hash, seed and package version.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .comms import matrix_to_csv, run_experiment_matrix, summary_to_json
from .engine import Simulation
from .params import (ConfigError, Scenario, ScenarioConfig, config_to_dict,
                     load_config, topology_kind)
from .single_cell import Model, scan_oscillations, scan_to_csv
from .topology import build_topology, cell_id, export_edge_list, export_stats, graph_stats

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _atomic_write(path: str, writer) -> None:
    """Write via a temp file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out_dir: str, cfg: ScenarioConfig) -> None:
    manifest = {
        "config_sha256": _config_hash(cfg),
        "seed": cfg.rng_seed,
        "version": __version__,
    }
    _atomic_write(os.path.join(out_dir, "run_manifest.json"),
                  lambda p: open(p, "w").write(json.dumps(manifest, indent=2,
                                                          sort_keys=True) + "\n"))


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, rng_seed=args.seed)
    cfg.validate()
    return cfg


class _Progress:
    """Periodic simulated-time / wall-time / event-count lines on stderr."""

    def __init__(self, cadence: float, quiet: bool):
        self.cadence = cadence
        self.quiet = quiet or cadence <= 0
        self.t0 = time.monotonic()
        self.last = self.t0

    def tick(self, sim_t: float, n_events: int) -> None:
        if self.quiet:
            return
        now = time.monotonic()
        if now - self.last >= self.cadence:
            self.last = now
            print(f"progress: sim_t={sim_t:.2f}s wall={now - self.t0:.1f}s "
                  f"events={n_events}", file=sys.stderr)


def _cmd_validate(args) -> int:
    _load(args)
    if not args.quiet:
        print("config ok", file=sys.stderr)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    progress = _Progress(args.progress, args.quiet)
    sim = Simulation(cfg)
    progress.tick(0.0, 0)
    log = sim.run()
    progress.tick(log.t_end, log.n_firings)
    _atomic_write(os.path.join(args.out, "snapshots.csv"), log.export_snapshots_csv)
    if cfg.engine.record_events:
        _atomic_write(os.path.join(args.out, "events.csv"), log.export_events_csv)
    _write_manifest(args.out, cfg)
    return EXIT_OK


def _cmd_scan(args) -> int:
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    drives = np.linspace(args.drive_min, args.drive_max, args.drive_steps)
    if args.drive_min >= args.drive_max or args.drive_steps < 2:
        raise ConfigError("scan drive range must be non-degenerate")
    if cfg.scenario is Scenario.HEALTHY:
        points = scan_oscillations(Model.HEALTHY, cfg.healthy, drives)
    else:
        points = scan_oscillations(Model.AD, cfg.ad, drives, vg=cfg.vgcc)
    _atomic_write(os.path.join(args.out, "scan.csv"),
                  lambda p: scan_to_csv(points, p))
    _write_manifest(args.out, cfg)
    return EXIT_OK


def _cmd_topo(args) -> int:
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    dims = cfg.lattice_dims
    tx = cell_id(cfg.transmitter_cell, dims)
    rx = cell_id(cfg.receiver_cell, dims)
    seq = np.random.SeedSequence(cfg.rng_seed)
    rng = np.random.default_rng(seq.spawn(3)[0])
    g = build_topology(dims, cfg.topology_spec, rng, tx=tx, rx=rx)
    _atomic_write(os.path.join(args.out, "edges.csv"),
                  lambda p: export_edge_list(g, p))
    _atomic_write(os.path.join(args.out, "stats.json"),
                  lambda p: export_stats(g, p, source=tx))
    _write_manifest(args.out, cfg)
    return EXIT_OK


def _cmd_matrix(args) -> int:
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    seeds = range(cfg.rng_seed, cfg.rng_seed + args.replicas)
    configs = [dataclasses.replace(cfg, rng_seed=s) for s in seeds]
    progress = _Progress(args.progress, args.quiet)
    rows, errors = run_experiment_matrix(configs, threads=args.threads)
    progress.tick(cfg.sim_time_max * len(configs), len(rows))
    for msg in errors:
        print(f"matrix error: {msg}", file=sys.stderr)
    _atomic_write(os.path.join(args.out, "metrics.csv"),
                  lambda p: matrix_to_csv(rows, p))
    _atomic_write(os.path.join(args.out, "summary.json"),
                  lambda p: summary_to_json(rows, p))
    _write_manifest(args.out, cfg)
    return EXIT_OK if not errors else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gliacomm",
                                 description="astrocyte-network molecular "
                                             "communication simulator")
    ap.add_argument("--quiet", action="store_true", help="suppress status lines")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--progress", type=float, default=10.0,
                       help="status cadence in wall seconds (0 disables)")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    common(sub.add_parser("run", help="one simulation run"))
    p = sub.add_parser("scan", help="single-cell drive scan")
    common(p)
    p.add_argument("--drive-min", type=float, default=0.0)
    p.add_argument("--drive-max", type=float, default=2.0)
    p.add_argument("--drive-steps", type=int, default=21)
    common(sub.add_parser("topo", help="build and export the tissue graph"))
    p = sub.add_parser("matrix", help="seeded metrics sweep")
    common(p)
    p.add_argument("--replicas", type=int, default=1,
                   help="number of consecutive seeds")
    p.add_argument("--threads", type=int, default=1)
    common(sub.add_parser("validate", help="check a config"), out=False)
    return ap


_COMMANDS = {
    "run": _cmd_run,
    "scan": _cmd_scan,
    "topo": _cmd_topo,
    "matrix": _cmd_matrix,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {exc!r}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
