"""Single-hop communication harness and link metrics.

The transmitter is an infinite calcium reservoir whose release rate follows
a configurable waveform; the receiver is idealized (no binding kinetics) and
simply counts quanta arriving over its gap junctions.  Three metrics are
computed per run: propagation extent (activated-cell count), molecular
delay (stimulus start to first receiver threshold crossing) and channel
gain in dB (received/sent quanta within a window).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .engine import EventLog, Simulation, StimulusSchedule
from .params import Scenario, ScenarioConfig, StimulusSpec, topology_kind


class UndefinedGainError(ValueError):
    """No molecules were sent in the gain window."""


@dataclass(frozen=True)
class LinkMetrics:
    propagation_extent: int
    molecular_delay: float      # s; math.inf when rx never crossed
    channel_gain_db: float


def apply_stimulus(spec: StimulusSpec, tx_cell: int) -> StimulusSchedule:
    """Attach the waveform source schedule to the transmitter cell."""
    return StimulusSchedule(spec, tx_cell)


def propagation_extent(log: EventLog, threshold: Optional[float] = None) -> int:
    """Cells whose peak cytosolic Ca exceeds their baseline by threshold."""
    thr = log.threshold if threshold is None else threshold
    base = log.baseline_ca
    if base is None:
        base = log.snapshots[0][:, 0]
    return int(np.count_nonzero(log.peak_ca > base + thr))


def molecular_delay(log: EventLog, tx: Optional[int] = None,
                    rx: Optional[int] = None,
                    threshold: Optional[float] = None) -> float:
    """First receiver threshold crossing minus stimulus start (inf if never).

    With the run's own threshold the exact per-firing crossing times are
    used; any other threshold falls back to the snapshot cadence.
    """
    rx = log.rx if rx is None else rx
    if threshold is None or threshold == log.threshold:
        t_cross = float(log.first_cross[rx])
    else:
        base = (log.baseline_ca if log.baseline_ca is not None
                else log.snapshots[0][:, 0])[rx]
        t_cross = math.inf
        for t, snap in zip(log.snapshot_t, log.snapshots):
            if t >= log.stim_start and snap[rx, 0] >= base + threshold:
                t_cross = t
                break
    if math.isinf(t_cross):
        return math.inf
    return max(t_cross - log.stim_start, 0.0)


def channel_gain(log: EventLog, tx: Optional[int] = None,
                 rx: Optional[int] = None,
                 window: Optional[float] = None) -> float:
    """10 log10(received/sent) over [stimulus start, start + window].

    Sent counts transmitter source firings; received counts the net
    quanta delivered into the receiver over edges (incoming hops minus
    outgoing hops, floored at zero), so the receiver's own regenerative
    production and the symmetric background exchange at equilibrium both
    cancel out.
    """
    t0 = log.stim_start
    t1 = math.inf if window is None else t0 + window
    sent = sum(1 for t in log.sent_times if t0 <= t <= t1)
    if sent == 0:
        raise UndefinedGainError("transmitter emitted no quanta in the window")
    came_in = sum(1 for t in log.rx_in_times if t0 <= t <= t1)
    went_out = sum(1 for t in log.rx_out_times if t0 <= t <= t1)
    received = max(came_in - went_out, 0)
    if received == 0:
        return -math.inf
    return 10.0 * math.log10(received / sent)


def link_metrics(log: EventLog, window: Optional[float] = None) -> LinkMetrics:
    return LinkMetrics(
        propagation_extent=propagation_extent(log),
        molecular_delay=molecular_delay(log),
        channel_gain_db=channel_gain(log, window=window),
    )


# --- experiment matrix ------------------------------------------------------

def _hop_distance(cfg: ScenarioConfig) -> int:
    return sum(abs(a - b) for a, b in
               zip(cfg.transmitter_cell, cfg.receiver_cell))


def _run_one(cfg: ScenarioConfig) -> dict:
    log = Simulation(cfg).run()
    window = cfg.stimulus.duration
    gain = channel_gain(log, window=window)
    # lossy multi-path diffusion can never deliver more than was sent
    if not math.isinf(gain):
        assert gain <= 1e-9, f"gain {gain} dB > 0 for rx != tx"
    return {
        "scenario": cfg.scenario.value,
        "topology": topology_kind(cfg.topology_spec),
        "distance_cells": _hop_distance(cfg),
        "frequency_hz": cfg.stimulus.frequency_hz,
        "seed": cfg.rng_seed,
        "extent": propagation_extent(log),
        "delay_s": molecular_delay(log),
        "gain_db": gain,
    }


def run_experiment_matrix(configs: Sequence[ScenarioConfig],
                          threads: int = 1) -> tuple[list[dict], list[str]]:
    """Run every config, collecting one metrics row per successful run.

    Returns (rows, errors); per-run failures are recorded as messages
    without aborting the rest of the matrix.  Row order follows the input
    order regardless of execution order.
    """
    if not configs:
        raise ValueError("empty experiment matrix")
    rows: list[Optional[dict]] = [None] * len(configs)
    errors: list[str] = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_run_one, cfg) for cfg in configs]
            for i, fut in enumerate(futures):
                try:
                    rows[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - aggregate, don't abort
                    errors.append(f"run {i}: {exc!r}")
    else:
        for i, cfg in enumerate(configs):
            try:
                rows[i] = _run_one(cfg)
            except Exception as exc:  # noqa: BLE001
                errors.append(f"run {i}: {exc!r}")
    return [r for r in rows if r is not None], errors


MATRIX_COLUMNS = ("scenario", "topology", "distance_cells", "frequency_hz",
                  "seed", "extent", "delay_s", "gain_db")


def matrix_to_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(MATRIX_COLUMNS) + "\n")
        for r in rows:
            vals = []
            for col in MATRIX_COLUMNS:
                v = r[col]
                if col == "delay_s" and (v is None or math.isinf(v)):
                    vals.append("")
                elif col == "gain_db" and math.isinf(v):
                    vals.append("-inf")
                elif isinstance(v, float):
                    vals.append(f"{v:.9g}")
                else:
                    vals.append(str(v))
            fh.write(",".join(vals) + "\n")


def matrix_summary(rows: Sequence[dict]) -> dict:
    """Per (scenario, topology) group medians and quartiles."""
    groups: dict[tuple, dict[str, list]] = {}
    for r in rows:
        key = (r["scenario"], r["topology"])
        g = groups.setdefault(key, {"extent": [], "delay_s": [], "gain_db": []})
        g["extent"].append(r["extent"])
        if not math.isinf(r["delay_s"]):
            g["delay_s"].append(r["delay_s"])
        if not math.isinf(r["gain_db"]):
            g["gain_db"].append(r["gain_db"])
    out = {}
    for (scen, topo), vals in sorted(groups.items()):
        entry = {}
        for name, series in vals.items():
            if series:
                q1, med, q3 = np.percentile(series, [25, 50, 75])
                entry[name] = {"q1": float(q1), "median": float(med),
                               "q3": float(q3), "n": len(series)}
            else:
                entry[name] = {"q1": None, "median": None, "q3": None, "n": 0}
        out[f"{scen}/{topo}"] = entry
    return out


def summary_to_json(rows: Sequence[dict], path) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_summary(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
