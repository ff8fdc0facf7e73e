"""Scenario configuration, Monte-Carlo drops, sweeps and reporting.

A drop is one independent realization of MS placement and channels; the
channel is static within a drop (low mobility) and every frame runs the
full pipeline: traffic -> CSI -> grouping -> candidate list -> frame
construction -> commit. (cfg, seed) -> metrics is a pure function, so
sweep cells and seeds parallelize trivially and CSV output is bit-stable
across runs and worker counts.
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .channel import AntennaArrayConfig, ChannelParams, decimate_csi, generate_channel
from .frame import (
    MapModel,
    frame_construction,
    initial_vertical_limit,
    map_columns,
    map_slots_for_ies,
    predict_map_size,
)
from .geometry import ConfigurationError, FrameGeometry, partition_frame
from .grouping import form_groups
from .phy import McsTable, default_mcs_table
from .qos import (
    TrafficParams,
    build_candidate_list,
    commit_transmissions,
    generate_traffic,
    make_flows,
    update_pf_averages,
)

# (fft size, DL subchannels) per channel bandwidth in MHz; subchannel
# counts are kept divisible by every subband split in {1,2,3,6}
BANDWIDTH_DEFAULTS = {5.0: (512, 12), 10.0: (1024, 30), 20.0: (2048, 60)}


@dataclass
class ScenarioConfig:
    bandwidth_mhz: float = 10.0
    num_antennas: int = 4
    num_ms: int = 12
    num_subbands: int = 1
    max_subbands: int = 6
    los: bool = True
    fft_size: Optional[int] = None
    num_subchannels: Optional[int] = None
    dl_columns: int = 17
    subcarrier_spacing_hz: float = 10937.5
    frame_duration_s: float = 5e-3
    frames_per_drop: int = 50
    num_seeds: int = 64
    csi_decimation: int = 8
    tx_power_dbm: float = 46.0
    noise_density_dbm_hz: float = -167.0
    cell_radius_m: float = 288.0
    min_distance_m: float = 10.0
    num_taps: int = 6
    rms_delay_spread_us: float = 0.5
    ricean_k_db: float = 7.0
    pathloss_exponent_nlos: float = 3.5
    pathloss_exponent_los: float = 2.6
    mcs_table_path: Optional[str] = None
    saturated_traffic: bool = True
    offered_bytes_per_frame_total: float = 0.0
    buffer_capacity_bytes: int = 13271
    max_groups_per_subband: Optional[int] = None
    allow_displacement: bool = False

    def __post_init__(self):
        if self.fft_size is None or self.num_subchannels is None:
            if self.bandwidth_mhz not in BANDWIDTH_DEFAULTS:
                raise ConfigurationError(
                    f"no geometry defaults for bandwidth {self.bandwidth_mhz} MHz; "
                    "set fft_size and num_subchannels explicitly"
                )
            fft, sc = BANDWIDTH_DEFAULTS[self.bandwidth_mhz]
            if self.fft_size is None:
                self.fft_size = fft
            if self.num_subchannels is None:
                self.num_subchannels = sc
        if self.num_ms < 0 or self.num_antennas < 1:
            raise ConfigurationError("need num_ms >= 0 and num_antennas >= 1")
        if self.geometry().num_subcarriers > self.fft_size:
            raise ConfigurationError(
                f"{self.geometry().num_subcarriers} data subcarriers exceed FFT size {self.fft_size}"
            )
        if not 1 <= self.csi_decimation <= self.geometry().num_subcarriers:
            raise ConfigurationError(f"bad CSI decimation {self.csi_decimation}")

    def geometry(self) -> FrameGeometry:
        return FrameGeometry(
            num_subchannels=self.num_subchannels,
            num_columns=self.dl_columns,
            num_subbands=self.num_subbands,
            max_subbands=self.max_subbands,
        )

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            num_ms=self.num_ms,
            num_subcarriers=self.geometry().num_subcarriers,
            subcarrier_spacing_hz=self.subcarrier_spacing_hz,
            array=AntennaArrayConfig(num_elements=self.num_antennas),
            num_taps=self.num_taps,
            rms_delay_spread_s=self.rms_delay_spread_us * 1e-6,
            ricean_k_db=self.ricean_k_db,
            los=self.los,
            pathloss_exponent_nlos=self.pathloss_exponent_nlos,
            pathloss_exponent_los=self.pathloss_exponent_los,
            cell_radius_m=self.cell_radius_m,
            min_distance_m=self.min_distance_m,
        )

    def traffic_params(self) -> TrafficParams:
        return TrafficParams(
            saturated=self.saturated_traffic,
            offered_bytes_per_frame_total=self.offered_bytes_per_frame_total,
            buffer_capacity_bytes=self.buffer_capacity_bytes,
        )

    def mcs_table(self) -> McsTable:
        if self.mcs_table_path:
            return McsTable.from_json(self.mcs_table_path)
        return default_mcs_table()

    @property
    def occupied_bandwidth_hz(self) -> float:
        return self.geometry().num_subcarriers * self.subcarrier_spacing_hz

    @property
    def noise_power_w(self) -> float:
        dbm = self.noise_density_dbm_hz + 10.0 * np.log10(self.occupied_bandwidth_hz)
        return 10.0 ** (dbm / 10.0) / 1000.0

    @property
    def tx_power_w(self) -> float:
        return 10.0 ** (self.tx_power_dbm / 10.0) / 1000.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            raw = json.load(f)
        raw.pop("sweep", None)
        return cls.from_dict(raw)


@dataclass
class RunMetrics:
    goodput_bytes_per_s: float
    map_overhead_fraction: float
    map_overhead_columns_fraction: float
    per_ms_served_bytes: list[int]
    jain_fairness: float
    util_evals: int
    util_evals_max_frame: int
    frames: int
    transmitted_bytes: int
    generated_bytes: int
    dropped_bytes: int
    wall_time_s: float


def jain_index(values: Sequence[float]) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0 or x.sum() == 0:
        return 1.0
    return float(x.sum() ** 2 / (x.size * (x**2).sum()))


def run_drop(cfg: ScenarioConfig, seed: int) -> RunMetrics:
    """Simulate one drop: static channel, frames_per_drop MAC frames."""
    t0 = time.perf_counter()
    geometry = cfg.geometry()
    table = cfg.mcs_table()
    map_model = MapModel()
    robust = table.most_robust.bytes_per_slot
    frames = cfg.frames_per_drop

    if cfg.num_ms == 0:
        slots = map_slots_for_ies(0, map_model, robust)
        cols = map_columns(slots, geometry)
        return RunMetrics(
            goodput_bytes_per_s=0.0,
            map_overhead_fraction=slots / geometry.frame_size_slots,
            map_overhead_columns_fraction=cols / geometry.num_columns,
            per_ms_served_bytes=[],
            jain_fairness=1.0,
            util_evals=0,
            util_evals_max_frame=0,
            frames=frames,
            transmitted_bytes=0,
            generated_bytes=0,
            dropped_bytes=0,
            wall_time_s=time.perf_counter() - t0,
        )

    ch = generate_channel(cfg.channel_params(), seed)
    csi = decimate_csi(ch, cfg.csi_decimation, cfg.noise_power_w)
    subbands = partition_frame(geometry)
    flows = make_flows(cfg.num_ms, cfg.traffic_params())
    ids = itertools.count()

    avg_mcs = table.entries[len(table.entries) // 2]
    init_columns = initial_vertical_limit(
        geometry,
        cfg.num_antennas,
        predict_map_size(geometry, avg_mcs, map_model, robust),
    )

    grouping = None
    active_prev: Optional[tuple[int, ...]] = None
    tx_bytes = 0
    gen_bytes = 0
    drop_bytes = 0
    map_slot_sum = 0
    map_col_sum = 0
    util_evals = 0
    util_evals_max = 0
    seen_ids: set[int] = set()

    for frame_index in range(frames):
        tstats = generate_traffic(flows, frame_index, seed, cfg.traffic_params(), ids)
        gen_bytes += tstats.generated_bytes
        drop_bytes += tstats.dropped_bytes
        active = tuple(f.ms for f in flows if f.buffer)
        if active:
            if active != active_prev:
                grouping = form_groups(
                    csi, subbands, active, table, cfg.tx_power_w,
                    cfg.max_groups_per_subband,
                )
                active_prev = active
            candidates = build_candidate_list(flows, grouping.best_bytes_per_slot)
            frame = frame_construction(
                grouping, candidates, geometry, table,
                init_columns=init_columns,
                num_antennas=cfg.num_antennas,
                map_model=map_model,
                allow_displacement=cfg.allow_displacement,
            )
            packed = frame.packed_packet_ids()
            dup = seen_ids.intersection(packed)
            if dup:
                raise RuntimeError(f"packets retransmitted across frames: {sorted(dup)[:5]}")
            seen_ids.update(packed)
            served = commit_transmissions(flows, packed)
            tx_bytes += sum(served.values())
            util_evals += frame.build_stats.util_evals
            util_evals_max = max(util_evals_max, frame.build_stats.util_evals)
            map_slot_sum += frame.map_region.slots
            map_col_sum += frame.map_region.columns
        else:
            served = {}
            slots = map_slots_for_ies(0, map_model, robust)
            map_slot_sum += slots
            map_col_sum += map_columns(slots, geometry)
        update_pf_averages(flows, served)

    per_ms = [f.served_bytes for f in flows]
    return RunMetrics(
        goodput_bytes_per_s=tx_bytes / (frames * cfg.frame_duration_s),
        map_overhead_fraction=map_slot_sum / (frames * geometry.frame_size_slots),
        map_overhead_columns_fraction=map_col_sum / (frames * geometry.num_columns),
        per_ms_served_bytes=per_ms,
        jain_fairness=jain_index(per_ms),
        util_evals=util_evals,
        util_evals_max_frame=util_evals_max,
        frames=frames,
        transmitted_bytes=tx_bytes,
        generated_bytes=gen_bytes,
        dropped_bytes=drop_bytes,
        wall_time_s=time.perf_counter() - t0,
    )


@dataclass
class SweepSpec:
    bandwidths_mhz: list[float]
    antennas: list[int]
    users: list[int]
    subbands: list[int]
    los: list[bool]
    seeds: list[int]

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, raw: Optional[dict] = None) -> "SweepSpec":
        raw = raw or {}
        return cls(
            bandwidths_mhz=[float(b) for b in raw.get("bandwidths_mhz", [cfg.bandwidth_mhz])],
            antennas=list(raw.get("antennas", [cfg.num_antennas])),
            users=list(raw.get("users", [cfg.num_ms])),
            subbands=list(raw.get("subbands", [cfg.num_subbands])),
            los=list(raw.get("los", [cfg.los])),
            seeds=list(raw.get("seeds", range(cfg.num_seeds))),
        )


CSV_COLUMNS = [
    "bandwidth_mhz", "num_antennas", "num_ms", "num_subbands", "los", "seed",
    "frames", "goodput_bytes_per_s", "map_overhead_fraction",
    "map_overhead_columns_fraction", "transmitted_bytes", "generated_bytes",
    "dropped_bytes", "jain_fairness", "util_evals", "util_evals_max_frame",
    "error",
]

FLOW_CSV_COLUMNS = [
    "bandwidth_mhz", "num_antennas", "num_ms", "num_subbands", "los", "seed",
    "ms", "served_bytes",
]


def _cell_config(base: ScenarioConfig, bw: float, m: int, k: int, sb: int, los: bool) -> ScenarioConfig:
    raw = base.to_dict()
    raw.update(bandwidth_mhz=bw, num_antennas=m, num_ms=k, num_subbands=sb, los=los)
    if bw != base.bandwidth_mhz:
        # geometry follows the swept bandwidth; explicit overrides only
        # apply to the base bandwidth
        raw.update(fft_size=None, num_subchannels=None)
    return ScenarioConfig.from_dict(raw)


def _run_cell(args: tuple[dict, float, int, int, int, bool, int]) -> tuple[dict, list[dict]]:
    base_raw, bw, m, k, sb, los, seed = args
    key = {
        "bandwidth_mhz": bw, "num_antennas": m, "num_ms": k,
        "num_subbands": sb, "los": los, "seed": seed,
    }
    row = dict.fromkeys(CSV_COLUMNS, "")
    row.update(key)
    flow_rows: list[dict] = []
    try:
        cfg = _cell_config(ScenarioConfig.from_dict(base_raw), bw, m, k, sb, los)
        metrics = run_drop(cfg, seed)
    except Exception as exc:  # record the failure, keep sweeping
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row, flow_rows
    row.update(
        frames=metrics.frames,
        goodput_bytes_per_s=repr(metrics.goodput_bytes_per_s),
        map_overhead_fraction=repr(metrics.map_overhead_fraction),
        map_overhead_columns_fraction=repr(metrics.map_overhead_columns_fraction),
        transmitted_bytes=metrics.transmitted_bytes,
        generated_bytes=metrics.generated_bytes,
        dropped_bytes=metrics.dropped_bytes,
        jain_fairness=repr(metrics.jain_fairness),
        util_evals=metrics.util_evals,
        util_evals_max_frame=metrics.util_evals_max_frame,
    )
    for ms, served in enumerate(metrics.per_ms_served_bytes):
        fr = dict(key)
        fr.update(ms=ms, served_bytes=served)
        flow_rows.append(fr)
    return row, flow_rows


def run_sweep(
    cfg: ScenarioConfig,
    sweep: SweepSpec,
    jobs: int = 1,
    out_dir: Optional[Path] = None,
) -> list[dict]:
    """Cartesian product over the sweep axes, one row per (cell, seed).

    Rows are sorted canonically before writing, so output is independent of
    worker count and scheduling order.
    """
    tasks = [
        (cfg.to_dict(), bw, m, k, sb, los, seed)
        for bw, m, k, sb, los, seed in itertools.product(
            sweep.bandwidths_mhz, sweep.antennas, sweep.users,
            sweep.subbands, sweep.los, sweep.seeds,
        )
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks, chunksize=1))
    else:
        results = [_run_cell(t) for t in tasks]

    rows = [r for r, _ in results]
    flow_rows = [fr for _, frs in results for fr in frs]
    sort_key = lambda r: (
        r["bandwidth_mhz"], r["num_antennas"], r["num_ms"],
        r["num_subbands"], r["los"], r["seed"],
    )
    rows.sort(key=sort_key)
    flow_rows.sort(key=lambda r: sort_key(r) + (r["ms"],))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_rows(out_dir / "rows.csv", rows, CSV_COLUMNS)
        write_rows(out_dir / "flows.csv", flow_rows, FLOW_CSV_COLUMNS)
        manifest = {
            "version": __version__,
            "config": cfg.to_dict(),
            "sweep": asdict(sweep),
            "rows": len(rows),
        }
        with open(out_dir / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2, default=list)
    return rows


def write_rows(path, rows: list[dict], columns: list[str]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _mean_ci(values: list[float]) -> tuple[float, Optional[float]]:
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    if x.size < 2:
        return mean, None
    half = 1.96 * float(x.std(ddof=1)) / np.sqrt(x.size)
    return mean, half


@dataclass
class CellSummary:
    bandwidth_mhz: float
    num_antennas: int
    num_ms: int
    num_subbands: int
    los: bool
    n: int
    goodput_mean: float
    goodput_ci95: Optional[float]
    overhead_mean: float
    overhead_ci95: Optional[float]
    fss_gain: Optional[float] = None


def summarize(rows: list[dict]) -> list[CellSummary]:
    """Aggregate raw rows into per-cell means/CIs and attach the gain of
    frequency-selective scheduling relative to the single-subband baseline."""
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        if r.get("error"):
            continue
        key = (
            float(r["bandwidth_mhz"]), int(r["num_antennas"]), int(r["num_ms"]),
            int(r["num_subbands"]), str(r["los"]) in ("True", "true", "1"),
        )
        cells.setdefault(key, []).append(r)

    summaries = []
    for key in sorted(cells):
        grp = cells[key]
        gp_mean, gp_ci = _mean_ci([float(r["goodput_bytes_per_s"]) for r in grp])
        ov_mean, ov_ci = _mean_ci([float(r["map_overhead_fraction"]) for r in grp])
        summaries.append(
            CellSummary(
                bandwidth_mhz=key[0], num_antennas=key[1], num_ms=key[2],
                num_subbands=key[3], los=key[4], n=len(grp),
                goodput_mean=gp_mean, goodput_ci95=gp_ci,
                overhead_mean=ov_mean, overhead_ci95=ov_ci,
            )
        )

    baselines = {
        (s.bandwidth_mhz, s.num_antennas, s.num_ms, s.los): s.goodput_mean
        for s in summaries
        if s.num_subbands == 1
    }
    for s in summaries:
        base = baselines.get((s.bandwidth_mhz, s.num_antennas, s.num_ms, s.los))
        if base and base > 0:
            s.fss_gain = s.goodput_mean / base - 1.0
    return summaries


def report(rows: list[dict], out_dir: Optional[Path] = None) -> str:
    """Text summary table; optionally writes aggregated plot data."""
    summaries = summarize(rows)
    have_baseline = any(s.num_subbands == 1 for s in summaries)
    lines = [
        f"{'bw':>5} {'M':>2} {'K':>3} {'SB':>3} {'los':>5} {'n':>4} "
        f"{'goodput[B/s]':>14} {'ci95':>10} {'overhead':>9} {'ci95':>9} {'fss_gain':>9}"
    ]
    for s in summaries:
        ci = f"{s.goodput_ci95:.3g}" if s.goodput_ci95 is not None else "n/a"
        oci = f"{s.overhead_ci95:.3g}" if s.overhead_ci95 is not None else "n/a"
        gain = f"{100 * s.fss_gain:+.1f}%" if s.fss_gain is not None else "n/a"
        lines.append(
            f"{s.bandwidth_mhz:>5.0f} {s.num_antennas:>2} {s.num_ms:>3} "
            f"{s.num_subbands:>3} {str(s.los):>5} {s.n:>4} "
            f"{s.goodput_mean:>14.1f} {ci:>10} {s.overhead_mean:>9.4f} {oci:>9} {gain:>9}"
        )
    if not have_baseline:
        lines.append("warning: no single-subband baseline present; gain column omitted")
    text = "\n".join(lines)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        agg = [
            {
                "bandwidth_mhz": s.bandwidth_mhz, "num_antennas": s.num_antennas,
                "num_ms": s.num_ms, "num_subbands": s.num_subbands, "los": s.los,
                "n": s.n, "goodput_mean": repr(s.goodput_mean),
                "goodput_ci95": "" if s.goodput_ci95 is None else repr(s.goodput_ci95),
                "overhead_mean": repr(s.overhead_mean),
                "overhead_ci95": "" if s.overhead_ci95 is None else repr(s.overhead_ci95),
                "fss_gain": "" if s.fss_gain is None else repr(s.fss_gain),
            }
            for s in summaries
        ]
        cols = list(agg[0].keys()) if agg else []
        write_rows(out_dir / "summary.csv", agg, cols)
        (out_dir / "summary.txt").write_text(text + "\n")
    return text
