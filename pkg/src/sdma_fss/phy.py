"""Link-level abstraction: transmit precoding, per-sample SINR, EESM
compression and MCS selection.

Precoding weights are regularized channel inversion (minimum mean square
error transmit filter), one unit-norm weight vector per served MS. SINR per
CSI sample follows the standard intra-group interference form; a set of
per-sample SINRs is collapsed into an effective SINR via exponential
effective SIR mapping, with a per-MCS calibration factor beta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * np.log10(x)


@dataclass(frozen=True)
class McsEntry:
    name: str
    min_sinr_db: float
    bytes_per_slot: int
    beta: float


@dataclass(frozen=True)
class McsTable:
    """Ordered MCS ladder: thresholds strictly increasing, payload
    non-decreasing (two entries may share bytes/slot but differ in beta)."""

    entries: tuple[McsEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("MCS table must be nonempty")
        for e in self.entries:
            if e.bytes_per_slot <= 0 or e.beta <= 0:
                raise ValueError(f"nonpositive field in MCS entry {e.name}")
        thr = [e.min_sinr_db for e in self.entries]
        if any(b <= a for a, b in zip(thr, thr[1:])):
            raise ValueError("MCS thresholds must be strictly increasing")
        payload = [e.bytes_per_slot for e in self.entries]
        if any(b < a for a, b in zip(payload, payload[1:])):
            raise ValueError("MCS payloads must be non-decreasing")

    @property
    def most_robust(self) -> McsEntry:
        return self.entries[0]

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump({"entries": [e.__dict__ for e in self.entries]}, f, indent=2)

    @classmethod
    def from_json(cls, path) -> "McsTable":
        with open(path) as f:
            raw = json.load(f)
        return cls(tuple(McsEntry(**e) for e in raw["entries"]))


def default_mcs_table() -> McsTable:
    """802.16-style ladder: 48 data symbols per slot, so e.g. QPSK 1/2
    carries 48*2*0.5/8 = 6 bytes. Thresholds and betas are calibration
    knobs, not measured link curves."""
    rows = [
        ("QPSK 1/2", 3.0, 6, 1.49),
        ("QPSK 3/4", 6.0, 9, 1.57),
        ("16QAM 1/2", 8.5, 12, 3.45),
        ("16QAM 3/4", 11.5, 18, 4.56),
        ("64QAM 1/2", 15.0, 18, 9.52),
        ("64QAM 2/3", 18.5, 24, 11.0),
        ("64QAM 3/4", 21.0, 27, 13.8),
    ]
    return McsTable(tuple(McsEntry(*r) for r in rows))


@dataclass
class LinkResult:
    """Per-member outcome on one subband."""

    ms: int
    sinr: np.ndarray  # linear, one per CSI sample
    eff_sinr: float
    mcs: Optional[McsEntry]


def minmse_weights(channels: np.ndarray, noise_power_w: float, total_power_w: float) -> np.ndarray:
    """Regularized channel-inversion weights for one group.

    channels: (G, M) member channel vectors. Returns (G, M) weights, one
    unit-norm vector per member, from (H H^H + (G sigma^2 / P) I)^-1 H with
    H the M x G matrix of member channels as columns.
    """
    ch = np.asarray(channels, dtype=complex)
    if ch.ndim != 2:
        raise ValueError(f"expected (G, M) channels, got shape {ch.shape}")
    g, m = ch.shape
    if g > m:
        raise ValueError(f"group size {g} exceeds antenna count {m}")
    if not np.isfinite(ch).all():
        raise ValueError("non-finite channel coefficients")
    if noise_power_w < 0 or total_power_w <= 0:
        raise ValueError("need noise >= 0 and positive total power")

    h = ch.T  # (M, G), columns are members
    gram = h @ h.conj().T
    if noise_power_w == 0.0:
        if np.linalg.matrix_rank(ch) < g:
            raise np.linalg.LinAlgError("degenerate zero-noise inversion")
        raw = np.linalg.pinv(gram) @ h
    else:
        reg = g * noise_power_w / total_power_w
        raw = np.linalg.solve(gram + reg * np.eye(m), h)
    norms = np.linalg.norm(raw, axis=0)
    if (norms == 0).any():
        raise np.linalg.LinAlgError("zero-norm precoding column")
    return (raw / norms).T


def compute_sinr(
    weights: np.ndarray,
    channels: np.ndarray,
    per_member_power_w,
    noise_power_w: float,
) -> np.ndarray:
    """Per-member SINR with intra-group interference.

    weights: (G, M). channels: (G, M) for one sample or (G, N, M) for N CSI
    samples; entry u is the channel seen by member u. per_member_power_w is
    the received power per member (scalar or (G,)). Returns (G,) or (G, N).
    """
    w = np.asarray(weights, dtype=complex)
    h = np.asarray(channels, dtype=complex)
    if noise_power_w <= 0:
        raise ValueError("noise power must be positive")
    single = h.ndim == 2
    if single:
        h = h[:, None, :]
    if w.shape[0] != h.shape[0] or w.shape[1] != h.shape[2]:
        raise ValueError(f"weights {w.shape} inconsistent with channels {h.shape}")
    p = np.broadcast_to(np.asarray(per_member_power_w, dtype=float), (w.shape[0],))
    if (p < 0).any():
        raise ValueError("negative power")

    # cross[u, v, n] = |w_v^H h_{u,n}|^2
    cross = np.abs(np.einsum("vm,unm->uvn", w.conj(), h, optimize=True)) ** 2
    g = w.shape[0]
    diag = cross[np.arange(g), np.arange(g), :]
    interference = cross.sum(axis=1) - diag
    sinr = (p[:, None] * diag) / (noise_power_w + p[:, None] * interference)
    return sinr[:, 0] if single else sinr


def eesm_effective_sinr(samples: Sequence[float], beta: float) -> float:
    """Exponential effective SIR mapping for one vector of linear SINRs.

    Computed in shifted form for numerical range; the result is pinned to
    the mathematically guaranteed [min, mean] envelope so round-off can
    never violate it.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("EESM needs at least one SINR sample")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if (x < 0).any():
        raise ValueError("SINR samples must be nonnegative")
    lo = float(x.min())
    hi = float(x.mean())
    val = lo - beta * (np.log(np.exp(-(x - lo) / beta).sum()) - np.log(x.size))
    return float(min(max(val, lo), hi))


def eesm_batch(samples: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """EESM of each row of samples (R, N) under each beta (B,) -> (R, B)."""
    x = np.asarray(samples, dtype=float)
    b = np.asarray(betas, dtype=float)
    lo = x.min(axis=1, keepdims=True)
    hi = x.mean(axis=1, keepdims=True)
    # (R, N, B) exponent block; N and B stay small
    z = np.exp(-(x[:, :, None] - lo[:, :, None]) / b)
    val = lo - b * (np.log(z.sum(axis=1)) - np.log(x.shape[1]))
    return np.clip(val, lo, hi)


def select_mcs(samples: Sequence[float], table: McsTable) -> tuple[Optional[McsEntry], float]:
    """Highest MCS whose own-beta effective SINR meets its threshold.

    Scans from the top of the ladder down; each candidate is judged by the
    effective SINR computed with that candidate's beta. Returns (None,
    gamma_eff of the most robust entry) when nothing is feasible.
    """
    g_eff = 0.0
    for entry in reversed(table.entries):
        g_eff = eesm_effective_sinr(samples, entry.beta)
        if g_eff >= db_to_linear(entry.min_sinr_db):
            return entry, g_eff
    return None, g_eff


def select_mcs_batch(samples: np.ndarray, table: McsTable) -> list[tuple[Optional[McsEntry], float]]:
    """Vectorized select_mcs over rows of samples (R, N)."""
    betas = np.array([e.beta for e in table.entries])
    thr = np.array([db_to_linear(e.min_sinr_db) for e in table.entries])
    geff = eesm_batch(samples, betas)  # (R, B)
    out: list[tuple[Optional[McsEntry], float]] = []
    for row in geff:
        chosen: Optional[McsEntry] = None
        used = float(row[0])
        for i in range(len(table.entries) - 1, -1, -1):
            if row[i] >= thr[i]:
                chosen = table.entries[i]
                used = float(row[i])
                break
        out.append((chosen, used))
    return out


def slot_capacity_bytes(mcs: McsEntry) -> int:
    """Payload bytes one slot carries at this MCS."""
    return mcs.bytes_per_slot
