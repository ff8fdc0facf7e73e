#!/usr/bin/env python3
"""Propagation study: FSS gain under LOS vs NLOS at 10 MHz, K=12."""

import argparse
from pathlib import Path

from sdma_fss.experiment import ScenarioConfig, SweepSpec, report, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=64)
    ap.add_argument("--frames", type=int, default=16)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/los_study"))
    args = ap.parse_args()

    cfg = ScenarioConfig(bandwidth_mhz=10.0, num_ms=12, frames_per_drop=args.frames)
    sweep = SweepSpec(
        bandwidths_mhz=[10.0],
        antennas=[4, 8],
        users=[12],
        subbands=[1, 2, 3, 6],
        los=[True, False],
        seeds=list(range(args.seeds)),
    )
    rows = run_sweep(cfg, sweep, jobs=args.jobs, out_dir=args.out)
    print(report(rows, out_dir=args.out))


if __name__ == "__main__":
    main()
