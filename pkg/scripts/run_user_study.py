#!/usr/bin/env python3
"""User-count study: FSS gain vs number of MSs at 10 MHz, line of sight."""

import argparse
from pathlib import Path

from sdma_fss.experiment import ScenarioConfig, SweepSpec, report, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=64)
    ap.add_argument("--frames", type=int, default=16)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("out/user_study"))
    args = ap.parse_args()

    cfg = ScenarioConfig(bandwidth_mhz=10.0, los=True, frames_per_drop=args.frames)
    sweep = SweepSpec(
        bandwidths_mhz=[10.0],
        antennas=[2, 8],
        users=[12, 24, 36],
        subbands=[1, 2, 3, 6],
        los=[True],
        seeds=list(range(args.seeds)),
    )
    rows = run_sweep(cfg, sweep, jobs=args.jobs, out_dir=args.out)
    print(report(rows, out_dir=args.out))


if __name__ == "__main__":
    main()
