#!/usr/bin/env python
"""Margin search over the bundled uncertain systems.

For each uncertain system in systems/: maximize the certified interval,
cross-check the endpoints against the frozen-time margins, and print a
summary table.
"""

import argparse
import json
from pathlib import Path

from ltvcert import DecayRates, frozen_time_margins, load_system, max_uncertainty
from ltvcert.margin import MarginOptions
from ltvcert.model import UncertainPiecewiseLTVSystem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    default = Path(__file__).resolve().parent.parent / "systems"
    ap.add_argument("--systems-dir", default=str(default))
    ap.add_argument("--delta-max", type=float, default=1e6)
    args = ap.parse_args()

    manifest = json.loads((Path(args.systems_dir) / "manifest.json").read_text())
    opts = MarginOptions(delta_max=args.delta_max)
    print(f"{'system':28s} {'Delta*':>12s} {'interval':>26s} {'frozen cap':>12s}")
    for entry in manifest["systems"]:
        if not entry["uncertain"]:
            continue
        sys_obj, eps_file = load_system(Path(args.systems_dir) / entry["file"])
        assert isinstance(sys_obj, UncertainPiecewiseLTVSystem)
        eps = DecayRates(tuple(eps_file))
        res = max_uncertainty(sys_obj, eps, opts)
        if res is None:
            print(f"{entry['name']:28s} {'infeasible':>12s}")
            continue
        frozen = frozen_time_margins(sys_obj)
        cap = frozen.intersection[1] if frozen.intersection else float("inf")
        lo, hi = res.interval
        flag = " (B = 0)" if res.uncertainty_inactive else ""
        print(f"{entry['name']:28s} {res.delta_star:12.6g} "
              f"[{lo:11.6g}, {hi:11.6g}] {cap:12.6g}{flag}")
        if not res.uncertainty_inactive and cap < res.delta_star:
            print(f"  warning: certified Delta* exceeds frozen-time cap {cap:.6g}")


if __name__ == "__main__":
    main()
