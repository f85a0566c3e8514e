"""Safety-margin sweep over the single-vehicle course.

Reruns the scenario with the keepout margin swapped for each value in
--margins, in both control modes, and reports whether each run stayed clear
of margin + disc radius (with the usual 0.1 slack). The point of the sweep
is the contrast: the filter respects every margin it is given while the
baseline's clearance is whatever the soft cost happens to buy.
"""

from __future__ import annotations

import argparse
from collections import defaultdict
from pathlib import Path

from safe_lsoc.harness import margin_sweep, write_sweep_csv
from safe_lsoc.scenarios import bundled_scenario_path, load_scenario

SCENARIO = "single_uav"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--margins", type=float, nargs="*",
                        default=[0.5, 1.0, 1.5, 2.0])
    parser.add_argument("--seeds", type=int, nargs="*", default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    sc = load_scenario(bundled_scenario_path(SCENARIO), name=SCENARIO)
    seeds = args.seeds if args.seeds else list(sc.sim.seeds)
    rows = margin_sweep(sc, args.margins, seeds)

    short = defaultdict(int)
    for row in rows:
        status = "clear" if row.cleared else "short"
        if not row.cleared:
            short[row.mode] += 1
        print(
            f"margin {row.margin:.2f} seed {row.seed:>3} [{row.mode}] "
            f"min_dist={row.min_center_distance:.3f} "
            f"threshold={row.threshold:.2f} {status}"
        )
    for mode in ("filtered", "baseline"):
        print(f"[{mode}] {short[mode]} run(s) short of threshold")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(rows, out / f"{sc.name}_margin_sweep.csv")
        print(f"wrote {out / f'{sc.name}_margin_sweep.csv'}")


if __name__ == "__main__":
    main()
