"""Single-vehicle obstacle course, filtered against baseline.

The baseline flies the sampled optimal control as-is and clips through the
keepout discs whenever the soft cost loses to the target pull. The filtered
mode runs the same controls through the barrier projection and should log
zero violations. Writes per-seed CSVs when --out is given.
"""

from __future__ import annotations

import argparse

from safe_lsoc.harness import (
    MODE_BASELINE,
    MODE_FILTERED,
    compute_metrics,
    export_run,
    run_seeds,
)
from safe_lsoc.scenarios import bundled_scenario_path, load_scenario

SCENARIO = "single_uav"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--mode", choices=["both", MODE_FILTERED, MODE_BASELINE],
                        default="both")
    parser.add_argument("--seeds", type=int, nargs="*", default=None)
    parser.add_argument("--out", default=None,
                        help="directory for trajectory and metrics files")
    args = parser.parse_args()

    sc = load_scenario(bundled_scenario_path(SCENARIO), name=SCENARIO)
    seeds = args.seeds if args.seeds else list(sc.sim.seeds)
    modes = [MODE_FILTERED, MODE_BASELINE] if args.mode == "both" else [args.mode]

    for mode in modes:
        total_violations = 0
        worst_dist = float("inf")
        for res in run_seeds(sc, seeds, mode=mode):
            m = export_run(res, sc, args.out) if args.out else compute_metrics(res, sc)
            total_violations += m["safety_violation_count"]
            worst_dist = min(worst_dist, min(m["min_center_distance"]))
            print(
                f"[{mode}] seed {m['seed']:>3} "
                f"reached={sum(m['reached'])}/{len(m['reached'])} "
                f"min_dist={min(m['min_center_distance']):.2f} "
                f"violations={m['safety_violation_count']} "
                f"filter_hits={m['filter_activation_count']}"
            )
        print(
            f"[{mode}] total violations {total_violations}, "
            f"worst obstacle distance {worst_dist:.2f} "
            f"(keepout {sc.obstacles[0].keepout_radius:.1f})"
        )


if __name__ == "__main__":
    main()
