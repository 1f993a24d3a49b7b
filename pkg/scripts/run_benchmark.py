#!/usr/bin/env python3
"""Run the seeded 30-episode scripted benchmark and print the metric table.

This is the same configuration the acceptance suite pins (oracle affordances,
scripted per-view planner, oracle high-level agent).
"""

import argparse
import time

from affnav import metrics, runner, worldgen


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[7, 8, 9, 10, 11, 12])
    ap.add_argument("--episodes-per-scene", type=int, default=5)
    ap.add_argument("--goal-hint", action="store_true",
                    help="let the scripted planner rank waypoints by goal proximity")
    args = ap.parse_args()

    cfg = runner.benchmark_config(scripted_goal_hint=args.goal_hint)
    t0 = time.monotonic()
    results = []
    for seed in args.seeds:
        scene = worldgen.generate_scene(seed)
        episodes = worldgen.generate_episodes(
            scene, args.episodes_per_scene, seed * 100, cfg.body()
        )
        for ep in episodes:
            log = runner.run_episode(ep, scene, cfg)
            res = metrics.evaluate(
                log.full_trace(ep.start), ep.goal, ep.gt_shortest,
                scene, cfg.body(), ep.id, cfg.success_radius_m,
            )
            results.append(res)
            mark = "ok " if res.sr else "MISS"
            print(f"  {mark} {ep.id:<16} NE {res.ne:5.2f}  TL {res.tl:5.2f}  SPL {res.spl:.2f}")
    report = metrics.aggregate(results, cfg.success_radius_m)
    print()
    print(metrics.report_table(report))
    print(f"wall time: {time.monotonic() - t0:.1f}s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
