#!/usr/bin/env python3
"""Generate a dataset of seeded scenes plus episode files for the CLI.

Equivalent to `affnav gen-scenes` but with one call per scene so the episode
seeds are reproducible independently of the scene count.
"""

import argparse
from pathlib import Path

from affnav import worldgen
from affnav.runner import save_episodes


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=6)
    ap.add_argument("--episodes", type=int, default=5)
    ap.add_argument("--rooms", type=int, default=4)
    ap.add_argument("--size-m", type=float, default=10.0)
    ap.add_argument("--obstacle-density", type=float, default=0.01)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        scene = worldgen.generate_scene(
            seed, rooms=args.rooms, size_m=args.size_m,
            obstacle_density=args.obstacle_density,
        )
        scene.save(out / f"{scene.id}.json")
        episodes = worldgen.generate_episodes(scene, args.episodes, seed * 100)
        save_episodes(episodes, out / f"{scene.id}.episodes.json")
        print(f"{scene.id}: {len(episodes)} episodes")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
