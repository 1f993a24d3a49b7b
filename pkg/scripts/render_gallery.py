#!/usr/bin/env python3
"""Render a small gallery for one scene: the four annotated views at an
episode start plus a top-down occupancy plot. Useful for eyeballing the
renderer, the affordance masks, and the candidate sampler."""

import argparse
from pathlib import Path

import numpy as np

from affnav import annotate, runner, worldgen
from affnav import scene as scene_mod
from affnav.affordance import sample_candidates, save_mask_png
from affnav.geometry import VIEW_ORDER, view_pose


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = worldgen.generate_scene(args.seed)
    cfg = runner.benchmark_config()
    episodes = worldgen.generate_episodes(scene, 1, args.seed * 100, cfg.body())
    ep = episodes[0]
    intr = cfg.intrinsics()
    body = cfg.body()

    for d in VIEW_ORDER:
        vp = view_pose(ep.start, d)
        depth, kind = scene_mod.raycast(scene, vp, intr, cfg.cam_height_m)
        rgb = scene_mod.shade_rgb(scene, depth, kind)
        mask = scene_mod.ground_mask(scene, vp, intr, cfg.cam_height_m, body, depth, kind)
        cands = sample_candidates(mask, depth, intr, vp, cfg.cam_height_m, d, cfg.sampler)
        annotate.save_png(rgb, out / f"view_{d.value}.png")
        save_mask_png(mask, out / f"view_{d.value}.mask.png")
        annotate.save_png(annotate.draw_points(rgb, cands).image, out / f"view_{d.value}.points.png")

    # top-down occupancy with the start pose and goal marked
    px = 6
    ny, nx = scene.grid.shape
    img = np.full((ny * px, nx * px, 3), 235, dtype=np.uint8)
    img[np.kron(scene.grid == 1, np.ones((px, px), dtype=bool))] = (40, 40, 40)
    sx, sy = ep.start.x / scene.cell_size * px, ep.start.y / scene.cell_size * px
    gx, gy = ep.goal.x / scene.cell_size * px, ep.goal.y / scene.cell_size * px
    annotate._draw_disc(img, int(sx), int(sy), 6, (40, 40, 200))
    annotate._draw_disc(img, int(gx), int(gy), 6, (30, 140, 30))
    annotate.save_png(img[::-1].copy(), out / "topdown.png")
    print(f"instruction: {ep.instruction}")
    print(f"gallery written to {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
