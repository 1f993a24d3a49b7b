"""Operator command line: scene generation, runs, evaluation, debugging, replay.

Exit codes: 0 success, 1 usage error, 2 runtime error. A simple key=value
config file can seed any run flag; explicit flags win. The LLM credential is
read from an environment variable only, never from config files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import annotate as annotate_mod
from . import metrics as metrics_mod
from . import scene as scene_mod
from . import worldgen
from .affordance import sample_candidates
from .geometry import VIEW_ORDER, Pose2D, view_pose
from .llmclient import EndpointConfig
from .runner import RunConfig, TrajectoryLog, load_episodes, run_batch, save_episodes

CONFIG_KEYS = {
    "planner": str, "agent": str, "affordance": str, "mask_dir": str,
    "max_decisions": int, "max_actions": int, "seed": int, "image_size": int,
    "hfov_deg": float, "cam_height_m": float, "body_radius_m": float,
    "success_radius_m": float, "oracle_stop_radius_m": float,
    "scripted_goal_hint": bool, "include_instruction": bool,
    "endpoint_base_url": str, "endpoint_model": str, "api_key_env": str,
    "save_images": bool, "parallelism": int, "log_llm": bool,
}


class UsageError(Exception):
    pass


def load_config_file(path: str) -> dict:
    """Parse a key = value config file; unknown keys are rejected."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip().strip('"').strip("'")
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        typ = CONFIG_KEYS[key]
        if typ is bool:
            out[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            out[key] = typ(value)
    return out


def _build_run_config(args, file_cfg: dict) -> tuple[RunConfig, int]:
    merged = dict(file_cfg)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    parallelism = int(merged.pop("parallelism", 1))
    endpoint = None
    base_url = merged.pop("endpoint_base_url", None)
    model = merged.pop("endpoint_model", None)
    api_key_env = merged.pop("api_key_env", None)
    log_llm = merged.pop("log_llm", False)
    if base_url:
        endpoint = EndpointConfig(
            base_url=base_url,
            model=model or "default",
            api_key_env=api_key_env or "AFFNAV_API_KEY",
            log_path=str(Path(args.out) / "llm_transcript.jsonl") if log_llm else None,
        )
    cfg = RunConfig(endpoint=endpoint, **merged)
    return cfg, parallelism


def _load_scenes(scene_paths: list[str]) -> dict[str, scene_mod.SceneSpec]:
    scenes = {}
    for p in scene_paths:
        path = Path(p)
        if path.is_dir():
            files = sorted(
                f for f in path.glob("*.json") if not f.name.endswith(".episodes.json")
            )
        else:
            files = [path]
        for f in files:
            s = scene_mod.SceneSpec.load(f)
            scenes[s.id] = s
    return scenes


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_scenes(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        seed = args.seed + i
        s = worldgen.generate_scene(
            seed=seed,
            rooms=args.rooms,
            size_m=args.size_m,
            obstacle_density=args.obstacle_density,
        )
        s.save(out / f"{s.id}.json")
        if args.episodes > 0:
            eps = worldgen.generate_episodes(s, args.episodes, seed=seed * 1000 + 1)
            save_episodes(eps, out / f"{s.id}.episodes.json")
    print(f"wrote {args.count} scene(s) to {out}")
    return 0


def cmd_run(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    cfg, parallelism = _build_run_config(args, file_cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.save_images:
        cfg.image_dir = str(out / "images")
    scenes = _load_scenes(args.scenes)
    episodes = []
    for ep_path in args.episodes:
        episodes.extend(load_episodes(ep_path))
    digest = metrics_mod.config_digest(cfg.to_json_dict())
    (out / "config.json").write_text(
        json.dumps({"digest": digest, "config": cfg.to_json_dict()}, indent=2, sort_keys=True) + "\n"
    )
    logs = run_batch(episodes, scenes, cfg, parallelism)
    failures = 0
    for ep, lg in zip(episodes, logs):
        if isinstance(lg, dict):
            failures += 1
            (out / f"{ep.id}.error.json").write_text(json.dumps(lg, sort_keys=True) + "\n")
        else:
            lg.save(out / f"{ep.id}.jsonl")
    print(f"ran {len(episodes)} episode(s), {failures} failure(s); logs in {out}")
    return 0


def cmd_eval(args) -> int:
    scenes = _load_scenes(args.scenes)
    episodes = {}
    for ep_path in args.episodes:
        for ep in load_episodes(ep_path):
            episodes[ep.id] = ep
    body = scene_mod.AgentBody(radius=args.body_radius_m)
    results = []
    digest = None
    log_dir = Path(args.logs)
    for f in sorted(log_dir.glob("*.jsonl")):
        lg = TrajectoryLog.load(f)
        if lg.episode_id not in episodes:
            continue
        ep = episodes[lg.episode_id]
        meta = lg.records[0] if lg.records and lg.records[0]["type"] == "meta" else {}
        if meta.get("config") and digest is None:
            digest = metrics_mod.config_digest(meta["config"])
        trace = lg.full_trace(ep.start)
        results.append(
            metrics_mod.evaluate(
                trace, ep.goal, ep.gt_shortest, scenes[ep.scene_id], body,
                episode_id=ep.id, success_radius_m=args.success_radius_m,
            )
        )
    if not results:
        raise UsageError("no matching trajectory logs found")
    report = metrics_mod.aggregate(results, args.success_radius_m, digest)
    print(metrics_mod.report_table(report))
    if args.out:
        Path(args.out).write_text(metrics_mod.report_json(report) + "\n")
    return 0


def cmd_annotate(args) -> int:
    scenes = _load_scenes(args.scenes)
    episodes = {ep.id: ep for p in args.episodes for ep in load_episodes(p)}
    ep = episodes[args.episode_id]
    scn = scenes[ep.scene_id]
    cfg = RunConfig()
    intr = cfg.intrinsics()
    body = cfg.body()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for d in VIEW_ORDER:
        vp = view_pose(ep.start, d)
        depth, kind = scene_mod.raycast(scn, vp, intr, cfg.cam_height_m)
        rgb = scene_mod.shade_rgb(scn, depth, kind)
        mask = scene_mod.ground_mask(scn, vp, intr, cfg.cam_height_m, body, depth, kind)
        cands = sample_candidates(mask, depth, intr, vp, cfg.cam_height_m, d, cfg.sampler)
        annotated = annotate_mod.draw_points(rgb, cands)
        annotate_mod.save_png(annotated.image, out / f"{ep.id}_0_{d.value}.png")
    print(f"wrote annotated views to {out}")
    return 0


def cmd_replay(args) -> int:
    scenes = _load_scenes(args.scenes)
    episodes = {ep.id: ep for p in args.episodes for ep in load_episodes(p)}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in sorted(Path(args.logs).glob("*.jsonl")):
        lg = TrajectoryLog.load(f)
        if lg.episode_id not in episodes:
            continue
        ep = episodes[lg.episode_id]
        scn = scenes[ep.scene_id]
        img = _topdown_plot(scn, ep, lg, args.success_radius_m)
        annotate_mod.save_png(img, out / f"{ep.id}.trajectory.png")
        if args.views:
            _replay_views(scn, ep, lg, out)
    print(f"wrote replay renders to {out}")
    return 0


def _topdown_plot(scn, ep, lg: TrajectoryLog, success_radius: float, px_per_cell: int = 4):
    ny, nx = scn.grid.shape
    img = np.full((ny * px_per_cell, nx * px_per_cell, 3), 235, dtype=np.uint8)
    wall = np.kron(scn.grid == 1, np.ones((px_per_cell, px_per_cell), dtype=bool))
    img[wall] = (40, 40, 40)

    def to_px(x, y):
        return x / scn.cell_size * px_per_cell, y / scn.cell_size * px_per_cell

    # success-radius circle around the goal
    gx, gy = to_px(ep.goal.x, ep.goal.y)
    r = success_radius / scn.cell_size * px_per_cell
    for k in range(360):
        a = math.radians(k)
        u, v = int(round(gx + r * math.cos(a))), int(round(gy + r * math.sin(a)))
        if 0 <= v < img.shape[0] and 0 <= u < img.shape[1]:
            img[v, u] = (120, 180, 120)
    trace = lg.full_trace(ep.start)
    pts = [to_px(x, y) for x, y in trace]
    for a, b in zip(pts[:-1], pts[1:]):
        annotate_mod._draw_segment(img, a, b, (200, 40, 40), 2)
    annotate_mod._draw_disc(img, int(round(gx)), int(round(gy)), 5, (30, 140, 30))
    sx, sy = to_px(ep.start.x, ep.start.y)
    annotate_mod._draw_disc(img, int(round(sx)), int(round(sy)), 4, (40, 40, 200))
    # image rows grow downward; flip so +y is up in the plot
    return img[::-1].copy()


def _replay_views(scn, ep, lg: TrajectoryLog, out: Path):
    cfg = RunConfig()
    intr = cfg.intrinsics()
    for rec in lg.steps:
        pose = Pose2D(*rec["pose"])
        for d in VIEW_ORDER:
            vp = view_pose(pose, d)
            rgb, _ = scene_mod.render(scn, vp, intr, cfg.cam_height_m)
            annotate_mod.save_png(rgb, out / f"{ep.id}_{rec['step']}_{d.value}.png")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="affnav", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-scenes", help="generate seeded multi-room scenes")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--rooms", type=int, default=4)
    g.add_argument("--size-m", type=float, default=10.0)
    g.add_argument("--obstacle-density", type=float, default=0.01)
    g.add_argument("--episodes", type=int, default=0, help="episodes to generate per scene")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_scenes)

    r = sub.add_parser("run", help="run episodes through the pipeline")
    r.add_argument("--scenes", nargs="+", required=True)
    r.add_argument("--episodes", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--config", help="key = value config file")
    for key, typ in CONFIG_KEYS.items():
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            r.add_argument(flag, default=None, action="store_const", const=True)
        else:
            r.add_argument(flag, type=typ, default=None)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="score trajectory logs")
    e.add_argument("--scenes", nargs="+", required=True)
    e.add_argument("--episodes", nargs="+", required=True)
    e.add_argument("--logs", required=True)
    e.add_argument("--out")
    e.add_argument("--success-radius-m", type=float, default=3.0)
    e.add_argument("--body-radius-m", type=float, default=0.10)
    e.set_defaults(func=cmd_eval)

    a = sub.add_parser("annotate", help="write annotated views for one episode start")
    a.add_argument("--scenes", nargs="+", required=True)
    a.add_argument("--episodes", nargs="+", required=True)
    a.add_argument("--episode-id", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_annotate)

    rp = sub.add_parser("replay", help="re-render logged trajectories")
    rp.add_argument("--scenes", nargs="+", required=True)
    rp.add_argument("--episodes", nargs="+", required=True)
    rp.add_argument("--logs", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--views", action="store_true", help="also re-render per-step views")
    rp.add_argument("--success-radius-m", type=float, default=3.0)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
