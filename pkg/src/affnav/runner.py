"""Episode orchestration: observe, extract affordances, plan, decide, act.

One `run_episode` call executes the full per-step loop until the agent stops
or hits the decision/action caps. Batches run episodes with bounded
parallelism and isolate per-episode failures.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import annotate as annotate_mod
from . import control, lowplan, pathagent
from . import scene as scene_mod
from .affordance import (
    FileAffordanceProvider,
    OracleAffordanceProvider,
    SamplerConfig,
    sample_candidates,
)
from .geometry import VIEW_ORDER, CameraIntrinsics, Pose2D, WorldPoint, view_pose
from .llmclient import ChatClient, EndpointConfig
from .lowplan import CandidateSet, ScriptedPlannerConfig
from .metrics import DEFAULT_SUCCESS_RADIUS_M

log = logging.getLogger(__name__)

RECOVERY_TURNS = 6  # 6 x 15 deg = 90 deg when every view is affordance-free


@dataclass(frozen=True)
class Episode:
    id: str
    scene_id: str
    start: Pose2D
    goal: WorldPoint
    instruction: str
    gt_shortest: float

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "scene_id": self.scene_id,
            "start": [self.start.x, self.start.y, self.start.heading],
            "goal": [self.goal.x, self.goal.y],
            "instruction": self.instruction,
            "gt_shortest": self.gt_shortest,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Episode":
        return cls(
            id=d["id"],
            scene_id=d["scene_id"],
            start=Pose2D(*d["start"]),
            goal=WorldPoint(d["goal"][0], d["goal"][1], 0.0),
            instruction=d["instruction"],
            gt_shortest=d["gt_shortest"],
        )


def save_episodes(episodes: list[Episode], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([e.to_json_dict() for e in episodes], indent=2, sort_keys=True) + "\n"
    )


def load_episodes(path: str | Path) -> list[Episode]:
    return [Episode.from_json_dict(d) for d in json.loads(Path(path).read_text())]


@dataclass
class RunConfig:
    planner: str = "scripted"  # scripted | llm
    agent: str = "oracle"  # oracle | llm
    affordance: str = "oracle"  # oracle | file
    mask_dir: str | None = None
    max_decisions: int = 12
    max_actions: int = 200
    seed: int = 0
    image_size: int = 256
    hfov_deg: float = 90.0
    cam_height_m: float = 1.25
    body_radius_m: float = 0.10
    sliding: bool = True
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M
    oracle_stop_radius_m: float = 1.0
    scripted_goal_hint: bool = False
    include_instruction: bool = True  # low-level planner ablation switch
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    scripted: ScriptedPlannerConfig = field(default_factory=ScriptedPlannerConfig)
    endpoint: EndpointConfig | None = None
    save_images: bool = False
    image_dir: str | None = None

    def __post_init__(self):
        if self.max_decisions <= 0 or self.max_actions <= 0:
            raise ValueError("caps must be positive")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.from_hfov(self.image_size, self.image_size, self.hfov_deg)

    def body(self) -> scene_mod.AgentBody:
        return scene_mod.AgentBody(radius=self.body_radius_m, sliding=self.sliding)

    def to_json_dict(self) -> dict:
        d = {
            k: v
            for k, v in self.__dict__.items()
            if k not in ("sampler", "scripted", "endpoint")
        }
        d["sampler"] = self.sampler.__dict__ | {}
        d["scripted"] = self.scripted.__dict__ | {}
        d["endpoint"] = (
            {"base_url": self.endpoint.base_url, "model": self.endpoint.model}
            if self.endpoint
            else None
        )
        return {k: d[k] for k in sorted(d)}


def benchmark_config(**overrides) -> RunConfig:
    """Scripted-pipeline profile tuned for the seeded multi-room benchmark.

    Denser candidate sampling and more per-view paths than the legibility-
    oriented defaults; used by the acceptance benchmark and scripts.
    """
    base = dict(
        image_size=512,
        sampler=SamplerConfig(stride_px=32, margin_px=16, min_clearance_px=4, max_points=100),
        scripted=ScriptedPlannerConfig(k_paths=5, min_sep_deg=12.0, anchor_clear_px=40.0),
    )
    base.update(overrides)
    return RunConfig(**base)


@dataclass
class TrajectoryLog:
    episode_id: str
    records: list[dict] = field(default_factory=list)

    @property
    def terminal(self) -> dict | None:
        for r in self.records:
            if r["type"] == "terminal":
                return r
        return None

    @property
    def steps(self) -> list[dict]:
        return [r for r in self.records if r["type"] == "step"]

    def full_trace(self, start: Pose2D) -> list[tuple[float, float]]:
        """Pose positions after every low-level action, starting at `start`."""
        trace = [(start.x, start.y)]
        for rec in self.steps:
            for p in rec["trace"][1:]:
                trace.append((p[0], p[1]))
        return trace

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> "TrajectoryLog":
        records = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
        eid = ""
        for r in records:
            if r["type"] == "meta":
                eid = r.get("episode_id", "")
        return cls(eid, records)


def _pose_list(p: Pose2D) -> list[float]:
    return [p.x, p.y, p.heading]


def _make_provider(cfg: RunConfig, scene: scene_mod.SceneSpec):
    if cfg.affordance == "oracle":
        return OracleAffordanceProvider(scene, cfg.body())
    if cfg.affordance == "file":
        if not cfg.mask_dir:
            raise ValueError("affordance=file requires mask_dir")
        return FileAffordanceProvider(cfg.mask_dir)
    raise ValueError(f"unknown affordance source {cfg.affordance!r}")


def observe(scene, pose, intr, cam_height, provider, episode_id, step_idx, sampler_cfg):
    """Render the four views and sample per-view candidates.

    Returns dict view_dir -> (rgb, depth, mask, candidates).
    """
    out = {}
    for d in VIEW_ORDER:
        vp = view_pose(pose, d)
        depth, kind = scene_mod.raycast(scene, vp, intr, cam_height)
        rgb = scene_mod.shade_rgb(scene, depth, kind)
        mask = provider.mask(episode_id, step_idx, d, vp, intr, cam_height, depth, kind)
        cands = sample_candidates(mask, depth, intr, vp, cam_height, d, sampler_cfg)
        out[d] = (rgb, depth, mask, cands)
    return out


def run_episode(
    episode: Episode,
    scene: scene_mod.SceneSpec,
    cfg: RunConfig,
    client: ChatClient | None = None,
) -> TrajectoryLog:
    if episode.scene_id != scene.id:
        raise ValueError(f"episode {episode.id} expects scene {episode.scene_id}, got {scene.id}")
    if (cfg.planner == "llm" or cfg.agent == "llm") and client is None:
        if cfg.endpoint is None:
            raise ValueError("llm planner/agent requires an endpoint configuration")
        client = ChatClient(cfg.endpoint)

    intr = cfg.intrinsics()
    body = cfg.body()
    provider = _make_provider(cfg, scene)
    vap_template = lowplan.load_prompt("vap.txt")
    high_template = lowplan.load_prompt("pathagent.txt")

    pose = episode.start
    history = pathagent.History()
    log_obj = TrajectoryLog(episode.id)
    log_obj.records.append(
        {
            "type": "meta",
            "episode_id": episode.id,
            "scene_id": scene.id,
            "config": cfg.to_json_dict(),
        }
    )
    actions_left = cfg.max_actions
    stop_reason = "max_decisions"
    visited: list[tuple[float, float]] = []

    for step_idx in range(cfg.max_decisions):
        visited.append((pose.x, pose.y))
        obs = observe(
            scene, pose, intr, cfg.cam_height_m, provider, episode.id, step_idx, cfg.sampler
        )
        per_view_cands = {d: obs[d][3] for d in VIEW_ORDER}

        merged = CandidateSet()
        if any(per_view_cands[d] for d in VIEW_ORDER):
            per_view_paths = _plan_all_views(
                cfg, obs, pose, episode, client, vap_template
            )
            merged = lowplan.merge(per_view_paths, per_view_cands)

        image_refs = _maybe_save_images(cfg, episode, step_idx, obs, merged)

        if len(merged) == 0:
            # Degenerate step: no affordances or no plans anywhere; turn 90 deg.
            trace = [pose]
            executed = []
            for _ in range(RECOVERY_TURNS):
                if actions_left <= 0:
                    break
                pose, _ = scene_mod.step(scene, pose, control.ROTATE_LEFT, body)
                trace.append(pose)
                executed.append(control.ROTATE_LEFT)
                actions_left -= 1
            log_obj.records.append(
                {
                    "type": "step",
                    "step": step_idx,
                    "pose": _pose_list(trace[0]),
                    "candidates": 0,
                    "decision": {"thought": "no candidate paths; recovery turn", "action": "recover"},
                    "actions": executed,
                    "collisions": 0,
                    "trace": [_pose_list(p) for p in trace],
                    "images": image_refs,
                }
            )
            if actions_left <= 0:
                stop_reason = "max_actions"
                break
            continue

        if cfg.agent == "oracle":
            decision = pathagent.decide_oracle(
                merged, pose, episode.goal, scene, body,
                pathagent.OracleAgentConfig(cfg.oracle_stop_radius_m),
                visited=tuple(visited[:-1]),
            )
        else:
            annotated_obs = annotate_mod.draw_paths({d: obs[d][0] for d in VIEW_ORDER}, merged)
            decision = pathagent.decide_llm(
                client, high_template, episode.instruction, history, annotated_obs, merged, pose
            )

        if decision.is_stop:
            log_obj.records.append(
                {
                    "type": "step",
                    "step": step_idx,
                    "pose": _pose_list(pose),
                    "candidates": len(merged),
                    "decision": {"thought": decision.thought, "action": "stop"},
                    "actions": [],
                    "collisions": 0,
                    "trace": [_pose_list(pose)],
                    "images": image_refs,
                }
            )
            stop_reason = "stop"
            break

        entry = merged.get(decision.action)
        assert entry is not None, "decision must reference a live candidate"
        plan = control.polyline_to_actions(pose, list(entry.world_polyline))
        final, trace, collisions, executed = control.execute(
            scene, pose, plan, body, max_actions=actions_left
        )
        actions_left -= len(executed)
        log_obj.records.append(
            {
                "type": "step",
                "step": step_idx,
                "pose": _pose_list(pose),
                "candidates": len(merged),
                "decision": {"thought": decision.thought, "action": decision.action},
                "actions": executed,
                "collisions": collisions,
                "trace": [_pose_list(p) for p in trace],
                "images": image_refs,
            }
        )
        history = pathagent.update_history(
            history, decision, entry.world_polyline[-1], entry.path.view_dir
        )
        pose = final
        if actions_left <= 0:
            stop_reason = "max_actions"
            break

    log_obj.records.append(
        {"type": "terminal", "final_pose": _pose_list(pose), "stop_reason": stop_reason}
    )
    return log_obj


def _plan_all_views(cfg, obs, pose, episode, client, vap_template):
    """Per-view low-level planning; the four LLM calls run concurrently."""
    goal_hint = episode.goal if (cfg.planner == "scripted" and cfg.scripted_goal_hint) else None

    def plan_one(d):
        rgb, depth, mask, cands = obs[d]
        if not cands:
            return []
        vp = view_pose(pose, d)
        if cfg.planner == "scripted":
            return lowplan.plan_view_scripted(cands, mask, vp, d, goal_hint, cfg.scripted)
        annotated = annotate_mod.draw_points(rgb, cands)
        instruction = episode.instruction if cfg.include_instruction else None
        return lowplan.plan_view_llm(
            client, vap_template, instruction, annotated, d, {c.id for c in cands}
        )

    if cfg.planner == "llm":
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(plan_one, VIEW_ORDER))
        return dict(zip(VIEW_ORDER, results))
    return {d: plan_one(d) for d in VIEW_ORDER}


def _maybe_save_images(cfg, episode, step_idx, obs, merged) -> list[str]:
    if not cfg.save_images or not cfg.image_dir:
        return []
    out_dir = Path(cfg.image_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    refs = []
    annotated_pts = {
        d: annotate_mod.draw_points(obs[d][0], obs[d][3]).image for d in VIEW_ORDER
    }
    annotated = annotate_mod.draw_paths(annotated_pts, merged)
    for d in VIEW_ORDER:
        name = f"{episode.id}_{step_idx}_{d.value}.png"
        annotate_mod.save_png(annotated[d].image, out_dir / name)
        refs.append(name)
    return refs


def run_batch(
    episodes: list[Episode],
    scenes: dict[str, scene_mod.SceneSpec],
    cfg: RunConfig,
    parallelism: int = 1,
) -> list[TrajectoryLog | dict]:
    """Run episodes with bounded parallelism; failures become error records."""

    def one(ep: Episode):
        try:
            return run_episode(ep, scenes[ep.scene_id], cfg)
        except Exception as exc:  # noqa: BLE001 - isolation is the contract
            log.exception("episode %s failed", ep.id)
            return {"type": "error", "episode_id": ep.id, "error": str(exc)}

    if parallelism <= 1:
        return [one(ep) for ep in episodes]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, episodes))
