"""Rotate-then-forward control: world polyline -> discrete actions -> motion.

Each polyline segment becomes a bearing change quantized to 15-degree
rotations (ties toward zero) followed by round(d / 0.25) forward steps.
Bearings are recomputed from the simulated post-segment pose, so quantization
residuals do not accumulate across segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import scene as scene_mod
from .geometry import Pose2D, WorldPoint, normalize_angle
from .scene import FORWARD_STEP_M, ROTATE_STEP_RAD

FORWARD = "forward"
ROTATE_LEFT = "rotate_left"
ROTATE_RIGHT = "rotate_right"
STOP_ACTION = "stop"


@dataclass(frozen=True)
class MotionSegment:
    target: WorldPoint
    actions: tuple[str, ...]


@dataclass(frozen=True)
class MotionPlan:
    segments: tuple[MotionSegment, ...]
    total_forward: float

    @property
    def actions(self) -> list[str]:
        return [a for seg in self.segments for a in seg.actions]


def _quantize_rotation(delta: float) -> int:
    """Signed count of 15-degree rotations nearest to delta; ties toward zero."""
    n = math.ceil(abs(delta) / ROTATE_STEP_RAD - 0.5)
    return n if delta >= 0 else -n


def _quantize_forward(distance: float) -> int:
    """round(d / 0.25); distances below half a step emit no forward."""
    return int(math.floor(distance / FORWARD_STEP_M + 0.5))


def polyline_to_actions(start: Pose2D, polyline: list[WorldPoint]) -> MotionPlan:
    """Quantized action sequence visiting the polyline's vertices in order."""
    if not polyline:
        raise ValueError("polyline must be non-empty")
    pose = start
    segments = []
    n_forward = 0
    for target in polyline:
        dx, dy = target.x - pose.x, target.y - pose.y
        dist = math.hypot(dx, dy)
        actions: list[str] = []
        heading = pose.heading
        if dist >= 1e-12:
            delta = normalize_angle(math.atan2(dy, dx) - pose.heading)
            n_rot = _quantize_rotation(delta)
            actions.extend([ROTATE_LEFT if n_rot > 0 else ROTATE_RIGHT] * abs(n_rot))
            heading = normalize_angle(pose.heading + n_rot * ROTATE_STEP_RAD)
        k = _quantize_forward(dist)
        actions.extend([FORWARD] * k)
        n_forward += k
        pose = Pose2D(
            pose.x + k * FORWARD_STEP_M * math.cos(heading),
            pose.y + k * FORWARD_STEP_M * math.sin(heading),
            heading,
        )
        segments.append(MotionSegment(target, tuple(actions)))
    return MotionPlan(tuple(segments), n_forward * FORWARD_STEP_M)


def simulate_terminal(start: Pose2D, plan: MotionPlan) -> Pose2D:
    """Terminal pose of the plan in an obstacle-free world."""
    pose = start
    for action in plan.actions:
        pose = _apply_free(pose, action)
    return pose


def _apply_free(pose: Pose2D, action: str) -> Pose2D:
    if action == FORWARD:
        return Pose2D(
            pose.x + FORWARD_STEP_M * math.cos(pose.heading),
            pose.y + FORWARD_STEP_M * math.sin(pose.heading),
            pose.heading,
        )
    if action == ROTATE_LEFT:
        return Pose2D(pose.x, pose.y, pose.heading + ROTATE_STEP_RAD)
    if action == ROTATE_RIGHT:
        return Pose2D(pose.x, pose.y, pose.heading - ROTATE_STEP_RAD)
    raise ValueError(f"unknown action {action!r}")


def execute(
    scene: scene_mod.SceneSpec,
    pose: Pose2D,
    plan: MotionPlan,
    body: scene_mod.AgentBody,
    max_actions: int | None = None,
) -> tuple[Pose2D, list[Pose2D], int, list[str]]:
    """Run the plan through the simulator with sliding collisions.

    Returns (final pose, trace of poses after each action starting with the
    initial pose, collided-step count, executed actions). Never raises on
    collision. `max_actions` truncates execution when the budget runs out.
    """
    trace = [pose]
    executed: list[str] = []
    collisions = 0
    for action in plan.actions:
        if max_actions is not None and len(executed) >= max_actions:
            break
        pose, collided = scene_mod.step(scene, pose, action, body)
        trace.append(pose)
        executed.append(action)
        if collided:
            collisions += 1
    return pose, trace, collisions, executed
