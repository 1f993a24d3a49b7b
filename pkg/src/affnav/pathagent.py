"""High-level decision step: pick one global candidate path or stop.

The oracle agent uses geodesic ground truth and exists to exercise the full
pipeline without an LLM; the LLM agent sends the instruction, history, a
candidate digest, and the four annotated observations to a chat endpoint.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

from . import scene as scene_mod
from .geometry import VIEW_ORDER, Pose2D, ViewDirection, WorldPoint, normalize_angle
from .llmclient import ChatClient, extract_json_object, image_part, text_part
from .lowplan import CandidateSet

log = logging.getLogger(__name__)

THOUGHT_LIMIT = 240

DECISION_OUTPUT_SCHEMA = '{"thought": "<why>", "action": "stop" or <global path id>}'

STOP = "stop"


@dataclass(frozen=True)
class Decision:
    thought: str
    action: int | str  # global path id, or STOP

    @property
    def is_stop(self) -> bool:
        return self.action == STOP


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    action: int | str
    view_dir: str | None
    thought: str
    endpoint: tuple[float, float] | None


@dataclass(frozen=True)
class History:
    entries: tuple[HistoryEntry, ...] = ()

    def render(self) -> str:
        if not self.entries:
            return "(nothing yet; this is the first step)"
        lines = []
        for e in self.entries:
            if e.action == STOP:
                act = "stopped"
            else:
                act = f"followed path {e.action} ({e.view_dir} view)"
            lines.append(f"step {e.step}: {act} — {e.thought}")
        return "\n".join(lines)


def truncate_thought(thought: str, limit: int = THOUGHT_LIMIT) -> str:
    """Prefix-preserving truncation at a word boundary."""
    if len(thought) <= limit:
        return thought
    cut = thought[:limit]
    space = cut.rfind(" ")
    if space > 0:
        cut = cut[:space]
    return cut


def update_history(history: History, decision: Decision, chosen_endpoint: WorldPoint | None,
                   view_dir: ViewDirection | None = None) -> History:
    step = history.entries[-1].step + 1 if history.entries else 0
    entry = HistoryEntry(
        step=step,
        action=decision.action,
        view_dir=view_dir.value if view_dir is not None else None,
        thought=truncate_thought(decision.thought),
        endpoint=(chosen_endpoint.x, chosen_endpoint.y) if chosen_endpoint else None,
    )
    return History(history.entries + (entry,))


@dataclass(frozen=True)
class OracleAgentConfig:
    stop_radius_m: float = 1.0
    # A candidate ending this close to an already-visited decision position is
    # skipped unless it still improves the geodesic over standing still; this
    # breaks ping-pong limit cycles while leaving real backtracking (which
    # does improve the geodesic) available.
    revisit_radius_m: float = 0.5


def decide_oracle(
    candidates: CandidateSet,
    pose: Pose2D,
    goal: WorldPoint,
    scene: scene_mod.SceneSpec,
    body: scene_mod.AgentBody,
    cfg: OracleAgentConfig = OracleAgentConfig(),
    visited: tuple[tuple[float, float], ...] = (),
) -> Decision:
    """Ground-truth agent: stop inside stop_radius, else geodesic argmin.

    Ties break toward the lower global id; an empty candidate set stops.
    `visited` carries the positions of previous decision steps for the
    revisit filter (see OracleAgentConfig.revisit_radius_m).
    """
    here = scene_mod.geodesic_distance(scene, (pose.x, pose.y), goal, body)
    if here <= cfg.stop_radius_m:
        return Decision(thought=f"goal within {cfg.stop_radius_m} m (geodesic {here:.2f} m)", action=STOP)
    if len(candidates) == 0:
        return Decision(thought="no candidate paths available", action=STOP)

    def score(entry):
        term = entry.world_polyline[-1]
        try:
            return scene_mod.geodesic_distance(scene, (term.x, term.y), goal, body)
        except scene_mod.SnapError:
            return math.inf

    def near_visited(entry):
        term = entry.world_polyline[-1]
        return any(
            math.hypot(term.x - vx, term.y - vy) <= cfg.revisit_radius_m for vx, vy in visited
        )

    best_id, best_d = None, math.inf
    for entry in candidates.entries:
        d = score(entry)
        if d >= here - 1e-9 and near_visited(entry):
            continue  # no progress and we have stood there before
        if d < best_d:
            best_d, best_id = d, entry.global_id
    if best_id is None:
        # every candidate was filtered or unreachable: fall back to plain argmin
        for entry in candidates.entries:
            d = score(entry)
            if d < best_d:
                best_d, best_id = d, entry.global_id
    if best_id is None:
        return Decision(thought="all candidate endpoints unreachable", action=STOP)
    return Decision(
        thought=f"path {best_id} ends {best_d:.2f} m (geodesic) from the goal", action=best_id
    )


def candidate_digest(candidates: CandidateSet, pose: Pose2D) -> str:
    """Plain-text table of the candidates: id, view, endpoint range and bearing."""
    if len(candidates) == 0:
        return "(no candidate paths this step)"
    lines = []
    for e in candidates.entries:
        term = e.world_polyline[-1]
        dx, dy = term.x - pose.x, term.y - pose.y
        rng = math.hypot(dx, dy)
        bearing = math.degrees(normalize_angle(math.atan2(dy, dx) - pose.heading))
        lines.append(
            f"path {e.global_id}: {e.path.view_dir.value} view, endpoint {rng:.1f} m away, "
            f"bearing {bearing:+.0f} deg"
        )
    return "\n".join(lines)


def parse_decision(text: str, valid_ids: set[int]) -> Decision:
    """Parse {"thought": ..., "action": "stop" | int}; invalid id raises ValueError."""
    obj = extract_json_object(text)
    thought = str(obj.get("thought", ""))
    action = obj.get("action")
    if isinstance(action, str) and action.strip().lower() == STOP:
        return Decision(thought, STOP)
    try:
        gid = int(action)
    except (TypeError, ValueError):
        raise ValueError(f"action must be 'stop' or an integer, got {action!r}")
    if gid not in valid_ids:
        raise ValueError(f"action {gid} is not a valid candidate id")
    return Decision(thought, gid)


def decide_llm(
    client: ChatClient,
    template: str,
    instruction: str,
    history: History,
    annotated_obs: dict,
    candidates: CandidateSet,
    pose: Pose2D,
) -> Decision:
    """One chat request with prompt, history, digest, and the four views.

    An invalid path id earns one reprompt; a second violation degrades to Stop
    with a diagnostic thought.
    """
    prompt = template.format(
        instruction=instruction,
        history=history.render(),
        candidates=candidate_digest(candidates, pose),
        output_schema=DECISION_OUTPUT_SCHEMA,
    )
    parts = [text_part(prompt)]
    for d in VIEW_ORDER:
        parts.append(image_part(annotated_obs[d].image))
    valid = candidates.global_ids
    reply = client.complete(parts)
    for attempt in range(2):
        try:
            return parse_decision(reply, valid)
        except ValueError as exc:
            if attempt == 0:
                retry = parts + [
                    text_part(
                        f"Your previous reply was invalid ({exc}). Valid path ids: "
                        f"{sorted(valid)}. Reply with exactly one JSON object: "
                        f"{DECISION_OUTPUT_SCHEMA}"
                    )
                ]
                reply = client.complete(retry)
            else:
                return Decision(
                    thought=f"stopping: endpoint returned an invalid action twice ({exc})",
                    action=STOP,
                )
    raise AssertionError("unreachable")


def decision_to_json(decision: Decision) -> str:
    return json.dumps({"thought": decision.thought, "action": decision.action})
