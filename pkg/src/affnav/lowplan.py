"""Low-level per-view planning and the cross-view merge.

Given a view's candidate points and affordance mask, propose up to k waypoint
paths: chains of candidate ids whose straight pixel segments stay inside the
mask. The scripted planner is a deterministic stand-in for a multimodal LLM;
`plan_view_llm` does the same through a chat endpoint. `merge` joins the four
views into the step's globally-labeled candidate set.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .annotate import AnnotatedImage, bottom_center_anchor
from .geometry import VIEW_ORDER, PixelPoint, ViewDirection, WorldPoint
from .llmclient import ChatClient, extract_json_object, image_part, text_part

log = logging.getLogger(__name__)

PLAN_OUTPUT_SCHEMA = '{"waypoints": [{"waypoint_id": <int>, "path": [<int>, ...]}]}'


@dataclass(frozen=True)
class PlannedPath:
    waypoint_id: int
    point_ids: tuple[int, ...]
    view_dir: ViewDirection

    def __post_init__(self):
        if not self.point_ids:
            raise ValueError("path must be non-empty")
        if self.point_ids[-1] != self.waypoint_id:
            raise ValueError("path must terminate at its waypoint")
        if len(set(self.point_ids)) != len(self.point_ids):
            raise ValueError("path may not repeat candidate ids")


@dataclass(frozen=True)
class CandidateEntry:
    global_id: int
    path: PlannedPath
    pixel_chain: tuple[PixelPoint, ...]
    world_polyline: tuple[WorldPoint, ...]


@dataclass(frozen=True)
class CandidateSet:
    entries: tuple[CandidateEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    def get(self, global_id: int) -> CandidateEntry | None:
        for e in self.entries:
            if e.global_id == global_id:
                return e
        return None

    @property
    def global_ids(self) -> set[int]:
        return {e.global_id for e in self.entries}


@dataclass(frozen=True)
class ScriptedPlannerConfig:
    k_paths: int = 3
    min_sep_deg: float = 25.0
    seg_sample_px: int = 4
    # Samples this close to the start anchor are exempt from the mask check:
    # the ground right at the agent's feet is below the image bottom, so the
    # anchor pixel itself may sit on non-ground even when travel is possible.
    anchor_clear_px: float = 0.0


def load_prompt(name: str) -> str:
    return resources.files("affnav.prompts").joinpath(name).read_text()


def segment_clear(
    mask: np.ndarray,
    p0: tuple[float, float],
    p1: tuple[float, float],
    sample_px: int,
    clear_center: tuple[float, float] | None = None,
    clear_radius_px: float = 0.0,
) -> bool:
    """True iff every sample_px-spaced point on the segment lies in the mask.

    Samples within clear_radius_px of clear_center are exempt from the mask
    test (but not the bounds test).
    """
    h, w = mask.shape
    length = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
    n = max(1, int(math.ceil(length / max(sample_px, 1))))
    for k in range(n + 1):
        t = k / n
        x = p0[0] + (p1[0] - p0[0]) * t
        y = p0[1] + (p1[1] - p0[1]) * t
        u, v = int(round(x)), int(round(y))
        if not (0 <= u < w and 0 <= v < h):
            return False
        if mask[v, u]:
            continue
        if clear_center is not None and math.hypot(
            x - clear_center[0], y - clear_center[1]
        ) <= clear_radius_px:
            continue
        return False
    return True


def _shortest_chain(nodes, edges, start_idx, goal_idx):
    """A* over the candidate graph minimizing pixel path length."""

    def h(i):
        return math.hypot(nodes[goal_idx][0] - nodes[i][0], nodes[goal_idx][1] - nodes[i][1])

    dist = {start_idx: 0.0}
    prev = {}
    heap = [(h(start_idx), 0.0, start_idx)]
    done = set()
    while heap:
        _, d, i = heapq.heappop(heap)
        if i in done:
            continue
        if i == goal_idx:
            chain = [i]
            while chain[-1] != start_idx:
                chain.append(prev[chain[-1]])
            return list(reversed(chain)), d
        done.add(i)
        for j, w in edges.get(i, ()):
            nd = d + w
            if nd < dist.get(j, math.inf) - 1e-12:
                dist[j] = nd
                prev[j] = i
                heapq.heappush(heap, (nd + h(j), nd, j))
    return None, math.inf


def plan_view_scripted(
    candidates,
    mask: np.ndarray,
    view_pose,
    view_dir: ViewDirection,
    goal_hint: WorldPoint | None = None,
    cfg: ScriptedPlannerConfig = ScriptedPlannerConfig(),
) -> list[PlannedPath]:
    """Deterministic per-view planner.

    Builds a visibility graph over the candidates plus a virtual start at the
    view's bottom-center anchor (edges = straight pixel segments fully inside
    the mask), picks up to k_paths waypoints by descending depth (or by
    proximity to goal_hint when given) with pairwise world-bearing separation
    >= min_sep_deg, and returns the minimal-pixel-length chain to each.
    """
    if not candidates:
        return []
    h, w = mask.shape
    anchor = bottom_center_anchor(w, h)
    nodes = [(anchor.u, anchor.v)] + [(c.px.u, c.px.v) for c in candidates]
    n = len(nodes)
    edges: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    anchor_xy = (anchor.u, anchor.v)
    for i in range(n):
        for j in range(i + 1, n):
            clear_center = anchor_xy if (i == 0 and cfg.anchor_clear_px > 0) else None
            if segment_clear(
                mask, nodes[i], nodes[j], cfg.seg_sample_px,
                clear_center=clear_center, clear_radius_px=cfg.anchor_clear_px,
            ):
                d = math.hypot(nodes[i][0] - nodes[j][0], nodes[i][1] - nodes[j][1])
                edges[i].append((j, d))
                edges[j].append((i, d))

    def bearing(c):
        return math.atan2(c.world.y - view_pose.y, c.world.x - view_pose.x)

    if goal_hint is not None:
        order = sorted(
            candidates, key=lambda c: (math.hypot(c.world.x - goal_hint.x, c.world.y - goal_hint.y), c.id)
        )
    else:
        order = sorted(candidates, key=lambda c: (-c.depth, c.id))
    min_sep = math.radians(cfg.min_sep_deg)
    chosen: list[tuple[PlannedPath, float]] = []
    for cand in order:
        if len(chosen) >= cfg.k_paths:
            break
        b = bearing(cand)
        if any(abs(_angdiff(b, cb)) < min_sep for _, cb in chosen):
            continue
        node_idx = candidates.index(cand) + 1
        chain, _ = _shortest_chain(nodes, edges, 0, node_idx)
        if chain is None:
            continue  # unreachable waypoint
        ids = tuple(candidates[i - 1].id for i in chain[1:])
        chosen.append((PlannedPath(cand.id, ids, view_dir), b))
    return [p for p, _ in chosen]


def _angdiff(a: float, b: float) -> float:
    return math.remainder(a - b, math.tau)


def parse_plan_response(text: str, valid_ids: set[int]) -> list[PlannedPath]:
    """Parse the planner reply schema, dropping invalid entries with a diagnostic.

    Raises ValueError when no JSON object can be found at all.
    """
    obj = extract_json_object(text)
    out: list[PlannedPath] = []
    entries = obj.get("waypoints", [])
    if not isinstance(entries, list):
        raise ValueError("'waypoints' must be a list")
    for k, entry in enumerate(entries):
        try:
            wid = int(entry["waypoint_id"])
            path = [int(p) for p in entry["path"]]
        except (KeyError, TypeError, ValueError) as exc:
            log.warning("plan entry %d malformed: %s", k, exc)
            continue
        if not path:
            log.warning("plan entry %d has an empty path", k)
            continue
        if path[-1] != wid:
            log.warning("plan entry %d does not terminate at its waypoint", k)
            continue
        if any(p not in valid_ids for p in path):
            log.warning("plan entry %d references unknown candidate ids", k)
            continue
        if len(set(path)) != len(path):
            log.warning("plan entry %d repeats candidate ids", k)
            continue
        out.append(PlannedPath(wid, tuple(path), ViewDirection.FRONT))
    return out


def serialize_plans(paths: list[PlannedPath]) -> str:
    return json.dumps(
        {"waypoints": [{"waypoint_id": p.waypoint_id, "path": list(p.point_ids)} for p in paths]}
    )


def plan_view_llm(
    client: ChatClient,
    template: str,
    instruction: str | None,
    annotated: AnnotatedImage,
    view_dir: ViewDirection,
    valid_ids: set[int],
) -> list[PlannedPath]:
    """Query the endpoint with the rendered prompt plus the annotated view.

    Instruction inclusion is toggleable (pass None to ablate). An unparseable
    reply gets one reprompt carrying the parse error; a second failure
    degrades to an empty plan.
    """
    prompt = template.format(
        instruction=instruction if instruction is not None else "(not provided)",
        view_direction=view_dir.value,
        output_schema=PLAN_OUTPUT_SCHEMA,
    )
    parts = [text_part(prompt), image_part(annotated.image)]
    reply = client.complete(parts)
    for attempt in range(2):
        try:
            plans = parse_plan_response(reply, valid_ids)
            return [PlannedPath(p.waypoint_id, p.point_ids, view_dir) for p in plans]
        except ValueError as exc:
            if attempt == 0:
                retry = parts + [
                    text_part(
                        f"Your previous reply could not be parsed ({exc}). "
                        f"Reply with exactly one JSON object: {PLAN_OUTPUT_SCHEMA}"
                    )
                ]
                reply = client.complete(retry)
            else:
                log.warning("view %s: unparseable plan reply, degrading to empty", view_dir.value)
    return []


def merge(per_view_paths: dict, per_view_candidates: dict) -> CandidateSet:
    """Concatenate per-view plans (front, left, back, right) with global ids 1..M.

    World polylines come from the candidates' unprojected world points; a path
    referencing an id absent from its view's candidates is an error.
    """
    entries = []
    gid = 0
    for d in VIEW_ORDER:
        cands = {c.id: c for c in per_view_candidates.get(d, [])}
        for path in per_view_paths.get(d, []):
            if path.view_dir != d:
                raise ValueError(f"path for view {path.view_dir} listed under {d}")
            chain = []
            polyline = []
            for pid in path.point_ids:
                if pid not in cands:
                    raise ValueError(f"path references unknown candidate id {pid} in view {d.value}")
                chain.append(cands[pid].px)
                polyline.append(cands[pid].world)
            gid += 1
            entries.append(CandidateEntry(gid, path, tuple(chain), tuple(polyline)))
    return CandidateSet(tuple(entries))
