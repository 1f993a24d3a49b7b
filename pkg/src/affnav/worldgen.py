"""Seeded generation of multi-room scenes and navigation episodes.

Rooms come from recursive splits with doorway gaps; box obstacles are
sprinkled by density. Episodes pick start/goal pairs with a geodesic
separation inside a requested band, so every generated episode is solvable
by construction.
"""

from __future__ import annotations

import math

import numpy as np

from . import scene as scene_mod
from .geometry import Pose2D, WorldPoint
from .runner import Episode

DOOR_CELLS = 7  # 0.7 m doorways at the default cell size: eroded space stays open
MIN_ROOM_CELLS = 16


def generate_scene(
    seed: int,
    rooms: int = 4,
    size_m: float = 10.0,
    obstacle_density: float = 0.01,
    cell_size: float = 0.10,
    wall_height: float = 2.0,
    scene_id: str | None = None,
) -> scene_mod.SceneSpec:
    rng = np.random.default_rng(seed)
    n = int(round(size_m / cell_size))
    grid = np.zeros((n, n), dtype=np.uint8)
    grid[0, :] = grid[-1, :] = grid[:, 0] = grid[:, -1] = 1

    # Recursive splits: regions are (y0, y1, x0, x1) interiors (exclusive of walls).
    regions = [(1, n - 1, 1, n - 1)]
    while len(regions) < rooms:
        regions.sort(key=lambda r: (r[1] - r[0]) * (r[3] - r[2]), reverse=True)
        y0, y1, x0, x1 = regions.pop(0)
        h, w = y1 - y0, x1 - x0
        can_h = h >= 2 * MIN_ROOM_CELLS + 1
        can_v = w >= 2 * MIN_ROOM_CELLS + 1
        if not (can_h or can_v):
            regions.append((y0, y1, x0, x1))
            break
        horizontal = can_h and (not can_v or rng.random() < h / (h + w))
        if horizontal:
            wy = int(rng.integers(y0 + MIN_ROOM_CELLS, y1 - MIN_ROOM_CELLS))
            grid[wy, x0:x1] = 1
            door = int(rng.integers(x0, x1 - DOOR_CELLS + 1))
            grid[wy, door : door + DOOR_CELLS] = 0
            regions += [(y0, wy, x0, x1), (wy + 1, y1, x0, x1)]
        else:
            wx = int(rng.integers(x0 + MIN_ROOM_CELLS, x1 - MIN_ROOM_CELLS))
            grid[y0:y1, wx] = 1
            door = int(rng.integers(y0, y1 - DOOR_CELLS + 1))
            grid[door : door + DOOR_CELLS, wx] = 0
            regions += [(y0, y1, x0, wx), (y0, y1, wx + 1, x1)]

    # Obstacles keep a 3-cell free margin from walls, doorways, and each
    # other: passages stay at least 0.3 m wide, so erosion by the agent
    # radius can never seal off part of the map.
    margin = 3
    n_obstacles = int(obstacle_density * n * n)
    for _ in range(n_obstacles):
        oy = int(rng.integers(margin + 1, n - margin - 4))
        ox = int(rng.integers(margin + 1, n - margin - 4))
        sy = int(rng.integers(1, 4))
        sx = int(rng.integers(1, 4))
        patch = grid[oy - margin : oy + sy + margin, ox - margin : ox + sx + margin]
        if patch.any():
            continue
        grid[oy : oy + sy, ox : ox + sx] = 1

    return scene_mod.SceneSpec(
        id=scene_id or f"scene-{seed}",
        grid=grid,
        cell_size=cell_size,
        wall_height=wall_height,
    )


_BEARING_WORDS = [
    (22.5, "straight ahead"), (67.5, "ahead and to the left"), (112.5, "to your left"),
    (157.5, "behind you on the left"), (180.0, "behind you"),
]


def _describe(start: Pose2D, goal: WorldPoint, dist: float) -> str:
    rel = math.degrees(
        scene_mod.normalize_angle(math.atan2(goal.y - start.y, goal.x - start.x) - start.heading)
    )
    for limit, word in _BEARING_WORDS:
        if abs(rel) <= limit:
            side = word
            break
    else:
        side = "behind you"
    if "left" in side and rel < 0:
        side = side.replace("left", "right")
    return f"Walk about {dist:.0f} meters to the open area {side} and stop there."


def generate_episodes(
    scene: scene_mod.SceneSpec,
    n_episodes: int,
    seed: int,
    body: scene_mod.AgentBody = scene_mod.AgentBody(),
    min_geodesic_m: float = 4.0,
    max_geodesic_m: float = 10.0,
    max_tries: int = 200,
) -> list[Episode]:
    rng = np.random.default_rng(seed)
    free = scene_mod.eroded_free(scene, body.radius)
    # starts and goals keep extra clearance so the first observation sees
    # connectable ground and stopping near the goal is unambiguous
    roomy = scene_mod.eroded_free(scene, max(3 * body.radius, 0.3))
    cells = np.argwhere(roomy)
    if len(cells) == 0:
        raise ValueError(f"scene {scene.id} has no navigable cells")
    episodes: list[Episode] = []
    tries = 0
    while len(episodes) < n_episodes and tries < max_tries * n_episodes:
        tries += 1
        gy, gx = cells[int(rng.integers(len(cells)))]
        sx, sy = (float(c) for c in scene.cell_center(gy, gx))
        field = scene_mod.geodesic_field(scene, (sx, sy), body)
        band = roomy & (field >= min_geodesic_m) & (field <= max_geodesic_m)
        goals = np.argwhere(band)
        if len(goals) == 0:
            continue
        ggy, ggx = goals[int(rng.integers(len(goals)))]
        gxw, gyw = (float(c) for c in scene.cell_center(ggy, ggx))
        heading = float(rng.uniform(-math.pi, math.pi))
        start = Pose2D(sx, sy, heading)
        goal = WorldPoint(gxw, gyw, 0.0)
        dist = float(field[ggy, ggx])
        episodes.append(
            Episode(
                id=f"{scene.id}-ep{len(episodes)}",
                scene_id=scene.id,
                start=start,
                goal=goal,
                instruction=_describe(start, goal, dist),
                gt_shortest=dist,
            )
        )
    if len(episodes) < n_episodes:
        raise ValueError(
            f"could only generate {len(episodes)}/{n_episodes} episodes for scene {scene.id}"
        )
    return episodes
