"""Synthetic 2.5D continuous environment.

Occupancy-grid world with raycast RGB/depth rendering, oracle ground masks,
geodesic distance fields, and discrete agent motion with sliding collision
response. Stands in for a full 3D simulator at desk scale.

Grid convention: `grid[gy, gx]` with world x = gx * cell_size, y = gy * cell_size;
cell value 1 = wall, 0 = free. Walls are solid boxes from z = 0 to wall_height.
Depth images hold planar z-depth, +inf for sky.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _sp_dijkstra

from .geometry import CameraIntrinsics, Pose2D, WorldPoint, normalize_angle

FORWARD_STEP_M = 0.25
ROTATE_STEP_RAD = math.radians(15.0)

DEFAULT_PALETTE = {
    "floor": (128, 128, 128),
    "wall": (178, 60, 48),
    "sky": (135, 206, 235),
}

UNREACHABLE = math.inf


class OutOfBoundsError(ValueError):
    """Camera or query pose lies outside the scene grid."""


class SnapError(ValueError):
    """No navigable cell within snapping range of a geodesic endpoint."""


@dataclass(frozen=True)
class AgentBody:
    radius: float = 0.10
    sliding: bool = True

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be >= 0")


@dataclass
class SceneSpec:
    id: str
    grid: np.ndarray  # (ny, nx) uint8, 1 = wall
    cell_size: float = 0.10
    wall_height: float = 2.0
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.grid = np.ascontiguousarray(np.asarray(self.grid, dtype=np.uint8))
        if self.grid.ndim != 2:
            raise ValueError("grid must be 2D")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")

    @property
    def extent(self) -> tuple[float, float]:
        """World-space (width, height) in meters."""
        ny, nx = self.grid.shape
        return nx * self.cell_size, ny * self.cell_size

    def contains(self, x: float, y: float) -> bool:
        w, h = self.extent
        return 0 <= x < w and 0 <= y < h

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """(gy, gx) cell indices of a world point."""
        return int(math.floor(y / self.cell_size)), int(math.floor(x / self.cell_size))

    def cell_center(self, gy: int, gx: int) -> tuple[float, float]:
        return ((gx + 0.5) * self.cell_size, (gy + 0.5) * self.cell_size)

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_strings(cls, rows: list[str], **kwargs) -> "SceneSpec":
        grid = np.array([[1 if ch == "#" else 0 for ch in row] for row in rows], dtype=np.uint8)
        return cls(grid=grid, **kwargs)

    def to_json_dict(self) -> dict:
        rows = ["".join("#" if v else "." for v in row) for row in self.grid]
        return {
            "id": self.id,
            "cell_size": self.cell_size,
            "wall_height": self.wall_height,
            "palette": {k: list(v) for k, v in self.palette.items()},
            "grid": rows,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SceneSpec":
        d = json.loads(Path(path).read_text())
        return cls.from_strings(
            d["grid"],
            id=d["id"],
            cell_size=d["cell_size"],
            wall_height=d["wall_height"],
            palette={k: tuple(v) for k, v in d.get("palette", DEFAULT_PALETTE).items()},
        )


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

KIND_SKY = 0
KIND_FLOOR = 1
KIND_WALL = 2


@njit(cache=True)
def _raycast_kernel(grid, cell, wall_h, px, py, cam_h, dirx, diry, b, depth, kind):
    ny, nx = grid.shape
    nrow = b.shape[0]
    ncol = dirx.shape[0]
    for i in range(nrow):
        bb = b[i]
        t_floor = cam_h / bb if bb > 0.0 else np.inf
        for j in range(ncol):
            dx = dirx[j]
            dy = diry[j]
            ix = int(math.floor(px / cell))
            iy = int(math.floor(py / cell))
            if dx > 0.0:
                stepx = 1
                tmaxx = ((ix + 1) * cell - px) / dx
                tdx = cell / dx
            elif dx < 0.0:
                stepx = -1
                tmaxx = (ix * cell - px) / dx
                tdx = -cell / dx
            else:
                stepx = 0
                tmaxx = np.inf
                tdx = np.inf
            if dy > 0.0:
                stepy = 1
                tmaxy = ((iy + 1) * cell - py) / dy
                tdy = cell / dy
            elif dy < 0.0:
                stepy = -1
                tmaxy = (iy * cell - py) / dy
                tdy = -cell / dy
            else:
                stepy = 0
                tmaxy = np.inf
                tdy = np.inf

            t_enter = 0.0
            out_d = np.inf
            out_k = KIND_SKY
            while True:
                t_exit = tmaxx if tmaxx < tmaxy else tmaxy
                if 0 <= ix < nx and 0 <= iy < ny and grid[iy, ix] == 1:
                    t_hit = -1.0
                    if bb > 0.0:
                        z0 = cam_h - bb * t_enter
                        if z0 <= wall_h:
                            t_hit = t_enter
                        else:
                            t_top = (cam_h - wall_h) / bb
                            if t_top <= t_exit:
                                t_hit = t_top
                    else:
                        z0 = cam_h - bb * t_enter
                        if z0 <= wall_h:
                            t_hit = t_enter
                    if t_hit >= 0.0:
                        if t_hit < t_floor:
                            out_d = t_hit
                            out_k = KIND_WALL
                        else:
                            out_d = t_floor
                            out_k = KIND_FLOOR
                        break
                if t_exit >= t_floor:
                    out_d = t_floor
                    out_k = KIND_FLOOR
                    break
                if tmaxx < tmaxy:
                    ix += stepx
                    t_enter = tmaxx
                    tmaxx += tdx
                else:
                    iy += stepy
                    t_enter = tmaxy
                    tmaxy += tdy
                if (
                    (ix < 0 and stepx <= 0)
                    or (ix >= nx and stepx >= 0)
                    or (iy < 0 and stepy <= 0)
                    or (iy >= ny and stepy >= 0)
                ):
                    if bb > 0.0:
                        out_d = t_floor
                        out_k = KIND_FLOOR
                    break
            depth[i, j] = out_d
            kind[i, j] = out_k


def raycast(
    scene: SceneSpec, cam_pose: Pose2D, intr: CameraIntrinsics, cam_height: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel planar depth and hit kind (sky/floor/wall) for one view."""
    if not scene.contains(cam_pose.x, cam_pose.y):
        raise OutOfBoundsError(f"camera pose ({cam_pose.x}, {cam_pose.y}) outside scene {scene.id}")
    c, s = math.cos(cam_pose.heading), math.sin(cam_pose.heading)
    cols = np.arange(intr.width, dtype=np.float64)
    rows = np.arange(intr.height, dtype=np.float64)
    a = (cols - intr.cx) / intr.fx
    b = (rows - intr.cy) / intr.fy
    dirx = c + a * s
    diry = s + a * (-c)
    depth = np.empty((intr.height, intr.width), dtype=np.float64)
    kind = np.empty((intr.height, intr.width), dtype=np.uint8)
    _raycast_kernel(
        scene.grid, scene.cell_size, scene.wall_height,
        cam_pose.x, cam_pose.y, cam_height, dirx, diry, b, depth, kind,
    )
    return depth, kind


def shade_rgb(scene: SceneSpec, depth: np.ndarray, kind: np.ndarray) -> np.ndarray:
    """Flat class colors with distance-attenuated shading; sky is unshaded."""
    pal = scene.palette
    colors = np.array([pal["sky"], pal["floor"], pal["wall"]], dtype=np.float64)
    rgb = colors[kind]
    finite = np.isfinite(depth)
    shade = np.ones_like(depth)
    shade[finite] = 0.35 + 0.65 * np.exp(-depth[finite] / 8.0)
    rgb *= shade[..., None]
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def render(
    scene: SceneSpec, cam_pose: Pose2D, intr: CameraIntrinsics, cam_height: float
) -> tuple[np.ndarray, np.ndarray]:
    """Render one view; returns (rgb uint8 HxWx3, planar depth float64 HxW)."""
    depth, kind = raycast(scene, cam_pose, intr, cam_height)
    return shade_rgb(scene, depth, kind), depth


# ---------------------------------------------------------------------------
# Navigable space
# ---------------------------------------------------------------------------

def eroded_free(scene: SceneSpec, radius: float) -> np.ndarray:
    """Boolean grid of cells whose center keeps >= radius clearance from walls.

    Exact for axis-aligned square wall cells: a cell survives iff the distance
    from its center to every wall-cell square is >= radius.
    """
    key = ("eroded", round(radius, 9))
    if key in scene._cache:
        return scene._cache[key]
    c = scene.cell_size
    reach = int(math.ceil(radius / c)) + 1
    offs = np.arange(-reach, reach + 1)
    dx = np.maximum(np.abs(offs)[None, :] * c - c / 2.0, 0.0)
    dy = np.maximum(np.abs(offs)[:, None] * c - c / 2.0, 0.0)
    selem = np.hypot(dx, dy) < radius
    wall = scene.grid == 1
    blocked = ndimage.binary_dilation(wall, structure=selem)
    out = ~blocked
    scene._cache[key] = out
    return out


def ground_mask(
    scene: SceneSpec,
    cam_pose: Pose2D,
    intr: CameraIntrinsics,
    cam_height: float,
    body: AgentBody,
    depth: np.ndarray | None = None,
    kind: np.ndarray | None = None,
) -> np.ndarray:
    """Oracle navigable-ground mask: floor hits landing on eroded-free cells.

    Pass precomputed (depth, kind) from raycast to avoid rendering twice.
    """
    if depth is None or kind is None:
        depth, kind = raycast(scene, cam_pose, intr, cam_height)
    free = eroded_free(scene, body.radius)
    ny, nx = scene.grid.shape
    mask = np.zeros(depth.shape, dtype=bool)
    floor = kind == KIND_FLOOR
    if not floor.any():
        return mask
    vs, us = np.nonzero(floor)
    from .geometry import unproject_grid

    pts = unproject_grid(intr, cam_pose, cam_height, us.astype(float), vs.astype(float), depth[floor])
    gx = np.floor(pts[:, 0] / scene.cell_size).astype(int)
    gy = np.floor(pts[:, 1] / scene.cell_size).astype(int)
    inb = (gx >= 0) & (gx < nx) & (gy >= 0) & (gy < ny)
    ok = np.zeros(len(us), dtype=bool)
    ok[inb] = free[gy[inb], gx[inb]]
    mask[vs[ok], us[ok]] = True
    return mask


# ---------------------------------------------------------------------------
# Geodesic distances
# ---------------------------------------------------------------------------

def _nav_graph(scene: SceneSpec, radius: float):
    """Sparse 8-connected graph over eroded-free cells (no corner cutting)."""
    key = ("graph", round(radius, 9))
    if key in scene._cache:
        return scene._cache[key]
    free = eroded_free(scene, radius)
    ny, nx = free.shape
    node = -np.ones((ny, nx), dtype=np.int64)
    node[free] = np.arange(int(free.sum()))
    c = scene.cell_size
    rows, cols, wts = [], [], []

    def add(mask_a, mask_b, w):
        a = node[mask_a]
        bnode = node[mask_b]
        rows.append(a)
        cols.append(bnode)
        wts.append(np.full(len(a), w))

    # horizontal / vertical
    m = free[:, :-1] & free[:, 1:]
    add(np.pad(m, ((0, 0), (0, 1))), np.pad(m, ((0, 0), (1, 0))), c)
    m = free[:-1, :] & free[1:, :]
    add(np.pad(m, ((0, 1), (0, 0))), np.pad(m, ((1, 0), (0, 0))), c)
    # diagonals, requiring both orthogonal neighbors free
    m = free[:-1, :-1] & free[1:, 1:] & free[:-1, 1:] & free[1:, :-1]
    add(np.pad(m, ((0, 1), (0, 1))), np.pad(m, ((1, 0), (1, 0))), c * math.sqrt(2))
    m = free[:-1, 1:] & free[1:, :-1] & free[:-1, :-1] & free[1:, 1:]
    add(np.pad(m, ((0, 1), (1, 0))), np.pad(m, ((1, 0), (0, 1))), c * math.sqrt(2))

    n = int(free.sum())
    if rows:
        r = np.concatenate(rows)
        cc = np.concatenate(cols)
        w = np.concatenate(wts)
        graph = coo_matrix((w, (r, cc)), shape=(n, n)).tocsr()
    else:
        graph = coo_matrix((n, n)).tocsr()
    out = (free, node, graph)
    scene._cache[key] = out
    return out


def snap_to_free(scene: SceneSpec, x: float, y: float, radius: float, max_snap: float = 0.5):
    """Nearest eroded-free cell (gy, gx) within max_snap meters of (x, y)."""
    free, _, _ = _nav_graph(scene, radius)
    ny, nx = free.shape
    c = scene.cell_size
    reach = int(math.ceil(max_snap / c)) + 1
    gy0, gx0 = scene.cell_of(x, y)
    best = None
    best_d = max_snap + 1e-12
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            gy, gx = gy0 + dy, gx0 + dx
            if not (0 <= gy < ny and 0 <= gx < nx) or not free[gy, gx]:
                continue
            cx, cy = scene.cell_center(gy, gx)
            d = math.hypot(cx - x, cy - y)
            if d < best_d:
                best_d = d
                best = (gy, gx)
    if best is None:
        raise SnapError(f"no navigable cell within {max_snap} m of ({x:.2f}, {y:.2f})")
    return best


def geodesic_field(scene: SceneSpec, source_xy: tuple[float, float], body: AgentBody) -> np.ndarray:
    """Grid of geodesic distances (meters) from every cell to source; inf = unreachable."""
    src = snap_to_free(scene, source_xy[0], source_xy[1], body.radius)
    key = ("field", round(body.radius, 9), src)
    if key in scene._cache:
        return scene._cache[key]
    free, node, graph = _nav_graph(scene, body.radius)
    dist = _sp_dijkstra(graph, directed=False, indices=node[src])
    field = np.full(free.shape, np.inf)
    field[free] = dist
    scene._cache[key] = field
    return field


def geodesic_distance(
    scene: SceneSpec, a: WorldPoint | tuple, b: WorldPoint | tuple, body: AgentBody
) -> float:
    """Shortest obstacle-respecting distance between two floor points.

    Returns UNREACHABLE (inf) when the points lie in disconnected components.
    """
    ax, ay = (a.x, a.y) if isinstance(a, WorldPoint) else (a[0], a[1])
    bx, by = (b.x, b.y) if isinstance(b, WorldPoint) else (b[0], b[1])
    if not (scene.contains(ax, ay) and scene.contains(bx, by)):
        raise OutOfBoundsError("geodesic endpoints must lie inside the scene")
    field = geodesic_field(scene, (bx, by), body)
    gy, gx = snap_to_free(scene, ax, ay, body.radius)
    return float(field[gy, gx])


# ---------------------------------------------------------------------------
# Agent motion
# ---------------------------------------------------------------------------

_SKIN = 1e-7  # contact back-off so sliding never re-detects the same surface


def _first_hit(scene: SceneSpec, px: float, py: float, ux: float, uy: float, length: float, r: float):
    """Earliest time of impact of a moving disk against wall cells.

    Returns (t, normal) for the first contact within `length`, or None. The
    Minkowski sum of each wall square with the disk is a rounded rectangle:
    hits are tested against the two expanded faces plus the corner circles.
    """
    c = scene.cell_size
    ny, nx = scene.grid.shape
    x_lo = min(px, px + ux * length) - r - c
    x_hi = max(px, px + ux * length) + r + c
    y_lo = min(py, py + uy * length) - r - c
    y_hi = max(py, py + uy * length) + r + c
    i0 = max(0, int(math.floor(x_lo / c)))
    i1 = min(nx - 1, int(math.floor(x_hi / c)))
    j0 = max(0, int(math.floor(y_lo / c)))
    j1 = min(ny - 1, int(math.floor(y_hi / c)))
    best_t = None
    best_n = (0.0, 0.0)
    for gy in range(j0, j1 + 1):
        for gx in range(i0, i1 + 1):
            if scene.grid[gy, gx] != 1:
                continue
            x0, x1 = gx * c, (gx + 1) * c
            y0, y1 = gy * c, (gy + 1) * c
            # expanded x-faces
            if ux > 0:
                t = (x0 - r - px) / ux
                if 0 <= t <= length and y0 <= py + t * uy <= y1:
                    if best_t is None or t < best_t:
                        best_t, best_n = t, (-1.0, 0.0)
            elif ux < 0:
                t = (x1 + r - px) / ux
                if 0 <= t <= length and y0 <= py + t * uy <= y1:
                    if best_t is None or t < best_t:
                        best_t, best_n = t, (1.0, 0.0)
            # expanded y-faces
            if uy > 0:
                t = (y0 - r - py) / uy
                if 0 <= t <= length and x0 <= px + t * ux <= x1:
                    if best_t is None or t < best_t:
                        best_t, best_n = t, (0.0, -1.0)
            elif uy < 0:
                t = (y1 + r - py) / uy
                if 0 <= t <= length and x0 <= px + t * ux <= x1:
                    if best_t is None or t < best_t:
                        best_t, best_n = t, (0.0, 1.0)
            # corner circles
            for cx_ in (x0, x1):
                for cy_ in (y0, y1):
                    ox, oy = px - cx_, py - cy_
                    b = ox * ux + oy * uy
                    disc = b * b - (ox * ox + oy * oy - r * r)
                    if disc < 0:
                        continue
                    t = -b - math.sqrt(disc)
                    if t < 0 or t > length:
                        continue
                    hx, hy = px + t * ux - cx_, py + t * uy - cy_
                    norm = math.hypot(hx, hy)
                    if norm == 0:
                        continue
                    nxn, nyn = hx / norm, hy / norm
                    if ux * nxn + uy * nyn >= -1e-9:
                        continue  # grazing or separating
                    if best_t is None or t < best_t:
                        best_t, best_n = t, (nxn, nyn)
    return (best_t, best_n) if best_t is not None else None


def move_disk(
    scene: SceneSpec, x: float, y: float, dx: float, dy: float, body: AgentBody
) -> tuple[float, float, bool]:
    """Move the agent disk by (dx, dy) with sliding collision response.

    On contact, the motion component along the contact normal (a wall face
    or, at cell corners, the radial corner normal) is cancelled and the
    tangential remainder applied. With sliding disabled, motion stops at the
    first contact.
    """
    collided = False
    for _ in range(3):
        length = math.hypot(dx, dy)
        if length < 1e-12:
            break
        ux, uy = dx / length, dy / length
        hit = _first_hit(scene, x, y, ux, uy, length, body.radius)
        if hit is None:
            x, y = x + dx, y + dy
            break
        t, (nx_, ny_) = hit
        collided = True
        t_adj = max(t - _SKIN, 0.0)
        x, y = x + ux * t_adj, y + uy * t_adj
        if not body.sliding:
            break
        rx, ry = ux * (length - t_adj), uy * (length - t_adj)
        dot = rx * nx_ + ry * ny_
        dx, dy = rx - dot * nx_, ry - dot * ny_
    return x, y, collided


def step(
    scene: SceneSpec, pose: Pose2D, action: str, body: AgentBody
) -> tuple[Pose2D, bool]:
    """Apply one discrete action. Actions: 'forward', 'rotate_left', 'rotate_right'.

    Forward attempts FORWARD_STEP_M along the heading; rotations are exact
    15-degree increments and never collide.
    """
    if action == "rotate_left":
        return Pose2D(pose.x, pose.y, normalize_angle(pose.heading + ROTATE_STEP_RAD)), False
    if action == "rotate_right":
        return Pose2D(pose.x, pose.y, normalize_angle(pose.heading - ROTATE_STEP_RAD)), False
    if action != "forward":
        raise ValueError(f"unknown action {action!r}")
    dx = FORWARD_STEP_M * math.cos(pose.heading)
    dy = FORWARD_STEP_M * math.sin(pose.heading)
    x, y, collided = move_disk(scene, pose.x, pose.y, dx, dy, body)
    return Pose2D(x, y, pose.heading), collided
