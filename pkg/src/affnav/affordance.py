"""Navigational affordances: mask merging, candidate-point sampling, providers.

An affordance mask is a boolean HxW array where True marks visible navigable
ground. Candidate points are scattered uniformly inside the mask, labeled
1..n in row-major order, and lifted to world coordinates via unprojection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from . import scene as scene_mod
from .geometry import CameraIntrinsics, PixelPoint, Pose2D, ViewDirection, WorldPoint, unproject


@dataclass(frozen=True)
class CandidatePoint:
    id: int  # 1-based label, unique within a view
    px: PixelPoint
    world: WorldPoint
    view_dir: ViewDirection
    depth: float


@dataclass(frozen=True)
class SamplerConfig:
    stride_px: int = 56
    margin_px: int = 24
    max_points: int = 30
    min_clearance_px: int = 6
    max_range_m: float = 8.0


def merge_masks(masks: list[np.ndarray], shape: tuple[int, int] | None = None) -> np.ndarray:
    """Pixel-wise union of affordance masks.

    An empty list yields an all-zero mask of `shape` (which must then be
    given). Raises ValueError on dimension mismatch.
    """
    if not masks:
        if shape is None:
            raise ValueError("shape is required to merge an empty mask list")
        return np.zeros(shape, dtype=bool)
    out = np.asarray(masks[0], dtype=bool).copy()
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"mask dimension mismatch: {out.shape} vs {tuple(shape)}")
    for m in masks[1:]:
        m = np.asarray(m, dtype=bool)
        if m.shape != out.shape:
            raise ValueError(f"mask dimension mismatch: {m.shape} vs {out.shape}")
        out |= m
    return out


def _disk_footprint(r: int) -> np.ndarray:
    if r <= 0:
        return np.ones((1, 1), dtype=bool)
    ys, xs = np.mgrid[-r : r + 1, -r : r + 1]
    return ys * ys + xs * xs <= r * r


def sample_candidates(
    mask: np.ndarray,
    depth: np.ndarray,
    intr: CameraIntrinsics,
    cam_pose: Pose2D,
    cam_height: float,
    view_dir: ViewDirection,
    cfg: SamplerConfig = SamplerConfig(),
) -> list[CandidatePoint]:
    """Uniform grid of labeled candidate points inside the affordance mask.

    A grid pixel survives iff a disk of min_clearance_px around it lies fully
    inside the mask and its depth is finite and within max_range_m. If more
    than max_points survive, the stride is grown 1.5x and sampling repeats.
    Survivors are labeled 1..n in row-major order.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != depth.shape:
        raise ValueError("mask and depth dimensions differ")
    h, w = mask.shape
    if not mask.any():
        return []
    if cfg.min_clearance_px > 0:
        safe = ndimage.binary_erosion(
            mask, structure=_disk_footprint(cfg.min_clearance_px), border_value=0
        )
    else:
        safe = mask
    stride = float(cfg.stride_px)
    while True:
        us = np.arange(cfg.margin_px, w, stride)
        vs = np.arange(cfg.margin_px, h, stride)
        ui = np.rint(us).astype(int)
        vi = np.rint(vs).astype(int)
        picks = []
        for v in vi:
            for u in ui:
                if v >= h or u >= w:
                    continue
                if not safe[v, u]:
                    continue
                d = depth[v, u]
                if not np.isfinite(d) or d > cfg.max_range_m or d <= 0:
                    continue
                picks.append((u, v, float(d)))
        if len(picks) <= cfg.max_points:
            break
        stride *= 1.5
    out = []
    for label, (u, v, d) in enumerate(picks, start=1):
        world = unproject(intr, cam_pose, cam_height, PixelPoint(float(u), float(v)), d)
        out.append(CandidatePoint(label, PixelPoint(float(u), float(v)), world, view_dir, d))
    return out


class OracleAffordanceProvider:
    """Ground-truth masks straight from the simulator's geometry."""

    source = "oracle"

    def __init__(self, scene: scene_mod.SceneSpec, body: scene_mod.AgentBody):
        self.scene = scene
        self.body = body

    def mask(self, episode_id, step_idx, view_dir, cam_pose, intr, cam_height, depth, kind):
        return scene_mod.ground_mask(
            self.scene, cam_pose, intr, cam_height, self.body, depth=depth, kind=kind
        )


class FileAffordanceProvider:
    """Masks produced out-of-process (e.g. by a segmentation bridge).

    Reads `<episode>_<step>_<dir>.mask.png` (8-bit gray, 255 = ground) from a
    directory. Pixels whose depth is non-finite are cleared: external
    segmenters know nothing about depth validity.
    """

    source = "file"

    def __init__(self, mask_dir: str | Path):
        self.mask_dir = Path(mask_dir)

    def mask_path(self, episode_id: str, step_idx: int, view_dir: ViewDirection) -> Path:
        return self.mask_dir / f"{episode_id}_{step_idx}_{view_dir.value}.mask.png"

    def mask(self, episode_id, step_idx, view_dir, cam_pose, intr, cam_height, depth, kind):
        path = self.mask_path(episode_id, step_idx, view_dir)
        if not path.exists():
            return np.zeros(depth.shape, dtype=bool)
        img = np.asarray(Image.open(path).convert("L"))
        if img.shape != depth.shape:
            raise ValueError(f"mask {path} has shape {img.shape}, expected {depth.shape}")
        mask = img >= 128
        mask &= np.isfinite(depth)
        return mask


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a mask in the exchange format: 8-bit gray, 255 = ground."""
    img = Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), "L")
    img.save(path)


def load_mask_png(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) >= 128
