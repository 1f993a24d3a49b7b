"""Batch segmentation: RGB view PNGs -> ground-affordance mask PNGs.

Backends produce k proposal masks per image for a text prompt; the bridge
unions them and writes `<name>.mask.png` (8-bit gray, 255 = ground) next to a
JSON manifest recording per-image status. The `threshold-stub` backend is a
deterministic color-range detector for CI and pipeline tests; the `model`
backend is the integration point for a text-prompted open-set segmentation
model and is config-gated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

BACKENDS = ("threshold-stub", "model")


@dataclass(frozen=True)
class StubConfig:
    """Color-range rule for the deterministic stub backend.

    A pixel is ground iff every channel lies in [channel_lo, channel_hi] and
    the channel spread (max - min) stays within max_spread. The defaults
    select a shaded neutral-gray floor while rejecting strongly tinted walls
    and sky.
    """

    channel_lo: int = 30
    channel_hi: int = 160
    max_spread: int = 24


@dataclass(frozen=True)
class BridgeJob:
    input_dir: str | Path
    output_dir: str | Path
    prompt: str = "Ground"
    backend: str = "threshold-stub"
    # detector box-confidence threshold, forwarded to the model backend; the
    # stub ignores it (no principled default exists, so it is explicit config)
    box_threshold: float = 0.3
    stub: StubConfig = field(default_factory=StubConfig)

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")


@dataclass(frozen=True)
class ImageStatus:
    name: str
    status: str  # "ok" | "error"
    mask: str | None = None
    ground_fraction: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class Manifest:
    prompt: str
    backend: str
    images: tuple[ImageStatus, ...]

    @property
    def ok(self) -> int:
        return sum(1 for i in self.images if i.status == "ok")

    @property
    def failed(self) -> int:
        return sum(1 for i in self.images if i.status == "error")

    def to_json(self) -> str:
        return json.dumps(
            {
                "prompt": self.prompt,
                "backend": self.backend,
                "images": [
                    {k: v for k, v in vars(i).items() if v is not None} for i in self.images
                ],
            },
            indent=2,
            sort_keys=True,
        )


def _stub_proposals(rgb: np.ndarray, cfg: StubConfig) -> list[np.ndarray]:
    """Color-range detection split into connected components.

    Each component plays the role of one detector-box proposal, so the union
    step downstream is exercised exactly as with a real detector.
    """
    channels = rgb.astype(np.int16)
    lo = channels.min(axis=2)
    hi = channels.max(axis=2)
    hit = (lo >= cfg.channel_lo) & (hi <= cfg.channel_hi) & (hi - lo <= cfg.max_spread)
    labels, n = ndimage.label(hit)
    return [labels == k for k in range(1, n + 1)]


def _model_proposals(rgb: np.ndarray, prompt: str, box_threshold: float) -> list[np.ndarray]:
    raise RuntimeError(
        "the 'model' backend needs a text-prompted open-set segmentation model, "
        "which is not bundled; install one and wire it up in "
        "segbridge.bridge._model_proposals, or use backend='threshold-stub'"
    )


def union_masks(proposals: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    """Pixel-wise union; an empty proposal list yields an all-zero mask."""
    out = np.zeros(shape, dtype=bool)
    for p in proposals:
        if p.shape != shape:
            raise ValueError(f"proposal shape {p.shape} differs from image shape {shape}")
        out |= p.astype(bool)
    return out


def save_mask(mask: np.ndarray, path: Path) -> None:
    """Exchange format: 8-bit grayscale PNG, 255 = ground."""
    img = Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), "L")
    img.save(path)


def segment_batch(job: BridgeJob) -> Manifest:
    """Segment every PNG in the input directory; never aborts the batch.

    Unreadable images become error entries in the manifest. Output masks have
    exactly the source image's dimensions and are written as
    `<name>.mask.png` into the output directory.
    """
    in_dir = Path(job.input_dir)
    out_dir = Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    statuses: list[ImageStatus] = []
    inputs = sorted(p for p in in_dir.glob("*.png") if not p.name.endswith(".mask.png"))
    for path in inputs:
        try:
            rgb = np.asarray(Image.open(path).convert("RGB"))
            if job.backend == "threshold-stub":
                proposals = _stub_proposals(rgb, job.stub)
            else:
                proposals = _model_proposals(rgb, job.prompt, job.box_threshold)
            mask = union_masks(proposals, rgb.shape[:2])
            mask_name = path.stem + ".mask.png"
            save_mask(mask, out_dir / mask_name)
            statuses.append(
                ImageStatus(
                    name=path.name,
                    status="ok",
                    mask=mask_name,
                    ground_fraction=round(float(mask.mean()), 6),
                )
            )
        except Exception as exc:  # noqa: BLE001 - per-image isolation is the contract
            statuses.append(ImageStatus(name=path.name, status="error", error=str(exc)))
    manifest = Manifest(prompt=job.prompt, backend=job.backend, images=tuple(statuses))
    (out_dir / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest
