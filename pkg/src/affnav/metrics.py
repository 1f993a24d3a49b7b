"""VLN-CE evaluation: TL, NE, OSR, SR, SPL per episode plus aggregates.

NE is reported as geodesic distance (the Euclidean variant is recorded
alongside, since conventions differ between harnesses). SPL follows
SR * shortest / max(TL, shortest).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

from . import scene as scene_mod
from .geometry import WorldPoint

DEFAULT_SUCCESS_RADIUS_M = 3.0


class EvaluationError(RuntimeError):
    """Raised when a metric cannot be computed (e.g. unreachable goal)."""


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    tl: float
    ne: float  # geodesic
    euclid_ne: float
    osr: int
    sr: int
    spl: float

    def __post_init__(self):
        if not (self.spl <= self.sr + 1e-12 and self.sr <= self.osr):
            raise AssertionError("metric invariants violated: SPL <= SR <= OSR")


@dataclass(frozen=True)
class Report:
    n: int
    mean_tl: float
    mean_ne: float
    osr_pct: float
    sr_pct: float
    spl_pct: float
    success_radius_m: float
    ne_convention: str
    config_digest: str | None = None


def trace_length(trace: list[tuple[float, float]]) -> float:
    return sum(
        math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(trace[:-1], trace[1:])
    )


def evaluate(
    trace: list[tuple[float, float]],
    goal: WorldPoint,
    gt_shortest: float,
    scene: scene_mod.SceneSpec,
    body: scene_mod.AgentBody,
    episode_id: str = "",
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
) -> EpisodeResult:
    """Score one episode from its full pose trace (x, y pairs in order)."""
    if not trace:
        raise EvaluationError("empty trace")
    tl = trace_length(trace)
    try:
        ne = scene_mod.geodesic_distance(scene, trace[-1], goal, body)
    except scene_mod.SnapError as exc:
        raise EvaluationError(f"final position cannot be snapped: {exc}") from exc
    if not math.isfinite(ne):
        raise EvaluationError("goal unreachable from final position")
    euclid_ne = math.hypot(trace[-1][0] - goal.x, trace[-1][1] - goal.y)
    sr = 1 if ne <= success_radius_m else 0
    osr = sr
    if not osr:
        for p in trace:
            try:
                d = scene_mod.geodesic_distance(scene, p, goal, body)
            except scene_mod.SnapError:
                continue
            if d <= success_radius_m:
                osr = 1
                break
    spl = sr * gt_shortest / max(tl, gt_shortest) if gt_shortest > 0 else float(sr)
    return EpisodeResult(episode_id, tl, ne, euclid_ne, osr, sr, spl)


def aggregate(
    results: list[EpisodeResult],
    success_radius_m: float = DEFAULT_SUCCESS_RADIUS_M,
    config_digest: str | None = None,
) -> Report:
    if not results:
        raise ValueError("cannot aggregate zero results")
    n = len(results)
    return Report(
        n=n,
        mean_tl=sum(r.tl for r in results) / n,
        mean_ne=sum(r.ne for r in results) / n,
        osr_pct=round(100.0 * sum(r.osr for r in results) / n, 1),
        sr_pct=round(100.0 * sum(r.sr for r in results) / n, 1),
        spl_pct=round(100.0 * sum(r.spl for r in results) / n, 1),
        success_radius_m=success_radius_m,
        ne_convention="geodesic",
        config_digest=config_digest,
    )


def report_table(report: Report) -> str:
    """Aligned plain-text table: TL, NE, OSR, SR, SPL."""
    header = f"{'n':>4}  {'TL':>7}  {'NE':>6}  {'OSR':>6}  {'SR':>6}  {'SPL':>6}"
    row = (
        f"{report.n:>4}  {report.mean_tl:>7.2f}  {report.mean_ne:>6.2f}  "
        f"{report.osr_pct:>5.1f}%  {report.sr_pct:>5.1f}%  {report.spl_pct:>5.1f}%"
    )
    return header + "\n" + row


def report_json(report: Report) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True)


def config_digest(config: dict) -> str:
    """Stable digest of an effective configuration."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
