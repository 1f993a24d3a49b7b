import json
import time
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from segbridge import BridgeJob, segment_batch
from segbridge.bridge import StubConfig, union_masks
from segbridge.cli import main as cli_main


def _write_png(path: Path, arr: np.ndarray) -> None:
    Image.fromarray(arr.astype(np.uint8), "RGB").save(path)


def _synthetic_view(floor_rows: int = 32, h: int = 64, w: int = 64) -> np.ndarray:
    """Sky-colored top half, neutral-gray floor bottom half."""
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[: h - floor_rows] = (135, 206, 235)  # sky
    img[h - floor_rows :] = (100, 100, 100)  # shaded gray floor
    return img


def test_stub_marks_floor_colored_bottom_half(tmp_path):
    (tmp_path / "in").mkdir()
    _write_png(tmp_path / "in" / "v.png", _synthetic_view())
    job = BridgeJob(tmp_path / "in", tmp_path / "out")
    manifest = segment_batch(job)
    assert manifest.ok == 1 and manifest.failed == 0
    mask = np.asarray(Image.open(tmp_path / "out" / "v.mask.png"))
    assert mask.shape == (64, 64)
    assert (mask[32:] == 255).all()
    assert (mask[:32] == 0).all()


def test_empty_input_dir_yields_empty_manifest(tmp_path):
    (tmp_path / "in").mkdir()
    manifest = segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out"))
    assert manifest.images == ()
    data = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert data["images"] == [] and data["prompt"] == "Ground"


def test_mask_dimensions_match_source_over_fixture_set(tmp_path):
    (tmp_path / "in").mkdir()
    shapes = [(48, 64), (64, 48), (100, 30)]
    for i, (h, w) in enumerate(shapes):
        _write_png(tmp_path / "in" / f"img{i}.png", _synthetic_view(h // 2, h, w))
    manifest = segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out"))
    assert manifest.ok == len(shapes)
    for i, (h, w) in enumerate(shapes):
        mask = np.asarray(Image.open(tmp_path / "out" / f"img{i}.mask.png"))
        assert mask.shape == (h, w)


def test_unreadable_image_is_recorded_failure_batch_continues(tmp_path):
    (tmp_path / "in").mkdir()
    (tmp_path / "in" / "broken.png").write_bytes(b"not a png at all")
    _write_png(tmp_path / "in" / "good.png", _synthetic_view())
    manifest = segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out"))
    assert manifest.ok == 1 and manifest.failed == 1
    by_name = {i.name: i for i in manifest.images}
    assert by_name["broken.png"].status == "error" and by_name["broken.png"].error
    assert by_name["good.png"].status == "ok"


def test_stub_is_deterministic(tmp_path):
    (tmp_path / "in").mkdir()
    rng = np.random.default_rng(0)
    noise = rng.integers(0, 255, size=(64, 64, 3)).astype(np.uint8)
    _write_png(tmp_path / "in" / "n.png", noise)
    segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out1"))
    segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out2"))
    a = (tmp_path / "out1" / "n.mask.png").read_bytes()
    b = (tmp_path / "out2" / "n.mask.png").read_bytes()
    assert a == b


def test_union_masks_shape_check():
    with pytest.raises(ValueError):
        union_masks([np.ones((2, 2), dtype=bool)], (3, 3))
    out = union_masks([], (2, 2))
    assert not out.any()


def test_model_backend_fails_informatively(tmp_path):
    (tmp_path / "in").mkdir()
    _write_png(tmp_path / "in" / "v.png", _synthetic_view())
    manifest = segment_batch(BridgeJob(tmp_path / "in", tmp_path / "out", backend="model"))
    assert manifest.failed == 1
    assert "threshold-stub" in manifest.images[0].error


def test_unknown_backend_rejected(tmp_path):
    with pytest.raises(ValueError):
        BridgeJob(tmp_path, tmp_path, backend="magic")


def test_cli_stub_run(tmp_path, capsys):
    (tmp_path / "in").mkdir()
    _write_png(tmp_path / "in" / "v.png", _synthetic_view())
    rc = cli_main(["--in", str(tmp_path / "in"), "--out", str(tmp_path / "out"),
                   "--prompt", "Ground", "--backend", "stub"])
    assert rc == 0
    assert (tmp_path / "out" / "v.mask.png").exists()
    assert "1 ok, 0 failed" in capsys.readouterr().out


# --- SECONDARY acceptance: round-trip into the navigation core ------------

def test_bridge_round_trip_drives_core_episode_step(tmp_path):
    """Stub masks for 5 rendered fixture views feed the core's file
    affordance provider, yield nonzero candidates, and drive one scripted
    episode step without error."""
    affnav = pytest.importorskip("affnav")
    from affnav import runner, worldgen
    from affnav import scene as scene_mod
    from affnav.annotate import save_png
    from affnav.geometry import VIEW_ORDER, view_pose

    t0 = time.monotonic()
    scene = worldgen.generate_scene(7)
    cfg = runner.benchmark_config(affordance="file", mask_dir=str(tmp_path / "masks"),
                                  max_decisions=1)
    episodes = worldgen.generate_episodes(scene, 2, 700, cfg.body())
    ep = episodes[0]
    intr = cfg.intrinsics()

    # 5 fixture images: the episode's four step-0 views plus one extra
    in_dir = tmp_path / "views"
    in_dir.mkdir()
    for d in VIEW_ORDER:
        vp = view_pose(ep.start, d)
        rgb, _ = scene_mod.render(scene, vp, intr, cfg.cam_height_m)
        save_png(rgb, in_dir / f"{ep.id}_0_{d.value}.png")
    rgb, _ = scene_mod.render(scene, episodes[1].start, intr, cfg.cam_height_m)
    save_png(rgb, in_dir / "extra_view.png")

    manifest = segment_batch(BridgeJob(in_dir, tmp_path / "masks"))
    assert manifest.ok == 5 and manifest.failed == 0

    log = runner.run_episode(ep, scene, cfg)
    step = log.steps[0]
    assert step["candidates"] > 0, "bridge masks produced no candidates"
    assert step["decision"]["action"] != "recover"
    dt = time.monotonic() - t0
    assert dt < 10.0
    print(f"\nPASS bridge round-trip: 5 masks, {step['candidates']} candidates, {dt:.1f}s")
