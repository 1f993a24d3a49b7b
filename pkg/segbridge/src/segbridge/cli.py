"""segbridge command line: batch RGB views into ground-affordance masks."""

from __future__ import annotations

import argparse
import sys

from .bridge import BridgeJob, StubConfig, segment_batch


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segbridge", description=__doc__)
    p.add_argument("--in", dest="input_dir", required=True, help="directory of RGB PNGs")
    p.add_argument("--out", dest="output_dir", required=True, help="mask output directory")
    p.add_argument("--prompt", default="Ground", help="segmentation text prompt")
    p.add_argument("--backend", choices=("stub", "model"), default="stub")
    p.add_argument(
        "--box-threshold", type=float, default=0.3,
        help="detector box-confidence threshold (model backend only; no "
        "principled default exists, tune per model)",
    )
    p.add_argument("--stub-channel-lo", type=int, default=30)
    p.add_argument("--stub-channel-hi", type=int, default=160)
    p.add_argument("--stub-max-spread", type=int, default=24)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = BridgeJob(
        input_dir=args.input_dir,
        output_dir=args.output_dir,
        prompt=args.prompt,
        backend="threshold-stub" if args.backend == "stub" else "model",
        box_threshold=args.box_threshold,
        stub=StubConfig(args.stub_channel_lo, args.stub_channel_hi, args.stub_max_spread),
    )
    manifest = segment_batch(job)
    print(f"{manifest.ok} ok, {manifest.failed} failed; manifest in {args.output_dir}")
    return 0 if manifest.failed == 0 else 2


if __name__ == "__main__":
    sys.exit(main())
