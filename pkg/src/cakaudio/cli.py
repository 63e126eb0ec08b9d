"""Command-line entry point; a thin dispatcher over the package.

Subcommands: ingest, train, apply, inspect, serve. Usage errors exit 2;
module errors exit 1 with a one-line "ERR:<CODE>: message" on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audio_io import read_wav, write_wav
from .corpus import ingest, load_index, save_index
from .errors import CakError
from .inferencer import apply_effect, inspect_kernel
from .spectral import StftConfig
from .trainer import TrainConfig, load_checkpoint, train


def _control(text: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"control must be a number, got {text!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"control must lie in [0, 1], got {value}")
    return value


def _crop(text: str) -> tuple[int, int]:
    try:
        bins, frames = (int(p) for p in text.lower().split("x"))
        return bins, frames
    except ValueError as exc:
        raise argparse.ArgumentTypeError("crop must look like 64x64 (bins x frames)") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cak", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="index a corpus directory")
    p.add_argument("corpus_dir")
    p.add_argument("--segment-seconds", type=float, default=15.0)
    p.add_argument("--index-path", default=None, help="default: <dir>/corpus_index.json")

    p = sub.add_parser("train", help="train the effect on a corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--steps-per-epoch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--identity-fraction", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=1e-4, help="learning rate for both networks")
    p.add_argument("--crop", type=_crop, default=None, help="train on random crops, e.g. 256x256")
    p.add_argument("--c-mode", choices=("paired", "random"), default="paired")
    p.add_argument("--segment-seconds", type=float, default=15.0)
    p.add_argument("--ckpt", default="cak_checkpoint.json")
    p.add_argument("--metrics", default="cak_metrics.csv")

    p = sub.add_parser("apply", help="process a WAV at a control value")
    p.add_argument("input")
    p.add_argument("--control", type=_control, required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("inspect", help="print the learned kernel report")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--json", action="store_true", help="emit raw JSON")

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="serve a built frontend from this directory")
    return parser


def _cmd_ingest(args) -> int:
    index = ingest(args.corpus_dir, StftConfig(), segment_seconds=args.segment_seconds)
    path = args.index_path or str(Path(args.corpus_dir) / "corpus_index.json")
    save_index(index, path)
    print(f"indexed {len(index)} segments -> {path} (norm={index.norm:.6g})")
    return 0


def _cmd_train(args) -> int:
    sidecar = Path(args.corpus_dir) / "corpus_index.json"
    if sidecar.is_file():
        index = load_index(sidecar)
    else:
        index = ingest(args.corpus_dir, StftConfig(), segment_seconds=args.segment_seconds)
        save_index(index, sidecar)
    cfg = TrainConfig(
        epochs=args.epochs,
        batch=args.batch,
        steps_per_epoch=args.steps_per_epoch,
        seed=args.seed,
        identity_fraction=args.identity_fraction,
        lr_effect=args.lr,
        lr_critic=args.lr,
        crop=args.crop,
        c_mode=args.c_mode,
        checkpoint_path=args.ckpt,
        metrics_path=args.metrics,
    )
    ckpt, metrics = train(index, cfg)
    print(f"trained {len(metrics)} epochs; checkpoint -> {args.ckpt}, metrics -> {args.metrics}")
    return 0


def _cmd_apply(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    clip = read_wav(args.input)
    out = apply_effect(clip, args.control, ckpt)
    write_wav(out, args.output)
    print(f"wrote {args.output} ({out.duration:.2f}s at control {args.control:g})")
    return 0


def _cmd_inspect(args) -> int:
    report = inspect_kernel(load_checkpoint(args.ckpt))
    if args.json:
        print(report.to_json())
        return 0
    print("detector kernel (rows: frequency offset, cols: time offset):")
    for row in report.kernel:
        print("  " + "  ".join(f"{v: .5f}" for v in row))
    print(f"bias  {report.bias: .6f}")
    print(f"scale {report.scale: .6f}")
    print("band response (mean |w| per row): " + ", ".join(f"{v:.5f}" for v in report.band_response))
    d = report.dominant
    print(f"dominant weight {d['weight']: .5f} at row {d['row']}, col {d['col']}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.ckpt, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "apply": _cmd_apply,
    "inspect": _cmd_inspect,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except CakError as exc:
        print(f"ERR:{exc.code}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
