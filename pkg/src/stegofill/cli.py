"""Command-line frontend.

Subcommands: train, hide, extract, eval-ber, sweep-grille, zero-message,
plot. Exit codes: 0 success, 3 capacity overflow, 4 file-format
rejection, 5 key/shape mismatch, 1 anything else (argparse itself exits
with 2 on usage errors).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import torch

from . import codec, data, grille as grille_mod, models, pipeline
from .codec import SecretMessage
from .data import DataError, Rect
from .grille import GrilleError
from .models import ModelError, ModelFormatError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CAPACITY = 3
EXIT_FORMAT = 4
EXIT_MISMATCH = 5

log = logging.getLogger("stegofill")


class FormatRejection(ValueError):
    """Input or output file refused on format grounds."""


def _add_grille_args(p: argparse.ArgumentParser):
    p.add_argument("--grille-file", help="grille exchange document (see README)")
    p.add_argument("--key-hex", help="grille key as hex")
    p.add_argument("--key-text", help="grille key as literal text")
    p.add_argument("--grille-shape", type=int, nargs=2, metavar=("A", "B"))
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--offset", type=int, nargs=2, metavar=("ROW", "COL"),
                   help="grille placement; default centers it")
    p.add_argument("--si", type=int, default=None,
                   help="stability index 0..7 (default 5, or the grille file's value)")


def _resolve_grille(args):
    """Returns (grille, si, offset) from a file or raw parameters."""
    if args.grille_file:
        try:
            g, si, offset = grille_mod.read_grille_file(args.grille_file)
        except (OSError, GrilleError, ValueError) as exc:
            raise FormatRejection(f"cannot read grille file: {exc}") from exc
        if args.si is not None:
            si = args.si
        if args.offset is not None:
            offset = tuple(args.offset)
        return g, si, offset
    key = None
    if args.key_hex:
        key = bytes.fromhex(args.key_hex)
    elif args.key_text:
        key = args.key_text.encode()
    if key is None or args.grille_shape is None:
        raise GrilleError("need --grille-file, or a key plus --grille-shape")
    g = grille_mod.derive_grille(key, tuple(args.grille_shape), args.density)
    si = args.si if args.si is not None else 5
    offset = tuple(args.offset) if args.offset is not None else None
    return g, si, offset


def _read_message(args) -> SecretMessage:
    if args.message_bits:
        return SecretMessage.from_bitstring(args.message_bits)
    if args.message_hex:
        return SecretMessage.from_hex(args.message_hex)
    with open(args.message_file, "rb") as fh:
        return SecretMessage.from_bytes(fh.read())


def _load_covers(args, size: int, channels: int):
    if getattr(args, "cover", None):
        return [data.load_cover(args.cover, size, channels).pixels]
    if getattr(args, "data", None):
        return [r.pixels for r in data.ingest(args.data, size, channels)]
    n = getattr(args, "synthetic", None) or 8
    return [r.pixels for r in data.synthesize(n, size, seed=args.seed, channels=channels)]


# --- subcommands -------------------------------------------------------------

def cmd_train(args) -> int:
    if args.data:
        records = data.ingest(args.data, args.size, args.channels)
    else:
        records = data.synthesize(args.synthetic, args.size, seed=args.seed,
                                  channels=args.channels)
    config = models.TrainingConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        lr_generator=args.lr_g, lr_discriminator=args.lr_d,
        latent_dim=args.latent_dim, seed=args.seed,
        dataset_ref=args.data or f"synthetic:{args.synthetic}:{args.seed}",
        feature_maps=args.feature_maps,
        checkpoint_every=args.checkpoint_every,
        checkpoint_dir=args.checkpoint_dir,
    )
    G, D, history = models.train_adversarial(data.as_array(records), config)
    models.save_model(args.out, G, D, seed=args.seed)
    print(f"trained {args.epochs} epochs on {len(records)} images -> {args.out}")
    for entry in history:
        print(f"  epoch {entry['epoch']:3d}  d_loss={entry['d_loss']:.4f}"
              f"  g_loss={entry['g_loss']:.4f}")
    return EXIT_OK


def cmd_hide(args) -> int:
    if not data.is_lossless_path(args.out):
        raise FormatRejection(f"stego output must be .png, got {args.out}")
    G, D, _meta = models.load_model(args.model)
    H, W, C = G.image_shape
    cover = data.load_cover(args.cover, H, C).pixels
    g, si, offset = _resolve_grille(args)
    message = _read_message(args)
    config = pipeline.HideConfig(
        explicit_grille=g, offset=offset, si=si, mode=args.mode,
        lambda_perceptual=getattr(args, "lambda"), message_weight=args.message_weight,
        iterations=args.iterations, restarts=args.restarts,
        learning_rate=args.lr, seed=args.seed,
        region=Rect.parse(args.region) if args.region else None,
    )
    result = pipeline.hide(cover, message, config, G, D)
    data.write_stego_png(args.out, result.stego.image)
    sidecar = pipeline.write_sidecar(args.out, result.stego)
    if args.trace_csv:
        pipeline.write_trace_csv(args.trace_csv, result.optimization.trace)
    if args.write_grille:
        grille_mod.write_grille_file(args.write_grille, g, si, offset)
    print(f"hid {message.length} bits -> {args.out}")
    print(f"  mode={config.mode} si={si} grille={g.shape} popcount={g.popcount}")
    print(f"  best loss {result.optimization.best.total:.4f} "
          f"(message {result.optimization.best.message:.4f})")
    if result.overlap.cells_on_kept:
        print(f"  warning: {result.overlap.cells_on_kept} grille cells outside "
              f"the completion region")
    print(f"  sidecar {sidecar}")
    return EXIT_OK


def cmd_extract(args) -> int:
    stego = data.read_stego_image(args.stego)
    g, si, offset = _resolve_grille(args)
    message = pipeline.extract(stego, g, si, args.bits, offset)
    text = message.to_bitstring()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"extracted {message.length} bits -> {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_eval_ber(args) -> int:
    G, D, _meta = models.load_model(args.model)
    H, _W, C = G.image_shape
    covers = _load_covers(args, H, C)
    result = pipeline.eval_ber(
        G, D, covers,
        si_list=args.si_list, budget_list=args.budget_list,
        trials=args.trials, seed=args.seed, mode=args.mode,
        grille_shape=tuple(args.grille_shape) if args.grille_shape else None,
        density=args.density, restarts=args.restarts, learning_rate=args.lr,
        message_weight=args.message_weight,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    trials_csv = os.path.join(args.out_dir, "ber_trials.csv")
    summary_csv = os.path.join(args.out_dir, "ber_summary.csv")
    pipeline.write_csv(trials_csv, result.fieldnames, result.rows)
    pipeline.write_csv(summary_csv, result.summary_fieldnames, result.summary_rows)
    with open(os.path.join(args.out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(result.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for row in result.summary_rows:
        print(f"si={row['si']} budget={row['budget']}: "
              f"mean BER {row['mean_ber']:.4f} over {row['trials']} trials")
    if args.plot:
        for path in pipeline.render_plots(summary_csv, args.out_dir):
            print(f"plot -> {path}")
    return EXIT_OK


def cmd_sweep_grille(args) -> int:
    G, D, _meta = models.load_model(args.model)
    H, _W, C = G.image_shape
    cover = _load_covers(args, H, C)[0]
    result = pipeline.sweep_grille_size(
        G, D, cover, sizes=args.sizes,
        region=Rect.parse(args.region) if args.region else None,
        seed=args.seed, density=args.density, si=args.si, budget=args.iterations,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    sweep_csv = os.path.join(args.out_dir, "grille_sweep.csv")
    pipeline.write_csv(sweep_csv, result.fieldnames, result.rows)
    for size, image in result.images.items():
        data.write_stego_png(os.path.join(args.out_dir, f"stego_{size:02d}.png"), image)
    for row in result.rows:
        print(f"size={row['size']:3d} popcount={row['popcount']:5d} "
              f"on_kept={row['cells_on_kept']:5d} ber={row['ber']:.4f} "
              f"message_loss={row['best_message_loss']:.3f}")
    if args.plot:
        for path in pipeline.render_plots(sweep_csv, args.out_dir):
            print(f"plot -> {path}")
    return EXIT_OK


def cmd_zero_message(args) -> int:
    G, D, _meta = models.load_model(args.model)
    H, _W, C = G.image_shape
    cover = _load_covers(args, H, C)[0]
    stego, result, snapshots = pipeline.run_zero_message(
        G, D, cover, budget=args.iterations, seed=args.seed, si=args.si,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    data.write_stego_png(os.path.join(args.out_dir, "zero_message.png"), stego)
    for it, image in snapshots:
        data.write_stego_png(os.path.join(args.out_dir, f"iter_{it:05d}.png"), image)
    pipeline.write_trace_csv(os.path.join(args.out_dir, "trace.csv"), result.trace)
    print(f"{len(snapshots)} snapshots -> {args.out_dir} "
          f"(best message loss {result.best.message:.4f})")
    return EXIT_OK


def cmd_plot(args) -> int:
    for path in pipeline.render_plots(args.csv, args.out_dir):
        print(f"plot -> {path}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stegofill",
        description="Hide bitstrings in images via a keyed grille mask and "
                    "latent-space image completion.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the toy adversarial model")
    p.add_argument("--data", help="directory of training images")
    p.add_argument("--synthetic", type=int, default=300,
                   help="use N procedural images when --data is absent")
    p.add_argument("--size", type=int, default=64, choices=(32, 64))
    p.add_argument("--channels", type=int, default=3, choices=(1, 3))
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr-g", type=float, default=2e-4)
    p.add_argument("--lr-d", type=float, default=2e-4)
    p.add_argument("--latent-dim", type=int, default=100)
    p.add_argument("--feature-maps", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--checkpoint-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("hide", help="embed a message and complete the image")
    p.add_argument("--cover", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="stego output path (.png)")
    p.add_argument("--message-bits", help="message as a 0/1 string")
    p.add_argument("--message-hex", help="message as hex")
    p.add_argument("--message-file", help="message as a raw file")
    _add_grille_args(p)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--lambda", type=float, default=0.1,
                   help="perceptual loss weight")
    p.add_argument("--message-weight", type=float, default=1.0)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--region", help="completion region as top,left,height,width")
    p.add_argument("--trace-csv", help="write the per-iteration loss trace here")
    p.add_argument("--write-grille", help="export the grille exchange file here")
    p.set_defaults(func=cmd_hide)

    p = sub.add_parser("extract", help="read a message back out of a stego image")
    p.add_argument("--stego", required=True)
    p.add_argument("--bits", type=int, required=True, help="expected message length")
    p.add_argument("--out", help="write the bitstring here instead of stdout")
    _add_grille_args(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval-ber", help="bit-error-rate sweep over si and budget")
    p.add_argument("--model", required=True)
    p.add_argument("--cover")
    p.add_argument("--data")
    p.add_argument("--synthetic", type=int)
    p.add_argument("--si-list", type=int, nargs="+", default=[4, 5, 6, 7])
    p.add_argument("--budget-list", type=int, nargs="+", default=[60, 200, 600])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--grille-shape", type=int, nargs=2, metavar=("A", "B"))
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--message-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_eval_ber)

    p = sub.add_parser("sweep-grille", help="hide at several grille sizes")
    p.add_argument("--model", required=True)
    p.add_argument("--cover")
    p.add_argument("--synthetic", type=int)
    p.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32, 48])
    p.add_argument("--region", help="completion region as top,left,height,width")
    p.add_argument("--density", type=float, default=1.0)
    p.add_argument("--si", type=int, default=5)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_sweep_grille)

    p = sub.add_parser("zero-message", help="complete a cover with the all-zero payload")
    p.add_argument("--model", required=True)
    p.add_argument("--cover")
    p.add_argument("--synthetic", type=int)
    p.add_argument("--si", type=int, default=5)
    p.add_argument("--iterations", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_zero_message)

    p = sub.add_parser("plot", help="render a harness CSV to a figure")
    p.add_argument("--csv", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)  # keeps reruns byte-identical
    try:
        return args.func(args)
    except codec.CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (FormatRejection, DataError, ModelFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (GrilleError, codec.CodecError, ModelError, pipeline.PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except Exception as exc:  # pragma: no cover - last resort
        log.exception("unhandled failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
