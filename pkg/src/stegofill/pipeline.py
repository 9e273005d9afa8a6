"""End-to-end hide/extract plus the experiment harnesses behind the CLI.

Hiding: corrupt the cover, write the message at grille slots, complete
the image by latent descent, composite, quantize, write PNG. Extraction
never touches a model: it re-derives the grille from the shared key
material and reads the bit planes straight off the stego pixels.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import codec, data, grille as grille_mod, inpaint
from .codec import SecretMessage, StegoImage
from .data import Rect
from .grille import CardanGrille, PaddedGrille
from .inpaint import LossWeights, OptimizationResult
from .models import model_fingerprint

log = logging.getLogger(__name__)


class PipelineError(ValueError):
    pass


@dataclass
class HideConfig:
    """Everything the sender chooses; grille fields double as key material."""

    key: bytes | None = None
    grille_shape: tuple[int, int] | None = None
    density: float = 0.5
    explicit_grille: CardanGrille | None = None
    offset: tuple[int, int] | None = None
    si: int = 5
    mode: str = "soft"
    lambda_perceptual: float = 0.1
    message_weight: float = 1.0
    iterations: int = 1000
    restarts: int = 1
    learning_rate: float = 0.01
    seed: int = 0
    region: Rect | None = None

    def __post_init__(self):
        if not (0 <= self.si <= 7):
            raise PipelineError(f"si must be in 0..7, got {self.si}")
        if self.mode not in ("soft", "hard"):
            raise PipelineError(f"mode must be 'soft' or 'hard', got {self.mode!r}")
        if self.iterations < 1 or self.restarts < 1:
            raise PipelineError("iterations and restarts must be at least 1")
        if self.explicit_grille is None and (self.key is None or self.grille_shape is None):
            raise PipelineError("need either an explicit grille or key + grille_shape")

    def build_grille(self) -> CardanGrille:
        if self.explicit_grille is not None:
            return self.explicit_grille
        return grille_mod.derive_grille(self.key, self.grille_shape, self.density)

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_perceptual, self.message_weight)


@dataclass
class HideResult:
    stego: StegoImage
    optimization: OptimizationResult
    carrier: codec.ExpandedCarrier
    padded: PaddedGrille
    mask: np.ndarray
    region: Rect
    overlap: grille_mod.OverlapReport


def _key_fingerprint(g: CardanGrille) -> str:
    material = g.key if g.key is not None else g.cells.tobytes()
    return hashlib.sha256(material).hexdigest()[:16]


def hide(cover: np.ndarray, message: SecretMessage, config: HideConfig,
         generator, discriminator) -> HideResult:
    """Run the full hiding pipeline on an in-memory cover image.

    Capacity is checked before any optimization work starts. In hard
    mode the grille pixels are excluded from completion, so the exact
    written values survive into the stego regardless of the model.
    """
    cover = np.asarray(cover, dtype=np.float64)
    if cover.ndim != 3:
        raise PipelineError(f"cover must be (H, W, C), got shape {cover.shape}")
    H, W, C = cover.shape
    if (H, W, C) != tuple(generator.image_shape):
        raise PipelineError(
            f"cover shape {(H, W, C)} does not match model output {tuple(generator.image_shape)}"
        )

    region = config.region or data.central_region((H, W))
    g = config.build_grille()
    if not g.usable:
        raise PipelineError("grille has no writable cells; cannot hide")
    padded = grille_mod.zero_pad(g, (H, W), config.offset)

    corrupted = data.corrupt(cover, region)
    carrier = codec.expand_message(message, corrupted.image, padded, config.si)

    mask = inpaint.build_completion_mask((H, W), region, config.mode, padded)
    overlap = grille_mod.check_overlap(padded, corrupted.mask)
    if overlap.cells_on_kept:
        log.warning("grille exceeds the completion region: %d cells land on kept pixels",
                    overlap.cells_on_kept)
    if mask.min() == 1:
        log.warning("completion mask keeps every pixel; nothing will be generated")

    result = inpaint.optimize_latent(
        carrier.image, mask, carrier, padded, config.weights,
        generator, discriminator,
        budget=config.iterations, seed=config.seed,
        restarts=config.restarts, learning_rate=config.learning_rate,
    )
    reconstructed = inpaint.reconstruct(carrier.image, mask, result.z_hat, generator)
    stego = StegoImage(
        image=reconstructed,
        provenance={
            "key_fingerprint": _key_fingerprint(g),
            "si": config.si,
            "mode": config.mode,
            "iterations": config.iterations,
            "restarts": config.restarts,
            "lambda_perceptual": config.lambda_perceptual,
            "message_weight": config.message_weight,
            "seed": config.seed,
            "model_fingerprint": model_fingerprint(generator, discriminator),
        },
    )
    return HideResult(stego=stego, optimization=result, carrier=carrier,
                      padded=padded, mask=mask, region=region, overlap=overlap)


def extract(stego_image: np.ndarray, g: CardanGrille, si: int,
            expected_length: int, offset=None) -> SecretMessage:
    """Model-free extraction: pad the grille, read slots, decode, truncate."""
    stego_image = np.asarray(stego_image)
    padded = grille_mod.zero_pad(g, stego_image.shape[:2], offset)
    return codec.extract_message(stego_image, padded, si, expected_length)


# --- public sidecar ----------------------------------------------------------

SIDECAR_SUFFIX = ".meta.json"


def write_sidecar(stego_path, stego: StegoImage) -> str:
    """Public run metadata only: no key material, grille, si, or message."""
    public = {k: stego.provenance[k] for k in
              ("mode", "iterations", "restarts", "lambda_perceptual",
               "message_weight", "seed", "model_fingerprint")}
    public["image_shape"] = list(stego.image.shape)
    path = str(stego_path) + SIDECAR_SUFFIX
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(public, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# --- CSV ---------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, fieldnames: list[str], rows: list[dict]) -> None:
    """Canonical CSV: fixed column order, repr floats, LF terminators, so a
    rerun with identical inputs is byte-identical."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def write_trace_csv(path, trace) -> None:
    rows = inpaint.trace_to_rows(trace)
    write_csv(path, ["iteration", "L_contextual", "L_perceptual", "L_message",
                     "total", "best_total"], rows)


# --- experiment harnesses ----------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list[dict]
    fieldnames: list[str]
    summary_rows: list[dict] = field(default_factory=list)
    summary_fieldnames: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)
    images: dict = field(default_factory=dict)


def _trial_key(seed: int, trial: int) -> bytes:
    return f"trial-{seed}-{trial}".encode()


def eval_ber(generator, discriminator, covers: list[np.ndarray],
             si_list: list[int], budget_list: list[int], trials: int, seed: int,
             region: Rect | None = None, grille_shape: tuple[int, int] | None = None,
             density: float = 0.5, mode: str = "soft", restarts: int = 1,
             learning_rate: float = 0.01, lambda_perceptual: float = 0.1,
             message_weight: float = 1.0,
             keep_traces: bool = False) -> ExperimentResult:
    """Mean bit error rate per (si, budget) cell over randomized trials.

    Grilles and messages are randomized per trial but shared across all
    (si, budget) cells, so cells are compared on identical inputs.
    """
    if trials < 1:
        raise PipelineError("trials must be at least 1")
    if not covers:
        raise PipelineError("need at least one cover image")
    H, W, _C = covers[0].shape
    region = region or data.central_region((H, W))
    grille_shape = grille_shape or (region.height, region.width)

    rows = []
    traces = []
    for si in si_list:
        for budget in budget_list:
            for trial in range(trials):
                cover = covers[trial % len(covers)]
                channels = cover.shape[2]
                key = _trial_key(seed, trial)
                g = grille_mod.derive_grille(key, grille_shape, density)
                if not g.usable:
                    continue
                bit_rng = np.random.default_rng(seed * 7919 + trial)
                full_bits = bit_rng.integers(0, 2, size=g.popcount * channels * 8,
                                             dtype=np.uint8)
                length = grille_mod.capacity(g, channels, si)
                message = SecretMessage(full_bits[:length])
                config = HideConfig(
                    explicit_grille=g, si=si, mode=mode,
                    lambda_perceptual=lambda_perceptual,
                    message_weight=message_weight,
                    iterations=budget, restarts=restarts,
                    learning_rate=learning_rate,
                    seed=seed * 1_000_003 + trial, region=region,
                )
                result = hide(cover, message, config, generator, discriminator)
                received = extract(result.stego.image, g, si, message.length)
                ber = codec.bit_error_rate(message, received)
                rows.append({"si": si, "budget": budget, "trial": trial,
                             "bits": message.length, "ber": ber})
                if keep_traces:
                    traces.append(result.optimization.trace)

    summary = []
    for si in si_list:
        for budget in budget_list:
            cell = [r["ber"] for r in rows if r["si"] == si and r["budget"] == budget]
            summary.append({"si": si, "budget": budget, "trials": len(cell),
                            "mean_ber": float(np.mean(cell))})
    return ExperimentResult(
        rows=rows, fieldnames=["si", "budget", "trial", "bits", "ber"],
        summary_rows=summary, summary_fieldnames=["si", "budget", "trials", "mean_ber"],
        metadata={"seed": seed, "mode": mode, "density": density,
                  "grille_shape": list(grille_shape),
                  "model_fingerprint": model_fingerprint(generator, discriminator)},
        traces=traces,
    )


def sweep_grille_size(generator, discriminator, cover: np.ndarray,
                      sizes: list[int], region: Rect | None = None,
                      seed: int = 0, density: float = 1.0, si: int = 5,
                      budget: int = 200, restarts: int = 1,
                      learning_rate: float = 0.01,
                      keep_traces: bool = False) -> ExperimentResult:
    """Soft-mode hides on one cover at several grille sizes.

    Reports the overlap between each grille and the soft completion mask;
    sizes larger than the region land message pixels on kept area, which
    is exactly the visible-distortion case.
    """
    H, W, channels = cover.shape
    region = region or data.central_region((H, W))
    soft_mask = inpaint.build_completion_mask((H, W), region, "soft")

    rows, traces, images = [], [], {}
    for size in sizes:
        key = _trial_key(seed, size)
        g = grille_mod.derive_grille(key, (size, size), density)
        padded = grille_mod.zero_pad(g, (H, W))
        overlap = grille_mod.check_overlap(padded, soft_mask)
        length = grille_mod.capacity(g, channels, si)
        message = SecretMessage.random(length, np.random.default_rng(seed * 7919 + size))
        config = HideConfig(
            explicit_grille=g, si=si, mode="soft",
            iterations=budget, restarts=restarts, learning_rate=learning_rate,
            seed=seed * 1_000_003 + size, region=region,
        )
        result = hide(cover, message, config, generator, discriminator)
        received = extract(result.stego.image, g, si, message.length)
        rows.append({
            "size": size,
            "popcount": g.popcount,
            "cells_on_kept": overlap.cells_on_kept,
            "bits": message.length,
            "ber": codec.bit_error_rate(message, received),
            "best_total": result.optimization.best.total,
            "best_message_loss": result.optimization.best.message,
        })
        images[size] = result.stego.image
        if keep_traces:
            traces.append(result.optimization.trace)

    return ExperimentResult(
        rows=rows,
        fieldnames=["size", "popcount", "cells_on_kept", "bits", "ber",
                    "best_total", "best_message_loss"],
        metadata={"seed": seed, "density": density, "si": si, "budget": budget,
                  "region": [region.top, region.left, region.height, region.width],
                  "model_fingerprint": model_fingerprint(generator, discriminator)},
        traces=traces,
        images=images,
    )


def run_zero_message(generator, discriminator, cover: np.ndarray,
                     budget: int, seed: int = 0, si: int = 5,
                     region: Rect | None = None, grille_shape=None,
                     density: float = 0.5, n_snapshots: int = 10,
                     learning_rate: float = 0.01):
    """Hide the all-zero message in soft mode and return iteration snapshots.

    Snapshot iterations are spaced evenly across the budget; each snapshot
    is the composited image at that iterate.
    """
    H, W, channels = cover.shape
    region = region or data.central_region((H, W))
    grille_shape = grille_shape or (region.height, region.width)
    g = grille_mod.derive_grille(_trial_key(seed, 0), grille_shape, density)
    length = grille_mod.capacity(g, channels, si)
    message = SecretMessage(np.zeros(length, dtype=np.uint8))

    snaps = np.unique(np.linspace(1, budget, min(n_snapshots, budget)).astype(int))
    config = HideConfig(explicit_grille=g, si=si, mode="soft",
                        iterations=budget, seed=seed, region=region,
                        learning_rate=learning_rate)

    padded = grille_mod.zero_pad(g, (H, W), config.offset)
    corrupted = data.corrupt(np.asarray(cover, dtype=np.float64), region)
    carrier = codec.expand_message(message, corrupted.image, padded, si)
    mask = inpaint.build_completion_mask((H, W), region, "soft", padded)
    result = inpaint.optimize_latent(
        carrier.image, mask, carrier, padded, config.weights,
        generator, discriminator, budget=budget, seed=seed,
        learning_rate=learning_rate, snapshot_at=tuple(int(v) for v in snaps),
    )
    snapshots = [(it, inpaint.reconstruct(carrier.image, mask, z, generator))
                 for it, z in sorted(result.snapshots.items())]
    stego = inpaint.reconstruct(carrier.image, mask, result.z_hat, generator)
    return stego, result, snapshots


# --- plots -------------------------------------------------------------------

def render_plots(csv_path, out_dir) -> list[str]:
    """Figure-style renderings of a harness CSV; dispatches on the header."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise PipelineError(f"empty CSV: {csv_path}")
    header = set(rows[0])

    import os

    os.makedirs(out_dir, exist_ok=True)
    outputs = []

    if {"si", "mean_ber"} <= header:
        fig, ax = plt.subplots(figsize=(6, 4))
        budgets = sorted({int(r["budget"]) for r in rows})
        sis = sorted({int(r["si"]) for r in rows})
        if len(budgets) > 1:
            for si in sis:
                pts = [(int(r["budget"]), float(r["mean_ber"]))
                       for r in rows if int(r["si"]) == si]
                ax.plot(*zip(*sorted(pts)), marker="o", label=f"si={si}")
            ax.set_xlabel("iterations")
        else:
            pts = [(int(r["si"]), float(r["mean_ber"])) for r in rows]
            ax.plot(*zip(*sorted(pts)), marker="o")
            ax.set_xlabel("stability index")
        ax.set_ylabel("bit error rate")
        ax.legend() if len(budgets) > 1 else None
        path = os.path.join(out_dir, "ber.png")
    elif {"iteration", "best_total"} <= header:
        fig, ax = plt.subplots(figsize=(6, 4))
        its = [int(r["iteration"]) for r in rows]
        for col in ("L_contextual", "L_message", "total", "best_total"):
            ax.plot(its, [float(r[col]) for r in rows], label=col)
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        ax.legend()
        path = os.path.join(out_dir, "trace.png")
    elif {"size", "best_message_loss"} <= header:
        fig, ax = plt.subplots(figsize=(6, 4))
        pts = sorted((int(r["size"]), float(r["best_message_loss"])) for r in rows)
        ax.plot(*zip(*pts), marker="s")
        ax.set_xlabel("grille size")
        ax.set_ylabel("message loss at best iterate")
        path = os.path.join(out_dir, "grille_sweep.png")
    else:
        raise PipelineError(f"unrecognized CSV header for plotting: {sorted(header)}")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    outputs.append(path)
    return outputs
