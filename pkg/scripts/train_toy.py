#!/usr/bin/env python3
"""Train the toy conv pair on a procedural corpus and save the container.

Two corpus families:
  blobs: smooth colored ellipses; photogenic but the trained generator
         collapses to low-contrast output, so soft-mode decoding stays
         at chance. Good for hard-mode and visual-quality demos.
  noise: two-level per-pixel noise at +-0.8; the generator learns latent
         steerable local texture, which soft-mode decoding needs.

Writes the model next to a CSV of per-epoch losses.
"""

import argparse
import os

import numpy as np
import torch

from stegofill import save_model, synthesize, train_adversarial
from stegofill.data import as_array
from stegofill.models import TrainingConfig
from stegofill.pipeline import write_csv


def make_corpus(family: str, count: int, size: int, seed: int) -> np.ndarray:
    if family == "blobs":
        return as_array(synthesize(count, size, seed=seed)).astype(np.float32)
    if family == "noise":
        rng = np.random.default_rng(seed)
        return (0.8 * np.sign(rng.standard_normal((count, size, size, 3)))).astype(np.float32)
    raise ValueError(f"unknown corpus family: {family}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", choices=("blobs", "noise"), default="noise")
    parser.add_argument("--count", type=int, default=300)
    parser.add_argument("--size", type=int, default=32, choices=(32, 64))
    parser.add_argument("--epochs", type=int, default=40)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--latent-dim", type=int, default=100)
    parser.add_argument("--feature-maps", type=int, default=32)
    parser.add_argument("--lr-g", type=float, default=2e-4)
    parser.add_argument("--lr-d", type=float, default=2e-4)
    parser.add_argument("--corpus-seed", type=int, default=77)
    parser.add_argument("--seed", type=int, default=5)
    parser.add_argument("--out", default="results/toy_model.pt")
    args = parser.parse_args(argv)

    torch.set_num_threads(1)
    corpus = make_corpus(args.corpus, args.count, args.size, args.corpus_seed)
    config = TrainingConfig(
        epochs=args.epochs, batch_size=args.batch_size,
        lr_generator=args.lr_g, lr_discriminator=args.lr_d,
        latent_dim=args.latent_dim, seed=args.seed,
        dataset_ref=f"{args.corpus}:{args.count}:{args.corpus_seed}",
        feature_maps=args.feature_maps,
    )
    G, D, history = train_adversarial(corpus, config)

    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_model(args.out, G, D, seed=args.seed)
    log_csv = os.path.splitext(args.out)[0] + "_losses.csv"
    write_csv(log_csv, ["epoch", "d_loss", "g_loss"], history)

    zs = np.random.default_rng(0).standard_normal((32, args.latent_dim))
    samples = np.stack([G.sample(z) for z in zs])
    print(f"trained {args.epochs} epochs on {args.count} {args.corpus} images")
    print(f"  model -> {args.out}")
    print(f"  losses -> {log_csv}")
    print(f"  sample std {samples.std():.3f}, "
          f"p5/p95 {np.percentile(samples, 5):+.3f}/{np.percentile(samples, 95):+.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
