"""Latent-space completion of a corrupted carrier.

The corrupted cover (with message values already written at grille
slots) is completed by descending on the generator input z under three
terms:

    contextual   L1 between G(z) and the carrier over kept (mask=1) pixels
    perceptual   log(1 - D(G(z))), lower when D finds the image real
    message      L1 between G(z) and the carrier over grille slots

    total = contextual + lambda * perceptual + message_weight * message

All L1 terms are plain sums of absolute differences. The optimizer is
Adam on z with projection back into the [-1, 1] box after every step;
the returned latent is the best recorded iterate, not the last one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .codec import ExpandedCarrier
from .data import Rect
from .grille import PaddedGrille
from .models import D_PROB_EPS


class InpaintError(ValueError):
    pass


class OptimizationError(RuntimeError):
    """Non-finite loss or gradient; message names the offending iteration."""


@dataclass(frozen=True)
class LossWeights:
    """lambda_perceptual weights the realism term; contextual and message
    terms are fixed at weight 1 unless message_weight is overridden."""

    lambda_perceptual: float = 0.1
    message_weight: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lambda_perceptual) and self.lambda_perceptual >= 0):
            raise InpaintError(f"lambda_perceptual must be finite and >= 0, got {self.lambda_perceptual}")
        if not (math.isfinite(self.message_weight) and self.message_weight >= 0):
            raise InpaintError(f"message_weight must be finite and >= 0, got {self.message_weight}")


@dataclass(frozen=True)
class LossParts:
    contextual: float
    perceptual: float
    message: float
    total: float


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    contextual: float
    perceptual: float
    message: float
    total: float
    best_total: float


@dataclass
class OptimizationResult:
    z_hat: np.ndarray
    trace: list[TraceRow]
    best: LossParts
    budget: int
    restarts: int
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


# --- masks -------------------------------------------------------------------

def build_completion_mask(
    image_shape: tuple[int, int],
    region: Rect,
    mode: str = "soft",
    padded: PaddedGrille | None = None,
) -> np.ndarray:
    """Completion mask M: 1 = keep pixel, 0 = fill from the generator.

    soft: zero exactly on the region. hard: same, except grille-support
    pixels are forced back to 1 so the written message values survive the
    final composite verbatim.
    """
    if mode not in ("soft", "hard"):
        raise InpaintError(f"mode must be 'soft' or 'hard', got {mode!r}")
    if not region.within(image_shape):
        raise InpaintError(f"region {region} exceeds image shape {image_shape}")
    mask = np.ones(image_shape, dtype=np.uint8)
    mask[region.slices] = 0
    if mode == "hard":
        if padded is None:
            raise InpaintError("hard mode needs the padded grille")
        if padded.image_shape != tuple(image_shape):
            raise InpaintError(
                f"grille frame {padded.image_shape} != image shape {tuple(image_shape)}"
            )
        mask[padded.cells == 1] = 1
    return mask


# --- losses ------------------------------------------------------------------

def _image_t(arr, dtype) -> torch.Tensor:
    # copy: torch rejects the read-only arrays the dataclasses hand out
    return torch.as_tensor(np.array(arr, dtype=np.float64), dtype=dtype)


def _carrier_image(carrier) -> np.ndarray:
    return carrier.image if isinstance(carrier, ExpandedCarrier) else np.asarray(carrier)


def _check_spatial(name, arr, image_shape):
    if tuple(arr.shape[:2]) != tuple(image_shape[:2]):
        raise InpaintError(f"{name} shape {arr.shape} does not match image {image_shape}")


def _parts_t(gz, y_t, mask_t, carrier_t, support_t, weights, discriminator):
    """All three terms from one generator forward; tensors throughout."""
    ctx = (mask_t * (gz - y_t)).abs().sum()
    msg = (support_t * (gz - carrier_t)).abs().sum()
    p = torch.clamp(discriminator.forward_t(gz), D_PROB_EPS, 1.0 - D_PROB_EPS)
    perc = torch.log(1.0 - p)
    total = ctx + weights.lambda_perceptual * perc + weights.message_weight * msg
    return ctx, perc, msg, total


def contextual_loss(z, y, mask, generator) -> float:
    """Sum of |G(z) - y| over kept (mask=1) pixels, all channels."""
    y = np.asarray(y)
    mask = np.asarray(mask)
    _check_spatial("mask", mask, y.shape)
    with torch.no_grad():
        gz = generator.forward_t(z)
        _check_spatial("y", y, tuple(gz.shape))
        m_t = _image_t(mask, generator.dtype).unsqueeze(-1)
        return float((m_t * (gz - _image_t(y, generator.dtype))).abs().sum())


def perceptual_loss(z, discriminator, generator) -> float:
    """log(1 - D(G(z))) with D clamped into [eps, 1-eps]."""
    with torch.no_grad():
        p = torch.clamp(discriminator.forward_t(generator.forward_t(z)),
                        D_PROB_EPS, 1.0 - D_PROB_EPS)
        return float(torch.log(1.0 - p))


def message_loss(z, carrier, padded: PaddedGrille, generator) -> float:
    """Sum of |G(z) - carrier| over grille-support pixels, all channels."""
    target = _carrier_image(carrier)
    _check_spatial("carrier", target, padded.image_shape)
    with torch.no_grad():
        gz = generator.forward_t(z)
        _check_spatial("carrier", target, tuple(gz.shape))
        s_t = _image_t(padded.cells, generator.dtype).unsqueeze(-1)
        return float((s_t * (gz - _image_t(target, generator.dtype))).abs().sum())


def total_loss(z, y, mask, carrier, padded, weights: LossWeights,
               generator, discriminator) -> LossParts:
    """Weighted sum of the three terms, components reported individually."""
    target = _carrier_image(carrier)
    with torch.no_grad():
        gz = generator.forward_t(z)
        ctx, perc, msg, tot = _parts_t(
            gz,
            _image_t(y, generator.dtype),
            _image_t(np.asarray(mask), generator.dtype).unsqueeze(-1),
            _image_t(target, generator.dtype),
            _image_t(padded.cells, generator.dtype).unsqueeze(-1),
            weights,
            discriminator,
        )
    return LossParts(float(ctx), float(perc), float(msg), float(tot))


def _grad_of(loss_fn, z, generator):
    z_t = torch.as_tensor(np.asarray(z, dtype=np.float64),
                          dtype=generator.dtype).clone().requires_grad_(True)
    value = loss_fn(z_t)
    value.backward()
    return float(value.detach()), z_t.grad.detach().double().numpy()


def contextual_gradient(z, y, mask, generator):
    m_t = _image_t(np.asarray(mask), generator.dtype).unsqueeze(-1)
    y_t = _image_t(y, generator.dtype)
    return _grad_of(lambda zt: (m_t * (generator.forward_t(zt) - y_t)).abs().sum(), z, generator)


def perceptual_gradient(z, discriminator, generator):
    def fn(zt):
        p = torch.clamp(discriminator.forward_t(generator.forward_t(zt)),
                        D_PROB_EPS, 1.0 - D_PROB_EPS)
        return torch.log(1.0 - p)
    return _grad_of(fn, z, generator)


def message_gradient(z, carrier, padded, generator):
    s_t = _image_t(padded.cells, generator.dtype).unsqueeze(-1)
    t_t = _image_t(_carrier_image(carrier), generator.dtype)
    return _grad_of(lambda zt: (s_t * (generator.forward_t(zt) - t_t)).abs().sum(), z, generator)


# --- optimizer ---------------------------------------------------------------

def optimize_latent(
    y,
    mask,
    carrier,
    padded: PaddedGrille,
    weights: LossWeights,
    generator,
    discriminator,
    budget: int,
    seed: int,
    restarts: int = 1,
    learning_rate: float = 0.01,
    snapshot_at: tuple[int, ...] = (),
) -> OptimizationResult:
    """Projected Adam descent on z; returns the best recorded iterate.

    Each restart r draws its start uniformly from the latent box using
    seed + r, runs ``budget`` iterations, and shares the running best
    with the other restarts; trace rows carry a global iteration index.
    Deterministic for fixed (seed, inputs, models) on CPU.
    """
    if budget < 1:
        raise InpaintError(f"iteration budget must be at least 1, got {budget}")
    if restarts < 1:
        raise InpaintError(f"restarts must be at least 1, got {restarts}")

    dtype = generator.dtype
    y_t = _image_t(np.asarray(y), dtype)
    mask_t = _image_t(np.asarray(mask), dtype).unsqueeze(-1)
    carrier_t = _image_t(_carrier_image(carrier), dtype)
    support_t = _image_t(padded.cells, dtype).unsqueeze(-1)
    _check_spatial("mask", np.asarray(mask), tuple(y_t.shape))
    _check_spatial("carrier", _carrier_image(carrier), tuple(y_t.shape))
    snapshot_set = set(int(v) for v in snapshot_at)

    d = generator.latent_dim
    best_total = math.inf
    best_parts = None
    best_z = None
    trace: list[TraceRow] = []
    snapshots: dict[int, np.ndarray] = {}
    iteration = 0

    for restart in range(restarts):
        gen = torch.Generator().manual_seed(seed + restart)
        z = (torch.rand(d, generator=gen, dtype=dtype) * 2.0 - 1.0).requires_grad_(True)
        optimizer = torch.optim.Adam([z], lr=learning_rate)

        for _ in range(budget):
            iteration += 1
            optimizer.zero_grad()
            gz = generator.forward_t(z)
            ctx, perc, msg, tot = _parts_t(
                gz, y_t, mask_t, carrier_t, support_t, weights, discriminator
            )
            total = float(tot.detach())
            if not math.isfinite(total):
                raise OptimizationError(f"non-finite loss at iteration {iteration}: {total}")
            if total < best_total:
                best_total = total
                best_parts = LossParts(float(ctx.detach()), float(perc.detach()),
                                       float(msg.detach()), total)
                best_z = z.detach().clone()
            trace.append(TraceRow(iteration, float(ctx.detach()), float(perc.detach()),
                                  float(msg.detach()), total, best_total))
            if iteration in snapshot_set:
                snapshots[iteration] = z.detach().double().numpy().copy()

            tot.backward()
            if not torch.isfinite(z.grad).all():
                raise OptimizationError(f"non-finite gradient at iteration {iteration}")
            optimizer.step()
            with torch.no_grad():
                z.clamp_(-1.0, 1.0)

    return OptimizationResult(
        z_hat=best_z.double().numpy(),
        trace=trace,
        best=best_parts,
        budget=budget,
        restarts=restarts,
        snapshots=snapshots,
    )


def reconstruct(y, mask, z_hat, generator) -> np.ndarray:
    """Composite: kept pixels verbatim from y, completed pixels from G(z)."""
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(mask)
    _check_spatial("mask", mask, y.shape)
    gz = generator.sample(z_hat)
    if gz.shape != y.shape:
        raise InpaintError(f"generator output {gz.shape} does not match y {y.shape}")
    out = np.where(mask[:, :, None] == 1, y, gz)
    return np.clip(out, -1.0, 1.0)


def trace_to_rows(trace: list[TraceRow]) -> list[dict]:
    return [
        {
            "iteration": row.iteration,
            "L_contextual": row.contextual,
            "L_perceptual": row.perceptual,
            "L_message": row.message,
            "total": row.total,
            "best_total": row.best_total,
        }
        for row in trace
    ]
