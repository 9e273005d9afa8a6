"""Generative backends: a small convolutional adversarial pair plus a
deterministic low-dimensional oracle used for analytic tests.

Both generator families share one duck-typed surface the rest of the
package relies on:

    latent_dim          input dimension d
    image_shape         (H, W, C)
    dtype               torch dtype of the forward pass
    forward_t(z)        1-D latent tensor -> (H, W, C) tensor in [-1, 1]
    sample(z)           numpy convenience wrapper around forward_t

Discriminators expose ``forward_t(image_hwc) -> scalar tensor`` whose raw
output lies in (0, 1); callers clamp to [D_PROB_EPS, 1 - D_PROB_EPS]
before taking logs.
"""

from __future__ import annotations

import hashlib
import io
import logging
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

log = logging.getLogger(__name__)

D_PROB_EPS = 1e-7

FORMAT_VERSION = 1


class ModelError(ValueError):
    """Bad latent/image shapes or unusable training configuration."""


class ModelFormatError(ValueError):
    """Container file is corrupted, wrong version, or wrong shape."""


class TrainingError(RuntimeError):
    """Adversarial training produced a non-finite loss."""


def _as_z_tensor(z, latent_dim: int, dtype) -> torch.Tensor:
    z_t = torch.as_tensor(np.asarray(z, dtype=np.float64), dtype=dtype).ravel()
    if z_t.numel() != latent_dim:
        raise ModelError(f"latent vector has {z_t.numel()} entries, model expects {latent_dim}")
    return z_t


# ---------------------------------------------------------------------------
# Convolutional adversarial pair
# ---------------------------------------------------------------------------

class ConvGenerator(nn.Module):
    """Strided transpose-conv generator, tanh output. 32x32 or 64x64."""

    family = "adversarial-conv"

    def __init__(self, latent_dim: int, image_shape: tuple[int, int, int], feature_maps: int = 64):
        super().__init__()
        H, W, C = image_shape
        if H != W or H not in (32, 64):
            raise ModelError(f"supported output sizes are 32x32 and 64x64, got {H}x{W}")
        self.latent_dim = latent_dim
        self.image_shape = (H, W, C)
        self.feature_maps = feature_maps
        self.dtype = torch.float32

        f = feature_maps
        layers = [
            nn.ConvTranspose2d(latent_dim, 4 * f, 4, 1, 0, bias=False),
            nn.BatchNorm2d(4 * f),
            nn.ReLU(inplace=True),  # 4x4
            nn.ConvTranspose2d(4 * f, 2 * f, 4, 2, 1, bias=False),
            nn.BatchNorm2d(2 * f),
            nn.ReLU(inplace=True),  # 8x8
            nn.ConvTranspose2d(2 * f, f, 4, 2, 1, bias=False),
            nn.BatchNorm2d(f),
            nn.ReLU(inplace=True),  # 16x16
        ]
        if H == 64:
            layers += [
                nn.ConvTranspose2d(f, f, 4, 2, 1, bias=False),
                nn.BatchNorm2d(f),
                nn.ReLU(inplace=True),  # 32x32
            ]
        layers += [nn.ConvTranspose2d(f, C, 4, 2, 1, bias=False), nn.Tanh()]
        self.net = nn.Sequential(*layers)
        self.apply(_dcgan_init)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """(N, d) -> (N, C, H, W)"""
        return self.net(z.view(z.shape[0], self.latent_dim, 1, 1))

    def forward_t(self, z) -> torch.Tensor:
        z_t = _as_z_tensor(z, self.latent_dim, self.dtype) if not torch.is_tensor(z) else z
        out = self.forward(z_t.view(1, -1))
        return out[0].permute(1, 2, 0)

    def sample(self, z) -> np.ndarray:
        with torch.no_grad():
            return self.forward_t(_as_z_tensor(z, self.latent_dim, self.dtype)).double().numpy()


class ConvDiscriminator(nn.Module):
    """Strided conv discriminator, sigmoid probability-of-real output."""

    def __init__(self, image_shape: tuple[int, int, int], feature_maps: int = 64):
        super().__init__()
        H, W, C = image_shape
        if H != W or H not in (32, 64):
            raise ModelError(f"supported input sizes are 32x32 and 64x64, got {H}x{W}")
        self.image_shape = (H, W, C)
        self.feature_maps = feature_maps
        self.dtype = torch.float32

        f = feature_maps
        layers = [
            nn.Conv2d(C, f, 4, 2, 1, bias=False),
            nn.LeakyReLU(0.2, inplace=True),  # H/2
            nn.Conv2d(f, 2 * f, 4, 2, 1, bias=False),
            nn.BatchNorm2d(2 * f),
            nn.LeakyReLU(0.2, inplace=True),  # H/4
            nn.Conv2d(2 * f, 4 * f, 4, 2, 1, bias=False),
            nn.BatchNorm2d(4 * f),
            nn.LeakyReLU(0.2, inplace=True),  # H/8
        ]
        if H == 64:
            layers += [
                nn.Conv2d(4 * f, 4 * f, 4, 2, 1, bias=False),
                nn.BatchNorm2d(4 * f),
                nn.LeakyReLU(0.2, inplace=True),  # 4x4
            ]
        layers += [nn.Conv2d(4 * f, 1, 4, 1, 0, bias=False), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)
        self.apply(_dcgan_init)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(N, C, H, W) -> (N,) probabilities"""
        return self.net(x).view(-1)

    def forward_t(self, image_hwc: torch.Tensor) -> torch.Tensor:
        H, W, C = self.image_shape
        if tuple(image_hwc.shape) != (H, W, C):
            raise ModelError(f"image shape {tuple(image_hwc.shape)} != model input {(H, W, C)}")
        return self.forward(image_hwc.permute(2, 0, 1).unsqueeze(0))[0]


def _dcgan_init(module):
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.normal_(module.weight.data, 0.0, 0.02)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.normal_(module.weight.data, 1.0, 0.02)
        nn.init.constant_(module.bias.data, 0.0)


def build_models(latent_dim: int, image_shape: tuple[int, int, int], seed: int,
                 feature_maps: int = 64) -> tuple[ConvGenerator, ConvDiscriminator]:
    """Seeded untrained pair; same seed gives identical initial weights."""
    torch.manual_seed(seed)
    G = ConvGenerator(latent_dim, image_shape, feature_maps)
    D = ConvDiscriminator(image_shape, feature_maps)
    G.eval()
    D.eval()
    return G, D


# ---------------------------------------------------------------------------
# Analytic oracle pair
# ---------------------------------------------------------------------------

class OracleGenerator:
    """G(z) = tanh(A z + b) with fixed seeded A, b; float64, smooth everywhere.

    Exists so the losses and the optimizer can be checked against
    closed-form gradients and brute-force search without training noise.
    """

    family = "oracle-smooth"

    def __init__(self, A: torch.Tensor, b: torch.Tensor, image_shape: tuple[int, int, int]):
        H, W, C = image_shape
        if A.shape[0] != H * W * C or b.shape[0] != H * W * C:
            raise ModelError("oracle weight shapes do not match image shape")
        self.A = A
        self.b = b
        self.latent_dim = A.shape[1]
        self.image_shape = (H, W, C)
        self.dtype = torch.float64

    def forward_t(self, z) -> torch.Tensor:
        z_t = _as_z_tensor(z, self.latent_dim, self.dtype) if not torch.is_tensor(z) else z
        return torch.tanh(self.A @ z_t + self.b).reshape(self.image_shape)

    def sample(self, z) -> np.ndarray:
        with torch.no_grad():
            return self.forward_t(_as_z_tensor(z, self.latent_dim, self.dtype)).numpy()

    def jacobian(self, z) -> np.ndarray:
        """Closed form d vec(G)/dz = diag(1 - tanh(Az+b)^2) @ A, as numpy."""
        z_t = _as_z_tensor(z, self.latent_dim, self.dtype)
        pre = self.A @ z_t + self.b
        sat = 1.0 - torch.tanh(pre) ** 2
        return (sat.unsqueeze(1) * self.A).numpy()


class OracleDiscriminator:
    """D(x) = sigmoid(<w, x> + c) with fixed seeded w, c; float64."""

    family = "oracle-smooth"

    def __init__(self, w: torch.Tensor, c: torch.Tensor, image_shape: tuple[int, int, int]):
        self.w = w
        self.c = c
        self.image_shape = image_shape
        self.dtype = torch.float64

    def forward_t(self, image_hwc: torch.Tensor) -> torch.Tensor:
        if tuple(image_hwc.shape) != tuple(self.image_shape):
            raise ModelError(
                f"image shape {tuple(image_hwc.shape)} != model input {self.image_shape}"
            )
        return torch.sigmoid((self.w * image_hwc.reshape(-1)).sum() + self.c)


def make_oracle(latent_dim: int, image_shape: tuple[int, int, int],
                seed: int) -> tuple[OracleGenerator, OracleDiscriminator]:
    """Seeded analytic pair. Weight scales keep tanh/logistic away from
    saturation over the latent box so gradients stay informative."""
    if latent_dim < 1:
        raise ModelError(f"latent_dim must be at least 1, got {latent_dim}")
    H, W, C = image_shape
    n = H * W * C
    g = torch.Generator().manual_seed(seed)
    A = torch.randn(n, latent_dim, generator=g, dtype=torch.float64) * (1.5 / np.sqrt(latent_dim))
    b = torch.randn(n, generator=g, dtype=torch.float64) * 0.3
    w = torch.randn(n, generator=g, dtype=torch.float64) / np.sqrt(n)
    c = torch.randn((), generator=g, dtype=torch.float64) * 0.1
    return OracleGenerator(A, b, image_shape), OracleDiscriminator(w, c, image_shape)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def sample(generator, z) -> np.ndarray:
    return generator.sample(z)


def discriminate(discriminator, image) -> float:
    """Probability-of-real in [D_PROB_EPS, 1 - D_PROB_EPS]."""
    img_t = torch.as_tensor(np.asarray(image, dtype=np.float64), dtype=discriminator.dtype)
    with torch.no_grad():
        p = discriminator.forward_t(img_t)
    return float(torch.clamp(p, D_PROB_EPS, 1.0 - D_PROB_EPS))


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainingConfig:
    epochs: int
    batch_size: int = 32
    lr_generator: float = 2e-4
    lr_discriminator: float = 2e-4
    latent_dim: int = 100
    seed: int = 0
    dataset_ref: str = ""
    feature_maps: int = 64
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 0:
            raise ModelError("epochs must be non-negative")
        for name in ("batch_size", "lr_generator", "lr_discriminator", "latent_dim", "feature_maps"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")


def train_adversarial(dataset: np.ndarray, config: TrainingConfig):
    """Standard minimax training of the conv pair on (N, H, W, C) images.

    Returns (generator, discriminator, log) where log holds one dict per
    epoch with mean generator/discriminator losses. Deterministic for a
    fixed seed on CPU. epochs=0 returns the seeded untrained pair.
    """
    data = np.asarray(dataset, dtype=np.float32)
    if data.ndim != 4 or data.shape[0] == 0:
        raise ModelError(f"dataset must be a non-empty (N, H, W, C) array, got {data.shape}")
    N, H, W, C = data.shape

    G, D = build_models(config.latent_dim, (H, W, C), config.seed, config.feature_maps)
    if config.epochs == 0:
        return G, D, []

    G.train()
    D.train()
    bce = nn.BCELoss()
    opt_g = torch.optim.Adam(G.parameters(), lr=config.lr_generator, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(D.parameters(), lr=config.lr_discriminator, betas=(0.5, 0.999))
    shuffler = np.random.default_rng(config.seed)
    images = torch.from_numpy(data).permute(0, 3, 1, 2)

    history = []
    for epoch in range(config.epochs):
        order = shuffler.permutation(N)
        d_losses, g_losses = [], []
        for start in range(0, N, config.batch_size):
            batch = images[order[start : start + config.batch_size]]
            n = batch.shape[0]
            real_labels = torch.ones(n)
            fake_labels = torch.zeros(n)

            noise = torch.randn(n, config.latent_dim)
            fake = G(noise)

            opt_d.zero_grad()
            loss_d = bce(D(batch), real_labels) + bce(D(fake.detach()), fake_labels)
            loss_d.backward()
            opt_d.step()

            opt_g.zero_grad()
            loss_g = bce(D(fake), real_labels)
            loss_g.backward()
            opt_g.step()

            d_losses.append(float(loss_d.detach()))
            g_losses.append(float(loss_g.detach()))

        entry = {
            "epoch": epoch,
            "d_loss": float(np.mean(d_losses)),
            "g_loss": float(np.mean(g_losses)),
        }
        if not (np.isfinite(entry["d_loss"]) and np.isfinite(entry["g_loss"])):
            raise TrainingError(f"non-finite loss at epoch {epoch}: {entry}")
        history.append(entry)
        log.info("epoch %d: d_loss=%.4f g_loss=%.4f", epoch, entry["d_loss"], entry["g_loss"])

        if config.checkpoint_every and (epoch + 1) % config.checkpoint_every == 0:
            if config.checkpoint_dir is None:
                raise ModelError("checkpoint_every set but checkpoint_dir missing")
            os.makedirs(config.checkpoint_dir, exist_ok=True)
            save_model(
                os.path.join(config.checkpoint_dir, f"epoch_{epoch + 1:04d}.pt"),
                G, D, seed=config.seed,
            )

    G.eval()
    D.eval()
    return G, D, history


# ---------------------------------------------------------------------------
# Container format: versioned header + state dicts + content digest
# ---------------------------------------------------------------------------

def _state_digest(*state_dicts) -> str:
    h = hashlib.sha256()
    for sd in state_dicts:
        for key in sorted(sd):
            h.update(key.encode())
            h.update(np.ascontiguousarray(sd[key].detach().cpu().numpy()).tobytes())
    return h.hexdigest()


def model_fingerprint(G, D=None) -> str:
    """Short stable identifier of the weights, for run metadata."""
    if isinstance(G, OracleGenerator):
        h = hashlib.sha256(G.A.numpy().tobytes() + G.b.numpy().tobytes())
        return "oracle-" + h.hexdigest()[:16]
    dicts = [G.state_dict()] + ([D.state_dict()] if D is not None else [])
    return _state_digest(*dicts)[:16]


def save_model(path, G: ConvGenerator, D: ConvDiscriminator, seed: int = 0) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "family": G.family,
        "latent_dim": G.latent_dim,
        "image_shape": list(G.image_shape),
        "feature_maps": G.feature_maps,
        "seed": seed,
        "digest": _state_digest(G.state_dict(), D.state_dict()),
        "generator_state": G.state_dict(),
        "discriminator_state": D.state_dict(),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> tuple[ConvGenerator, ConvDiscriminator, dict]:
    """Load a container; rejects version mismatch and corrupted payloads."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise ModelFormatError(f"unreadable model container {path}: {exc}") from exc
    for field in ("format_version", "family", "latent_dim", "image_shape",
                  "digest", "generator_state", "discriminator_state"):
        if field not in payload:
            raise ModelFormatError(f"model container missing field {field!r}")
    if payload["format_version"] != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported container version {payload['format_version']}")
    if payload["family"] != ConvGenerator.family:
        raise ModelFormatError(f"unsupported model family {payload['family']!r}")
    digest = _state_digest(payload["generator_state"], payload["discriminator_state"])
    if digest != payload["digest"]:
        raise ModelFormatError("integrity check failed: parameter digest mismatch")

    shape = tuple(payload["image_shape"])
    G = ConvGenerator(payload["latent_dim"], shape, payload["feature_maps"])
    D = ConvDiscriminator(shape, payload["feature_maps"])
    G.load_state_dict(payload["generator_state"])
    D.load_state_dict(payload["discriminator_state"])
    G.eval()
    D.eval()
    meta = {k: payload[k] for k in ("format_version", "family", "latent_dim",
                                    "image_shape", "feature_maps", "seed")}
    return G, D, meta
