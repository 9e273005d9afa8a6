"""Hide bitstrings inside images by steering a generative image completer.

A keyed binary grille marks which pixels of a damaged image region carry
payload. The payload is written into those pixels' high bit planes, a
latent-space search completes the rest of the region to look natural, and
the recipient recovers the bits by laying the same grille over the result.
No model is needed to extract.
"""

from .grille import (
    CardanGrille,
    GrilleError,
    OverlapReport,
    PaddedGrille,
    capacity,
    center_offset,
    check_overlap,
    derive_grille,
    load_grille,
    read_grille_file,
    write_grille_file,
    zero_pad,
)
from .codec import (
    CapacityError,
    CodecError,
    ExpandedCarrier,
    SecretMessage,
    StegoImage,
    bit_error_rate,
    decode_chunk,
    decoding_margin,
    dequantize,
    encode_chunk,
    expand_message,
    extract_message,
    quantize,
)
from .data import (
    CorruptedCover,
    DataError,
    ImageRecord,
    Rect,
    central_region,
    corrupt,
    ingest,
    load_cover,
    read_stego_image,
    synthesize,
    write_stego_png,
)
from .models import (
    ModelError,
    ModelFormatError,
    TrainingConfig,
    TrainingError,
    build_models,
    load_model,
    make_oracle,
    model_fingerprint,
    save_model,
    train_adversarial,
)
from .inpaint import (
    InpaintError,
    LossWeights,
    OptimizationError,
    OptimizationResult,
    build_completion_mask,
    contextual_loss,
    message_loss,
    optimize_latent,
    perceptual_loss,
    reconstruct,
    total_loss,
)
from .pipeline import (
    HideConfig,
    HideResult,
    PipelineError,
    eval_ber,
    extract,
    hide,
    run_zero_message,
    sweep_grille_size,
    write_sidecar,
)

__version__ = "0.1.0"

__all__ = [
    "CardanGrille",
    "GrilleError",
    "OverlapReport",
    "PaddedGrille",
    "capacity",
    "center_offset",
    "check_overlap",
    "derive_grille",
    "load_grille",
    "read_grille_file",
    "write_grille_file",
    "zero_pad",
    "CapacityError",
    "CodecError",
    "ExpandedCarrier",
    "SecretMessage",
    "StegoImage",
    "bit_error_rate",
    "decode_chunk",
    "decoding_margin",
    "dequantize",
    "encode_chunk",
    "expand_message",
    "extract_message",
    "quantize",
    "CorruptedCover",
    "DataError",
    "ImageRecord",
    "Rect",
    "central_region",
    "corrupt",
    "ingest",
    "load_cover",
    "read_stego_image",
    "synthesize",
    "write_stego_png",
    "ModelError",
    "ModelFormatError",
    "TrainingConfig",
    "TrainingError",
    "build_models",
    "load_model",
    "make_oracle",
    "model_fingerprint",
    "save_model",
    "train_adversarial",
    "InpaintError",
    "LossWeights",
    "OptimizationError",
    "OptimizationResult",
    "build_completion_mask",
    "contextual_loss",
    "message_loss",
    "optimize_latent",
    "perceptual_loss",
    "reconstruct",
    "total_loss",
    "HideConfig",
    "HideResult",
    "PipelineError",
    "eval_ber",
    "extract",
    "hide",
    "run_zero_message",
    "sweep_grille_size",
    "write_sidecar",
]
