"""Identity-perceptual proactive watermarking for face images."""

from .chaos import ChaoticParams, KeyStream, decrypt, derive_key, encrypt, logistic_sequence, xor_apply
from .codec import CodecConfig, capacity, embed, extract, psnr, ssim
from .errors import (CapacityError, CollisionError, ConfigError, EmptyRegistryError, IdmarkError,
                     InputError, LengthMismatchError, PreconditionError, RegistryError)
from .identity import (IdentityEmbedding, ProjectionModel, fit_projection, generate_watermark,
                       plain_watermark, read_embeddings, synthesize_embeddings, write_embeddings)
from .manipulations import ManipulationSpec, SwapChannelSpec, apply, preset, swap_channel
from .registry import Registry, RegistryRecord
from .verify import CollisionReport, DetectionReport, bit_accuracy, collision_check, detect, roc_auc
from .watermark import BinaryWatermark

__version__ = "0.1.0"
