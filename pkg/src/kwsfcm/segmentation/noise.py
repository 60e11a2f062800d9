"""Seeded noise injectors for salt & pepper, gaussian, poisson, speckle and rician noise.

Randomness comes from numpy's counter-based Philox generator keyed by (seed, stream). Every
random quantity has its own stream, and pixel k always consumes the k-th draw of each stream,
so an output depends only on (image, spec). Results are rounded half-to-even and clipped to
[0, 255].
"""

import math
from enum import IntEnum

import numpy as np
from loguru import logger

from ..models.image import MAXVAL, GrayImage
from ..models.params import InvalidParameter, NoiseKind, NoiseSpec

_SEED_MASK = (1 << 64) - 1


class InvalidLevel(InvalidParameter):
    """Raised when a noise level is negative, not finite, or above 1 for salt & pepper."""


class Stream(IntEnum):
    """Independent random streams drawn for one image."""

    CORRUPT = 1
    POLARITY = 2
    PRIMARY = 3
    QUADRATURE = 4


def pixel_stream(seed: int, stream: Stream) -> np.random.Generator:
    """Philox generator for one named stream of one seed."""
    return np.random.Generator(np.random.Philox(key=(int(stream) << 64) | (seed & _SEED_MASK)))


def validate(spec: NoiseSpec) -> None:
    if not math.isfinite(spec.level) or spec.level < 0:
        raise InvalidLevel(f"Noise level must be a non-negative number, got {spec.level}")
    if spec.kind == NoiseKind.SALT_PEPPER and spec.level > 1:
        raise InvalidLevel(f"Salt & pepper level is a probability, got {spec.level}")


def _quantize(values: np.ndarray) -> GrayImage:
    return GrayImage(np.clip(np.rint(values), 0, MAXVAL))


def add_noise(image: GrayImage, spec: NoiseSpec) -> GrayImage:
    """Return a noisy copy of `image`; deterministic given (image, spec)."""
    validate(spec)
    x = image.as_float()
    n = x.size
    match spec.kind:
        case NoiseKind.SALT_PEPPER:
            corrupt = pixel_stream(spec.seed, Stream.CORRUPT).random(n).reshape(x.shape) < spec.level
            salt = pixel_stream(spec.seed, Stream.POLARITY).random(n).reshape(x.shape) < 0.5
            noisy = np.where(corrupt, np.where(salt, float(MAXVAL), 0.0), x)
        case NoiseKind.GAUSSIAN:
            noise = pixel_stream(spec.seed, Stream.PRIMARY).normal(0.0, MAXVAL * spec.level, n)
            noisy = x + noise.reshape(x.shape)
        case NoiseKind.POISSON:
            noisy = pixel_stream(spec.seed, Stream.PRIMARY).poisson(x.ravel()).reshape(x.shape).astype(np.float64)
        case NoiseKind.SPECKLE:
            noise = pixel_stream(spec.seed, Stream.PRIMARY).normal(0.0, math.sqrt(spec.level), n)
            noisy = x * (1.0 + noise.reshape(x.shape))
        case NoiseKind.RICIAN:
            scale = MAXVAL * spec.level
            n1 = pixel_stream(spec.seed, Stream.PRIMARY).normal(0.0, scale, n).reshape(x.shape)
            n2 = pixel_stream(spec.seed, Stream.QUADRATURE).normal(0.0, scale, n).reshape(x.shape)
            noisy = np.hypot(x + n1, n2)
        case _:
            raise InvalidParameter(f"Unknown noise kind {spec.kind}")
    result = _quantize(noisy)
    changed = int(np.count_nonzero(result.pixels != image.pixels))
    logger.debug(f"{spec.kind} noise level={spec.level} seed={spec.seed}: {changed} of {n} pixels changed")
    return result
