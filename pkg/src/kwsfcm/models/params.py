"""Parameter types for every stage of the pipeline.

All parameter sets are frozen dataclasses that validate their invariants on construction and
raise InvalidParameter (a ValueError) when a value is out of range. Defaults are the usual
experimental setup: m = 2, alpha = 3.8, sigma = 150, epsilon = 0.001, a 1/16 floor on
the SUSAN response and a 9x9 homogeneity window for the edge quality factor.
"""

import math
from dataclasses import dataclass
from enum import StrEnum


class InvalidParameter(ValueError):
    """Raised when a parameter violates its documented range."""


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameter(message)


class WeightMode(StrEnum):
    """How mask neighbours are weighted."""

    CIRCULAR = "circular"  # 1 / Manhattan distance (ring weights 1, 1/2, 1/3, 1/4)
    UNIFORM = "uniform"  # plain SUSAN, every position weighs 1
    CARTESIAN = "cartesian"  # 1 / Euclidean distance


class KernelKind(StrEnum):
    GAUSSIAN_RBF = "gaussian_rbf"
    POLYNOMIAL = "polynomial"


class Algorithm(StrEnum):
    KWSFCM = "kwsfcm"
    FCM = "fcm"
    KFCM_S = "kfcm_s"


class InitMode(StrEnum):
    EQUISPACED = "equispaced"
    SEEDED_RANDOM = "seeded_random"


class NoiseKind(StrEnum):
    SALT_PEPPER = "salt_pepper"
    GAUSSIAN = "gaussian"
    POISSON = "poisson"
    SPECKLE = "speckle"
    RICIAN = "rician"


@dataclass(frozen=True)
class SusanParams:
    """Similarity response settings for the weighted SUSAN area.

    `t` of None means "solve it from min_ratio, max_dev and exponent".
    """

    t: float | None = None
    min_ratio: float = 1 / 16
    max_dev: float = 255.0
    exponent: int = 6
    weights: WeightMode = WeightMode.CIRCULAR

    def __post_init__(self) -> None:
        _require(0 < self.min_ratio < 1, f"susan.min_ratio must lie in (0, 1), got {self.min_ratio}")
        _require(self.max_dev > 0, f"susan.max_dev must be positive, got {self.max_dev}")
        _require(
            self.exponent >= 2 and self.exponent % 2 == 0, f"susan.exponent must be even and >= 2, got {self.exponent}"
        )
        _require(self.t is None or self.t > 0, f"susan.t must be positive, got {self.t}")
        object.__setattr__(self, "weights", WeightMode(self.weights))


@dataclass(frozen=True)
class KernelParams:
    """Kernel used to measure distances between intensities and prototypes."""

    kind: KernelKind = KernelKind.GAUSSIAN_RBF
    sigma: float = 150.0
    a: float = 2.0
    b: float = 1.0
    p: int = 2

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", KernelKind(self.kind))
        _require(self.sigma > 0, f"kernel.sigma must be positive, got {self.sigma}")
        _require(self.a > 0, f"kernel.a must be positive, got {self.a}")
        _require(1 <= self.b <= 2, f"kernel.b must lie in [1, 2], got {self.b}")
        _require(self.p >= 1, f"kernel.degree must be at least 1, got {self.p}")


@dataclass(frozen=True)
class ClusterParams:
    """Settings shared by every clustering algorithm."""

    c: int = 2
    m: float = 2.0
    alpha: float = 3.8
    epsilon: float = 0.001
    max_iter: int = 100
    init: InitMode = InitMode.EQUISPACED
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "init", InitMode(self.init))
        _require(self.c >= 1, f"c must be at least 1, got {self.c}")
        _require(self.m > 1, f"m must be greater than 1, got {self.m}")
        _require(self.alpha >= 0, f"alpha must be non-negative, got {self.alpha}")
        _require(self.epsilon > 0, f"epsilon must be positive, got {self.epsilon}")
        _require(self.max_iter >= 1, f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family, strength and seed.

    `level` reads as: corruption probability (salt_pepper), standard deviation as a fraction of
    full scale 255 (gaussian, rician), variance of the multiplicative factor (speckle). Poisson
    noise is generated from the image itself and ignores `level`.
    """

    kind: NoiseKind = NoiseKind.SALT_PEPPER
    level: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NoiseKind(self.kind))

    @property
    def convention(self) -> str:
        match self.kind:
            case NoiseKind.SALT_PEPPER:
                return "fraction of pixels replaced by 0 or 255"
            case NoiseKind.GAUSSIAN | NoiseKind.RICIAN:
                return "standard deviation as a fraction of 255"
            case NoiseKind.SPECKLE:
                return "variance of the multiplicative factor"
            case _:
                return "poisson draw with the pixel value as mean"


@dataclass(frozen=True)
class EqfParams:
    """Settings for the fuzzy-rule edge quality factor."""

    n: int = 9
    alpha_k: float = 1.0
    gamma: float = 80.0
    th: float = 0.1
    levels: int = 256

    def __post_init__(self) -> None:
        _require(self.n >= 3 and self.n % 2 == 1, f"eqf.n must be odd and >= 3, got {self.n}")
        _require(self.th > 0, f"eqf.th must be positive, got {self.th}")
        _require(self.levels >= 2, f"eqf.levels must be at least 2, got {self.levels}")
        _require(math.isfinite(self.gamma) and self.gamma >= 0, f"eqf.gamma must be non-negative, got {self.gamma}")
