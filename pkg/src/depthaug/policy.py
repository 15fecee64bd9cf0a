"""Per-image augmentation decisions: variance gating and offset sampling.

Images whose depth map barely varies sit near the veiling-light asymptote,
where a depth offset changes almost nothing; they are classified by
comparing their depth variance against tau, the 25th percentile of the
dataset's variance distribution, and low-variance images receive a zero
offset. High-variance images draw a uniform offset whose bounds scale with
the image's own depth range. A fixed-range mode instead draws every image's
offset from one configured interval.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

ADAPTIVE = "adaptive"
FIXED_RANGE = "fixed_range"
QUANTILE_RULE = "linear_interpolation"

# Default scale factors for the adaptive interval [-alpha*z_min, +beta*z_max]
# and the fixed sampling range in meters.
DEFAULT_ALPHA_SCALE = 0.5
DEFAULT_BETA_SCALE = 0.2
DEFAULT_RANGE_LO = -4.0
DEFAULT_RANGE_HI = 15.0


class VarianceClass(enum.Enum):
    HIGH = "high_variance"
    LOW = "low_variance"


@dataclass(frozen=True)
class OffsetPolicy:
    """Offset sampling rule. ``tau`` is only meaningful in adaptive mode;
    ``range_lo``/``range_hi`` only in fixed_range mode."""

    mode: str = ADAPTIVE
    alpha_scale: float = DEFAULT_ALPHA_SCALE
    beta_scale: float = DEFAULT_BETA_SCALE
    range_lo: float = DEFAULT_RANGE_LO
    range_hi: float = DEFAULT_RANGE_HI
    tau: float = 0.0

    def __post_init__(self):
        if self.mode not in (ADAPTIVE, FIXED_RANGE):
            raise ValueError(f"unknown policy mode {self.mode!r}")
        if not (np.isfinite(self.alpha_scale) and self.alpha_scale >= 0.0):
            raise ValueError(f"alpha_scale must be finite and >= 0, got {self.alpha_scale}")
        if not (np.isfinite(self.beta_scale) and self.beta_scale >= 0.0):
            raise ValueError(f"beta_scale must be finite and >= 0, got {self.beta_scale}")
        if not (np.isfinite(self.range_lo) and np.isfinite(self.range_hi)):
            raise ValueError("fixed range bounds must be finite")
        if self.range_lo > self.range_hi:
            raise ValueError(f"range_lo {self.range_lo} exceeds range_hi {self.range_hi}")
        if not (np.isfinite(self.tau) and self.tau >= 0.0):
            raise ValueError(f"tau must be finite and >= 0, got {self.tau}")


@dataclass(frozen=True)
class SeedSpec:
    """Keys one reproducible random stream to (global_seed, image_id, variant).

    The stream depends only on these three values, never on processing
    order, batch size, or worker count.
    """

    global_seed: int
    image_id: str
    variant: int = 0

    def generator(self) -> np.random.Generator:
        digest = hashlib.sha256(
            f"{self.global_seed}:{self.image_id}:{self.variant}".encode("utf-8")).digest()
        key = int.from_bytes(digest[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class VarianceStats:
    """Empirical per-image depth variances and their first-quartile threshold."""

    per_image: tuple = field(default_factory=tuple)  # (image_id, variance) pairs
    tau: float = 0.0

    @classmethod
    def from_pairs(cls, pairs) -> "VarianceStats":
        pairs = tuple((str(i), float(v)) for i, v in pairs)
        tau = compute_threshold([v for _, v in pairs])
        return cls(per_image=pairs, tau=tau)


def compute_variance(depth) -> float:
    """Population variance (divide by N) of all values in a depth map."""
    z = np.asarray(depth, dtype=np.float64)
    if z.size == 0:
        raise ValueError("cannot compute variance of an empty depth map")
    if not np.all(np.isfinite(z)):
        raise ValueError("depth map contains non-finite values")
    if float(z.min()) == float(z.max()):
        # keep constant maps at exactly 0 (np.var leaves ~1e-31 of roundoff,
        # which would be a spurious nonzero variance)
        return 0.0
    return float(np.var(z))


def compute_threshold(variances) -> float:
    """First quartile of a variance list, interpolating linearly between
    the two closest order statistics."""
    v = np.asarray(variances, dtype=np.float64)
    if v.size == 0:
        raise ValueError("cannot compute a threshold from an empty variance list")
    if not np.all(np.isfinite(v)) or v.min() < 0.0:
        raise ValueError("variances must be finite and >= 0")
    s = np.sort(v)
    pos = (s.size - 1) * 0.25
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return float(s[lo] + (s[hi] - s[lo]) * frac)


def classify(variance: float, tau: float) -> VarianceClass:
    """HIGH when variance >= tau (the boundary is inclusive), else LOW."""
    if not (np.isfinite(variance) and variance >= 0.0):
        raise ValueError(f"variance must be finite and >= 0, got {variance}")
    if not (np.isfinite(tau) and tau >= 0.0):
        raise ValueError(f"tau must be finite and >= 0, got {tau}")
    return VarianceClass.HIGH if variance >= tau else VarianceClass.LOW


def offset_interval(policy: OffsetPolicy, cls: VarianceClass,
                    z_min: float, z_max: float):
    """Sampling interval for one image, or None when the offset is exactly 0."""
    if not (np.isfinite(z_min) and np.isfinite(z_max)):
        raise ValueError(f"depth bounds must be finite, got [{z_min}, {z_max}]")
    if z_min < 0.0 or z_min > z_max:
        raise ValueError(f"need 0 <= z_min <= z_max, got [{z_min}, {z_max}]")
    if policy.mode == FIXED_RANGE:
        return policy.range_lo, policy.range_hi
    if cls is VarianceClass.LOW:
        return None
    lo = -policy.alpha_scale * z_min
    hi = policy.beta_scale * z_max
    if lo > hi:
        raise ValueError(
            f"scaled offset interval inverted: [{lo}, {hi}] from z_min={z_min}, z_max={z_max}")
    return lo, hi


def sample_offset(policy: OffsetPolicy, cls: VarianceClass,
                  z_min: float, z_max: float, seed: SeedSpec) -> float:
    """Draw one depth offset in meters; deterministic given ``seed``.

    Adaptive mode returns exactly 0.0 for low-variance images and a uniform
    draw from [-alpha_scale*z_min, +beta_scale*z_max] otherwise. Fixed-range
    mode draws from [range_lo, range_hi] regardless of classification.
    """
    interval = offset_interval(policy, cls, z_min, z_max)
    if interval is None:
        return 0.0
    lo, hi = interval
    return float(seed.generator().uniform(lo, hi))
