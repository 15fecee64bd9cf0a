"""Closed-form pixel math for the underwater image formation model.

A channel intensity observed through water is the scene radiance attenuated
exponentially along the line of sight plus a veiling-light term that
saturates with distance:

    I_c = J_c * exp(-beta_c * z) + B_c * (1 - exp(-gamma_c * z))

All functions here are pure: inputs are read-only, outputs freshly
allocated, and the math runs in float64. Images are (H, W, 3) arrays of
linear-light intensities in [0, 1] (R, G, B order); depth maps are (H, W)
arrays in meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CLAMP_TO_UNIT = "clamp_to_unit"
ERROR_ON_OVERFLOW = "error_on_overflow"
NO_CLAMP = "none"
_CLAMP_MODES = (CLAMP_TO_UNIT, ERROR_ON_OVERFLOW, NO_CLAMP)

# Smallest admissible attenuation/backscatter rate; below this the
# exponentials degenerate to constants and the model is meaningless.
_MIN_RATE = 1e-9
# exp() overflows past ~709.78 in float64.
_EXP_ARG_LIMIT = 700.0
# Slack for "values in [0,1]" preconditions, so chained unclamped results
# that drift by a few ulp are still accepted.
_UNIT_SLACK = 1e-9


class FormationError(ValueError):
    """Invalid input or an unrepresentable result in the formation math."""


class GamutError(FormationError):
    """Raised in error_on_overflow mode when intensities leave [0, 1]."""


@dataclass(frozen=True)
class WaterParams:
    """Per-channel water optics: veiling light B, attenuation beta (1/m),
    backscatter saturation rate gamma (1/m)."""

    B: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        for name in ("B", "beta", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (3,):
                raise FormationError(f"{name} must have 3 channel values, got shape {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise FormationError(f"{name} contains non-finite values: {arr}")
            object.__setattr__(self, name, arr)
        if np.any(self.B <= 0.0) or np.any(self.B >= 1.0):
            raise FormationError(f"veiling light B must lie strictly inside (0, 1), got {self.B}")
        if np.any(self.beta < _MIN_RATE):
            raise FormationError(f"attenuation beta must be >= {_MIN_RATE} 1/m, got {self.beta}")
        if np.any(self.gamma < _MIN_RATE):
            raise FormationError(f"backscatter gamma must be >= {_MIN_RATE} 1/m, got {self.gamma}")

    @classmethod
    def from_mapping(cls, data) -> "WaterParams":
        try:
            return cls(B=np.asarray(data["B"], dtype=np.float64),
                       beta=np.asarray(data["beta"], dtype=np.float64),
                       gamma=np.asarray(data["gamma"], dtype=np.float64))
        except KeyError as e:
            raise FormationError(f"water parameter mapping is missing key {e}") from None

    def to_mapping(self) -> dict:
        return {"B": self.B.tolist(), "beta": self.beta.tolist(), "gamma": self.gamma.tolist()}


@dataclass(frozen=True)
class ClampPolicy:
    """How out-of-gamut intensities and sub-floor modified depths are handled.

    Modes: clamp_to_unit clips intensities into [0, 1]; error_on_overflow
    raises GamutError instead; none passes values through untouched (useful
    for exact algebraic round trips). depth_floor is the minimum modified
    depth in meters; offsets can otherwise drive depths negative and blow up
    later restores.
    """

    mode: str = CLAMP_TO_UNIT
    depth_floor: float = 0.01

    def __post_init__(self):
        if self.mode not in _CLAMP_MODES:
            raise FormationError(f"unknown clamp mode {self.mode!r}; expected one of {_CLAMP_MODES}")
        if not np.isfinite(self.depth_floor) or self.depth_floor < 0.0:
            raise FormationError(f"depth_floor must be finite and >= 0, got {self.depth_floor}")


def as_image(image) -> np.ndarray:
    """Coerce to a float64 (H, W, 3) array without copying float64 input."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormationError(f"image must be (H, W, 3) with H, W >= 1, got shape {arr.shape}")
    return arr


def as_depth(depth) -> np.ndarray:
    arr = np.asarray(depth, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormationError(f"depth map must be (H, W) with H, W >= 1, got shape {arr.shape}")
    return arr


def _check_pair(image: np.ndarray, depth: np.ndarray) -> None:
    if image.shape[:2] != depth.shape:
        raise FormationError(
            f"image {image.shape[:2]} and depth map {depth.shape} dimensions differ")


def _check_unit_range(arr: np.ndarray, name: str) -> None:
    mn, mx = arr.min(), arr.max()
    # NaN makes either comparison false, so non-finite input fails too.
    if not (mn >= -_UNIT_SLACK and mx <= 1.0 + _UNIT_SLACK):
        raise FormationError(f"{name} values must be finite and in [0, 1] (min={mn}, max={mx})")


def _check_depth_values(z: np.ndarray) -> None:
    mn, mx = z.min(), z.max()
    if not (mn >= 0.0 and mx < np.inf):
        raise FormationError(f"depth values must be finite and >= 0 (min={mn}, max={mx})")


def _finish_intensity(out: np.ndarray, clamp: ClampPolicy, op: str) -> np.ndarray:
    mn, mx = out.min(), out.max()
    if not (mn > -np.inf and mx < np.inf):
        raise FormationError(f"{op} produced non-finite intensities (inconsistent parameters?)")
    if clamp.mode == NO_CLAMP:
        return out
    if clamp.mode == ERROR_ON_OVERFLOW and not (mn >= -_UNIT_SLACK and mx <= 1.0 + _UNIT_SLACK):
        n_over = int(np.count_nonzero((out < -_UNIT_SLACK) | (out > 1.0 + _UNIT_SLACK)))
        raise GamutError(f"{op} left [0, 1] on {n_over} values (min={mn}, max={mx})")
    np.clip(out, 0.0, 1.0, out=out)
    return out


def backscatter(z: np.ndarray, params: WaterParams) -> np.ndarray:
    """Veiling-light component B_c * (1 - exp(-gamma_c * z)) as (H, W, 3)."""
    return params.B * (1.0 - np.exp(-z[..., None] * params.gamma))


def forward_render(image, depth, params: WaterParams,
                   clamp: ClampPolicy = ClampPolicy()) -> np.ndarray:
    """Render a restored (in-air) image as it would be observed through water.

    ``image`` holds the scene radiance J in [0, 1]; ``depth`` the per-pixel
    distance in meters. Returns the observed intensity I.
    """
    J = as_image(image)
    z = as_depth(depth)
    _check_pair(J, z)
    _check_unit_range(J, "image")
    _check_depth_values(z)
    out = J * np.exp(-z[..., None] * params.beta) + backscatter(z, params)
    return _finish_intensity(out, clamp, "forward_render")


def restore(image, depth, params: WaterParams,
            clamp: ClampPolicy = ClampPolicy()) -> np.ndarray:
    """Invert the formation model: recover scene radiance J from observed I."""
    I = as_image(image)
    z = as_depth(depth)
    _check_pair(I, z)
    _check_unit_range(I, "image")
    _check_depth_values(z)
    if float(z.max()) * float(params.beta.max()) > _EXP_ARG_LIMIT:
        raise FormationError(
            "restore would overflow exp(beta * z); depth too large for these parameters")
    out = (I - backscatter(z, params)) * np.exp(z[..., None] * params.beta)
    return _finish_intensity(out, clamp, "restore")


def depth_jitter(image, depth, params: WaterParams, dz: float,
                 clamp: ClampPolicy = ClampPolicy()) -> tuple[np.ndarray, np.ndarray]:
    """Re-render an observed image as if every pixel sat ``dz`` meters away.

    Equivalent to restoring at the original depth and re-rendering at
    z_m = max(z + dz, depth_floor), folded into a single pass:

        I_mod = (I - B*(1 - exp(-gamma*z))) * exp(-beta*(z_m - z))
                + B*(1 - exp(-gamma*z_m))

    Returns the modified image and the modified depth map.
    """
    I = as_image(image)
    z = as_depth(depth)
    _check_pair(I, z)
    _check_unit_range(I, "image")
    _check_depth_values(z)
    dz = float(dz)
    if not np.isfinite(dz):
        raise FormationError(f"depth offset must be finite, got {dz}")

    z_m = z + dz
    floored = float(z_m.min()) < clamp.depth_floor
    if floored:
        z_m = np.maximum(z_m, clamp.depth_floor)

    if floored:
        attenuation = np.exp((z - z_m)[..., None] * params.beta)
    else:
        # z_m - z is uniformly dz, so the attenuation factor is scalar per
        # channel; this saves a full-frame exp on the hot path.
        attenuation = np.exp(-dz * params.beta)

    out = (I - backscatter(z, params)) * attenuation + backscatter(z_m, params)
    return _finish_intensity(out, clamp, "depth_jitter"), z_m


def intensity_profile(params: WaterParams, j0, z_range: tuple[float, float],
                      n_samples: int) -> np.ndarray:
    """Observed intensity of a fixed radiance ``j0`` swept over a depth range.

    Returns an (n_samples, 4) array with columns (z, I_r, I_g, I_b), sampled
    at evenly spaced depths. For j0 above the veiling light the profile
    decays toward B with increasing depth.
    """
    j0 = np.broadcast_to(np.asarray(j0, dtype=np.float64), (3,)).copy()
    if not np.all(np.isfinite(j0)) or j0.min() < 0.0 or j0.max() > 1.0:
        raise FormationError(f"j0 must be finite per-channel intensities in [0, 1], got {j0}")
    lo, hi = float(z_range[0]), float(z_range[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi or lo < 0.0:
        raise FormationError(f"invalid depth range [{lo}, {hi}]")
    n_samples = int(n_samples)
    if n_samples < 2:
        raise FormationError(f"n_samples must be >= 2, got {n_samples}")
    z = np.linspace(lo, hi, n_samples)
    intensities = j0 * np.exp(-z[:, None] * params.beta) \
        + params.B * (1.0 - np.exp(-z[:, None] * params.gamma))
    return np.column_stack([z, intensities])
