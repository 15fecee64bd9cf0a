"""File I/O: RGB images (with sRGB <-> linear conversion) and depth maps.

The formation model is physical, so all math runs on linear-light
intensities; files are decoded from sRGB on load and re-encoded on save
unless the data is flagged as already linear. Depth maps are 16-bit PNGs
with a scale/offset decode (meters = raw * scale + offset) or float32 TIFFs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

PNG16 = "png16"
TIFF_F32 = "tiff_f32"
_DEPTH_FORMATS = (PNG16, TIFF_F32)


class DecodeError(ValueError):
    """File unreadable or inconsistent with its declared format."""


@dataclass(frozen=True)
class DepthDecodeSpec:
    format: str = PNG16
    scale: float = 0.001   # meters per raw unit
    offset: float = 0.0    # meters

    def __post_init__(self):
        if self.format not in _DEPTH_FORMATS:
            raise DecodeError(f"unknown depth format {self.format!r}; expected {_DEPTH_FORMATS}")
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise DecodeError(f"depth scale must be finite and > 0, got {self.scale}")
        if not np.isfinite(self.offset):
            raise DecodeError(f"depth offset must be finite, got {self.offset}")


def srgb_to_linear(values: np.ndarray) -> np.ndarray:
    """IEC 61966-2-1 decode of sRGB-encoded values in [0, 1]."""
    v = np.asarray(values, dtype=np.float64)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return np.where(v <= 0.0031308,
                    12.92 * v,
                    1.055 * np.power(np.maximum(v, 0.0), 1.0 / 2.4) - 0.055)


def load_image(path, assume_linear: bool = False) -> np.ndarray:
    """Load an RGB image as float64 (H, W, 3) linear-light in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DecodeError(f"cannot read image {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    if raw.shape[2] != 3:
        raise DecodeError(f"image {path} has {raw.shape[2]} channels; expected 1, 3 or 4")
    raw = raw[:, :, ::-1]  # BGR -> RGB
    if raw.dtype == np.uint8:
        img = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        img = raw.astype(np.float64) / 65535.0
    else:
        raise DecodeError(f"image {path} has unsupported dtype {raw.dtype}")
    return img if assume_linear else srgb_to_linear(img)


def save_image(path, image: np.ndarray, bit_depth: int = 8,
               assume_linear: bool = False) -> None:
    """Quantize a linear-light image to PNG, sRGB-encoding unless flagged."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if not assume_linear:
        img = linear_to_srgb(img)
    if bit_depth == 8:
        raw = np.rint(img * 255.0).astype(np.uint8)
    elif bit_depth == 16:
        raw = np.rint(img * 65535.0).astype(np.uint16)
    else:
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    if not cv2.imwrite(str(path), raw[:, :, ::-1]):
        raise OSError(f"failed to write image {path}")


def decode_depth(path, spec: DepthDecodeSpec = DepthDecodeSpec()) -> np.ndarray:
    """Decode a depth file to meters: raw * scale + offset, validated >= 0."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise DecodeError(f"cannot read depth file {path}")
    if raw.ndim != 2:
        raise DecodeError(f"depth file {path} has shape {raw.shape}; expected single channel")
    if spec.format == PNG16:
        if raw.dtype != np.uint16:
            raise DecodeError(
                f"depth file {path} decodes to {raw.dtype}, not the uint16 "
                "declared by the png16 format")
    else:
        if raw.dtype != np.float32:
            raise DecodeError(
                f"depth file {path} decodes to {raw.dtype}, not the float32 "
                "declared by the tiff_f32 format")
        if not np.all(np.isfinite(raw)):
            raise DecodeError(f"depth file {path} contains NaN or infinite values")
    depth = raw.astype(np.float64) * spec.scale + spec.offset
    if float(depth.min()) < 0.0:
        raise DecodeError(
            f"depth file {path} decodes to negative depths "
            f"(min {float(depth.min()):.4g} m); check scale/offset")
    return depth


def encode_depth(path, depth: np.ndarray, spec: DepthDecodeSpec = DepthDecodeSpec()) -> None:
    """Write a depth map (meters) to its file form: raw = (z - offset) / scale,
    stored as a 16-bit PNG or a float32 TIFF per ``spec.format``."""
    z = np.asarray(depth, dtype=np.float64)
    raw = (z - spec.offset) / spec.scale
    if spec.format == TIFF_F32:
        if not cv2.imwrite(str(path), raw.astype(np.float32)):
            raise OSError(f"failed to write depth map {path}")
        return
    raw = np.rint(raw)
    if float(raw.min()) < 0.0 or float(raw.max()) > 65535.0:
        raise ValueError(
            f"depth values [{float(z.min()):.3g}, {float(z.max()):.3g}] m do not fit "
            f"a 16-bit encoding with scale={spec.scale}, offset={spec.offset}")
    if not cv2.imwrite(str(path), raw.astype(np.uint16)):
        raise OSError(f"failed to write depth map {path}")


def write_profile_csv(path_or_file, table: np.ndarray) -> None:
    """Write an intensity profile table as CSV with full float precision."""
    lines = ["z_m,I_r,I_g,I_b"]
    for row in table:
        lines.append(",".join(repr(float(x)) for x in row))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        Path(path_or_file).write_text(text, encoding="utf-8")
