"""Shared helpers for building random scenes and small rendered datasets."""

import json
from pathlib import Path

import depthaug as da


def random_params(rng, b_range=(0.05, 0.4), rate_range=(0.02, 0.3)):
    """A random valid parameter set."""
    return da.WaterParams(B=rng.uniform(*b_range, 3),
                          beta=rng.uniform(*rate_range, 3),
                          gamma=rng.uniform(*rate_range, 3))


def random_scene(rng, shape=(8, 8), z_range=(0.1, 20.0)):
    """A random in-gamut radiance image and a random depth map."""
    J = rng.uniform(0.0, 1.0, size=shape + (3,))
    z = rng.uniform(*z_range, size=shape)
    return J, z


def build_dataset(root: Path, params: da.WaterParams, specs, bit_depth=16,
                  with_sidecars=False, dark_fraction=0.04):
    """Write a small rendered dataset plus manifest under ``root``.

    ``specs`` is a list of (image_id, depth_lo, depth_hi) ramps. Returns the
    manifest path.
    """
    root.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, (image_id, zlo, zhi) in enumerate(specs):
        I, z = da.generate_synthetic(params, z_source=("ramp", zlo, zhi),
                                     shape=(32, 48), seed=500 + i,
                                     dark_fraction=dark_fraction)
        da.save_image(root / f"{image_id}.png", I, bit_depth=bit_depth)
        da.encode_depth(root / f"{image_id}.depth.png", z)
        entry = {"image_id": image_id, "image": f"{image_id}.png",
                 "depth": f"{image_id}.depth.png"}
        if with_sidecars:
            da.write_sidecar(root / f"{image_id}.params.json", image_id, params,
                             residual=0.0, converged=True)
            entry["params"] = f"{image_id}.params.json"
        lines.append(json.dumps(entry))
    manifest = root / "data.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
