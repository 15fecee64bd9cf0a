import json
from pathlib import Path

import numpy as np
import pytest

import depthaug as da


@pytest.fixture()
def default_params():
    return da.WaterParams(B=[0.15, 0.2, 0.25], beta=[0.08, 0.1, 0.12],
                          gamma=[0.1, 0.12, 0.15])


@pytest.fixture()
def dataset(tmp_path, default_params):
    """Ten rendered image/depth pairs (two low-variance) with exact sidecars,
    a manifest, and a precompute stats file."""
    specs = [("low_a", 4.0, 4.6), ("low_b", 6.0, 6.5)] + [
        (f"scene{i}", 0.5 + 0.3 * i, 8.0 + i) for i in range(8)]
    rows = []
    for i, (image_id, zlo, zhi) in enumerate(specs):
        image, z = da.generate_synthetic(default_params,
                                         z_source=("ramp", zlo, zhi),
                                         shape=(24, 32), seed=900 + i)
        da.save_image(tmp_path / f"{image_id}.png", image, bit_depth=16)
        da.encode_depth(tmp_path / f"{image_id}.depth.png", z)
        da.write_sidecar(tmp_path / f"{image_id}.params.json", image_id,
                         default_params, residual=0.0, converged=True)
        rows.append({"image_id": image_id, "image": f"{image_id}.png",
                     "depth": f"{image_id}.depth.png",
                     "params": f"{image_id}.params.json"})
    manifest_path = tmp_path / "data.jsonl"
    manifest_path.write_text("\n".join(json.dumps(r) for r in rows) + "\n",
                             encoding="utf-8")
    manifest = da.load_manifest(manifest_path)
    stats = da.run_precompute(manifest)
    stats_path = tmp_path / "data.stats.json"
    da.write_stats(stats_path, stats)
    return {"root": tmp_path, "manifest_path": manifest_path,
            "manifest": manifest, "stats": stats, "stats_path": stats_path,
            "image_ids": [s[0] for s in specs]}
