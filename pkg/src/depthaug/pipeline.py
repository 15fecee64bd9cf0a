"""Batch machinery: manifest ingestion, the precompute stage, and
deterministic batch augmentation with paired image/depth outputs.

Parameter fitting and variance statistics happen once, up front
(run_precompute); augmentation afterwards is nothing but the closed-form
re-render plus file I/O (run_augment). Every output byte is a function of
(manifest, stats, policy, seed, n_variants) regardless of worker count:
random streams are keyed per (image, variant) and logs are stable-sorted
before writing.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .estimation import (EstimationConfig, EstimationError, aggregate_params,
                         estimate_params, read_sidecar)
from .formation import (CLAMP_TO_UNIT, ClampPolicy, ERROR_ON_OVERFLOW, FormationError,
                        NO_CLAMP, WaterParams, depth_jitter)
from .imageio import (DecodeError, DepthDecodeSpec, decode_depth, encode_depth,
                      load_image, save_image)
from .policy import (ADAPTIVE, OffsetPolicy, QUANTILE_RULE, SeedSpec, classify,
                     compute_threshold, compute_variance, sample_offset)

LOG_HEADER = "image_id,variant,dz_m,clipped_px"
_ID_PATTERN = re.compile(r"^[A-Za-z0-9._-]+$")
_UNIT_SLACK = 1e-9


class ManifestError(ValueError):
    """Manifest file unreadable or structurally invalid."""


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    image_path: Path
    depth_path: Path
    params_path: Path | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple
    decode_spec: DepthDecodeSpec = DepthDecodeSpec()
    assume_linear: bool = False


def load_manifest(path, decode_spec: DepthDecodeSpec = DepthDecodeSpec(),
                  assume_linear: bool = False) -> DatasetManifest:
    """Load a JSON-lines manifest; one {"image_id", "image", "depth",
    "params"?} object per line. Paths resolve relative to the manifest file
    and must exist; image_ids must be unique and filename-safe."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from e
    root = path.parent
    entries = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise ManifestError(f"{path}:{lineno}: each line must be a JSON object")
        for key in ("image_id", "image", "depth"):
            if key not in obj:
                raise ManifestError(f"{path}:{lineno}: missing key '{key}'")
        image_id = str(obj["image_id"])
        if not _ID_PATTERN.match(image_id):
            raise ManifestError(
                f"{path}:{lineno}: image_id {image_id!r} is not filename-safe")
        if image_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        image_path = (root / obj["image"]).resolve()
        depth_path = (root / obj["depth"]).resolve()
        params_path = (root / obj["params"]).resolve() if obj.get("params") else None
        for p in (image_path, depth_path, params_path):
            if p is not None and not p.is_file():
                raise ManifestError(f"{path}:{lineno}: referenced file missing: {p}")
        entries.append(ManifestEntry(image_id, image_path, depth_path, params_path))
    if not entries:
        raise ManifestError(f"manifest {path} contains no entries")
    return DatasetManifest(entries=tuple(entries), decode_spec=decode_spec,
                           assume_linear=assume_linear)


@dataclass(frozen=True)
class PrecomputeRecord:
    image_id: str
    params: WaterParams | None
    depth_variance: float
    z_min: float
    z_max: float
    converged: bool = False
    residual: float | None = None
    fallback_params: bool = False
    error: str | None = None

    def to_mapping(self) -> dict:
        return {
            "image_id": self.image_id,
            "params": self.params.to_mapping() if self.params is not None else None,
            "depth_variance": self.depth_variance,
            "z_min": self.z_min,
            "z_max": self.z_max,
            "converged": self.converged,
            "residual": self.residual,
            "fallback_params": self.fallback_params,
            "error": self.error,
        }

    @classmethod
    def from_mapping(cls, data: dict) -> "PrecomputeRecord":
        params = WaterParams.from_mapping(data["params"]) if data.get("params") else None
        return cls(image_id=data["image_id"], params=params,
                   depth_variance=float(data["depth_variance"]),
                   z_min=float(data["z_min"]), z_max=float(data["z_max"]),
                   converged=bool(data.get("converged", False)),
                   residual=data.get("residual"),
                   fallback_params=bool(data.get("fallback_params", False)),
                   error=data.get("error"))


@dataclass(frozen=True)
class PrecomputeResult:
    tau: float
    records: tuple            # PrecomputeRecord, in manifest order
    failures: tuple = ()      # (image_id, message) for entries with no record

    def record_map(self) -> dict:
        return {r.image_id: r for r in self.records}


def _precompute_entry(entry: ManifestEntry, manifest: DatasetManifest,
                      cfg: EstimationConfig, robust_depth_range: bool) -> PrecomputeRecord:
    depth = decode_depth(entry.depth_path, manifest.decode_spec)
    image = load_image(entry.image_path, assume_linear=manifest.assume_linear)
    if image.shape[:2] != depth.shape:
        raise DecodeError(
            f"{entry.image_id}: image {image.shape[:2]} and depth {depth.shape} "
            "dimensions differ")
    variance = compute_variance(depth)
    if robust_depth_range:
        z_min, z_max = (float(x) for x in np.percentile(depth, [1.0, 99.0]))
    else:
        z_min, z_max = float(depth.min()), float(depth.max())

    if entry.params_path is not None:
        params, payload = read_sidecar(entry.params_path)
        return PrecomputeRecord(entry.image_id, params, variance, z_min, z_max,
                                converged=bool(payload.get("converged", True)),
                                residual=payload.get("residual"))
    try:
        report = estimate_params(image, depth, cfg)
    except EstimationError as e:
        return PrecomputeRecord(entry.image_id, None, variance, z_min, z_max,
                                error=str(e))
    return PrecomputeRecord(entry.image_id, report.params, variance, z_min, z_max,
                            converged=report.converged, residual=report.residual)


def run_precompute(manifest: DatasetManifest,
                   cfg: EstimationConfig = EstimationConfig(),
                   robust_depth_range: bool = False,
                   median_fallback: bool = True,
                   threads: int = 1) -> PrecomputeResult:
    """Decode every entry, compute variance and depth range, fit or load
    parameters, then derive the variance threshold tau over the manifest.

    Per-entry failures are collected, not fatal; images whose own fit failed
    optionally receive the median of the successful fits.
    """
    def work(entry):
        try:
            return _precompute_entry(entry, manifest, cfg, robust_depth_range)
        except (DecodeError, OSError, EstimationError, FormationError) as e:
            return (entry.image_id, f"{type(e).__name__}: {e}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, manifest.entries))
    else:
        outcomes = [work(e) for e in manifest.entries]

    records = [o for o in outcomes if isinstance(o, PrecomputeRecord)]
    failures = tuple(o for o in outcomes if not isinstance(o, PrecomputeRecord))

    if median_fallback:
        fitted = [r.params for r in records if r.params is not None]
        if fitted:
            fallback = aggregate_params(fitted)
            records = [replace(r, params=fallback, fallback_params=True)
                       if r.params is None else r for r in records]

    if not records:
        raise ManifestError("precompute produced no usable records")
    tau = compute_threshold([r.depth_variance for r in records])
    return PrecomputeResult(tau=tau, records=tuple(records), failures=failures)


def write_stats(path, result: PrecomputeResult) -> None:
    """Serialize the precompute result; rerunning on unchanged inputs yields
    byte-identical output."""
    payload = {
        "tau": result.tau,
        "quantile_rule": QUANTILE_RULE,
        "records": [r.to_mapping() for r in result.records],
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def load_stats(path) -> PrecomputeResult:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"unreadable stats file {path}: {e}") from e
    if data.get("quantile_rule") != QUANTILE_RULE:
        raise ManifestError(
            f"stats file {path} uses quantile rule {data.get('quantile_rule')!r}; "
            f"this build expects {QUANTILE_RULE!r}")
    records = tuple(PrecomputeRecord.from_mapping(r) for r in data["records"])
    return PrecomputeResult(tau=float(data["tau"]), records=records)


@dataclass(frozen=True)
class AugmentRow:
    image_id: str
    variant: int
    dz: float
    clipped_px: int


@dataclass(frozen=True)
class AugmentResult:
    rows: tuple
    failures: tuple
    out_dir: Path
    log_path: Path


def _count_clipped(out_unclamped: np.ndarray, floored: np.ndarray) -> int:
    over = (out_unclamped < -_UNIT_SLACK) | (out_unclamped > 1.0 + _UNIT_SLACK)
    return int(np.count_nonzero(over.any(axis=2) | floored))


def jitter_with_accounting(image: np.ndarray, depth: np.ndarray,
                           params: WaterParams, dz: float,
                           clamp: ClampPolicy = ClampPolicy()):
    """depth_jitter plus a count of pixels touched by clamping: pixels whose
    modified depth hit the floor, or whose re-rendered intensity left [0, 1]
    in any channel (beyond float slack). Returns (image, z_m, clipped_px)."""
    depth = np.asarray(depth, dtype=np.float64)
    if clamp.mode == ERROR_ON_OVERFLOW:
        out, z_m = depth_jitter(image, depth, params, dz, clamp)
        clipped = int(np.count_nonzero(depth + dz < clamp.depth_floor))
        return out, z_m, clipped
    raw, z_m = depth_jitter(image, depth, params, dz,
                            ClampPolicy(mode=NO_CLAMP, depth_floor=clamp.depth_floor))
    floored = depth + dz < clamp.depth_floor
    clipped = _count_clipped(raw, floored)
    out = np.clip(raw, 0.0, 1.0) if clamp.mode == CLAMP_TO_UNIT else raw
    return out, z_m, clipped


def _augment_entry(entry: ManifestEntry, record: PrecomputeRecord,
                   manifest: DatasetManifest, policy: OffsetPolicy, seed: int,
                   n_variants: int, out_dir: Path, bit_depth: int,
                   clamp: ClampPolicy, depth_out_spec: DepthDecodeSpec) -> list:
    image = load_image(entry.image_path, assume_linear=manifest.assume_linear)
    depth = decode_depth(entry.depth_path, manifest.decode_spec)
    cls = classify(record.depth_variance, policy.tau)
    rows = []
    for k in range(n_variants):
        spec = SeedSpec(global_seed=seed, image_id=entry.image_id, variant=k)
        dz = sample_offset(policy, cls, record.z_min, record.z_max, spec)
        out, z_m, clipped = jitter_with_accounting(image, depth, record.params,
                                                   dz, clamp)
        stem = f"{entry.image_id}__v{k}"
        save_image(out_dir / f"{stem}.png", out, bit_depth=bit_depth,
                   assume_linear=manifest.assume_linear)
        encode_depth(out_dir / f"{stem}.depth.png", z_m, depth_out_spec)
        rows.append(AugmentRow(entry.image_id, k, dz, clipped))
    return rows


def run_augment(manifest: DatasetManifest, stats: PrecomputeResult,
                policy: OffsetPolicy, seed: int, out_dir,
                n_variants: int = 1, threads: int = 1, bit_depth: int = 8,
                clamp: ClampPolicy = ClampPolicy(),
                depth_out_spec: DepthDecodeSpec = DepthDecodeSpec()) -> AugmentResult:
    """Write n_variants jittered (image, depth) pairs per manifest entry plus
    a CSV log. No parameter fitting happens here; offsets come from streams
    keyed on (seed, image_id, variant), so outputs are identical for any
    thread count."""
    if policy.mode == ADAPTIVE and policy.tau != stats.tau:
        raise ValueError(
            f"adaptive policy tau {policy.tau} does not match stats tau {stats.tau}")
    if n_variants < 1:
        raise ValueError(f"n_variants must be >= 1, got {n_variants}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record_map = stats.record_map()

    def work(entry):
        record = record_map.get(entry.image_id)
        if record is None:
            return (entry.image_id, "missing precompute record")
        if record.params is None:
            return (entry.image_id, f"no usable parameters ({record.error})")
        try:
            return _augment_entry(entry, record, manifest, policy, seed, n_variants,
                                  out_dir, bit_depth, clamp, depth_out_spec)
        except (DecodeError, FormationError, OSError, ValueError) as e:
            return (entry.image_id, f"{type(e).__name__}: {e}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, manifest.entries))
    else:
        outcomes = [work(e) for e in manifest.entries]

    rows = []
    failures = []
    for outcome in outcomes:
        if isinstance(outcome, list):
            rows.extend(outcome)
        else:
            failures.append(outcome)
    rows.sort(key=lambda r: (r.image_id, r.variant))

    log_path = out_dir / "augment_log.csv"
    lines = [LOG_HEADER]
    lines += [f"{r.image_id},{r.variant},{r.dz!r},{r.clipped_px}" for r in rows]
    log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    meta = {
        "bit_depth": bit_depth,
        "clamp_mode": clamp.mode,
        "depth_floor": clamp.depth_floor,
        "depth_out_format": depth_out_spec.format,
        "depth_out_offset": depth_out_spec.offset,
        "depth_out_scale": depth_out_spec.scale,
        "linear": manifest.assume_linear,
        "n_variants": n_variants,
        "policy_mode": policy.mode,
        "seed": seed,
    }
    (out_dir / "augment_meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return AugmentResult(rows=tuple(rows), failures=tuple(failures),
                         out_dir=out_dir, log_path=log_path)
