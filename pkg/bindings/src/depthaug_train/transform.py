"""In-process augmentation transform for training loops.

A BoundTransform freezes everything an epoch-time augmentation needs — water
parameters, the offset policy, clamp handling, the global seed, and
(optionally) the precomputed per-image statistics — so each call is a pure
function of (image, depth, image_id, variant_index). Offsets come from the
same per-(seed, image_id, variant) random streams the batch pipeline uses,
which makes the outputs bit-identical to the files the CLI writes and safe
to call concurrently from data-loader workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from depthaug import (ADAPTIVE, ClampPolicy, OffsetPolicy, PrecomputeRecord,
                      SeedSpec, WaterParams, classify, compute_variance,
                      depth_jitter, load_stats, read_sidecar, sample_offset)


def load_records(stats_path) -> Mapping[str, PrecomputeRecord]:
    """Read a precompute stats file into an image_id -> record mapping."""
    stats = load_stats(stats_path)
    return MappingProxyType(dict(stats.record_map()))


@dataclass(frozen=True)
class BoundTransform:
    """Immutable, thread-safe augmentation callable.

    ``records`` carries per-image parameters, depth variance and depth range
    from a precompute stats file; images found there reproduce the batch
    pipeline exactly. Images without a record fall back to the held
    ``params`` with variance and range measured from the depth map passed in.
    """

    params: WaterParams
    policy: OffsetPolicy
    clamp: ClampPolicy = ClampPolicy()
    seed: int = 0
    records: Mapping[str, PrecomputeRecord] = field(
        default_factory=lambda: MappingProxyType({}))

    @classmethod
    def from_sidecar(cls, sidecar_path, policy: OffsetPolicy,
                     clamp: ClampPolicy = ClampPolicy(),
                     seed: int = 0) -> "BoundTransform":
        """Bind the parameters stored in one params sidecar file."""
        params, _ = read_sidecar(sidecar_path)
        return cls(params=params, policy=policy, clamp=clamp, seed=seed)

    @classmethod
    def from_stats(cls, stats_path, policy: OffsetPolicy | None = None,
                   clamp: ClampPolicy = ClampPolicy(),
                   seed: int = 0) -> "BoundTransform":
        """Bind a whole precompute stats file.

        When ``policy`` is omitted, an adaptive policy at the file's variance
        threshold is used. An explicit adaptive policy must agree with that
        threshold.
        """
        stats = load_stats(stats_path)
        if policy is None:
            policy = OffsetPolicy(mode=ADAPTIVE, tau=stats.tau)
        elif policy.mode == ADAPTIVE and policy.tau != stats.tau:
            raise ValueError(
                f"adaptive policy tau {policy.tau} does not match stats tau "
                f"{stats.tau}")
        records = {r.image_id: r for r in stats.records if r.params is not None}
        fallback = next(iter(records.values())).params if records else None
        if fallback is None:
            raise ValueError(f"stats file {stats_path} holds no usable records")
        return cls(params=fallback, policy=policy, clamp=clamp, seed=seed,
                   records=MappingProxyType(records))

    def offset_for(self, image_id: str, variant_index: int = 0,
                   depth: np.ndarray | None = None) -> float:
        """The dz this transform will apply to (image_id, variant_index)."""
        record = self.records.get(image_id)
        if record is not None:
            variance, z_min, z_max = (record.depth_variance,
                                      record.z_min, record.z_max)
        else:
            if depth is None:
                raise ValueError(
                    f"no precomputed record for {image_id!r}; pass the depth "
                    "map so variance and range can be measured")
            z = np.asarray(depth, dtype=np.float64)
            variance = compute_variance(z)
            z_min, z_max = float(z.min()), float(z.max())
        cls_ = classify(variance, self.policy.tau)
        spec = SeedSpec(global_seed=self.seed, image_id=image_id,
                        variant=variant_index)
        return sample_offset(self.policy, cls_, z_min, z_max, spec)

    def __call__(self, image: np.ndarray, depth: np.ndarray, image_id: str,
                 variant_index: int = 0):
        """Augment one pair; returns (image, depth, dz) as fresh arrays.

        Inputs are treated as read-only; validation errors surface as the
        core library's ValueError subclasses.
        """
        record = self.records.get(image_id)
        params = record.params if record is not None else self.params
        dz = self.offset_for(image_id, variant_index, depth=depth)
        out, z_m = depth_jitter(image, depth, params, dz, self.clamp)
        return out, z_m, dz


def bound_jitter(transform: BoundTransform, image: np.ndarray,
                 depth: np.ndarray, image_id: str, variant_index: int = 0):
    """Apply a BoundTransform: returns (image, depth, dz)."""
    return transform(image, depth, image_id, variant_index)
