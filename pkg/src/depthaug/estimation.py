"""Water parameter estimation from a single (image, depth) pair.

Two-stage least-squares fit of the formation model:

1. Backscatter: the darkest pixels in each depth bin approximate pure
   veiling light, so fitting b(z) = B * (1 - exp(-gamma * z)) to per-bin
   dark means recovers B and gamma per channel (damped Gauss-Newton with a
   bounded parameterization: B through a logistic, gamma through an exp).
2. Attenuation: after subtracting the fitted backscatter, the direct signal
   is J * exp(-beta * z); regressing its log against depth gives beta per
   channel as the negative slope.

Fits for different images are independent and may run concurrently; within
one fit the per-channel solves are independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import instrumentation
from .formation import WaterParams, as_depth, as_image, _check_pair

_BETA_FLOOR = 1e-9


class EstimationError(ValueError):
    """Input does not support a parameter fit (e.g. no depth spread)."""


@dataclass(frozen=True)
class EstimationConfig:
    n_bins: int = 10
    dark_fraction: float = 0.02
    min_bin_count: int = 20
    log_floor: float = 1e-4
    min_direct_signal: float = 1e-3  # below ~1/4 of an 8-bit step: no signal
    max_iterations: int = 200
    step_tolerance: float = 1e-8
    init_gamma: float = 0.1
    min_depth_spread: float = 1e-6      # meters; below this no bins can form
    residual_subsample: int = 100_000   # pixel cap for the final residual

    def __post_init__(self):
        if self.n_bins < 4:
            raise ValueError(f"n_bins must be >= 4, got {self.n_bins}")
        if not (0.0 < self.dark_fraction <= 0.1):
            raise ValueError(f"dark_fraction must be in (0, 0.1], got {self.dark_fraction}")
        if self.min_bin_count < 1:
            raise ValueError("min_bin_count must be >= 1")
        if self.log_floor <= 0.0:
            raise ValueError(f"log_floor must be > 0, got {self.log_floor}")
        if self.min_direct_signal < 0.0:
            raise ValueError(
                f"min_direct_signal must be >= 0, got {self.min_direct_signal}")


@dataclass(frozen=True)
class DepthBinStats:
    """Per-depth-bin dark-pixel statistics. Arrays are (n_bins, ...) with
    unused bins (too few pixels) masked out by ``used``."""

    edges: np.ndarray        # (n_bins + 1,) bin edges, meters
    z_dark: np.ndarray       # (n_bins, 3) mean depth of the selected dark pixels
    dark: np.ndarray         # (n_bins, 3) mean intensity of the darkest fraction
    log_residual: np.ndarray  # (n_bins, 3) mean ln(max(I - dark, eps)) in the bin
    counts: np.ndarray       # (n_bins,) pixels per bin
    used: np.ndarray         # (n_bins,) bool

    @property
    def n_used(self) -> int:
        return int(np.count_nonzero(self.used))


@dataclass(frozen=True)
class BackscatterFit:
    B: np.ndarray            # (3,)
    gamma: np.ndarray        # (3,)
    residual: float          # RMS over used bins and channels
    iterations: np.ndarray   # (3,) int
    converged: np.ndarray    # (3,) bool
    gamma_weak: np.ndarray   # (3,) bool, saturated regime: gamma barely identified


@dataclass(frozen=True)
class AttenuationFit:
    beta: np.ndarray             # (3,)
    residual: float              # RMS of log-space regression residuals
    valid_fraction: np.ndarray   # (3,) share of pixels with positive direct signal
    nonpositive_slope: np.ndarray  # (3,) bool, regression found no decay


@dataclass(frozen=True)
class FitReport:
    params: WaterParams
    residual: float                       # RMS of self-consistency re-render
    stage_residuals: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    gamma_weak: tuple = (False, False, False)
    notes: tuple = ()


def bin_dark_pixels(image, depth, n_bins: int = 10, dark_fraction: float = 0.02,
                    min_bin_count: int = 20, log_floor: float = 1e-4) -> DepthBinStats:
    """Partition pixels into equal-width depth bins and record, per channel,
    the mean of each bin's darkest ``dark_fraction`` of intensities."""
    I = as_image(image)
    z = as_depth(depth)
    _check_pair(I, z)
    if n_bins < 4:
        raise EstimationError(f"n_bins must be >= 4, got {n_bins}")
    if not (0.0 < dark_fraction <= 0.1):
        raise EstimationError(f"dark_fraction must be in (0, 0.1], got {dark_fraction}")

    z_lo, z_hi = float(z.min()), float(z.max())
    if not math.isfinite(z_lo) or not math.isfinite(z_hi):
        raise EstimationError("depth map contains non-finite values")
    if z_hi - z_lo <= 0.0:
        raise EstimationError(
            "depth range too narrow: fewer than 4 usable bins (constant depth?)")

    edges = np.linspace(z_lo, z_hi, n_bins + 1)
    flat_z = z.ravel()
    flat_i = I.reshape(-1, 3)
    bin_idx = np.clip(np.searchsorted(edges, flat_z, side="right") - 1, 0, n_bins - 1)

    z_dark = np.full((n_bins, 3), np.nan)
    dark = np.full((n_bins, 3), np.nan)
    log_residual = np.full((n_bins, 3), np.nan)
    counts = np.zeros(n_bins, dtype=np.int64)
    used = np.zeros(n_bins, dtype=bool)

    for b in range(n_bins):
        sel = np.flatnonzero(bin_idx == b)
        counts[b] = sel.size
        if sel.size < min_bin_count:
            continue
        k = max(1, int(math.ceil(dark_fraction * sel.size)))
        zb = flat_z[sel]
        for c in range(3):
            vals = flat_i[sel, c]
            darkest = np.argpartition(vals, k - 1)[:k]
            dark[b, c] = float(vals[darkest].mean())
            z_dark[b, c] = float(zb[darkest].mean())
            log_residual[b, c] = float(
                np.log(np.maximum(vals - dark[b, c], log_floor)).mean())
        used[b] = True

    if int(used.sum()) < 4:
        raise EstimationError(
            f"only {int(used.sum())} usable bins (need >= 4); "
            "depth range too narrow or too few pixels per bin")
    return DepthBinStats(edges=edges, z_dark=z_dark, dark=dark,
                         log_residual=log_residual, counts=counts, used=used)


def _fit_saturating_channel(z, d, b0, g0, max_iter, step_tol):
    """Damped Gauss-Newton fit of B*(1 - exp(-g*z)) to points (z, d).

    Parameterized as B = expit(u), g = exp(w) so the bounds B in (0,1),
    g > 0 hold by construction. Returns (B, g, rms, iterations, converged).
    """
    # |u| <= 30 keeps expit(u) strictly inside (0, 1) in float64; the w
    # bounds keep g in [~1e-9, ~400] 1/m. Without these, noisy data on a
    # weakly identified curve can push B to exactly 1.0.
    u_lim = 30.0
    w_lo, w_hi = math.log(1e-9), 6.0
    u = min(max(math.log(b0 / (1.0 - b0)), -u_lim), u_lim)
    w = min(max(math.log(g0), w_lo), w_hi)

    def evaluate(u, w):
        B = 1.0 / (1.0 + math.exp(-u))
        g = math.exp(w)
        decay = np.exp(-g * z)
        r = B * (1.0 - decay) - d
        return r, B, g, decay

    r, B, g, decay = evaluate(u, w)
    cost = float(r @ r)
    lam = 1e-3
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        jac = np.column_stack([B * (1.0 - B) * (1.0 - decay), B * g * z * decay])
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        for _ in range(25):
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                step = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            u_new = min(max(u + step[0], -u_lim), u_lim)
            w_new = min(max(w + step[1], w_lo), w_hi)
            applied = max(abs(u_new - u), abs(w_new - w))
            r_new, B_new, g_new, decay_new = evaluate(u_new, w_new)
            cost_new = float(r_new @ r_new)
            if cost_new <= cost:
                u, w = u_new, w_new
                r, B, g, decay, cost = r_new, B_new, g_new, decay_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        if applied < step_tol:
            converged = True
            break
    rms = math.sqrt(cost / z.size)
    return B, g, rms, iterations, converged


def fit_backscatter(stats: DepthBinStats, init: WaterParams | None = None,
                    cfg: EstimationConfig = EstimationConfig()) -> BackscatterFit:
    """Fit the saturating veiling-light curve to per-bin dark values."""
    instrumentation.count("fit_backscatter")
    if stats.n_used < 4:
        raise EstimationError(f"need >= 4 usable bins, got {stats.n_used}")
    used = stats.used
    B = np.zeros(3)
    gamma = np.zeros(3)
    iterations = np.zeros(3, dtype=np.int64)
    converged = np.zeros(3, dtype=bool)
    gamma_weak = np.zeros(3, dtype=bool)
    sq_sum = 0.0
    n_pts = 0
    for c in range(3):
        z = stats.z_dark[used, c]
        d = stats.dark[used, c]
        if init is not None:
            b0 = float(np.clip(init.B[c], 1e-3, 1.0 - 1e-3))
            g0 = float(max(init.gamma[c], 1e-6))
        else:
            # Far-field dark pixels approximate the veiling light itself.
            far = int(np.argmax(z))
            b0 = float(np.clip(d[far], 1e-3, 1.0 - 1e-3))
            g0 = cfg.init_gamma
        B[c], gamma[c], rms, iterations[c], converged[c] = _fit_saturating_channel(
            z, d, b0, g0, cfg.max_iterations, cfg.step_tolerance)
        # Saturated regime: the curve is already flat at the nearest bin, so
        # the data carry almost no information about gamma.
        gamma_weak[c] = math.exp(-gamma[c] * float(z.min())) < 0.05
        sq_sum += rms * rms * z.size
        n_pts += z.size
    return BackscatterFit(B=B, gamma=gamma, residual=math.sqrt(sq_sum / n_pts),
                          iterations=iterations, converged=converged,
                          gamma_weak=gamma_weak)


def fit_attenuation(image, depth, B, gamma,
                    cfg: EstimationConfig = EstimationConfig()) -> AttenuationFit:
    """Per channel, regress the log of the backscatter-subtracted signal
    against depth; beta is the negative slope, clamped positive."""
    instrumentation.count("fit_attenuation")
    I = as_image(image)
    z = as_depth(depth)
    _check_pair(I, z)
    B = np.asarray(B, dtype=np.float64).reshape(3)
    gamma = np.asarray(gamma, dtype=np.float64).reshape(3)

    flat_z = z.ravel()
    if float(flat_z.max() - flat_z.min()) < cfg.min_depth_spread:
        raise EstimationError("zero depth spread: attenuation regression undefined")

    direct = I - B * (1.0 - np.exp(-z[..., None] * gamma))
    beta = np.zeros(3)
    valid_fraction = np.zeros(3)
    nonpositive = np.zeros(3, dtype=bool)
    sq_sum = 0.0
    n_pts = 0
    for c in range(3):
        vals = direct[..., c].ravel()
        # Pixels whose backscatter-subtracted value sits below the signal
        # threshold are treated as unusable: they are dominated by residuals
        # of the subtraction (true dark pixels land at ~0 +/- fitting error)
        # and would enter the regression as enormous negative log outliers.
        valid = vals > cfg.min_direct_signal
        valid_fraction[c] = float(valid.mean())
        if valid_fraction[c] < 0.5:
            raise EstimationError(
                f"channel {c}: only {valid_fraction[c]:.1%} of pixels have positive "
                "backscatter-subtracted intensity (inconsistent B/gamma?)")
        zv = flat_z[valid]
        if float(zv.max() - zv.min()) < cfg.min_depth_spread:
            raise EstimationError(f"channel {c}: valid pixels span no depth range")
        y = np.log(np.maximum(vals[valid], cfg.log_floor))
        slope, intercept = np.polyfit(zv, y, 1)
        if -slope <= 0.0:
            nonpositive[c] = True
        beta[c] = max(-float(slope), _BETA_FLOOR)
        res = y - (slope * zv + intercept)
        sq_sum += float(res @ res)
        n_pts += res.size
    return AttenuationFit(beta=beta, residual=math.sqrt(sq_sum / n_pts),
                          valid_fraction=valid_fraction, nonpositive_slope=nonpositive)


def _self_consistency_residual(I, z, params: WaterParams, cap: int) -> float:
    """RMS gap between the image and its clamp-restored re-render on a
    strided pixel subsample; wrong parameters push the restored radiance out
    of gamut and the clamp makes the round trip lossy."""
    flat_i = I.reshape(-1, 3)
    flat_z = z.ravel()
    stride = max(1, flat_z.size // cap)
    zi = flat_z[::stride]
    ii = flat_i[::stride]
    back = params.B * (1.0 - np.exp(-zi[:, None] * params.gamma))
    att = np.exp(-zi[:, None] * params.beta)
    restored = np.clip((ii - back) / att, 0.0, 1.0)
    gap = restored * att + back - ii
    return float(np.sqrt(np.mean(gap * gap)))


def estimate_params(image, depth, cfg: EstimationConfig = EstimationConfig()) -> FitReport:
    """Run the two-stage fit and assemble a full parameter report."""
    instrumentation.count("estimate_params")
    I = as_image(image)
    z = as_depth(depth)
    _check_pair(I, z)
    if float(z.max() - z.min()) < cfg.min_depth_spread:
        raise EstimationError(
            f"depth spread {float(z.max() - z.min()):.3g} m below the "
            f"{cfg.min_depth_spread:.3g} m minimum")

    stats = bin_dark_pixels(I, z, n_bins=cfg.n_bins, dark_fraction=cfg.dark_fraction,
                            min_bin_count=cfg.min_bin_count, log_floor=cfg.log_floor)
    back = fit_backscatter(stats, cfg=cfg)
    atten = fit_attenuation(I, z, back.B, back.gamma, cfg=cfg)

    params = WaterParams(B=back.B, beta=atten.beta, gamma=back.gamma)
    residual = _self_consistency_residual(I, z, params, cfg.residual_subsample)
    notes = []
    if not bool(back.converged.all()):
        notes.append("backscatter fit hit the iteration cap on some channel")
    if bool(atten.nonpositive_slope.any()):
        notes.append("attenuation regression found a non-positive decay slope")
    return FitReport(
        params=params,
        residual=residual,
        stage_residuals={"backscatter": back.residual, "attenuation": atten.residual},
        iterations=int(back.iterations.sum()),
        converged=bool(back.converged.all()) and not bool(atten.nonpositive_slope.any()),
        gamma_weak=tuple(bool(x) for x in back.gamma_weak),
        notes=tuple(notes),
    )


def aggregate_params(params_list) -> WaterParams:
    """Elementwise median over fitted parameter sets; fallback for images
    whose own fit failed."""
    params_list = list(params_list)
    if not params_list:
        raise EstimationError("cannot aggregate an empty parameter list")
    return WaterParams(
        B=np.median([p.B for p in params_list], axis=0),
        beta=np.median([p.beta for p in params_list], axis=0),
        gamma=np.median([p.gamma for p in params_list], axis=0),
    )


def write_sidecar(path, image_id: str, params: WaterParams,
                  residual: float = float("nan"), converged: bool = False) -> None:
    """Write the per-image parameter sidecar JSON."""
    payload = {
        "image_id": image_id,
        "B": params.B.tolist(),
        "beta": params.beta.tolist(),
        "gamma": params.gamma.tolist(),
        "residual": float(residual),
        "converged": bool(converged),
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def read_sidecar(path) -> tuple[WaterParams, dict]:
    """Read a parameter sidecar; returns the params and the raw payload."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise EstimationError(f"unreadable parameter sidecar {path}: {e}") from e
    return WaterParams.from_mapping(data), data
