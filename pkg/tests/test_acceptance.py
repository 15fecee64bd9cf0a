"""Acceptance gate: one test (and one printed PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import time

import numpy as np
import pytest

import depthaug as da
from depthaug import instrumentation
from depthaug.cli import main as cli_main
from support import build_dataset, random_params
from reference import ks_statistic_uniform, quantile_linear

NO_CLAMP = da.ClampPolicy(mode=da.NO_CLAMP)


def _report(name, ok, detail=""):
    suffix = f" — {detail}" if detail else ""
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{suffix}")
    assert ok, f"{name}{suffix}"


def test_identity():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        params = random_params(rng)
        J = rng.uniform(0.0, 1.0, (32, 32, 3))
        z = rng.uniform(0.1, 20.0, (32, 32))
        image = da.forward_render(J, z, params)
        out, z_m = da.depth_jitter(image, z, params, 0.0)
        worst = max(worst, float(np.max(np.abs(out - image))))
        assert np.array_equal(z_m, z)
    elapsed = time.perf_counter() - start
    _report("identity", worst <= 1e-6 and elapsed < 5.0,
            f"max abs err {worst:.3g} over 50 fixtures in {elapsed:.2f}s")


def test_inverse():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(12):
        params = random_params(rng)
        # J <= 1 - max(B) keeps the rendered image in gamut at every depth
        J = rng.uniform(0.0, 1.0 - float(params.B.max()), (24, 24, 3))
        z = rng.uniform(0.0, 20.0, (24, 24))
        recovered = da.restore(da.forward_render(J, z, params), z, params)
        worst = max(worst, float(np.max(np.abs(recovered - J))))
    _report("inverse", worst <= 1e-6,
            f"max abs err {worst:.3g} across 12 parameter settings")


def test_two_step_equivalence():
    rng = np.random.default_rng(103)
    worst = 0.0
    for _ in range(20):
        params = random_params(rng)
        J = rng.uniform(0.0, 1.0, (8, 8, 3))
        z = rng.uniform(0.5, 12.0, (8, 8))
        image = da.forward_render(J, z, params)
        dz = float(rng.uniform(-4.0, 8.0))
        direct, z_m = da.depth_jitter(image, z, params, dz, NO_CLAMP)
        two_step = da.forward_render(da.restore(image, z, params, NO_CLAMP),
                                     z_m, params, NO_CLAMP)
        worst = max(worst, float(np.max(np.abs(direct - two_step))))
    _report("two_step_equivalence", worst <= 1e-6, f"max abs err {worst:.3g}")


def test_composition():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(20):
        params = random_params(rng)
        J = rng.uniform(0.0, 1.0, (16, 16, 3))
        z = rng.uniform(5.0, 10.0, (16, 16))
        image = da.forward_render(J, z, params)
        dz1 = float(rng.uniform(-2.0, 3.0))
        dz2 = float(rng.uniform(-2.0, 3.0))
        step1, z1 = da.depth_jitter(image, z, params, dz1, NO_CLAMP)
        step2, z2 = da.depth_jitter(step1, z1, params, dz2, NO_CLAMP)
        combined, zc = da.depth_jitter(image, z, params, dz1 + dz2, NO_CLAMP)
        worst = max(worst, float(np.max(np.abs(step2 - combined))))
        assert np.max(np.abs(z2 - zc)) < 1e-12
    _report("composition", worst <= 1e-5, f"max abs err {worst:.3g}")


def test_asymptote():
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(12):
        params = random_params(rng)
        z_far = 200.0 / float(min(params.beta.min(), params.gamma.min()))
        J = rng.uniform(0.0, 1.0, (4, 4, 3))
        for scale in (1.0, 1.5, 4.0):
            image = da.forward_render(J, np.full((4, 4), z_far * scale), params)
            worst = max(worst, float(np.max(np.abs(image - params.B))))
    _report("asymptote", worst <= 1e-3,
            f"max abs deviation from veiling light {worst:.3g}")


def test_quantile():
    rng = np.random.default_rng(106)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(1, 50))
        values = rng.uniform(0.0, 100.0, n)
        if rng.random() < 0.3:
            values = np.round(values)  # force ties
        if da.compute_threshold(values) != quantile_linear(values.tolist(), 0.25):
            mismatches += 1
    exact_example = da.compute_threshold([0.0, 1.0, 2.0, 3.0])
    _report("quantile", mismatches == 0 and exact_example == 0.75,
            f"{mismatches}/1000 oracle mismatches; "
            f"threshold({{0,1,2,3}}) = {exact_example}")


def test_policy_bounds():
    n = 10_000
    crit = 1.628 / np.sqrt(n)  # 1% KS critical value
    adaptive = da.OffsetPolicy(mode=da.ADAPTIVE, alpha_scale=0.5,
                               beta_scale=0.2, tau=1.0)
    fixed = da.OffsetPolicy(mode=da.FIXED_RANGE, range_lo=-4.0, range_hi=15.0)

    adaptive_draws = np.array([
        da.sample_offset(adaptive, da.VarianceClass.HIGH, 2.0, 10.0,
                         da.SeedSpec(9, "acc", k))
        for k in range(n)])
    fixed_draws = np.array([
        da.sample_offset(fixed, da.VarianceClass.LOW, 2.0, 10.0,
                         da.SeedSpec(10, "acc", k))
        for k in range(n)])
    low_draws = [da.sample_offset(adaptive, da.VarianceClass.LOW, 2.0, 10.0,
                                  da.SeedSpec(11, "acc", k)) for k in range(100)]

    adaptive_ok = bool(np.all(adaptive_draws >= -1.0)
                       and np.all(adaptive_draws <= 2.0))
    fixed_ok = bool(np.all(fixed_draws >= -4.0) and np.all(fixed_draws <= 15.0))
    low_ok = all(dz == 0.0 for dz in low_draws)
    ks_a = ks_statistic_uniform(adaptive_draws, -1.0, 2.0)
    ks_f = ks_statistic_uniform(fixed_draws, -4.0, 15.0)
    ks_ok = ks_a < crit and ks_f < crit
    _report("policy_bounds", adaptive_ok and fixed_ok and low_ok and ks_ok,
            f"adaptive in [-1,2]: {adaptive_ok}; fixed in [-4,15]: {fixed_ok}; "
            f"low always 0: {low_ok}; KS {ks_a:.4f}/{ks_f:.4f} < {crit:.4f}")


def test_parameter_recovery():
    start = time.perf_counter()

    # noiseless: every channel of B, beta, gamma within 5% rel or 0.01 abs
    rng = np.random.default_rng(20260815)
    noiseless_worst = 0.0
    for trial in range(12):
        params = da.WaterParams(B=rng.uniform(0.05, 0.4, 3),
                                beta=rng.uniform(0.02, 0.3, 3),
                                gamma=rng.uniform(0.05, 0.3, 3))
        I, z = da.generate_synthetic(params, j_source="texture_grid",
                                     z_source=("ramp", 0.5, 10.0),
                                     shape=(192, 192), seed=1000 + trial,
                                     dark_fraction=0.022)
        report = da.estimate_params(I, z, da.EstimationConfig(dark_fraction=0.02))
        for name in ("B", "beta", "gamma"):
            err = np.abs(getattr(report.params, name) - getattr(params, name))
            tol = np.maximum(0.05 * np.abs(getattr(params, name)), 0.01)
            noiseless_worst = max(noiseless_worst, float(np.max(err / tol)))

    # 1% sensor noise: 90th-percentile errors over 100 trials
    rng = np.random.default_rng(7)
    b_errs, beta_rels = [], []
    for trial in range(100):
        params = da.WaterParams(B=rng.uniform(0.05, 0.4, 3),
                                beta=rng.uniform(0.02, 0.1, 3),
                                gamma=rng.uniform(0.05, 0.3, 3))
        I, z = da.generate_synthetic(params, j_source="texture_grid",
                                     z_source=("ramp", 0.5, 30.0),
                                     shape=(128, 128), seed=3000 + trial,
                                     noise=0.01, dark_fraction=0.055)
        report = da.estimate_params(I, z, da.EstimationConfig(dark_fraction=0.05))
        b_errs.append(float(np.max(np.abs(report.params.B - params.B))))
        beta_rels.append(float(np.max(np.abs(report.params.beta - params.beta)
                                      / params.beta)))
    b90 = float(np.percentile(b_errs, 90))
    beta90 = float(np.percentile(beta_rels, 90))
    elapsed = time.perf_counter() - start

    ok = noiseless_worst <= 1.0 and b90 <= 0.02 and beta90 <= 0.15 and elapsed < 120
    _report("parameter_recovery", ok,
            f"noiseless worst tolerance usage {noiseless_worst:.2f}; "
            f"noisy 90th pctile: B err {b90:.4f} (<=0.02), "
            f"beta rel {beta90:.3f} (<=0.15); {elapsed:.1f}s (<120s)")


def test_determinism(tmp_path, default_params):
    manifest = build_dataset(
        tmp_path, default_params,
        [("small", 4.0, 5.0), ("mid", 1.0, 9.0), ("wide", 0.5, 10.0),
         ("deep", 2.0, 12.0)],
        with_sidecars=True)
    assert cli_main(["stats", str(manifest)]) == 0
    outputs = {}
    for threads in (1, 4, 16):
        out = tmp_path / f"out_t{threads}"
        code = cli_main(["augment", str(manifest), "--out", str(out),
                         "--variants", "3", "--seed", "42",
                         "--threads", str(threads)])
        assert code == 0
        outputs[threads] = {p.name: p.read_bytes() for p in out.iterdir()}
    ok = outputs[1] == outputs[4] == outputs[16]
    _report("determinism", ok,
            f"{len(outputs[1])} files byte-identical across 1/4/16 threads")


def test_performance(tmp_path, default_params):
    rng = np.random.default_rng(107)
    J = rng.uniform(0.0, 1.0, (512, 512, 3))
    z = rng.uniform(1.0, 15.0, (512, 512))
    image = da.forward_render(J, z, default_params)
    da.depth_jitter(image, z, default_params, 1.5)  # warm-up
    best = min(
        (lambda t0: (da.depth_jitter(image, z, default_params, 1.5),
                     time.perf_counter() - t0)[1])(time.perf_counter())
        for _ in range(5))

    manifest = build_dataset(tmp_path, default_params,
                             [("a", 0.5, 10.0), ("b", 1.0, 12.0)],
                             with_sidecars=True)
    stats = da.run_precompute(da.load_manifest(manifest))
    instrumentation.reset()
    da.run_augment(da.load_manifest(manifest), stats,
                   da.OffsetPolicy(mode=da.ADAPTIVE, tau=stats.tau),
                   seed=1, out_dir=tmp_path / "out", n_variants=2)
    counters = instrumentation.snapshot()
    ok = best <= 0.020 and counters == {}
    _report("performance", ok,
            f"512x512 jitter best-of-5 {best * 1e3:.1f} ms (<=20 ms); "
            f"estimation counters during augment: {counters or 'none'}")
