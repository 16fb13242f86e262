"""Tests for the Monte Carlo detection chain.

Statistical claims are tested against the per-bin Gaussian model
[[S1, X], [X, S2]]*df directly, and against closed-form DSP identities for
the square-law detector; tolerances are quoted in standard errors.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

import pairnoise.detection as det
import pairnoise.junction as jn
from pairnoise.detection import (
    McConfig,
    McResult,
    MomentAccumulator,
    apply_crosstalk,
    calibrate_spur,
    detect_power,
    estimate_g2,
    expected_g2,
    predict_chain,
    run_experiment,
    synthesize_envelopes,
)
from pairnoise.errors import ConfigError, InputError, ModelViolationError
from pairnoise.junction import DetectionBand, Drive, Junction
from pairnoise.special import CONSTANTS

SAMPLE = Junction(resistance=23.6, electron_temperature=0.020)
PEAK = Drive(v_dc=16e-6, v_ac=22e-6, f0=11.6e9)
BANDS = (
    DetectionBand(f_center=4.4e9, bandwidth=2e8),
    DetectionBand(f_center=7.2e9, bandwidth=2e8),
)


def small_config(**overrides) -> McConfig:
    base = dict(
        junction=SAMPLE,
        drive=PEAK,
        bands=BANDS,
        bins_per_band=8,
        amp_noise_temperature=0.1,
        n_windows=1 << 11,
        seed=0,
    )
    base.update(overrides)
    return McConfig(**base)


# ---------------------------------------------------------------- validation


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(bins_per_band=4)
    with pytest.raises(ConfigError):
        small_config(n_windows=0)
    with pytest.raises(ConfigError):
        small_config(amp_noise_temperature=-0.1)
    with pytest.raises(ConfigError):
        small_config(detector_time_constant=0.0)
    with pytest.raises(ConfigError):
        small_config(sample_rate=0.0)
    with pytest.raises(ConfigError):
        small_config(crosstalk=((1.0, 0.0), (0.0,)))
    with pytest.raises(ConfigError):
        small_config(crosstalk=((1.0, float("nan")), (0.0, 1.0)))
    with pytest.raises(ConfigError):
        small_config(source_mode="vacuum")
    with pytest.raises(ConfigError):
        small_config(source_mode=det.SOURCE_THERMAL, t_source=0.0)


def test_config_band_geometry_validation():
    with pytest.raises(ConfigError, match="share one bandwidth"):
        small_config(
            bands=(
                DetectionBand(f_center=4.4e9, bandwidth=2e8),
                DetectionBand(f_center=7.2e9, bandwidth=3e8),
            )
        )
    with pytest.raises(ConfigError, match="overlap"):
        small_config(
            drive=Drive(v_dc=16e-6, v_ac=22e-6, f0=11.6e9),
            bands=(
                DetectionBand(f_center=5.79e9, bandwidth=2e8),
                DetectionBand(f_center=5.81e9, bandwidth=2e8),
            ),
        )
    with pytest.raises(ConfigError, match="sum-frequency"):
        small_config(
            bands=(
                DetectionBand(f_center=4.4e9, bandwidth=2e8),
                DetectionBand(f_center=7.3e9, bandwidth=2e8),
            )
        )
    # The thermal control has no sum-frequency constraint of its own; it
    # reuses the measurement geometry as-is.
    cfg = small_config(source_mode=det.SOURCE_THERMAL, t_source=0.1)
    assert cfg.t_source == 0.1


# ----------------------------------------------------------------- synthesis


def test_synthesize_envelopes_deterministic():
    cfg = small_config()
    e1a, e2a = synthesize_envelopes(cfg, 5)
    e1b, e2b = synthesize_envelopes(cfg, 5)
    np.testing.assert_array_equal(e1a, e1b)
    np.testing.assert_array_equal(e2a, e2b)
    e1c, _ = synthesize_envelopes(cfg, 6)
    assert not np.array_equal(e1a, e1c)


def test_synthesize_envelopes_window_range():
    cfg = small_config(n_windows=4)
    with pytest.raises(InputError):
        synthesize_envelopes(cfg, 4)
    with pytest.raises(InputError):
        synthesize_envelopes(cfg, -1)


def test_synthesize_envelopes_spectral_support():
    # The envelope's discrete spectrum must live only on the band's bins.
    cfg = small_config()
    env1, env2 = synthesize_envelopes(cfg, 0)
    m = 4 * cfg.bins_per_band
    assert env1.shape == (m,)
    chain = det._build_chain(cfg)
    spec1 = np.fft.fft(env1) / m
    spec2 = np.fft.fft(env2) / m
    on1 = np.zeros(m, dtype=bool)
    on1[chain.k_idx % m] = True
    on2 = np.zeros(m, dtype=bool)
    on2[(-chain.k_idx) % m] = True
    assert np.all(np.abs(spec1[~on1]) < 1e-12 * np.max(np.abs(spec1)))
    assert np.all(np.abs(spec2[~on2]) < 1e-12 * np.max(np.abs(spec2)))


def test_synthesis_batching_is_bit_identical():
    cfg = small_config()
    chain = det._build_chain(cfg)
    a1, a2 = det._draw_bin_amplitudes(chain, cfg.seed, 0, 8, include_amplifier=False)
    for w in range(8):
        b1, b2 = det._draw_bin_amplitudes(chain, cfg.seed, w, 1, include_amplifier=False)
        np.testing.assert_array_equal(a1[w], b1[0])
        np.testing.assert_array_equal(a2[w], b2[0])
    # and the public per-window API agrees with the batch
    e1, e2 = synthesize_envelopes(cfg, 3)
    env1, env2 = det._envelopes_from_bins(chain, a1[3:4], a2[3:4])
    np.testing.assert_array_equal(e1, env1[0])
    np.testing.assert_array_equal(e2, env2[0])


def test_bin_statistics_match_model():
    # Sample moments of the drawn bin amplitudes against [[S1,X],[X,S2]]*df.
    cfg = small_config()
    chain = det._build_chain(cfg)
    n = 100_000
    a1, a2 = det._draw_bin_amplitudes(chain, 123, 0, n, include_amplifier=False)
    tol = 4.0 / math.sqrt(n)

    v1_hat = np.mean(np.abs(a1) ** 2, axis=0)
    v2_hat = np.mean(np.abs(a2) ** 2, axis=0)
    np.testing.assert_allclose(v1_hat, chain.v1_source, rtol=tol)
    np.testing.assert_allclose(v2_hat, chain.v2_source, rtol=tol)

    # anomalous correlator <a1 a2> = X*df; <a1 conj(a2)> = 0
    cross = np.mean(a1 * a2, axis=0)
    bound = 4.0 * np.sqrt(chain.v1_source * chain.v2_source / n)
    assert np.all(np.abs(cross.real - chain.u) < bound)
    assert np.all(np.abs(cross.imag) < bound)
    plain = np.mean(a1 * np.conj(a2), axis=0)
    assert np.all(np.abs(plain) < bound)

    # means vanish
    assert np.all(np.abs(np.mean(a1, axis=0)) < 4.0 * np.sqrt(chain.v1_source / n))


def test_amplifier_noise_adds_variance():
    cfg = small_config(amp_noise_temperature=5.0)
    chain = det._build_chain(cfg)
    n = 50_000
    a1_amp, _ = det._draw_bin_amplitudes(chain, 7, 0, n, include_amplifier=True)
    v1_hat = np.mean(np.abs(a1_amp) ** 2, axis=0)
    np.testing.assert_allclose(v1_hat, chain.v1, rtol=4.0 / math.sqrt(n))
    assert chain.v_amp == pytest.approx(
        2.0 * CONSTANTS.k_B * 5.0 / SAMPLE.resistance * chain.df, rel=1e-15
    )


# ----------------------------------------------------------------- detection


def test_detect_power_unit_dc_gain():
    env = np.full(64, 3.0 - 4.0j)
    out = detect_power(env, 1e-9, 4e8, 4e8)
    np.testing.assert_allclose(out, 25.0, rtol=1e-12)


def test_detect_power_zero_input():
    out = detect_power(np.zeros(32, dtype=complex), 1e-9, 1e8, 1e8)
    np.testing.assert_allclose(out, 0.0, atol=1e-30)


def test_detect_power_validation():
    with pytest.raises(InputError):
        detect_power(np.ones(8, dtype=complex), 1e-9, 1e8, 1e8)
    with pytest.raises(InputError):
        detect_power(np.ones(32, dtype=complex), 0.0, 1e8, 1e8)
    with pytest.raises(InputError):
        detect_power(np.ones(32, dtype=complex), 1e-9, 0.0, 1e8)


def test_detect_power_decimation_stride():
    env = np.ones(64, dtype=complex)
    assert detect_power(env, 1e-9, 1e8, 4e8).shape == (16,)
    assert detect_power(env, 1e-9, 4e8, 4e8).shape == (64,)
    # requesting a higher rate than available keeps every sample
    assert detect_power(env, 1e-9, 1e9, 4e8).shape == (64,)


def test_detect_power_noise_variance_matches_filter():
    # White |A|^2 noise through the single-pole filter: the variance drops
    # by sum|H_k|^2 / n over the DFT grid (circular convolution identity).
    rng = np.random.default_rng(42)
    n = 4096
    rate = 1e9
    tau = 2e-9
    env = (rng.normal(size=n) + 1j * rng.normal(size=n)) / math.sqrt(2.0)
    power = np.abs(env) ** 2
    out = detect_power(env, tau, rate, rate)
    freqs = np.fft.fftfreq(n, d=1.0 / rate)
    h2 = 1.0 / (1.0 + (2.0 * math.pi * freqs * tau) ** 2)
    expected_ratio = float(np.sum(h2)) / n
    got_ratio = out.var() / power.var()
    assert got_ratio == pytest.approx(expected_ratio, rel=0.15)


# ----------------------------------------------------------------- crosstalk


def test_apply_crosstalk_identity_exact():
    rng = np.random.default_rng(0)
    p1, p2 = rng.normal(size=(2, 100))
    q1, q2 = apply_crosstalk(p1, p2, ((1.0, 0.0), (0.0, 1.0)))
    np.testing.assert_array_equal(q1, p1)
    np.testing.assert_array_equal(q2, p2)


def test_apply_crosstalk_linear_algebra_exact():
    rng = np.random.default_rng(1)
    p1, p2 = rng.normal(size=(2, 257))
    m = ((1.0, 0.013), (0.027, 0.98))
    q1, q2 = apply_crosstalk(p1, p2, m)
    np.testing.assert_array_equal(q1, m[0][0] * p1 + m[0][1] * p2)
    np.testing.assert_array_equal(q2, m[1][0] * p1 + m[1][1] * p2)


def test_apply_crosstalk_validation():
    with pytest.raises(InputError):
        apply_crosstalk(np.ones(4), np.ones(4), ((1.0, 0.0),))
    with pytest.raises(InputError):
        apply_crosstalk(np.ones(4), np.ones(4), ((1.0, np.inf), (0.0, 1.0)))


# ---------------------------------------------------------------- estimation


def test_estimate_g2_matches_numpy_cov():
    rng = np.random.default_rng(2)
    p1 = rng.normal(size=4001)
    p2 = 0.3 * p1 + rng.normal(size=4001)
    res = estimate_g2(p1, p2)
    ref = np.cov(p1, p2, ddof=1)
    assert res.g2_est == pytest.approx(ref[0, 1], rel=1e-12)
    assert res.var_p1 == pytest.approx(ref[0, 0], rel=1e-12)
    assert res.var_p2 == pytest.approx(ref[1, 1], rel=1e-12)
    assert res.mean_p1 == pytest.approx(p1.mean(), rel=1e-12)
    assert res.g2_err == pytest.approx(
        math.sqrt((ref[0, 0] * ref[1, 1] + ref[0, 1] ** 2) / 4001), rel=1e-12
    )
    assert res.n_samples_used == 4001


def test_estimate_g2_identical_streams():
    rng = np.random.default_rng(3)
    p = rng.normal(size=1000)
    res = estimate_g2(p, p)
    assert res.g2_est == pytest.approx(res.var_p1, rel=1e-12)


def test_estimate_g2_validation():
    with pytest.raises(InputError):
        estimate_g2(np.ones(3), np.ones(4))
    with pytest.raises(InputError):
        estimate_g2(np.ones(1), np.ones(1))


def test_estimate_g2_error_bar_calibration():
    # For independent streams, |cov| < 4 sigma should essentially always
    # hold: P(|z| > 4) ~ 6e-5, so over 10^4 trials >= 6 failures is a
    # 5-sigma-level fluke.
    rng = np.random.default_rng(4)
    failures = 0
    for _ in range(10_000):
        p1, p2 = rng.normal(size=(2, 256))
        res = estimate_g2(p1, p2)
        if abs(res.g2_est) > 4.0 * res.g2_err:
            failures += 1
    assert failures <= 6


def test_moment_accumulator_merge_equals_single_pass():
    rng = np.random.default_rng(5)
    p1 = rng.normal(size=10_001)
    p2 = rng.normal(size=10_001) + 0.1 * p1
    whole = MomentAccumulator()
    whole.update(p1, p2)
    pieces = MomentAccumulator()
    for lo, hi in [(0, 17), (17, 5000), (5000, 5001), (5001, 10_001)]:
        part = MomentAccumulator()
        part.update(p1[lo:hi], p2[lo:hi])
        pieces.merge(part)
    a, b = whole.result(), pieces.result()
    assert b.mean_p1 == pytest.approx(a.mean_p1, rel=1e-12)
    assert b.var_p1 == pytest.approx(a.var_p1, rel=1e-12)
    assert b.var_p2 == pytest.approx(a.var_p2, rel=1e-12)
    assert b.g2_est == pytest.approx(a.g2_est, rel=1e-12)


def test_moment_accumulator_merge_with_empty():
    acc = MomentAccumulator()
    acc.merge(MomentAccumulator())
    assert acc.n == 0
    acc.update(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    acc.merge(MomentAccumulator())
    assert acc.n == 2
    with pytest.raises(InputError):
        MomentAccumulator().result()


# ------------------------------------------------------------ the experiment


def test_run_experiment_deterministic_and_thread_independent():
    cfg = small_config(n_windows=1 << 12)
    a = run_experiment(cfg, threads=1)
    b = run_experiment(cfg, threads=1)
    c = run_experiment(cfg, threads=4)
    assert a == b
    assert a == c
    with pytest.raises(ConfigError):
        run_experiment(cfg, threads=0)


def test_run_experiment_seed_changes_result():
    a = run_experiment(small_config(seed=0))
    b = run_experiment(small_config(seed=1))
    assert a.g2_est != b.g2_est


def test_batch_size_only_reshuffles_merges():
    # Partial-moment merging must not depend on the batch partition beyond
    # float reassociation (window relabeling tolerance).
    cfg = small_config(n_windows=3000)
    ref = run_experiment(cfg)
    original = det._BATCH
    det._BATCH = 512
    try:
        alt = run_experiment(cfg)
    finally:
        det._BATCH = original
    assert alt.g2_est == pytest.approx(ref.g2_est, rel=1e-10)
    assert alt.mean_p1 == pytest.approx(ref.mean_p1, rel=1e-10)
    assert alt.var_p2 == pytest.approx(ref.var_p2, rel=1e-10)
    assert alt.n_samples_used == ref.n_samples_used


def test_mc_matches_analytic_prediction_small():
    cfg = small_config(n_windows=1 << 15)
    res = run_experiment(cfg, threads=4)
    pred = predict_chain(cfg)
    assert abs(res.g2_est - pred.g2) < 4.0 * res.g2_err
    assert res.mean_p1 == pytest.approx(pred.mean_p1, rel=0.01)
    assert res.mean_p2 == pytest.approx(pred.mean_p2, rel=0.01)
    assert res.var_p1 == pytest.approx(pred.var_p1, rel=0.05)
    assert res.var_p2 == pytest.approx(pred.var_p2, rel=0.05)


def test_mean_power_energy_bookkeeping():
    # Kelvin-referred mean power = band-averaged source temperature plus
    # amplifier temperature, within 1%.
    cfg = small_config(n_windows=1 << 12, amp_noise_temperature=0.3)
    res = run_experiment(cfg, threads=2)
    chain = det._build_chain(cfg)
    b1 = cfg.bands[0]
    scale = SAMPLE.resistance / (2.0 * CONSTANTS.k_B)

    def t_of(f):
        return jn.photo_assisted_s(SAMPLE, PEAK, f) * scale

    grid1 = b1.f_center + chain.k_idx * chain.df
    grid2 = PEAK.f0 - grid1
    expected1 = float(np.mean(t_of(grid1))) + 0.3
    expected2 = float(np.mean(t_of(grid2))) + 0.3
    assert res.mean_p1 == pytest.approx(expected1, rel=0.01)
    assert res.mean_p2 == pytest.approx(expected2, rel=0.01)


def test_error_bar_scales_with_window_count():
    base = small_config(n_windows=1 << 10)
    more = small_config(n_windows=1 << 14)
    err_ratio = run_experiment(base).g2_err / run_experiment(more).g2_err
    assert err_ratio == pytest.approx(4.0, rel=0.2)


def test_thermal_control_expectation_is_zero():
    cfg = small_config(source_mode=det.SOURCE_THERMAL, t_source=0.1, n_windows=1 << 14)
    assert expected_g2(cfg) == 0.0
    res = run_experiment(cfg, threads=4)
    assert abs(res.g2_est) < 4.0 * res.g2_err


def test_psd_guard_raises_on_inconsistent_model(monkeypatch):
    def fake_x(j, d, f):
        return np.full(np.shape(f), 1e-20)

    monkeypatch.setattr(jn, "x_correlator", fake_x)
    with pytest.raises(ModelViolationError, match="positive semidefinite"):
        det._build_chain(small_config())


def test_psd_guard_raises_on_nonpositive_density(monkeypatch):
    monkeypatch.setattr(jn, "photo_assisted_s", lambda j, d, f: np.zeros(np.shape(f)))
    with pytest.raises(ModelViolationError, match="positive in-band"):
        det._build_chain(small_config())


# ---------------------------------------------------------------- spur logic


def test_calibrate_spur_ideal_control_is_identity():
    meas = McResult(1.0, 1.0, 5e-4, 1e-4, 0.04, 0.05, 1000)
    ctrl = McResult(1.0, 1.0, 0.0, 2e-4, 0.04, 0.05, 1000)
    out = calibrate_spur(ctrl, meas)
    assert out.g2_est == meas.g2_est
    assert out.g2_err == pytest.approx(math.sqrt(1e-4**2 + 2e-4**2), rel=1e-12)


def test_calibrate_spur_scales_by_variance_ratio():
    meas = McResult(1.0, 1.0, 5e-4, 1e-4, 0.16, 0.25, 1000)
    ctrl = McResult(1.0, 1.0, 2e-4, 0.5e-4, 0.04, 0.0625, 1000)
    out = calibrate_spur(ctrl, meas)
    scale = math.sqrt((0.16 * 0.25) / (0.04 * 0.0625))
    assert out.g2_est == pytest.approx(5e-4 - scale * 2e-4, rel=1e-12)
    assert out.g2_err == pytest.approx(
        math.sqrt(1e-4**2 + (scale * 0.5e-4) ** 2), rel=1e-12
    )


def test_calibrate_spur_rejects_dead_control():
    meas = McResult(1.0, 1.0, 5e-4, 1e-4, 0.04, 0.05, 1000)
    dead = McResult(1.0, 1.0, 0.0, 0.0, 0.0, 0.05, 1000)
    with pytest.raises(InputError):
        calibrate_spur(dead, meas)


def test_calibrate_spur_rejects_mismatched_chains():
    meas_cfg = small_config()
    ctrl_cfg = small_config(source_mode=det.SOURCE_THERMAL, amp_noise_temperature=0.2)
    meas = McResult(1.0, 1.0, 5e-4, 1e-4, 0.04, 0.05, 1000)
    ctrl = McResult(1.0, 1.0, 0.0, 2e-4, 0.04, 0.05, 1000)
    with pytest.raises(InputError, match="does not transfer"):
        calibrate_spur(ctrl, meas, control_cfg=ctrl_cfg, measurement_cfg=meas_cfg)
    # matched chains pass
    ok_cfg = small_config(source_mode=det.SOURCE_THERMAL)
    calibrate_spur(ctrl, meas, control_cfg=ok_cfg, measurement_cfg=meas_cfg)


def test_spur_injection_and_correction_round_trip():
    # A crosstalk spur injected into a thermal run is removed by the control.
    mix = ((1.0, 0.05), (0.05, 1.0))
    meas_cfg = small_config(
        source_mode=det.SOURCE_THERMAL, crosstalk=mix, n_windows=1 << 14, seed=11
    )
    ctrl_cfg = small_config(
        source_mode=det.SOURCE_THERMAL, crosstalk=mix, n_windows=1 << 14, seed=77
    )
    meas = run_experiment(meas_cfg, threads=4)
    ctrl = run_experiment(ctrl_cfg, threads=4)
    # the spur itself is resolved before correction
    spur = predict_chain(meas_cfg).g2
    assert spur > 0.0
    corrected = calibrate_spur(ctrl, meas, ctrl_cfg, meas_cfg)
    assert abs(corrected.g2_est) < 4.0 * corrected.g2_err
    assert corrected.g2_err > meas.g2_err  # quadrature growth
