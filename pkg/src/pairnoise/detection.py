"""Monte Carlo simulator of the two-band power-detection chain.

Per detection window, the chain synthesizes the two band envelopes in the
frequency domain from the analytic spectral model (including the anomalous
pair correlator X between mirrored bins), adds amplifier noise, square-law
detects with a single-pole response, decimates to the digitizer rate,
converts to kelvin-referred power, applies channel crosstalk, and feeds a
streaming covariance estimator.

The same covariance algebra that the synthesis realizes is also evaluated
in closed form (`predict_chain` / `expected_g2`), so simulated estimates
can be compared against their exact expectation values rather than against
an idealized, unfiltered formula.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import ndtri

from . import junction as jn
from .errors import ConfigError, InputError, ModelViolationError
from .junction import DetectionBand, Drive, Junction
from .special import CONSTANTS

__all__ = [
    "McConfig",
    "McResult",
    "ChainPrediction",
    "SpurCorrection",
    "MomentAccumulator",
    "synthesize_envelopes",
    "detect_power",
    "apply_crosstalk",
    "estimate_g2",
    "run_experiment",
    "expected_g2",
    "predict_chain",
    "calibrate_spur",
]

SOURCE_JUNCTION = "junction"
SOURCE_THERMAL = "thermal-control"

_IDENTITY = ((1.0, 0.0), (0.0, 1.0))

# Envelope oversampling: simulation runs at 4x the band width, which keeps
# the |A|^2 spectrum (twice the band width) comfortably inside Nyquist.
_OVERSAMPLE = 4

# Windows per synthesis batch; a fixed value keeps results independent of
# thread count (batches are merged in index order).
_BATCH = 2048

# Relative tolerance for the per-bin PSD condition X^2 <= S1*S2.
_PSD_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class McConfig:
    """Configuration of one simulated measurement."""

    junction: Junction
    drive: Drive
    bands: tuple[DetectionBand, DetectionBand]
    bins_per_band: int = 64
    amp_noise_temperature: float = 5.0  # kelvin, per band
    detector_time_constant: float = 1e-9  # seconds
    sample_rate: float = 4e8  # Hz, digitizer rate after decimation
    n_windows: int = 1 << 16
    seed: int = 0
    crosstalk: tuple[tuple[float, float], tuple[float, float]] = _IDENTITY
    source_mode: str = SOURCE_JUNCTION
    t_source: float = 0.1  # kelvin, thermal-control source temperature

    def __post_init__(self):
        b1, b2 = self.bands
        if self.bins_per_band < 8:
            raise ConfigError(f"bins_per_band must be >= 8, got {self.bins_per_band}")
        if not (math.isfinite(self.sample_rate) and self.sample_rate > 0.0):
            raise ConfigError(f"sample_rate must be > 0, got {self.sample_rate!r}")
        if not (math.isfinite(self.detector_time_constant) and self.detector_time_constant > 0.0):
            raise ConfigError(
                f"detector_time_constant must be > 0, got {self.detector_time_constant!r}"
            )
        if self.n_windows < 1:
            raise ConfigError(f"n_windows must be >= 1, got {self.n_windows}")
        if not (math.isfinite(self.amp_noise_temperature) and self.amp_noise_temperature >= 0.0):
            raise ConfigError(
                f"amp_noise_temperature must be >= 0, got {self.amp_noise_temperature!r}"
            )
        try:
            mix = np.asarray(self.crosstalk, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"crosstalk must be a finite 2x2 matrix: {exc}") from exc
        if mix.shape != (2, 2) or not np.all(np.isfinite(mix)):
            raise ConfigError("crosstalk must be a finite 2x2 matrix")
        if self.source_mode not in (SOURCE_JUNCTION, SOURCE_THERMAL):
            raise ConfigError(
                f"source_mode must be '{SOURCE_JUNCTION}' or '{SOURCE_THERMAL}', "
                f"got {self.source_mode!r}"
            )
        if self.source_mode == SOURCE_THERMAL and not (
            math.isfinite(self.t_source) and self.t_source > 0.0
        ):
            raise ConfigError(f"t_source must be > 0, got {self.t_source!r}")
        if abs(b1.bandwidth - b2.bandwidth) > 1e-6 * b1.bandwidth:
            raise ConfigError(
                "simulated bands must share one bandwidth: band 2's grid is the "
                "f0-mirror of band 1's, so their spans are equal by construction"
            )
        if b1.f_low < b2.f_high and b2.f_low < b1.f_high:
            raise ConfigError("detection bands must not overlap")
        if self.source_mode == SOURCE_JUNCTION:
            if abs(b1.f_center + b2.f_center - self.drive.f0) > 1.0:
                raise ConfigError(
                    "sum-frequency condition violated: band centers must add up "
                    f"to f0 = {self.drive.f0!r} within 1 Hz"
                )

    @property
    def mix(self) -> np.ndarray:
        return np.asarray(self.crosstalk, dtype=float)


@dataclasses.dataclass(frozen=True)
class McResult:
    """Streaming-estimator output of one simulated measurement."""

    mean_p1: float  # kelvin-referred mean power, band 1
    mean_p2: float
    g2_est: float  # K^2
    g2_err: float  # K^2, 1 sigma
    var_p1: float  # K^2, needed to scale spur subtraction
    var_p2: float
    n_samples_used: int


@dataclasses.dataclass(frozen=True)
class ChainPrediction:
    """Exact expectation values of the simulated chain."""

    g2: float  # K^2, expected covariance of the two power channels
    mean_p1: float
    mean_p2: float
    var_p1: float
    var_p2: float
    correlation_factor: float  # variance inflation of the covariance estimator


@dataclasses.dataclass(frozen=True)
class SpurCorrection:
    """Crosstalk-spur-subtracted estimate."""

    g2_est: float
    g2_err: float


# ---------------------------------------------------------------------------
# chain precomputation


@dataclasses.dataclass(frozen=True)
class _Chain:
    """Everything deterministic about the chain, precomputed once."""

    v1: np.ndarray  # per-bin <|a1|^2>, amplifier included (A^2)
    v2: np.ndarray
    u: np.ndarray  # per-bin anomalous <a1 a2> (A^2)
    v1_source: np.ndarray  # source-only second moments (A^2)
    v2_source: np.ndarray
    v_amp: float  # amplifier contribution per bin (A^2)
    k_idx: np.ndarray  # bin offsets on the FFT grid, band 1
    df: float  # bin spacing, Hz
    n_fft: int
    k_dec: int
    n_out: int
    h_rfft: np.ndarray  # detector response on the rfft grid
    kappa: float  # A^2 -> kelvin conversion
    mix: np.ndarray
    draws_per_window: int


def _build_chain(cfg: McConfig) -> _Chain:
    b1, _ = cfg.bands
    n_bins = cfg.bins_per_band
    df = b1.bandwidth / n_bins
    k_idx = np.arange(n_bins) - n_bins // 2
    f1_bins = b1.f_center + k_idx * df
    f2_bins = cfg.drive.f0 - f1_bins

    if cfg.source_mode == SOURCE_THERMAL:
        source = Junction(cfg.junction.resistance, cfg.t_source)
        s1 = jn.s0_equilibrium(source, f1_bins)
        s2 = jn.s0_equilibrium(source, f2_bins)
        x = np.zeros(n_bins)
    else:
        s1 = jn.photo_assisted_s(cfg.junction, cfg.drive, f1_bins)
        s2 = jn.photo_assisted_s(cfg.junction, cfg.drive, f2_bins)
        x = jn.x_correlator(cfg.junction, cfg.drive, f1_bins)

    if np.any(s1 <= 0.0) or np.any(s2 <= 0.0):
        raise ModelViolationError("source spectral density must be positive in-band")
    if np.any(x**2 > s1 * s2 * (1.0 + _PSD_TOL)):
        raise ModelViolationError(
            "per-bin covariance [[S1, X], [X, S2]] is not positive semidefinite; "
            f"worst bin at {f1_bins[np.argmax(x**2 - s1 * s2)] / 1e9:.4f} GHz"
        )

    s_amp = 2.0 * CONSTANTS.k_B * cfg.amp_noise_temperature / cfg.junction.resistance
    n_fft = _OVERSAMPLE * n_bins
    f_sim = n_fft * df
    k_dec = max(1, int(math.floor(f_sim / cfg.sample_rate + 0.5)))
    n_out = -(-n_fft // k_dec)  # ceil division: length of the [::k_dec] slice
    f_rfft = np.arange(n_fft // 2 + 1) * df
    h_rfft = 1.0 / (1.0 + 2j * math.pi * f_rfft * cfg.detector_time_constant)
    kappa = cfg.junction.resistance / (2.0 * CONSTANTS.k_B * b1.bandwidth)
    return _Chain(
        v1=s1 * df + s_amp * df,
        v2=s2 * df + s_amp * df,
        u=x * df,
        v1_source=s1 * df,
        v2_source=s2 * df,
        v_amp=s_amp * df,
        k_idx=k_idx,
        df=df,
        n_fft=n_fft,
        k_dec=k_dec,
        n_out=n_out,
        h_rfft=h_rfft,
        kappa=kappa,
        mix=cfg.mix,
        draws_per_window=8 * n_bins,
    )


# ---------------------------------------------------------------------------
# synthesis


def _draw_bin_amplitudes(
    chain: _Chain, seed: int, first_window: int, count: int, include_amplifier: bool
):
    """Bin amplitudes (a1, a2) for `count` consecutive windows.

    Deterministic in (seed, window index, bin index): window w consumes the
    counter-based stream positions [w*D, (w+1)*D) with D = 8 * bins_per_band
    uniforms, converted to normal deviates by inverse CDF so consumption is
    fixed.  Batched generation is therefore bit-identical to per-window
    generation.
    """
    n_bins = chain.k_idx.size
    d = chain.draws_per_window
    bit_gen = np.random.Philox(key=seed)
    # Philox.advance() counts 4-word blocks; one uniform costs one 64-bit word.
    bit_gen.advance(first_window * d // 4)
    uniforms = np.random.Generator(bit_gen).random((count, d))
    normals = ndtri(np.clip(uniforms, 2.0**-53, None))

    def cplx(block: int) -> np.ndarray:
        lo = block * 2 * n_bins
        re = normals[:, lo : lo + n_bins]
        im = normals[:, lo + n_bins : lo + 2 * n_bins]
        return (re + 1j * im) / math.sqrt(2.0)

    z1, z2, g1, g2_ = cplx(0), cplx(1), cplx(2), cplx(3)

    # v1_source > 0 always (the vacuum floor hf/R); checked in _build_chain.
    disc = chain.v2_source - chain.u**2 / chain.v1_source
    a1 = np.sqrt(chain.v1_source) * z1
    a2 = (chain.u / chain.v1_source) * np.conj(a1) + np.sqrt(np.clip(disc, 0.0, None)) * z2
    if include_amplifier and chain.v_amp > 0.0:
        amp = math.sqrt(chain.v_amp)
        a1 = a1 + amp * g1
        a2 = a2 + amp * g2_
    return a1, a2


def _envelopes_from_bins(chain: _Chain, a1: np.ndarray, a2: np.ndarray):
    """Time-domain envelopes A(t_m) = sum_i a_i exp(2pi i k_i m / M)."""
    count = a1.shape[0]
    spec1 = np.zeros((count, chain.n_fft), dtype=complex)
    spec2 = np.zeros((count, chain.n_fft), dtype=complex)
    spec1[:, chain.k_idx % chain.n_fft] = a1
    spec2[:, (-chain.k_idx) % chain.n_fft] = a2  # band-2 grid is the f0-mirror
    env1 = np.fft.ifft(spec1, axis=1) * chain.n_fft
    env2 = np.fft.ifft(spec2, axis=1) * chain.n_fft
    return env1, env2


def synthesize_envelopes(cfg: McConfig, window_index: int):
    """Source envelopes (band 1, band 2) of one detection window.

    Amplifier noise is not included here; `run_experiment` adds it before
    detection.  The draw layout still reserves the amplifier stream, so the
    window's random-stream position does not depend on what is consumed.
    """
    if not 0 <= window_index < cfg.n_windows:
        raise InputError(
            f"window_index {window_index} outside [0, {cfg.n_windows})"
        )
    chain = _build_chain(cfg)
    a1, a2 = _draw_bin_amplitudes(chain, cfg.seed, window_index, 1, include_amplifier=False)
    env1, env2 = _envelopes_from_bins(chain, a1, a2)
    return env1[0], env2[0]


# ---------------------------------------------------------------------------
# detection


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def detect_power(envelope, time_constant: float, sample_rate: float, input_rate: float):
    """Square-law detect a complex envelope and digitize it.

    |envelope|^2 is filtered by a single-pole low-pass (unit DC gain, exact
    on the circular block) with the given time constant, then decimated
    from `input_rate` to (approximately) `sample_rate` by integer stride.
    """
    env = np.asarray(envelope)
    n = env.shape[-1]
    if n < 16:
        raise InputError(f"envelope must have at least 16 samples, got {n}")
    if not time_constant > 0.0:
        raise InputError(f"time_constant must be > 0, got {time_constant!r}")
    if not (input_rate > 0.0 and sample_rate > 0.0):
        raise InputError("input_rate and sample_rate must be > 0")
    power = np.abs(env) ** 2
    freqs = np.arange(n // 2 + 1) * (input_rate / n)
    response = 1.0 / (1.0 + 2j * math.pi * freqs * time_constant)
    filtered = np.fft.irfft(np.fft.rfft(power, axis=-1) * response, n=n, axis=-1)
    stride = max(1, _round_half_up(input_rate / sample_rate))
    return filtered[..., ::stride]


def apply_crosstalk(p1, p2, m):
    """Mix two power series by a 2x2 matrix, per sample."""
    mix = np.asarray(m, dtype=float)
    if mix.shape != (2, 2) or not np.all(np.isfinite(mix)):
        raise InputError("crosstalk matrix must be finite and 2x2")
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    return mix[0, 0] * p1 + mix[0, 1] * p2, mix[1, 0] * p1 + mix[1, 1] * p2


# ---------------------------------------------------------------------------
# streaming estimation


@dataclasses.dataclass
class MomentAccumulator:
    """Single-pass first/second joint moments with associative merging."""

    n: int = 0
    mean1: float = 0.0
    mean2: float = 0.0
    m2_1: float = 0.0  # sum of squared deviations, channel 1
    m2_2: float = 0.0
    c12: float = 0.0  # sum of cross deviations

    def update(self, p1: np.ndarray, p2: np.ndarray) -> None:
        p1 = np.asarray(p1, dtype=float).ravel()
        p2 = np.asarray(p2, dtype=float).ravel()
        if p1.size != p2.size:
            raise InputError(f"stream lengths differ: {p1.size} != {p2.size}")
        if p1.size == 0:
            return
        batch = MomentAccumulator(
            n=p1.size,
            mean1=float(p1.mean()),
            mean2=float(p2.mean()),
        )
        d1 = p1 - batch.mean1
        d2 = p2 - batch.mean2
        batch.m2_1 = float(d1 @ d1)
        batch.m2_2 = float(d2 @ d2)
        batch.c12 = float(d1 @ d2)
        self.merge(batch)

    def merge(self, other: "MomentAccumulator") -> None:
        if other.n == 0:
            return
        if self.n == 0:
            self.n = other.n
            self.mean1, self.mean2 = other.mean1, other.mean2
            self.m2_1, self.m2_2, self.c12 = other.m2_1, other.m2_2, other.c12
            return
        n = self.n + other.n
        d1 = other.mean1 - self.mean1
        d2 = other.mean2 - self.mean2
        w = self.n * other.n / n
        self.m2_1 += other.m2_1 + d1 * d1 * w
        self.m2_2 += other.m2_2 + d2 * d2 * w
        self.c12 += other.c12 + d1 * d2 * w
        self.mean1 += d1 * other.n / n
        self.mean2 += d2 * other.n / n
        self.n = n

    def result(self, correlation_factor: float = 1.0) -> McResult:
        if self.n < 2:
            raise InputError("need at least 2 samples to estimate a covariance")
        var1 = self.m2_1 / (self.n - 1)
        var2 = self.m2_2 / (self.n - 1)
        cov = self.c12 / (self.n - 1)
        err = math.sqrt((var1 * var2 + cov * cov) * correlation_factor / self.n)
        return McResult(
            mean_p1=self.mean1,
            mean_p2=self.mean2,
            g2_est=cov,
            g2_err=err,
            var_p1=var1,
            var_p2=var2,
            n_samples_used=self.n,
        )


def estimate_g2(p1, p2, correlation_factor: float = 1.0) -> McResult:
    """Covariance of two power streams with a 1-sigma statistical error.

    g2_err = sqrt((var P1 * var P2 + cov^2) * correlation_factor / N); the
    correlation factor accounts for sample-to-sample correlation (1 for
    independent samples; `predict_chain` supplies the chain-exact value).
    """
    acc = MomentAccumulator()
    acc.update(p1, p2)
    return acc.result(correlation_factor)


# ---------------------------------------------------------------------------
# exact chain expectations


def _power_kernels(chain: _Chain):
    """Circular lag kernels cov(P_a(s), P_b(s+l)) of the filtered powers.

    For jointly Gaussian envelopes, cov(|A|^2, |B|^2) = |<AB>|^2 + |<AB*>|^2;
    with mirrored bin pairing the anomalous correlator is stationary, and
    filtering (the same single-pole on both channels) multiplies every lag
    spectrum by |H|^2.
    """
    m = chain.n_fft

    def placed(values: np.ndarray, mirror: bool) -> np.ndarray:
        spec = np.zeros(m, dtype=complex)
        idx = (-chain.k_idx if mirror else chain.k_idx) % m
        spec[idx] = values
        return np.fft.ifft(spec) * m

    h2 = np.abs(chain.h_rfft) ** 2
    v1_t = placed(chain.v1, mirror=False)
    v2_t = placed(chain.v2, mirror=True)
    u_t = placed(chain.u, mirror=False)

    def filtered(raw: np.ndarray) -> np.ndarray:
        return np.fft.irfft(np.fft.rfft(raw) * h2, n=m)

    c11 = filtered(np.abs(v1_t) ** 2)
    c22 = filtered(np.abs(v2_t) ** 2)
    c12 = filtered(np.abs(u_t) ** 2)
    return c11, c22, c12


def predict_chain(cfg: McConfig) -> ChainPrediction:
    """Exact first/second-moment expectations of the simulated chain."""
    chain = _build_chain(cfg)
    c11, c22, c12 = _power_kernels(chain)
    kap2 = chain.kappa**2
    mix = chain.mix

    lags = (np.arange(chain.n_out) * chain.k_dec) % chain.n_fft
    k11 = kap2 * c11[lags]
    k22 = kap2 * c22[lags]
    k12 = kap2 * c12[lags]  # even in the lag (real spectra), so K21 = K12

    a, b = mix[0, 0], mix[0, 1]
    c, d = mix[1, 0], mix[1, 1]
    cov11 = a * a * k11 + 2.0 * a * b * k12 + b * b * k22
    cov22 = c * c * k11 + 2.0 * c * d * k12 + d * d * k22
    cov12 = a * c * k11 + (a * d + b * c) * k12 + b * d * k22

    mean1_raw = chain.kappa * float(np.sum(chain.v1))
    mean2_raw = chain.kappa * float(np.sum(chain.v2))

    n_out = chain.n_out
    weights = 1.0 - np.abs(np.arange(-(n_out - 1), n_out)) / n_out
    pair = np.concatenate((cov11[:0:-1] * cov22[:0:-1], cov11 * cov22))
    cross = np.concatenate((cov12[:0:-1] ** 2, cov12**2))
    numerator = float(np.sum(weights * (pair + cross)))
    denominator = cov11[0] * cov22[0] + cov12[0] ** 2
    return ChainPrediction(
        g2=float(cov12[0]),
        mean_p1=a * mean1_raw + b * mean2_raw,
        mean_p2=c * mean1_raw + d * mean2_raw,
        var_p1=float(cov11[0]),
        var_p2=float(cov22[0]),
        correlation_factor=numerator / float(denominator),
    )


def expected_g2(cfg: McConfig) -> float:
    """Exact expectation of the chain's G2 estimate, in K^2."""
    return predict_chain(cfg).g2


# ---------------------------------------------------------------------------
# the full experiment


def _accumulate_batch(
    chain: _Chain, cfg: McConfig, first_window: int, count: int
) -> MomentAccumulator:
    a1, a2 = _draw_bin_amplitudes(chain, cfg.seed, first_window, count, include_amplifier=True)
    env1, env2 = _envelopes_from_bins(chain, a1, a2)
    p1 = np.abs(env1) ** 2
    p2 = np.abs(env2) ** 2
    filt1 = np.fft.irfft(np.fft.rfft(p1, axis=1) * chain.h_rfft, n=chain.n_fft, axis=1)
    filt2 = np.fft.irfft(np.fft.rfft(p2, axis=1) * chain.h_rfft, n=chain.n_fft, axis=1)
    t1 = chain.kappa * filt1[:, :: chain.k_dec]
    t2 = chain.kappa * filt2[:, :: chain.k_dec]
    q1, q2 = apply_crosstalk(t1, t2, chain.mix)
    acc = MomentAccumulator()
    acc.update(q1, q2)
    return acc


def run_experiment(cfg: McConfig, threads: int = 1) -> McResult:
    """Simulate the full chain and return the streaming G2 estimate.

    Deterministic for a fixed (cfg, seed); results are bit-identical for
    any thread count because windows are generated in fixed counter-based
    batches and partial moments are merged in batch order.
    """
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    chain = _build_chain(cfg)
    starts = list(range(0, cfg.n_windows, _BATCH))
    counts = [min(_BATCH, cfg.n_windows - s) for s in starts]

    if threads == 1 or len(starts) == 1:
        partials = [
            _accumulate_batch(chain, cfg, s, c) for s, c in zip(starts, counts)
        ]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(
                pool.map(lambda sc: _accumulate_batch(chain, cfg, *sc), zip(starts, counts))
            )
    total = MomentAccumulator()
    for part in partials:
        total.merge(part)
    gamma = predict_chain(cfg).correlation_factor
    return total.result(correlation_factor=gamma)


def calibrate_spur(
    control: McResult,
    measurement: McResult,
    control_cfg: McConfig | None = None,
    measurement_cfg: McConfig | None = None,
) -> SpurCorrection:
    """Subtract the crosstalk spur measured on a thermal control run.

    The control baseline is scaled by the geometric ratio of the channel
    variances (the spur is linear in them) and removed from the measurement;
    errors add in quadrature.
    """
    if control_cfg is not None and measurement_cfg is not None:
        same = (
            np.array_equal(control_cfg.mix, measurement_cfg.mix)
            and control_cfg.bands == measurement_cfg.bands
            and control_cfg.bins_per_band == measurement_cfg.bins_per_band
            and control_cfg.sample_rate == measurement_cfg.sample_rate
            and control_cfg.detector_time_constant == measurement_cfg.detector_time_constant
            and control_cfg.amp_noise_temperature == measurement_cfg.amp_noise_temperature
        )
        if not same:
            raise InputError(
                "control and measurement configurations differ in the detection "
                "chain; the spur baseline does not transfer"
            )
    if min(control.var_p1, control.var_p2) <= 0.0:
        raise InputError("control run carries no variance; cannot scale the spur")
    scale = math.sqrt(
        (measurement.var_p1 * measurement.var_p2) / (control.var_p1 * control.var_p2)
    )
    value = measurement.g2_est - scale * control.g2_est
    err = math.sqrt(measurement.g2_err**2 + (scale * control.g2_err) ** 2)
    return SpurCorrection(g2_est=value, g2_err=err)
