"""Analytic model of photon-pair noise from an ac+dc biased tunnel junction.

Closed-form quantities only: equilibrium and photo-assisted spectral
densities, the two-frequency correlator X and its square C4, photon
occupations, and the derived pair statistics (g2, NRF, pairing probability,
pair rate).  Everything is computed in SI units (A^2/Hz, V, Hz, K);
kelvin-referred reporting via T_N = S*R/2k_B happens only at output
boundaries.
"""

from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np

from . import special
from .errors import (
    ConfigError,
    ModelValidityWarning,
    NumericalConsistencyError,
    UndefinedStatisticError,
)
from .special import CONSTANTS

__all__ = [
    "Junction",
    "Drive",
    "DetectionBand",
    "PairStats",
    "POLICY_CENTER",
    "POLICY_AVERAGE",
    "s0_equilibrium",
    "photo_assisted_s",
    "x_correlator",
    "c4",
    "g2_kelvin2",
    "bose_einstein",
    "photon_number",
    "g2",
    "pair_probability",
    "nrf",
    "pair_rate",
    "intrinsic_c4_estimate",
    "pair_stats",
]

POLICY_CENTER = "center"
POLICY_AVERAGE = "average"

# Occupations below this are treated as roundoff and clamped to zero;
# anything more negative means S fell below the vacuum floor, which the
# model forbids, so it is reported as a bug rather than clamped.
_OCCUPATION_CLAMP = 1e-9

# Mean occupation beyond which the small-photon-number statistics
# (pair probability, pair rate) are outside their validity regime.
_VALIDITY_OCCUPATION = 0.3


@dataclasses.dataclass(frozen=True)
class Junction:
    """Tunnel junction sample parameters."""

    resistance: float  # ohms
    electron_temperature: float  # kelvin

    def __post_init__(self):
        if not (math.isfinite(self.resistance) and self.resistance > 0.0):
            raise ConfigError(f"resistance must be > 0, got {self.resistance!r}")
        if not (math.isfinite(self.electron_temperature) and self.electron_temperature > 0.0):
            raise ConfigError(
                "electron_temperature must be > 0 "
                f"(use 1e-5 K as effective zero), got {self.electron_temperature!r}"
            )


@dataclasses.dataclass(frozen=True)
class Drive:
    """Bias point: dc voltage, ac amplitude and excitation frequency."""

    v_dc: float  # volts
    v_ac: float  # volts, amplitude of the ac drive
    f0: float  # hertz, excitation frequency

    def __post_init__(self):
        if not math.isfinite(self.v_dc):
            raise ConfigError(f"v_dc must be finite, got {self.v_dc!r}")
        if not (math.isfinite(self.v_ac) and self.v_ac >= 0.0):
            raise ConfigError(f"v_ac must be >= 0, got {self.v_ac!r}")
        if not (math.isfinite(self.f0) and self.f0 > 0.0):
            raise ConfigError(f"f0 must be > 0, got {self.f0!r}")

    @property
    def z(self) -> float:
        """Dimensionless ac drive strength e*V_ac/(h*f0)."""
        return CONSTANTS.e * self.v_ac / (CONSTANTS.h * self.f0)


@dataclasses.dataclass(frozen=True)
class DetectionBand:
    """Detection band with its evaluation policy."""

    f_center: float  # hertz
    bandwidth: float  # hertz
    policy: str = POLICY_CENTER

    def __post_init__(self):
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0.0):
            raise ConfigError(f"bandwidth must be > 0, got {self.bandwidth!r}")
        if not (math.isfinite(self.f_center) and self.f_center - 0.5 * self.bandwidth > 0.0):
            raise ConfigError(
                f"band [{self.f_center!r} +/- {self.bandwidth!r}/2] must stay above 0 Hz"
            )
        if self.policy not in (POLICY_CENTER, POLICY_AVERAGE):
            raise ConfigError(
                f"policy must be '{POLICY_CENTER}' or '{POLICY_AVERAGE}', got {self.policy!r}"
            )

    @property
    def f_low(self) -> float:
        return self.f_center - 0.5 * self.bandwidth

    @property
    def f_high(self) -> float:
        return self.f_center + 0.5 * self.bandwidth


@dataclasses.dataclass(frozen=True)
class PairStats:
    """All pair observables at one bias point."""

    n1: float
    n2: float
    g2: float
    nrf: float
    p_pair_given_2: float
    c4: float  # (A^2/Hz)^2, sample-referred
    g2_kelvin2: float  # K^2 reporting convention


def _evaluate(integrand, band: DetectionBand) -> float:
    """Evaluate a frequency function on a band according to its policy."""
    if band.policy == POLICY_AVERAGE:
        return special.band_average(integrand, band)
    return float(integrand(np.asarray(band.f_center)))


def s0_equilibrium(j: Junction, f):
    """Equilibrium noise spectral density S0(f) = (hf/R) coth(hf/2kT).

    Even in f; the f = 0 limit 2kT/R is returned exactly.  ``f`` may be a
    scalar or an ndarray.
    """
    h, k_b = CONSTANTS.h, CONSTANTS.k_B
    t, r = j.electron_temperature, j.resistance
    f_arr = np.asarray(f, dtype=float)
    x = h * f_arr / (2.0 * k_b * t)
    safe = np.where(x == 0.0, 1.0, x)
    out = (h * f_arr / r) * special.coth_stable(safe)
    out = np.where(x == 0.0, 2.0 * k_b * t / r, out)
    if np.isscalar(f) or np.ndim(f) == 0:
        return float(out)
    return out


def _bessel_weights(z: float, n_lo: int, n_hi: int) -> np.ndarray:
    """J_n(z) for n in [n_lo, n_hi], via one ladder and the parity rule."""
    ladder = special.bessel_ladder(max(abs(n_lo), abs(n_hi)), z)
    orders = np.arange(n_lo, n_hi + 1)
    weights = ladder[np.abs(orders)]
    weights[(orders < 0) & (orders % 2 != 0)] *= -1.0
    return weights


def photo_assisted_s(j: Junction, d: Drive, f):
    """Photo-assisted noise spectral density.

    S(f) = (1/2) sum_n J_n(z)^2 [S0(f_{n+}) + S0(f_{n-})] with
    f_{n+-} = f + n f0 +- e V_dc/h and z = e V_ac/(h f0), truncated at
    |n| <= N(z).  Reduces exactly to (S0(f+nu)+S0(f-nu))/2 at v_ac = 0.
    """
    n_max = special.truncation_order(d.z)
    orders = np.arange(-n_max, n_max + 1)
    weights = _bessel_weights(d.z, -n_max, n_max)
    nu = CONSTANTS.e * d.v_dc / CONSTANTS.h
    f_arr = np.asarray(f, dtype=float)
    shifted = f_arr[..., None] + orders * d.f0
    total = 0.5 * np.sum(
        weights**2 * (s0_equilibrium(j, shifted + nu) + s0_equilibrium(j, shifted - nu)),
        axis=-1,
    )
    if np.isscalar(f) or np.ndim(f) == 0:
        return float(total)
    return total


def x_correlator(j: Junction, d: Drive, f):
    """Two-frequency correlator X(f, f0 - f) of the driven junction.

    X = sum_n (alpha_n/2) [S0(f_{n+}) - S0(f_{n-})] with
    alpha_n = J_n(z) J_{n+1}(z), summed over n in [-N-1, N].  Real, odd in
    v_dc, and identically zero when v_dc = 0 or v_ac = 0.
    """
    n_max = special.truncation_order(d.z)
    orders = np.arange(-n_max - 1, n_max + 1)
    weights = _bessel_weights(d.z, -n_max - 1, n_max + 1)
    alpha = weights[:-1] * weights[1:]  # J_n * J_{n+1} aligned with `orders`
    nu = CONSTANTS.e * d.v_dc / CONSTANTS.h
    f_arr = np.asarray(f, dtype=float)
    shifted = f_arr[..., None] + orders * d.f0
    total = 0.5 * np.sum(
        alpha * (s0_equilibrium(j, shifted + nu) - s0_equilibrium(j, shifted - nu)),
        axis=-1,
    )
    if np.isscalar(f) or np.ndim(f) == 0:
        return float(total)
    return total


def _check_band_pair(d: Drive, b1: DetectionBand, b2: DetectionBand) -> None:
    if abs(b1.f_center + b2.f_center - d.f0) > 1.0:
        raise ConfigError(
            "sum-frequency condition violated: "
            f"{b1.f_center!r} + {b2.f_center!r} != f0 = {d.f0!r} (tolerance 1 Hz)"
        )
    if b1.f_low < b2.f_high and b2.f_low < b1.f_high:
        raise ConfigError("detection bands must not overlap")
    if b1.policy != b2.policy:
        raise ConfigError(
            f"detection bands use different policies ({b1.policy!r} vs {b2.policy!r})"
        )


def c4(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> float:
    """Fourth cumulant C4 = |X(f1, f2)|^2, in (A^2/Hz)^2.

    Center policy evaluates X at (b1.f_center, f0 - b1.f_center);
    band-averaged policy averages X^2 over band 1 (the partner frequency
    f0 - f then sweeps band 2 by construction).
    """
    _check_band_pair(d, b1, b2)
    return _evaluate(lambda f: x_correlator(j, d, f) ** 2, b1)


def g2_kelvin2(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> float:
    """C4 in the kelvin-squared reporting convention: C4 * (R/2k_B)^2."""
    scale = j.resistance / (2.0 * CONSTANTS.k_B)
    return c4(j, d, b1, b2) * scale**2


def bose_einstein(f: float, temperature: float) -> float:
    """Equilibrium photon occupation 1/(exp(hf/kT) - 1)."""
    if not (temperature > 0.0 and f > 0.0):
        raise ConfigError("bose_einstein requires f > 0 and temperature > 0")
    x = CONSTANTS.h * f / (CONSTANTS.k_B * temperature)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def _occupation_from_density(s, f, resistance: float):
    """n(f) = (S(f) R/(hf) - 1)/2 with the small-negative clamp."""
    n = (np.asarray(s) * resistance / (CONSTANTS.h * np.asarray(f)) - 1.0) / 2.0
    low = np.min(n)
    if low < -_OCCUPATION_CLAMP:
        raise NumericalConsistencyError(
            f"occupation {low} below -{_OCCUPATION_CLAMP}: spectral density fell "
            "under the vacuum floor hf/R, which the model forbids"
        )
    return np.clip(n, 0.0, None)


def photon_number(j: Junction, d: Drive, b: DetectionBand) -> float:
    """Mean photon occupation of a detection band under drive."""

    def integrand(f):
        return _occupation_from_density(photo_assisted_s(j, d, f), f, j.resistance)

    return _evaluate(integrand, b)


def _pair_core(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand):
    """Shared intermediates: occupations, C4 in both conventions, <dn1 dn2>."""
    _check_band_pair(d, b1, b2)
    n1 = photon_number(j, d, b1)
    n2 = photon_number(j, d, b2)
    c4_val = c4(j, d, b1, b2)
    h = CONSTANTS.h
    dn1dn2 = c4_val * j.resistance**2 / (4.0 * h**2 * b1.f_center * b2.f_center)
    return n1, n2, c4_val, dn1dn2


def g2(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> float:
    """Normalized power correlator g2 = 1 + C4/(S_em(f1) S_em(f2)).

    With S_em(f) = 2 h f n(f)/R this equals 1 + <dn1 dn2>/(n1 n2); all
    gain conventions cancel, and g2 >= 1 for every model state.
    """
    n1, n2, _, dn1dn2 = _pair_core(j, d, b1, b2)
    if n1 <= 0.0 or n2 <= 0.0:
        raise UndefinedStatisticError(
            f"g2 undefined: no emission in one band (n1={n1}, n2={n2})"
        )
    return 1.0 + dn1dn2 / (n1 * n2)


def _warn_if_outside_validity(n1: float, n2: float) -> None:
    # A static message so the default warning filter collapses repeats
    # (sweeps cross the validity edge on hundreds of consecutive points).
    if max(n1, n2) > _VALIDITY_OCCUPATION:
        warnings.warn(
            f"band occupation exceeds {_VALIDITY_OCCUPATION}; small-photon-number "
            "pair statistics are outside their validity regime",
            ModelValidityWarning,
            stacklevel=3,
        )


def pair_probability(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> float:
    """P(1|2) = (<n1><n2> + <dn1 dn2>)/<n2>, clipped to 1.

    The probability that a photon detected in band 2 is part of a pair;
    <dn1 dn2> = C4 R^2/(4 h^2 f1 f2).
    """
    n1, n2, _, dn1dn2 = _pair_core(j, d, b1, b2)
    if n2 <= 0.0:
        raise UndefinedStatisticError("pair probability undefined: n2 = 0")
    _warn_if_outside_validity(n1, n2)
    return min(n1 + dn1dn2 / n2, 1.0)


def nrf(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> float:
    """Noise reduction factor of the photon-number difference.

    NRF = [n1(n1+1) + n2(n2+1) - 2 <dn1 dn2>]/(n1 + n2); values below 1
    are two-mode amplitude squeezing.
    """
    n1, n2, _, dn1dn2 = _pair_core(j, d, b1, b2)
    if n1 + n2 <= 0.0:
        raise UndefinedStatisticError("NRF undefined: both occupations vanish")
    return (n1 * (n1 + 1.0) + n2 * (n2 + 1.0) - 2.0 * dn1dn2) / (n1 + n2)


def pair_rate(
    j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand, bandwidth: float
) -> float:
    """Photon-pair rate <n2> * P(1|2) * bandwidth, in pairs per second."""
    if not (math.isfinite(bandwidth) and bandwidth >= 0.0):
        raise ConfigError(f"bandwidth must be >= 0, got {bandwidth!r}")
    return photon_number(j, d, b2) * pair_probability(j, d, b1, b2) * bandwidth


def intrinsic_c4_estimate(j: Junction, v_dc: float, delta_f: float) -> float:
    """Order-of-magnitude intrinsic fourth cumulant e^3 V_dc df R / k_B^2, in K^2."""
    if not (math.isfinite(v_dc) and v_dc >= 0.0):
        raise ConfigError(f"v_dc must be >= 0, got {v_dc!r}")
    if not (math.isfinite(delta_f) and delta_f > 0.0):
        raise ConfigError(f"delta_f must be > 0, got {delta_f!r}")
    e, k_b = CONSTANTS.e, CONSTANTS.k_B
    return e**3 * v_dc * delta_f * j.resistance / k_b**2


def pair_stats(j: Junction, d: Drive, b1: DetectionBand, b2: DetectionBand) -> PairStats:
    """All pair observables at one bias point, sharing intermediates."""
    n1, n2, c4_val, dn1dn2 = _pair_core(j, d, b1, b2)
    if n1 <= 0.0 or n2 <= 0.0:
        raise UndefinedStatisticError(
            f"pair statistics undefined: no emission in one band (n1={n1}, n2={n2})"
        )
    _warn_if_outside_validity(n1, n2)
    scale = j.resistance / (2.0 * CONSTANTS.k_B)
    return PairStats(
        n1=n1,
        n2=n2,
        g2=1.0 + dn1dn2 / (n1 * n2),
        nrf=(n1 * (n1 + 1.0) + n2 * (n2 + 1.0) - 2.0 * dn1dn2) / (n1 + n2),
        p_pair_given_2=min(n1 + dn1dn2 / n2, 1.0),
        c4=c4_val,
        g2_kelvin2=c4_val * scale**2,
    )
