"""Physical constants and the special-function kernel.

Everything in this module is pure and stateless; the rest of the package
builds on these four things: CODATA constants, Bessel functions J_n of the
first kind, an overflow/cancellation-safe coth, and a fixed-order band
quadrature.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DomainError, EvaluationError

__all__ = [
    "PhysicalConstants",
    "CONSTANTS",
    "bessel_j",
    "bessel_ladder",
    "coth_stable",
    "band_average",
    "truncation_order",
]


@dataclasses.dataclass(frozen=True)
class PhysicalConstants:
    """CODATA (2019 SI redefinition) exact values."""

    e: float = 1.602176634e-19  # elementary charge, C
    h: float = 6.62607015e-34  # Planck constant, J s
    k_B: float = 1.380649e-23  # Boltzmann constant, J/K


CONSTANTS = PhysicalConstants()

# Supported domain for Bessel evaluation.  The physics only ever needs
# z = e*V_ac/(h*f0) of order unity, so these are generous.
_MAX_ORDER = 200
_MAX_ARG = 50.0

# Rescaling guard for the backward recurrence (values are renormalized at
# the end, so only ratios matter).
_RESCALE_AT = 1e250
_RESCALE_BY = 1e-250


def truncation_order(z: float) -> int:
    """Number of Bessel orders N(z) = ceil(|z|) + 25 kept in photo-assisted sums.

    Terms beyond this are below 1e-16 relative for the arguments used here.
    """
    return int(math.ceil(abs(z))) + 25


def bessel_ladder(n_max: int, z: float) -> np.ndarray:
    """Return J_0(z) .. J_{n_max}(z) by Miller's backward recurrence.

    The downward recurrence J_{k-1} = (2k/z) J_k - J_{k+1} is started well
    above ``n_max`` with an arbitrary seed and normalized at the end with
    the sum rule J_0 + 2*(J_2 + J_4 + ...) = 1, which gives uniform
    absolute accuracy over all orders at once.
    """
    if not isinstance(n_max, (int, np.integer)) or n_max < 0:
        raise DomainError(f"n_max must be a non-negative integer, got {n_max!r}")
    if not math.isfinite(z):
        raise DomainError(f"bessel argument must be finite, got {z!r}")

    out = np.zeros(n_max + 1)
    if z == 0.0:
        out[0] = 1.0
        return out

    x = abs(z)
    start = max(n_max, int(math.ceil(x))) + 60
    j_above = 0.0  # trial J_{start+1}
    j_here = 1e-30  # trial J_{start}
    even_sum = 2.0 * j_here if start % 2 == 0 else 0.0
    for k in range(start, 0, -1):
        j_below = (2.0 * k / x) * j_here - j_above
        j_above = j_here
        j_here = j_below
        n = k - 1
        if n <= n_max:
            out[n] = j_here
        if n > 0 and n % 2 == 0:
            even_sum += 2.0 * j_here
        if abs(j_here) > _RESCALE_AT:
            j_here *= _RESCALE_BY
            j_above *= _RESCALE_BY
            even_sum *= _RESCALE_BY
            out *= _RESCALE_BY
    norm = j_here + even_sum  # j_here is now the J_0 trial value
    out /= norm
    if z < 0.0:
        out[1::2] *= -1.0
    return out


def bessel_j(n: int, z: float) -> float:
    """Bessel function of the first kind J_n(z).

    Supports |n| <= 200 and |z| <= 50 with absolute error below 1e-12;
    J_{-n}(z) = (-1)**n J_n(z) holds exactly.
    """
    if not isinstance(n, (int, np.integer)):
        raise DomainError(f"order must be an integer, got {n!r}")
    if abs(n) > _MAX_ORDER:
        raise DomainError(f"order |{n}| exceeds supported maximum {_MAX_ORDER}")
    if not (isinstance(z, (int, float, np.floating, np.integer)) and math.isfinite(z)):
        raise DomainError(f"argument must be a finite real, got {z!r}")
    if abs(z) > _MAX_ARG:
        raise DomainError(f"argument |{z}| exceeds supported maximum {_MAX_ARG}")
    value = bessel_ladder(abs(int(n)), float(z))[abs(int(n))]
    if n < 0 and n % 2 != 0:
        value = -value
    return float(value)


def coth_stable(x):
    """coth(x), stable at both ends; x may be a float or an ndarray.

    |x| < 1e-6 uses the expansion 1/x + x/3 (avoids cancellation),
    |x| > 20 returns sign(x) (avoids overflow in exp), and x == 0 raises:
    the hf*coth(hf/2kT) -> 2kT limit belongs to the caller.
    """
    if np.isscalar(x):
        if x == 0.0:
            raise DomainError("coth(0) is undefined; use the 2kT limit upstream")
        ax = abs(x)
        if ax < 1e-6:
            return 1.0 / x + x / 3.0
        if ax > 20.0:
            return math.copysign(1.0, x)
        return 1.0 / math.tanh(x)

    x = np.asarray(x, dtype=float)
    if np.any(x == 0.0):
        raise DomainError("coth(0) is undefined; use the 2kT limit upstream")
    ax = np.abs(x)
    safe = np.where(ax < 1e-6, 1.0, x)
    out = 1.0 / np.tanh(safe)
    out = np.where(ax < 1e-6, 1.0 / x + x / 3.0, out)
    out = np.where(ax > 20.0, np.sign(x), out)
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def band_average(integrand, band) -> float:
    """Mean of ``integrand(f)`` over a detection band.

    Fixed 16-point Gauss-Legendre quadrature over
    [f_center - bandwidth/2, f_center + bandwidth/2]; exact for
    polynomials up to degree 31.  ``integrand`` must accept an ndarray of
    frequencies.  ``band`` needs ``f_center`` and ``bandwidth`` attributes.
    """
    half = 0.5 * band.bandwidth
    if not half > 0.0:
        raise DomainError(f"bandwidth must be positive, got {band.bandwidth!r}")
    nodes = band.f_center + half * _GL_NODES
    values = np.asarray(integrand(nodes), dtype=float)
    if values.shape != nodes.shape:
        raise EvaluationError(
            f"integrand returned shape {values.shape}, expected {nodes.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise EvaluationError("integrand evaluated to a non-finite value in band")
    # weights sum to 2 on the reference interval, so the mean is sum/2
    return float(np.dot(_GL_WEIGHTS, values) / 2.0)
