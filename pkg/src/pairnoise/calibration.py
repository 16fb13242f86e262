"""Recovery of setup parameters from photo-assisted noise curves.

A measured noise-temperature curve T_N(v_dc) taken at several generator
amplitudes pins down four numbers at once: the chain gain, the amplifier
noise temperature, the electron temperature (from the rounding of the
eV = hf kink), and the attenuation between the generator and the sample
(from the spacing of the photo-assisted features).  `fit` recovers them by
bounded derivative-free least squares against `forward_model`.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import minimize

from . import junction as jn
from .errors import ConfigError, ConvergenceError, IdentifiabilityError
from .junction import Junction
from .special import CONSTANTS, truncation_order

__all__ = [
    "CalibrationModel",
    "NoiseCurve",
    "FitReport",
    "forward_model",
    "fit",
]

# Generous physical bounds; the transforms below keep the simplex inside.
_GAIN_BOUNDS = (1e-2, 1e2)
_T_AMP_MAX = 100.0  # kelvin
_T_ELECTRON_BOUNDS = (1e-3, 10.0)  # kelvin

_N_STARTS = 8
_MAX_EVALUATIONS = 20_000  # per start

_PARAM_NAMES = ("gain", "t_amp", "t_electron", "attenuation")


@dataclasses.dataclass(frozen=True)
class CalibrationModel:
    """Setup parameters entering the measured noise temperature."""

    gain: float  # dimensionless power gain of the chain
    t_amp: float  # kelvin, amplifier noise temperature referred to input
    t_electron: float  # kelvin
    attenuation: float  # generator amplitude -> v_ac at the sample, in (0, 1]

    def __post_init__(self):
        if not (math.isfinite(self.gain) and self.gain > 0.0):
            raise ConfigError(f"gain must be > 0, got {self.gain!r}")
        if not (math.isfinite(self.t_amp) and self.t_amp >= 0.0):
            raise ConfigError(f"t_amp must be >= 0, got {self.t_amp!r}")
        if not (math.isfinite(self.t_electron) and self.t_electron > 0.0):
            raise ConfigError(f"t_electron must be > 0, got {self.t_electron!r}")
        if not (math.isfinite(self.attenuation) and 0.0 < self.attenuation <= 1.0):
            raise ConfigError(
                f"attenuation must be in (0, 1], got {self.attenuation!r}"
            )


@dataclasses.dataclass(frozen=True, eq=False)
class NoiseCurve:
    """Measured noise temperatures on a (generator amplitude, dc bias) grid."""

    v_dc: np.ndarray  # volts, strictly increasing, shape (n_dc,)
    v_gen: np.ndarray  # volts, strictly increasing, shape (n_gen,)
    t_noise: np.ndarray  # kelvin, shape (n_gen, n_dc)
    f: float  # detection frequency, hertz

    def __post_init__(self):
        v_dc = np.asarray(self.v_dc, dtype=float)
        v_gen = np.asarray(self.v_gen, dtype=float)
        t_noise = np.asarray(self.t_noise, dtype=float)
        object.__setattr__(self, "v_dc", v_dc)
        object.__setattr__(self, "v_gen", v_gen)
        object.__setattr__(self, "t_noise", t_noise)
        if v_dc.ndim != 1 or v_dc.size == 0 or not np.all(np.isfinite(v_dc)):
            raise ConfigError("v_dc grid must be a finite 1-d array")
        if v_gen.ndim != 1 or v_gen.size == 0 or not np.all(np.isfinite(v_gen)):
            raise ConfigError("v_gen grid must be a finite 1-d array")
        if v_dc.size > 1 and not np.all(np.diff(v_dc) > 0.0):
            raise ConfigError("v_dc grid must be strictly increasing")
        if v_gen.size > 1 and not np.all(np.diff(v_gen) > 0.0):
            raise ConfigError("v_gen grid must be strictly increasing")
        if np.any(v_gen < 0.0):
            raise ConfigError("generator amplitudes must be >= 0")
        if t_noise.shape != (v_gen.size, v_dc.size):
            raise ConfigError(
                f"t_noise shape {t_noise.shape} does not match "
                f"(n_gen, n_dc) = ({v_gen.size}, {v_dc.size})"
            )
        if not np.all(np.isfinite(t_noise)) or np.any(t_noise <= 0.0):
            raise ConfigError("measured noise temperatures must be finite and > 0")
        if not (math.isfinite(self.f) and self.f > 0.0):
            raise ConfigError(f"detection frequency must be > 0, got {self.f!r}")

    @property
    def n_points(self) -> int:
        return self.t_noise.size


@dataclasses.dataclass(frozen=True)
class FitReport:
    """Outcome of `fit`: the selected model plus diagnostics."""

    model: CalibrationModel
    objective: float  # sum of squared residuals, K^2
    rms: float  # root-mean-square residual, kelvin
    n_points: int
    n_evaluations: int  # total objective evaluations over all starts
    best_start: int
    converged: bool
    start_objectives: tuple[float, ...]
    pinned: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()


def forward_model(model, resistance, v_dc, v_gen, f, f0):
    """Predicted noise temperature on the (v_gen, v_dc) grid, in kelvin.

    T_pred = gain * (S(f; v_dc, attenuation*v_gen, t_electron) * R / 2k_B
                     + t_amp)

    The shifted equilibrium spectra S0(f + n f0 +- nu) are shared across
    all generator amplitudes (only the Bessel weights differ), so a full
    multi-amplitude curve costs two spectrum grids plus one ladder per
    amplitude.
    """
    if not resistance > 0.0:
        raise ConfigError(f"resistance must be > 0, got {resistance!r}")
    if not (f > 0.0 and f0 > 0.0):
        raise ConfigError("f and f0 must be > 0")
    junction = Junction(resistance, model.t_electron)
    v_dc = np.atleast_1d(np.asarray(v_dc, dtype=float))
    v_gen = np.atleast_1d(np.asarray(v_gen, dtype=float))
    e, h, k_b = CONSTANTS.e, CONSTANTS.h, CONSTANTS.k_B
    nu = e * v_dc / h  # (n_dc,)

    z_values = e * (model.attenuation * v_gen) / (h * f0)
    n_max = truncation_order(float(np.max(np.abs(z_values))))
    shifted = f + np.arange(-n_max, n_max + 1)[:, None] * f0  # (2N+1, 1)
    spectra = jn.s0_equilibrium(junction, shifted + nu) + jn.s0_equilibrium(
        junction, shifted - nu
    )  # (2N+1, n_dc)

    out = np.empty((v_gen.size, v_dc.size))
    for g, z in enumerate(z_values):
        weights = jn._bessel_weights(float(z), -n_max, n_max)
        s = 0.5 * np.tensordot(weights**2, spectra, axes=(0, 0))
        out[g] = model.gain * (s * resistance / (2.0 * k_b) + model.t_amp)
    return out


# ---------------------------------------------------------------------------
# bounded parametrization: the simplex walks an unconstrained vector whose
# sigmoid image stays strictly inside the declared physical bounds.


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * np.asarray(x, dtype=float)) + 1.0)


def _logit(q: float) -> float:
    q = min(max(q, 1e-12), 1.0 - 1e-12)
    return math.log(q / (1.0 - q))


def _theta_to_params(theta: np.ndarray) -> np.ndarray:
    # tanh saturates to exactly +-1 for |x| > ~19, which would put the
    # parameters exactly on (or past) their open bounds; stay inside.
    q = np.clip(_sigmoid(theta), 1e-16, 1.0 - 1e-16)
    lg_lo, lg_hi = math.log(_GAIN_BOUNDS[0]), math.log(_GAIN_BOUNDS[1])
    lt_lo, lt_hi = math.log(_T_ELECTRON_BOUNDS[0]), math.log(_T_ELECTRON_BOUNDS[1])
    return np.array(
        [
            math.exp(lg_lo + (lg_hi - lg_lo) * q[0]),
            _T_AMP_MAX * q[1],
            math.exp(lt_lo + (lt_hi - lt_lo) * q[2]),
            q[3],
        ]
    )


def _params_to_theta(params) -> np.ndarray:
    gain, t_amp, t_electron, attenuation = params
    lg_lo, lg_hi = math.log(_GAIN_BOUNDS[0]), math.log(_GAIN_BOUNDS[1])
    lt_lo, lt_hi = math.log(_T_ELECTRON_BOUNDS[0]), math.log(_T_ELECTRON_BOUNDS[1])
    return np.array(
        [
            _logit((math.log(gain) - lg_lo) / (lg_hi - lg_lo)),
            _logit(t_amp / _T_AMP_MAX),
            _logit((math.log(t_electron) - lt_lo) / (lt_hi - lt_lo)),
            _logit(attenuation),
        ]
    )


def _check_initial_bounds(initial: CalibrationModel) -> None:
    checks = (
        ("gain", initial.gain, _GAIN_BOUNDS[0], _GAIN_BOUNDS[1]),
        ("t_amp", initial.t_amp, 0.0, _T_AMP_MAX),
        ("t_electron", initial.t_electron, *_T_ELECTRON_BOUNDS),
        ("attenuation", initial.attenuation, 0.0, 1.0),
    )
    for name, value, lo, hi in checks:
        if not lo <= value <= hi:
            raise ConfigError(
                f"initial {name}={value!r} outside fit bounds [{lo}, {hi}]"
            )


def fit(data, resistance, f0, initial, *, threads=1, callback=None):
    """Least-squares recovery of a CalibrationModel from a noise curve.

    Eight Nelder-Mead starts — the initial guess plus seven copies jittered
    by +-50 percent per parameter (deterministic per start index) — each run
    until the simplex stalls or 20000 evaluations; the winner is chosen by
    (objective, start index).  Starts are independent, so `threads` workers
    change nothing but the wall time.  `callback(start_index, params,
    objective)` is invoked on each accepted simplex step when given.

    Raises ConvergenceError (carrying the best model found) if no start
    converges, and IdentifiabilityError for data a fit cannot constrain.
    """
    if not isinstance(data, NoiseCurve):
        raise ConfigError(f"data must be a NoiseCurve, got {type(data).__name__}")
    n_params = len(_PARAM_NAMES)
    if data.n_points < 4 * n_params:
        raise ConfigError(
            f"need at least {4 * n_params} points to fit {n_params} parameters, "
            f"got {data.n_points}"
        )
    spread = float(np.ptp(data.t_noise))
    if spread <= 1e-12 * float(np.max(data.t_noise)):
        raise IdentifiabilityError(
            "noise curve is constant; gain, temperatures and attenuation "
            "are all unidentifiable"
        )
    _check_initial_bounds(initial)

    pinned: list[str] = []
    warnings: list[str] = []
    if not np.any(data.v_gen > 0.0):
        pinned.append("attenuation")
        warnings.append(
            "all generator amplitudes are zero: attenuation does not enter the "
            f"model and is pinned at its initial value {initial.attenuation!r}"
        )

    free = [i for i, name in enumerate(_PARAM_NAMES) if name not in pinned]
    params0 = np.array(
        [initial.gain, initial.t_amp, initial.t_electron, initial.attenuation]
    )
    theta0_full = _params_to_theta(params0)
    # Constant normalization keeps the objective O(1) so absolute simplex
    # tolerances act as relative ones.
    scale = float(np.sum((data.t_noise - data.t_noise.mean()) ** 2))

    def objective(theta_free: np.ndarray) -> float:
        theta = theta0_full.copy()
        theta[free] = theta_free
        gain, t_amp, t_electron, attenuation = _theta_to_params(theta)
        model = CalibrationModel(gain, t_amp, t_electron, attenuation)
        predicted = forward_model(
            model, resistance, data.v_dc, data.v_gen, data.f, f0
        )
        return float(np.sum((predicted - data.t_noise) ** 2)) / scale

    starts = [params0]
    for k in range(1, _N_STARTS):
        rng = np.random.Generator(np.random.Philox(key=k))
        jitter = 1.0 + rng.uniform(-0.5, 0.5, size=n_params)
        trial = params0 * jitter
        trial[0] = min(max(trial[0], _GAIN_BOUNDS[0]), _GAIN_BOUNDS[1])
        trial[1] = min(max(trial[1], 0.0), _T_AMP_MAX)
        trial[2] = min(max(trial[2], _T_ELECTRON_BOUNDS[0]), _T_ELECTRON_BOUNDS[1])
        trial[3] = min(max(trial[3], 1e-6), 1.0)
        starts.append(trial)

    def run_start(k: int):
        theta_start = _params_to_theta(starts[k])[free]
        cb = None
        if callback is not None:
            cb = lambda xk: callback(
                k, _theta_to_params_at(theta0_full, free, xk), objective(xk)
            )
        res = minimize(
            objective,
            theta_start,
            method="Nelder-Mead",
            callback=cb,
            options={
                "maxfev": _MAX_EVALUATIONS,
                # The objective is normalized to the data variance, so these
                # absolute thresholds act as relative ones; 1e-7 simplex
                # collapse in transformed coordinates is ~1e-8 relative in
                # the parameters.
                "xatol": 1e-7,
                "fatol": 1e-12,
            },
        )
        return float(res.fun), k, res

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(starts))) as pool:
            results = list(pool.map(run_start, range(len(starts))))
    else:
        results = [run_start(k) for k in range(len(starts))]
    total_evaluations = sum(res.nfev for _, _, res in results)

    best_fun, best_start, best_res = min(results, key=lambda r: (r[0], r[1]))
    theta_best = theta0_full.copy()
    theta_best[free] = best_res.x
    gain, t_amp, t_electron, attenuation = _theta_to_params(theta_best)
    model = CalibrationModel(gain, t_amp, t_electron, attenuation)
    ssr = best_fun * scale
    report = FitReport(
        model=model,
        objective=ssr,
        rms=math.sqrt(ssr / data.n_points),
        n_points=data.n_points,
        n_evaluations=total_evaluations,
        best_start=best_start,
        converged=any(res.success for _, _, res in results),
        start_objectives=tuple(fun for fun, _, _ in sorted(results, key=lambda r: r[1])),
        pinned=tuple(pinned),
        warnings=tuple(warnings),
    )
    if not report.converged:
        raise ConvergenceError(
            f"no Nelder-Mead start converged within {_MAX_EVALUATIONS} "
            "evaluations; best-so-far model attached",
            best_model=model,
            report=report,
        )
    return report


def _theta_to_params_at(theta_full, free, theta_free):
    theta = np.asarray(theta_full, dtype=float).copy()
    theta[free] = theta_free
    return _theta_to_params(theta)
