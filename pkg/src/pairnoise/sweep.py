"""Parameter sweeps over (v_dc, v_ac) with CSV and figure output."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import junction as jn
from .errors import ConfigError
from .junction import DetectionBand, Drive, Junction

__all__ = ["SweepSpec", "OUTPUT_COLUMNS", "run_sweep"]

KEY_COLUMNS = ("v_dc_V", "v_ac_V", "f0_Hz")
OUTPUT_COLUMNS = ("g2", "nrf", "n1", "n2", "p_pair", "pair_rate_per_s", "g2_K2")

# Requested-output tokens -> canonical CSV column names.
_REQUEST_TO_COLUMN = {
    "g2": "g2",
    "nrf": "nrf",
    "n1": "n1",
    "n2": "n2",
    "p_pair": "p_pair",
    "pair_rate": "pair_rate_per_s",
    "g2_kelvin2": "g2_K2",
}


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """One sweep: a dc-bias grid crossed with a list of ac amplitudes."""

    junction: Junction
    f0: float  # drive frequency, hertz (v_dc, v_ac vary per point)
    bands: tuple[DetectionBand, DetectionBand]
    v_dc_start: float  # volts
    v_dc_stop: float
    v_dc_step: float
    v_ac: tuple[float, ...]  # volts, one trace per entry
    outputs: tuple[str, ...]  # subset of _REQUEST_TO_COLUMN keys
    pair_bandwidth: float = 2e8  # hertz, counting bandwidth for pair_rate
    out_path: str = ""
    plot_path: str = ""

    def __post_init__(self):
        object.__setattr__(self, "v_ac", tuple(float(v) for v in self.v_ac))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not (math.isfinite(self.v_dc_step) and self.v_dc_step > 0.0):
            raise ConfigError(f"v_dc_step must be > 0, got {self.v_dc_step!r}")
        if not self.v_dc_start < self.v_dc_stop:
            raise ConfigError(
                f"v_dc grid is empty: start {self.v_dc_start!r} must be below "
                f"stop {self.v_dc_stop!r}"
            )
        if not self.v_ac:
            raise ConfigError("v_ac list must not be empty")
        if not all(math.isfinite(v) and v >= 0.0 for v in self.v_ac):
            raise ConfigError(f"v_ac entries must be finite and >= 0, got {self.v_ac!r}")
        if not self.outputs:
            raise ConfigError(
                f"at least one output must be requested; choose from "
                f"{sorted(_REQUEST_TO_COLUMN)}"
            )
        unknown = [token for token in self.outputs if token not in _REQUEST_TO_COLUMN]
        if unknown:
            raise ConfigError(
                f"unknown outputs {unknown}; valid tokens: {sorted(_REQUEST_TO_COLUMN)}"
            )
        if not (math.isfinite(self.pair_bandwidth) and self.pair_bandwidth > 0.0):
            raise ConfigError(
                f"pair_bandwidth must be > 0, got {self.pair_bandwidth!r}"
            )

    @property
    def v_dc_grid(self) -> np.ndarray:
        count = int(math.floor((self.v_dc_stop - self.v_dc_start) / self.v_dc_step + 1e-9)) + 1
        return self.v_dc_start + self.v_dc_step * np.arange(count)

    @property
    def columns(self) -> tuple[str, ...]:
        requested = {_REQUEST_TO_COLUMN[token] for token in self.outputs}
        return KEY_COLUMNS + tuple(c for c in OUTPUT_COLUMNS if c in requested)


def _compute_row(spec: SweepSpec, v_ac: float, v_dc: float) -> dict:
    drive = Drive(v_dc=float(v_dc), v_ac=float(v_ac), f0=spec.f0)
    stats = jn.pair_stats(spec.junction, drive, *spec.bands)
    values = {
        "v_dc_V": float(v_dc),
        "v_ac_V": float(v_ac),
        "f0_Hz": spec.f0,
        "g2": stats.g2,
        "nrf": stats.nrf,
        "n1": stats.n1,
        "n2": stats.n2,
        "p_pair": stats.p_pair_given_2,
        "g2_K2": stats.g2_kelvin2,
    }
    if "pair_rate_per_s" in spec.columns:
        values["pair_rate_per_s"] = jn.pair_rate(
            spec.junction, drive, *spec.bands, spec.pair_bandwidth
        )
    return {key: values[key] for key in spec.columns}


def run_sweep(spec: SweepSpec, threads: int = 1) -> list[dict]:
    """Evaluate the sweep; write CSV / figure files when paths are set.

    Rows come back in deterministic grid order (v_ac outer, v_dc inner)
    regardless of thread count or completion order.
    """
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    grid = spec.v_dc_grid
    points = [(v_ac, v_dc) for v_ac in spec.v_ac for v_dc in grid]
    if threads == 1:
        rows = [_compute_row(spec, v_ac, v_dc) for v_ac, v_dc in points]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda p: _compute_row(spec, *p), points))
    if spec.out_path:
        from .configio import write_sweep_csv

        write_sweep_csv(spec.out_path, rows, spec.columns)
    if spec.plot_path:
        from .plotting import render_sweep

        render_sweep(rows, spec.columns, spec.plot_path)
    return rows
