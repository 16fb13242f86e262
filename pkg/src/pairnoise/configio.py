"""Config-file and CSV serialization.

Configs are INI-style text with sections; every physical quantity carries
an explicit unit suffix (``v_dc = 16 uV``, ``f0 = 11.6 GHz``) and is parsed
strictly — a missing or wrong unit is a schema error naming the offending
section and key.  Unit bugs are the dominant failure mode in this domain,
so nothing is ever guessed.

CSV schemas use canonical column names and 12-significant-digit decimal
text so that rows survive a write/read round trip losslessly.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import math
import os

import numpy as np

from .calibration import CalibrationModel, NoiseCurve
from .detection import McConfig
from .errors import ConfigError, SchemaError
from .junction import DetectionBand, Drive, Junction
from .sweep import OUTPUT_COLUMNS, SweepSpec

__all__ = [
    "CalibrationJob",
    "load_config",
    "load_sweep_spec",
    "load_mc_config",
    "load_calibration_job",
    "write_sweep_csv",
    "read_noise_curve_csv",
    "write_noise_curve_csv",
    "append_mc_csv",
]

VOLT_UNITS = {"V": 1.0, "mV": 1e-3, "uV": 1e-6, "nV": 1e-9}
HERTZ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
KELVIN_UNITS = {"K": 1.0, "mK": 1e-3, "uK": 1e-6}
OHM_UNITS = {"ohm": 1.0, "kohm": 1e3}
SECOND_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9, "ps": 1e-12}

NOISE_CURVE_COLUMNS = ("v_dc_V", "v_gen_V", "f_Hz", "t_noise_K")
MC_CSV_COLUMNS = (
    "seed",
    "n_windows",
    "g2_est_K2",
    "g2_err_K2",
    "expected_g2_K2",
    "mean_p1_K",
    "mean_p2_K",
    "n_samples",
)


def _fmt(value: float) -> str:
    # repr() is the shortest string that reparses to the identical float,
    # so CSV round trips are exact rather than merely close.
    return repr(float(value))


# ---------------------------------------------------------------------------
# strict quantity parsing


def _parse_quantity(raw: str, units: dict[str, float], where: str) -> float:
    parts = raw.split()
    if len(parts) != 2:
        raise SchemaError(
            f"{where}: expected '<number> <unit>' with unit in "
            f"{sorted(units)}, got {raw!r}"
        )
    text, unit = parts
    if unit not in units:
        raise SchemaError(
            f"{where}: unknown unit {unit!r}; expected one of {sorted(units)}"
        )
    try:
        value = float(text)
    except ValueError:
        raise SchemaError(f"{where}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise SchemaError(f"{where}: value must be finite, got {text!r}")
    return value * units[unit]


def _parse_bare(raw: str, where: str) -> float:
    parts = raw.split()
    if len(parts) != 1:
        raise SchemaError(f"{where}: expected a bare number, got {raw!r}")
    try:
        value = float(parts[0])
    except ValueError:
        raise SchemaError(f"{where}: {parts[0]!r} is not a number") from None
    if not math.isfinite(value):
        raise SchemaError(f"{where}: value must be finite, got {raw!r}")
    return value


def _parse_count(raw: str, where: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise SchemaError(f"{where}: {raw!r} is not an integer") from None


class _Section:
    """One config section with typed, unit-checked accessors.

    ``optional`` sections may be absent entirely, in which case every key
    falls back to its default (keys without defaults still raise).
    """

    def __init__(self, parser: configparser.ConfigParser, name: str, optional=False):
        if not parser.has_section(name):
            if not optional:
                raise SchemaError(f"missing required config section [{name}]")
            self._map = {}
        else:
            self._map = parser[name]
        self._name = name

    def _raw(self, key: str) -> str:
        if key not in self._map:
            raise SchemaError(f"{self._name}.{key}: missing required key")
        return self._map[key]

    def where(self, key: str) -> str:
        return f"{self._name}.{key}"

    def has(self, key: str) -> bool:
        return key in self._map

    def quantity(self, key: str, units: dict[str, float], default=None) -> float:
        if default is not None and key not in self._map:
            return default
        return _parse_quantity(self._raw(key), units, self.where(key))

    def quantity_list(self, key: str, units: dict[str, float]) -> tuple[float, ...]:
        raw = self._raw(key)
        items = [item.strip() for item in raw.split(",")]
        if items == [""]:
            return ()
        return tuple(
            _parse_quantity(item, units, self.where(key)) for item in items
        )

    def number(self, key: str, default=None) -> float:
        if default is not None and key not in self._map:
            return default
        return _parse_bare(self._raw(key), self.where(key))

    def count(self, key: str, default=None) -> int:
        if default is not None and key not in self._map:
            return default
        return _parse_count(self._raw(key), self.where(key))

    def text(self, key: str, default=None) -> str:
        if default is not None and key not in self._map:
            return default
        return self._raw(key).strip()


def load_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        strict=True, inline_comment_prefixes=("#", ";")
    )
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    return parser


# ---------------------------------------------------------------------------
# section builders


def _build_junction(parser) -> Junction:
    section = _Section(parser, "junction")
    return Junction(
        resistance=section.quantity("resistance", OHM_UNITS),
        electron_temperature=section.quantity("temperature", KELVIN_UNITS),
    )


def _build_bands(parser, policy_override=None):
    section = _Section(parser, "bands")
    policy = policy_override or section.text("policy", "center")
    return (
        DetectionBand(
            f_center=section.quantity("f1", HERTZ_UNITS),
            bandwidth=section.quantity("bandwidth1", HERTZ_UNITS),
            policy=policy,
        ),
        DetectionBand(
            f_center=section.quantity("f2", HERTZ_UNITS),
            bandwidth=section.quantity("bandwidth2", HERTZ_UNITS),
            policy=policy,
        ),
    )


def load_sweep_spec(path, band_policy=None) -> SweepSpec:
    """Build a SweepSpec from a config file; CLI overrides come later."""
    parser = load_config(path)
    section = _Section(parser, "sweep")
    drive_section = _Section(parser, "drive")
    outputs = tuple(
        token.strip() for token in section.text("outputs").split(",") if token.strip()
    )
    return SweepSpec(
        junction=_build_junction(parser),
        f0=drive_section.quantity("f0", HERTZ_UNITS),
        bands=_build_bands(parser, band_policy),
        v_dc_start=section.quantity("v_dc_start", VOLT_UNITS),
        v_dc_stop=section.quantity("v_dc_stop", VOLT_UNITS),
        v_dc_step=section.quantity("v_dc_step", VOLT_UNITS),
        v_ac=section.quantity_list("v_ac", VOLT_UNITS),
        outputs=outputs,
        pair_bandwidth=section.quantity("pair_bandwidth", HERTZ_UNITS, default=2e8),
        out_path=section.text("out", ""),
        plot_path=section.text("plot", ""),
    )


def load_mc_config(path, seed=None, band_policy=None) -> McConfig:
    parser = load_config(path)
    # every [mc] key has a default, so the whole section may be omitted
    section = _Section(parser, "mc", optional=True)
    drive_section = _Section(parser, "drive")
    drive = Drive(
        v_dc=drive_section.quantity("v_dc", VOLT_UNITS),
        v_ac=drive_section.quantity("v_ac", VOLT_UNITS),
        f0=drive_section.quantity("f0", HERTZ_UNITS),
    )
    crosstalk_raw = section.text("crosstalk", "1 0 0 1")
    entries = crosstalk_raw.split()
    if len(entries) != 4:
        raise SchemaError(
            f"{section.where('crosstalk')}: expected 4 row-major entries, "
            f"got {crosstalk_raw!r}"
        )
    try:
        m00, m01, m10, m11 = (float(entry) for entry in entries)
    except ValueError:
        raise SchemaError(
            f"{section.where('crosstalk')}: entries must be numbers"
        ) from None
    return McConfig(
        junction=_build_junction(parser),
        drive=drive,
        bands=_build_bands(parser, band_policy),
        bins_per_band=section.count("bins_per_band", default=64),
        amp_noise_temperature=section.quantity(
            "amp_noise_temperature", KELVIN_UNITS, default=5.0
        ),
        detector_time_constant=section.quantity(
            "detector_time_constant", SECOND_UNITS, default=1e-9
        ),
        sample_rate=section.quantity("sample_rate", HERTZ_UNITS, default=4e8),
        n_windows=section.count("n_windows", default=1 << 16),
        seed=seed if seed is not None else section.count("seed", default=0),
        crosstalk=((m00, m01), (m10, m11)),
        source_mode=section.text("source_mode", default="junction"),
        t_source=section.quantity("t_source", KELVIN_UNITS, default=0.1),
    )


@dataclasses.dataclass(frozen=True)
class CalibrationJob:
    """Everything `pairnoise calibrate` needs besides the data file."""

    data_path: str
    resistance: float
    f0: float
    initial: CalibrationModel
    report_path: str = ""


def load_calibration_job(path) -> CalibrationJob:
    parser = load_config(path)
    section = _Section(parser, "calibrate")
    initial = CalibrationModel(
        gain=section.number("initial_gain", default=1.0),
        t_amp=section.quantity("initial_t_amp", KELVIN_UNITS, default=3.0),
        t_electron=section.quantity("initial_t_electron", KELVIN_UNITS, default=0.05),
        attenuation=section.number("initial_attenuation", default=0.5),
    )
    return CalibrationJob(
        data_path=section.text("data"),
        resistance=section.quantity("resistance", OHM_UNITS),
        f0=section.quantity("f0", HERTZ_UNITS),
        initial=initial,
        report_path=section.text("report", ""),
    )


# ---------------------------------------------------------------------------
# CSV schemas


def write_sweep_csv(path, rows, columns) -> None:
    """Write sweep rows (dicts keyed by canonical column names)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(_fmt(row[column]) for column in columns)


def read_sweep_csv(path):
    """Sweep CSV back as (columns, list of dict rows with float values)."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty CSV") from None
        unknown = [c for c in header if c not in ("v_dc_V", "v_ac_V", "f0_Hz") + OUTPUT_COLUMNS]
        if unknown:
            raise SchemaError(f"{path}: unknown columns {unknown}")
        rows = []
        for index, record in enumerate(reader, start=2):
            if len(record) != len(header):
                raise SchemaError(
                    f"{path}: row {index} has {len(record)} fields, "
                    f"expected {len(header)}"
                )
            try:
                rows.append(
                    {key: float(text) for key, text in zip(header, record)}
                )
            except ValueError:
                raise SchemaError(
                    f"{path}: row {index} contains a non-numeric field"
                ) from None
    return header, rows


def write_noise_curve_csv(path, curve: NoiseCurve) -> None:
    """Noise curve in long form, one row per (v_gen, v_dc) point."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(NOISE_CURVE_COLUMNS)
        for g, v_gen in enumerate(curve.v_gen):
            for i, v_dc in enumerate(curve.v_dc):
                writer.writerow(
                    (
                        _fmt(v_dc),
                        _fmt(v_gen),
                        _fmt(curve.f),
                        _fmt(curve.t_noise[g, i]),
                    )
                )


def read_noise_curve_csv(path) -> NoiseCurve:
    """Parse a long-form noise-curve CSV back onto its rectangular grid."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty CSV") from None
        if tuple(header) != NOISE_CURVE_COLUMNS:
            raise SchemaError(
                f"{path}: header {header!r} does not match the noise-curve "
                f"schema {list(NOISE_CURVE_COLUMNS)}"
            )
        records = []
        for index, record in enumerate(reader, start=2):
            if len(record) != 4:
                raise SchemaError(
                    f"{path}: row {index} has {len(record)} fields, expected 4"
                )
            try:
                records.append(tuple(float(text) for text in record))
            except ValueError:
                raise SchemaError(
                    f"{path}: row {index} contains a non-numeric field"
                ) from None
    if not records:
        raise SchemaError(f"{path}: no data rows")

    data = np.asarray(records)
    v_dc = np.unique(data[:, 0])
    v_gen = np.unique(data[:, 1])
    frequencies = np.unique(data[:, 2])
    if frequencies.size != 1:
        raise SchemaError(
            f"{path}: detection frequency must be constant, found "
            f"{frequencies.size} distinct values"
        )
    if data.shape[0] != v_dc.size * v_gen.size:
        raise SchemaError(
            f"{path}: rows do not form a complete (v_gen x v_dc) grid: "
            f"{data.shape[0]} rows for {v_gen.size} x {v_dc.size} points"
        )
    t_noise = np.full((v_gen.size, v_dc.size), np.nan)
    for v_dc_value, v_gen_value, _, t_value in records:
        g = int(np.searchsorted(v_gen, v_gen_value))
        i = int(np.searchsorted(v_dc, v_dc_value))
        if not np.isnan(t_noise[g, i]):
            raise SchemaError(
                f"{path}: duplicate row for v_dc={v_dc_value!r}, "
                f"v_gen={v_gen_value!r}"
            )
        t_noise[g, i] = t_value
    try:
        return NoiseCurve(v_dc=v_dc, v_gen=v_gen, t_noise=t_noise, f=float(frequencies[0]))
    except ConfigError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def append_mc_csv(path, record: dict) -> None:
    """Append one MC result row, writing the header on first use."""
    new_file = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if new_file:
            writer.writerow(MC_CSV_COLUMNS)
        writer.writerow(
            (
                str(record["seed"]),
                str(record["n_windows"]),
                _fmt(record["g2_est_K2"]),
                _fmt(record["g2_err_K2"]),
                _fmt(record["expected_g2_K2"]),
                _fmt(record["mean_p1_K"]),
                _fmt(record["mean_p2_K"]),
                str(record["n_samples"]),
            )
        )
