"""Tests for the sweep engine and its CSV/figure output."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

import pairnoise.junction as jn
from pairnoise.configio import read_sweep_csv
from pairnoise.errors import ConfigError
from pairnoise.junction import DetectionBand, Drive, Junction
from pairnoise.plotting import render_sweep
from pairnoise.sweep import SweepSpec, run_sweep

SAMPLE = Junction(resistance=23.6, electron_temperature=0.020)
BANDS = (
    DetectionBand(f_center=4.4e9, bandwidth=0.66e9),
    DetectionBand(f_center=7.2e9, bandwidth=0.38e9),
)


def small_spec(**overrides) -> SweepSpec:
    base = dict(
        junction=SAMPLE,
        f0=11.6e9,
        bands=BANDS,
        v_dc_start=-30e-6,
        v_dc_stop=30e-6,
        v_dc_step=5e-6,
        v_ac=(16e-6, 22e-6),
        outputs=("g2", "nrf", "n1", "n2", "pair_rate", "g2_kelvin2", "p_pair"),
    )
    base.update(overrides)
    return SweepSpec(**base)


def test_spec_validation():
    with pytest.raises(ConfigError):
        small_spec(v_dc_step=0.0)
    with pytest.raises(ConfigError):
        small_spec(v_dc_start=1e-5, v_dc_stop=-1e-5)
    with pytest.raises(ConfigError):
        small_spec(v_ac=())
    with pytest.raises(ConfigError):
        small_spec(v_ac=(-1e-6,))
    with pytest.raises(ConfigError):
        small_spec(outputs=())
    with pytest.raises(ConfigError, match="unknown outputs"):
        small_spec(outputs=("g2", "entropy"))
    with pytest.raises(ConfigError):
        small_spec(pair_bandwidth=0.0)


def test_default_grid_has_601_points():
    spec = small_spec(v_dc_start=-150e-6, v_dc_stop=150e-6, v_dc_step=0.5e-6)
    grid = spec.v_dc_grid
    assert grid.size == 601
    assert grid[0] == pytest.approx(-150e-6, rel=1e-12)
    assert grid[-1] == pytest.approx(150e-6, rel=1e-12)
    assert np.all(np.diff(grid) > 0.0)


def test_columns_are_canonical_order():
    spec = small_spec(outputs=("nrf", "g2"))
    assert spec.columns == ("v_dc_V", "v_ac_V", "f0_Hz", "g2", "nrf")
    spec = small_spec(outputs=("pair_rate",))
    assert spec.columns == ("v_dc_V", "v_ac_V", "f0_Hz", "pair_rate_per_s")


def test_rows_match_direct_evaluation():
    spec = small_spec()
    rows = run_sweep(spec)
    assert len(rows) == 2 * spec.v_dc_grid.size
    # deterministic order: v_ac outer, v_dc inner
    assert rows[0]["v_ac_V"] == 16e-6
    assert rows[spec.v_dc_grid.size]["v_ac_V"] == 22e-6
    probe = rows[3]
    drive = Drive(v_dc=probe["v_dc_V"], v_ac=probe["v_ac_V"], f0=11.6e9)
    stats = jn.pair_stats(SAMPLE, drive, *BANDS)
    assert probe["g2"] == stats.g2
    assert probe["nrf"] == stats.nrf
    assert probe["n1"] == stats.n1
    assert probe["g2_K2"] == stats.g2_kelvin2
    assert probe["pair_rate_per_s"] == jn.pair_rate(SAMPLE, drive, *BANDS, 2e8)


def test_thread_count_does_not_change_rows():
    spec = small_spec()
    assert run_sweep(spec, threads=1) == run_sweep(spec, threads=4)
    with pytest.raises(ConfigError):
        run_sweep(spec, threads=0)


def test_csv_round_trip_recomputes_exactly(tmp_path):
    out = tmp_path / "sweep.csv"
    spec = small_spec(out_path=str(out))
    run_sweep(spec)
    header, rows = read_sweep_csv(out)
    assert tuple(header) == spec.columns
    for row in rows:
        drive = Drive(v_dc=row["v_dc_V"], v_ac=row["v_ac_V"], f0=row["f0_Hz"])
        stats = jn.pair_stats(SAMPLE, drive, *BANDS)
        assert row["g2"] == pytest.approx(stats.g2, rel=1e-12)
        assert row["nrf"] == pytest.approx(stats.nrf, rel=1e-12)
        assert row["n1"] == pytest.approx(stats.n1, rel=1e-12)
        assert row["n2"] == pytest.approx(stats.n2, rel=1e-12)
        assert row["p_pair"] == pytest.approx(stats.p_pair_given_2, rel=1e-12)
        assert row["g2_K2"] == pytest.approx(stats.g2_kelvin2, rel=1e-12)
        assert row["pair_rate_per_s"] == pytest.approx(
            jn.pair_rate(SAMPLE, drive, *BANDS, 2e8), rel=1e-12
        )


def test_plot_file_rendered(tmp_path):
    out = tmp_path / "sweep.csv"
    figure = tmp_path / "sweep.svg"
    spec = small_spec(out_path=str(out), plot_path=str(figure))
    run_sweep(spec)
    assert figure.exists()
    assert figure.stat().st_size > 1000
    text = figure.read_text(encoding="utf-8")
    assert "<svg" in text


def test_plot_is_a_pure_view(tmp_path):
    out = tmp_path / "sweep.csv"
    spec = small_spec(out_path=str(out))
    rows = run_sweep(spec)
    before_rows = [dict(row) for row in rows]
    before_csv = out.read_bytes()
    render_sweep(rows, spec.columns, str(tmp_path / "view.png"))
    assert rows == before_rows
    assert out.read_bytes() == before_csv
    assert (tmp_path / "view.png").stat().st_size > 0


def test_plot_rejects_degenerate_input(tmp_path):
    with pytest.raises(ConfigError, match="no output quantities"):
        render_sweep([{"v_dc_V": 0.0}], ("v_dc_V",), str(tmp_path / "x.svg"))
    with pytest.raises(ConfigError, match="no rows"):
        render_sweep([], ("v_dc_V", "g2"), str(tmp_path / "x.svg"))


def test_sweep_spec_is_frozen():
    spec = small_spec()
    with pytest.raises(dataclasses.FrozenInstanceError):
        spec.f0 = 1.0
