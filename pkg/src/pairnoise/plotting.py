"""Figure rendering for sweep output (vector files, one subplot per quantity)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .errors import ConfigError
from .sweep import KEY_COLUMNS

_AXIS_LABELS = {
    "g2": "$g_2$",
    "g2_K2": "$G_2$  (K$^2$)",
    "nrf": "NRF",
    "n1": r"$\langle n_1 \rangle$",
    "n2": r"$\langle n_2 \rangle$",
    "p_pair": "$P(1|2)$",
    "pair_rate_per_s": "pair rate  (s$^{-1}$)",
}

# Quantities where the level 1 is meaningful (independent emission / no
# squeezing); drawn as a reference line.
_UNITY_REFERENCE = {"g2", "nrf"}


def render_sweep(rows: list[dict], columns, path) -> None:
    """Render sweep rows to a self-contained figure file.

    One subplot per requested quantity versus dc bias (in uV), one trace
    per ac amplitude.  The format follows the file extension (svg, pdf,
    png, ...).  Pure view: the rows are not modified.
    """
    quantities = [c for c in columns if c not in KEY_COLUMNS]
    if not quantities:
        raise ConfigError("nothing to plot: no output quantities in columns")
    if not rows:
        raise ConfigError("nothing to plot: no rows")

    traces: dict[float, list[dict]] = {}
    for row in rows:
        traces.setdefault(row["v_ac_V"], []).append(row)

    fig, axes = plt.subplots(
        len(quantities),
        1,
        figsize=(7.0, 1.0 + 2.4 * len(quantities)),
        sharex=True,
        squeeze=False,
    )
    for ax, quantity in zip(axes[:, 0], quantities):
        for v_ac, series in traces.items():
            x = [row["v_dc_V"] * 1e6 for row in series]
            y = [row[quantity] for row in series]
            ax.plot(x, y, linewidth=1.2, label=f"$V_{{ac}}$ = {v_ac * 1e6:.3g} uV")
        if quantity in _UNITY_REFERENCE:
            ax.axhline(1.0, color="0.6", linewidth=0.8, linestyle=":")
        ax.set_ylabel(_AXIS_LABELS.get(quantity, quantity))
        ax.grid(alpha=0.25)
    axes[0, 0].legend(fontsize=8, loc="best")
    axes[-1, 0].set_xlabel("$V_{dc}$  (uV)")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
