"""Deterministic SVG rendering of profile CSVs.

Each ``profiles/<name>.csv`` becomes ``plots/<name>.svg`` with two panels:
``p`` and the reference versus distance, and their ratio versus distance.
An axis turns logarithmic when its positive data span more than three
decades. The canvas size, fonts, hash salt and metadata are fixed, so
identical CSVs give byte-identical SVGs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .errors import InputError
from .reports import read_profile_csv

FIGSIZE = (8.0, 3.2)
LOG_DECADES = 3.0
SVG_HASHSALT = "heatlab"

_RC = {
    "svg.hashsalt": SVG_HASHSALT,
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "path.simplify": False,
}


def _wants_log(values) -> bool:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v) & (v > 0)]
    return v.size >= 2 and float(np.log10(v.max() / v.min())) > LOG_DECADES


def render_profile(csv_path, svg_path) -> Path:
    """Render one profile CSV to ``svg_path``.

    Raises
    ------
    InputError
        If the CSV is missing, malformed or has no rows; nothing is written then.
    """
    csv_path, svg_path = Path(csv_path), Path(svg_path)
    if not csv_path.is_file():
        raise InputError(f"profile CSV not found: {csv_path}")
    try:
        prof = read_profile_csv(csv_path)
    except ValueError as e:
        raise InputError(str(e)) from None
    if prof["distance"].size == 0:
        raise InputError(f"profile CSV has no rows: {csv_path}")
    r = prof["distance"]
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=FIGSIZE)
        ax1, ax2 = fig.subplots(1, 2)
        ax1.plot(r, prof["p"], marker=".", linestyle="none", markersize=3, label="p")
        ax1.plot(r, prof["reference"], linestyle="-", linewidth=1.0, label="reference")
        ax1.set_xlabel("|x - y|")
        ax1.set_ylabel("value")
        ax1.legend(loc="best")
        if _wants_log(np.concatenate([prof["p"], prof["reference"]])):
            ax1.set_yscale("log")
        ratio = prof["ratio"]
        ax2.plot(r, ratio, marker=".", linestyle="none", markersize=3, color="C2")
        ax2.set_xlabel("|x - y|")
        ax2.set_ylabel("p / reference")
        if _wants_log(ratio):
            ax2.set_yscale("log")
        for ax in (ax1, ax2):
            if _wants_log(r):
                ax.set_xscale("log")
        fig.suptitle(csv_path.stem)
        fig.tight_layout()
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(svg_path, format="svg", metadata={"Date": None, "Creator": None})
    return svg_path


def emit_plots(report_dir) -> list[Path]:
    """Render every ``profiles/*.csv`` under ``report_dir`` into ``plots/``.

    Raises
    ------
    InputError
        If the directory has no profile CSVs, or any CSV is empty or malformed.
        All CSVs are validated before any SVG is written.
    """
    report_dir = Path(report_dir)
    csvs = sorted((report_dir / "profiles").glob("*.csv"))
    if not csvs:
        raise InputError(f"no profile CSVs under {report_dir / 'profiles'}")
    for c in csvs:
        try:
            prof = read_profile_csv(c)
        except ValueError as e:
            raise InputError(str(e)) from None
        if prof["distance"].size == 0:
            raise InputError(f"profile CSV has no rows: {c}")
    return [render_profile(c, report_dir / "plots" / f"{c.stem}.svg") for c in csvs]
