import logging
import os
from typing import List, Sequence, Union

from backend.app.enums import PresetKind
from backend.app.exceptions import ConfigError
from backend.app.presets import get_preset
from backend.app.utils import read_csv

logger = logging.getLogger(__name__)

# Column plotted for each layout, by y-axis label
_MAIN_COLUMNS = {
    PresetKind.SIGMA: ("sigma_total", "sigma_Q(t)"),
    PresetKind.DIFFUSION: ("dq_total", "D_Q(t)"),
    PresetKind.CLASSICAL_SIGMA: ("sigma_clas", "sigma_clas(t)"),
    PresetKind.CLASSICAL_DIFFUSION: ("d_clas", "D_clas(t)"),
}


def _resolve_style(style: Union[str, PresetKind]) -> PresetKind:
    if isinstance(style, PresetKind):
        return style
    try:
        return PresetKind(style)
    except ValueError:
        pass
    try:
        return get_preset(style).kind
    except ConfigError:
        raise ConfigError(f"Unknown plot style '{style}'") from None


def _title(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0].replace("_", " ")


def _plot_line(paths: Sequence[str], column: str) -> str:
    parts = [f'"{p}" using "t":"{column}" with lines title "{_title(p)}"' for p in paths]
    return "plot " + ", \\\n     ".join(parts)


def emit_plot_script(csv_paths: Sequence[str], style: Union[str, PresetKind]) -> str:
    """
    gnuplot command text for a set of CSVs written by the presets or the CLI.

    style is a preset name or a PresetKind. Correlation tables get a two-panel
    real/imaginary layout; diffusion tables get an Omega(t) inset read from the
    matching *_omega.csv files.
    """
    if not csv_paths:
        raise ConfigError("emit_plot_script needs at least one CSV file")
    kind = _resolve_style(style)
    paths: List[str] = [p for p in csv_paths if not p.endswith("_omega.csv")]
    for path in csv_paths:
        frame, _ = read_csv(path)
        if "t" not in frame.columns:
            raise ConfigError(f"{path} has no 't' column")

    lines = [
        "# generated by qbm plot-script",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
    ]
    if kind is PresetKind.CORRELATION:
        lines += [
            "set multiplot layout 2,1",
            "set ylabel 'Re <q(t) q0>'",
            _plot_line(paths, "S"),
            "set ylabel 'Im <q(t) q0>'",
            _plot_line(paths, "A"),
            "unset multiplot",
        ]
    elif kind is PresetKind.DIFFUSION:
        insets = [f"{os.path.splitext(p)[0]}_omega.csv" for p in paths]
        missing = [p for p in insets if not os.path.exists(p)]
        if missing:
            raise ConfigError(f"Omega inset data not found: {', '.join(missing)}")
        column, label = _MAIN_COLUMNS[kind]
        lines += [
            "set multiplot",
            f"set ylabel '{label}'",
            _plot_line(paths, column),
            "set origin 0.55,0.55",
            "set size 0.4,0.4",
            "unset xlabel",
            "set ylabel 'Omega(t)'",
            _plot_line(insets, "omega_drift"),
            "unset multiplot",
        ]
    else:
        column, label = _MAIN_COLUMNS[kind]
        lines += [f"set ylabel '{label}'", _plot_line(paths, column)]

    logger.info(f"Plot script for {len(paths)} files, layout {kind}")
    return "\n".join(lines) + "\n"
