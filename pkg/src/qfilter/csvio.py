"""Delimited output of ensemble statistics.

Single-qubit runs produce 8 columns, two-qubit runs 12 (the correlation
means slot in before ``n_unstable``).  Values carry 12 significant digits;
times are in units of 1/omega0.  The correlation columns are sampled every
``corr_stride`` steps and held constant between samples.
"""

from __future__ import annotations

from pathlib import Path

from .ensemble import EnsembleStats

BASE_COLUMNS = [
    "time",
    "mean_purity_true",
    "sem_purity_true",
    "mean_purity_filter",
    "sem_purity_filter",
    "mean_fidelity",
    "sem_fidelity",
]
CORR_COLUMNS = [
    "mean_ccorr_true",
    "mean_ccorr_filter",
    "mean_discord_true",
    "mean_discord_filter",
]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def render_csv(stats: EnsembleStats) -> str:
    cols = list(BASE_COLUMNS)
    if stats.has_correlations:
        cols += CORR_COLUMNS
    cols.append("n_unstable")
    lines = [",".join(cols)]
    for i, t in enumerate(stats.times):
        row = [
            _fmt(t),
            _fmt(stats.mean_purity_true[i]),
            _fmt(stats.sem_purity_true[i]),
            _fmt(stats.mean_purity_filter[i]),
            _fmt(stats.sem_purity_filter[i]),
            _fmt(stats.mean_fidelity[i]),
            _fmt(stats.sem_fidelity[i]),
        ]
        if stats.has_correlations:
            row += [
                _fmt(stats.mean_ccorr_true[i]),
                _fmt(stats.mean_ccorr_filter[i]),
                _fmt(stats.mean_discord_true[i]),
                _fmt(stats.mean_discord_filter[i]),
            ]
        row.append(str(stats.n_unstable))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_csv(stats: EnsembleStats, path) -> None:
    Path(path).write_text(render_csv(stats))


def write_sweep_csv(rows: list[tuple[float, float, float]], path) -> None:
    """Angle-sweep output: one row per angle with the final-time fidelity."""
    lines = ["angle_deg,mean_fidelity,sem_fidelity"]
    for angle, mean, sem in rows:
        lines.append(f"{_fmt(angle)},{_fmt(mean)},{_fmt(sem)}")
    Path(path).write_text("\n".join(lines) + "\n")
