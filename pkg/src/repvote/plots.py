"""Figure rendering for CLI reports. Headless: Agg only, PNG files out."""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .recovery import RecoveryCell  # noqa: E402

_DPI = 150


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def line_figure(
    series: Mapping[str, Sequence[tuple[float, float]]],
    path: str | Path,
    xlabel: str,
    ylabel: str,
    title: str,
) -> Path:
    """One line per labeled series; points are (x, y) pairs."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for label in sorted(series):
        points = sorted(series[label])
        ax.plot(
            [x for x, _ in points],
            [y for _, y in points],
            marker="o",
            markersize=3.5,
            linewidth=1.4,
            label=label,
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize=8)
    return _save(fig, path)


def recovery_figure(cells: Iterable[RecoveryCell], path: str | Path) -> Path:
    """Mean recovery vs turnout, one line per (model, rule).

    Cells without recoverable loss are skipped, matching how means are
    reported.
    """
    buckets: dict[tuple[str, str, Fraction], list[Fraction]] = defaultdict(list)
    for cell in cells:
        if cell.recovery is None:
            continue
        buckets[(cell.model_name, cell.rule, cell.turnout_fraction)].append(
            cell.recovery
        )
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for (model, rule, turnout), values in buckets.items():
        mean = sum(values, Fraction(0)) / len(values)
        series[f"{model} / {rule}"].append((float(turnout), float(mean)))
    return line_figure(
        series,
        path,
        xlabel="turnout fraction",
        ylabel="mean recovery",
        title="Outcome recovery by turnout",
    )


def retention_figure(
    curves: Mapping[str, Mapping[Fraction, Fraction]], path: str | Path
) -> Path:
    """Winner retention vs abstention fraction, one line per rule."""
    series = {
        rule: [(float(frac), float(kept)) for frac, kept in curve.items()]
        for rule, curve in curves.items()
    }
    return line_figure(
        series,
        path,
        xlabel="abstention fraction",
        ylabel="winner retention",
        title="Winner retention under random abstention",
    )


def consistency_figure(
    rows: Iterable[Mapping[str, object]], path: str | Path
) -> Path:
    """Mean agreement vs sampled population fraction, one line per label."""
    series: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for row in rows:
        label = str(row["label"])
        series[label].append(
            (float(Fraction(str(row["population_fraction"]))), float(Fraction(str(row["value"]))))
        )
    return line_figure(
        series,
        path,
        xlabel="population fraction",
        ylabel="mean agreement",
        title="Vote agreement by sampled population",
    )
