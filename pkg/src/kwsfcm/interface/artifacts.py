"""Writers for command artifacts: key = value reports, CSV tables, heat-map PGMs.

Artifacts contain only configuration and results, never timestamps or log output, so the same
configuration always produces byte-identical files.
"""

import csv
from collections.abc import Iterable
from pathlib import Path

import numpy as np
from loguru import logger

from ..models.image import MAXVAL, GrayImage, save_image
from ..models.params import NoiseSpec
from ..models.reports import RUN_COLUMNS, PipelineReport, SolveTrace, format_value


def write_report(path: Path, items: Iterable[tuple[str, object]]) -> Path:
    """Write `key = value` lines."""
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{key} = {format_value(value)}\n" for key, value in items)
    path.write_text(text, encoding="utf-8", newline="\n")
    logger.debug(f"Wrote report {path}")
    return path


def read_report(path: Path) -> dict[str, str]:
    """Parse a report written by write_report."""
    report: dict[str, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(" = ")
        report[key] = value
    return report


def _write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable[str]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    logger.debug(f"Wrote table {path}")
    return path


def write_trace(path: Path, trace: SolveTrace) -> Path:
    """Iteration table: objective, centroids and convergence diagnostics per iteration."""
    c = len(trace.steps[0].centroids) if trace.steps else 0
    header = [
        "iteration",
        "objective",
        *(f"v_{i + 1}" for i in range(c)),
        "centroid_shift",
        "membership_change",
        "partition_gain",
    ]
    rows = (
        [
            format_value(step.iteration),
            format_value(step.objective),
            *(format_value(v) for v in step.centroids),
            format_value(step.centroid_shift),
            format_value(step.membership_change),
            format_value(step.partition_gain),
        ]
        for step in trace.steps
    )
    return _write_csv(path, header, rows)


def write_runs(path: Path, report: PipelineReport) -> Path:
    """Per-run pipeline results."""
    return _write_csv(path, RUN_COLUMNS, (run.row() for run in report.runs))


def membership_heatmap(u: np.ndarray, shape: tuple[int, int]) -> GrayImage:
    """One membership row scaled to [0, 255]."""
    return GrayImage(np.clip(np.rint(u.reshape(shape) * MAXVAL), 0, MAXVAL))


def write_snapshots(directory: Path, trace: SolveTrace, shape: tuple[int, int], prefix: str = "") -> list[Path]:
    """One heat-map PGM per (snapshot iteration, cluster)."""
    paths = []
    for iteration, u in sorted(trace.snapshots.items()):
        for i, row in enumerate(u):
            path = directory / f"{prefix}membership_{iteration:03d}_{i + 1}.pgm"
            save_image(path, membership_heatmap(row, shape))
            paths.append(path)
    return paths


def sidecar_path(output: Path) -> Path:
    return output.with_suffix(".meta.txt")


def write_sidecar(output: Path, spec: NoiseSpec, source: Path | None = None) -> Path:
    """Noise metadata next to a noisy image."""
    items: list[tuple[str, object]] = [
        ("noise.kind", str(spec.kind)),
        ("noise.level", spec.level),
        ("noise.seed", spec.seed),
        ("noise.convention", spec.convention),
    ]
    if source is not None:
        items.append(("input", source.name))
    return write_report(sidecar_path(output), items)
