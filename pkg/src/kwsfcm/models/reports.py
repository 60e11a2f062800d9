"""Result records: solver traces and evaluation reports.

SolveTrace keeps one TraceStep per iteration of an alternating solver, plus optional
membership snapshots. EntropyReport, EqfReport and MetricReport hold evaluation results and
render themselves as `key = value` lines for the text reports written by the CLI.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


def format_value(value) -> str:
    """Deterministic text form used in every report."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


class TraceStep(NamedTuple):
    """State after one partition/centroid alternation."""

    iteration: int
    objective: float
    centroids: tuple[float, ...]
    centroid_shift: float
    membership_change: float
    partition_gain: float  # objective drop caused by the partition step alone, >= 0 up to rounding
    stochastic_error: float  # largest |sum_i u_ik - 1| over pixels


@dataclass
class SolveTrace:
    """Iteration history of a clustering run."""

    max_iter: int
    steps: list[TraceStep] = field(default_factory=list)
    converged: bool = False
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.steps)

    @property
    def objectives(self) -> list[float]:
        return [step.objective for step in self.steps]

    def increases(self, tolerance: float = 1e-9) -> list[int]:
        """Iterations whose objective rose above the previous one."""
        return [
            b.iteration
            for a, b in zip(self.steps, self.steps[1:])
            if b.objective > a.objective + tolerance * max(1.0, abs(a.objective))
        ]


class RegionEntropy(NamedTuple):
    label: int
    pixels: int
    entropy: float


class EntropyReport(NamedTuple):
    """Region entropy H_r, layout entropy H_l and their sum E."""

    region: float
    layout: float
    regions: tuple[RegionEntropy, ...]
    base: float

    @property
    def total(self) -> float:
        return self.region + self.layout

    def items(self) -> list[tuple[str, object]]:
        return [
            ("entropy.base", self.base),
            ("entropy.h_r", self.region),
            ("entropy.h_l", self.layout),
            ("entropy.e", self.total),
        ] + [(f"entropy.region.{r.label}", f"{r.pixels} {format_value(r.entropy)}") for r in self.regions]


@dataclass(frozen=True, eq=False)
class EqfReport:
    """Edge quality factor with its intermediate counts.

    `edge_count` counts fuzzy-rule edge candidates, `final_count` the candidates kept by the
    neighbour-intensity rule, `blur_count` the final edges judged blurred.
    """

    mu: float
    k: float
    edge_count: int
    final_count: int
    blur_count: int
    edges: np.ndarray | None = None
    blurred: np.ndarray | None = None

    @property
    def blur_ratio(self) -> float:
        return self.blur_count / self.edge_count

    @property
    def eqf(self) -> float:
        return 1.0 - self.blur_ratio

    def items(self) -> list[tuple[str, object]]:
        return [
            ("eqf.mu", self.mu),
            ("eqf.k", self.k),
            ("eqf.edge_count", self.edge_count),
            ("eqf.final_count", self.final_count),
            ("eqf.blur_count", self.blur_count),
            ("eqf.blur_ratio", self.blur_ratio),
            ("eqf.value", self.eqf),
        ]


class MetricReport(NamedTuple):
    """Whatever subset of SA, entropy and EQF was requested."""

    sa: float | None = None
    entropy: EntropyReport | None = None
    eqf: EqfReport | None = None

    def items(self) -> list[tuple[str, object]]:
        items: list[tuple[str, object]] = []
        if self.sa is not None:
            items.append(("sa", self.sa))
        if self.entropy is not None:
            items.extend(self.entropy.items())
        if self.eqf is not None:
            items.extend(self.eqf.items())
        return items


class RunResult(NamedTuple):
    """One seeded replication of the noise / segment / evaluate pipeline."""

    run: int
    noise_seed: int
    metrics: MetricReport
    iterations: int
    converged: bool

    @property
    def sa(self) -> float:
        return math.nan if self.metrics.sa is None else self.metrics.sa

    @property
    def entropy(self) -> float:
        return self.metrics.entropy.total if self.metrics.entropy else math.nan

    @property
    def eqf(self) -> float:
        return self.metrics.eqf.eqf if self.metrics.eqf else math.nan

    def row(self) -> list[str]:
        return [format_value(getattr(self, column)) for column in RUN_COLUMNS]


RUN_COLUMNS = ("run", "noise_seed", "sa", "entropy", "eqf", "iterations", "converged")


def _summary(name: str, values: list[float]) -> list[tuple[str, object]]:
    finite = [v for v in values if v is not None and math.isfinite(v)]
    if not finite:
        return [(f"{name}.mean", math.nan), (f"{name}.min", math.nan), (f"{name}.max", math.nan)]
    return [
        (f"{name}.mean", math.fsum(finite) / len(finite)),
        (f"{name}.min", min(finite)),
        (f"{name}.max", max(finite)),
    ]


class PipelineReport(NamedTuple):
    """Per-run results and their mean / min / max."""

    runs: tuple[RunResult, ...]

    def values(self, column: str) -> list[float]:
        return [float(getattr(r, column)) for r in self.runs]

    def items(self) -> list[tuple[str, object]]:
        return [
            ("runs.completed", len(self.runs)),
            ("runs.converged", sum(r.converged for r in self.runs)),
            *_summary("sa", self.values("sa")),
            *_summary("entropy", self.values("entropy")),
            *_summary("eqf", self.values("eqf")),
        ]
