import math

import pytest

from kwsfcm.models.reports import (
    EntropyReport,
    EqfReport,
    MetricReport,
    PipelineReport,
    RegionEntropy,
    RunResult,
    SolveTrace,
    TraceStep,
    format_value,
)


@pytest.mark.parametrize(
    "value, text",
    [(True, "true"), (False, "false"), (0.1, "0.1"), (math.nan, "nan"), (-math.inf, "-inf"), ([1, 2.5], "1,2.5")],
)
def test_format_value(value, text):
    assert format_value(value) == text


def _step(iteration, objective):
    return TraceStep(iteration, objective, (1.0, 2.0), 0.5, 0.1, 0.0, 0.0)


def test_trace_increases():
    trace = SolveTrace(10, [_step(1, 5.0), _step(2, 4.0), _step(3, 4.5), _step(4, 4.5)])
    assert trace.iterations == 4
    assert trace.objectives == [5.0, 4.0, 4.5, 4.5]
    assert trace.increases() == [3]


def test_entropy_report_total():
    report = EntropyReport(0.5, 0.25, (RegionEntropy(0, 10, 0.5),), math.e)
    assert report.total == 0.75
    items = dict(report.items())
    assert items["entropy.e"] == 0.75
    assert items["entropy.region.0"] == "10 0.5"


def test_eqf_report_ratio():
    report = EqfReport(mu=0.9, k=8.0, edge_count=8, final_count=4, blur_count=2)
    assert report.blur_ratio == 0.25
    assert report.eqf == 0.75
    assert dict(report.items())["eqf.value"] == 0.75


def test_pipeline_report_summary():
    runs = (
        RunResult(0, 0, MetricReport(sa=99.0), 10, True),
        RunResult(1, 1, MetricReport(sa=97.0), 12, False),
    )
    report = PipelineReport(runs)
    items = dict(report.items())
    assert items["sa.mean"] == 98.0
    assert items["sa.min"] == 97.0 and items["sa.max"] == 99.0
    assert items["runs.converged"] == 1
    assert math.isnan(items["eqf.mean"])
    assert runs[0].row() == ["0", "0", "99.0", "nan", "nan", "10", "true"]
