"""Command service layer: noise injection, segmentation, evaluation and the replication pipeline.

Argument-agnostic functions that implement the subcommands on top of a validated RunConfig.
Each command reads its inputs, runs the segmentation stack and writes its artifacts; every
artifact echoes the effective configuration. Problems the user can fix are raised as ErrorMsg.
"""

import asyncio
import math
import time
from dataclasses import replace
from datetime import timedelta
from pathlib import Path
from typing import NamedTuple

import humanize
from loguru import logger

from ..models.config import RunConfig, get_config
from ..models.image import CHANNELS, ColorImage, GrayImage, SegmentationMap, load_color, load_gray, save_image
from ..models.params import Algorithm, NoiseSpec
from ..models.reports import MetricReport, PipelineReport, RunResult
from ..segmentation.clustering import Segmentation, fcm_segment, kwsfcm_segment, segment
from ..segmentation.metrics import NoEdges, entropy_measure, eqf, segmentation_accuracy
from ..segmentation.noise import add_noise
from ..segmentation.susan import damping_field
from .artifacts import write_report, write_runs, write_sidecar, write_snapshots, write_trace


class ErrorMsg(Exception):
    """An error whose message is intended to be displayed to the user."""


def _require_path(path: Path | None, what: str) -> Path:
    if path is None:
        raise ErrorMsg(f"Missing {what}")
    return path


def _require_map(seg: SegmentationMap | None) -> SegmentationMap:
    if seg is None:
        raise ErrorMsg("Missing label map (--labels)")
    return seg


def _elapsed(start: float) -> str:
    return humanize.naturaldelta(timedelta(seconds=time.perf_counter() - start), minimum_unit="milliseconds")


def _workers(config: RunConfig) -> int:
    return max(1, min(config.workers, get_config().threads))


def run_segmentation(
    config: RunConfig, image: GrayImage, *, workers: int = 1, dump_damping: Path | None = None
) -> Segmentation:
    """Segment `image` with the configured algorithm and parameters."""
    if config.algorithm == Algorithm.KWSFCM:
        field = damping_field(image, params=config.susan)
        if dump_damping is not None:
            save_image(dump_damping, field.heatmap())
            logger.info(f"Damping heat-map written to {dump_damping}")
        return kwsfcm_segment(
            image,
            config.cluster,
            config.kernel,
            config.susan,
            damping=config.damping,
            field=field,
            workers=workers,
            snapshot_at=config.snapshot_at,
        )
    if dump_damping is not None:
        logger.warning(f"--dump-damping is ignored for {config.algorithm}")
    return segment(
        config.algorithm,
        image,
        config.cluster,
        config.kernel,
        config.susan,
        damping=config.damping,
        workers=workers,
        snapshot_at=config.snapshot_at,
    )


def _result_items(result: Segmentation, prefix: str = "result") -> list[tuple[str, object]]:
    trace = result.trace
    return [
        (f"{prefix}.converged", trace.converged),
        (f"{prefix}.iterations", trace.iterations),
        (f"{prefix}.objective", trace.objectives[-1] if trace.steps else math.nan),
        (f"{prefix}.centroids", [float(v) for v in result.centroids]),
        (f"{prefix}.counts", [int(n) for n in result.map.counts()]),
    ]


def cmd_noise(config: RunConfig) -> list[Path]:
    """Corrupt the input image with the configured noise; writes the image and its metadata sidecar."""
    source = _require_path(config.input, "input image")
    output = _require_path(config.output, "output image")
    spec = config.noise or NoiseSpec()
    noisy = add_noise(load_gray(source), spec)
    save_image(output, noisy)
    sidecar = write_sidecar(output, spec, source)
    logger.info(f"{spec.kind} noise (level {spec.level}, seed {spec.seed}) written to {output}")
    return [output, sidecar]


def cmd_segment(config: RunConfig, *, dump_damping: Path | None = None) -> list[Path]:
    """Segment a gray image; writes labels.pgm, rendered.pgm, trace.csv and report.txt."""
    source = _require_path(config.input, "input image")
    out = _require_path(config.output, "output directory")
    image = load_gray(source)
    start = time.perf_counter()
    result = run_segmentation(config, image, workers=_workers(config), dump_damping=dump_damping)
    logger.info(
        f"{config.algorithm} on {humanize.intcomma(image.size.area)} pixels: "
        f"{result.trace.iterations} iterations in {_elapsed(start)}"
    )
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "labels.pgm", out / "rendered.pgm"]
    save_image(paths[0], result.map.to_indexed())
    save_image(paths[1], result.map.render(result.centroids))
    paths.append(write_trace(out / "trace.csv", result.trace))
    paths.append(write_report(out / "report.txt", config.items() + _result_items(result)))
    paths += write_snapshots(out, result.trace, image.pixels.shape)
    return paths


def cmd_segment_color(config: RunConfig) -> list[Path]:
    """Segment each RGB channel independently and recombine the centroid renderings."""
    source = _require_path(config.input, "input image")
    out = _require_path(config.output, "output directory")
    image = load_color(source)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    rendered, items, paths = [], config.items(), []
    for name, channel in zip(CHANNELS, image.channels):
        result = run_segmentation(config, channel, workers=_workers(config))
        rendered.append(result.map.render(result.centroids))
        labels = out / f"labels_{name}.pgm"
        save_image(labels, result.map.to_indexed())
        paths += [labels, write_trace(out / f"trace_{name}.csv", result.trace)]
        paths += write_snapshots(out, result.trace, channel.pixels.shape, prefix=f"{name}_")
        items += _result_items(result, prefix=name)
    save_image(out / "rendered.ppm", ColorImage.from_channels(rendered))
    paths.insert(0, out / "rendered.ppm")
    paths.append(write_report(out / "report.txt", items))
    logger.info(f"Color segmentation of {image.size} finished in {_elapsed(start)}")
    return paths


def cmd_eval(
    config: RunConfig,
    *,
    labels: Path | None = None,
    sa: bool = False,
    entropy: bool = False,
    edge_quality: bool = False,
    dump_edges: Path | None = None,
) -> MetricReport:
    """Evaluate a segmentation. SA compares `labels` with config.reference; entropy measures
    `labels` over the input image; EQF grades the input image itself."""
    source = _require_path(config.input, "input image")
    if not (sa or entropy or edge_quality):
        raise ErrorMsg("Nothing to evaluate: pass --sa, --entropy and/or --eqf")
    image = load_gray(source)
    seg = SegmentationMap.from_indexed(load_gray(labels)) if labels is not None else None
    report = MetricReport()
    if sa:
        reference = SegmentationMap.from_indexed(load_gray(_require_path(config.reference, "reference map")))
        report = report._replace(sa=segmentation_accuracy(_require_map(seg), reference))
    if entropy:
        report = report._replace(entropy=entropy_measure(image, _require_map(seg), config.entropy_base))
    if edge_quality:
        quality = eqf(image, config.eqf, keep_maps=dump_edges is not None)
        if dump_edges is not None and quality.edges is not None:
            save_image(dump_edges, GrayImage(quality.edges.astype("uint8") * 255))
        report = report._replace(eqf=quality)
    if config.output is not None:
        write_report(config.output, config.items() + report.items())
    parts = []
    if report.sa is not None:
        parts.append(f"SA {report.sa:.4f}%")
    if report.entropy is not None:
        parts.append(f"E {report.entropy.total:.4f}")
    if report.eqf is not None:
        parts.append(f"EQF {report.eqf.eqf:.4f}")
    logger.info(f"Evaluated {source.name}: {', '.join(parts)}")
    return report


class Replication(NamedTuple):
    """Inputs of one pipeline run."""

    run: int
    config: RunConfig
    noise: NoiseSpec


def replicate(job: Replication, clean: GrayImage, reference: SegmentationMap) -> RunResult:
    """Noise, segment and evaluate once."""
    noisy = add_noise(clean, job.noise)
    result = run_segmentation(job.config, noisy)
    try:
        quality = eqf(result.map.render(result.centroids), job.config.eqf)
    except NoEdges:
        logger.warning(f"run {job.run}: segmentation has no edges; EQF left undefined")
        quality = None
    metrics = MetricReport(
        sa=segmentation_accuracy(result.map, reference),
        entropy=entropy_measure(noisy, result.map, job.config.entropy_base, allow_empty=True),
        eqf=quality,
    )
    logger.debug(f"run {job.run}: SA={metrics.sa:.4f} iterations={result.trace.iterations}")
    return RunResult(job.run, job.noise.seed, metrics, result.trace.iterations, result.trace.converged)


def replications(config: RunConfig) -> list[Replication]:
    """Run r uses noise seed and cluster seed offset by r."""
    noise = config.noise or NoiseSpec()
    return [
        Replication(
            run,
            config.with_settings({"seed": str(config.cluster.seed + run)}),
            replace(noise, seed=noise.seed + run),
        )
        for run in range(config.runs)
    ]


async def cmd_pipeline(config: RunConfig) -> PipelineReport:
    """Reference by classical FCM on the clean image, then `runs` seeded noise/segment/evaluate
    replications. Writes reference.pgm, runs.csv and report.txt."""
    source = _require_path(config.input, "input image")
    out = _require_path(config.output, "output directory")
    clean = load_gray(source)
    start = time.perf_counter()
    reference = (await asyncio.to_thread(fcm_segment, clean, config.cluster)).map
    slots = asyncio.Semaphore(get_config().threads)

    async def bounded(job: Replication) -> RunResult:
        async with slots:
            return await asyncio.to_thread(replicate, job, clean, reference)

    results = await asyncio.gather(*(bounded(job) for job in replications(config)))
    report = PipelineReport(tuple(results))
    out.mkdir(parents=True, exist_ok=True)
    save_image(out / "reference.pgm", reference.to_indexed())
    write_runs(out / "runs.csv", report)
    write_report(out / "report.txt", config.items() + report.items())
    summary = dict(report.items())
    logger.info(
        f"{len(results)} run(s) of {config.algorithm} in {_elapsed(start)}: "
        f"SA mean {summary['sa.mean']:.4f} (min {summary['sa.min']:.4f}, max {summary['sa.max']:.4f})"
    )
    return report
