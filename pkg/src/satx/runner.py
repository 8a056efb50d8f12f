"""Job orchestration: build problems, run the modes, write reports.

All report files are deterministic byte streams for fixed inputs (wall
times go to the console, never into files) and are written atomically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import analysis, formats, geometry, matfile, optimizer
from .analysis import METRIC_COLUMNS, DirectionMetrics
from .config import JobConfig
from .cost import TranscodingProblem
from .errors import ConfigError, DimensionError
from .matfile import MatrixFile, write_text_atomic

SUMMARY_METRICS = (
    "pressure", "velocity_radial", "velocity_transverse",
    "energy", "intensity_radial", "intensity_transverse",
    "asw_deg", "angular_error_deg", "level_db",
)

_REFERENCE_VIRTUAL = (
    geometry.MergeSpec((
        (geometry.HemisphereSpec(geometry.TDesignSpec(60)), 1.0),
        (geometry.RingSpec(36), 1.0),
    ))
)


def input_channel_directions(job: JobConfig, cloud) -> Optional[tuple]:
    spec = job.input_spec
    if isinstance(spec, formats.VbapSpec):
        return spec.layout.directions
    if isinstance(spec, formats.ObjectsSpec):
        return cloud.directions
    return None


def resolve_pairs(job: JobConfig, layout) -> tuple:
    if job.explicit_pairs is None:
        return layout.symmetry_pairs
    index = {label: i for i, label in enumerate(layout.labels)}
    pairs = []
    for a, b in job.explicit_pairs:
        if a not in index or b not in index:
            raise ConfigError(f"symmetry pair ({a}, {b}) names unknown speakers")
        pairs.append((index[a], index[b]))
    return tuple(sorted(pairs))


def build_problem(job: JobConfig) -> TranscodingProblem:
    if job.cloud_spec is None:
        raise ConfigError("job has no sampling cloud")
    cloud = geometry.sample_cloud(job.cloud_spec)
    encoding = formats.build_encoding_matrix(job.input_spec, cloud)
    out_spec = job.output_spec
    if job.output_layout is None:
        raise ConfigError("job has no output layout")
    decoder = formats.build_decoder_to_speaker(out_spec, job.output_layout)
    remap_spec = out_spec if out_spec is not None else formats.VbapSpec(
        job.output_layout
    )
    return TranscodingProblem(
        encoding=encoding,
        decoder=decoder,
        coeffs=job.coeffs,
        pairs=resolve_pairs(job, job.output_layout),
        input_channel_directions=input_channel_directions(job, cloud),
        output_spec=remap_spec,
    )


def reference_transcoder(job: JobConfig, problem: TranscodingProblem) -> np.ndarray:
    """Built-in comparison transcoder.

    Channel-format inputs use the direct per-channel remap; scene-format
    inputs decode to a dense virtual layout and pan every virtual speaker
    onto the output layout.
    """
    if problem.input_channel_directions:
        return formats.remap_baseline(
            problem.input_channel_directions,
            problem.output_spec,
            problem.decoder.layout,
        )
    if isinstance(job.input_spec, formats.AmbisonicsSpec):
        virtual_cloud = geometry.sample_cloud(_REFERENCE_VIRTUAL)
        virtual = geometry.layout_from_directions(virtual_cloud.directions)
        return formats.panned_reference_decoder(
            job.input_spec, virtual, problem.decoder.layout
        )
    raise ConfigError(
        "no reference transcoder is defined for this input format"
    )


def make_init(job: JobConfig, problem: TranscodingProblem):
    opts = job.optimizer
    if opts.init is None:
        return None
    if opts.init == "remap":
        return optimizer.RemapInit()
    if opts.init == "remap_plus_noise":
        scale = 0.05 if opts.scale is None else opts.scale
        return optimizer.RemapNoiseInit(scale=scale)
    if opts.init == "random":
        scale = 0.5 if opts.scale is None else opts.scale
        return optimizer.RandomInit(scale=scale)
    if opts.init == "given":
        return optimizer.GivenInit(matfile.import_matrix(opts.matrix).values())
    if opts.init == "reference":
        return optimizer.GivenInit(reference_transcoder(job, problem))
    raise ConfigError(f"unknown init strategy {opts.init!r}")


def optimization_config(job: JobConfig, problem: TranscodingProblem,
                        seed: Optional[int] = None) -> optimizer.OptimizationConfig:
    opts = job.optimizer
    return optimizer.OptimizationConfig(
        init=make_init(job, problem),
        max_iterations=opts.max_iterations,
        gradient_tolerance=opts.gradient_tolerance,
        cost_tolerance=opts.cost_tolerance,
        seed=opts.seed if seed is None else seed,
        restarts=opts.restarts,
        log_every=opts.log_every,
    )


@dataclass
class GenerateResult:
    report: optimizer.OptimizationReport
    matrix_path: str
    log_path: str


def transcoder_to_file(t: analysis.TranscodingMatrix, note: str = "") -> MatrixFile:
    return matfile.matrix_file(
        t.entries,
        kind="transcoding",
        row_labels=t.output_labels,
        col_labels=t.input_labels,
        note=note,
    )


def run_generate(job: JobConfig, out_dir, seed: Optional[int] = None) -> GenerateResult:
    problem = build_problem(job)
    cfg = optimization_config(job, problem, seed)
    report = optimizer.optimize(problem, cfg)
    os.makedirs(out_dir, exist_ok=True)
    matrix_path = os.path.join(out_dir, f"{job.name}_transcoder.smx")
    matfile.export_matrix(
        transcoder_to_file(report.final_matrix, note=f"job {job.name}"),
        matrix_path,
    )
    log_lines = [
        f"job {job.name}",
        f"analysis {job.analysis}",
        f"transcoder_shape {report.final_matrix.shape[0]}x"
        f"{report.final_matrix.shape[1]}",
        f"iterations {report.iterations}",
        f"converged {report.converged}",
        f"gradient_norm {report.gradient_norm_final:.6e}",
        f"stop_reason {report.message}",
        "",
        "initial_cost_terms",
        report.initial_breakdown.as_text().rstrip("\n"),
        "",
        "final_cost_terms",
        report.final_breakdown.as_text().rstrip("\n"),
    ]
    if report.progress_lines:
        log_lines += ["", "progress (iteration cost gradient_norm)"]
        log_lines += list(report.progress_lines)
    log_path = os.path.join(out_dir, f"{job.name}_log.txt")
    write_text_atomic(log_path, "\n".join(log_lines) + "\n")
    return GenerateResult(report, matrix_path, log_path)


def evaluate_matrix(job: JobConfig, t: np.ndarray) -> DirectionMetrics:
    """Per-direction metrics of a transcoder over the evaluation cloud."""
    cloud = geometry.sample_cloud(job.eval_cloud_spec)
    encoding = formats.build_encoding_matrix(job.input_spec, cloud)
    decoder = formats.build_decoder_to_speaker(job.output_spec, job.output_layout)
    t = np.asarray(t, dtype=float)
    if t.shape != (decoder.entries.shape[1], encoding.entries.shape[1]):
        raise DimensionError(
            f"matrix shape {t.shape} does not match formats "
            f"({decoder.entries.shape[1]} x {encoding.entries.shape[1]})"
        )
    s = analysis.speaker_matrix(encoding, t, decoder)
    return analysis.direction_metrics(s, job.analysis)


def summaries(metrics: DirectionMetrics) -> dict:
    return {
        name: analysis.summarize(metrics.column(name))
        for name in SUMMARY_METRICS
    }


def metrics_table_text(metrics: DirectionMetrics) -> str:
    lines = ["# " + " ".join(METRIC_COLUMNS)]
    for row in metrics.table():
        lines.append(" ".join(f"{x:.10g}" for x in row))
    return "\n".join(lines) + "\n"


def summary_table_text(stats: dict) -> str:
    lines = ["# metric median q1 q3 whisker_low whisker_high"]
    for name in SUMMARY_METRICS:
        s = stats[name]
        lines.append(
            f"{name} {s['median']:.10g} {s['q1']:.10g} {s['q3']:.10g} "
            f"{s['whisker_low']:.10g} {s['whisker_high']:.10g}"
        )
    return "\n".join(lines) + "\n"


_PLOT_SCRIPT = """\
# gnuplot script for the metric tables written alongside
set datafile commentschars "#"
set style data boxplot
set term pngcairo size 900,300
set output "metrics_boxplots.png"
set multiplot layout 1,3
set title "level (dB)"; plot "{stem}_metrics.dat" using (1):12 notitle
set title "source width (deg)"; plot "{stem}_metrics.dat" using (1):10 notitle
set title "angular error (deg)"; plot "{stem}_metrics.dat" using (1):11 notitle
unset multiplot
"""


def run_evaluate(job: JobConfig, t: np.ndarray, out_dir,
                 stem: Optional[str] = None) -> dict:
    metrics = evaluate_matrix(job, t)
    stats = summaries(metrics)
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or job.name
    write_text_atomic(
        os.path.join(out_dir, f"{stem}_metrics.dat"),
        metrics_table_text(metrics),
    )
    write_text_atomic(
        os.path.join(out_dir, f"{stem}_summary.dat"),
        summary_table_text(stats),
    )
    write_text_atomic(
        os.path.join(out_dir, f"{stem}_plot.gp"),
        _PLOT_SCRIPT.format(stem=stem),
    )
    return stats


def run_compare(job: JobConfig, named: Sequence, out_dir) -> dict:
    """Evaluate several named transcoders on the same cloud.

    ``named`` is a sequence of (name, matrix) pairs; per-direction deltas
    are reported against the first entry.
    """
    if len(named) < 2:
        raise ConfigError("compare needs at least two matrices")
    os.makedirs(out_dir, exist_ok=True)
    results = {}
    for name, t in named:
        metrics = evaluate_matrix(job, t)
        results[name] = (metrics, summaries(metrics))
        write_text_atomic(
            os.path.join(out_dir, f"{name}_metrics.dat"),
            metrics_table_text(metrics),
        )
    lines = ["# matrix metric median q1 q3 whisker_low whisker_high"]
    for name, (_, stats) in results.items():
        for metric in SUMMARY_METRICS:
            s = stats[metric]
            lines.append(
                f"{name} {metric} {s['median']:.10g} {s['q1']:.10g} "
                f"{s['q3']:.10g} {s['whisker_low']:.10g} "
                f"{s['whisker_high']:.10g}"
            )
    write_text_atomic(
        os.path.join(out_dir, "compare_summary.dat"), "\n".join(lines) + "\n"
    )
    base_name, (base_metrics, _) = next(iter(results.items()))
    delta_lines = [
        "# azimuth elevation "
        + " ".join(
            f"{name}:d_{m}"
            for name in results if name != base_name
            for m in ("level_db", "asw_deg", "angular_error_deg")
        )
    ]
    az = base_metrics.column("azimuth")
    el = base_metrics.column("elevation")
    deltas = []
    for name, (metrics, _) in results.items():
        if name == base_name:
            continue
        for m in ("level_db", "asw_deg", "angular_error_deg"):
            deltas.append(metrics.column(m) - base_metrics.column(m))
    for i in range(len(az)):
        row = [f"{az[i]:.10g}", f"{el[i]:.10g}"]
        row += [f"{col[i]:.10g}" for col in deltas]
        delta_lines.append(" ".join(row))
    write_text_atomic(
        os.path.join(out_dir, "compare_deltas.dat"),
        "\n".join(delta_lines) + "\n",
    )
    return {name: stats for name, (_, stats) in results.items()}
