import io
import logging
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from Classification.experiments import CSV_COLUMNS, ExperimentRow, summarize_rows  # noqa: E402
from FileHandler.json import JSONFileHandler, write_atomic  # noqa: E402
from Harness.helpers import TableWriter  # noqa: E402
from Harness.sweep import ROW_COLUMNS, SweepResult  # noqa: E402
from Metrics.pareto import pareto_indices  # noqa: E402
from errors import ContractViolation, StoreError  # noqa: E402

logger = logging.getLogger(__name__)

SVG_HASH_SALT = "gendaug"
SUMMARY_COLUMNS = ("multiplier", "total_size", "seeds", "top1_mean", "top1_std", "top5_mean", "top5_std",
                   "delta_vs_baseline")


def _prepare(output_dir: Union[str, Path]) -> Path:
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        probe = output_dir / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise StoreError(f"cannot write reports to {output_dir}: {e}") from e
    return output_dir


def save_svg(figure, path: Path, rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """
    Write a figure as SVG with its data table embedded in a leading XML comment.

    The hash salt is fixed and no date is written, so equal inputs give
    byte-identical files.
    """
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(figure)
    text = buffer.getvalue().decode("utf-8")
    table = TableWriter.to_csv(rows, columns).replace("--", "- -")
    comment = f"<!-- data\n{table}-->\n"
    head, newline, tail = text.partition("\n")
    text = head + newline + comment + tail if head.startswith("<?xml") else comment + text
    write_atomic(path, text.encode("utf-8"))
    return path


def _figure(title: str, xlabel: str, ylabel: str):
    figure, axes = plt.subplots(figsize=(5.5, 4.0))
    axes.set_title(title)
    axes.set_xlabel(xlabel)
    axes.set_ylabel(ylabel)
    axes.grid(True, alpha=0.3)
    return figure, axes


def _fid_key(rows: Sequence[Dict[str, Any]]) -> Optional[str]:
    for key in ("fid_val", "fid_train"):
        if rows and all(row.get(key) is not None for row in rows):
            return key
    return None


def _series_label(row: Dict[str, Any]) -> str:
    return f"v={row['log_variance']}, a={row['aug_level']}, steps={row['steps']}"


def plot_pareto(rows: Sequence[Dict[str, Any]], x_key: str, y_key: str, path: Path, title: str) -> Path:
    """Scatter of two objectives (x minimised, y maximised) with the frontier highlighted."""
    points = [(row[x_key], row[y_key]) for row in rows]
    frontier = set(pareto_indices(points, ("min", "max")))
    table = [{"cell_index": row["cell_index"], x_key: row[x_key], y_key: row[y_key], "on_frontier": int(i in frontier)}
             for i, row in enumerate(rows)]
    figure, axes = _figure(title, x_key, y_key)
    axes.scatter([p[0] for p in points], [p[1] for p in points], color="0.6", s=18, label="cells")
    ordered = sorted((points[i] for i in frontier))
    axes.plot([p[0] for p in ordered], [p[1] for p in ordered], color="tab:red", marker="o", label="Pareto frontier")
    axes.legend()
    return save_svg(figure, path, table, ("cell_index", x_key, y_key, "on_frontier"))


def plot_against_guidance(rows: Sequence[Dict[str, Any]], y_key: str, path: Path, title: str) -> Path:
    """One line per (v, a, steps) setting of a metric against guidance weight."""
    series = defaultdict(list)
    for row in rows:
        series[_series_label(row)].append(row)
    figure, axes = _figure(title, "guidance weight", y_key)
    for label in sorted(series):
        ordered = sorted(series[label], key=lambda row: row["guidance_weight"])
        axes.plot([row["guidance_weight"] for row in ordered], [row[y_key] for row in ordered], marker="o", label=label)
    axes.legend(fontsize="small")
    table = sorted(rows, key=lambda row: row["cell_index"])
    return save_svg(figure, path, table, ("cell_index", "guidance_weight", "log_variance", "aug_level", "steps", y_key))


def report_sweep(rows: Sequence[Dict[str, Any]], output_dir: Union[str, Path]) -> List[Path]:
    """
    Sweep tables and figures: rows.csv, rows.json, the FID/IS Pareto plot,
    FID against guidance per log-variance, and CAS plots when CAS exists.
    """
    output_dir = _prepare(output_dir)
    rows = sorted(rows, key=lambda row: row["cell_index"])
    paths = [TableWriter.write_csv(rows, ROW_COLUMNS, output_dir / "rows.csv")]
    JSONFileHandler(output_dir / "rows.json").write(rows)
    paths.append(output_dir / "rows.json")

    fid_key = _fid_key(rows)
    if fid_key and all(row.get("is_mean") is not None for row in rows):
        paths.append(plot_pareto(rows, fid_key, "is_mean", output_dir / "pareto_fid_is.svg", "FID vs IS"))
    if fid_key:
        paths.append(plot_against_guidance(rows, fid_key, output_dir / "fid_vs_guidance.svg", "FID vs guidance"))
    with_cas = [row for row in rows if row.get("cas_top1") is not None]
    if with_cas:
        paths.append(plot_against_guidance(with_cas, "cas_top1", output_dir / "cas_vs_guidance.svg", "CAS vs guidance"))
        if fid_key:
            paths.append(plot_pareto(with_cas, fid_key, "cas_top1", output_dir / "pareto_fid_cas.svg", "FID vs CAS"))
    logger.info("Successfully wrote %d sweep report files to %s", len(paths), output_dir)
    return paths


def report_experiment(rows: Sequence[ExperimentRow], output_dir: Union[str, Path]) -> List[Path]:
    """Experiment tables (per seed and summarised) and the accuracy-vs-multiplier plot."""
    output_dir = _prepare(output_dir)
    raw = [row.model_dump() for row in rows]
    summary = [row.model_dump() for row in summarize_rows(rows)]
    paths = [
        TableWriter.write_csv(raw, CSV_COLUMNS, output_dir / "results.csv"),
        TableWriter.write_csv(summary, SUMMARY_COLUMNS, output_dir / "summary.csv"),
    ]
    JSONFileHandler(output_dir / "results.json").write({"rows": raw, "summary": summary})
    paths.append(output_dir / "results.json")

    figure, axes = _figure("Accuracy vs generated data", "multiplier m", "top-1 accuracy")
    axes.errorbar([row["multiplier"] for row in summary], [row["top1_mean"] for row in summary],
                  yerr=[row["top1_std"] for row in summary], marker="o", capsize=3, label="real + generated")
    baseline = [row for row in summary if row["multiplier"] == 0.0]
    if baseline:
        axes.axhline(baseline[0]["top1_mean"], color="0.4", linestyle="--", label="real only (m = 0)")
    axes.legend()
    paths.append(save_svg(figure, output_dir / "accuracy_vs_multiplier.svg", summary, SUMMARY_COLUMNS))
    logger.info("Successfully wrote %d experiment report files to %s", len(paths), output_dir)
    return paths


def report_per_class(real: Sequence[float], generated: Sequence[float], output_dir: Union[str, Path],
                     class_names: Sequence[str] = ()) -> Path:
    """Per-class accuracy of a real-trained against a generated-trained classifier."""
    output_dir = _prepare(output_dir)
    names = list(class_names) or [str(i) for i in range(len(real))]
    table = [{"class": name, "real": float(r), "generated": float(g)} for name, r, g in zip(names, real, generated)]
    figure, axes = _figure("Per-class accuracy", "trained on real", "trained on generated")
    axes.scatter(np.asarray(real, dtype=float), np.asarray(generated, dtype=float), s=20)
    axes.plot([0, 1], [0, 1], color="0.5", linestyle="--")
    axes.set_xlim(0, 1)
    axes.set_ylim(0, 1)
    return save_svg(figure, output_dir / "per_class_accuracy.svg", table, ("class", "real", "generated"))


def report(table: Union[SweepResult, Sequence[Dict[str, Any]], Sequence[ExperimentRow]],
           output_dir: Union[str, Path]) -> List[Path]:
    """
    Emit tables and figures for a sweep result or an experiment table.

    Raises:
        ContractViolation: On empty input
        StoreError: If the output directory is not writable
    """
    rows = table.rows if isinstance(table, SweepResult) else list(table)
    if not rows:
        raise ContractViolation("nothing to report")
    if isinstance(rows[0], ExperimentRow):
        return report_experiment(rows, output_dir)
    return report_sweep(rows, output_dir)
