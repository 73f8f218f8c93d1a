import logging
import multiprocessing
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict
from tqdm import tqdm

import settings
from Classification.protocol import cas
from Database.sqlite import SQLiteResultStore
from Diffusion.config import SamplerConfig
from FileHandler.hashing import stable_hash
from FileHandler.json import JSONFileHandler
from Harness.config import CASConfig, EvalBudget, SweepGrid
from Harness.generation import SampleSource, generate_dataset, source_hash
from Harness.helpers import CELL_PARAMETERS, GridExpander
from Harness.manifest import MANIFEST_NAME, TIMING_NAME, RunManifest, RunTiming
from Harness.references import EvalReferences
from Metrics.fid import fid, fit_stats
from Metrics.inception import inception_score
from Metrics.pareto import pareto_indices
from Numerics.rng import SeededRng
from errors import ContractViolation

logger = logging.getLogger(__name__)

STORE_NAME = "results.sqlite"
STAGING_DIR = "staging"

ROW_COLUMNS = ("cell_index", "guidance_weight", "log_variance", "aug_level", "steps", "sample_count",
               "fid_train", "fid_val", "is_mean", "is_std", "cas_top1", "cas_top5")


class SweepResult(BaseModel):
    """One row per grid cell, ordered by cell index."""
    model_config = ConfigDict(extra='forbid')

    config_hash: str
    rows: List[Dict[str, Any]]

    @property
    def cell_count(self) -> int:
        return len(self.rows)


@dataclass
class SweepContext:
    """Everything a worker needs to evaluate a cell; picklable."""
    source: SampleSource
    references: EvalReferences
    grid: SweepGrid
    budget: EvalBudget
    sampler: SamplerConfig
    cas_config: CASConfig
    rng: SeededRng
    staging: Path

    def cell_rng(self, cell_index: int) -> SeededRng:
        return self.rng.spawn("cell", cell_index)

    def generated_set(self, cell: Dict[str, Any]):
        sampler = GridExpander.sampler_for(cell, self.grid.sampler_kind, self.sampler)
        per_class = max(1, self.budget.samples_per_cell // self.references.class_count)
        return generate_dataset(self.source, per_class, sampler, self.cell_rng(cell["cell_index"]).spawn("generate"),
                                class_count=self.references.class_count, stage=self.grid.stage,
                                class_names=self.references.real_train.class_names)


def evaluate_cell(context: SweepContext, cell: Dict[str, Any], with_cas: bool) -> Dict[str, Any]:
    """
    Generate a cell's samples and compute the requested metrics.

    Samples come from cell_rng(i).spawn("generate"); CAS trains on
    cell_rng(i).spawn("cas").
    """
    metrics = set(context.grid.metrics)
    generated = context.generated_set(cell)
    row = {column: None for column in ROW_COLUMNS}
    row.update(cell)
    row["sample_count"] = len(generated)

    extractor = context.references.extractor
    if metrics & {"fid_train", "fid_val"}:
        stats = fit_stats(extractor.features(generated.samples))
        if "fid_train" in metrics:
            row["fid_train"] = fid(stats, context.references.train_stats)
        if "fid_val" in metrics:
            row["fid_val"] = fid(stats, context.references.val_stats)
    if "is" in metrics:
        probabilities = extractor.probabilities(generated.samples)
        usable = len(probabilities) - len(probabilities) % context.budget.is_splits
        row["is_mean"], row["is_std"] = inception_score(probabilities[:usable], context.budget.is_splits)
    if with_cas:
        record = cas(generated, context.references.real_val, context.cas_config.recipe,
                     context.cell_rng(cell["cell_index"]).spawn("cas"), context.cas_config.preprocessing)
        row["cas_top1"], row["cas_top5"] = record.top1, record.top5
    return row


def _staging_file(context: SweepContext, cell_index: int, phase: str) -> Path:
    return context.staging / f"cell_{cell_index}.{phase}.json"


def _run_metrics(task) -> int:
    context, cell = task
    row = evaluate_cell(context, cell, with_cas=context.budget.cas == "all" and "cas" in context.grid.metrics)
    JSONFileHandler(_staging_file(context, cell["cell_index"], "metrics")).write(row)
    return cell["cell_index"]


def _run_cas(task) -> int:
    context, row = task
    cell = {key: row[key] for key in ("cell_index",) + CELL_PARAMETERS}
    generated = context.generated_set(cell)
    record = cas(generated, context.references.real_val, context.cas_config.recipe,
                 context.cell_rng(row["cell_index"]).spawn("cas"), context.cas_config.preprocessing)
    JSONFileHandler(_staging_file(context, row["cell_index"], "cas")).write(
        {**row, "cas_top1": record.top1, "cas_top5": record.top5})
    return row["cell_index"]


def _execute(function: Callable, tasks: Sequence, jobs: int, desc: str):
    """Run tasks inline or in a spawn-based process pool; yields finished cell indices."""
    if jobs <= 1:
        for task in tqdm(tasks, desc=desc, disable=not settings.PROGRESS):
            yield function(task)
        return
    with ProcessPoolExecutor(max_workers=jobs, mp_context=multiprocessing.get_context("spawn")) as executor:
        yield from tqdm(executor.map(function, tasks), total=len(tasks), desc=desc, disable=not settings.PROGRESS)


def frontier_cells(rows: Sequence[Dict[str, Any]]) -> List[int]:
    """Cell indices on the FID/IS Pareto frontier (FID val preferred over FID train)."""
    fid_key = "fid_val" if all(row.get("fid_val") is not None for row in rows) else "fid_train"
    use_is = all(row.get("is_mean") is not None for row in rows)
    if all(row.get(fid_key) is None for row in rows):
        return [row["cell_index"] for row in rows]
    points = [(row[fid_key], row["is_mean"]) if use_is else (row[fid_key],) for row in rows]
    directions = ("min", "max") if use_is else ("min",)
    return [rows[i]["cell_index"] for i in pareto_indices(points, directions)]


def sweep_hash(grid: SweepGrid, budget: EvalBudget, sampler: SamplerConfig, cas_config: CASConfig,
               source: SampleSource, references: EvalReferences, rng: SeededRng) -> str:
    return stable_hash({
        "grid": grid.model_dump(mode='json'),
        "budget": budget.model_dump(mode='json'),
        "sampler": sampler.model_dump(mode='json'),
        "cas": cas_config.model_dump(mode='json'),
        "source": source_hash(source),
        "references": [references.real_train.config_hash, references.real_val.config_hash,
                       type(references.extractor).__name__],
        "seed": rng.seed,
        "stream": list(rng.stream),
    })


def run_sweep(grid: SweepGrid, source: SampleSource, budget: EvalBudget, rng: SeededRng,
              references: EvalReferences, out_dir: Union[str, Path], sampler: Optional[SamplerConfig] = None,
              cas_config: Optional[CASConfig] = None, jobs: int = 1, resume: bool = True) -> SweepResult:
    """
    Evaluate every grid cell and persist one row per cell.

    Cell i draws from rng.spawn("cell", i), so results do not depend on the
    order cells finish in. Workers write staging files (atomic rename); the
    orchestrator alone commits rows into the SQLite store. On rerun with
    resume, committed cells are skipped and staged-but-uncommitted cells are
    committed without recomputation. CAS runs for every cell, for the FID/IS
    frontier cells only, or not at all, per the budget.

    Raises:
        ContractViolation: On an empty grid
    """
    started = time.perf_counter()
    sampler = sampler or SamplerConfig()
    cas_config = cas_config or CASConfig()
    cells = GridExpander.expand(grid)
    if not cells:
        raise ContractViolation("sweep grid is empty")
    out_dir = Path(out_dir)
    if not resume:
        (out_dir / STORE_NAME).unlink(missing_ok=True)
        shutil.rmtree(out_dir / STAGING_DIR, ignore_errors=True)
    context = SweepContext(source, references, grid, budget, sampler, cas_config, rng, out_dir / STAGING_DIR)
    context.staging.mkdir(parents=True, exist_ok=True)
    store = SQLiteResultStore(out_dir / STORE_NAME)

    def commit_staged(cell_index: int, phase: str) -> None:
        store.commit(cell_index, JSONFileHandler(_staging_file(context, cell_index, phase)).read())

    committed = set(store.committed_cells())
    for cell in cells:
        index = cell["cell_index"]
        if index not in committed and _staging_file(context, index, "metrics").exists():
            commit_staged(index, "metrics")
            committed.add(index)
    pending = [(context, cell) for cell in cells if cell["cell_index"] not in committed]
    logger.info("Sweep over %d cells: %d committed, %d to run", len(cells), len(committed), len(pending))
    for index in _execute(_run_metrics, pending, jobs, "sweep"):
        commit_staged(index, "metrics")

    if "cas" in grid.metrics and budget.cas == "frontier":
        rows = store.rows()
        chosen = set(frontier_cells(rows))
        for row in rows:
            staged = _staging_file(context, row["cell_index"], "cas")
            if row["cell_index"] in chosen and row["cas_top1"] is None and staged.exists():
                commit_staged(row["cell_index"], "cas")
        rows = store.rows()
        tasks = [(context, row) for row in rows if row["cell_index"] in chosen and row["cas_top1"] is None]
        logger.info("Running CAS for %d frontier cells...", len(tasks))
        for index in _execute(_run_cas, tasks, jobs, "cas"):
            commit_staged(index, "cas")

    rows = store.rows()
    store.close()
    config_hash = sweep_hash(grid, budget, sampler, cas_config, source, references, rng)
    RunManifest(
        command="sweep",
        config_hash=config_hash,
        seed=rng.seed,
        input_hashes={
            "source": source_hash(source),
            "real_train": references.real_train.config_hash,
            "real_val": references.real_val.config_hash,
        },
        artifacts=[STORE_NAME, STAGING_DIR],
        metrics=rows,
    ).write(out_dir / MANIFEST_NAME)
    RunTiming(command="sweep", wall_clock_seconds=time.perf_counter() - started).write(out_dir / TIMING_NAME)
    logger.info("Successfully evaluated %d sweep cells", len(rows))
    return SweepResult(config_hash=config_hash, rows=rows)
