from Harness.config import (
    CASConfig,
    EvalBudget,
    ExperimentConfig,
    GenerateConfig,
    ModelConfig,
    RunConfig,
    SweepGrid,
    WorldConfig,
    load_run_config,
)
from Harness.generation import generate_dataset, source_hash
from Harness.manifest import RunManifest, RunTiming
from Harness.pipeline import Pipeline
from Harness.references import EvalReferences, classifier_references, gaussian_references
from Harness.report import report, report_experiment, report_per_class, report_sweep
from Harness.sweep import SweepResult, run_sweep
