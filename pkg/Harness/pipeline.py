import logging
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from Cascade.stages import CascadeModel, DiffusionStage, SRStage
from Cascade.training import finetune, pretrain, train_sr_stage
from Classification.checkpoint import load_classifier, save_classifier
from Classification.experiments import ExperimentRow, augmentation_experiment
from Classification.protocol import train_cas_classifier
from Classification.training import train_classifier
from Database.sqlite import SQLiteResultStore
from Datasets.dataset import LabeledDataset, snap_to_pixel_grid
from Datasets.mixing import mix_datasets
from Datasets.storage import load_dataset, save_dataset
from Datasets.transforms import box_downsample
from Datasets.worlds import make_gaussian_world, make_reference_split, make_shape_world
from Diffusion.checkpoint import load_denoiser, save_denoiser
from Diffusion.models import ConvDenoiser, DenoiserModel, DenseDenoiser
from FileHandler.hashing import stable_hash
from FileHandler.json import JSONFileHandler, JSONLinesFileHandler
from Harness.config import RunConfig
from Harness.generation import SampleSource, generate_dataset, source_hash
from Harness.manifest import MANIFEST_NAME, TIMING_NAME, RunManifest, RunTiming
from Harness.references import (
    EvalReferences,
    classifier_references,
    gaussian_references,
    train_reference_classifier,
)
from Harness.report import report_experiment, report_per_class, report_sweep
from Harness.sweep import STORE_NAME, SweepResult, run_sweep, sweep_hash
from Metrics.accuracy import per_class_accuracy
from Metrics.fid import fid, fit_stats
from Metrics.inception import inception_score
from Metrics.records import MetricRecord
from Numerics.rng import SeededRng, seeded_torch
from errors import ConfigError, StoreError

logger = logging.getLogger(__name__)

SAMPLE_GRID_PER_CLASS = 8


class Pipeline:
    """
    Runs the lab's commands against one artifact directory.

    Every command loads what it needs from earlier commands' outputs and
    produces them first when they are missing, so any command can be run on
    a fresh directory. Each command draws from its own child stream of the
    master seed.

    Attributes:
        config (RunConfig): Run description
        out_dir (Path): Artifact root
        jobs (int): Worker processes for sweeps
        resume (bool): Reuse committed sweep cells
    """

    def __init__(self, config: RunConfig, out_dir: Union[str, Path], jobs: int = 1, resume: bool = True):
        self.config = config
        self.out_dir = Path(out_dir)
        self.jobs = jobs
        self.resume = resume
        self.rng = SeededRng(config.seed)
        self.metrics_log = JSONLinesFileHandler(self.out_dir / "metrics.jsonl")
        if config.model.sr_factor and config.world.kind != "shape":
            raise ConfigError("super-resolution stages need an image world")

    # paths

    @property
    def data_dir(self) -> Path:
        return self.out_dir / "data"

    @property
    def models_dir(self) -> Path:
        return self.out_dir / "models"

    def _split_path(self, split: str) -> Path:
        return self.data_dir / split

    # data

    def make_data(self) -> Dict[str, Path]:
        """Build the configured world and save every split under data/<split>/."""
        world = self.config.world
        rng = self.rng.spawn("world")
        if world.kind == "gaussian":
            logger.info("Sampling Gaussian world with %d classes in %d dimensions...",
                        world.gaussian.class_count, world.gaussian.dimension)
            train, val = make_gaussian_world(world.gaussian, rng)
            splits = {"train": train, "val": val}
        else:
            corpus, train, val = make_shape_world(world.shape, rng)
            reference = make_reference_split(world.shape, rng)
            splits = {"corpus": corpus, "train": train, "val": val, "reference": reference}
        paths = {name: save_dataset(dataset, self._split_path(name)) for name, dataset in splits.items()}
        logger.info("Successfully saved %d splits to %s", len(paths), self.data_dir)
        return paths

    def load_split(self, split: str) -> LabeledDataset:
        path = self._split_path(split)
        if not (path / "manifest.json").exists():
            self.make_data()
        return load_dataset(path)

    def _base_view(self, dataset: LabeledDataset) -> LabeledDataset:
        """The base stage's resolution: downsampled by the SR factor when a cascade is configured."""
        factor = self.config.model.sr_factor
        if not factor:
            return dataset
        return replace(dataset, samples=snap_to_pixel_grid(box_downsample(dataset.samples, factor)),
                       metadata={**dataset.metadata, "downsampled_by": factor})

    # models

    def _new_denoiser(self, dataset: LabeledDataset, num_labels: int, rng: SeededRng) -> DenoiserModel:
        model_config = self.config.model
        with seeded_torch(rng.spawn("init")):
            if dataset.kind == "vector":
                return DenseDenoiser(dataset.sample_shape[0], num_labels, width=model_config.dense_width)
            return ConvDenoiser(dataset.sample_shape[0], num_labels, widths=model_config.conv_widths)

    def _pretrain_corpus(self) -> LabeledDataset:
        return self.load_split("corpus" if self.config.world.kind == "shape" else "train")

    def pretrain(self) -> Path:
        """Train the base denoiser on the broad corpus; saved to models/pretrained/."""
        rng = self.rng.spawn("pretrain")
        corpus = self._base_view(self._pretrain_corpus())
        schedule = self.config.model.schedule.build()
        model = self._new_denoiser(corpus, corpus.class_count, rng)
        model, history = pretrain(model, corpus, schedule, self.config.pretrain, rng)
        path = save_denoiser(model, schedule, self.models_dir / "pretrained", step=self.config.pretrain.steps,
                             seed=self.config.seed, extra={"history": history})
        logger.info("Successfully saved pretrained denoiser to %s", path)
        return path

    def _load_pretrained(self):
        path = self.models_dir / "pretrained"
        if not (path / "manifest.json").exists():
            self.pretrain()
        return load_denoiser(path)

    def references(self) -> EvalReferences:
        """
        Feature network and real-data statistics: the exact posterior for the
        Gaussian world, a reference classifier trained on held-out real images
        (cached under models/reference/) for the shape world.
        """
        train, val = self.load_split("train"), self.load_split("val")
        if self.config.world.kind == "gaussian":
            return gaussian_references(train, val)
        path = self.models_dir / "reference"
        if (path / "manifest.json").exists():
            classifier, _ = load_classifier(path)
        else:
            classifier = train_reference_classifier(self.load_split("reference"), self.config.reference,
                                                    self.rng.spawn("reference"), self.config.cas.preprocessing)
            save_classifier(classifier, path, extra={"seed": self.config.seed})
            logger.info("Successfully saved reference classifier to %s", path)
        references, _ = classifier_references(classifier, train, val)
        return references

    def finetune(self) -> List[Dict[str, Any]]:
        """
        Fine-tune the pretrained denoiser on the target classes with FID
        checkpoint selection, then train the SR stage when one is configured.

        Returns:
            Per-checkpoint selection metrics
        """
        rng = self.rng.spawn("finetune")
        model, schedule, _ = self._load_pretrained()
        train, val = self.load_split("train"), self.load_split("val")
        references = self.references()
        base_dir = self.models_dir / "base"
        best, metrics = finetune(model, self._base_view(train), schedule, self.config.finetune, rng,
                                 self._base_view(val), references.extractor, out_dir=base_dir)
        chosen = min(metrics, key=lambda row: row["fid"])
        save_denoiser(best, schedule, base_dir / "best", step=chosen["step"], seed=self.config.seed,
                      extra={"fid": chosen["fid"]})
        logger.info("Successfully selected checkpoint %d (FID %.4f)", chosen["step"], chosen["fid"])

        factor = self.config.model.sr_factor
        if factor:
            sr_rng = self.rng.spawn("sr")
            sr_config = self.config.sr_train.model_copy(update={"factor": factor})
            sr_schedule = self.config.model.sr_schedule.build()
            with seeded_torch(sr_rng.spawn("init")):
                sr_model = ConvDenoiser(train.sample_shape[0], best.num_labels, widths=self.config.model.conv_widths,
                                        cond_channels=train.sample_shape[0], aug_conditioning=True)
            sr_model, history = train_sr_stage(sr_model, train, sr_schedule, sr_config, sr_rng)
            save_denoiser(sr_model, sr_schedule, self.models_dir / "sr", step=sr_config.train.steps,
                          seed=self.config.seed, extra={"factor": factor, "history": history})
            logger.info("Successfully saved SR stage to %s", self.models_dir / "sr")
        return metrics

    def source(self) -> SampleSource:
        """The selected base stage, wrapped in a cascade when an SR stage exists."""
        best_path = self.models_dir / "base" / "best"
        if not (best_path / "manifest.json").exists():
            self.finetune()
        model, schedule, _ = load_denoiser(best_path)
        train = self._base_view(self.load_split("train"))
        base = DiffusionStage(model, schedule, train.sample_shape, self.config.sampler)
        sr_path = self.models_dir / "sr"
        if not self.config.model.sr_factor or not (sr_path / "manifest.json").exists():
            return base
        sr_model, sr_schedule, manifest = load_denoiser(sr_path)
        side = train.sample_shape[-1] * manifest["factor"]
        shape = (train.sample_shape[0], side, side)
        sr = SRStage(sr_model, sr_schedule, shape, self.config.model.sr_sampler, factor=manifest["factor"])
        return CascadeModel(base, [sr])

    # generation

    def sample(self) -> Path:
        """A small per-class grid of samples, saved as a dataset under samples/."""
        train = self.load_split("train")
        dataset = generate_dataset(self.source(), SAMPLE_GRID_PER_CLASS, self.config.sampler,
                                   self.rng.spawn("sample"), class_count=train.class_count,
                                   batch_size=self.config.generate.batch_size, class_names=train.class_names)
        path = save_dataset(dataset, self.out_dir / "samples")
        logger.info("Successfully saved %d samples to %s", len(dataset), path)
        return path

    def generate(self) -> Path:
        """Class-balanced generated dataset under data/generated/."""
        train = self.load_split("train")
        dataset = generate_dataset(self.source(), self.config.generate.per_class_count, self.config.sampler,
                                   self.rng.spawn("generate"), class_count=train.class_count,
                                   batch_size=self.config.generate.batch_size, class_names=train.class_names)
        path = save_dataset(dataset, self._split_path("generated"))
        logger.info("Successfully saved generated dataset (%d items) to %s", len(dataset), path)
        return path

    def load_generated(self) -> LabeledDataset:
        if not (self._split_path("generated") / "manifest.json").exists():
            self.generate()
        return load_dataset(self._split_path("generated"))

    # metrics

    def _record(self, metric: str, value: float, sample_count: int, config_hash: str, reference_split: str,
                std: Optional[float] = None) -> MetricRecord:
        record = MetricRecord(metric=metric, value=value, std=std, sample_count=sample_count,
                              config_hash=config_hash, reference_split=reference_split)
        self.metrics_log.append(record.model_dump(mode='json'))
        logger.info("%s = %.6f (%d samples, vs %s)", metric, value, sample_count, reference_split)
        return record

    def eval_fid(self) -> List[MetricRecord]:
        """FID of the generated dataset against real train and real val."""
        generated = self.load_generated()
        references = self.references()
        stats = fit_stats(references.extractor.features(generated.samples))
        return [
            self._record("fid", fid(stats, references.train_stats), len(generated), generated.config_hash, "train"),
            self._record("fid", fid(stats, references.val_stats), len(generated), generated.config_hash, "val"),
        ]

    def eval_is(self) -> MetricRecord:
        generated = self.load_generated()
        references = self.references()
        splits = self.config.budget.is_splits
        probabilities = references.extractor.probabilities(generated.samples)
        usable = len(probabilities) - len(probabilities) % splits
        mean, std = inception_score(probabilities[:usable], splits)
        return self._record("is", mean, usable, generated.config_hash, "reference-network", std=std)

    def eval_cas(self) -> List[MetricRecord]:
        """
        CAS of the generated dataset, plus a per-class comparison against a
        classifier trained with the same recipe on real data.
        """
        generated = self.load_generated()
        train, val = self.load_split("train"), self.load_split("val")
        recipe, preprocessing = self.config.cas.recipe, self.config.cas.preprocessing
        classifier, record = train_cas_classifier(generated, val, recipe, self.rng.spawn("cas"), preprocessing)
        real_classifier, _ = train_classifier(train, recipe, self.rng.spawn("cas-real"), preprocessing=preprocessing)
        report_per_class(per_class_accuracy(real_classifier, val), per_class_accuracy(classifier, val),
                         self.out_dir / "reports", class_names=val.class_names)
        return [
            self._record("cas_top1", record.top1, record.train_size, generated.config_hash, "val"),
            self._record("cas_top5", record.top5, record.train_size, generated.config_hash, "val"),
        ]

    # sweeps and experiments

    def sweep(self) -> SweepResult:
        """Grid evaluation under sweeps/<hash>/ with resume, followed by its report."""
        config = self.config
        source, references = self.source(), self.references()
        if config.sweep.stage == "sr" and not isinstance(source, CascadeModel):
            raise ConfigError("an SR sweep needs a trained SR stage (model.sr_factor)")
        sampler = config.model.sr_sampler if config.sweep.stage == "sr" else config.sampler
        rng = self.rng.spawn("sweep")
        config_hash = sweep_hash(config.sweep, config.budget, sampler, config.cas, source, references, rng)
        out_dir = self.out_dir / "sweeps" / config_hash[:16]
        result = run_sweep(config.sweep, source, config.budget, rng, references, out_dir, sampler=sampler,
                           cas_config=config.cas, jobs=self.jobs, resume=self.resume)
        report_sweep(result.rows, out_dir)
        return result

    def mix(self) -> Path:
        """Real train mixed with generated data at the configured multiplier, under data/mixed/."""
        mixed = mix_datasets(self.load_split("train"), self.load_generated(), self.config.mix_multiplier,
                             self.rng.spawn("mix"))
        path = save_dataset(mixed, self._split_path("mixed"))
        logger.info("Successfully saved mixed dataset (%d items) to %s", len(mixed), path)
        return path

    def augment_exp(self) -> List[ExperimentRow]:
        """Accuracy-vs-multiplier experiment under experiments/<hash>/."""
        started = time.perf_counter()
        config = self.config
        train, val = self.load_split("train"), self.load_split("val")
        source = self.source()

        def generator(per_class: int, rng: SeededRng) -> LabeledDataset:
            return generate_dataset(source, per_class, config.sampler, rng, class_count=train.class_count,
                                    batch_size=config.generate.batch_size, class_names=train.class_names)

        config_hash = stable_hash({
            "experiment": config.experiment.model_dump(mode='json'),
            "sampler": config.sampler.model_dump(mode='json'),
            "preprocessing": config.cas.preprocessing.model_dump(mode='json'),
            "source": source_hash(source),
            "train": train.config_hash,
            "val": val.config_hash,
            "seed": config.seed,
        })
        out_dir = self.out_dir / "experiments" / config_hash[:16]
        rows = augmentation_experiment(train, val, generator, config.experiment.multipliers,
                                       config.experiment.seeds, self.rng.spawn("experiment"),
                                       recipe=config.experiment.recipe, preprocessing=config.cas.preprocessing,
                                       world=config.world.kind, max_generated=config.experiment.max_generated)
        artifacts = report_experiment(rows, out_dir)
        RunManifest(
            command="augment-exp",
            config_hash=config_hash,
            seed=config.seed,
            input_hashes={"source": source_hash(source), "real_train": train.config_hash,
                          "real_val": val.config_hash},
            artifacts=[path.name for path in artifacts],
            metrics=[row.model_dump() for row in rows],
        ).write(out_dir / MANIFEST_NAME)
        RunTiming(command="augment-exp", wall_clock_seconds=time.perf_counter() - started).write(out_dir / TIMING_NAME)
        return rows

    # reports

    def report(self, target: Optional[Union[str, Path]] = None) -> List[Path]:
        """
        Regenerate reports for one sweep or experiment directory, or for every
        one under the artifact root.

        Raises:
            StoreError: If no result table is found
        """
        if target is None:
            targets = sorted(self.out_dir.glob("sweeps/*")) + sorted(self.out_dir.glob("experiments/*"))
        else:
            targets = [Path(target)]
        paths: List[Path] = []
        for directory in targets:
            if (directory / STORE_NAME).exists():
                store = SQLiteResultStore(directory / STORE_NAME)
                rows = store.rows()
                store.close()
                paths.extend(report_sweep(rows, directory))
            elif (directory / "results.json").exists():
                rows = [ExperimentRow.model_validate(row)
                        for row in JSONFileHandler(directory / "results.json").read()["rows"]]
                paths.extend(report_experiment(rows, directory))
            else:
                raise StoreError(f"no sweep or experiment results in {directory}")
        if not paths:
            raise StoreError(f"nothing to report under {self.out_dir}")
        return paths

    def run(self, command: str) -> Any:
        """Dispatch a CLI command name (make-data, eval-fid, ...) to its method."""
        method = getattr(self, command.replace("-", "_"), None)
        if method is None or command.startswith("_") or command in ("run", "source", "references"):
            raise ConfigError(f"unknown command {command!r}")
        return method()
