import csv
import io
import json
import shutil
import tempfile
import unittest
from pathlib import Path

import torch

import gendaug
from Cascade.stages import DiffusionStage
from Classification.experiments import ExperimentRow
from Classification.recipes import TrainRecipe
from Datasets.config import GaussianWorldConfig
from Datasets.storage import load_dataset
from Datasets.worlds import make_gaussian_world
from Diffusion.config import SamplerConfig
from Diffusion.oracle import GaussianOracle
from Diffusion.schedule import build_schedule
from FileHandler.json import JSONFileHandler
from Harness.config import CASConfig, EvalBudget, RunConfig, SweepGrid, load_run_config
from Harness.generation import generate_dataset
from Harness.helpers import GridExpander
from Harness.manifest import MANIFEST_NAME, TIMING_NAME, RunManifest, RunTiming
from Harness.pipeline import Pipeline
from Harness.references import gaussian_references
from Harness.report import report
from Harness.sweep import STAGING_DIR, STORE_NAME, frontier_cells, run_sweep, sweep_hash
from Metrics.fid import fid, fit_stats
from Metrics.inception import inception_score
from Metrics.pareto import pareto_indices
from Numerics.rng import SeededRng
from errors import ConfigError, ContractViolation, StoreError

CONFIG_DIR = Path(__file__).parent / "configs"
WORLD = GaussianWorldConfig(class_count=2, dimension=2, means=[[-1.5, 0.0], [1.5, 0.0]], std=0.5,
                            train_per_class=60, val_per_class=60)
QUICK_CAS = CASConfig(recipe=TrainRecipe(epochs=2, batch_size=16, warmup_epochs=0))

TINY_RUN = {
    "seed": 3,
    "world": {"kind": "gaussian", "gaussian": {"class_count": 2, "dimension": 2, "means": [[-1.5, 0.0], [1.5, 0.0]],
                                               "std": 0.5, "train_per_class": 30, "val_per_class": 30}},
    "model": {"dense_width": 16, "schedule": {"kind": "cosine", "T": 20}},
    "pretrain": {"steps": 2, "batch_size": 8},
    "finetune": {"train": {"steps": 2, "batch_size": 8}, "checkpoint_interval": 1, "selection_samples": 10,
                 "sampler": {"kind": "ddim", "steps": 5, "clip": False}},
    "sampler": {"kind": "ddpm", "steps": 5, "clip": False},
    "generate": {"per_class_count": 20},
    "sweep": {"guidance_weights": [1.0, 2.0], "log_variances": [1.0], "steps": [5],
              "metrics": ["fid_train", "fid_val", "is"]},
    "budget": {"samples_per_cell": 20, "is_splits": 2, "cas": "none"},
    "cas": {"recipe": {"epochs": 1, "batch_size": 16, "warmup_epochs": 0}},
    "experiment": {"multipliers": [0, 1], "seeds": [0], "recipe": {"epochs": 1, "batch_size": 16, "warmup_epochs": 0}},
}


def embedded_table(svg_path):
    text = Path(svg_path).read_text(encoding='utf-8')
    start = text.index("<!-- data\n") + len("<!-- data\n")
    return list(csv.DictReader(io.StringIO(text[start:text.index("-->", start)])))


class TestRunConfig(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def _write(self, payload, name="run.json"):
        path = self.root / name
        path.write_text(payload if isinstance(payload, str) else json.dumps(payload), encoding='utf-8')
        return path

    def test_shipped_configs_parse(self):
        for path in sorted(CONFIG_DIR.glob("*.json")):
            self.assertIsInstance(load_run_config(path), RunConfig, path.name)

    def test_unknown_keys_are_errors(self):
        with self.assertRaises(ConfigError):
            load_run_config(self._write({"seed": 1, "colour": "red"}))
        with self.assertRaises(ConfigError):
            load_run_config(self._write({"sampler": {"guidance": 2.0}}))

    def test_invalid_files(self):
        with self.assertRaises(ConfigError):
            load_run_config(self.root / "missing.json")
        with self.assertRaises(ConfigError):
            load_run_config(self._write("{not json"))
        with self.assertRaises(ConfigError):
            load_run_config(self._write({"sweep": {"guidance_weights": [0.5]}}))

    def test_seed_override(self):
        path = self._write({"seed": 1})
        self.assertEqual(load_run_config(path).seed, 1)
        self.assertEqual(load_run_config(path, seed=9).seed, 9)
        self.assertEqual(load_run_config(seed=4).seed, 4)


class TestGridExpander(unittest.TestCase):
    def test_full_grid(self):
        """Test 6 guidance weights x 3 log-variances x 5 augmentation levels give 90 ordered cells"""
        grid = SweepGrid(guidance_weights=[1.0, 1.25, 1.5, 2.0, 3.0, 5.0], log_variances=[0.0, 0.3, 1.0],
                         aug_levels=[0.0, 0.1, 0.2, 0.3, 0.4], steps=[100])
        cells = GridExpander.expand(grid)
        self.assertEqual(len(cells), 90)
        self.assertEqual([cell["cell_index"] for cell in cells], list(range(90)))
        self.assertEqual(cells[0], {"cell_index": 0, "guidance_weight": 1.0, "log_variance": 0.0, "aug_level": 0.0,
                                    "steps": 100})
        self.assertEqual(cells[1]["aug_level"], 0.1)
        self.assertEqual(cells[15]["guidance_weight"], 1.25)

    def test_sampler_for_cell(self):
        base = SamplerConfig(clip=False, clip_threshold=0.9)
        cell = GridExpander.expand(SweepGrid(guidance_weights=[2.0], log_variances=[0.3], steps=[7]))[0]
        sampler = GridExpander.sampler_for(cell, "ddim", base)
        self.assertEqual((sampler.kind, sampler.guidance_weight, sampler.log_variance, sampler.steps),
                         ("ddim", 2.0, 0.3, 7))
        self.assertEqual((sampler.clip, sampler.clip_threshold), (False, 0.9))


class TestGeneration(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        means = torch.linspace(-2.0, 2.0, 20, dtype=torch.float64).reshape(10, 2)
        oracle = GaussianOracle(means, 0.3, build_schedule("cosine", 20))
        cls.source = DiffusionStage(oracle, oracle.schedule, (2,))
        cls.sampler = SamplerConfig(steps=5, clip=False)

    def test_balanced_classes(self):
        dataset = generate_dataset(self.source, 50, self.sampler, SeededRng(0), batch_size=120)
        self.assertEqual(len(dataset), 500)
        self.assertEqual(dataset.per_class_counts, [50] * 10)
        self.assertEqual(dataset.provenance, "generated")
        self.assertEqual(dataset.metadata["per_class_count"], 50)

    def test_deterministic(self):
        first = generate_dataset(self.source, 5, self.sampler, SeededRng(1))
        second = generate_dataset(self.source, 5, self.sampler, SeededRng(1))
        other = generate_dataset(self.source, 5, self.sampler, SeededRng(2))
        self.assertTrue(first.equals(second))
        self.assertFalse(torch.equal(first.samples, other.samples))

    def test_rejects_bad_requests(self):
        with self.assertRaises(ContractViolation):
            generate_dataset(self.source, 0, self.sampler, SeededRng(0))
        with self.assertRaises(ContractViolation):
            generate_dataset(self.source, 1, self.sampler, SeededRng(0), class_count=11)


class TestSweep(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        train, val = make_gaussian_world(WORLD, SeededRng(0))
        cls.references = gaussian_references(train, val)
        schedule = build_schedule("cosine", 20)
        cls.source = DiffusionStage(GaussianOracle(train.metadata["means"], WORLD.std, schedule), schedule, (2,))
        cls.sampler = SamplerConfig(clip=False)
        cls.grid = SweepGrid(guidance_weights=[1.0, 3.0], log_variances=[0.0, 1.0], steps=[5])
        cls.budget = EvalBudget(samples_per_cell=40, is_splits=4, cas="none")
        cls.directory = tempfile.TemporaryDirectory()
        cls.root = Path(cls.directory.name)
        cls.result = cls._run(cls.root / "first")

    @classmethod
    def tearDownClass(cls):
        cls.directory.cleanup()

    @classmethod
    def _run(cls, out_dir, grid=None, budget=None, resume=True):
        return run_sweep(grid or cls.grid, cls.source, budget or cls.budget, SeededRng(7), cls.references, out_dir,
                         sampler=cls.sampler, cas_config=QUICK_CAS, resume=resume)

    def test_one_row_per_cell(self):
        self.assertEqual([row["cell_index"] for row in self.result.rows], [0, 1, 2, 3])
        for row in self.result.rows:
            self.assertEqual(row["sample_count"], 40)
            self.assertIsNone(row["cas_top1"])
            self.assertGreaterEqual(row["is_mean"], 1.0)
        manifest = RunManifest.read(self.root / "first" / "manifest.json")
        self.assertEqual(manifest.config_hash, self.result.config_hash)
        self.assertEqual(manifest.metrics, self.result.rows)

    def test_cell_matches_direct_evaluation(self):
        """Test a stored row equals metrics computed directly from the cell's own stream"""
        cell = GridExpander.expand(self.grid)[3]
        sampler = GridExpander.sampler_for(cell, "ddpm", self.sampler)
        generated = generate_dataset(self.source, 20, sampler, SeededRng(7).spawn("cell", 3).spawn("generate"),
                                     class_count=2)
        features = self.references.extractor.features(generated.samples)
        row = self.result.rows[3]
        self.assertAlmostEqual(row["fid_val"], fid(fit_stats(features), self.references.val_stats), places=12)
        self.assertAlmostEqual(row["fid_train"], fid(fit_stats(features), self.references.train_stats), places=12)
        is_mean, _ = inception_score(self.references.extractor.probabilities(generated.samples), 4)
        self.assertAlmostEqual(row["is_mean"], is_mean, places=12)

    def test_resume_and_rerun_are_identical(self):
        """Test resumed and fresh sweeps write byte-identical manifests and tables"""
        original = (self.root / "first" / MANIFEST_NAME).read_bytes()
        resumed = self._run(self.root / "first")
        self.assertEqual(resumed.rows, self.result.rows)
        self.assertEqual((self.root / "first" / MANIFEST_NAME).read_bytes(), original)
        fresh = self._run(self.root / "fresh", resume=False)
        self.assertEqual(fresh.rows, self.result.rows)
        self.assertEqual((self.root / "fresh" / MANIFEST_NAME).read_bytes(), original)
        report(resumed, self.root / "first" / "reports")
        report(fresh, self.root / "fresh" / "reports")
        for name in ("rows.csv", "rows.json"):
            self.assertEqual((self.root / "first" / "reports" / name).read_bytes(),
                             (self.root / "fresh" / "reports" / name).read_bytes(), name)
        timing = RunTiming.read(self.root / "fresh" / TIMING_NAME)
        self.assertEqual(timing.command, "sweep")
        self.assertGreaterEqual(timing.wall_clock_seconds, 0.0)

    def test_staged_cells_commit_without_store(self):
        copy = self.root / "restaged"
        shutil.copytree(self.root / "first", copy)
        (copy / STORE_NAME).unlink()
        self.assertTrue((copy / STAGING_DIR / "cell_0.metrics.json").exists())
        self.assertEqual(self._run(copy).rows, self.result.rows)

    def test_frontier_cas(self):
        grid = self.grid.model_copy(update={"metrics": ["fid_train", "fid_val", "is", "cas"]})
        budget = self.budget.model_copy(update={"cas": "frontier"})
        result = self._run(self.root / "cas", grid=grid, budget=budget)
        with_cas = {row["cell_index"] for row in result.rows if row["cas_top1"] is not None}
        self.assertEqual(with_cas, set(frontier_cells(result.rows)))
        for row in result.rows:
            if row["cas_top1"] is not None:
                self.assertLessEqual(row["cas_top1"], row["cas_top5"])

    def test_hash_follows_grid(self):
        first = sweep_hash(self.grid, self.budget, self.sampler, QUICK_CAS, self.source, self.references, SeededRng(7))
        other_grid = self.grid.model_copy(update={"steps": [10]})
        self.assertEqual(first, self.result.config_hash)
        self.assertNotEqual(first, sweep_hash(other_grid, self.budget, self.sampler, QUICK_CAS, self.source,
                                              self.references, SeededRng(7)))

    def test_empty_grid(self):
        with self.assertRaises(ContractViolation):
            self._run(self.root / "empty", grid=SweepGrid.model_construct(guidance_weights=[]))

    def test_report_tables_and_figures(self):
        out_dir = self.root / "report"
        paths = report(self.result, out_dir)
        names = {path.name for path in paths}
        self.assertTrue({"rows.csv", "rows.json", "pareto_fid_is.svg", "fid_vs_guidance.svg"} <= names)
        with open(out_dir / "rows.csv", newline='') as file:
            self.assertEqual(len(list(csv.DictReader(file))), 4)
        marked = [int(row["on_frontier"]) for row in embedded_table(out_dir / "pareto_fid_is.svg")]
        frontier = set(pareto_indices([(row["fid_val"], row["is_mean"]) for row in self.result.rows]))
        self.assertEqual(marked, [int(i in frontier) for i in range(4)])

    def test_report_is_reproducible(self):
        first, second = self.root / "again-1", self.root / "again-2"
        report(self.result, first)
        report(self.result, second)
        for path in sorted(first.iterdir()):
            self.assertEqual(path.read_bytes(), (second / path.name).read_bytes(), path.name)

    def test_report_errors(self):
        blocker = self.root / "blocker"
        blocker.write_text("", encoding='utf-8')
        with self.assertRaises(StoreError):
            report(self.result, blocker / "reports")
        with self.assertRaises(ContractViolation):
            report([], self.root / "nothing")


class TestExperimentReport(unittest.TestCase):
    def test_tables_and_baseline(self):
        rows = [
            ExperimentRow(world="shape", multiplier=m, total_size=10 * (1 + m), seed=s, top1=t, top5=1.0,
                          delta_vs_baseline=0.0, recipe_hash="r", generator_hash="g")
            for m, s, t in [(0.0, 0, 0.5), (0.0, 1, 0.6), (1.0, 0, 0.7), (1.0, 1, 0.8)]
        ]
        with tempfile.TemporaryDirectory() as directory:
            paths = report(rows, directory)
            names = {path.name for path in paths}
            self.assertEqual(names, {"results.csv", "summary.csv", "results.json", "accuracy_vs_multiplier.svg"})
            saved = JSONFileHandler(Path(directory) / "results.json").read()
            self.assertEqual(len(saved["rows"]), 4)
            table = embedded_table(Path(directory) / "accuracy_vs_multiplier.svg")
            self.assertEqual([float(row["multiplier"]) for row in table], [0.0, 1.0])
            self.assertAlmostEqual(float(table[0]["top1_mean"]), 0.55)


class TestPipeline(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.TemporaryDirectory()
        cls.pipeline = Pipeline(RunConfig.model_validate(TINY_RUN), cls.directory.name)

    @classmethod
    def tearDownClass(cls):
        cls.directory.cleanup()

    def test_commands_produce_artifacts(self):
        """Test each command builds its prerequisites on a fresh directory"""
        records = self.pipeline.run("eval-fid")
        self.assertEqual([record.reference_split for record in records], ["train", "val"])
        root = Path(self.directory.name)
        for path in ("data/train", "data/val", "data/generated", "models/pretrained", "models/base/best"):
            self.assertTrue((root / path / "manifest.json").exists(), path)
        selection = JSONFileHandler(root / "models/base/selection.json").read()
        self.assertEqual([row["step"] for row in selection["checkpoints"]], [1, 2])
        generated = load_dataset(root / "data/generated")
        self.assertEqual(generated.per_class_counts, [20, 20])

        self.pipeline.run("eval-is")
        logged = [row["metric"] for row in self.pipeline.metrics_log.read()]
        self.assertEqual(logged[:3], ["fid", "fid", "is"])

        result = self.pipeline.run("sweep")
        self.assertEqual(result.cell_count, 2)
        rows = self.pipeline.run("augment-exp")
        self.assertEqual([row.multiplier for row in rows], [0.0, 1.0])
        self.assertTrue(self.pipeline.report())

    def test_unknown_command(self):
        with self.assertRaises(ConfigError):
            self.pipeline.run("references")
        with self.assertRaises(ConfigError):
            self.pipeline.run("teleport")

    def test_sr_needs_image_world(self):
        config = RunConfig.model_validate({**TINY_RUN, "model": {**TINY_RUN["model"], "sr_factor": 2}})
        with self.assertRaises(ConfigError):
            Pipeline(config, self.directory.name)


class TestCommandLine(unittest.TestCase):
    def test_exit_codes(self):
        with tempfile.TemporaryDirectory() as directory:
            bad = Path(directory) / "bad.json"
            bad.write_text(json.dumps({"unknown": 1}), encoding='utf-8')
            self.assertEqual(gendaug.main(["make-data", "--config", str(bad), "--out", directory]), 1)
            good = Path(directory) / "good.json"
            good.write_text(json.dumps(TINY_RUN), encoding='utf-8')
            self.assertEqual(gendaug.main(["make-data", "--config", str(good), "--out", directory]), 0)
            self.assertTrue((Path(directory) / "data" / "val" / "manifest.json").exists())
            self.assertEqual(gendaug.main(["report", "--config", str(good), "--out", directory]), 1)


if __name__ == '__main__':
    unittest.main()
