import tempfile
import unittest

import torch
from pydantic import ValidationError

from Classification.checkpoint import load_classifier, save_classifier
from Classification.experiments import ExperimentRow, augmentation_experiment, summarize_rows
from Classification.models import ClassifierModel, ResidualConvNet, build_classifier
from Classification.protocol import cas, check_no_overlap, train_cas_classifier
from Classification.recipes import FULL_SCALE_CAS_RECIPE, Preprocessing, TrainRecipe, learning_rate
from Classification.training import build_classifier_for, evaluate, train_classifier
from Datasets.config import GaussianWorldConfig
from Datasets.dataset import LabeledDataset
from Datasets.worlds import make_gaussian_world
from Numerics.rng import SeededRng, seeded_torch
from errors import ContractViolation, DatasetError, ProvenanceError

SEPARABLE = GaussianWorldConfig(class_count=2, dimension=2, means=[[-3.0, 0.0], [3.0, 0.0]], std=0.5,
                                train_per_class=100, val_per_class=50)
QUICK_RECIPE = TrainRecipe(epochs=10, batch_size=32, learning_rate=0.1, warmup_epochs=1, milestones=[])


class InputLogits(ClassifierModel):
    """Uses its vector input directly as logits."""
    kind = "input"

    def __init__(self, class_count):
        super().__init__(class_count, class_count)

    def forward(self, x):
        return x


def logit_dataset(logits, labels):
    logits = torch.as_tensor(logits, dtype=torch.float32)
    return LabeledDataset(samples=logits, labels=torch.as_tensor(labels), class_count=logits.shape[1], kind="vector")


class TestRecipes(unittest.TestCase):
    def test_stepwise_schedule(self):
        recipe = TrainRecipe(learning_rate=0.1, warmup_epochs=2, milestones=[15, 25], decay_factor=0.1)
        self.assertAlmostEqual(learning_rate(recipe, 0.0), 0.0, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 1.0), 0.05, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 2.0), 0.1, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 14.9), 0.1, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 15.0), 0.01, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 29.0), 0.001, delta=1e-12)

    def test_cosine_schedule(self):
        recipe = TrainRecipe(epochs=10, learning_rate=1.0, warmup_epochs=0, decay="cosine")
        self.assertAlmostEqual(learning_rate(recipe, 0.0), 1.0, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 5.0), 0.5, delta=1e-12)
        self.assertAlmostEqual(learning_rate(recipe, 10.0), 0.0, delta=1e-12)

    def test_full_scale_recipe(self):
        """Test the large-batch recipe warms up over five epochs and decays at 30, 60 and 80"""
        self.assertAlmostEqual(learning_rate(FULL_SCALE_CAS_RECIPE, 2.5), 0.2, delta=1e-12)
        self.assertAlmostEqual(learning_rate(FULL_SCALE_CAS_RECIPE, 29.0), 0.4, delta=1e-12)
        self.assertAlmostEqual(learning_rate(FULL_SCALE_CAS_RECIPE, 45.0), 0.04, delta=1e-12)
        self.assertAlmostEqual(learning_rate(FULL_SCALE_CAS_RECIPE, 85.0), 0.0004, delta=1e-12)

    def test_validation(self):
        with self.assertRaises(ValidationError):
            TrainRecipe(epochs=1, warmup_epochs=2)
        with self.assertRaises(ValidationError):
            TrainRecipe(milestones=[20, 10])
        with self.assertRaises(ValidationError):
            TrainRecipe(optimizer="adam")
        with self.assertRaises(ValidationError):
            Preprocessing(resize_to=16, crop_to=20)


class TestEvaluate(unittest.TestCase):
    def test_perfect_predictor(self):
        labels = [0, 1, 2, 1]
        dataset = logit_dataset(torch.eye(3)[labels], labels)
        self.assertEqual(evaluate(InputLogits(3), dataset, [1, 3]), {1: 1.0, 3: 1.0})

    def test_constant_predictor(self):
        """Test a fixed ranking scores 1/3 at top-1 and 2/3 at top-2 on balanced labels"""
        dataset = logit_dataset([[3.0, 2.0, 1.0]] * 3, [0, 1, 2])
        accuracy = evaluate(InputLogits(3), dataset, [1, 2, 3])
        self.assertAlmostEqual(accuracy[1], 1 / 3)
        self.assertAlmostEqual(accuracy[2], 2 / 3)
        self.assertAlmostEqual(accuracy[3], 1.0)

    def test_rejects_bad_k(self):
        dataset = logit_dataset([[1.0, 0.0]], [0])
        with self.assertRaises(ContractViolation):
            evaluate(InputLogits(2), dataset, [5])
        with self.assertRaises(ContractViolation):
            evaluate(InputLogits(2), dataset, [0])


class TestTraining(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.train, cls.val = make_gaussian_world(SEPARABLE, SeededRng(0))

    def test_zero_epochs_returns_initialisation(self):
        recipe = TrainRecipe(epochs=0, warmup_epochs=0)
        model, history = train_classifier(self.train, recipe, SeededRng(1))
        self.assertEqual(history, [])
        with seeded_torch(SeededRng(1).spawn("init")):
            fresh = build_classifier_for(self.train, recipe)
        for (name, a), (_, b) in zip(model.state_dict().items(), fresh.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_separable_world(self):
        """Test well-separated Gaussian classes are learned almost perfectly"""
        model, history = train_classifier(self.train, QUICK_RECIPE, SeededRng(2), val_set=self.val)
        self.assertEqual(len(history), 10)
        self.assertIn("val_top1", history[-1])
        self.assertGreaterEqual(evaluate(model, self.val, [1])[1], 0.95)

    def test_deterministic(self):
        recipe = TrainRecipe(epochs=2, batch_size=32, warmup_epochs=0, dropout=0.2)
        first, first_history = train_classifier(self.train, recipe, SeededRng(3))
        second, second_history = train_classifier(self.train, recipe, SeededRng(3))
        self.assertEqual(first_history, second_history)
        self.assertTrue(torch.equal(first.logits(self.val.samples), second.logits(self.val.samples)))

    def test_image_classifier_uses_preprocessing(self):
        images = LabeledDataset(samples=torch.zeros(4, 3, 16, 16), labels=torch.tensor([0, 1, 0, 1]),
                                class_count=2, kind="image")
        model = build_classifier_for(images, QUICK_RECIPE, Preprocessing(resize_to=16, crop_to=12))
        self.assertIsInstance(model, ResidualConvNet)
        self.assertEqual(model.prepare(images.samples).shape, (4, 3, 12, 12))
        self.assertEqual(model.predict(images.samples).shape, (4,))


class TestCAS(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        train, cls.val = make_gaussian_world(SEPARABLE, SeededRng(0))
        cls.generated = train.with_provenance("generated")

    def test_scores_generated_on_real(self):
        rng = SeededRng(4).spawn("cas")
        classifier, record = train_cas_classifier(self.generated, self.val, QUICK_RECIPE, rng)
        self.assertGreaterEqual(record.top1, 0.95)
        self.assertEqual(record.top5, 1.0)
        self.assertEqual((record.train_size, record.val_size), (200, 100))
        self.assertEqual(record.seed, 4)
        self.assertEqual(record.stream, "/".join(str(key) for key in rng.stream))
        self.assertEqual(cas(self.generated, self.val, QUICK_RECIPE, rng), record)

    def test_provenance_guards(self):
        with self.assertRaises(ProvenanceError):
            cas(self.val, self.val, QUICK_RECIPE, SeededRng(0))
        with self.assertRaises(ProvenanceError):
            cas(self.generated, self.generated, QUICK_RECIPE, SeededRng(0))

    def test_overlap_aborts(self):
        leaked = self.val.with_provenance("generated")
        with self.assertRaises(ProvenanceError):
            check_no_overlap(leaked, self.val)
        with self.assertRaises(ProvenanceError):
            cas(leaked, self.val, QUICK_RECIPE, SeededRng(0))
        check_no_overlap(self.generated, self.val)


class TestAugmentationExperiment(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = SEPARABLE.model_copy(update={"train_per_class": 10, "val_per_class": 20})
        cls.train, cls.val = make_gaussian_world(config, SeededRng(0))
        cls.recipe = TrainRecipe(epochs=2, batch_size=8, warmup_epochs=0)

        def generator(per_class, rng):
            pool_config = SEPARABLE.model_copy(update={"train_per_class": per_class})
            return make_gaussian_world(pool_config, rng)[0].with_provenance("generated")

        cls.generator = staticmethod(generator)
        cls.rows = augmentation_experiment(cls.train, cls.val, generator, [1, 0], [0, 1], SeededRng(5),
                                           recipe=cls.recipe, world="gaussian")

    def test_row_layout(self):
        self.assertEqual([(row.multiplier, row.seed) for row in self.rows], [(0.0, 0), (0.0, 1), (1.0, 0), (1.0, 1)])
        self.assertEqual([row.total_size for row in self.rows], [20, 20, 40, 40])
        self.assertTrue(all(row.world == "gaussian" for row in self.rows))

    def test_baseline_is_real_only(self):
        """Test the m = 0 row equals a classifier trained on the real data alone"""
        for row in self.rows[:2]:
            self.assertEqual(row.delta_vs_baseline, 0.0)
            classifier, _ = train_classifier(self.train, self.recipe, SeededRng(row.seed).spawn("classifier"))
            self.assertEqual(evaluate(classifier, self.val, [1])[1], row.top1)
        for row in self.rows[2:]:
            baseline = next(r for r in self.rows[:2] if r.seed == row.seed)
            self.assertAlmostEqual(row.delta_vs_baseline, row.top1 - baseline.top1)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(ContractViolation):
            augmentation_experiment(self.train, self.val, self.generator, [1], [0], SeededRng(5), recipe=self.recipe)
        with self.assertRaises(ContractViolation):
            augmentation_experiment(self.train, self.val, self.generator, [0, 1], [], SeededRng(5), recipe=self.recipe)
        with self.assertRaises(DatasetError):
            augmentation_experiment(self.train, self.val, self.generator, [0, 2], [0], SeededRng(5),
                                    recipe=self.recipe, max_generated=10)

    def test_summary(self):
        rows = [
            ExperimentRow(world="shape", multiplier=m, total_size=10, seed=s, top1=t, top5=1.0, delta_vs_baseline=0.0,
                          recipe_hash="r", generator_hash="g")
            for m, s, t in [(0.0, 0, 0.5), (0.0, 1, 0.7), (1.0, 0, 0.8), (1.0, 1, 0.8)]
        ]
        summary = summarize_rows(rows)
        self.assertEqual([row.multiplier for row in summary], [0.0, 1.0])
        self.assertAlmostEqual(summary[0].top1_mean, 0.6)
        self.assertAlmostEqual(summary[0].top1_std, 0.1)
        self.assertAlmostEqual(summary[1].delta_vs_baseline, 0.2)
        self.assertEqual(summary[1].seeds, 2)
        with self.assertRaises(ContractViolation):
            summarize_rows([])


class TestResidualConvNet(unittest.TestCase):
    def test_default_size(self):
        """Test the default network has roughly 0.3M parameters and maps 32x32 images to logits"""
        with seeded_torch(SeededRng(0)):
            model = ResidualConvNet(3, 10)
        count = sum(parameter.numel() for parameter in model.parameters())
        self.assertGreater(count, 250_000)
        self.assertLess(count, 350_000)
        self.assertEqual(len(model.blocks), 6)
        self.assertEqual(model.logits(torch.zeros(2, 3, 32, 32)).shape, (2, 10))


class TestCheckpoint(unittest.TestCase):
    def test_round_trip_keeps_batchnorm_statistics(self):
        with seeded_torch(SeededRng(0)):
            model = ResidualConvNet(3, 4, widths=(4, 8, 8), feature_dim=8, resize_to=12, crop_to=8)
            model.train()
            model(torch.randn(6, 3, 8, 8))
        model.eval()
        images = torch.rand(5, 3, 16, 16, generator=SeededRng(1).generator()) * 2 - 1
        with tempfile.TemporaryDirectory() as directory:
            save_classifier(model, directory, extra={"recipe_hash": "abc"})
            restored, manifest = load_classifier(directory)
        self.assertEqual(manifest["recipe_hash"], "abc")
        self.assertEqual(restored.architecture(), model.architecture())
        self.assertTrue(torch.allclose(restored.logits(images), model.logits(images)))

    def test_unknown_kind(self):
        with self.assertRaises(ContractViolation):
            build_classifier({"kind": "transformer"})


if __name__ == '__main__':
    unittest.main()
