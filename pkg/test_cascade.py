import math
import tempfile
import unittest
from pathlib import Path

import torch

from Cascade.config import DiffusionTrainConfig, FinetuneConfig, SRTrainConfig
from Cascade.stages import CascadeModel, DiffusionStage, SRStage, cascade_sample, noise_augment, sr_sample, upsample
from Cascade.training import (compare_finetune_vs_scratch, finetune, pretrain, selection_fid, train_denoiser,
                              train_sr_stage)
from Datasets.config import GaussianWorldConfig
from Datasets.dataset import LabeledDataset, snap_to_pixel_grid
from Datasets.transforms import box_downsample
from Datasets.worlds import make_gaussian_world
from Diffusion.checkpoint import load_denoiser
from Diffusion.config import SamplerConfig
from Diffusion.models import ConvDenoiser, DenseDenoiser
from Diffusion.schedule import build_schedule
from FileHandler.json import JSONFileHandler
from Metrics.features import IdentityFeatures
from Metrics.fid import fit_stats
from Numerics.rng import SeededRng, seeded_torch
from errors import ContractViolation, DivergenceError


def dense_model(seed=0, dimension=2, num_labels=2):
    with seeded_torch(SeededRng(seed)):
        return DenseDenoiser(dimension, num_labels=num_labels, width=16)


def random_images(count, size, channels=3, class_count=2, seed=0):
    generator = SeededRng(seed).generator()
    samples = snap_to_pixel_grid(torch.rand(count, channels, size, size, generator=generator) * 2 - 1)
    labels = torch.arange(count) % class_count
    return LabeledDataset(samples=samples, labels=labels, class_count=class_count, kind="image")


class TestNoiseAugment(unittest.TestCase):
    def setUp(self):
        self.z = torch.rand(2000, 4, generator=SeededRng(0).generator(), dtype=torch.float64) * 2 - 1

    def test_zero_level_is_identity(self):
        augmented, level = noise_augment(self.z, 0.0, SeededRng(1))
        self.assertTrue(torch.equal(augmented, self.z))
        self.assertEqual(level, 0.0)

    def test_half_level_mixes_equally(self):
        """Test a = 0.5 gives (z + ε) / √2"""
        rng = SeededRng(2)
        augmented, _ = noise_augment(self.z, 0.5, rng)
        noise = torch.randn(self.z.shape, generator=rng.generator(), dtype=self.z.dtype)
        self.assertTrue(torch.allclose(augmented, (self.z + noise) / math.sqrt(2.0), atol=1e-12))

    def test_full_level_is_pure_noise(self):
        augmented, _ = noise_augment(torch.zeros(10_000, dtype=torch.float64), 1.0, SeededRng(3))
        self.assertLess(abs(float(augmented.var()) - 1.0), 0.05)

    def test_rejects_bad_input(self):
        with self.assertRaises(ContractViolation):
            noise_augment(self.z, 1.5, SeededRng(0))
        with self.assertRaises(ContractViolation):
            noise_augment(self.z + 3.0, 0.2, SeededRng(0))


class TestUpsample(unittest.TestCase):
    def test_constant_image(self):
        image = torch.full((2, 3, 4, 4), 0.25)
        for factor in (2, 4):
            result = upsample(image, factor)
            self.assertEqual(result.shape, (2, 3, 4 * factor, 4 * factor))
            self.assertTrue(torch.allclose(result, image.new_full(result.shape, 0.25)))

    def test_linear_ramp_round_trip(self):
        """Test box-downsampling an upsampled ramp recovers it, with edge error at most slope / 8"""
        slope = 1.0 / 8
        ramp = ((torch.arange(8, dtype=torch.float64) + 0.5) * slope).reshape(1, 1, 1, 8).repeat(1, 1, 8, 1)
        for factor in (2, 4):
            error = (box_downsample(upsample(ramp, factor), factor) - ramp).abs()
            self.assertLess(float(error[..., 1:-1].max()), 1e-12)
            self.assertLessEqual(float(error.max()), slope / 8 + 1e-12)

    def test_rejects_factor(self):
        with self.assertRaises(ContractViolation):
            upsample(torch.zeros(1, 1, 4, 4), 3)


class TestCascadeSampling(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        schedule = build_schedule("cosine", 10)
        with seeded_torch(SeededRng(0)):
            base = ConvDenoiser(3, num_labels=2, widths=(8, 16))
            sr = ConvDenoiser(3, num_labels=2, widths=(8, 16), cond_channels=3, aug_conditioning=True)
        cls.base = DiffusionStage(base, schedule, (3, 8, 8), SamplerConfig(steps=3))
        cls.sr = SRStage(sr, schedule, (3, 16, 16), SamplerConfig(steps=3, aug_level=0.2), factor=2)
        cls.cascade = CascadeModel(cls.base, [cls.sr])
        cls.labels = torch.tensor([0, 1])

    def test_shapes_chain(self):
        """Test an 8px base feeds a 16px SR stage"""
        images = cascade_sample(self.cascade, self.labels, SeededRng(4))
        self.assertEqual(images.shape, (2, 3, 16, 16))
        self.assertEqual(self.cascade.resolution, 16)
        self.assertLessEqual(float(images.abs().max()), 1.0)

    def test_deterministic(self):
        first = cascade_sample(self.cascade, self.labels, SeededRng(5))
        second = cascade_sample(self.cascade, self.labels, SeededRng(5))
        self.assertTrue(torch.equal(first, second))

    def test_resolution_mismatch(self):
        with self.assertRaises(ContractViolation):
            CascadeModel(self.base, [SRStage(self.sr.model, self.sr.schedule, (3, 32, 32), factor=2)])
        with self.assertRaises(ContractViolation):
            sr_sample(self.sr, torch.zeros(2, 3, 16, 16), self.labels, self.sr.sampler, 0.0, SeededRng(0))
        with self.assertRaises(ContractViolation):
            SRStage(self.sr.model, self.sr.schedule, (3, 16, 16), factor=3)


class TestTraining(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = GaussianWorldConfig(class_count=2, dimension=2, means=[[-0.5, 0.0], [0.5, 0.0]], std=0.2,
                                     train_per_class=40, val_per_class=20)
        cls.train, cls.val = make_gaussian_world(config, SeededRng(0))
        cls.schedule = build_schedule("cosine", 20)
        cls.train_config = DiffusionTrainConfig(steps=4, batch_size=8, log_every=2)

    def test_zero_steps_leave_parameters(self):
        model = dense_model()
        before = {name: value.clone() for name, value in model.state_dict().items()}
        _, history = pretrain(model, self.train, self.schedule, DiffusionTrainConfig(steps=0), SeededRng(1))
        self.assertEqual(history, [])
        for name, value in model.state_dict().items():
            self.assertTrue(torch.equal(value, before[name]))

    def test_pretrain_deterministic(self):
        first, first_history = pretrain(dense_model(), self.train, self.schedule, self.train_config, SeededRng(2))
        second, second_history = pretrain(dense_model(), self.train, self.schedule, self.train_config, SeededRng(2))
        self.assertEqual(first_history, second_history)
        self.assertEqual([step for step, _ in first_history], [1, 2, 3, 4])
        for (name, a), (_, b) in zip(first.state_dict().items(), second.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_pretrain_lowers_loss(self):
        """Test the mean of the last 20 losses sits below the first 20 in the median over three seeds"""
        config = DiffusionTrainConfig(steps=300, batch_size=64)
        changes = []
        for seed in range(3):
            _, history = pretrain(dense_model(seed), self.train, self.schedule, config, SeededRng(seed))
            losses = [loss for _, loss in history]
            changes.append(sum(losses[-20:]) / 20 - sum(losses[:20]) / 20)
        self.assertLess(sorted(changes)[1], 0.0)

    def test_divergence_names_step(self):
        model = dense_model()
        with torch.no_grad():
            model.output.bias.fill_(float('nan'))
        with self.assertRaises(DivergenceError) as context:
            train_denoiser(model, self.train, self.schedule, self.train_config, SeededRng(3))
        self.assertEqual(context.exception.step, 1)

    def test_rejects_labels_beyond_embedding(self):
        with self.assertRaises(ContractViolation):
            train_denoiser(dense_model(num_labels=1), self.train, self.schedule, self.train_config, SeededRng(3))

    def test_sr_stage_trains(self):
        images = random_images(6, 8)
        with seeded_torch(SeededRng(0)):
            model = ConvDenoiser(3, num_labels=2, widths=(8, 16), cond_channels=3, aug_conditioning=True)
        config = SRTrainConfig(train=DiffusionTrainConfig(steps=2, batch_size=3), factor=2)
        _, history = train_sr_stage(model, images, self.schedule, config, SeededRng(4))
        self.assertEqual(len(history), 2)
        self.assertTrue(all(math.isfinite(loss) for _, loss in history))


class TestFinetune(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = GaussianWorldConfig(class_count=2, dimension=2, means=[[-0.5, 0.0], [0.5, 0.0]], std=0.2,
                                     train_per_class=40, val_per_class=20)
        cls.train, cls.val = make_gaussian_world(config, SeededRng(0))
        cls.schedule = build_schedule("cosine", 20)
        cls.extractor = IdentityFeatures(2)
        cls.config = FinetuneConfig(train=DiffusionTrainConfig(steps=6, batch_size=8, log_every=3),
                                    checkpoint_interval=2, selection_samples=20,
                                    sampler=SamplerConfig(kind="ddim", steps=5))
        cls.out_dir = tempfile.TemporaryDirectory()
        cls.best, cls.metrics = finetune(dense_model(), cls.train, cls.schedule, cls.config, SeededRng(1), cls.val,
                                         cls.extractor, cls.out_dir.name)

    @classmethod
    def tearDownClass(cls):
        cls.out_dir.cleanup()

    def test_checkpoint_steps(self):
        self.assertEqual([row["step"] for row in self.metrics], [2, 4, 6])

    def test_best_is_argmin(self):
        """Test the returned model is the checkpoint with the lowest selection FID"""
        chosen = min(self.metrics, key=lambda row: row["fid"])
        selection = JSONFileHandler(Path(self.out_dir.name) / "selection.json").read()
        self.assertEqual(selection["chosen_step"], chosen["step"])
        saved, _, manifest = load_denoiser(Path(self.out_dir.name) / f"ckpt_{chosen['step']}")
        self.assertEqual(manifest["step"], chosen["step"])
        for (name, a), (_, b) in zip(saved.state_dict().items(), self.best.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_best_fid_is_running_minimum(self):
        running = float('inf')
        for row in self.metrics:
            running = min(running, row["fid"])
            self.assertEqual(row["best_fid"], running)

    def test_selection_records_sample_count(self):
        """Test each checkpoint row carries the number of samples its FID was computed on"""
        self.assertEqual([row["sample_count"] for row in self.metrics], [20, 20, 20])
        reference = fit_stats(self.extractor.features(self.val.samples))
        _, drawn = selection_fid(dense_model(num_labels=3), self.schedule, self.config.sampler, 3, 10, (2,),
                                 self.extractor, reference, SeededRng(6))
        self.assertEqual(drawn, 12)

    def test_too_few_selection_samples(self):
        config = FinetuneConfig(train=DiffusionTrainConfig(steps=2), checkpoint_interval=2, selection_samples=2)
        with self.assertRaises(ContractViolation):
            finetune(dense_model(), self.train, self.schedule, config, SeededRng(1), self.val, self.extractor)

    def test_compare_with_scratch(self):
        result = compare_finetune_vs_scratch(dense_model(), self.train, self.schedule, self.config, SeededRng(2),
                                             self.val, self.extractor)
        self.assertEqual(len(result["finetuned_checkpoints"]), 3)
        self.assertEqual(len(result["scratch_checkpoints"]), 3)
        self.assertGreaterEqual(result["scratch_fid"], 0.0)


if __name__ == '__main__':
    unittest.main()
