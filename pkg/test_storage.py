import tempfile
import unittest
from pathlib import Path

import torch

from Classification.recipes import TrainRecipe
from Database.sqlite import SQLiteConnection, SQLiteDatabase, SQLiteResultStore
from Diffusion.checkpoint import load_denoiser, save_denoiser
from Diffusion.models import ConvDenoiser, DenseDenoiser
from Diffusion.schedule import build_schedule
from FileHandler.checkpoint import PARAMS_NAME
from FileHandler.hashing import row_hashes, stable_hash, tensor_hash
from FileHandler.json import JSONFileHandler, JSONLinesFileHandler, write_atomic
from Numerics.rng import SeededRng, seeded_torch
from errors import DatasetError, StoreError


class TestResultStore(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "sweep" / "results.sqlite"

    def tearDown(self):
        self.directory.cleanup()

    def test_commit_and_read_back(self):
        store = SQLiteResultStore(self.path)
        store.commit(2, {"cell_index": 2, "fid_val": 0.125, "cas_top1": None})
        store.commit(0, {"cell_index": 0, "fid_val": 1.5, "cas_top1": None})
        self.assertEqual(store.committed_cells(), [0, 2])
        self.assertEqual([row["cell_index"] for row in store.rows()], [0, 2])
        self.assertIsNone(store.rows()[1]["cas_top1"])
        store.close()

    def test_commit_replaces_row(self):
        store = SQLiteResultStore(self.path)
        store.commit(1, {"cell_index": 1, "cas_top1": None})
        store.commit(1, {"cell_index": 1, "cas_top1": 0.75})
        self.assertEqual(store.rows(), [{"cell_index": 1, "cas_top1": 0.75}])
        store.close()

    def test_rows_survive_reopen(self):
        store = SQLiteResultStore(self.path)
        row = {"cell_index": 0, "fid_train": 0.1 + 0.2, "steps": 100}
        store.commit(0, row)
        store.close()
        reopened = SQLiteResultStore(self.path)
        self.assertEqual(reopened.rows(), [row])
        reopened.close()

    def test_unopenable_path(self):
        with self.assertRaises(StoreError):
            SQLiteResultStore(Path(self.directory.name))

    def test_generic_table_operations(self):
        database = SQLiteDatabase(SQLiteConnection(Path(self.directory.name) / "generic.sqlite"))
        database.ensure_table("runs", "id", {"id": "INTEGER", "name": "TEXT"})
        database.upsert("runs", "id", {"id": 1, "name": "first"})
        database.upsert("runs", "id", {"id": 2, "name": "second"})
        database.upsert("runs", "id", {"id": 1, "name": "renamed"})
        self.assertEqual(database.select("runs", ["name"], order_by="id"), [{"name": "renamed"}, {"name": "second"}])
        self.assertEqual([row["id"] for row in database.select("runs", order_by="id")], [1, 2])
        with self.assertRaises(StoreError):
            database.select("missing_table")
        database.close()


class TestFileHandlers(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self):
        self.directory.cleanup()

    def test_json_round_trip_is_canonical(self):
        first = JSONFileHandler(self.root / "a" / "first.json")
        second = JSONFileHandler(self.root / "second.json")
        first.write({"b": 1, "a": [1.5, None]})
        second.write({"a": [1.5, None], "b": 1})
        self.assertEqual(first.read(), {"a": [1.5, None], "b": 1})
        self.assertEqual(first.path.read_bytes(), second.path.read_bytes())

    def test_json_errors(self):
        with self.assertRaises(FileNotFoundError):
            JSONFileHandler(self.root / "missing.json").read()
        broken = self.root / "broken.json"
        broken.write_text("{", encoding='utf-8')
        with self.assertRaises(DatasetError):
            JSONFileHandler(broken).read()

    def test_atomic_write_leaves_no_temporaries(self):
        write_atomic(self.root / "blob.bin", b"abc")
        write_atomic(self.root / "blob.bin", b"de")
        self.assertEqual((self.root / "blob.bin").read_bytes(), b"de")
        self.assertEqual([path.name for path in self.root.iterdir()], ["blob.bin"])

    def test_json_lines(self):
        log = JSONLinesFileHandler(self.root / "logs" / "metrics.jsonl")
        self.assertEqual(log.read(), [])
        log.append({"metric": "fid", "value": 1.0})
        log.append({"metric": "is", "value": 2.0})
        self.assertEqual([record["metric"] for record in log.read()], ["fid", "is"])


class TestHashing(unittest.TestCase):
    def test_stable_hash_ignores_key_order(self):
        self.assertEqual(stable_hash({"a": 1, "b": [2, 3]}), stable_hash({"b": [2, 3], "a": 1}))
        self.assertNotEqual(stable_hash({"a": 1}), stable_hash({"a": 2}))

    def test_models_hash_like_their_dump(self):
        recipe = TrainRecipe(epochs=3, warmup_epochs=0)
        self.assertEqual(stable_hash(recipe), stable_hash(recipe.model_dump(mode='json')))

    def test_tensor_hash_sees_dtype(self):
        values = torch.arange(4)
        self.assertEqual(tensor_hash([values]), tensor_hash([values.clone()]))
        self.assertNotEqual(tensor_hash([values]), tensor_hash([values.to(torch.float32)]))

    def test_row_hashes(self):
        rows = torch.tensor([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0]])
        hashes = row_hashes(rows)
        self.assertEqual(hashes[0], hashes[2])
        self.assertNotEqual(hashes[0], hashes[1])


class TestDenoiserCheckpoint(unittest.TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "ckpt"

    def tearDown(self):
        self.directory.cleanup()

    def test_dense_round_trip(self):
        schedule = build_schedule("linear", 50)
        with seeded_torch(SeededRng(0)):
            model = DenseDenoiser(3, num_labels=4, width=16)
        save_denoiser(model, schedule, self.path, step=12, seed=5, extra={"fid": 0.5})
        restored, restored_schedule, manifest = load_denoiser(self.path)
        self.assertEqual((manifest["step"], manifest["seed"], manifest["fid"]), (12, 5, 0.5))
        self.assertTrue(torch.equal(restored_schedule.betas, schedule.betas))
        x = torch.randn(6, 3, generator=SeededRng(1).generator())
        t = torch.arange(1, 7)
        labels = torch.tensor([0, 1, 2, 3, 4, 0])
        with torch.no_grad():
            self.assertTrue(torch.equal(restored(x, t, labels), model(x, t, labels)))

    def test_conv_round_trip(self):
        schedule = build_schedule("cosine", 10)
        with seeded_torch(SeededRng(0)):
            model = ConvDenoiser(1, num_labels=2, widths=(8, 16), cond_channels=1, aug_conditioning=True)
        save_denoiser(model, schedule, self.path, step=0)
        restored, _, _ = load_denoiser(self.path)
        self.assertEqual(restored.architecture(), model.architecture())
        for (name, a), (_, b) in zip(restored.state_dict().items(), model.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_truncated_parameters(self):
        with seeded_torch(SeededRng(0)):
            model = DenseDenoiser(2, num_labels=2, width=8)
        save_denoiser(model, build_schedule("cosine", 5), self.path, step=1)
        blob = (self.path / PARAMS_NAME).read_bytes()
        (self.path / PARAMS_NAME).write_bytes(blob[:-4])
        with self.assertRaises(DatasetError):
            load_denoiser(self.path)


if __name__ == '__main__':
    unittest.main()
