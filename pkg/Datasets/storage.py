import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
import torch
from pydantic import BaseModel, ConfigDict, ValidationError

from Datasets.dataset import LabeledDataset, dequantize_pixels, quantize_pixels
from errors import ContractViolation, DatasetError
from FileHandler.json import JSONFileHandler, write_atomic

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_FILE = "manifest.json"
DATA_FILE = "data.bin"
LABELS_FILE = "labels.bin"


class DatasetManifest(BaseModel):
    """Descriptive half of the on-disk dataset format."""
    model_config = ConfigDict(extra='forbid')

    schema_version: int
    class_count: int
    kind: Literal["vector", "image"]
    shape: List[int]
    dtype: Literal["uint8", "float32"]
    layout: Literal["D", "CHW"]
    item_count: int
    per_class_counts: List[int]
    provenance: Literal["real", "generated", "mixed"]
    split: str
    seed: Optional[int]
    generator_config_hash: str
    class_names: List[str]
    metadata: Dict[str, Any]


def save_dataset(dataset: LabeledDataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset directory: manifest.json, data.bin and labels.bin.

    Images are stored as 8-bit codes, vectors as little-endian float32; labels
    as little-endian int32. Each file is replaced atomically.

    Args:
        dataset: Dataset to persist
        path: Target directory (created if needed)

    Returns:
        The dataset directory
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if dataset.kind == "image":
        payload = quantize_pixels(dataset.samples).numpy().tobytes()
        dtype, layout = "uint8", "CHW"
    else:
        payload = dataset.samples.numpy().astype('<f4').tobytes()
        dtype, layout = "float32", "D"

    write_atomic(path / DATA_FILE, payload)
    write_atomic(path / LABELS_FILE, dataset.labels.numpy().astype('<i4').tobytes())
    manifest = DatasetManifest(
        schema_version=SCHEMA_VERSION,
        class_count=dataset.class_count,
        kind=dataset.kind,
        shape=list(dataset.sample_shape),
        dtype=dtype,
        layout=layout,
        item_count=len(dataset),
        per_class_counts=dataset.per_class_counts,
        provenance=dataset.provenance,
        split=dataset.split,
        seed=dataset.seed,
        generator_config_hash=dataset.config_hash,
        class_names=list(dataset.class_names),
        metadata=dict(dataset.metadata),
    )
    JSONFileHandler(path / MANIFEST_FILE).write(manifest.model_dump(mode='json'))
    logger.info("Successfully saved %s dataset (%d items) to %s", dataset.provenance, len(dataset), path)
    return path


def _read_exact(path: Path, expected: int) -> bytes:
    if not path.exists():
        raise DatasetError(f"missing file {path}")
    payload = path.read_bytes()
    if len(payload) != expected:
        raise DatasetError(f"{path.name}: expected {expected} bytes, found {len(payload)}")
    return payload


def load_dataset(path: Union[str, Path]) -> LabeledDataset:
    """
    Read a dataset directory written by save_dataset.

    Raises:
        DatasetError: If the manifest is missing or corrupt, a file length does
            not match the manifest, or the stored labels disagree with the
            manifest's per-class counts
    """
    path = Path(path)
    try:
        raw = JSONFileHandler(path / MANIFEST_FILE).read()
        manifest = DatasetManifest.model_validate(raw)
    except FileNotFoundError as e:
        raise DatasetError(f"no dataset manifest in {path}") from e
    except ValidationError as e:
        raise DatasetError(f"corrupt manifest in {path}: {e}") from e
    if manifest.schema_version != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema version {manifest.schema_version}")

    values_per_item = math.prod(manifest.shape)
    itemsize = 1 if manifest.dtype == "uint8" else 4
    data = _read_exact(path / DATA_FILE, manifest.item_count * values_per_item * itemsize)
    label_bytes = _read_exact(path / LABELS_FILE, manifest.item_count * 4)

    shape = (manifest.item_count, *manifest.shape)
    if manifest.dtype == "uint8":
        codes = torch.from_numpy(np.frombuffer(data, dtype=np.uint8).copy()).reshape(shape)
        samples = dequantize_pixels(codes)
    else:
        samples = torch.from_numpy(np.frombuffer(data, dtype='<f4').astype(np.float32)).reshape(shape)
    labels = torch.from_numpy(np.frombuffer(label_bytes, dtype='<i4').astype(np.int64))

    try:
        dataset = LabeledDataset(
            samples=samples,
            labels=labels,
            class_count=manifest.class_count,
            kind=manifest.kind,
            split=manifest.split,
            provenance=manifest.provenance,
            seed=manifest.seed,
            config_hash=manifest.generator_config_hash,
            class_names=tuple(manifest.class_names),
            metadata=manifest.metadata,
        )
    except ContractViolation as e:
        raise DatasetError(f"invalid dataset in {path}: {e}") from e
    if dataset.per_class_counts != manifest.per_class_counts:
        raise DatasetError(
            f"manifest per-class counts {manifest.per_class_counts} disagree with labels {dataset.per_class_counts}")
    return dataset
