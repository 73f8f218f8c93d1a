from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import torch

from errors import ContractViolation
from FileHandler.hashing import row_hashes

Provenance = Literal["real", "generated", "mixed"]
SampleKind = Literal["vector", "image"]

PROVENANCES = ("real", "generated", "mixed")
PIXEL_LEVELS = 255


def quantize_pixels(images: torch.Tensor) -> torch.Tensor:
    """Map images in [-1, 1] to 8-bit codes."""
    return torch.round((images.clamp(-1.0, 1.0) + 1.0) * (PIXEL_LEVELS / 2.0)).to(torch.uint8)


def dequantize_pixels(codes: torch.Tensor) -> torch.Tensor:
    """Map 8-bit codes back to float32 pixels in [-1, 1]."""
    return codes.to(torch.float32) / (PIXEL_LEVELS / 2.0) - 1.0


def snap_to_pixel_grid(images: torch.Tensor) -> torch.Tensor:
    """Quantize and dequantize so in-memory images equal what the disk format stores."""
    return dequantize_pixels(quantize_pixels(images))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Immutable labelled sample collection.

    Image samples are stored (N, channels, H, W) and always lie on the 8-bit
    pixel grid; vector samples are stored (N, d) in float32.

    Attributes:
        samples: Float32 sample tensor, item-major
        labels: Int64 class ids in [0, class_count)
        class_count: Number of classes C
        kind: "vector" or "image"
        split: Split tag such as "train" or "val"
        provenance: "real", "generated" or "mixed"
        seed: Master seed the data was produced from, if any
        config_hash: Hash of the configuration that produced the data
        class_names: Optional human readable label per class id
        metadata: Free-form JSON-serialisable extras
    """
    samples: torch.Tensor
    labels: torch.Tensor
    class_count: int
    kind: SampleKind
    split: str = "train"
    provenance: Provenance = "real"
    seed: Optional[int] = None
    config_hash: str = ""
    class_names: Tuple[str, ...] = ()
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.class_count < 1:
            raise ContractViolation(f"class_count must be >= 1, got {self.class_count}")
        if self.provenance not in PROVENANCES:
            raise ContractViolation(f"unknown provenance {self.provenance!r}")
        if self.labels.ndim != 1 or self.labels.shape[0] != self.samples.shape[0]:
            raise ContractViolation(
                f"labels shape {tuple(self.labels.shape)} does not match {self.samples.shape[0]} samples")
        if self.labels.dtype != torch.int64:
            raise ContractViolation(f"labels must be int64, got {self.labels.dtype}")
        if self.samples.dtype != torch.float32:
            raise ContractViolation(f"samples must be float32, got {self.samples.dtype}")
        if len(self.labels) and (int(self.labels.min()) < 0 or int(self.labels.max()) >= self.class_count):
            raise ContractViolation(f"labels must lie in [0, {self.class_count})")
        if self.class_names and len(self.class_names) != self.class_count:
            raise ContractViolation("class_names must have one entry per class")
        if self.kind == "image":
            if self.samples.ndim != 4:
                raise ContractViolation(f"image samples must be (N, C, H, W), got {tuple(self.samples.shape)}")
            if len(self.samples) and (float(self.samples.min()) < -1.0 or float(self.samples.max()) > 1.0):
                raise ContractViolation("image samples must lie in [-1, 1]")
        elif self.kind == "vector":
            if self.samples.ndim != 2:
                raise ContractViolation(f"vector samples must be (N, d), got {tuple(self.samples.shape)}")
        else:
            raise ContractViolation(f"unknown sample kind {self.kind!r}")
        if not torch.isfinite(self.samples).all():
            raise ContractViolation("samples contain non-finite values")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return tuple(self.samples.shape[1:])

    @property
    def per_class_counts(self) -> List[int]:
        return torch.bincount(self.labels, minlength=self.class_count).tolist()

    def is_balanced(self) -> bool:
        return len(set(self.per_class_counts)) <= 1

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        index = torch.as_tensor(indices, dtype=torch.int64)
        return replace(self, samples=self.samples[index], labels=self.labels[index])

    def class_indices(self, class_id: int) -> torch.Tensor:
        return torch.nonzero(self.labels == class_id, as_tuple=False).flatten()

    def with_provenance(self, provenance: Provenance) -> "LabeledDataset":
        return replace(self, provenance=provenance)

    def sample_hashes(self) -> List[str]:
        return row_hashes(self.samples)

    def equals(self, other: "LabeledDataset") -> bool:
        """Bitwise equality of data plus equality of all descriptive fields."""
        return (
            self.class_count == other.class_count
            and self.kind == other.kind
            and self.split == other.split
            and self.provenance == other.provenance
            and self.seed == other.seed
            and self.config_hash == other.config_hash
            and tuple(self.class_names) == tuple(other.class_names)
            and self.samples.shape == other.samples.shape
            and torch.equal(self.samples, other.samples)
            and torch.equal(self.labels, other.labels)
        )
