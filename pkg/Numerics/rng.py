import hashlib
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, Tuple, Union

import numpy as np
import torch

from errors import ContractViolation

StreamKey = Union[int, str]


def _key_to_int(key: StreamKey) -> int:
    if isinstance(key, bool):
        raise ContractViolation("stream keys must be integers or strings")
    if isinstance(key, int):
        if key < 0:
            raise ContractViolation(f"stream keys must be non-negative, got {key}")
        return key
    digest = hashlib.sha256(key.encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'little')


@dataclass(frozen=True)
class SeededRng:
    """
    Reproducible random stream identified by a master seed and a stream path.

    Equal (seed, stream) pairs always yield equal draw sequences; children
    created with spawn() are statistically independent of their parent and of
    each other.

    Attributes:
        seed: Non-negative 64-bit master seed
        stream: Path of stream keys leading to this stream
    """
    seed: int
    stream: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ContractViolation(f"seed must be a non-negative 64-bit integer, got {self.seed}")

    def spawn(self, *keys: StreamKey) -> "SeededRng":
        """Derive a child stream; string keys are hashed to stable integers."""
        return SeededRng(self.seed, self.stream + tuple(_key_to_int(key) for key in keys))

    @property
    def stream_id(self) -> int:
        """64-bit identifier of this stream."""
        words = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream).generate_state(2, np.uint32)
        return (int(words[0]) << 32) | int(words[1])

    def derived_seed(self) -> int:
        """Seed suitable for torch generators (63 bits)."""
        return self.stream_id & 0x7FFF_FFFF_FFFF_FFFF

    def generator(self) -> torch.Generator:
        """Fresh CPU generator positioned at the start of this stream."""
        generator = torch.Generator(device='cpu')
        generator.manual_seed(self.derived_seed())
        return generator

    def numpy(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream))


@contextmanager
def seeded_torch(rng: SeededRng) -> Iterator[None]:
    """
    Run a block with the global torch RNG seeded from a stream.

    Weight initialisation and dropout draw from the global generator; the
    previous global state is restored on exit.
    """
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(rng.derived_seed())
        yield
