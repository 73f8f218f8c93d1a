import hashlib
import json
from typing import Any, Iterable

import numpy as np
import torch
from pydantic import BaseModel

HASH_LENGTH = 16


def _canonical(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode='json')
    return value


def stable_hash(value: Any) -> str:
    """
    Short SHA-256 digest of the canonical JSON form of a value.

    Pydantic models are dumped in JSON mode first; keys are sorted so that
    field order never changes the digest.
    """
    text = json.dumps(_canonical(value), sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:HASH_LENGTH]


def tensor_hash(tensors: Iterable[torch.Tensor]) -> str:
    """Digest of the little-endian bytes of a sequence of tensors."""
    digest = hashlib.sha256()
    for tensor in tensors:
        array = tensor.detach().cpu().contiguous().numpy()
        digest.update(str(array.dtype).encode('utf-8'))
        digest.update(str(array.shape).encode('utf-8'))
        digest.update(array.astype(array.dtype.newbyteorder('<'), copy=False).tobytes())
    return digest.hexdigest()[:HASH_LENGTH]


def row_hashes(samples: torch.Tensor) -> list:
    """Full SHA-256 digest of every row of a batch, used for overlap checks."""
    array = np.ascontiguousarray(samples.detach().cpu().numpy().astype('<f4'))
    return [hashlib.sha256(row.tobytes()).hexdigest() for row in array.reshape(array.shape[0], -1)]
