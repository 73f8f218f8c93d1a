from pathlib import Path
from typing import Any, Dict, Tuple, Union

import numpy as np
import torch

from FileHandler.json import JSONFileHandler, write_atomic
from errors import DatasetError

CHECKPOINT_SCHEMA = 1
MANIFEST_NAME = "manifest.json"
PARAMS_NAME = "params.bin"

_DTYPES = {
    "float32": ("<f4", torch.float32),
    "int64": ("<i8", torch.int64),
}


def _dtype_name(tensor: torch.Tensor) -> str:
    return "int64" if tensor.dtype == torch.int64 else "float32"


def save_state(module: torch.nn.Module, path: Union[str, Path], manifest: Dict[str, Any]) -> Path:
    """
    Write a module's state dict as a flat little-endian blob plus a JSON manifest.

    Floating tensors are stored as 32-bit floats and integer buffers as 64-bit
    integers, in state_dict order; the manifest lists every entry's name,
    shape and dtype in that order.

    Args:
        module: Module to persist
        path: Checkpoint directory
        manifest: Extra manifest fields (architecture, step, seed, ...)

    Returns:
        The checkpoint directory
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    for name, tensor in module.state_dict().items():
        dtype_name = _dtype_name(tensor)
        layout, _ = _DTYPES[dtype_name]
        array = tensor.detach().cpu().contiguous().numpy().astype(layout)
        entries.append({"name": name, "shape": list(tensor.shape), "dtype": dtype_name})
        chunks.append(array.tobytes())
    write_atomic(path / PARAMS_NAME, b"".join(chunks))
    JSONFileHandler(path / MANIFEST_NAME).write({**manifest, "schema_version": CHECKPOINT_SCHEMA, "parameters": entries})
    return path


def load_state(path: Union[str, Path]) -> Tuple[Dict[str, Any], Dict[str, torch.Tensor]]:
    """
    Read a checkpoint written by save_state.

    Returns:
        (manifest, state dict)

    Raises:
        DatasetError: If the blob length does not match the manifest
    """
    path = Path(path)
    manifest = JSONFileHandler(path / MANIFEST_NAME).read()
    blob = (path / PARAMS_NAME).read_bytes()
    state = {}
    offset = 0
    for entry in manifest["parameters"]:
        layout, dtype = _DTYPES[entry["dtype"]]
        count = int(np.prod(entry["shape"], dtype=np.int64))
        size = count * np.dtype(layout).itemsize
        if offset + size > len(blob):
            raise DatasetError(f"checkpoint {path} truncated: expected at least {offset + size} bytes, found {len(blob)}")
        array = np.frombuffer(blob, dtype=layout, count=count, offset=offset).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(array.copy()).to(dtype)
        offset += size
    if offset != len(blob):
        raise DatasetError(f"checkpoint {path} has {len(blob)} bytes, expected {offset}")
    return manifest, state
