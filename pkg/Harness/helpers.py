import csv
import io
import itertools
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import torch

from Diffusion.config import SamplerConfig
from FileHandler.hashing import stable_hash, tensor_hash
from FileHandler.json import write_atomic

CELL_PARAMETERS = ("guidance_weight", "log_variance", "aug_level", "steps")


class GridExpander:
    @staticmethod
    def expand(grid) -> List[Dict[str, Any]]:
        """
        Cells of a sweep grid in a fixed order.

        Returns:
            One dictionary per cell with cell_index and the four sampling parameters
        """
        product = itertools.product(grid.guidance_weights, grid.log_variances, grid.aug_levels, grid.steps)
        return [
            {"cell_index": index, **dict(zip(CELL_PARAMETERS, values))}
            for index, values in enumerate(product)
        ]

    @staticmethod
    def sampler_for(cell: Dict[str, Any], kind: str, base: SamplerConfig) -> SamplerConfig:
        """Sampler config of one cell, inheriting clip settings from the base config."""
        return base.model_copy(update={
            "kind": kind,
            "guidance_weight": cell["guidance_weight"],
            "log_variance": cell["log_variance"],
            "aug_level": cell["aug_level"],
            "steps": cell["steps"],
        })


class SourceHasher:
    @staticmethod
    def model_hash(model) -> str:
        """Digest of a network's state, or of an oracle's defining tensors."""
        if isinstance(model, torch.nn.Module):
            return tensor_hash(model.state_dict().values())
        if hasattr(model, "means"):
            return tensor_hash([model.means, torch.tensor([model.std], dtype=torch.float64)])
        return stable_hash(type(model).__name__)


class TableWriter:
    @staticmethod
    def to_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> str:
        """CSV text with a header row; missing values are empty cells and floats use repr."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(column) is None else
                             repr(row[column]) if isinstance(row[column], float) else row[column]
                             for column in columns])
        return buffer.getvalue()

    @staticmethod
    def write_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], path: Union[str, Path]) -> Path:
        write_atomic(path, TableWriter.to_csv(rows, columns).encode('utf-8'))
        return Path(path)
