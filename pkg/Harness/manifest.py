import platform
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import BaseModel, ConfigDict, Field

from FileHandler.json import JSONFileHandler

CODE_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"
TIMING_NAME = "timing.json"


class RunManifest(BaseModel):
    """
    Provenance of one run. Identical runs write identical manifests.

    Attributes:
        config_hash: Digest of every parameter that affects outputs
        seed: Master seed
        code_version: Package version that produced the run
        input_hashes: Digests of datasets and models consumed
        artifacts: Paths written, relative to the run directory
        metrics: Metric outcomes
    """
    model_config = ConfigDict(extra='forbid')

    command: str
    config_hash: str
    seed: int
    code_version: str = CODE_VERSION
    input_hashes: Dict[str, str] = Field(default_factory=dict)
    artifacts: List[str] = Field(default_factory=list)
    metrics: List[Dict[str, Any]] = Field(default_factory=list)

    def write(self, path: Union[str, Path]) -> Path:
        JSONFileHandler(path).write(self.model_dump(mode='json'))
        return Path(path)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.model_validate(JSONFileHandler(path).read())


class RunTiming(BaseModel):
    """Facts about one execution of a run; kept out of the manifest."""
    model_config = ConfigDict(extra='forbid')

    command: str
    wall_clock_seconds: float = Field(ge=0)
    python_version: str = Field(default_factory=platform.python_version)

    def write(self, path: Union[str, Path]) -> Path:
        JSONFileHandler(path).write(self.model_dump(mode='json'))
        return Path(path)

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunTiming":
        return cls.model_validate(JSONFileHandler(path).read())
