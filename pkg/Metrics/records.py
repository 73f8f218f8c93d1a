from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class MetricRecord(BaseModel):
    """One evaluated metric, serialised as a JSON row."""
    model_config = ConfigDict(extra='forbid')

    metric: str
    value: float
    std: Optional[float] = None
    sample_count: int = Field(ge=0)
    config_hash: str
    reference_split: str
