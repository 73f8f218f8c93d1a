from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from Classification.models import ClassifierModel, build_classifier
from FileHandler.checkpoint import load_state, save_state


def save_classifier(model: ClassifierModel, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
    """Persist a classifier, BatchNorm running statistics included."""
    return save_state(model, path, {"architecture": model.architecture(), **(extra or {})})


def load_classifier(path: Union[str, Path]) -> Tuple[ClassifierModel, Dict[str, Any]]:
    manifest, state = load_state(path)
    model = build_classifier(manifest["architecture"])
    model.load_state_dict(state, strict=True)
    return model.eval(), manifest
