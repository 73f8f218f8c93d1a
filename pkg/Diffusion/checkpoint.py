from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from Diffusion.models import DenoiserModel, build_denoiser
from Diffusion.schedule import NoiseSchedule
from FileHandler.checkpoint import load_state, save_state


def save_denoiser(model: DenoiserModel, schedule: NoiseSchedule, path: Union[str, Path], step: int,
                  seed: Optional[int] = None, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Persist a denoiser together with its schedule and training position."""
    manifest = {
        "architecture": model.architecture(),
        "schedule": schedule.to_dict(),
        "step": step,
        "seed": seed,
        **(extra or {}),
    }
    return save_state(model, path, manifest)


def load_denoiser(path: Union[str, Path]) -> Tuple[DenoiserModel, NoiseSchedule, Dict[str, Any]]:
    manifest, state = load_state(path)
    model = build_denoiser(manifest["architecture"])
    model.load_state_dict(state, strict=True)
    model.eval()
    return model, NoiseSchedule.from_dict(manifest["schedule"]), manifest
