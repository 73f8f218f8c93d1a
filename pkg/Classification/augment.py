import torch
from torch.nn import functional as F

from Classification.recipes import Preprocessing, TrainRecipe
from Datasets.transforms import bilinear_resize, resize_center_crop


def random_flip(images: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
    """Mirror each image horizontally with probability 1/2."""
    flip = torch.rand(images.shape[0], generator=generator) < 0.5
    return torch.where(flip[:, None, None, None], images.flip(-1), images)


def random_crop(images: torch.Tensor, size: int, padding: int, generator: torch.Generator) -> torch.Tensor:
    """Zero-pad by padding pixels and take one random size x size window per image."""
    padded = F.pad(images, (padding, padding, padding, padding))
    limit = padded.shape[-1] - size + 1
    offsets = torch.randint(0, limit, (images.shape[0], 2), generator=generator)
    return torch.stack([
        padded[i, :, top:top + size, left:left + size]
        for i, (top, left) in enumerate(offsets.tolist())
    ])


def training_view(images: torch.Tensor, recipe: TrainRecipe, preprocessing: Preprocessing,
                  generator: torch.Generator) -> torch.Tensor:
    """
    Training-time input pipeline for an image batch.

    center: resize and take the single center crop used at evaluation.
    random: resize, then pad-and-crop at the evaluation crop size.
    """
    if images.ndim != 4 or preprocessing.resize_to is None:
        return images
    crop_to = preprocessing.crop_to or preprocessing.resize_to
    if recipe.crop == "center":
        images = resize_center_crop(images, preprocessing.resize_to, crop_to)
    else:
        padding = recipe.padding + (preprocessing.resize_to - crop_to) // 2
        images = random_crop(bilinear_resize(images, preprocessing.resize_to), crop_to, padding, generator)
    if recipe.flip:
        images = random_flip(images, generator)
    return images
