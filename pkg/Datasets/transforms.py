import torch
import torch.nn.functional as F

from errors import ContractViolation


def _as_batch(image: torch.Tensor):
    if image.ndim == 3:
        return image[None], True
    if image.ndim == 4:
        return image, False
    raise ContractViolation(f"expected (C, H, W) or (N, C, H, W) images, got shape {tuple(image.shape)}")


def bilinear_resize(image: torch.Tensor, size: int) -> torch.Tensor:
    """
    Bilinear resize of square images with half-pixel centers.

    Resizing to the current size returns the input unchanged.
    """
    batch, squeeze = _as_batch(image)
    if batch.shape[-1] != batch.shape[-2]:
        raise ContractViolation(f"images must be square, got {tuple(batch.shape[-2:])}")
    if size < 1:
        raise ContractViolation(f"size must be positive, got {size}")
    if batch.shape[-1] != size:
        batch = F.interpolate(batch, size=(size, size), mode='bilinear', align_corners=False, antialias=False)
    return batch[0] if squeeze else batch


def resize_center_crop(image: torch.Tensor, resize_to: int, crop_to: int) -> torch.Tensor:
    """
    Resize a square image to resize_to and take the centered crop_to window.

    Args:
        image: (C, H, W) or (N, C, H, W) square images
        resize_to: Side length after resizing
        crop_to: Side length of the centered crop

    Returns:
        Images of side crop_to

    Raises:
        ContractViolation: If crop_to > resize_to or the image is not square
    """
    if crop_to > resize_to:
        raise ContractViolation(f"crop_to ({crop_to}) must not exceed resize_to ({resize_to})")
    if crop_to < 1:
        raise ContractViolation(f"crop_to must be positive, got {crop_to}")
    resized = bilinear_resize(image, resize_to)
    top = (resize_to - crop_to) // 2
    return resized[..., top:top + crop_to, top:top + crop_to]


def box_downsample(image: torch.Tensor, factor: int) -> torch.Tensor:
    """Average non-overlapping factor x factor blocks."""
    batch, squeeze = _as_batch(image)
    if factor < 1 or batch.shape[-1] % factor:
        raise ContractViolation(f"cannot downsample side {batch.shape[-1]} by {factor}")
    out = F.avg_pool2d(batch, kernel_size=factor) if factor > 1 else batch
    return out[0] if squeeze else out
