from .image import (
    ImageProcessor, read_image, write_image, read_mask, write_mask, split,
    to_tensor, mask_to_tensor, from_tensor,
)
from .inpaint import InpaintTrace, inpaint_fast_marching
from .compositing import composite, feather_mask, make_strip

__all__ = [
    "ImageProcessor", "read_image", "write_image", "read_mask", "write_mask", "split",
    "to_tensor", "mask_to_tensor", "from_tensor",
    "InpaintTrace", "inpaint_fast_marching",
    "composite", "feather_mask", "make_strip",
]
