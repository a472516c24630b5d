#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import io

import numpy as np
from PIL import Image

from ..Macro.CimMacro import CimMacro

# Ternary weight colours: -1, 0, +1.
_WEIGHT_PALETTE = {-1: (220, 60, 50), 0: (0, 0, 0), 1: (60, 200, 90)}


def _scale_image(image: Image.Image, scale: int) -> Image.Image:
    if scale < 1:
        raise ValueError("Scale must be a positive integer.")
    if scale == 1:
        return image
    return image.resize((image.width * scale, image.height * scale), Image.NEAREST)


def feature_map_image(bits, scale: int = 1, foreground: str = 'white', background: str = 'black') -> Image.Image:
    """
    Renders a binary feature map with time running left to right and one
    pixel row per channel.

    :param numpy.ndarray bits: `[rows x channels]` activation bits.
    :param int scale: Integer magnification.
    :param str foreground: Colour of set bits, compatible with `PIL.Image.new()`.
    :param str background: Colour of clear bits.

    :rtype: PIL.Image
    :return: Created PIL image
    """
    bits = np.asarray(bits, dtype=np.uint8)
    mask = Image.fromarray(np.ascontiguousarray(bits.T * 255, dtype=np.uint8))

    image = Image.new("RGB", mask.size, background)
    image.paste(Image.new("RGB", mask.size, foreground), (0, 0), mask)
    return _scale_image(image, scale)


def weight_image(weights, scale: int = 1) -> Image.Image:
    """
    Renders a ternary weight matrix, wordlines top to bottom and columns left
    to right.

    :param numpy.ndarray weights: 2-D ternary matrix.
    :param int scale: Integer magnification.

    :rtype: PIL.Image
    :return: Created PIL image
    """
    weights = np.asarray(weights)
    pixels = np.zeros(weights.shape + (3,), dtype=np.uint8)
    for value, colour in _WEIGHT_PALETTE.items():
        pixels[weights == value] = colour
    return _scale_image(Image.fromarray(pixels), scale)


def macro_image(macro: CimMacro, scale: int = 1) -> Image.Image:
    """
    Renders the weights currently programmed into a macro.
    """
    return weight_image(macro.weights, scale)


def to_png(image: Image.Image) -> bytes:
    with io.BytesIO() as compressed_image:
        image.save(compressed_image, "PNG")
        return compressed_image.getvalue()
