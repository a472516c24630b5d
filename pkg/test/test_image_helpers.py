#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../src'))

from CimSim.ImageHelpers import PILHelper
from CimSim.Macro.CimMacroY import CimMacroY


def test_feature_map_image():
    bits = np.zeros((10, 4), dtype=np.uint8)
    bits[2, 1] = 1

    image = PILHelper.feature_map_image(bits, scale=3)
    assert image.size == (30, 12)
    assert image.getpixel((2 * 3, 1 * 3)) == (255, 255, 255)
    assert image.getpixel((0, 0)) == (0, 0, 0)


def test_weight_image_palette():
    image = PILHelper.weight_image(np.array([[-1, 0, 1]]))
    assert image.size == (3, 1)
    assert image.getpixel((0, 0)) == (220, 60, 50)
    assert image.getpixel((1, 0)) == (0, 0, 0)
    assert image.getpixel((2, 0)) == (60, 200, 90)


def test_macro_image_and_png():
    macro = CimMacroY()
    macro.write_weights(0, 0, [1] * 32)
    image = PILHelper.macro_image(macro)
    assert image.size == (CimMacroY.SA_COUNT, CimMacroY.WL_COUNT)

    assert PILHelper.to_png(image).startswith(b"\x89PNG")


def test_bad_scale():
    with pytest.raises(ValueError):
        PILHelper.feature_map_image(np.zeros((2, 2)), scale=0)
