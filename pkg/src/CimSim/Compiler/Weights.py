#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
import os

import numpy as np

from ..Macro.CimMacro import MacroError
from ..Macro.MacroModes import macro_class
from ..Macro.WeightImage import load_weight_image, save_weight_image
from .Lowering import plan_images
from .Model import ModelGraph, words_per_row
from .Schedule import ImagePlan

LayerWeights = dict[int, np.ndarray]


def weight_shape(model: ModelGraph, index: int) -> tuple[int, int, int]:
    layer = model.layers[index]
    return layer.out_channels, layer.in_channels, layer.kernel


def random_weights(model: ModelGraph, rng: np.random.Generator, zero_fraction: float = 1 / 3) -> LayerWeights:
    """
    Draws ternary weights for every conv layer, shaped
    `(out_channels, in_channels, kernel)`.

    :param float zero_fraction: Probability of a zero weight; +1 and -1 share the rest evenly.
    """
    weights = {}
    half = (1 - zero_fraction) / 2
    for index, _ in model.conv_layers():
        weights[index] = rng.choice(np.array([-1, 0, 1], dtype=np.int8), size=weight_shape(model, index),
                                    p=[half, zero_fraction, half])
    return weights


def zero_weights(model: ModelGraph) -> LayerWeights:
    return {index: np.zeros(weight_shape(model, index), dtype=np.int8) for index, _ in model.conv_layers()}


def check_weights(model: ModelGraph, weights: LayerWeights) -> None:
    for index, _ in model.conv_layers():
        if index not in weights:
            raise MacroError("No weights given for {}.".format(model.layers[index].name))
        array = np.asarray(weights[index])
        if array.shape != weight_shape(model, index):
            raise MacroError("{} weights have shape {}, expected {}.".format(model.layers[index].name, array.shape,
                                                                             weight_shape(model, index)))
        if not np.isin(array, (-1, 0, 1)).all():
            raise MacroError("{} weights are not ternary.".format(model.layers[index].name))


def image_matrix(model: ModelGraph, image: ImagePlan, weights: LayerWeights) -> np.ndarray:
    """
    Macro weight matrix after an image is written. Input channel `c` of
    kernel tap `j` sits on wordline `row_base + j * 32 * words_per_row + c`
    and output channel `o` on column `col0 + o`.

    :rtype: numpy.ndarray
    :return: int8 matrix `[WL_COUNT x SA_COUNT]`; columns outside the image are zero.
    """
    macro = macro_class(model.mode)
    matrix = np.zeros((macro.WL_COUNT, macro.SA_COUNT), dtype=np.int8)

    for placement in image.placements:
        layer = model.layers[placement.layer_index]
        k, c_in, c_out = layer.kernel, layer.in_channels, layer.out_channels
        span = words_per_row(c_in) * 32

        block = np.zeros((k, span, placement.footprint), dtype=np.int8)
        block[:, :c_in, :c_out] = np.asarray(weights[placement.layer_index], dtype=np.int8).transpose(2, 1, 0)
        matrix[placement.row_base:, placement.col0:placement.col0 + placement.footprint] = block.reshape(k * span, -1)

    return matrix


def weights_from_matrices(model: ModelGraph, images: list[ImagePlan], matrices: list[np.ndarray]) -> LayerWeights:
    """
    Recovers per-layer weights from macro weight matrices, one per image.
    """
    weights = {}
    for image, matrix in zip(images, matrices):
        for placement in image.placements:
            layer = model.layers[placement.layer_index]
            span = words_per_row(layer.in_channels) * 32
            block = matrix[placement.row_base:, placement.col0:placement.col0 + placement.footprint]
            block = block.reshape(layer.kernel, span, placement.footprint)
            weights[placement.layer_index] = np.ascontiguousarray(
                block[:, :layer.in_channels, :layer.out_channels].transpose(2, 1, 0))
    return weights


def pack_segments(matrix: np.ndarray, segments) -> np.ndarray:
    """
    Packs 32-row column segments of a weight matrix into the two-word
    ternary format, in segment order.

    :rtype: numpy.ndarray
    :return: uint32 vector of `2 * len(segments)` words.
    """
    if not len(segments):
        return np.zeros(0, dtype=np.uint32)

    columns = np.array([column for column, _ in segments])
    rows = np.array([row for _, row in segments])
    values = matrix[rows[:, None] + np.arange(32)[None, :], columns[:, None]]

    codes = np.where(values == 1, 1, np.where(values == -1, 2, 0)).astype(np.uint64)
    shifts = (2 * (np.arange(32) % 16)).astype(np.uint64)
    shifted = codes << shifts
    words = np.stack([shifted[:, :16].sum(axis=1), shifted[:, 16:].sum(axis=1)], axis=1)
    return words.reshape(-1).astype(np.uint32)


def pack_dram_images(model: ModelGraph, images, weights: LayerWeights) -> list[tuple[int, np.ndarray]]:
    """
    Builds the DRAM contents of every image's cim.write burst.

    :rtype: list((int, numpy.ndarray))
    :return: (DRAM word address, packed words) per image.
    """
    check_weights(model, weights)
    return [(image.dram_base, pack_segments(image_matrix(model, image, weights), image.segments)) for image in images]


def save_weight_images(directory: str, model: ModelGraph, weights: LayerWeights) -> list[str]:
    """
    Writes one weight image file per macro image, named `image<N>.cimw`.
    """
    check_weights(model, weights)
    os.makedirs(directory, exist_ok=True)

    paths = []
    images, _ = plan_images(model)
    for image in images:
        path = os.path.join(directory, "image{}.cimw".format(image.index))
        save_weight_image(path, image_matrix(model, image, weights), model.mode)
        paths.append(path)

    logging.info("Saved %s weight images to %s", len(paths), directory)
    return paths


def load_weight_images(directory: str, model: ModelGraph) -> LayerWeights:
    """
    Loads the weight image files written by :func:`save_weight_images`.
    """
    images, _ = plan_images(model)
    matrices = []
    for image in images:
        path = os.path.join(directory, "image{}.cimw".format(image.index))
        mode, matrix = load_weight_image(path)
        if mode != model.mode:
            raise MacroError("Weight image {} is {}-mode, model is {}-mode.".format(path, mode.value,
                                                                                   model.mode.value))
        matrices.append(matrix)

    weights = weights_from_matrices(model, images, matrices)
    check_weights(model, weights)
    return weights

