#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#
#   Pure-software binary CNN, independent of the ISA and the macro model.
#

import numpy as np

from ..Compiler.Model import LayerKind, ModelError, ModelGraph
from ..Compiler.Weights import LayerWeights, check_weights
from ..Config import KwsConfig
from .Postprocess import gap_golden, predict_class
from .Preprocess import preprocess_golden


def conv1d_golden(bits: np.ndarray, weights: np.ndarray, stride: int = 1, threshold: int = 0) -> np.ndarray:
    """
    Unpadded ternary 1-D convolution followed by a strict threshold.

    :param numpy.ndarray bits: `[length x in_channels]` activation bits.
    :param numpy.ndarray weights: `(out_channels, in_channels, kernel)` ternary weights.

    :rtype: numpy.ndarray
    :return: uint8 matrix `[out_length x out_channels]`.
    """
    kernel = weights.shape[2]
    windows = np.lib.stride_tricks.sliding_window_view(bits.astype(np.int32), kernel, axis=0)[::stride]
    sums = np.einsum("tcj,ocj->to", windows, weights.astype(np.int32))
    return (sums > threshold).astype(np.uint8)


def maxpool_golden(bits: np.ndarray, width: int) -> np.ndarray:
    rows = bits.shape[0] // width
    return bits[:rows * width].reshape(rows, width, -1).max(axis=1)


def golden_network(model: ModelGraph, weights: LayerWeights, bits) -> np.ndarray:
    """
    Runs every conv and max-pool layer of a model in software.

    :param numpy.ndarray bits: `[input_length x input_channels]` input activation bits.

    :rtype: numpy.ndarray
    :return: Final feature map bits, before global average pooling.
    """
    check_weights(model, weights)
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (model.input_length, model.input_channels):
        raise ModelError("Input shape {} does not match model input {}x{}.".format(
            bits.shape, model.input_length, model.input_channels))

    for index, layer in enumerate(model.layers):
        if layer.kind == LayerKind.CONV1D:
            bits = conv1d_golden(bits, np.asarray(weights[index]), layer.stride)
        elif layer.kind == LayerKind.MAXPOOL:
            bits = maxpool_golden(bits, layer.pool_width)
    return bits


def golden_kws(model: ModelGraph, weights: LayerWeights, samples, params: KwsConfig) -> tuple[np.ndarray, int]:
    """
    Software keyword spotting: front end, network and global average
    pooling.

    :rtype: (numpy.ndarray, int)
    :return: Class scores and the predicted class.
    """
    features = preprocess_golden(samples, params)
    scores = gap_golden(golden_network(model, weights, features), model.n_classes)
    return scores, predict_class(scores)
