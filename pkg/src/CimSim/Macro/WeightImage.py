#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
import struct

import numpy as np

from .CimMacro import MacroError, MacroMode, TERNARY_VALUES
from .MacroModes import macro_class


class WeightImageError(MacroError):
    """
    Exception thrown when a weight image file is malformed or does not match
    the geometry it claims.
    """

    pass


MAGIC = b"CIMW"
HEADER = struct.Struct("<4sB3xII")

_MODE_TAGS = {MacroMode.X: 0, MacroMode.Y: 1}


def encode_weight_image(weights: np.ndarray, mode: MacroMode) -> bytes:
    """
    Serializes a full macro weight matrix: a 16-byte header (magic, mode tag,
    wordline count, SA count) followed by the ternary weights as signed bytes,
    row-major.

    :param numpy.ndarray weights: `[WL_COUNT x SA_COUNT]` ternary matrix.
    :param MacroMode mode: Geometry mode the matrix belongs to.

    :rtype: bytes
    :return: Encoded image.
    """
    cls = macro_class(mode)
    weights = np.asarray(weights)
    if weights.shape != (cls.WL_COUNT, cls.SA_COUNT):
        raise WeightImageError("Weight matrix shape {} does not match {} mode.".format(weights.shape, mode.name))
    if not np.isin(weights, TERNARY_VALUES).all():
        raise WeightImageError("Weight matrix is not ternary.")

    header = HEADER.pack(MAGIC, _MODE_TAGS[mode], cls.WL_COUNT, cls.SA_COUNT)
    return header + weights.astype(np.int8).tobytes()


def decode_weight_image(data: bytes) -> tuple[MacroMode, np.ndarray]:
    """
    Parses an encoded weight image.

    :rtype: (MacroMode, numpy.ndarray)
    :return: Mode and `[WL_COUNT x SA_COUNT]` int8 weight matrix.
    """
    if len(data) < HEADER.size:
        raise WeightImageError("Weight image is shorter than its header.")

    magic, tag, n_wl, n_sa = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise WeightImageError("Bad weight image magic {!r}.".format(magic))

    modes = {v: k for k, v in _MODE_TAGS.items()}
    if tag not in modes:
        raise WeightImageError("Unknown weight image mode tag {}.".format(tag))
    mode = modes[tag]

    cls = macro_class(mode)
    if (n_wl, n_sa) != (cls.WL_COUNT, cls.SA_COUNT):
        raise WeightImageError("Image dimensions {}x{} do not match {} mode.".format(n_wl, n_sa, mode.name))
    if len(data) != HEADER.size + n_wl * n_sa:
        raise WeightImageError("Weight image payload is {} bytes, expected {}.".format(len(data) - HEADER.size, n_wl * n_sa))

    weights = np.frombuffer(data, dtype=np.int8, offset=HEADER.size).reshape(n_wl, n_sa).copy()
    if not np.isin(weights, TERNARY_VALUES).all():
        raise WeightImageError("Weight image holds non-ternary values.")
    return mode, weights


def save_weight_image(path: str, weights: np.ndarray, mode: MacroMode) -> None:
    with open(path, "wb") as f:
        f.write(encode_weight_image(weights, mode))
    logging.info("Wrote %s mode weight image to %s", mode.name, path)


def load_weight_image(path: str) -> tuple[MacroMode, np.ndarray]:
    with open(path, "rb") as f:
        return decode_weight_image(f.read())
