#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import hashlib
from abc import ABC, abstractmethod
from enum import Enum
from typing import Iterable

import numpy as np


class MacroError(Exception):
    """
    Base exception for CIM macro failures.
    """

    pass


class MacroBoundsError(MacroError):
    """
    Exception thrown when a wordline, column or segment address falls outside
    the macro geometry of the active mode.
    """

    pass


class TernaryCodeError(MacroError):
    """
    Exception thrown when packed weight data holds the invalid 2-bit code
    0b11. The index of the offending 32-bit word is kept in `word_index`.
    """

    def __init__(self, word_index: int, word: int):
        super().__init__("Invalid ternary code 0b11 in packed weight word {} (0x{:08X}).".format(word_index, word))
        self.word_index = word_index
        self.word = word


class MacroMode(Enum):
    """
    Macro geometry mode.
    """

    X = "x"
    Y = "y"


TERNARY_VALUES = (-1, 0, 1)

_CODE_OF = {0: 0b00, 1: 0b01, -1: 0b10}
_VALUE_OF = {0b00: 0, 0b01: 1, 0b10: -1}


def symmetric_map(weight: int) -> tuple[int, int]:
    """
    Maps a ternary weight onto its differential cell pair.

    :param int weight: Ternary weight, one of -1, 0 or +1.

    :rtype: (int, int)
    :return: Cell pair (c_plus, c_minus).
    """
    if weight not in TERNARY_VALUES:
        raise MacroError("Weight {} is not ternary.".format(weight))
    return (1 if weight == 1 else 0, 1 if weight == -1 else 0)


def symmetric_unmap(cells: tuple[int, int]) -> int:
    """
    Recovers a ternary weight from its differential cell pair.
    """
    c_plus, c_minus = cells
    if c_plus and c_minus:
        raise MacroError("Cell pair (1, 1) does not encode a ternary weight.")
    return c_plus - c_minus


def pack_ternary(values: Iterable[int]) -> tuple[int, int]:
    """
    Packs 32 ternary weights into two 32-bit words, 2 bits per weight, first
    weight in the low bits of the first word. Codes: 00 = 0, 01 = +1, 10 = -1.

    :param values: 32 ternary weights.

    :rtype: (int, int)
    :return: The two packed words.
    """
    values = list(values)
    if len(values) != 32:
        raise MacroError("Packing needs exactly 32 weights, got {}.".format(len(values)))

    words = [0, 0]
    for i, value in enumerate(values):
        value = int(value)
        if value not in _CODE_OF:
            raise MacroError("Weight {} is not ternary.".format(value))
        words[i // 16] |= _CODE_OF[value] << (2 * (i % 16))
    return words[0], words[1]


def unpack_ternary(words: Iterable[int], first_index: int = 0) -> np.ndarray:
    """
    Unpacks two 32-bit words into 32 ternary weights.

    :param words: The two packed words.
    :param int first_index: Word index reported if the first word is invalid.

    :rtype: numpy.ndarray
    :return: int8 vector of 32 weights.
    """
    values = np.zeros(32, dtype=np.int8)
    for w, word in enumerate(words):
        word = int(word) & 0xFFFFFFFF
        for i in range(16):
            code = (word >> (2 * i)) & 0b11
            if code == 0b11:
                raise TernaryCodeError(first_index + w, word)
            values[16 * w + i] = _VALUE_OF[code]
    return values


class CimMacro(ABC):
    """
    Represents a binary/ternary SRAM compute-in-memory macro. Subclasses fix
    the geometry of one operating mode.

    Weights are stored as an `[WL_COUNT x SA_COUNT]` ternary matrix; every SA
    column is backed by a differential bitline pair, so the physical cell
    image is `[WL_COUNT x BL_COUNT]`.
    """

    WL_COUNT = 0
    BL_COUNT = 0
    SA_COUNT = 0
    MODE: MacroMode | None = None

    SHIFT_BITS = 32
    SEGMENT_ROWS = 32

    def __init__(self):
        if not self.WL_COUNT:
            raise MacroError("{} has no geometry; use a mode subclass.".format(type(self).__name__))

        self.weights: np.ndarray = np.zeros((self.WL_COUNT, self.SA_COUNT), dtype=np.int8)
        self.buffer: np.ndarray = np.zeros(self.WL_COUNT, dtype=np.uint8)
        self.sa_thresholds: np.ndarray = np.zeros(self.SA_COUNT, dtype=np.int32)
        self._weights_f32: np.ndarray | None = None

    @abstractmethod
    def _bitline_pair(self, column: int) -> tuple[int, int]:
        """
        Maps an SA column onto the (plus, minus) bitlines that store it.
        """
        pass

    @classmethod
    def output_words(cls) -> int:
        return cls.SA_COUNT // 32

    @classmethod
    def segments_per_column(cls) -> int:
        return cls.WL_COUNT // cls.SEGMENT_ROWS

    @classmethod
    def segment_count(cls) -> int:
        return cls.segments_per_column() * cls.SA_COUNT

    @classmethod
    def peak_ops_per_cycle(cls) -> int:
        """
        Peak operations per cycle, counting every MAC as two operations.

        :rtype: int
        :return: 2 x wordlines x sense amplifiers.
        """
        return 2 * cls.WL_COUNT * cls.SA_COUNT

    @classmethod
    def peak_tops(cls, clock_mhz: float) -> float:
        """
        Peak throughput, in tera-operations per second, at the given clock.
        """
        return cls.peak_ops_per_cycle() * clock_mhz * 1e6 / 1e12

    def mode(self) -> MacroMode:
        return self.MODE

    def reset(self) -> None:
        """
        Clears weights, input buffer and SA thresholds back to zero.
        """
        self.weights[:] = 0
        self.buffer[:] = 0
        self.sa_thresholds[:] = 0
        self._weights_f32 = None

    def _check_range(self, row_base: int, column: int, count: int):
        if min(max(column, 0), self.SA_COUNT - 1) != column:
            raise MacroBoundsError("Invalid SA column {}.".format(column))
        if row_base < 0 or count < 0 or row_base + count > self.WL_COUNT:
            raise MacroBoundsError("Rows {}..{} exceed {} wordlines.".format(row_base, row_base + count, self.WL_COUNT))

    def write_weights(self, row_base: int, column: int, values: Iterable[int]) -> None:
        """
        Writes ternary weights down one column, starting at `row_base`.

        :param int row_base: First wordline to write.
        :param int column: SA column to write.
        :param values: Ternary weights, one per wordline.
        """
        values = np.asarray(list(values), dtype=np.int8)
        self._check_range(row_base, column, len(values))
        if len(values) and not np.isin(values, TERNARY_VALUES).all():
            raise MacroError("Weights written to column {} are not ternary.".format(column))

        self.weights[row_base:row_base + len(values), column] = values
        self._weights_f32 = None

    def read_weights(self, row_base: int, column: int, count: int) -> np.ndarray:
        """
        Reads ternary weights down one column. Reading never changes state.

        :rtype: numpy.ndarray
        :return: int8 vector of `count` weights.
        """
        self._check_range(row_base, column, count)
        return self.weights[row_base:row_base + count, column].copy()

    def load_weights(self, weights: np.ndarray) -> None:
        """
        Replaces the whole weight matrix.
        """
        weights = np.asarray(weights)
        if weights.shape != self.weights.shape:
            raise MacroBoundsError("Weight matrix shape {} does not match {}.".format(weights.shape, self.weights.shape))
        if not np.isin(weights, TERNARY_VALUES).all():
            raise MacroError("Weight matrix is not ternary.")
        self.weights[:] = weights
        self._weights_f32 = None

    def segment_location(self, address: int) -> tuple[int, int]:
        """
        Resolves a macro segment address to its (column, row_base).
        """
        if min(max(address, 0), self.segment_count() - 1) != address:
            raise MacroBoundsError("Invalid macro segment address {}.".format(address))
        column, segment = divmod(address, self.segments_per_column())
        return column, segment * self.SEGMENT_ROWS

    @classmethod
    def segment_address(cls, column: int, row_base: int) -> int:
        return column * cls.segments_per_column() + row_base // cls.SEGMENT_ROWS

    def write_segment(self, address: int, words: tuple[int, int], first_index: int = 0) -> None:
        """
        Writes one packed 32-weight segment.
        """
        column, row_base = self.segment_location(address)
        self.write_weights(row_base, column, unpack_ternary(words, first_index))

    def read_segment(self, address: int) -> tuple[int, int]:
        """
        Reads one 32-weight segment, packed into two words.
        """
        column, row_base = self.segment_location(address)
        return pack_ternary(self.read_weights(row_base, column, self.SEGMENT_ROWS))

    def set_thresholds(self, thresholds: Iterable[int]) -> None:
        """
        Sets the per-column SA decision thresholds.
        """
        thresholds = np.asarray(list(thresholds), dtype=np.int32)
        if thresholds.shape != (self.SA_COUNT,):
            raise MacroBoundsError("Expected {} thresholds, got {}.".format(self.SA_COUNT, len(thresholds)))
        self.sa_thresholds[:] = thresholds

    def shift_in(self, word: int) -> None:
        """
        Shifts 32 activation bits into the input buffer. The oldest 32 bits
        drop out at the low end; bit 0 of the word lands first of the new bits.
        """
        bits = (np.uint32(word & 0xFFFFFFFF) >> np.arange(32, dtype=np.uint32)) & 1
        self.buffer[:-self.SHIFT_BITS] = self.buffer[self.SHIFT_BITS:]
        self.buffer[-self.SHIFT_BITS:] = bits

    def load_buffer(self, bits: Iterable[int]) -> None:
        bits = np.asarray(list(bits), dtype=np.uint8)
        if bits.shape != (self.WL_COUNT,):
            raise MacroBoundsError("Input buffer needs {} bits, got {}.".format(self.WL_COUNT, len(bits)))
        self.buffer[:] = bits & 1

    def mac_sums(self, buffer: np.ndarray | None = None) -> np.ndarray:
        """
        Exact per-column MAC sums, before thresholding.
        """
        buffer = self.buffer if buffer is None else np.asarray(buffer)
        if buffer.shape != (self.WL_COUNT,):
            raise MacroBoundsError("Input buffer needs {} bits, got {}.".format(self.WL_COUNT, buffer.shape))

        # float32 is exact here: |sum| <= WL_COUNT
        if self._weights_f32 is None:
            self._weights_f32 = self.weights.astype(np.float32)
        return (buffer.astype(np.float32) @ self._weights_f32).astype(np.int32)

    def mac_and_sense(self, buffer: np.ndarray | None = None, thresholds: np.ndarray | None = None) -> np.ndarray:
        """
        Runs the parallel MAC over the input buffer and senses every column:
        an output bit is 1 only when the column sum is strictly greater than
        that column's threshold.

        :rtype: numpy.ndarray
        :return: uint8 vector of SA_COUNT output bits.
        """
        thresholds = self.sa_thresholds if thresholds is None else np.asarray(thresholds)
        return (self.mac_sums(buffer) > thresholds).astype(np.uint8)

    def output_to_words(self, bits: np.ndarray) -> list[int]:
        """
        Packs SA output bits into 32-bit words, column 0 in bit 0 of word 0.
        """
        weights = np.uint64(1) << np.arange(32, dtype=np.uint64)
        rows = np.asarray(bits, dtype=np.uint64).reshape(-1, 32)
        return [int(v) for v in (rows * weights).sum(axis=1)]

    def cell_image(self) -> np.ndarray:
        """
        Physical cell image under the symmetric weight mapping.

        :rtype: numpy.ndarray
        :return: uint8 matrix `[WL_COUNT x BL_COUNT]` of cell states.
        """
        image = np.zeros((self.WL_COUNT, self.BL_COUNT), dtype=np.uint8)
        for column in range(self.SA_COUNT):
            plus, minus = self._bitline_pair(column)
            image[:, plus] = self.weights[:, column] == 1
            image[:, minus] = self.weights[:, column] == -1
        return image

    def load_cell_image(self, image: np.ndarray) -> None:
        """
        Reconstructs ternary weights from a physical cell image.
        """
        image = np.asarray(image, dtype=np.int8)
        if image.shape != (self.WL_COUNT, self.BL_COUNT):
            raise MacroBoundsError("Cell image shape {} does not match the macro.".format(image.shape))

        weights = np.zeros_like(self.weights)
        for column in range(self.SA_COUNT):
            plus, minus = self._bitline_pair(column)
            if (image[:, plus] & image[:, minus]).any():
                raise MacroError("Column {} holds a (1, 1) cell pair.".format(column))
            weights[:, column] = image[:, plus] - image[:, minus]
        self.load_weights(weights)

    def state_digest(self) -> str:
        """
        Hash of the full macro state, for checking that an operation left the
        macro untouched.
        """
        digest = hashlib.sha256()
        for array in (self.weights, self.buffer, self.sa_thresholds):
            digest.update(array.tobytes())
        return digest.hexdigest()
