#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../src'))

from CimSim.Macro.CimMacro import (MacroBoundsError, MacroError, MacroMode, TernaryCodeError, pack_ternary,
                                   symmetric_map, symmetric_unmap, unpack_ternary)
from CimSim.Macro.CimMacroX import CimMacroX
from CimSim.Macro.CimMacroY import CimMacroY
from CimSim.Macro.MacroModes import macro_class, parse_mode
from CimSim.Macro.WeightImage import (WeightImageError, decode_weight_image, encode_weight_image, load_weight_image,
                                      save_weight_image)


def test_geometry():
    assert (CimMacroX.WL_COUNT, CimMacroX.BL_COUNT, CimMacroX.SA_COUNT) == (1024, 512, 256)
    assert (CimMacroY.WL_COUNT, CimMacroY.BL_COUNT, CimMacroY.SA_COUNT) == (512, 1024, 512)
    assert CimMacroX.segment_count() == CimMacroY.segment_count() == 8192


def test_peak_throughput():
    assert CimMacroX.peak_ops_per_cycle() == 524288
    assert CimMacroY.peak_ops_per_cycle() == 524288
    assert round(CimMacroX.peak_tops(50), 2) == 26.21
    assert round(CimMacroY.peak_tops(50), 2) == 26.21


def test_parse_mode():
    assert parse_mode("X") == MacroMode.X
    assert macro_class("y") is CimMacroY

    with pytest.raises(MacroError):
        parse_mode("z")


def test_fresh_macro_is_zero():
    macro = CimMacroX()
    assert not macro.weights.any()
    assert not macro.read_weights(0, 17, 64).any()


def test_write_then_read_column():
    macro = CimMacroX()
    macro.write_weights(0, 0, [1] * 32)

    assert (macro.read_weights(0, 0, 32) == 1).all()
    assert not macro.read_weights(32, 0, 32).any()
    assert not macro.read_weights(0, 1, 32).any()


def test_zero_length_write_is_identity():
    macro = CimMacroX()
    digest = macro.state_digest()
    macro.write_weights(0, 3, [])
    assert macro.state_digest() == digest


def test_write_bounds():
    macro = CimMacroX()
    macro.write_weights(1000, 5, [1] * 24)
    macro.write_weights(992, 5, [-1] * 32)

    with pytest.raises(MacroBoundsError):
        macro.write_weights(1000, 5, [1] * 64)
    with pytest.raises(MacroBoundsError):
        macro.write_weights(0, 256, [1])
    with pytest.raises(MacroError):
        macro.write_weights(0, 0, [2])


def test_adjacent_columns_do_not_alias():
    rng = np.random.default_rng(3)
    macro = CimMacroY()
    reference = np.zeros((macro.WL_COUNT, macro.SA_COUNT), dtype=np.int8)

    for _ in range(300):
        column = int(rng.integers(0, macro.SA_COUNT))
        row = int(rng.integers(0, macro.WL_COUNT - 32))
        values = rng.integers(-1, 2, size=int(rng.integers(1, 33)))
        macro.write_weights(row, column, values)
        reference[row:row + len(values), column] = values

    assert (macro.weights == reference).all()


def test_symmetric_mapping():
    assert symmetric_map(1) == (1, 0)
    assert symmetric_map(0) == (0, 0)
    assert symmetric_map(-1) == (0, 1)
    for weight in (-1, 0, 1):
        assert symmetric_unmap(symmetric_map(weight)) == weight

    with pytest.raises(MacroError):
        symmetric_unmap((1, 1))


def test_cell_image_round_trip():
    rng = np.random.default_rng(4)
    for cls in (CimMacroX, CimMacroY):
        macro = cls()
        macro.load_weights(rng.integers(-1, 2, size=macro.weights.shape))
        image = macro.cell_image()
        assert image.shape == (cls.WL_COUNT, cls.BL_COUNT)

        other = cls()
        other.load_cell_image(image)
        assert (other.weights == macro.weights).all()


def test_pack_and_unpack_ternary():
    values = [1, -1, 0, 1] * 8
    words = pack_ternary(values)
    assert words[0] & 0b11 == 0b01
    assert (words[0] >> 2) & 0b11 == 0b10
    assert list(unpack_ternary(words)) == values

    with pytest.raises(TernaryCodeError) as error:
        unpack_ternary((0, 0b11 << 4), first_index=10)
    assert error.value.word_index == 11


def test_segments():
    macro = CimMacroX()
    address = CimMacroX.segment_address(7, 64)
    assert macro.segment_location(address) == (7, 64)

    macro.write_segment(address, pack_ternary([-1] * 32))
    assert (macro.read_weights(64, 7, 32) == -1).all()
    assert macro.read_segment(address) == pack_ternary([-1] * 32)

    with pytest.raises(MacroBoundsError):
        macro.segment_location(8192)


def test_all_zero_buffer_senses_zero():
    macro = CimMacroX()
    macro.load_weights(np.ones(macro.weights.shape, dtype=np.int8))
    assert not macro.mac_and_sense().any()


def test_single_positive_term():
    macro = CimMacroX()
    macro.write_weights(0, 9, [1])
    buffer = np.zeros(macro.WL_COUNT, dtype=np.uint8)
    buffer[0] = 1

    output = macro.mac_and_sense(buffer)
    assert output[9] == 1
    assert output.sum() == 1


def test_mac_and_sense_matches_brute_force():
    rng = np.random.default_rng(5)
    macro = CimMacroX()

    for _ in range(1000):
        rows = int(rng.integers(1, 65))
        columns = int(rng.integers(1, 17))
        row0 = int(rng.integers(0, macro.WL_COUNT - rows + 1))
        col0 = int(rng.integers(0, macro.SA_COUNT - columns + 1))
        weights = rng.integers(-1, 2, size=(rows, columns))
        bits = rng.integers(0, 2, size=rows)

        macro.reset()
        macro.weights[row0:row0 + rows, col0:col0 + columns] = weights
        macro.load_weights(macro.weights.copy())
        buffer = np.zeros(macro.WL_COUNT, dtype=np.uint8)
        buffer[row0:row0 + rows] = bits

        output = macro.mac_and_sense(buffer)
        for j in range(columns):
            total = sum(int(bits[i]) * int(weights[i, j]) for i in range(rows))
            assert output[col0 + j] == (1 if total > 0 else 0)


def test_mac_linearity():
    rng = np.random.default_rng(6)
    macro = CimMacroY()
    macro.load_weights(rng.integers(-1, 2, size=macro.weights.shape))

    for _ in range(20):
        buffer = rng.integers(0, 2, size=macro.WL_COUNT).astype(np.uint8)
        part = buffer & rng.integers(0, 2, size=macro.WL_COUNT).astype(np.uint8)
        assert (macro.mac_sums(buffer) == macro.mac_sums(part) + macro.mac_sums(buffer - part)).all()


def test_thresholds_are_strict():
    macro = CimMacroX()
    macro.write_weights(0, 0, [1, 1])
    macro.write_weights(0, 1, [1, 1])
    thresholds = np.zeros(macro.SA_COUNT, dtype=np.int32)
    thresholds[0] = 2
    thresholds[1] = 1
    macro.set_thresholds(thresholds)

    buffer = np.zeros(macro.WL_COUNT, dtype=np.uint8)
    buffer[:2] = 1
    output = macro.mac_and_sense(buffer)
    assert (output[0], output[1]) == (0, 1)


def test_shift_in_fills_buffer_from_the_top():
    macro = CimMacroX()
    macro.shift_in(0x00000001)
    assert macro.buffer[macro.WL_COUNT - 32] == 1

    macro.shift_in(0)
    assert macro.buffer[macro.WL_COUNT - 64] == 1
    assert macro.buffer.sum() == 1


def test_output_to_words():
    macro = CimMacroX()
    bits = np.zeros(macro.SA_COUNT, dtype=np.uint8)
    bits[0] = bits[33] = bits[255] = 1
    words = macro.output_to_words(bits)
    assert len(words) == 8
    assert words[0] == 1 and words[1] == 2 and words[7] == 0x80000000


def test_weight_image_file(tmp_path):
    rng = np.random.default_rng(8)
    weights = rng.integers(-1, 2, size=(512, 512)).astype(np.int8)
    path = str(tmp_path / "y.cimw")

    save_weight_image(path, weights, MacroMode.Y)
    mode, loaded = load_weight_image(path)
    assert mode == MacroMode.Y
    assert (loaded == weights).all()


def test_weight_image_rejects_bad_data():
    weights = np.zeros((1024, 256), dtype=np.int8)
    data = encode_weight_image(weights, MacroMode.X)

    with pytest.raises(WeightImageError):
        decode_weight_image(b"XXXX" + data[4:])
    with pytest.raises(WeightImageError):
        decode_weight_image(data[:-1])
    with pytest.raises(WeightImageError):
        encode_weight_image(weights, MacroMode.Y)
