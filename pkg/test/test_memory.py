#!/usr/bin/env python3

#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../src'))

from CimSim.Memory.Dma import DmaBusyError, DmaDirection, DmaEngine, DmaState, REG_CTRL, REG_LEN, REG_SRC, REG_DST
from CimSim.Memory.Dram import Dram, DramTiming
from CimSim.Memory.Sram import MemoryAlignmentError, MemoryBoundsError, SramBank


def _engine(size_words: int = 4096):
    dram = Dram(DramTiming(), size_words)
    fm_sram = SramBank("fm_sram", 262144, wide_port_bits=256)
    weight_sram = SramBank("weight_sram", 524288)
    return DmaEngine(dram, fm_sram, weight_sram)


def test_word_round_trip():
    bank = SramBank("fm_sram", 262144)
    bank.write_word(12, 0xDEADBEEF)
    assert bank.read_word(12) == 0xDEADBEEF


def test_capacity_edge():
    bank = SramBank("fm_sram", 262144)
    assert bank.word_count() == 8192
    bank.write_word(8191, 1)

    with pytest.raises(MemoryBoundsError):
        bank.read_word(8192)
    with pytest.raises(MemoryBoundsError):
        bank.write_words(8190, [1, 2, 3])


def test_wide_port_is_coherent_with_narrow_port():
    rng = np.random.default_rng(1)
    bank = SramBank("fm_sram", 262144, wide_port_bits=256)
    values = rng.integers(0, 1 << 32, size=8, dtype=np.uint64)
    bank.write_wide(16, values)

    assert list(bank.read_wide(16)) == [bank.read_word(16 + i) for i in range(8)]

    bank.write_word(18, 7)
    assert bank.read_wide(16)[2] == 7
    assert bank.load(18 * 4, 4) == 7

    with pytest.raises(MemoryAlignmentError):
        bank.read_wide(4)


def test_byte_port_is_little_endian():
    bank = SramBank("weight_sram", 1024)
    bank.write_word(1, 0x8001F0E0)
    assert bank.load(4, 1) == 0xE0
    assert bank.load(4, 1, signed=True) == 0xFFFFFFE0
    assert bank.load(6, 2) == 0x8001
    assert bank.load(6, 2, signed=True) == 0xFFFF8001

    bank.store(5, 1, 0xAB)
    assert bank.read_word(1) == 0x8001ABE0

    with pytest.raises(MemoryAlignmentError):
        bank.load(5, 2)


def test_dram_fetch_cost():
    timing = DramTiming(latency_first_word=30, per_burst_word=1, burst_words=16)
    assert timing.fetch_cost(0) == 0
    assert timing.fetch_cost(1) == 45
    assert timing.fetch_cost(16) == 45
    assert timing.fetch_cost(17) == 61

    costs = [timing.fetch_cost(n) for n in range(1025)]
    assert all(b >= a for a, b in zip(costs, costs[1:]))

    with pytest.raises(ValueError):
        timing.fetch_cost(-1)


def test_zero_length_transfer_completes_on_first_tick():
    dma = _engine()
    dma.start(DmaDirection.DRAM_TO_FM, 0, 0, 0)
    assert dma.state == DmaState.BUSY
    assert dma.tick() == DmaState.DONE


def test_transfer_copies_data_at_completion():
    rng = np.random.default_rng(2)
    dma = _engine()
    data = rng.integers(0, 1 << 32, size=100, dtype=np.uint64)
    dma.dram.write_words(200, data)

    transfer = dma.start(DmaDirection.DRAM_TO_WEIGHT, 200, 40, 100)
    assert transfer.total_cycles == DramTiming().fetch_cost(100) + 100

    dma.advance(transfer.total_cycles - 1)
    assert dma.busy()
    assert not dma.weight_sram.read_words(40, 100).any()

    dma.tick()
    assert dma.state == DmaState.DONE
    assert (dma.weight_sram.read_words(40, 100) == data).all()


def test_fm_to_dram_transfer():
    dma = _engine()
    dma.fm_sram.write_words(0, [1, 2, 3])
    dma.start(DmaDirection.FM_TO_DRAM, 0, 10, 3)
    dma.advance(1000)
    assert list(dma.dram.read_words(10, 3)) == [1, 2, 3]


def test_start_while_busy():
    dma = _engine()
    dma.start(DmaDirection.DRAM_TO_FM, 0, 0, 16)
    with pytest.raises(DmaBusyError):
        dma.start(DmaDirection.DRAM_TO_FM, 0, 0, 16)

    dma.advance(dma.cycles_until_idle())
    dma.start(DmaDirection.DRAM_TO_FM, 0, 0, 16)


def test_start_checks_bounds_and_direction():
    dma = _engine(size_words=64)
    with pytest.raises(MemoryBoundsError):
        dma.start(DmaDirection.DRAM_TO_FM, 60, 0, 8)
    with pytest.raises(ValueError):
        dma.start(7, 0, 0, 1)
    assert dma.state == DmaState.IDLE


def test_register_interface():
    dma = _engine()
    dma.dram.write_words(5, [9, 8])
    dma.write_register(REG_SRC, 5)
    dma.write_register(REG_DST, 100)
    dma.write_register(REG_LEN, 2)
    dma.write_register(REG_CTRL, int(DmaDirection.DRAM_TO_FM))

    assert dma.busy()
    assert dma.read_register(REG_LEN) == 2
    dma.advance(dma.cycles_until_idle())
    assert list(dma.fm_sram.read_words(100, 2)) == [9, 8]

    with pytest.raises(ValueError):
        dma.write_register(0x40, 1)
