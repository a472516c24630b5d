#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..Isa.Instruction import HALT, Instruction, disassemble, encode
from ..Memory.Dma import DmaDirection
from .Model import ModelGraph, words_per_row


class Phase(Enum):
    """
    Latency breakdown categories. Every schedule item is charged to exactly
    one of them.
    """

    WEIGHT_LOAD = "weight_load"
    CONV = "conv"
    POOL = "pool"
    PRE_POST = "pre_post"
    DRAM_FM_TRAFFIC = "dram_fm_traffic"


@dataclass(frozen=True)
class ScheduleFlags:
    layer_fusion: bool = False
    weight_fusion: bool = False
    pipeline: bool = False

    @property
    def name(self) -> str:
        enabled = [n for n, on in (("fusion", self.layer_fusion), ("wf", self.weight_fusion),
                                    ("pipeline", self.pipeline)) if on]
        return "+".join(enabled) if enabled else "baseline"


@dataclass(frozen=True)
class InstructionItem:
    inst: Instruction
    phase: Phase

    @property
    def instructions(self) -> tuple[Instruction, ...]:
        return (self.inst,)


@dataclass(frozen=True)
class DmaStartItem:
    """
    Programs the uDMA registers and starts a transfer; the last instruction
    is the CTRL store that starts it. Addresses are word addresses.
    """

    direction: DmaDirection
    src: int
    dst: int
    length: int
    phase: Phase
    instructions: tuple[Instruction, ...]


@dataclass(frozen=True)
class DmaWaitItem:
    """
    Blocking read of the uDMA WAIT register.
    """

    phase: Phase
    instructions: tuple[Instruction, ...]


@dataclass(frozen=True)
class MarkerItem:
    label: str
    instructions: tuple[Instruction, ...] = ()


@dataclass(frozen=True)
class FmBuffer:
    """
    Placement of a packed 1-bit feature map in a word-addressed memory. Row
    `r` starts at `base + r * row_stride`; the map's words begin
    `word_offset` words into each row.
    """

    base: int
    rows: int
    channels: int
    row_stride: int
    word_offset: int = 0

    @property
    def words_per_row(self) -> int:
        return words_per_row(self.channels)

    @property
    def size_words(self) -> int:
        return self.rows * self.row_stride

    def word(self, row: int, index: int = 0) -> int:
        return self.base + row * self.row_stride + self.word_offset + index

    def _word_index(self) -> np.ndarray:
        rows = np.arange(self.rows)[:, None] * self.row_stride
        return self.base + self.word_offset + rows + np.arange(self.words_per_row)[None, :]

    def read_bits(self, memory: np.ndarray) -> np.ndarray:
        """
        Extracts the feature map from a word array.

        :rtype: numpy.ndarray
        :return: uint8 matrix `[rows x channels]` of activation bits.
        """
        words = np.asarray(memory)[self._word_index()].astype(np.uint64)
        bits = (words[:, :, None] >> np.arange(32, dtype=np.uint64)) & 1
        return bits.reshape(self.rows, -1)[:, :self.channels].astype(np.uint8)

    def write_bits(self, memory: np.ndarray, bits: np.ndarray) -> None:
        """
        Packs a `[rows x channels]` bit matrix into a word array, channel 0
        in bit 0 of each row's first word. Padding bits are written as zero.
        """
        bits = np.asarray(bits, dtype=np.uint64)
        if bits.shape != (self.rows, self.channels):
            raise ValueError("Feature map shape {} does not match buffer {}x{}.".format(bits.shape, self.rows,
                                                                                       self.channels))
        padded = np.zeros((self.rows, self.words_per_row * 32), dtype=np.uint64)
        padded[:, :self.channels] = bits & 1
        words = (padded.reshape(self.rows, -1, 32) << np.arange(32, dtype=np.uint64)).sum(axis=2)
        memory[self._word_index()] = words


@dataclass(frozen=True)
class ConvPlacement:
    """
    Where one conv layer's weights live in a macro image.
    """

    layer_index: int
    col0: int
    footprint: int
    row_base: int


@dataclass(frozen=True)
class ImagePlan:
    """
    One macro image: the conv layers sharing it and the 32-row segments its
    cim.write burst rewrites, in burst order. The packed image sits at
    `dram_base` in DRAM, two words per segment.
    """

    index: int
    placements: tuple[ConvPlacement, ...]
    segments: tuple[tuple[int, int], ...]
    dram_base: int

    @property
    def size_words(self) -> int:
        return 2 * len(self.segments)


ScheduleItem = InstructionItem | DmaStartItem | DmaWaitItem | MarkerItem


@dataclass(frozen=True)
class Schedule:
    """
    Lowered program for one model under one flag configuration. The
    program is the concatenation of every item's instructions followed by
    the halting jump.
    """

    model: ModelGraph
    flags: ScheduleFlags
    items: tuple[ScheduleItem, ...]
    images: tuple[ImagePlan, ...] = ()
    input_buffer: FmBuffer | None = None
    output_buffer: FmBuffer | None = None
    dram_words: int = 0
    block_sizes: tuple[int, ...] = ()
    fm_high_water: int = 0
    issue_cycles: tuple[int, ...] = field(default=(), compare=False)

    def instructions(self) -> list[Instruction]:
        return [inst for item in self.items for inst in item.instructions]

    def program(self) -> list[int]:
        """
        Encoded program image, halting jump included.

        :rtype: list(int)
        :return: Instruction words, laid out from address 0.
        """
        return [encode(inst) for inst in self.instructions()] + [encode(HALT)]

    def phase_map(self) -> dict[int, Phase]:
        """
        Maps every instruction address to the phase it is charged to.
        """
        phases = {}
        pc = 0
        for item in self.items:
            for _ in item.instructions:
                phases[pc] = item.phase
                pc += 4
        return phases

    def instruction_count(self) -> int:
        return sum(len(item.instructions) for item in self.items)

    def mnemonic_counts(self) -> Counter:
        return Counter(inst.mnemonic for inst in self.instructions())

    def dump(self) -> str:
        """
        Human-readable listing, one instruction per line, annotated with its
        predicted issue cycle when the schedule carries them.
        """
        lines = ["# {} {}-mode, flags: {}".format(self.model.name, self.model.mode.value, self.flags.name)]
        pc = 0
        cycles = iter(self.issue_cycles)
        for item in self.items:
            if isinstance(item, MarkerItem):
                lines.append("{}:".format(item.label))
                continue
            for inst in item.instructions:
                cycle = next(cycles, None)
                stamp = "{:>10}".format(cycle) if cycle is not None else " " * 10
                lines.append("{} {:08x}  {:<32} # {}".format(stamp, pc, disassemble(inst), item.phase.value))
                pc += 4
        lines.append("{:>10} {:08x}  {}".format("", pc, disassemble(HALT)))
        return "\n".join(lines) + "\n"
