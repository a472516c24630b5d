#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from dataclasses import dataclass, replace

from ..Config import FM_SRAM_BITS, LatencyConfig, WEIGHT_SRAM_BITS
from ..Core.Core import DMA_BASE, FM_SRAM_BASE
from ..Isa.Instruction import BaseOp, CimOp, Instruction, load_immediate
from ..Macro.CimMacro import CimMacro
from ..Macro.MacroModes import macro_class
from ..Memory.Dma import DmaDirection, REG_CTRL, REG_DST, REG_LEN, REG_SRC, REG_WAIT
from ..Memory.Dram import DramTiming
from .Estimator import predict_latency
from .Model import LayerKind, LayerSpec, ModelGraph, words_per_row
from .Schedule import (ConvPlacement, DmaStartItem, DmaWaitItem, FmBuffer, ImagePlan, InstructionItem, MarkerItem,
                       Phase, Schedule, ScheduleFlags)


class LoweringError(Exception):
    """
    Exception thrown when a model cannot be mapped onto the macro, naming
    the offending layer.
    """

    pass


class CapacityError(LoweringError):
    """
    Exception thrown when feature maps do not fit FM SRAM, carrying the
    required and available sizes in bits.
    """

    def __init__(self, message: str, required_bits: int, available_bits: int):
        super().__init__("{} (required {} bits, available {} bits)".format(message, required_bits, available_bits))
        self.required_bits = required_bits
        self.available_bits = available_bits


FM_WORDS = FM_SRAM_BITS // 32
WEIGHT_WORDS = WEIGHT_SRAM_BITS // 32

# Register conventions of lowered code.
REG_CONV_SRC = 1
REG_CONV_DST = 2
REG_WEIGHT_SRC = 3
REG_MACRO_ADDR = 4
REG_POOL_LOAD = 5
REG_POOL_ACC = 6
REG_POOL_TMP = 7
REG_POOL_STORE = 8
REG_DMA_TMP = 28
REG_DMA_BASE = 29

IMM_S_RANGE = (-64, 63)
IMM_D_RANGE = (-16, 15)
BYTE_OFFSET_RANGE = (-2048, 2044)


def check_geometry(model: ModelGraph) -> None:
    """
    Checks that every conv layer's receptive field fits the macro's
    wordlines, each tap taking whole 32-channel words, and that its output
    channels fit the sense amplifiers.

    :param ModelGraph model: Model to check.
    """
    macro = macro_class(model.mode)
    for _, layer in model.conv_layers():
        rows = layer.kernel * words_per_row(layer.in_channels) * 32
        if rows > macro.WL_COUNT:
            raise LoweringError("{}: kernel {} x {} input channels needs {} wordlines, {}-mode has {}.".format(
                layer.name, layer.kernel, layer.in_channels, rows, model.mode.value, macro.WL_COUNT))
        if layer.out_channels > macro.SA_COUNT:
            raise LoweringError("{}: {} output channels exceed the {} sense amplifiers of {}-mode.".format(
                layer.name, layer.out_channels, macro.SA_COUNT, model.mode.value))


def plan_images(model: ModelGraph) -> tuple[list[ImagePlan], dict[int, int]]:
    """
    Packs conv layers into macro images by 32-column groups. A new image
    starts when the columns run out or a weight update barrier is crossed.
    Each image rewrites the kernel window rows of its columns, plus any
    rows an earlier image left behind in them.

    :rtype: (list(ImagePlan), dict)
    :return: Images with DRAM bases, and the image index of every compute layer.
    """
    macro = macro_class(model.mode)
    groups: list[list[ConvPlacement]] = []
    layer_image = {}
    used = macro.SA_COUNT
    barrier = False

    for index, layer in enumerate(model.layers):
        if layer.kind == LayerKind.WEIGHT_UPDATE:
            barrier = True
        elif layer.kind == LayerKind.CONV1D:
            footprint = words_per_row(layer.out_channels) * 32
            if not groups or barrier or used + footprint > macro.SA_COUNT:
                groups.append([])
                used = 0
            row_base = macro.WL_COUNT - layer.kernel * words_per_row(layer.in_channels) * 32
            groups[-1].append(ConvPlacement(index, used, footprint, row_base))
            used += footprint
            barrier = False

        if layer.is_compute:
            layer_image[index] = max(len(groups) - 1, 0)

    dirty: dict[int, set[int]] = {}
    images = []
    dram_base = 0
    for number, placements in enumerate(groups):
        segments = []
        for placement in placements:
            window = set(range(placement.row_base, macro.WL_COUNT, macro.SEGMENT_ROWS))
            for column in range(placement.col0, placement.col0 + placement.footprint):
                rows = window | dirty.get(column, set())
                segments.extend((column, row) for row in sorted(rows))
                dirty[column] = window

        image = ImagePlan(number, tuple(placements), tuple(segments), dram_base)
        if image.size_words > WEIGHT_WORDS:
            raise CapacityError("Macro image {} does not fit weight SRAM.".format(number), image.size_words * 32,
                                WEIGHT_SRAM_BITS)
        images.append(image)
        dram_base += image.size_words

    return images, layer_image


@dataclass(frozen=True)
class _View:
    """
    A feature map buffer holding model rows from `origin` onwards. With a
    `capacity` the buffer is a ring of that many rows.
    """

    buffer: FmBuffer
    origin: int = 0
    capacity: int = 0

    def row_start(self, row: int) -> int:
        slot = row - self.origin
        if self.capacity:
            slot %= self.capacity
        return self.buffer.base + slot * self.buffer.row_stride

    def word(self, row: int, index: int = 0) -> int:
        return self.row_start(row) + self.buffer.word_offset + index


@dataclass
class _Group:
    layers: list[int]
    image: int | None
    input: FmBuffer | None = None
    input_in_dram: bool = False
    output: FmBuffer | None = None
    output_in_dram: bool = False
    output_side: str = ""
    scratch: tuple[int, int] = (0, 0)
    block: int = 0


@dataclass
class _PoolChunk:
    layer: int
    row: int
    word: int
    source: _View
    target: _View


class _Registers:
    """
    Tracks the base registers of lowered code so that consecutive accesses
    reuse a base while the offset stays within its immediate range.
    """

    def __init__(self):
        self.values: dict[int, int] = {}

    def point(self, reg: int, target: int, low: int, high: int) -> tuple[list[Instruction], int]:
        value = self.values.get(reg)
        if value is not None and low <= target - value <= high:
            return [], target - value

        new = target - low
        if value is not None and -2048 <= new - value <= 2047:
            insts = [Instruction(BaseOp.ADDI, rd=reg, rs1=reg, imm=new - value)]
        else:
            insts = load_immediate(reg, new)
        self.values[reg] = new
        return insts, low


class _Lowerer:
    """
    Plans FM SRAM and DRAM buffers for one flag configuration and emits the
    schedule items group by group.
    """

    def __init__(self, model: ModelGraph, fusion: bool, weight_fusion: bool, pipeline: bool):
        self.model = model
        self.fusion = fusion
        self.weight_fusion = weight_fusion
        self.pipeline = pipeline
        self.macro: type[CimMacro] = macro_class(model.mode)

        self.items = []
        self.regs = _Registers()
        self.weight_dma_pending = False
        self.high_water = 0

        self.images, self.layer_image = plan_images(model)
        self.placements = {p.layer_index: p for image in self.images for p in image.placements}
        self.dram_next = sum(image.size_words for image in self.images)

    # Layouts

    def _layer(self, index: int) -> LayerSpec:
        return self.model.layers[index]

    def _output_layout(self, index: int) -> tuple[int, int]:
        """
        Row stride and word offset of a layer's output rows. Conv rows are
        whole macro output rows; pools are packed.
        """
        layer = self._layer(index)
        if layer.kind == LayerKind.CONV1D:
            return self.macro.output_words(), self.placements[index].col0 // 32
        return words_per_row(layer.output_channels), 0

    def _buffer(self, index: int, base: int, rows: int) -> FmBuffer:
        stride, offset = self._output_layout(index)
        return FmBuffer(base, rows, self._layer(index).output_channels, stride, offset)

    def _ring_rows(self, group: _Group, position: int) -> int:
        """
        Pool width when the layer at `position` is a conv whose rows go
        straight into the following max-pool through a ring buffer, else 0.
        """
        if not self.pipeline or position + 1 >= len(group.layers):
            return 0
        conv, pool = self._layer(group.layers[position]), self._layer(group.layers[position + 1])
        if conv.kind != LayerKind.CONV1D or pool.kind != LayerKind.MAXPOOL:
            return 0
        return pool.pool_width

    def _ranges(self, group: _Group, first: int, last: int) -> tuple[tuple[int, int], list[tuple[int, int]]]:
        ranges = [(0, 0)] * len(group.layers)
        rows = (first, last)
        for position in range(len(group.layers) - 1, -1, -1):
            ranges[position] = rows
            rows = self._layer(group.layers[position]).input_rows(*rows)
        return rows, ranges

    def _scratch_words(self, group: _Group, block: int) -> int:
        in_rows, ranges = self._ranges(group, 0, block)
        words = 0
        for position, (first, last) in enumerate(ranges[:-1]):
            rows = self._ring_rows(group, position) or last - first
            words += rows * self._output_layout(group.layers[position])[0]
        if group.input_in_dram:
            words += (in_rows[1] - in_rows[0]) * group.input.row_stride
        if group.output_in_dram:
            words += block * self._output_layout(group.layers[-1])[0]
        return words

    # Planning

    def _groups(self) -> list[_Group]:
        groups: list[_Group] = []
        compute = [index for index, _ in self.model.compute_layers()]

        for index in compute:
            image = self.layer_image[index] if self.images else None
            previous = groups[-1] if groups else None
            if previous is not None and self.fusion and previous.image == image:
                previous.layers.append(index)
            elif (previous is not None and self.pipeline and len(previous.layers) == 1
                  and self._layer(previous.layers[0]).kind == LayerKind.CONV1D
                  and self._layer(index).kind == LayerKind.MAXPOOL):
                previous.layers.append(index)
            else:
                groups.append(_Group([index], image))
        return groups
    def _plan_group(self, group: _Group, source: FmBuffer, source_side: str, source_in_dram: bool, last: bool):
        group.input = source
        group.input_in_dram = source_in_dram
        final = group.layers[-1]
        length = self._layer(final).output_length
        stride, _ = self._output_layout(final)
        in_words = 0 if source_in_dram else source.size_words
        out_words = length * stride

        group.output_side = "bottom" if source_side == "top" else "top"
        group.output_in_dram = False
        if self.fusion or last:
            available = FM_WORDS - in_words - out_words
            if out_words <= FM_WORDS and available >= self._scratch_words(group, 1):
                self._place(group, in_words, out_words, source_side, source_in_dram)
                return
            if last:
                raise CapacityError("Final output of {} does not fit FM SRAM.".format(self._layer(final).name),
                                    (in_words + out_words + self._scratch_words(group, 1)) * 32, FM_SRAM_BITS)

        group.output_in_dram = True
        group.output = self._buffer(final, self.dram_next, length)
        self.dram_next += group.output.size_words
        self._place(group, in_words, 0, source_side, source_in_dram)

    def _place(self, group: _Group, in_words: int, out_words: int, source_side: str, source_in_dram: bool):
        low, high = 0, FM_WORDS
        if not source_in_dram:
            if source_side == "bottom":
                low = in_words
            else:
                high -= in_words

        if not group.output_in_dram:
            final = group.layers[-1]
            if group.output_side == "bottom":
                group.output = self._buffer(final, low, self._layer(final).output_length)
                low += out_words
            else:
                high -= out_words
                group.output = self._buffer(final, high, self._layer(final).output_length)

        group.scratch = (low, high)
        available = high - low
        if self._scratch_words(group, 1) > available:
            raise CapacityError("Layer group starting at {} cannot fit a single row block.".format(
                self._layer(group.layers[0]).name), self._scratch_words(group, 1) * 32, available * 32)

        # largest block whose working set fits the scratch region
        length = self._layer(group.layers[-1]).output_length
        lo, hi = 1, length
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._scratch_words(group, mid) <= available:
                lo = mid
            else:
                hi = mid - 1
        group.block = lo
        self.high_water = max(self.high_water, FM_WORDS - available + self._scratch_words(group, lo))

    # Emission helpers

    def _emit(self, insts, phase: Phase):
        for inst in insts:
            self.items.append(InstructionItem(inst, phase))

    def _dma_start(self, direction: DmaDirection, src: int, dst: int, length: int, phase: Phase):
        insts = []
        for offset, value in ((REG_SRC, src), (REG_DST, dst), (REG_LEN, length)):
            insts.extend(load_immediate(REG_DMA_TMP, value))
            insts.append(Instruction(BaseOp.SW, rs1=REG_DMA_BASE, rs2=REG_DMA_TMP, imm=offset))
        insts.append(Instruction(BaseOp.ADDI, rd=REG_DMA_TMP, rs1=0, imm=int(direction)))
        insts.append(Instruction(BaseOp.SW, rs1=REG_DMA_BASE, rs2=REG_DMA_TMP, imm=REG_CTRL))
        self.items.append(DmaStartItem(direction, src, dst, length, phase, tuple(insts)))

    def _dma_wait(self, phase: Phase | None = None):
        if phase is None:
            phase = Phase.WEIGHT_LOAD if self.weight_dma_pending else Phase.DRAM_FM_TRAFFIC
        self.items.append(DmaWaitItem(phase, (Instruction(BaseOp.LW, rd=0, rs1=REG_DMA_BASE, imm=REG_WAIT),)))
        self.weight_dma_pending = False

    def _start_weight_dma(self, image: ImagePlan):
        self._dma_start(DmaDirection.DRAM_TO_WEIGHT, image.dram_base, 0, image.size_words, Phase.WEIGHT_LOAD)
        self.weight_dma_pending = True

    def _weight_burst(self, image: ImagePlan):
        self.items.append(MarkerItem("image{}_write".format(image.index)))
        for number, (column, row) in enumerate(image.segments):
            pre_s, offset_s = self.regs.point(REG_WEIGHT_SRC, 2 * number, *IMM_S_RANGE)
            pre_d, offset_d = self.regs.point(REG_MACRO_ADDR, self.macro.segment_address(column, row), *IMM_D_RANGE)
            self._emit(pre_s + pre_d, Phase.WEIGHT_LOAD)
            self._emit([Instruction(CimOp.WRITE, rs1=REG_WEIGHT_SRC, rs2=REG_MACRO_ADDR, imm_s=offset_s,
                                    imm_d=offset_d)], Phase.WEIGHT_LOAD)

    def _load_image(self, index: int, prefetched: bool):
        image = self.images[index]
        if prefetched:
            self._dma_wait(Phase.WEIGHT_LOAD)
        else:
            self._dma_wait(Phase.WEIGHT_LOAD)
            self._start_weight_dma(image)
            self._dma_wait(Phase.WEIGHT_LOAD)
        self._weight_burst(image)

        if self.weight_fusion and index + 1 < len(self.images):
            self._dma_wait(Phase.WEIGHT_LOAD)
            self._start_weight_dma(self.images[index + 1])


    # Pooling

    def _pool_chunk(self, chunk: _PoolChunk) -> list[Instruction]:
        width = self._layer(chunk.layer).pool_width
        insts = []
        for q in range(width):
            address = FM_SRAM_BASE + 4 * chunk.source.word(chunk.row * width + q, chunk.word)
            pre, offset = self.regs.point(REG_POOL_LOAD, address, *BYTE_OFFSET_RANGE)
            insts.extend(pre)
            if q == 0:
                insts.append(Instruction(BaseOp.LW, rd=REG_POOL_ACC, rs1=REG_POOL_LOAD, imm=offset))
            else:
                insts.append(Instruction(BaseOp.LW, rd=REG_POOL_TMP, rs1=REG_POOL_LOAD, imm=offset))
                insts.append(Instruction(BaseOp.OR, rd=REG_POOL_ACC, rs1=REG_POOL_ACC, rs2=REG_POOL_TMP))

        address = FM_SRAM_BASE + 4 * chunk.target.word(chunk.row, chunk.word)
        pre, offset = self.regs.point(REG_POOL_STORE, address, *BYTE_OFFSET_RANGE)
        insts.extend(pre)
        insts.append(Instruction(BaseOp.SW, rs1=REG_POOL_STORE, rs2=REG_POOL_ACC, imm=offset))
        return insts

    def _emit_pool(self, index: int, rows: tuple[int, int], source: _View, target: _View):
        wps = words_per_row(self._layer(index).in_channels)
        for row in range(*rows):
            for word in range(wps):
                self._emit(self._pool_chunk(_PoolChunk(index, row, word, source, target)), Phase.POOL)

    # Convolution

    def _emit_conv(self, index: int, rows: tuple[int, int], source: _View, target: _View,
                   pooled: tuple[int, _View] | None):
        """
        Emits the cim.conv stream of a row range. With `pooled` set, the
        pool subroutine of each pooled row follows the conv row completing
        its window, so `target` only ever holds one pool window.
        """
        layer = self._layer(index)
        k, s = layer.kernel, layer.stride
        wps = words_per_row(layer.in_channels)
        step = min(s, k)

        for n, row in enumerate(range(*rows)):
            window = range(row * s, row * s + k) if n == 0 else range(row * s + k - step, row * s + k)
            destination = target.row_start(row)
            for source_row in window:
                for word in range(wps):
                    pre_s, offset_s = self.regs.point(REG_CONV_SRC, source.word(source_row, word), *IMM_S_RANGE)
                    pre_d, offset_d = self.regs.point(REG_CONV_DST, destination, *IMM_D_RANGE)
                    self._emit(pre_s + pre_d, Phase.CONV)
                    self._emit([Instruction(CimOp.CONV, rs1=REG_CONV_SRC, rs2=REG_CONV_DST, imm_s=offset_s,
                                            imm_d=offset_d)], Phase.CONV)

            if pooled:
                pool_index, pool_target = pooled
                width = self._layer(pool_index).pool_width
                if (row + 1) % width == 0:
                    pool_row = (row + 1) // width - 1
                    self._emit_pool(pool_index, (pool_row, pool_row + 1), target, pool_target)

    # Groups

    def _emit_group(self, number: int, group: _Group):
        self.items.append(MarkerItem("group{}".format(number)))
        length = self._layer(group.layers[-1]).output_length
        low = group.scratch[0]

        for first in range(0, length, group.block):
            last = min(first + group.block, length)
            in_rows, ranges = self._ranges(group, first, last)
            self.items.append(MarkerItem("group{}_rows{}_{}".format(number, first, last)))

            base = low
            if group.input_in_dram:
                staging = replace(group.input, base=base, rows=in_rows[1] - in_rows[0])
                base += staging.size_words
                self._dma_wait()
                self._dma_start(DmaDirection.DRAM_TO_FM, group.input.base + in_rows[0] * group.input.row_stride,
                                staging.base, staging.size_words, Phase.DRAM_FM_TRAFFIC)
                self._dma_wait(Phase.DRAM_FM_TRAFFIC)
                source = _View(staging, in_rows[0])
            else:
                source = _View(group.input, 0)

            views = []
            for position, index in enumerate(group.layers):
                first_row, last_row = ranges[position]
                ring = self._ring_rows(group, position)
                if position == len(group.layers) - 1 and not group.output_in_dram:
                    views.append(_View(group.output, 0))
                else:
                    buffer = self._buffer(index, base, ring or last_row - first_row)
                    base += buffer.size_words
                    views.append(_View(buffer, first_row, ring))

            for position, index in enumerate(group.layers):
                if position and self._ring_rows(group, position - 1):
                    continue
                layer_source = views[position - 1] if position else source
                if self._layer(index).kind == LayerKind.CONV1D:
                    pooled = None
                    if self._ring_rows(group, position):
                        pooled = (group.layers[position + 1], views[position + 1])
                    self._emit_conv(index, ranges[position], layer_source, views[position], pooled)
                else:
                    self._emit_pool(index, ranges[position], layer_source, views[position])

            if group.output_in_dram:
                stride = group.output.row_stride
                self._dma_wait()
                self._dma_start(DmaDirection.FM_TO_DRAM, views[-1].buffer.base, group.output.base + first * stride,
                                (last - first) * stride, Phase.DRAM_FM_TRAFFIC)
                self._dma_wait(Phase.DRAM_FM_TRAFFIC)

    def run(self, flags: ScheduleFlags) -> Schedule:
        model = self.model
        input_buffer = FmBuffer(0, model.input_length, model.input_channels, words_per_row(model.input_channels))
        if input_buffer.size_words > FM_WORDS:
            raise CapacityError("Network input does not fit FM SRAM.", input_buffer.size_words * 32, FM_SRAM_BITS)

        groups = self._groups()
        source, side, in_dram = input_buffer, "bottom", False
        for number, group in enumerate(groups):
            self._plan_group(group, source, side, in_dram, number == len(groups) - 1)
            source, side, in_dram = group.output, group.output_side, group.output_in_dram

        self.items.append(MarkerItem("prologue"))
        self._emit([Instruction(BaseOp.LUI, rd=REG_DMA_BASE, imm=DMA_BASE)], Phase.PRE_POST)

        loaded = None
        for number, group in enumerate(groups):
            if group.image is not None and group.image != loaded:
                self._load_image(group.image, prefetched=self.weight_fusion and group.image > 0)
                loaded = group.image
            self._emit_group(number, group)

        return Schedule(model=model, flags=flags, items=tuple(self.items), images=tuple(self.images),
                        input_buffer=input_buffer, output_buffer=groups[-1].output, dram_words=self.dram_next,
                        block_sizes=tuple(group.block for group in groups), fm_high_water=self.high_water * 32)


def lower_plan(model: ModelGraph, flags: ScheduleFlags) -> Schedule:
    """
    Lowers a model with exactly the given optimizations applied, without
    issue-cycle annotations.

    :param ModelGraph model: Model to lower.
    :param ScheduleFlags flags: Optimizations to apply.
    """
    check_geometry(model)
    return _Lowerer(model, flags.layer_fusion, flags.weight_fusion, flags.pipeline).run(flags)


def lower(model: ModelGraph, flags: ScheduleFlags, dram: DramTiming | None = None,
          latency: LatencyConfig | None = None) -> Schedule:
    """
    Lowers a model to a CIM instruction stream with uDMA directives, applying
    every enabled optimization.

    :param ModelGraph model: Model to lower.
    :param ScheduleFlags flags: Enabled optimizations.
    :param DramTiming dram: DRAM timing used for the issue-cycle annotations.
    :param LatencyConfig latency: Core latency table.

    :rtype: Schedule
    :return: The schedule, annotated with predicted issue cycles.
    """
    dram = dram or DramTiming()
    latency = latency or LatencyConfig()

    schedule = lower_plan(model, flags)
    cycles = []
    total = predict_latency(schedule, dram, latency, issue_cycles=cycles).total
    logging.info("Lowered %s with %s: %s instructions, %s cycles predicted", model.name, flags.name,
                 schedule.instruction_count(), total)
    return replace(schedule, issue_cycles=tuple(cycles))
