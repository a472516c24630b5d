#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

from ..Config import LatencyConfig
from ..Isa.Instruction import BaseOp, CimOp, Format, Instruction, IsaError, decode, disassemble, is_halt, to_signed32
from ..Macro.CimMacro import CimMacro, TernaryCodeError, unpack_ternary
from ..Memory.Dma import DmaBusyError, DmaEngine, REG_WAIT
from ..Memory.Sram import MemoryAccessError, MemoryAlignmentError, SramBank
from .Latency import base_latency
from .Trace import TraceEntry


IMEM_BASE = 0x00000000
FM_SRAM_BASE = 0x10000000
WEIGHT_SRAM_BASE = 0x20000000
DMA_BASE = 0x30000000
REGION_BYTES = 0x10000000

MASK32 = 0xFFFFFFFF


class TrapCause(Enum):
    ILLEGAL_INSTRUCTION = "illegal instruction"
    MISALIGNED_FETCH = "misaligned fetch"
    MISALIGNED_ACCESS = "misaligned access"
    ACCESS_FAULT = "access fault"
    INVALID_WEIGHT_CODE = "invalid weight code"
    DMA_BUSY = "dma busy"
    ENVIRONMENT_CALL = "environment call"
    BREAKPOINT = "breakpoint"


class CoreTrap(Exception):
    """
    Exception thrown when an instruction traps. The machine state is left
    exactly as it was before the trapping instruction.
    """

    def __init__(self, cause: TrapCause, pc: int, detail: str = ""):
        super().__init__("Trap at pc 0x{:08x}: {}{}".format(pc, cause.value, ": " + detail if detail else ""))
        self.cause = cause
        self.pc = pc
        self.detail = detail


class SimulationTimeout(Exception):
    """
    Exception thrown when a program runs past its cycle budget without
    halting.
    """

    def __init__(self, cycles: int):
        super().__init__("Program did not halt within {} cycles.".format(cycles))
        self.cycles = cycles


@dataclass
class MachineState:
    """
    Architectural state of the core: program counter, register file and
    cycle counter.
    """

    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * 32)
    cycle: int = 0
    halted: bool = False
    retired: int = 0


@dataclass(frozen=True)
class ExecResult:
    """
    Outcome of one retired instruction. `cycles_consumed` includes any stall
    the instruction waited through.
    """

    cycles_consumed: int
    stall_cycles: int = 0
    taken: bool = False
    effects: tuple[str, ...] = ()


class Core:
    """
    Two-stage in-order RV32I core with the CIM-type extension. CIM
    instructions take their operands from FM SRAM and weight SRAM addresses;
    registers only supply base addresses.
    """

    def __init__(self, imem: SramBank, fm_sram: SramBank, weight_sram: SramBank, macro: CimMacro, dma: DmaEngine,
                 latency: LatencyConfig, state: MachineState | None = None):
        self.imem = imem
        self.fm_sram = fm_sram
        self.weight_sram = weight_sram
        self.macro = macro
        self.dma = dma
        self.latency = latency
        self.state: MachineState = state or MachineState()

        self.record_effects: bool = False
        self._decoded: dict[int, Instruction] = {}

    def load_program(self, words, address: int = 0) -> None:
        """
        Writes a program image into instruction memory and resets the PC to
        its first word.
        """
        self.imem.write_words(address // 4, list(words))
        self._decoded.clear()
        self.state.pc = address
        self.state.halted = False

    def _trap(self, cause: TrapCause, detail: str = ""):
        raise CoreTrap(cause, self.state.pc, detail)

    def fetch(self) -> Instruction:
        pc = self.state.pc
        if pc % 4:
            self._trap(TrapCause.MISALIGNED_FETCH, "pc is not word aligned")
        index = pc // 4
        if index >= len(self.imem.words):
            self._trap(TrapCause.ACCESS_FAULT, "fetch outside instruction memory")

        word = int(self.imem.words[index])
        inst = self._decoded.get(word)
        if inst is None:
            try:
                inst = decode(word)
            except IsaError as error:
                self._trap(TrapCause.ILLEGAL_INSTRUCTION, str(error))
            self._decoded[word] = inst
        return inst

    def _resolve(self, address: int, size: int, store: bool):
        region, offset = divmod(address & MASK32, REGION_BYTES)
        if region == IMEM_BASE // REGION_BYTES:
            if store:
                self._trap(TrapCause.ACCESS_FAULT, "store to instruction memory at 0x{:08x}".format(address))
            bank = self.imem
        elif region == FM_SRAM_BASE // REGION_BYTES:
            bank = self.fm_sram
        elif region == WEIGHT_SRAM_BASE // REGION_BYTES:
            bank = self.weight_sram
        elif region == DMA_BASE // REGION_BYTES:
            if size != 4 or offset % 4:
                self._trap(TrapCause.MISALIGNED_ACCESS, "DMA registers need aligned word access")
            return None, offset
        else:
            self._trap(TrapCause.ACCESS_FAULT, "no memory at 0x{:08x}".format(address))

        if offset % size:
            self._trap(TrapCause.MISALIGNED_ACCESS, "{}-byte access at 0x{:08x}".format(size, address))
        if offset + size > len(bank.bytes):
            self._trap(TrapCause.ACCESS_FAULT, "{} access at 0x{:08x} out of bounds".format(bank.name, address))
        return bank, offset

    def step(self) -> ExecResult:
        """
        Fetches, decodes and executes one instruction.

        :rtype: ExecResult
        :return: Cycles consumed and effects of the retired instruction.
        """
        state = self.state
        if state.halted:
            raise RuntimeError("Cannot step a halted core.")

        inst = self.fetch()
        op = inst.op

        if op == CimOp.CONV:
            return self.exec_cim_conv(inst)
        if op == CimOp.READ:
            return self.exec_cim_read(inst)
        if op == CimOp.WRITE:
            return self.exec_cim_write(inst)
        return self._exec_base(inst)

    def _retire(self, cycles: int, stall: int = 0, next_pc: int | None = None, taken: bool = False,
                effects: tuple[str, ...] = ()) -> ExecResult:
        state = self.state
        state.cycle += cycles
        state.pc = (state.pc + 4 if next_pc is None else next_pc) & MASK32
        state.retired += 1
        state.regs[0] = 0
        return ExecResult(cycles, stall, taken, effects)

    def _cim_operands(self, inst: Instruction) -> tuple[int, int]:
        regs = self.state.regs
        return to_signed32(regs[inst.rs1]) + inst.imm_s, to_signed32(regs[inst.rs2]) + inst.imm_d

    def exec_cim_conv(self, inst: Instruction) -> ExecResult:
        """
        Shifts one FM SRAM word into the macro input buffer, runs the MAC and
        sense step, and writes the packed outputs back to FM SRAM.
        """
        source, destination = self._cim_operands(inst)
        out_words = self.macro.output_words()
        fm_words = len(self.fm_sram.words)
        if min(max(source, 0), fm_words - 1) != source:
            self._trap(TrapCause.ACCESS_FAULT, "cim.conv source word {} outside FM SRAM".format(source))
        if destination < 0 or destination + out_words > fm_words:
            self._trap(TrapCause.ACCESS_FAULT, "cim.conv destination words {}..{} outside FM SRAM".format(
                destination, destination + out_words))

        cycles = self.latency.cim
        self.dma.advance(cycles)

        self.macro.shift_in(self.fm_sram.read_word(source))
        output = self.macro.output_to_words(self.macro.mac_and_sense())
        self.fm_sram.write_words(destination, output)

        effects = ()
        if self.record_effects:
            effects = ("fm[{}]<-conv(fm[{}])".format(destination, source),)
        return self._retire(cycles, effects=effects)

    def exec_cim_read(self, inst: Instruction) -> ExecResult:
        """
        Copies one 32-weight macro segment, packed into two words, to weight
        SRAM. The macro is not modified.
        """
        address, destination = self._cim_operands(inst)
        if min(max(address, 0), self.macro.segment_count() - 1) != address:
            self._trap(TrapCause.ACCESS_FAULT, "cim.read macro address {} out of range".format(address))
        if destination < 0 or destination + 2 > len(self.weight_sram.words):
            self._trap(TrapCause.ACCESS_FAULT, "cim.read destination word {} outside weight SRAM".format(destination))

        cycles = self.latency.cim
        self.dma.advance(cycles)

        self.weight_sram.write_words(destination, self.macro.read_segment(address))

        effects = ("wsram[{}]<-macro[{}]".format(destination, address),) if self.record_effects else ()
        return self._retire(cycles, effects=effects)

    def exec_cim_write(self, inst: Instruction) -> ExecResult:
        """
        Writes one packed 32-weight segment from weight SRAM into the macro.
        """
        source, address = self._cim_operands(inst)
        if source < 0 or source + 2 > len(self.weight_sram.words):
            self._trap(TrapCause.ACCESS_FAULT, "cim.write source word {} outside weight SRAM".format(source))
        if min(max(address, 0), self.macro.segment_count() - 1) != address:
            self._trap(TrapCause.ACCESS_FAULT, "cim.write macro address {} out of range".format(address))

        words = self.weight_sram.read_words(source, 2)
        try:
            values = unpack_ternary(words, first_index=source)
        except TernaryCodeError as error:
            self._trap(TrapCause.INVALID_WEIGHT_CODE, "weight SRAM word {}".format(error.word_index))

        cycles = self.latency.cim
        self.dma.advance(cycles)

        column, row_base = self.macro.segment_location(address)
        self.macro.write_weights(row_base, column, values)

        effects = ("macro[{}]<-wsram[{}]".format(address, source),) if self.record_effects else ()
        return self._retire(cycles, effects=effects)

    def _exec_base(self, inst: Instruction) -> ExecResult:
        state = self.state
        regs = state.regs
        op = inst.op
        pc = state.pc
        rs1 = regs[inst.rs1]
        rs2 = regs[inst.rs2]
        imm = inst.imm

        if op.is_load:
            return self._exec_load(inst, (rs1 + imm) & MASK32)
        if op.is_store:
            return self._exec_store(inst, (rs1 + imm) & MASK32, rs2)

        next_pc = None
        taken = False
        value = None

        if op == BaseOp.LUI:
            value = imm
        elif op == BaseOp.AUIPC:
            value = pc + imm
        elif op == BaseOp.JAL:
            value, next_pc, taken = pc + 4, pc + imm, True
        elif op == BaseOp.JALR:
            value, next_pc, taken = pc + 4, (rs1 + imm) & ~1, True
        elif op.is_branch:
            taken = self._branch_taken(op, rs1, rs2)
            if taken:
                next_pc = pc + imm
        elif op in (BaseOp.ECALL, BaseOp.EBREAK):
            self._trap(TrapCause.ENVIRONMENT_CALL if op == BaseOp.ECALL else TrapCause.BREAKPOINT)
        elif op == BaseOp.FENCE:
            pass
        else:
            value = self._alu(op, rs1, rs2 if op.format == Format.R else imm & MASK32)

        if next_pc is not None and next_pc % 4:
            self._trap(TrapCause.MISALIGNED_FETCH, "jump target 0x{:08x}".format(next_pc & MASK32))

        cycles = base_latency(inst, taken, self.latency)
        self.dma.advance(cycles)

        effects = ()
        if value is not None and inst.rd:
            regs[inst.rd] = value & MASK32
            if self.record_effects:
                effects = ("x{}=0x{:08x}".format(inst.rd, value & MASK32),)
        return self._retire(cycles, next_pc=next_pc, taken=taken, effects=effects)

    @staticmethod
    def _branch_taken(op: BaseOp, a: int, b: int) -> bool:
        if op == BaseOp.BEQ:
            return a == b
        if op == BaseOp.BNE:
            return a != b
        if op == BaseOp.BLT:
            return to_signed32(a) < to_signed32(b)
        if op == BaseOp.BGE:
            return to_signed32(a) >= to_signed32(b)
        if op == BaseOp.BLTU:
            return a < b
        return a >= b

    @staticmethod
    def _alu(op: BaseOp, a: int, b: int) -> int:
        shift = b & 0x1F
        if op in (BaseOp.ADD, BaseOp.ADDI):
            return a + b
        if op == BaseOp.SUB:
            return a - b
        if op in (BaseOp.SLL, BaseOp.SLLI):
            return a << shift
        if op in (BaseOp.SLT, BaseOp.SLTI):
            return int(to_signed32(a) < to_signed32(b))
        if op in (BaseOp.SLTU, BaseOp.SLTIU):
            return int(a < b)
        if op in (BaseOp.XOR, BaseOp.XORI):
            return a ^ b
        if op in (BaseOp.SRL, BaseOp.SRLI):
            return a >> shift
        if op in (BaseOp.SRA, BaseOp.SRAI):
            return to_signed32(a) >> shift
        if op in (BaseOp.OR, BaseOp.ORI):
            return a | b
        return a & b

    def _exec_load(self, inst: Instruction, address: int) -> ExecResult:
        op = inst.op
        size = {BaseOp.LB: 1, BaseOp.LBU: 1, BaseOp.LH: 2, BaseOp.LHU: 2}.get(op, 4)
        bank, offset = self._resolve(address, size, store=False)
        if bank is None:
            try:
                self.dma.check_register_read(offset)
            except ValueError as error:
                self._trap(TrapCause.ACCESS_FAULT, str(error))

        stall = self.dma.cycles_until_idle() if bank is None and offset == REG_WAIT else 0
        cycles = stall + self.latency.load
        self.dma.advance(cycles)

        if bank is None:
            value = self.dma.read_register(offset)
        else:
            try:
                value = bank.load(offset, size, signed=op in (BaseOp.LB, BaseOp.LH))
            except MemoryAccessError as error:
                self._trap(TrapCause.ACCESS_FAULT, str(error))

        effects = ()
        if inst.rd:
            self.state.regs[inst.rd] = value & MASK32
            if self.record_effects:
                effects = ("x{}=0x{:08x}".format(inst.rd, value & MASK32),)
        if stall and self.record_effects:
            effects += ("stall={}".format(stall),)
        return self._retire(cycles, stall, effects=effects)

    def _exec_store(self, inst: Instruction, address: int, value: int) -> ExecResult:
        op = inst.op
        size = {BaseOp.SB: 1, BaseOp.SH: 2}.get(op, 4)
        bank, offset = self._resolve(address, size, store=True)

        if bank is None:
            try:
                self.dma.check_register_write(offset, value)
            except DmaBusyError as error:
                self._trap(TrapCause.DMA_BUSY, str(error))
            except (ValueError, MemoryAccessError) as error:
                self._trap(TrapCause.ACCESS_FAULT, str(error))
        else:
            try:
                bank.check_store(offset, size)
            except MemoryAlignmentError as error:
                self._trap(TrapCause.MISALIGNED_ACCESS, str(error))
            except MemoryAccessError as error:
                self._trap(TrapCause.ACCESS_FAULT, str(error))

        cycles = self.latency.store
        self.dma.advance(cycles)

        if bank is None:
            self.dma.write_register(offset, value)
        else:
            bank.store(offset, size, value)

        effects = ("mem[0x{:08x}]=0x{:08x}".format(address, value & ((1 << (8 * size)) - 1)),) if self.record_effects else ()
        return self._retire(cycles, effects=effects)

    def at_halt(self) -> bool:
        """
        Indicates if the instruction at the PC is the halt convention.
        """
        return is_halt(self.fetch())

    def run(self, max_cycles: int, trace: bool = False,
            on_retire: Callable[[int, ExecResult], None] | None = None) -> tuple[MachineState, list[TraceEntry]]:
        """
        Steps the core until it reaches a jump-to-self, traps, or exceeds its
        cycle budget. The halting jump itself is not retired.

        :param int max_cycles: Cycle budget.
        :param bool trace: Record a trace entry per retired instruction.
        :param on_retire: Optional callback receiving (pc, ExecResult) per instruction.

        :rtype: (MachineState, list(TraceEntry))
        :return: Final state and the trace (empty unless requested).
        """
        state = self.state
        entries = []
        self.record_effects = trace

        while not state.halted:
            inst = self.fetch()
            if is_halt(inst):
                state.halted = True
                break
            if state.cycle >= max_cycles:
                raise SimulationTimeout(max_cycles)

            pc = state.pc
            cycle = state.cycle
            result = self.step()

            if on_retire is not None:
                on_retire(pc, result)
            if trace:
                entries.append(TraceEntry(cycle, pc, disassemble(inst), result.cycles_consumed, result.effects))

        logging.info("Core halted at pc 0x%08x after %s cycles, %s instructions", state.pc, state.cycle, state.retired)
        return state, entries
