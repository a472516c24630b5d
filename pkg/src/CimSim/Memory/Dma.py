#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
from dataclasses import dataclass
from enum import Enum, IntEnum

from .Dram import Dram


class DmaBusyError(Exception):
    """
    Exception thrown when a transfer is started while another one is still
    in flight.
    """

    pass


class DmaState(Enum):
    IDLE = 0
    BUSY = 1
    DONE = 2


class DmaDirection(IntEnum):
    """
    Transfer directions, as written to the uDMA control register.
    """

    DRAM_TO_FM = 1
    DRAM_TO_WEIGHT = 2
    FM_TO_DRAM = 3


# uDMA register offsets from the peripheral base address.
REG_SRC = 0x00
REG_DST = 0x04
REG_LEN = 0x08
REG_CTRL = 0x0C
REG_WAIT = 0x10
REG_STATUS = 0x14


@dataclass(frozen=True)
class DmaTransfer:
    direction: DmaDirection
    src: int
    dst: int
    length: int
    total_cycles: int


class DmaEngine:
    """
    Single-channel micro-DMA between DRAM and the on-chip SRAM banks. It
    advances only when the simulation loop ticks it, once per core cycle.
    """

    def __init__(self, dram: Dram, fm_sram, weight_sram):
        self.dram = dram
        self.fm_sram = fm_sram
        self.weight_sram = weight_sram

        self.state: DmaState = DmaState.IDLE
        self.remaining: int = 0
        self.transfer: DmaTransfer | None = None
        self.completed: int = 0

        self.registers = {REG_SRC: 0, REG_DST: 0, REG_LEN: 0}

    def busy(self) -> bool:
        return self.state == DmaState.BUSY

    def transfer_cycles(self, length: int) -> int:
        """
        Total cycles of a transfer: the DRAM streaming cost plus one cycle per
        word written into the destination.
        """
        return self.dram.fetch_cost(length) + length

    def _banks(self, direction: DmaDirection):
        if direction == DmaDirection.DRAM_TO_FM:
            return self.dram, self.fm_sram
        if direction == DmaDirection.DRAM_TO_WEIGHT:
            return self.dram, self.weight_sram
        return self.fm_sram, self.dram

    def check_start(self, direction: int, src: int, dst: int, length: int) -> DmaDirection:
        """
        Validates a transfer without starting it.
        """
        if self.busy():
            raise DmaBusyError("DMA start while a transfer of {} words is in flight.".format(self.transfer.length))
        try:
            direction = DmaDirection(direction)
        except ValueError:
            raise ValueError("Unknown DMA direction {}.".format(direction))

        source, destination = self._banks(direction)
        source._check_words(src, length)
        destination._check_words(dst, length)
        return direction

    def start(self, direction: int, src: int, dst: int, length: int) -> DmaTransfer:
        """
        Starts a transfer. The engine stays busy for
        :func:`~DmaEngine.transfer_cycles` ticks (at least one), and the data
        lands in the destination when it completes.

        :rtype: DmaTransfer
        :return: Description of the started transfer.
        """
        direction = self.check_start(direction, src, dst, length)

        total = self.transfer_cycles(length)
        self.transfer = DmaTransfer(direction, src, dst, length, total)
        self.remaining = max(total, 1)
        self.state = DmaState.BUSY

        logging.debug("DMA %s start: %s words from %s to %s, %s cycles", direction.name, length, src, dst, total)
        return self.transfer

    def tick(self) -> DmaState:
        """
        Advances the engine by one cycle.
        """
        return self.advance(1)

    def advance(self, cycles: int) -> DmaState:
        """
        Advances the engine by a number of cycles.
        """
        if self.state != DmaState.BUSY or cycles <= 0:
            return self.state

        if cycles < self.remaining:
            self.remaining -= cycles
            return self.state

        self.remaining = 0
        self._complete()
        return self.state

    def _complete(self):
        transfer = self.transfer
        source, destination = self._banks(transfer.direction)
        destination.write_words(transfer.dst, source.read_words(transfer.src, transfer.length))

        self.state = DmaState.DONE
        self.completed += 1
        logging.debug("DMA %s done: %s words", transfer.direction.name, transfer.length)

    def cycles_until_idle(self) -> int:
        return self.remaining if self.busy() else 0

    def write_register(self, offset: int, value: int) -> None:
        """
        Memory-mapped register write. Writing a direction to CTRL starts a
        transfer from the latched SRC, DST and LEN registers.
        """
        if offset == REG_CTRL:
            self.start(value, self.registers[REG_SRC], self.registers[REG_DST], self.registers[REG_LEN])
        elif offset in self.registers:
            self.registers[offset] = value & 0xFFFFFFFF
        else:
            raise ValueError("No writable DMA register at offset 0x{:02X}.".format(offset))

    def check_register_write(self, offset: int, value: int) -> None:
        if offset == REG_CTRL:
            self.check_start(value, self.registers[REG_SRC], self.registers[REG_DST], self.registers[REG_LEN])
        elif offset not in self.registers:
            raise ValueError("No writable DMA register at offset 0x{:02X}.".format(offset))

    def check_register_read(self, offset: int) -> None:
        if offset not in (REG_STATUS, REG_WAIT) and offset not in self.registers:
            raise ValueError("No readable DMA register at offset 0x{:02X}.".format(offset))

    def read_register(self, offset: int) -> int:
        if offset == REG_STATUS or offset == REG_WAIT:
            return self.state.value
        if offset in self.registers:
            return self.registers[offset]
        raise ValueError("No readable DMA register at offset 0x{:02X}.".format(offset))
