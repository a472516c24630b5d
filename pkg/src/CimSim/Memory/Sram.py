#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import numpy as np


class MemoryAccessError(Exception):
    """
    Base exception for failed memory accesses.
    """

    pass


class MemoryBoundsError(MemoryAccessError):
    """
    Exception thrown when an access falls outside a memory bank.
    """

    pass


class MemoryAlignmentError(MemoryAccessError):
    """
    Exception thrown when an access is not aligned to its access width.
    """

    pass


class SramBank:
    """
    Word-addressed SRAM bank with a 32-bit core port and an optional wide
    port. Both ports, and byte accesses from the core, share one backing
    array, so every view of the bank is coherent.
    """

    WORD_BITS = 32

    def __init__(self, name: str, size_bits: int, wide_port_bits: int = 32):
        if size_bits % self.WORD_BITS or wide_port_bits % self.WORD_BITS:
            raise ValueError("SRAM bank \"{}\" sizes must be multiples of 32 bits.".format(name))

        self.name = name
        self.size_bits = size_bits
        self.wide_port_bits = wide_port_bits
        self.words: np.ndarray = np.zeros(size_bits // self.WORD_BITS, dtype="<u4")
        self.bytes: np.ndarray = self.words.view(np.uint8)

    def __len__(self) -> int:
        return len(self.words)

    def word_count(self) -> int:
        return len(self.words)

    def _check_words(self, address: int, count: int):
        if address < 0 or count < 0 or address + count > len(self.words):
            raise MemoryBoundsError("{} access of {} words at word address {} exceeds {} words.".format(
                self.name, count, address, len(self.words)))

    def read_word(self, address: int) -> int:
        self._check_words(address, 1)
        return int(self.words[address])

    def write_word(self, address: int, value: int) -> None:
        self._check_words(address, 1)
        self.words[address] = value & 0xFFFFFFFF

    def read_words(self, address: int, count: int) -> np.ndarray:
        self._check_words(address, count)
        return self.words[address:address + count].copy()

    def write_words(self, address: int, values) -> None:
        values = np.asarray(values, dtype=np.int64) & 0xFFFFFFFF
        self._check_words(address, len(values))
        self.words[address:address + len(values)] = values

    def read_wide(self, address: int) -> np.ndarray:
        """
        Reads one wide-port line starting at a word address aligned to the
        wide-port width.
        """
        width = self.wide_port_bits // self.WORD_BITS
        if address % width:
            raise MemoryAlignmentError("{} wide access at word address {} is not {}-word aligned.".format(
                self.name, address, width))
        return self.read_words(address, width)

    def write_wide(self, address: int, values) -> None:
        width = self.wide_port_bits // self.WORD_BITS
        if address % width or len(values) != width:
            raise MemoryAlignmentError("{} wide write at word address {} must be {} aligned words.".format(
                self.name, address, width))
        self.write_words(address, values)

    def load(self, offset: int, size: int, signed: bool = False) -> int:
        """
        Core-side load of 1, 2 or 4 bytes at a byte offset into the bank.
        """
        if offset % size:
            raise MemoryAlignmentError("{} {}-byte load at byte offset {} is misaligned.".format(self.name, size, offset))
        if offset < 0 or offset + size > len(self.bytes):
            raise MemoryBoundsError("{} load at byte offset {} is out of bounds.".format(self.name, offset))

        value = int.from_bytes(self.bytes[offset:offset + size].tobytes(), "little", signed=signed)
        return value & 0xFFFFFFFF

    def store(self, offset: int, size: int, value: int) -> None:
        """
        Core-side store of the low 1, 2 or 4 bytes of a value.
        """
        self.check_store(offset, size)
        self.bytes[offset:offset + size] = np.frombuffer((value & ((1 << (8 * size)) - 1)).to_bytes(size, "little"),
                                                         dtype=np.uint8)

    def check_store(self, offset: int, size: int) -> None:
        if offset % size:
            raise MemoryAlignmentError("{} {}-byte store at byte offset {} is misaligned.".format(self.name, size, offset))
        if offset < 0 or offset + size > len(self.bytes):
            raise MemoryBoundsError("{} store at byte offset {} is out of bounds.".format(self.name, offset))
