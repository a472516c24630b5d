#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from dataclasses import dataclass

import numpy as np

from .Sram import MemoryBoundsError


@dataclass(frozen=True)
class DramTiming:
    """
    DRAM timing parameters, in core cycles.
    """

    latency_first_word: int = 30
    per_burst_word: int = 1
    burst_words: int = 16

    def fetch_cost(self, n_words: int) -> int:
        """
        Cycles to stream `n_words` from DRAM. The first word pays the access
        latency; transfers are rounded up to whole bursts and every further
        word of those bursts streams at `per_burst_word` cycles.

        :param int n_words: Words to transfer, >= 0.

        :rtype: int
        :return: Transfer cost in cycles; 0 for an empty transfer.
        """
        if n_words < 0:
            raise ValueError("Cannot fetch a negative number of words ({}).".format(n_words))
        if n_words == 0:
            return 0

        bursts = -(-n_words // self.burst_words)
        return self.latency_first_word + (bursts * self.burst_words - 1) * self.per_burst_word


class Dram:
    """
    Off-chip DRAM: a flat word store plus its timing model.
    """

    def __init__(self, timing: DramTiming, size_words: int):
        self.name = "dram"
        self.timing = timing
        self.words: np.ndarray = np.zeros(size_words, dtype="<u4")

    def __len__(self) -> int:
        return len(self.words)

    def fetch_cost(self, n_words: int) -> int:
        return self.timing.fetch_cost(n_words)

    def _check_words(self, address: int, count: int):
        if address < 0 or count < 0 or address + count > len(self.words):
            raise MemoryBoundsError("DRAM access of {} words at {} exceeds {} words.".format(count, address, len(self.words)))

    def read_words(self, address: int, count: int) -> np.ndarray:
        self._check_words(address, count)
        return self.words[address:address + count].copy()

    def write_words(self, address: int, values) -> None:
        values = np.asarray(values, dtype=np.int64) & 0xFFFFFFFF
        self._check_words(address, len(values))
        self.words[address:address + len(values)] = values
