#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from dataclasses import dataclass, field

from ..Config import LatencyConfig
from ..Core.Latency import base_latency
from ..Memory.Dram import DramTiming
from .Schedule import DmaStartItem, DmaWaitItem, Phase, Schedule


@dataclass
class LatencyBreakdown:
    """
    Cycles charged to each phase. Stalls are charged to the instruction
    that waits through them, so overlapped work is counted once and the
    phases always sum to the total.
    """

    cycles: dict[Phase, int] = field(default_factory=lambda: {phase: 0 for phase in Phase})

    def add(self, phase: Phase, cycles: int) -> None:
        self.cycles[phase] += cycles

    @property
    def total(self) -> int:
        return sum(self.cycles.values())

    def __getitem__(self, phase: Phase) -> int:
        return self.cycles[phase]

    def as_dict(self) -> dict[str, int]:
        values = {phase.value: cycles for phase, cycles in self.cycles.items()}
        values["total"] = self.total
        return values

    def __eq__(self, other) -> bool:
        return isinstance(other, LatencyBreakdown) and self.cycles == other.cycles

    def __str__(self) -> str:
        return ", ".join("{}={}".format(name, value) for name, value in self.as_dict().items())


def predict_latency(schedule: Schedule, dram: DramTiming, latency: LatencyConfig | None = None,
                    issue_cycles: list[int] | None = None) -> LatencyBreakdown:
    """
    Statically predicts the cycle count of a schedule by walking its items
    with the core's timing rules: base latencies plus the blocking uDMA
    wait.

    :param Schedule schedule: Schedule to estimate.
    :param DramTiming dram: DRAM timing the uDMA streams with.
    :param LatencyConfig latency: Core latency table, defaults when None.
    :param list issue_cycles: Optional list receiving each instruction's issue cycle.

    :rtype: LatencyBreakdown
    :return: Per-phase cycles; the total equals the simulated cycle count.
    """
    latency = latency or LatencyConfig()
    breakdown = LatencyBreakdown()

    t = 0
    dma_done_at = 0

    for item in schedule.items:
        instructions = item.instructions
        if not instructions:
            continue

        for inst in instructions:
            if issue_cycles is not None:
                issue_cycles.append(t)

            stall = 0
            if isinstance(item, DmaWaitItem):
                stall = max(0, dma_done_at - t)

            cycles = stall + base_latency(inst, False, latency)
            breakdown.add(item.phase, cycles)
            t += cycles

        if isinstance(item, DmaStartItem):
            dma_done_at = t + max(dram.fetch_cost(item.length) + item.length, 1)

    return breakdown
