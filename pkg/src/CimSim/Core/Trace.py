#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from dataclasses import dataclass


@dataclass(frozen=True)
class TraceEntry:
    """
    One retired instruction: the cycle it issued on, its address, its
    disassembly, the cycles it consumed and its visible effects.
    """

    cycle: int
    pc: int
    text: str
    cycles: int
    effects: tuple[str, ...] = ()

    def format(self) -> str:
        line = "{} {:08x} {}".format(self.cycle, self.pc, self.text)
        if self.effects:
            line += " [{}]".format("; ".join(self.effects))
        return line


def write_trace(path: str, entries) -> None:
    with open(path, "w") as f:
        for entry in entries:
            f.write(entry.format() + "\n")
