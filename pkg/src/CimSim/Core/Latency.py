#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from ..Config import LatencyConfig
from ..Isa.Instruction import BaseOp, CimOp, Instruction


def base_latency(inst: Instruction, taken: bool, latency: LatencyConfig) -> int:
    """
    Issue latency of an instruction in the two-stage core, before any stall.
    Taken control transfers pay the refill bubble.

    :param Instruction inst: Executed instruction.
    :param bool taken: Whether the instruction redirected the PC.
    :param LatencyConfig latency: Latency table.

    :rtype: int
    :return: Cycles consumed when no stall applies.
    """
    op = inst.op
    if isinstance(op, CimOp):
        return latency.cim
    if op in (BaseOp.JAL, BaseOp.JALR) or op.is_branch:
        return latency.branch_taken if taken else latency.branch_not_taken
    if op.is_load:
        return latency.load
    if op.is_store:
        return latency.store
    return latency.alu
