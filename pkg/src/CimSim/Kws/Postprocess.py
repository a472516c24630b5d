#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import numpy as np

from ..Compiler.Model import ModelError
from ..Compiler.Schedule import FmBuffer
from ..Core.Core import FM_SRAM_BASE, WEIGHT_SRAM_BASE
from ..Isa.Instruction import BaseOp, Instruction, load_immediate
from ..Memory.Sram import SramBank

# Class scores land at weight SRAM word 0, the predicted class right after.
SCORES_WORD = 0

_ROW_PTR = 10
_COUNT = 11
_ROW_END = 12
_VALUE = 14
_SCORES = 15
_BEST_SCORE = 16
_BEST_CLASS = 17
_TEMP = 18

MAX_CLASSES = 511


def gap_golden(bits, n_classes: int) -> np.ndarray:
    """
    Global average pooling of a binary feature map: the popcount of each of
    the first `n_classes` channels over time.

    :param numpy.ndarray bits: `[rows x channels]` activation bits.

    :rtype: numpy.ndarray
    :return: int64 score per class.
    """
    bits = np.asarray(bits)
    if not 1 <= n_classes <= bits.shape[1]:
        raise ModelError("Cannot score {} classes from {} channels.".format(n_classes, bits.shape[1]))
    return bits[:, :n_classes].astype(np.int64).sum(axis=0)


def predict_class(scores) -> int:
    """
    Index of the highest score; ties go to the lowest index.
    """
    return int(np.argmax(np.asarray(scores)))


def gap_program(buffer: FmBuffer, n_classes: int) -> list[Instruction]:
    """
    RV32I global average pooling and argmax over a resident feature map.
    Scores are stored from :data:`SCORES_WORD` in weight SRAM, followed by
    the predicted class.

    :param FmBuffer buffer: Final feature map in FM SRAM.
    :param int n_classes: Number of leading channels to score.

    :rtype: list(Instruction)
    :return: Straight-line class loops followed by the argmax.
    """
    if not 1 <= n_classes <= min(buffer.channels, MAX_CLASSES):
        raise ModelError("Cannot score {} classes from {} channels.".format(n_classes, buffer.channels))

    scores_address = WEIGHT_SRAM_BASE + 4 * SCORES_WORD
    stride = 4 * buffer.row_stride

    insts = load_immediate(_SCORES, scores_address)
    for channel in range(n_classes):
        first = FM_SRAM_BASE + 4 * buffer.word(0, channel // 32)
        insts += load_immediate(_ROW_PTR, first)
        insts += load_immediate(_ROW_END, first + stride * buffer.rows)
        insts.append(Instruction(BaseOp.ADDI, rd=_COUNT, rs1=0, imm=0))

        loop = len(insts)
        insts.append(Instruction(BaseOp.LW, rd=_VALUE, rs1=_ROW_PTR, imm=0))
        if channel % 32:
            insts.append(Instruction(BaseOp.SRLI, rd=_VALUE, rs1=_VALUE, imm=channel % 32))
        insts.append(Instruction(BaseOp.ANDI, rd=_VALUE, rs1=_VALUE, imm=1))
        insts.append(Instruction(BaseOp.ADD, rd=_COUNT, rs1=_COUNT, rs2=_VALUE))
        insts.append(Instruction(BaseOp.ADDI, rd=_ROW_PTR, rs1=_ROW_PTR, imm=stride))
        insts.append(Instruction(BaseOp.BNE, rs1=_ROW_PTR, rs2=_ROW_END, imm=4 * (loop - len(insts))))
        insts.append(Instruction(BaseOp.SW, rs1=_SCORES, rs2=_COUNT, imm=4 * channel))

    insts.append(Instruction(BaseOp.LW, rd=_BEST_SCORE, rs1=_SCORES, imm=0))
    insts.append(Instruction(BaseOp.ADDI, rd=_BEST_CLASS, rs1=0, imm=0))
    for channel in range(1, n_classes):
        insts.append(Instruction(BaseOp.LW, rd=_VALUE, rs1=_SCORES, imm=4 * channel))
        insts.append(Instruction(BaseOp.BGE, rs1=_BEST_SCORE, rs2=_VALUE, imm=12))
        insts.append(Instruction(BaseOp.ADDI, rd=_BEST_SCORE, rs1=_VALUE, imm=0))
        insts.append(Instruction(BaseOp.ADDI, rd=_BEST_CLASS, rs1=0, imm=channel))

    insts += load_immediate(_TEMP, scores_address + 4 * n_classes)
    insts.append(Instruction(BaseOp.SW, rs1=_TEMP, rs2=_BEST_CLASS, imm=0))
    return insts


def read_scores(weight_sram: SramBank, n_classes: int) -> tuple[np.ndarray, int]:
    """
    Reads back what :func:`gap_program` stored.

    :rtype: (numpy.ndarray, int)
    :return: Scores and the predicted class.
    """
    words = weight_sram.read_words(SCORES_WORD, n_classes + 1).astype(np.int64)
    return words[:n_classes], int(words[n_classes])
