#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#
#   Keyword-spotting front end: first-order high-pass filter, per-channel
#   fixed-point affine and binarization, as a host function and as RV32I code.
#

import numpy as np

from ..Compiler.Lowering import FM_WORDS
from ..Compiler.Model import ModelError
from ..Config import KwsConfig
from ..Core.Core import FM_SRAM_BASE
from ..Isa.Instruction import BaseOp, Instruction, load_immediate
from ..Memory.Sram import SramBank

Q15_SHIFT = 15

# Register use of the generated front-end program.
_SAMPLE_PTR = 10
_OUT_PTR = 11
_SAMPLE_END = 12
_PREVIOUS = 13
_SAMPLE = 14
_FILTERED = 15
_PRODUCT = 16
_TEMP = 17
_WORD = 18
_THRESHOLD = 19
_BIT = 20


def preprocess_golden(samples, params: KwsConfig) -> np.ndarray:
    """
    Reference fixed-point front end.

    `y[n] = x[n] - ((alpha * x[n-1]) >> 15)` with `x[-1] = 0`, then per
    channel `z = ((y * scale) >> 15) + shift`, and the activation bit is
    `z > quant_threshold`. Shifts are arithmetic.

    :param samples: Signed 16-bit PCM samples.
    :param KwsConfig params: Filter, affine and threshold parameters.

    :rtype: numpy.ndarray
    :return: uint8 matrix `[len(samples) x input_channels]` of activation bits.
    """
    x = np.asarray(samples, dtype=np.int64)
    previous = np.concatenate([np.zeros(1, dtype=np.int64), x[:-1]])
    y = x - ((params.hp_alpha_q15 * previous) >> Q15_SHIFT)

    scale = np.asarray(params.bn_scale_q15, dtype=np.int64)
    shift = np.asarray(params.bn_shift, dtype=np.int64)
    z = ((y[:, None] * scale[None, :]) >> Q15_SHIFT) + shift[None, :]
    return (z > params.quant_threshold).astype(np.uint8)


def audio_word(length: int) -> int:
    """
    First FM SRAM word of the raw audio, packed two samples per word at the
    top of the bank.
    """
    return FM_WORDS - (length + 1) // 2


def place_audio(fm_sram: SramBank, samples) -> None:
    samples = np.asarray(samples, dtype="<i2")
    if len(samples) > audio_word(len(samples)):
        raise ModelError("Audio frame of {} samples does not fit FM SRAM next to its features.".format(len(samples)))

    offset = audio_word(len(samples)) * 4
    fm_sram.bytes[offset:offset + 2 * len(samples)] = samples.view(np.uint8)


def multiply_constant(rd: int, rs: int, constant: int, temp: int) -> list[Instruction]:
    """
    Shift-and-add multiply of a register by a constant, for a core without
    the M extension. `rd`, `rs` and `temp` must be distinct.
    """
    magnitude = abs(constant)
    if not magnitude:
        return [Instruction(BaseOp.ADDI, rd=rd, rs1=0, imm=0)]

    insts = []
    shifts = [bit for bit in range(magnitude.bit_length()) if magnitude >> bit & 1]
    for bit in shifts:
        target = rd if not insts else temp
        if bit:
            insts.append(Instruction(BaseOp.SLLI, rd=target, rs1=rs, imm=bit))
        else:
            insts.append(Instruction(BaseOp.ADDI, rd=target, rs1=rs, imm=0))
        if target == temp:
            insts.append(Instruction(BaseOp.ADD, rd=rd, rs1=rd, rs2=temp))

    if constant < 0:
        insts.append(Instruction(BaseOp.SUB, rd=rd, rs1=0, rs2=rd))
    return insts


def _add_constant(rd: int, value: int, temp: int) -> list[Instruction]:
    if -2048 <= value <= 2047:
        return [Instruction(BaseOp.ADDI, rd=rd, rs1=rd, imm=value)] if value else []
    return load_immediate(temp, value) + [Instruction(BaseOp.ADD, rd=rd, rs1=rd, rs2=temp)]


def preprocess_program(length: int, params: KwsConfig) -> list[Instruction]:
    """
    RV32I front end. Reads `length` samples from :func:`audio_word` and
    writes one packed feature word per sample from FM SRAM word 0, channel
    `c` in bit `c`. Its output matches :func:`preprocess_golden` bit for bit.

    :rtype: list(Instruction)
    :return: Straight-line setup followed by the per-sample loop.
    """
    if length < 1:
        raise ModelError("Audio frame must hold at least one sample.")

    audio_address = FM_SRAM_BASE + 4 * audio_word(length)
    insts = []
    insts += load_immediate(_SAMPLE_PTR, audio_address)
    insts += load_immediate(_OUT_PTR, FM_SRAM_BASE)
    insts += load_immediate(_SAMPLE_END, audio_address + 2 * length)
    insts += [Instruction(BaseOp.ADDI, rd=_PREVIOUS, rs1=0, imm=0)]
    insts += load_immediate(_THRESHOLD, params.quant_threshold)

    loop = len(insts)
    insts.append(Instruction(BaseOp.LH, rd=_SAMPLE, rs1=_SAMPLE_PTR, imm=0))
    insts += multiply_constant(_PRODUCT, _PREVIOUS, params.hp_alpha_q15, _TEMP)
    insts.append(Instruction(BaseOp.SRAI, rd=_PRODUCT, rs1=_PRODUCT, imm=Q15_SHIFT))
    insts.append(Instruction(BaseOp.SUB, rd=_FILTERED, rs1=_SAMPLE, rs2=_PRODUCT))
    insts.append(Instruction(BaseOp.ADDI, rd=_PREVIOUS, rs1=_SAMPLE, imm=0))
    insts.append(Instruction(BaseOp.ADDI, rd=_WORD, rs1=0, imm=0))

    for channel, (scale, shift) in enumerate(zip(params.bn_scale_q15, params.bn_shift)):
        insts += multiply_constant(_PRODUCT, _FILTERED, scale, _TEMP)
        insts.append(Instruction(BaseOp.SRAI, rd=_PRODUCT, rs1=_PRODUCT, imm=Q15_SHIFT))
        insts += _add_constant(_PRODUCT, shift, _TEMP)
        insts.append(Instruction(BaseOp.SLT, rd=_BIT, rs1=_THRESHOLD, rs2=_PRODUCT))
        if channel:
            insts.append(Instruction(BaseOp.SLLI, rd=_BIT, rs1=_BIT, imm=channel))
        insts.append(Instruction(BaseOp.OR, rd=_WORD, rs1=_WORD, rs2=_BIT))

    insts.append(Instruction(BaseOp.SW, rs1=_OUT_PTR, rs2=_WORD, imm=0))
    insts.append(Instruction(BaseOp.ADDI, rd=_SAMPLE_PTR, rs1=_SAMPLE_PTR, imm=2))
    insts.append(Instruction(BaseOp.ADDI, rd=_OUT_PTR, rs1=_OUT_PTR, imm=4))
    insts.append(Instruction(BaseOp.BEQ, rs1=_SAMPLE_PTR, rs2=_SAMPLE_END, imm=8))
    insts.append(Instruction(BaseOp.JAL, rd=0, imm=4 * (loop - len(insts))))
    return insts
