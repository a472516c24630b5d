#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

import logging
import re
import struct

from .Instruction import (BaseOp, CimOp, Format, Instruction, IsaError, MNEMONICS, decode, disassemble, encode,
                          load_immediate, to_signed32)


class AssemblerError(Exception):
    """
    Exception thrown when assembly source cannot be assembled. Carries the
    1-based source line number the error was found on.
    """

    def __init__(self, line: int, message: str):
        super().__init__("line {}: {}".format(line, message))
        self.line = line


ABI_NAMES = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4, "t0": 5, "t1": 6, "t2": 7,
    "s0": 8, "fp": 8, "s1": 9, "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14,
    "a5": 15, "a6": 16, "a7": 17, "s2": 18, "s3": 19, "s4": 20, "s5": 21, "s6": 22,
    "s7": 23, "s8": 24, "s9": 25, "s10": 26, "s11": 27, "t3": 28, "t4": 29, "t5": 30,
    "t6": 31,
}

PSEUDO_OPS = ("nop", "li", "mv", "j", "beqz", "bnez", "halt", ".word")

_LABEL = re.compile(r"^([A-Za-z_.][\w.]*):")
_MEMORY_OPERAND = re.compile(r"^(-?\w+)\((\w+)\)$")


def _parse_register(token: str, line: int) -> int:
    token = token.strip().lower()
    if token in ABI_NAMES:
        return ABI_NAMES[token]
    if re.fullmatch(r"x\d+", token) and int(token[1:]) < 32:
        return int(token[1:])
    raise AssemblerError(line, "invalid register '{}'".format(token))


def _parse_int(token: str, line: int) -> int:
    try:
        return int(token.strip(), 0)
    except ValueError:
        raise AssemblerError(line, "invalid immediate '{}'".format(token))


class _Statement:
    def __init__(self, line: int, mnemonic: str, operands: list[str], address: int):
        self.line = line
        self.mnemonic = mnemonic
        self.operands = operands
        self.address = address


def _statement_size(mnemonic: str, operands: list[str], line: int) -> int:
    if mnemonic == "li":
        if len(operands) != 2:
            raise AssemblerError(line, "li expects 2 operands")
        return len(load_immediate(0, _parse_int(operands[1], line)))
    return 1


def _split_source(text: str) -> tuple[list[_Statement], dict[str, int]]:
    statements = []
    labels = {}
    address = 0

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()

        while True:
            match = _LABEL.match(line)
            if not match:
                break
            name = match.group(1)
            if name in labels:
                raise AssemblerError(line_number, "duplicate label '{}'".format(name))
            labels[name] = address
            line = line[match.end():].strip()

        if not line:
            continue

        parts = line.split(None, 1)
        mnemonic = parts[0].lower()
        operands = [o.strip() for o in parts[1].split(",")] if len(parts) > 1 else []

        if mnemonic not in MNEMONICS and mnemonic not in PSEUDO_OPS:
            raise AssemblerError(line_number, "unknown mnemonic '{}'".format(mnemonic))

        statements.append(_Statement(line_number, mnemonic, operands, address))
        address += 4 * _statement_size(mnemonic, operands, line_number)

    return statements, labels


def _target(token: str, statement: _Statement, labels: dict[str, int]) -> int:
    token = token.strip()
    if token in labels:
        return labels[token] - statement.address
    if re.fullmatch(r"[A-Za-z_.][\w.]*", token):
        raise AssemblerError(statement.line, "undefined label '{}'".format(token))
    return _parse_int(token, statement.line)


def _expect(statement: _Statement, count: int):
    if len(statement.operands) != count:
        raise AssemblerError(statement.line, "{} expects {} operands, got {}".format(
            statement.mnemonic, count, len(statement.operands)))


def _memory_operand(token: str, line: int) -> tuple[int, int]:
    match = _MEMORY_OPERAND.match(token.replace(" ", ""))
    if not match:
        raise AssemblerError(line, "expected offset(register), got '{}'".format(token))
    return _parse_int(match.group(1), line), _parse_register(match.group(2), line)


def _assemble_pseudo(s: _Statement, labels: dict[str, int]) -> list[Instruction]:
    ops = s.operands
    if s.mnemonic == "nop":
        _expect(s, 0)
        return [Instruction(BaseOp.ADDI)]
    if s.mnemonic == "halt":
        _expect(s, 0)
        return [Instruction(BaseOp.JAL, rd=0, imm=0)]
    if s.mnemonic == "li":
        return load_immediate(_parse_register(ops[0], s.line), _parse_int(ops[1], s.line))
    if s.mnemonic == "mv":
        _expect(s, 2)
        return [Instruction(BaseOp.ADDI, rd=_parse_register(ops[0], s.line), rs1=_parse_register(ops[1], s.line))]
    if s.mnemonic == "j":
        _expect(s, 1)
        return [Instruction(BaseOp.JAL, rd=0, imm=_target(ops[0], s, labels))]
    # beqz / bnez
    _expect(s, 2)
    op = BaseOp.BEQ if s.mnemonic == "beqz" else BaseOp.BNE
    return [Instruction(op, rs1=_parse_register(ops[0], s.line), imm=_target(ops[1], s, labels))]


def _assemble_statement(s: _Statement, labels: dict[str, int]) -> list[Instruction]:
    if s.mnemonic in PSEUDO_OPS:
        return _assemble_pseudo(s, labels)

    op = MNEMONICS[s.mnemonic]
    ops = s.operands
    reg = _parse_register

    if isinstance(op, CimOp):
        _expect(s, 4)
        return [Instruction(op, rs1=reg(ops[0], s.line), rs2=reg(ops[1], s.line),
                            imm_s=_parse_int(ops[2], s.line), imm_d=_parse_int(ops[3], s.line))]

    if op in (BaseOp.ECALL, BaseOp.EBREAK):
        _expect(s, 0)
        return [Instruction(op)]
    if op == BaseOp.FENCE:
        if not ops:
            return [Instruction(op)]
        _expect(s, 3)
        return [Instruction(op, rd=reg(ops[0], s.line), rs1=reg(ops[1], s.line), imm=_parse_int(ops[2], s.line))]

    fmt = op.format
    if fmt == Format.R:
        _expect(s, 3)
        return [Instruction(op, rd=reg(ops[0], s.line), rs1=reg(ops[1], s.line), rs2=reg(ops[2], s.line))]
    if fmt == Format.U:
        _expect(s, 2)
        upper = _parse_int(ops[1], s.line)
        if min(max(upper, 0), 0xFFFFF) != upper:
            raise AssemblerError(s.line, "upper immediate {} out of range".format(upper))
        return [Instruction(op, rd=reg(ops[0], s.line), imm=to_signed32(upper << 12))]
    if fmt == Format.J:
        if len(ops) == 1:
            return [Instruction(op, rd=1, imm=_target(ops[0], s, labels))]
        _expect(s, 2)
        return [Instruction(op, rd=reg(ops[0], s.line), imm=_target(ops[1], s, labels))]
    if fmt == Format.B:
        _expect(s, 3)
        return [Instruction(op, rs1=reg(ops[0], s.line), rs2=reg(ops[1], s.line), imm=_target(ops[2], s, labels))]
    if fmt == Format.S:
        _expect(s, 2)
        offset, base = _memory_operand(ops[1], s.line)
        return [Instruction(op, rs1=base, rs2=reg(ops[0], s.line), imm=offset)]
    if op.is_load or op == BaseOp.JALR:
        _expect(s, 2)
        offset, base = _memory_operand(ops[1], s.line)
        return [Instruction(op, rd=reg(ops[0], s.line), rs1=base, imm=offset)]

    _expect(s, 3)
    return [Instruction(op, rd=reg(ops[0], s.line), rs1=reg(ops[1], s.line), imm=_parse_int(ops[2], s.line))]


def assemble(text: str) -> list[int]:
    """
    Assembles source text into instruction words. Labels resolve to
    PC-relative byte offsets; the program is laid out from address 0.

    :param str text: Assembly source, one statement per line, `#` comments.

    :rtype: list(int)
    :return: Encoded 32-bit words, one per instruction.
    """
    statements, labels = _split_source(text)

    words = []
    for statement in statements:
        if statement.mnemonic == ".word":
            _expect(statement, 1)
            words.append(_parse_int(statement.operands[0], statement.line) & 0xFFFFFFFF)
            continue

        try:
            words.extend(encode(inst) for inst in _assemble_statement(statement, labels))
        except IsaError as error:
            raise AssemblerError(statement.line, str(error))

    logging.debug("Assembled %s statements into %s words", len(statements), len(words))
    return words


def disassemble_program(words: list[int]) -> str:
    """
    Disassembles instruction words back to source text. Words that do not
    decode are emitted as `.word` directives.
    """
    lines = []
    for word in words:
        try:
            lines.append(disassemble(decode(word)))
        except IsaError:
            lines.append(".word 0x{:08x}".format(word))
    return "\n".join(lines) + ("\n" if lines else "")


def to_image(words: list[int]) -> bytes:
    """
    Serializes instruction words as a flat little-endian program image.
    """
    return struct.pack("<{}I".format(len(words)), *words)


def from_image(image: bytes) -> list[int]:
    """
    Parses a flat little-endian program image into instruction words.
    """
    if len(image) % 4:
        raise ValueError("Program image length {} is not a multiple of 4.".format(len(image)))
    return list(struct.unpack("<{}I".format(len(image) // 4), image))
