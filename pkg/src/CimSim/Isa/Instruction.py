#        CIM RISC-V Accelerator Simulator
#      Released under the MIT license
#

from dataclasses import dataclass
from enum import Enum, IntEnum


class IsaError(Exception):
    """
    Base exception for instruction encoding and decoding failures.
    """

    pass


class EncodingError(IsaError):
    """
    Exception thrown when an instruction field does not fit the bit width
    reserved for it in the encoded word.
    """

    def __init__(self, field: str, value: int, message: str):
        super().__init__("Field {} = {} {}.".format(field, value, message))
        self.field = field
        self.value = value


class IllegalInstructionError(IsaError):
    """
    Exception thrown when a 32-bit word does not decode to a known instruction.
    """

    def __init__(self, word: int, reason: str = "unknown opcode"):
        super().__init__("Illegal instruction 0x{:08X} ({}).".format(word, reason))
        self.word = word


class Opcode(IntEnum):
    """
    Major opcodes, bits [6:0] of an instruction word.
    """

    LUI = 0b0110111
    AUIPC = 0b0010111
    JAL = 0b1101111
    JALR = 0b1100111
    BRANCH = 0b1100011
    LOAD = 0b0000011
    STORE = 0b0100011
    OP_IMM = 0b0010011
    OP = 0b0110011
    MISC_MEM = 0b0001111
    SYSTEM = 0b1110011
    CIM = 0b1111110


class Format(Enum):
    R = "R"
    I = "I"  # noqa: E741
    SHIFT = "SHIFT"
    S = "S"
    B = "B"
    U = "U"
    J = "J"
    CIM = "CIM"


class CimOp(IntEnum):
    """
    CIM-type operations, selected by funct3 under the CIM opcode.
    """

    CONV = 0b000
    READ = 0b001
    WRITE = 0b010

    @property
    def mnemonic(self) -> str:
        return "cim." + self.name.lower()


class BaseOp(Enum):
    """
    RV32I base integer operations. Each value is (mnemonic, format, opcode,
    funct3, funct7).
    """

    LUI = ("lui", Format.U, Opcode.LUI, None, None)
    AUIPC = ("auipc", Format.U, Opcode.AUIPC, None, None)
    JAL = ("jal", Format.J, Opcode.JAL, None, None)
    JALR = ("jalr", Format.I, Opcode.JALR, 0b000, None)
    BEQ = ("beq", Format.B, Opcode.BRANCH, 0b000, None)
    BNE = ("bne", Format.B, Opcode.BRANCH, 0b001, None)
    BLT = ("blt", Format.B, Opcode.BRANCH, 0b100, None)
    BGE = ("bge", Format.B, Opcode.BRANCH, 0b101, None)
    BLTU = ("bltu", Format.B, Opcode.BRANCH, 0b110, None)
    BGEU = ("bgeu", Format.B, Opcode.BRANCH, 0b111, None)
    LB = ("lb", Format.I, Opcode.LOAD, 0b000, None)
    LH = ("lh", Format.I, Opcode.LOAD, 0b001, None)
    LW = ("lw", Format.I, Opcode.LOAD, 0b010, None)
    LBU = ("lbu", Format.I, Opcode.LOAD, 0b100, None)
    LHU = ("lhu", Format.I, Opcode.LOAD, 0b101, None)
    SB = ("sb", Format.S, Opcode.STORE, 0b000, None)
    SH = ("sh", Format.S, Opcode.STORE, 0b001, None)
    SW = ("sw", Format.S, Opcode.STORE, 0b010, None)
    ADDI = ("addi", Format.I, Opcode.OP_IMM, 0b000, None)
    SLTI = ("slti", Format.I, Opcode.OP_IMM, 0b010, None)
    SLTIU = ("sltiu", Format.I, Opcode.OP_IMM, 0b011, None)
    XORI = ("xori", Format.I, Opcode.OP_IMM, 0b100, None)
    ORI = ("ori", Format.I, Opcode.OP_IMM, 0b110, None)
    ANDI = ("andi", Format.I, Opcode.OP_IMM, 0b111, None)
    SLLI = ("slli", Format.SHIFT, Opcode.OP_IMM, 0b001, 0b0000000)
    SRLI = ("srli", Format.SHIFT, Opcode.OP_IMM, 0b101, 0b0000000)
    SRAI = ("srai", Format.SHIFT, Opcode.OP_IMM, 0b101, 0b0100000)
    ADD = ("add", Format.R, Opcode.OP, 0b000, 0b0000000)
    SUB = ("sub", Format.R, Opcode.OP, 0b000, 0b0100000)
    SLL = ("sll", Format.R, Opcode.OP, 0b001, 0b0000000)
    SLT = ("slt", Format.R, Opcode.OP, 0b010, 0b0000000)
    SLTU = ("sltu", Format.R, Opcode.OP, 0b011, 0b0000000)
    XOR = ("xor", Format.R, Opcode.OP, 0b100, 0b0000000)
    SRL = ("srl", Format.R, Opcode.OP, 0b101, 0b0000000)
    SRA = ("sra", Format.R, Opcode.OP, 0b101, 0b0100000)
    OR = ("or", Format.R, Opcode.OP, 0b110, 0b0000000)
    AND = ("and", Format.R, Opcode.OP, 0b111, 0b0000000)
    FENCE = ("fence", Format.I, Opcode.MISC_MEM, 0b000, None)
    ECALL = ("ecall", Format.I, Opcode.SYSTEM, 0b000, None)
    EBREAK = ("ebreak", Format.I, Opcode.SYSTEM, 0b000, None)

    @property
    def mnemonic(self) -> str:
        return self.value[0]

    @property
    def format(self) -> Format:
        return self.value[1]

    @property
    def opcode(self) -> Opcode:
        return self.value[2]

    @property
    def funct3(self) -> int | None:
        return self.value[3]

    @property
    def funct7(self) -> int | None:
        return self.value[4]

    @property
    def is_branch(self) -> bool:
        return self.opcode == Opcode.BRANCH

    @property
    def is_load(self) -> bool:
        return self.opcode == Opcode.LOAD

    @property
    def is_store(self) -> bool:
        return self.opcode == Opcode.STORE


MNEMONICS: dict[str, BaseOp | CimOp] = {op.mnemonic: op for op in BaseOp}
MNEMONICS.update({op.mnemonic: op for op in CimOp})

REGISTER_COUNT = 32

IMM_S_BITS = 7
IMM_D_BITS = 5


def _fits_signed(value: int, bits: int) -> bool:
    return -(1 << (bits - 1)) <= value < (1 << (bits - 1))


def _bits(word: int, hi: int, lo: int) -> int:
    return (word >> lo) & ((1 << (hi - lo + 1)) - 1)


def sign_extend(value: int, bits: int) -> int:
    """
    Sign-extends the low `bits` bits of a value.

    :param int value: Raw field value.
    :param int bits: Width of the field, in bits.

    :rtype: int
    :return: Signed integer.
    """
    value &= (1 << bits) - 1
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


def to_signed32(value: int) -> int:
    return sign_extend(value, 32)


@dataclass(frozen=True)
class Instruction:
    """
    A decoded RV32I or CIM-type instruction.

    Base instructions use `rd`, `rs1`, `rs2` and the 32-bit sign-extended
    `imm`. CIM instructions carry no destination register; they use `rs1` and
    `rs2` as base address registers with the word offsets `imm_s` and `imm_d`.
    """

    op: BaseOp | CimOp
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    imm_s: int = 0
    imm_d: int = 0

    def __post_init__(self):
        for field in ("rd", "rs1", "rs2"):
            index = getattr(self, field)
            if min(max(index, 0), REGISTER_COUNT - 1) != index:
                raise EncodingError(field, index, "is not a register index")

        if self.is_cim:
            if self.rd:
                raise EncodingError("rd", self.rd, "is not allowed on a CIM instruction")
            if self.imm:
                raise EncodingError("imm", self.imm, "is not allowed on a CIM instruction")
            if not _fits_signed(self.imm_s, IMM_S_BITS):
                raise EncodingError("imm_s", self.imm_s, "does not fit in {} signed bits".format(IMM_S_BITS))
            if not _fits_signed(self.imm_d, IMM_D_BITS):
                raise EncodingError("imm_d", self.imm_d, "does not fit in {} signed bits".format(IMM_D_BITS))
        elif self.imm_s or self.imm_d:
            field = "imm_s" if self.imm_s else "imm_d"
            raise EncodingError(field, getattr(self, field), "is only allowed on a CIM instruction")

    @property
    def is_cim(self) -> bool:
        return isinstance(self.op, CimOp)

    @property
    def mnemonic(self) -> str:
        return self.op.mnemonic

    def __str__(self) -> str:
        return disassemble(self)


def _check_imm(inst: Instruction, low: int, high: int, align: int = 1):
    if not (low <= inst.imm <= high) or inst.imm % align:
        raise EncodingError("imm", inst.imm, "is out of range for {}".format(inst.mnemonic))


def encode(inst: Instruction) -> int:
    """
    Encodes an instruction into its 32-bit word.

    CIM-type layout: [31:25] imm_s, [24:20] rs2, [19:15] rs1, [14:12] funct3,
    [11:7] imm_d, [6:0] 0b1111110.

    :param Instruction inst: Instruction to encode.

    :rtype: int
    :return: Encoded 32-bit instruction word.
    """
    if inst.is_cim:
        return (((inst.imm_s & 0x7F) << 25) | (inst.rs2 << 20) | (inst.rs1 << 15) |
                (int(inst.op) << 12) | ((inst.imm_d & 0x1F) << 7) | Opcode.CIM)

    op = inst.op
    fmt = op.format
    word = int(op.opcode)

    if fmt == Format.R:
        return word | (inst.rd << 7) | (op.funct3 << 12) | (inst.rs1 << 15) | (inst.rs2 << 20) | (op.funct7 << 25)

    if fmt == Format.SHIFT:
        if min(max(inst.imm, 0), 31) != inst.imm:
            raise EncodingError("imm", inst.imm, "is not a shift amount")
        return word | (inst.rd << 7) | (op.funct3 << 12) | (inst.rs1 << 15) | (inst.imm << 20) | (op.funct7 << 25)

    if fmt == Format.I:
        if op == BaseOp.ECALL:
            return word
        if op == BaseOp.EBREAK:
            return word | (1 << 20)
        _check_imm(inst, -2048, 2047)
        return word | (inst.rd << 7) | (op.funct3 << 12) | (inst.rs1 << 15) | ((inst.imm & 0xFFF) << 20)

    if fmt == Format.S:
        _check_imm(inst, -2048, 2047)
        imm = inst.imm & 0xFFF
        return word | ((imm & 0x1F) << 7) | (op.funct3 << 12) | (inst.rs1 << 15) | (inst.rs2 << 20) | ((imm >> 5) << 25)

    if fmt == Format.B:
        _check_imm(inst, -4096, 4094, align=2)
        imm = inst.imm & 0x1FFF
        return (word | (_bits(imm, 11, 11) << 7) | (_bits(imm, 4, 1) << 8) | (op.funct3 << 12) | (inst.rs1 << 15) |
                (inst.rs2 << 20) | (_bits(imm, 10, 5) << 25) | (_bits(imm, 12, 12) << 31))

    if fmt == Format.U:
        if inst.imm & 0xFFF or not (-(1 << 31) <= inst.imm < (1 << 31)):
            raise EncodingError("imm", inst.imm, "is not an upper immediate")
        return word | (inst.rd << 7) | (inst.imm & 0xFFFFF000)

    # Format.J
    _check_imm(inst, -(1 << 20), (1 << 20) - 2, align=2)
    imm = inst.imm & 0x1FFFFF
    return (word | (inst.rd << 7) | (_bits(imm, 19, 12) << 12) | (_bits(imm, 11, 11) << 20) |
            (_bits(imm, 10, 1) << 21) | (_bits(imm, 20, 20) << 31))


_DECODE_TABLE: dict[tuple[int, int | None, int | None], BaseOp] = {}
for _op in BaseOp:
    if _op not in (BaseOp.ECALL, BaseOp.EBREAK):
        _DECODE_TABLE[(int(_op.opcode), _op.funct3, _op.funct7)] = _op


def decode(word: int) -> Instruction:
    """
    Decodes a 32-bit word into an instruction.

    :param int word: Instruction word.

    :rtype: Instruction
    :return: Decoded instruction, with immediates sign-extended.
    """
    word &= 0xFFFFFFFF
    opcode = _bits(word, 6, 0)
    rd = _bits(word, 11, 7)
    funct3 = _bits(word, 14, 12)
    rs1 = _bits(word, 19, 15)
    rs2 = _bits(word, 24, 20)
    funct7 = _bits(word, 31, 25)

    if opcode == Opcode.CIM:
        try:
            op = CimOp(funct3)
        except ValueError:
            raise IllegalInstructionError(word, "undefined CIM funct3 0b{:03b}".format(funct3))
        return Instruction(op, rs1=rs1, rs2=rs2, imm_s=sign_extend(funct7, IMM_S_BITS), imm_d=sign_extend(rd, IMM_D_BITS))

    if opcode in (Opcode.LUI, Opcode.AUIPC):
        op = BaseOp.LUI if opcode == Opcode.LUI else BaseOp.AUIPC
        return Instruction(op, rd=rd, imm=to_signed32(word & 0xFFFFF000))

    if opcode == Opcode.JAL:
        imm = (_bits(word, 31, 31) << 20) | (_bits(word, 19, 12) << 12) | (_bits(word, 20, 20) << 11) | (_bits(word, 30, 21) << 1)
        return Instruction(BaseOp.JAL, rd=rd, imm=sign_extend(imm, 21))

    if opcode == Opcode.SYSTEM:
        if word == 0x00000073:
            return Instruction(BaseOp.ECALL)
        if word == 0x00100073:
            return Instruction(BaseOp.EBREAK)
        raise IllegalInstructionError(word, "unsupported SYSTEM instruction")

    if opcode == Opcode.OP:
        op = _DECODE_TABLE.get((opcode, funct3, funct7))
        if op is None:
            raise IllegalInstructionError(word, "undefined OP funct3/funct7")
        return Instruction(op, rd=rd, rs1=rs1, rs2=rs2)

    if opcode == Opcode.OP_IMM and funct3 in (0b001, 0b101):
        op = _DECODE_TABLE.get((opcode, funct3, funct7))
        if op is None:
            raise IllegalInstructionError(word, "undefined shift funct7")
        return Instruction(op, rd=rd, rs1=rs1, imm=rs2)

    op = _DECODE_TABLE.get((opcode, funct3, None))
    if op is None:
        raise IllegalInstructionError(word)

    if op.format == Format.I:
        return Instruction(op, rd=rd, rs1=rs1, imm=sign_extend(_bits(word, 31, 20), 12))

    if op.format == Format.S:
        imm = (funct7 << 5) | rd
        return Instruction(op, rs1=rs1, rs2=rs2, imm=sign_extend(imm, 12))

    # Format.B
    imm = (_bits(word, 31, 31) << 12) | (_bits(word, 7, 7) << 11) | (_bits(word, 30, 25) << 5) | (_bits(word, 11, 8) << 1)
    return Instruction(op, rs1=rs1, rs2=rs2, imm=sign_extend(imm, 13))


def disassemble(inst: Instruction) -> str:
    """
    Formats an instruction in the assembler's canonical syntax, so that
    assembling the text yields the same word again.
    """
    m = inst.mnemonic

    if inst.is_cim:
        return "{} x{}, x{}, {}, {}".format(m, inst.rs1, inst.rs2, inst.imm_s, inst.imm_d)

    op = inst.op
    fmt = op.format

    if op in (BaseOp.ECALL, BaseOp.EBREAK):
        return m
    if op == BaseOp.FENCE:
        return m if not (inst.rd or inst.rs1 or inst.imm) else "{} x{}, x{}, {}".format(m, inst.rd, inst.rs1, inst.imm)
    if fmt == Format.R:
        return "{} x{}, x{}, x{}".format(m, inst.rd, inst.rs1, inst.rs2)
    if fmt == Format.U:
        return "{} x{}, 0x{:05x}".format(m, inst.rd, (inst.imm >> 12) & 0xFFFFF)
    if fmt == Format.J:
        return "{} x{}, {}".format(m, inst.rd, inst.imm)
    if fmt == Format.B:
        return "{} x{}, x{}, {}".format(m, inst.rs1, inst.rs2, inst.imm)
    if fmt == Format.S:
        return "{} x{}, {}(x{})".format(m, inst.rs2, inst.imm, inst.rs1)
    if op.is_load or op == BaseOp.JALR:
        return "{} x{}, {}(x{})".format(m, inst.rd, inst.imm, inst.rs1)
    return "{} x{}, x{}, {}".format(m, inst.rd, inst.rs1, inst.imm)


def load_immediate(rd: int, value: int) -> list[Instruction]:
    """
    Expands `li rd, value` into one or two base instructions.

    :param int rd: Destination register.
    :param int value: 32-bit value, signed or unsigned.

    :rtype: list(Instruction)
    :return: `addi`, `lui` or `lui` + `addi` sequence.
    """
    value = to_signed32(value & 0xFFFFFFFF)
    if -2048 <= value <= 2047:
        return [Instruction(BaseOp.ADDI, rd=rd, rs1=0, imm=value)]

    low = sign_extend(value, 12)
    upper = to_signed32((value - low) & 0xFFFFFFFF)
    insts = [Instruction(BaseOp.LUI, rd=rd, imm=upper)]
    if low:
        insts.append(Instruction(BaseOp.ADDI, rd=rd, rs1=rd, imm=low))
    return insts


def is_halt(inst: Instruction) -> bool:
    """
    Indicates if an instruction is the halt convention, a jump to itself.
    """
    return inst.op == BaseOp.JAL and inst.imm == 0


HALT = Instruction(BaseOp.JAL, rd=0, imm=0)
