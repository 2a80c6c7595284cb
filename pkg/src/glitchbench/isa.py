"""RV32IM instruction coding: decode, encode, classify, disassemble.

The supported set is the RV32I base (less CSR/Zifencei) plus the M
extension. Anything else, including the architecturally reserved all-zeros
and all-ones words, decodes to Illegal. Decoding is bit-exact: re-encoding
a decoded instruction reproduces the original word.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

NOP_WORD = 0x00000013  # addi x0, x0, 0

OP_LOAD = 0x03
OP_MISC_MEM = 0x0F
OP_ALU_IMM = 0x13
OP_AUIPC = 0x17
OP_STORE = 0x23
OP_ALU_REG = 0x33
OP_LUI = 0x37
OP_BRANCH = 0x63
OP_JALR = 0x67
OP_JAL = 0x6F
OP_SYSTEM = 0x73


class IClass(enum.Enum):
    """Coarse instruction class used to index the timing model."""

    ALU_REG = "ALU_REG"
    ALU_IMM = "ALU_IMM"
    LOAD = "LOAD"
    STORE = "STORE"
    BRANCH = "BRANCH"
    JUMP = "JUMP"
    UPPER = "UPPER"
    MULDIV = "MULDIV"
    SYSTEM = "SYSTEM"


@dataclass(frozen=True, slots=True)
class Instruction:
    mnemonic: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0  # sign-extended except LUI/AUIPC (pre-shifted U imm)
    raw: int = 0

    @property
    def iclass(self) -> IClass:
        return CLASS_OF[self.mnemonic]


@dataclass(frozen=True, slots=True)
class Illegal:
    """Word that matches no supported encoding."""

    raw: int


# mnemonic -> (format, opcode, funct3, funct7)
# format: R, I, S, B, U, J, SH (I-format shift), F (fence), E (ecall/ebreak)
ENCODINGS = {
    "lui":    ("U", OP_LUI, None, None),
    "auipc":  ("U", OP_AUIPC, None, None),
    "jal":    ("J", OP_JAL, None, None),
    "jalr":   ("I", OP_JALR, 0, None),
    "beq":    ("B", OP_BRANCH, 0, None),
    "bne":    ("B", OP_BRANCH, 1, None),
    "blt":    ("B", OP_BRANCH, 4, None),
    "bge":    ("B", OP_BRANCH, 5, None),
    "bltu":   ("B", OP_BRANCH, 6, None),
    "bgeu":   ("B", OP_BRANCH, 7, None),
    "lb":     ("I", OP_LOAD, 0, None),
    "lh":     ("I", OP_LOAD, 1, None),
    "lw":     ("I", OP_LOAD, 2, None),
    "lbu":    ("I", OP_LOAD, 4, None),
    "lhu":    ("I", OP_LOAD, 5, None),
    "sb":     ("S", OP_STORE, 0, None),
    "sh":     ("S", OP_STORE, 1, None),
    "sw":     ("S", OP_STORE, 2, None),
    "addi":   ("I", OP_ALU_IMM, 0, None),
    "slti":   ("I", OP_ALU_IMM, 2, None),
    "sltiu":  ("I", OP_ALU_IMM, 3, None),
    "xori":   ("I", OP_ALU_IMM, 4, None),
    "ori":    ("I", OP_ALU_IMM, 6, None),
    "andi":   ("I", OP_ALU_IMM, 7, None),
    "slli":   ("SH", OP_ALU_IMM, 1, 0x00),
    "srli":   ("SH", OP_ALU_IMM, 5, 0x00),
    "srai":   ("SH", OP_ALU_IMM, 5, 0x20),
    "add":    ("R", OP_ALU_REG, 0, 0x00),
    "sub":    ("R", OP_ALU_REG, 0, 0x20),
    "sll":    ("R", OP_ALU_REG, 1, 0x00),
    "slt":    ("R", OP_ALU_REG, 2, 0x00),
    "sltu":   ("R", OP_ALU_REG, 3, 0x00),
    "xor":    ("R", OP_ALU_REG, 4, 0x00),
    "srl":    ("R", OP_ALU_REG, 5, 0x00),
    "sra":    ("R", OP_ALU_REG, 5, 0x20),
    "or":     ("R", OP_ALU_REG, 6, 0x00),
    "and":    ("R", OP_ALU_REG, 7, 0x00),
    "mul":    ("R", OP_ALU_REG, 0, 0x01),
    "mulh":   ("R", OP_ALU_REG, 1, 0x01),
    "mulhsu": ("R", OP_ALU_REG, 2, 0x01),
    "mulhu":  ("R", OP_ALU_REG, 3, 0x01),
    "div":    ("R", OP_ALU_REG, 4, 0x01),
    "divu":   ("R", OP_ALU_REG, 5, 0x01),
    "rem":    ("R", OP_ALU_REG, 6, 0x01),
    "remu":   ("R", OP_ALU_REG, 7, 0x01),
    "fence":  ("F", OP_MISC_MEM, 0, None),
    "ecall":  ("E", OP_SYSTEM, 0, None),
    "ebreak": ("E", OP_SYSTEM, 0, None),
}

CLASS_OF = {
    "lui": IClass.UPPER, "auipc": IClass.UPPER,
    "jal": IClass.JUMP, "jalr": IClass.JUMP,
    "beq": IClass.BRANCH, "bne": IClass.BRANCH, "blt": IClass.BRANCH,
    "bge": IClass.BRANCH, "bltu": IClass.BRANCH, "bgeu": IClass.BRANCH,
    "lb": IClass.LOAD, "lh": IClass.LOAD, "lw": IClass.LOAD,
    "lbu": IClass.LOAD, "lhu": IClass.LOAD,
    "sb": IClass.STORE, "sh": IClass.STORE, "sw": IClass.STORE,
    "addi": IClass.ALU_IMM, "slti": IClass.ALU_IMM, "sltiu": IClass.ALU_IMM,
    "xori": IClass.ALU_IMM, "ori": IClass.ALU_IMM, "andi": IClass.ALU_IMM,
    "slli": IClass.ALU_IMM, "srli": IClass.ALU_IMM, "srai": IClass.ALU_IMM,
    "add": IClass.ALU_REG, "sub": IClass.ALU_REG, "sll": IClass.ALU_REG,
    "slt": IClass.ALU_REG, "sltu": IClass.ALU_REG, "xor": IClass.ALU_REG,
    "srl": IClass.ALU_REG, "sra": IClass.ALU_REG, "or": IClass.ALU_REG,
    "and": IClass.ALU_REG,
    "mul": IClass.MULDIV, "mulh": IClass.MULDIV, "mulhsu": IClass.MULDIV,
    "mulhu": IClass.MULDIV, "div": IClass.MULDIV, "divu": IClass.MULDIV,
    "rem": IClass.MULDIV, "remu": IClass.MULDIV,
    "fence": IClass.SYSTEM, "ecall": IClass.SYSTEM, "ebreak": IClass.SYSTEM,
}

MNEMONICS = tuple(ENCODINGS)

# reverse maps for the decoder
_R_BY_KEY = {}
_I_BY_KEY = {}
for _m, (_f, _op, _f3, _f7) in ENCODINGS.items():
    if _f == "R":
        _R_BY_KEY[(_f3, _f7)] = _m
    elif _f == "I":
        _I_BY_KEY[(_op, _f3)] = _m


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def decode(word: int) -> Instruction | Illegal:
    """Decode a 32-bit word; unsupported encodings come back as Illegal."""

    word &= 0xFFFFFFFF
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    funct3 = (word >> 12) & 0x07
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    funct7 = (word >> 25) & 0x7F

    if opcode == OP_ALU_REG:
        m = _R_BY_KEY.get((funct3, funct7))
        if m is None:
            return Illegal(word)
        return Instruction(m, rd=rd, rs1=rs1, rs2=rs2, raw=word)

    if opcode == OP_ALU_IMM:
        if funct3 == 1:  # slli
            if funct7 != 0x00:
                return Illegal(word)
            return Instruction("slli", rd=rd, rs1=rs1, imm=rs2, raw=word)
        if funct3 == 5:  # srli/srai
            if funct7 == 0x00:
                return Instruction("srli", rd=rd, rs1=rs1, imm=rs2, raw=word)
            if funct7 == 0x20:
                return Instruction("srai", rd=rd, rs1=rs1, imm=rs2, raw=word)
            return Illegal(word)
        m = _I_BY_KEY.get((OP_ALU_IMM, funct3))
        if m is None:
            return Illegal(word)
        return Instruction(m, rd=rd, rs1=rs1, imm=_sext(word >> 20, 12), raw=word)

    if opcode == OP_LOAD:
        m = _I_BY_KEY.get((OP_LOAD, funct3))
        if m is None:
            return Illegal(word)
        return Instruction(m, rd=rd, rs1=rs1, imm=_sext(word >> 20, 12), raw=word)

    if opcode == OP_STORE:
        if funct3 > 2:
            return Illegal(word)
        m = ("sb", "sh", "sw")[funct3]
        imm = _sext((funct7 << 5) | rd, 12)
        return Instruction(m, rs1=rs1, rs2=rs2, imm=imm, raw=word)

    if opcode == OP_BRANCH:
        if funct3 in (2, 3):
            return Illegal(word)
        m = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}[funct3]
        imm = ((word >> 31) << 12 | ((word >> 7) & 1) << 11
               | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1)
        return Instruction(m, rs1=rs1, rs2=rs2, imm=_sext(imm, 13), raw=word)

    if opcode == OP_LUI or opcode == OP_AUIPC:
        m = "lui" if opcode == OP_LUI else "auipc"
        return Instruction(m, rd=rd, imm=word & 0xFFFFF000, raw=word)

    if opcode == OP_JAL:
        imm = ((word >> 31) << 20 | ((word >> 12) & 0xFF) << 12
               | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1)
        return Instruction("jal", rd=rd, imm=_sext(imm, 21), raw=word)

    if opcode == OP_JALR:
        if funct3 != 0:
            return Illegal(word)
        return Instruction("jalr", rd=rd, rs1=rs1, imm=_sext(word >> 20, 12), raw=word)

    if opcode == OP_MISC_MEM:
        # hint forms with nonzero rd/rs1 are reserved; treat as unsupported
        if funct3 != 0 or rd != 0 or rs1 != 0:
            return Illegal(word)
        return Instruction("fence", imm=(word >> 20) & 0xFFF, raw=word)

    if opcode == OP_SYSTEM:
        if funct3 != 0 or rd != 0 or rs1 != 0:
            return Illegal(word)
        imm = (word >> 20) & 0xFFF
        if imm == 0:
            return Instruction("ecall", raw=word)
        if imm == 1:
            return Instruction("ebreak", imm=1, raw=word)
        return Illegal(word)

    return Illegal(word)


def _check_reg(name: str, value: int) -> None:
    if not 0 <= value <= 31:
        raise ValueError(f"{name} out of range: {value}")


def encode(mnemonic: str, rd: int = 0, rs1: int = 0, rs2: int = 0, imm: int = 0) -> int:
    """Encode operands into a 32-bit word. Raises ValueError on bad operands."""

    enc = ENCODINGS.get(mnemonic)
    if enc is None:
        raise ValueError(f"unknown mnemonic: {mnemonic}")
    fmt, opcode, f3, f7 = enc
    _check_reg("rd", rd)
    _check_reg("rs1", rs1)
    _check_reg("rs2", rs2)

    if fmt == "R":
        return f7 << 25 | rs2 << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode

    if fmt == "I":
        if not -2048 <= imm <= 2047:
            raise ValueError(f"{mnemonic} immediate out of range: {imm}")
        return (imm & 0xFFF) << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode

    if fmt == "SH":
        if not 0 <= imm <= 31:
            raise ValueError(f"{mnemonic} shift amount out of range: {imm}")
        return f7 << 25 | imm << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode

    if fmt == "S":
        if not -2048 <= imm <= 2047:
            raise ValueError(f"{mnemonic} immediate out of range: {imm}")
        return (((imm >> 5) & 0x7F) << 25 | rs2 << 20 | rs1 << 15
                | f3 << 12 | (imm & 0x1F) << 7 | opcode)

    if fmt == "B":
        if not -4096 <= imm <= 4094:
            raise ValueError(f"{mnemonic} offset out of range: {imm}")
        if imm & 1:
            raise ValueError(f"{mnemonic} offset must be even: {imm}")
        return (((imm >> 12) & 1) << 31 | ((imm >> 5) & 0x3F) << 25
                | rs2 << 20 | rs1 << 15 | f3 << 12
                | ((imm >> 1) & 0xF) << 8 | ((imm >> 11) & 1) << 7 | opcode)

    if fmt == "U":
        # imm carries the pre-shifted upper-immediate value
        if imm & 0xFFF or not -0x80000000 <= imm <= 0xFFFFF000:
            raise ValueError(f"{mnemonic} immediate out of range: {imm}")
        return ((imm >> 12) & 0xFFFFF) << 12 | rd << 7 | opcode

    if fmt == "J":
        if not -(1 << 20) <= imm <= (1 << 20) - 2:
            raise ValueError(f"{mnemonic} offset out of range: {imm}")
        if imm & 1:
            raise ValueError(f"{mnemonic} offset must be even: {imm}")
        return (((imm >> 20) & 1) << 31 | ((imm >> 1) & 0x3FF) << 21
                | ((imm >> 11) & 1) << 20 | ((imm >> 12) & 0xFF) << 12
                | rd << 7 | opcode)

    if fmt == "F":
        return (imm & 0xFFF) << 20 | rs1 << 15 | f3 << 12 | rd << 7 | opcode

    if fmt == "E":
        code = 1 if mnemonic == "ebreak" else 0
        return code << 20 | opcode

    raise AssertionError(f"unhandled format {fmt}")


def reencode(instr: Instruction) -> int:
    """Pack a decoded Instruction back into its word."""

    return encode(instr.mnemonic, rd=instr.rd, rs1=instr.rs1,
                  rs2=instr.rs2, imm=instr.imm)


def make(mnemonic: str, rd: int = 0, rs1: int = 0, rs2: int = 0, imm: int = 0) -> Instruction:
    """Build an Instruction with its raw word filled in."""

    word = encode(mnemonic, rd=rd, rs1=rs1, rs2=rs2, imm=imm)
    got = decode(word)
    assert isinstance(got, Instruction)
    return got


def disassemble(item: Instruction | Illegal | int) -> str:
    """Render one instruction the way the assembler accepts it back."""

    if isinstance(item, int):
        item = decode(item)
    if isinstance(item, Illegal):
        return f".illegal 0x{item.raw:08x}"

    m = item.mnemonic
    fmt = ENCODINGS[m][0]
    if fmt == "R":
        return f"{m} x{item.rd}, x{item.rs1}, x{item.rs2}"
    if fmt == "SH":
        return f"{m} x{item.rd}, x{item.rs1}, {item.imm}"
    if fmt == "I":
        if m in ("lb", "lh", "lw", "lbu", "lhu", "jalr"):
            return f"{m} x{item.rd}, {item.imm}(x{item.rs1})"
        return f"{m} x{item.rd}, x{item.rs1}, {item.imm}"
    if fmt == "S":
        return f"{m} x{item.rs2}, {item.imm}(x{item.rs1})"
    if fmt == "B":
        return f"{m} x{item.rs1}, x{item.rs2}, {item.imm}"
    if fmt == "U":
        return f"{m} x{item.rd}, {(item.imm >> 12) & 0xFFFFF}"
    if fmt == "J":
        return f"{m} x{item.rd}, {item.imm}"
    if fmt == "F":
        if (item.imm & 0xFFF) == 0x0FF and item.rd == 0 and item.rs1 == 0:
            return "fence"
        return f"fence 0x{item.imm & 0xFFF:03x}"
    return m  # ecall / ebreak
