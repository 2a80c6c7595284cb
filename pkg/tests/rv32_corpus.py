"""Frozen RV32IM encoding corpus.

Every entry was produced by an independent format-arithmetic packer built
straight from the base instruction format bit layouts, then spot-checked by
hand (branch/store/jal immediate scattering re-derived manually for several
entries). These constants are the reference the encoder under test must hit;
they are frozen and must never be regenerated from the code under test.
"""

# (canonical disassembly, expected word)
CORPUS = [
    ("lui x5, 74565", 0x123452B7),
    ("lui x31, 1048575", 0xFFFFFFB7),
    ("auipc x1, 4096", 0x01000097),
    ("jal x1, 2048", 0x001000EF),
    ("jal x0, -4", 0xFFDFF06F),
    ("jalr x1, 16(x5)", 0x010280E7),
    ("jalr x0, 0(x1)", 0x00008067),
    ("beq x1, x2, 8", 0x00208463),
    ("bne x3, x4, -12", 0xFE419AE3),
    ("blt x5, x6, 2048", 0x0062C0E3),
    ("bge x7, x8, -2048", 0x8083D0E3),
    ("bltu x9, x10, 16", 0x00A4E863),
    ("bgeu x11, x12, 4094", 0x7EC5FFE3),
    ("lb x1, -1(x2)", 0xFFF10083),
    ("lh x3, 2(x4)", 0x00221183),
    ("lw x5, 0(x6)", 0x00032283),
    ("lbu x7, 255(x8)", 0x0FF44383),
    ("lhu x9, -2048(x10)", 0x80055483),
    ("sb x2, 3(x1)", 0x002081A3),
    ("sh x4, -2(x3)", 0xFE419F23),
    ("sw x6, 2047(x5)", 0x7E62AFA3),
    ("addi x0, x0, 0", 0x00000013),
    ("addi x15, x15, -1", 0xFFF78793),
    ("slti x1, x2, -2048", 0x80012093),
    ("sltiu x3, x4, 2047", 0x7FF23193),
    ("xori x5, x6, -1", 0xFFF34293),
    ("ori x7, x8, 240", 0x0F046393),
    ("andi x9, x10, 15", 0x00F57493),
    ("slli x1, x2, 1", 0x00111093),
    ("slli x3, x4, 31", 0x01F21193),
    ("srli x5, x6, 4", 0x00435293),
    ("srai x7, x8, 31", 0x41F45393),
    ("add x3, x1, x2", 0x002081B3),
    ("sub x4, x5, x6", 0x40628233),
    ("sll x7, x8, x9", 0x009413B3),
    ("slt x10, x11, x12", 0x00C5A533),
    ("sltu x13, x14, x15", 0x00F736B3),
    ("xor x16, x17, x18", 0x0128C833),
    ("srl x19, x20, x21", 0x015A59B3),
    ("sra x22, x23, x24", 0x418BDB33),
    ("or x25, x26, x27", 0x01BD6CB3),
    ("and x28, x29, x30", 0x01EEFE33),
    ("mul x1, x2, x3", 0x023100B3),
    ("mulh x4, x5, x6", 0x02629233),
    ("mulhsu x7, x8, x9", 0x029423B3),
    ("mulhu x10, x11, x12", 0x02C5B533),
    ("div x13, x14, x15", 0x02F746B3),
    ("divu x16, x17, x18", 0x0328D833),
    ("rem x19, x20, x21", 0x035A69B3),
    ("remu x22, x23, x24", 0x038BFB33),
    ("fence", 0x0FF0000F),
    ("ecall", 0x00000073),
    ("ebreak", 0x00100073),
]
