"""Seeded random program generator for differential testing.

Programs are guaranteed to terminate: control flow is forward branches,
counted loops with dedicated counter registers, and one straight-line leaf
function. Loads and stores stay inside a mapped scratch region so the
reference executor and the pipeline see identical memory traffic.
"""

import random

ALU_R = ["add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and"]
ALU_I = ["addi", "slti", "sltiu", "xori", "ori", "andi"]
SHIFT_I = ["slli", "srli", "srai"]
MULDIV = ["mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu"]
BRANCHES = ["beq", "bne", "blt", "bge", "bltu", "bgeu"]
LOADS = [("lw", 4), ("lh", 2), ("lhu", 2), ("lb", 1), ("lbu", 1)]
STORES = [("sw", 4), ("sh", 2), ("sb", 1)]

BASE = 2       # x2 points at the scratch region
LINK = 1       # x1 is the call link register
COUNTERS = (14, 15)
POOL = [r for r in range(3, 14)]  # general destinations


def _op(rng, dests):
    rd = rng.choice(dests)
    a, b = rng.choice(POOL), rng.choice(POOL)
    kind = rng.randrange(10)
    if kind < 4:
        return f"{rng.choice(ALU_R)} x{rd}, x{a}, x{b}"
    if kind < 6:
        return f"{rng.choice(ALU_I)} x{rd}, x{a}, {rng.randrange(-1024, 1024)}"
    if kind == 6:
        return f"{rng.choice(SHIFT_I)} x{rd}, x{a}, {rng.randrange(32)}"
    if kind == 7:
        return f"{rng.choice(MULDIV)} x{rd}, x{a}, x{b}"
    if kind == 8:
        m, align = rng.choice(LOADS)
        off = rng.randrange(0, 64 // align) * align
        return f"{m} x{rd}, {off}(x{BASE})"
    m, align = rng.choice(STORES)
    off = rng.randrange(0, 64 // align) * align
    return f"{m} x{a}, {off}(x{BASE})"


def random_source(seed: int) -> str:
    rng = random.Random(seed)
    lines = [".org 0", f"li x{BASE}, 0x400"]
    for r in rng.sample(POOL, 5):
        lines.append(f"li x{r}, {rng.randrange(-2**31, 2**31)}")

    n_blocks = rng.randrange(3, 7)
    for b in range(n_blocks):
        lines.append(f"blk{b}:")
        for _ in range(rng.randrange(3, 9)):
            lines.append(_op(rng, POOL))
        roll = rng.randrange(10)
        if roll < 3 and b + 1 < n_blocks:
            a, c = rng.choice(POOL), rng.choice(POOL)
            target = rng.randrange(b + 1, n_blocks)
            lines.append(f"{rng.choice(BRANCHES)} x{a}, x{c}, blk{target}")
        elif roll < 5:
            ctr = rng.choice(COUNTERS)
            lines.append(f"addi x{ctr}, x0, {rng.randrange(2, 7)}")
            lines.append(f"lp{b}:")
            for _ in range(rng.randrange(2, 5)):
                lines.append(_op(rng, POOL))
            lines.append(f"addi x{ctr}, x{ctr}, -1")
            lines.append(f"bne x{ctr}, x0, lp{b}")
        elif roll == 5:
            lines.append("jal x1, leaf")

    lines.append("li x11, 0x80000000")
    lines.append(f"sw x{rng.choice(POOL)}, 0(x11)")
    if rng.randrange(2):
        lines.append(f"li x12, {rng.randrange(256)}")
        lines.append("sw x12, 4(x11)")
    else:
        lines.append("ebreak")
    lines.append("leaf:")
    for _ in range(rng.randrange(2, 6)):
        lines.append(_op(rng, POOL))
    lines.append("ret")

    lines.append(".org 0x400")
    for _ in range(16):
        lines.append(f".word {rng.getrandbits(32)}")
    return "\n".join(lines) + "\n"
