"""Architectural state and the fault-free instruction-set simulator.

This is the reference executor: one instruction per step, no pipeline, no
timing. Differential runs compare everything against it. Two memory-mapped
word-store ports exist: 0x80000000 appends the stored word to the output
log, 0x80000004 halts with the stored word as exit code. EBREAK and ECALL
halt with exit code 0. Loads from unmapped addresses return 0 and record a
warning unless strict mode is on, in which case they trap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import isa
from .asm import Program

OUTPUT_PORT = 0x80000000
HALT_PORT = 0x80000004

TRAP_CAUSES = frozenset({
    "FETCH_FAULT", "ILLEGAL", "MISALIGNED_LOAD",
    "MISALIGNED_STORE", "MISALIGNED_FETCH", "UNMAPPED_LOAD",
})
HALT_CAUSES = frozenset({"EBREAK", "ECALL", "HALT_PORT"})


def is_trap(cause: str | None) -> bool:
    return cause in TRAP_CAUSES


@dataclass(slots=True)
class ArchState:
    pc: int = 0
    regs: list[int] = field(default_factory=lambda: [0] * 32)
    mem: dict[int, int] = field(default_factory=dict)  # word addr -> u32
    output_log: list[int] = field(default_factory=list)
    halted: bool = False
    halt_cause: str | None = None
    exit_code: int | None = None
    unmapped_reads: int = 0
    strict: bool = False

    def copy(self) -> "ArchState":
        c = ArchState(pc=self.pc, regs=list(self.regs), mem=dict(self.mem),
                      output_log=list(self.output_log), halted=self.halted,
                      halt_cause=self.halt_cause, exit_code=self.exit_code,
                      unmapped_reads=self.unmapped_reads, strict=self.strict)
        return c

    def same_arch(self, other: "ArchState") -> bool:
        """Architectural equality: registers, memory, pc, halt state, output."""

        return (self.regs == other.regs and self.pc == other.pc
                and self.halted == other.halted
                and self.halt_cause == other.halt_cause
                and self.exit_code == other.exit_code
                and self.output_log == other.output_log
                and _nonzero(self.mem) == _nonzero(other.mem))


def _nonzero(mem: dict[int, int]) -> dict[int, int]:
    return {a: v for a, v in mem.items() if v}


@dataclass(frozen=True, slots=True)
class StepEvent:
    """One retired instruction, as observed architecturally."""

    pc: int
    next_pc: int
    raw: int
    mnemonic: str
    reg_write: tuple[int, int, int] | None = None  # (rd, old, new)
    mem_write: tuple[int, int, int, int] | None = None  # (addr, old, new, width)
    output: int | None = None
    halt: str | None = None


def load_program(program: Program, strict: bool = False) -> ArchState:
    state = ArchState(pc=program.entry, strict=strict)
    # mem is keyed by word index, Program.words() by byte address
    state.mem = {a >> 2: w for a, w in program.words().items()}
    return state


def _s32(v: int) -> int:
    return v - (1 << 32) if v & 0x80000000 else v


_DECODE_CACHE: dict[int, isa.Instruction | isa.Illegal] = {}


def cached_decode(word: int) -> isa.Instruction | isa.Illegal:
    d = _DECODE_CACHE.get(word)
    if d is None:
        d = isa.decode(word)
        _DECODE_CACHE[word] = d
    return d


def muldiv(mnemonic: str, a: int, b: int) -> int:
    """M extension arithmetic on u32 operands, returns u32."""

    if mnemonic == "mul":
        return (a * b) & 0xFFFFFFFF
    if mnemonic == "mulh":
        return ((_s32(a) * _s32(b)) >> 32) & 0xFFFFFFFF
    if mnemonic == "mulhsu":
        return ((_s32(a) * b) >> 32) & 0xFFFFFFFF
    if mnemonic == "mulhu":
        return ((a * b) >> 32) & 0xFFFFFFFF
    if mnemonic == "div":
        if b == 0:
            return 0xFFFFFFFF
        sa, sb = _s32(a), _s32(b)
        if sa == -(1 << 31) and sb == -1:
            return 0x80000000
        q = abs(sa) // abs(sb)
        return (q if (sa < 0) == (sb < 0) else -q) & 0xFFFFFFFF
    if mnemonic == "divu":
        return 0xFFFFFFFF if b == 0 else a // b
    if mnemonic == "rem":
        if b == 0:
            return a
        sa, sb = _s32(a), _s32(b)
        if sa == -(1 << 31) and sb == -1:
            return 0
        r = abs(sa) % abs(sb)
        return (-r if sa < 0 else r) & 0xFFFFFFFF
    if mnemonic == "remu":
        return a if b == 0 else a % b
    raise AssertionError(mnemonic)


def alu(mnemonic: str, a: int, b: int) -> int:
    """Shared integer ALU for register and immediate forms (u32 in/out)."""

    if mnemonic in ("add", "addi"):
        return (a + b) & 0xFFFFFFFF
    if mnemonic == "sub":
        return (a - b) & 0xFFFFFFFF
    if mnemonic in ("sll", "slli"):
        return (a << (b & 31)) & 0xFFFFFFFF
    if mnemonic in ("slt", "slti"):
        return 1 if _s32(a) < _s32(b) else 0
    if mnemonic in ("sltu", "sltiu"):
        return 1 if a < b else 0
    if mnemonic in ("xor", "xori"):
        return a ^ b
    if mnemonic in ("srl", "srli"):
        return a >> (b & 31)
    if mnemonic in ("sra", "srai"):
        return (_s32(a) >> (b & 31)) & 0xFFFFFFFF
    if mnemonic in ("or", "ori"):
        return a | b
    if mnemonic in ("and", "andi"):
        return a & b
    raise AssertionError(mnemonic)


def branch_taken(mnemonic: str, a: int, b: int) -> bool:
    if mnemonic == "beq":
        return a == b
    if mnemonic == "bne":
        return a != b
    if mnemonic == "blt":
        return _s32(a) < _s32(b)
    if mnemonic == "bge":
        return _s32(a) >= _s32(b)
    if mnemonic == "bltu":
        return a < b
    return a >= b  # bgeu


def load_from(state: ArchState, mnemonic: str, addr: int) -> tuple[int | None, str | None]:
    """Memory load path shared with the pipeline model.

    Returns (value, trap_cause); unmapped reads yield 0 plus a warning
    counter bump, or a trap when the state is strict.
    """

    addr &= 0xFFFFFFFF
    if mnemonic in ("lw",) and addr & 3:
        return None, "MISALIGNED_LOAD"
    if mnemonic in ("lh", "lhu") and addr & 1:
        return None, "MISALIGNED_LOAD"
    word = state.mem.get(addr >> 2)
    if word is None:
        if state.strict:
            return None, "UNMAPPED_LOAD"
        state.unmapped_reads += 1
        word = 0
    if mnemonic == "lw":
        return word, None
    shift = (addr & 3) * 8
    if mnemonic in ("lh", "lhu"):
        half = (word >> shift) & 0xFFFF
        if mnemonic == "lh" and half & 0x8000:
            half -= 0x10000
        return half & 0xFFFFFFFF, None
    byte = (word >> shift) & 0xFF
    if mnemonic == "lb" and byte & 0x80:
        byte -= 0x100
    return byte & 0xFFFFFFFF, None


def store_effect(state: ArchState, mnemonic: str, addr: int, value: int):
    """Apply a store; returns (mem_write, output, halt_tuple, trap_cause).

    Ports react to word stores only; byte and half stores land in plain
    memory everywhere.
    """

    addr &= 0xFFFFFFFF
    value &= 0xFFFFFFFF
    if mnemonic == "sw":
        if addr & 3:
            return None, None, None, "MISALIGNED_STORE"
        if addr == OUTPUT_PORT:
            state.output_log.append(value)
            return None, value, None, None
        if addr == HALT_PORT:
            return None, None, ("HALT_PORT", value), None
        old = state.mem.get(addr >> 2, 0)
        state.mem[addr >> 2] = value
        return (addr, old, value, 4), None, None, None
    if mnemonic == "sh":
        if addr & 1:
            return None, None, None, "MISALIGNED_STORE"
        old = state.mem.get(addr >> 2, 0)
        shift = (addr & 3) * 8
        new = (old & ~(0xFFFF << shift)) | (value & 0xFFFF) << shift
        state.mem[addr >> 2] = new
        return (addr, old, new, 2), None, None, None
    # sb
    old = state.mem.get(addr >> 2, 0)
    shift = (addr & 3) * 8
    new = (old & ~(0xFF << shift)) | (value & 0xFF) << shift
    state.mem[addr >> 2] = new
    return (addr, old, new, 1), None, None, None


def step(state: ArchState) -> StepEvent:
    """Execute one instruction; sets halt state on halts and traps."""

    pc = state.pc

    def trap(cause: str, raw: int = 0, mnem: str = "") -> StepEvent:
        state.halted = True
        state.halt_cause = cause
        return StepEvent(pc, pc, raw, mnem, halt=cause)

    if pc & 3:
        return trap("MISALIGNED_FETCH")
    word = state.mem.get(pc >> 2)
    if word is None:
        return trap("FETCH_FAULT")

    d = cached_decode(word)
    if isinstance(d, isa.Illegal):
        return trap("ILLEGAL", raw=word)

    m = d.mnemonic
    cls = d.iclass
    regs = state.regs
    next_pc = (pc + 4) & 0xFFFFFFFF
    reg_write = mem_write = output = halt = None

    if cls is isa.IClass.ALU_IMM:
        res = alu(m, regs[d.rs1], d.imm & 0xFFFFFFFF)
        if d.rd:
            reg_write = (d.rd, regs[d.rd], res)
            regs[d.rd] = res
    elif cls is isa.IClass.ALU_REG:
        res = alu(m, regs[d.rs1], regs[d.rs2])
        if d.rd:
            reg_write = (d.rd, regs[d.rd], res)
            regs[d.rd] = res
    elif cls is isa.IClass.MULDIV:
        res = muldiv(m, regs[d.rs1], regs[d.rs2])
        if d.rd:
            reg_write = (d.rd, regs[d.rd], res)
            regs[d.rd] = res
    elif cls is isa.IClass.LOAD:
        addr = (regs[d.rs1] + d.imm) & 0xFFFFFFFF
        value, cause = load_from(state, m, addr)
        if cause:
            return trap(cause, raw=word, mnem=m)
        if d.rd:
            reg_write = (d.rd, regs[d.rd], value)
            regs[d.rd] = value
    elif cls is isa.IClass.STORE:
        addr = (regs[d.rs1] + d.imm) & 0xFFFFFFFF
        mem_write, output, halt_info, cause = store_effect(
            state, m, addr, regs[d.rs2])
        if cause:
            return trap(cause, raw=word, mnem=m)
        if halt_info:
            state.halted = True
            state.halt_cause, state.exit_code = halt_info
            halt = halt_info[0]
    elif cls is isa.IClass.BRANCH:
        if branch_taken(m, regs[d.rs1], regs[d.rs2]):
            target = (pc + d.imm) & 0xFFFFFFFF
            if target & 3:
                return trap("MISALIGNED_FETCH", raw=word, mnem=m)
            next_pc = target
    elif cls is isa.IClass.JUMP:
        if m == "jal":
            target = (pc + d.imm) & 0xFFFFFFFF
        else:
            target = (regs[d.rs1] + d.imm) & 0xFFFFFFFE
        if target & 3:
            return trap("MISALIGNED_FETCH", raw=word, mnem=m)
        link = (pc + 4) & 0xFFFFFFFF
        if d.rd:
            reg_write = (d.rd, regs[d.rd], link)
            regs[d.rd] = link
        next_pc = target
    elif cls is isa.IClass.UPPER:
        res = (pc + d.imm) & 0xFFFFFFFF if m == "auipc" else d.imm & 0xFFFFFFFF
        if d.rd:
            reg_write = (d.rd, regs[d.rd], res)
            regs[d.rd] = res
    else:  # SYSTEM
        if m == "ebreak":
            state.halted = True
            state.halt_cause = "EBREAK"
            state.exit_code = 0
            halt = "EBREAK"
        elif m == "ecall":
            state.halted = True
            state.halt_cause = "ECALL"
            state.exit_code = 0
            halt = "ECALL"
        # fence: no effect

    state.pc = next_pc
    return StepEvent(pc, next_pc, word, m, reg_write=reg_write,
                     mem_write=mem_write, output=output, halt=halt)


@dataclass
class GoldenRun:
    state: ArchState
    events: list[StepEvent]
    status: str  # HALTED | NOT_HALTED

    @property
    def steps(self) -> int:
        return len(self.events)


def run_golden(program: Program, max_steps: int = 1_000_000,
               strict: bool = False) -> GoldenRun:
    """Run to halt or the step budget on the reference executor."""

    state = load_program(program, strict=strict)
    events: list[StepEvent] = []
    for _ in range(max_steps):
        events.append(step(state))
        if state.halted:
            return GoldenRun(state, events, "HALTED")
    return GoldenRun(state, events, "NOT_HALTED")
