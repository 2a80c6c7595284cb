"""Cycle-accurate 4-stage in-order pipeline with glitch injection hooks.

Stages are IF, ID, EX, WB with three inter-stage latches (IF_ID, ID_EX,
EX_WB). Behavior downstream of a latch is determined entirely by the latch
contents, so corrupting latched bits changes execution the way it would in
the modeled netlist. Per-slot metadata rides alongside each latch for event
bookkeeping only.

Microarchitecture rules:
  * operands are captured at the ID->EX edge: register file (written by WB
    earlier the same cycle) with a single bypass from the EX output of this
    cycle (never load data);
  * a load consumed by the next instruction inserts one stall bubble;
  * all control flow resolves in EX; a taken branch or any jump flushes IF
    and ID (two wasted slots);
  * DIV/REM hold EX for 32 cycles, MUL family takes one;
  * memory reads and writes happen in EX, register writeback in WB;
  * faults ride the pipeline in program order as trap carriers and take
    effect at EX (flushing younger work), halting when they retire.

A glitch at cycle n shortens the edge that opened cycle n, so it attacks
the values latched for the instructions sitting in ID, EX, and WB during
cycle n. Latches that held (stall) or captured a driverless reset bubble
are immune; a squashed instruction still drives the latch inputs and stays
corruptible, which is how ghost revivals happen.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from . import machine
from .asm import Program
from .glitch import GlitchSpec, IllegalPolicy, LatchCapture, plan_effect
from .isa import IClass, Illegal, Instruction, NOP_WORD
from .latches import LATCHES, bubble
from .machine import ArchState, StepEvent, cached_decode, load_program
from .timing import TimingModel

MASK32 = 0xFFFFFFFF

# ---------------------------------------------------------------------------
# 16-bit control word carried in ID_EX. Semantics in EX depend only on this
# (plus operand/imm/rd/pc fields), so a corrupted control word reroutes the
# slot through whatever unit the bits now select. Undefined encodings act as
# a nop so every 16-bit value executes deterministically.

UNIT_ALU, UNIT_MULDIV, UNIT_LOAD, UNIT_STORE = 0, 1, 2, 3
UNIT_BRANCH, UNIT_JUMP, UNIT_UPPER, UNIT_SYSTEM = 4, 5, 6, 7

F_USE_IMM = 1 << 7
F_REG_WRITE = 1 << 8
F_SUBOP = 1 << 9


def _ctl(unit: int, op4: int = 0, *, imm: bool = False, wr: bool = False,
         subop: int = 0, sys2: int = 0) -> int:
    return (op4 | (unit << 4) | (F_USE_IMM if imm else 0)
            | (F_REG_WRITE if wr else 0) | (F_SUBOP if subop else 0)
            | (sys2 << 10))


_ALU_OP4 = {"add": 0, "sub": 1, "sll": 2, "slt": 3, "sltu": 4,
            "xor": 5, "srl": 6, "sra": 7, "or": 8, "and": 9}
_MULDIV_MNEM = ("mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu")
_LOAD_MNEM = {0: "lb", 1: "lh", 2: "lw", 4: "lbu", 5: "lhu"}
_STORE_MNEM = {0: "sb", 1: "sh", 2: "sw"}

TRAP_CARRIER_CAUSES = ("ILLEGAL", "FETCH_FAULT", "MISALIGNED_FETCH")


def trap_carrier_control(cause: str) -> int:
    return _ctl(UNIT_SYSTEM, TRAP_CARRIER_CAUSES.index(cause), sys2=3)


CONTROL: dict[str, int] = {}
for _m, _op in _ALU_OP4.items():
    CONTROL[_m] = _ctl(UNIT_ALU, _op, wr=True)
for _m, _op in (("addi", 0), ("slti", 3), ("sltiu", 4), ("xori", 5),
                ("ori", 8), ("andi", 9), ("slli", 2), ("srli", 6),
                ("srai", 7)):
    CONTROL[_m] = _ctl(UNIT_ALU, _op, imm=True, wr=True)
for _i, _m in enumerate(_MULDIV_MNEM):
    CONTROL[_m] = _ctl(UNIT_MULDIV, _i, wr=True)
for _op, _m in _LOAD_MNEM.items():
    CONTROL[_m] = _ctl(UNIT_LOAD, _op, imm=True, wr=True)
for _op, _m in _STORE_MNEM.items():
    CONTROL[_m] = _ctl(UNIT_STORE, _op, imm=True)
for _m, _op in (("beq", 0), ("bne", 1), ("blt", 4), ("bge", 5),
                ("bltu", 6), ("bgeu", 7)):
    CONTROL[_m] = _ctl(UNIT_BRANCH, _op)
CONTROL["jal"] = _ctl(UNIT_JUMP, imm=True, wr=True, subop=0)
CONTROL["jalr"] = _ctl(UNIT_JUMP, imm=True, wr=True, subop=1)
CONTROL["lui"] = _ctl(UNIT_UPPER, imm=True, wr=True, subop=0)
CONTROL["auipc"] = _ctl(UNIT_UPPER, imm=True, wr=True, subop=1)
CONTROL["fence"] = _ctl(UNIT_SYSTEM, sys2=0)
CONTROL["ecall"] = _ctl(UNIT_SYSTEM, sys2=1)
CONTROL["ebreak"] = _ctl(UNIT_SYSTEM, sys2=2)

NOP_CONTROL = CONTROL["addi"]

# instructions that read no rs1 register
_NO_RS1 = frozenset({"lui", "auipc", "jal", "ecall", "ebreak", "fence"})


def _alu_op4(op4: int, a: int, b: int) -> int:
    if op4 == 0:
        return (a + b) & MASK32
    if op4 == 1:
        return (a - b) & MASK32
    if op4 == 2:
        return (a << (b & 31)) & MASK32
    if op4 == 3:
        return 1 if machine._s32(a) < machine._s32(b) else 0
    if op4 == 4:
        return 1 if a < b else 0
    if op4 == 5:
        return a ^ b
    if op4 == 6:
        return a >> (b & 31)
    if op4 == 7:
        return (machine._s32(a) >> (b & 31)) & MASK32
    if op4 == 8:
        return a | b
    if op4 == 9:
        return a & b
    return 0


def _branch_op4(op4: int, a: int, b: int) -> bool:
    if op4 == 0:
        return a == b
    if op4 == 1:
        return a != b
    if op4 == 4:
        return machine._s32(a) < machine._s32(b)
    if op4 == 5:
        return machine._s32(a) >= machine._s32(b)
    if op4 == 6:
        return a < b
    if op4 == 7:
        return a >= b
    return False


# ---------------------------------------------------------------------------


@dataclass(slots=True)
class SlotMeta:
    """Bookkeeping that travels with a latch slot; never drives semantics."""

    dyn_id: int
    pc: int = 0
    raw: int = 0
    mnemonic: str = ""
    iclass_name: str | None = None
    fault_cause: str | None = None
    trap_cause: str | None = None
    next_pc: int = 0
    mem_write: tuple | None = None
    output: int | None = None
    halt: tuple | None = None
    ghost: bool = False
    word_corrupted: bool = False
    nop_recorded: bool = False

    def clone(self) -> "SlotMeta":
        return dataclasses.replace(self)


@dataclass(frozen=True, slots=True)
class CorruptionEvent:
    cycle: int
    latch: str
    field: str
    iclass: str
    late_bits: tuple
    clean: int
    corrupted: int
    ghost: bool = False
    bubble_injected: bool = False
    pc: int | None = None  # victim instruction, when the slot had one

    @property
    def changed(self) -> bool:
        return self.clean != self.corrupted


@dataclass(frozen=True, slots=True)
class MechanismEvent:
    kind: str  # NOP_REPLACEMENT | MUTATED_INSTRUCTION | GHOST_INSTRUCTION
    cycle: int
    pc: int
    detail: str = ""


@dataclass(frozen=True, slots=True)
class CycleTrace:
    cycle: int
    occupancy: dict  # stage -> (pc, mnemonic, iclass_name, dyn_id) | None
    captures: dict   # latch -> (fresh, iclass_name | None, valid_in)


@dataclass(slots=True)
class PipelineRun:
    arch: ArchState
    status: str  # HALTED | NOT_HALTED
    cycles: int
    retires: list
    corruptions: list
    mechanisms: list
    trace: list | None = None
    latch_trace: list | None = None

    def retire_pcs(self) -> list[int]:
        return [e.pc for e in self.retires]


class Pipeline:
    """Mutable pipeline simulator; one call to clock() is one cycle."""

    def __init__(self, program: Program | None = None, *,
                 timing: TimingModel | None = None, strict: bool = False,
                 record_trace: bool = False, record_latches: bool = False,
                 arch: ArchState | None = None):
        self.arch = arch if arch is not None else load_program(program, strict)
        self.timing = timing
        self.fetch_pc = self.arch.pc
        self.cycle = 0
        self.if_id = bubble("IF_ID")
        self.id_ex = bubble("ID_EX")
        self.ex_wb = bubble("EX_WB")
        self.if_id_meta: SlotMeta | None = None
        self.id_ex_meta: SlotMeta | None = None
        self.ex_wb_meta: SlotMeta | None = None
        self.prev_if_id = bubble("IF_ID")
        self.prev_id_ex = bubble("ID_EX")
        self.prev_ex_wb = bubble("EX_WB")
        self.prev_if_id_meta: SlotMeta | None = None
        self.prev_id_ex_meta: SlotMeta | None = None
        self.prev_ex_wb_meta: SlotMeta | None = None
        # capture profile of the edge that opened the current cycle:
        # latch -> (fresh, driving iclass name | None, valid bit captured)
        self.captures = {latch: (True, None, 0) for latch in LATCHES}
        self.ex_remaining = 0
        self.fetch_stopped = False
        self.illegal_policy = IllegalPolicy.TRAP
        self.glitches: dict[int, GlitchSpec] = {}
        self.dyn_counter = 0
        self.retires: list[StepEvent] = []
        self.corruptions: list[CorruptionEvent] = []
        self.mechanisms: list[MechanismEvent] = []
        self.record_trace = record_trace
        self.trace: list[CycleTrace] | None = [] if record_trace else None
        self.record_latches = record_latches
        self.latch_trace: list | None = [] if record_latches else None

    # -- setup ---------------------------------------------------------------

    def schedule(self, spec: GlitchSpec) -> None:
        if self.timing is None:
            raise ValueError("glitch injection needs a timing model")
        if spec.cycle in self.glitches:
            raise ValueError(f"duplicate glitch for cycle {spec.cycle}")
        self.timing.check_offset(spec.offset_ns)
        self.glitches[spec.cycle] = spec

    def fork(self) -> "Pipeline":
        """Cheap copy for what-if probing. Event logs restart empty; the
        architectural state (including the output log) carries over."""

        p = object.__new__(Pipeline)
        p.arch = self.arch.copy()
        p.timing = self.timing
        p.fetch_pc = self.fetch_pc
        p.cycle = self.cycle
        p.if_id = dict(self.if_id)
        p.id_ex = dict(self.id_ex)
        p.ex_wb = dict(self.ex_wb)
        p.prev_if_id = dict(self.prev_if_id)
        p.prev_id_ex = dict(self.prev_id_ex)
        p.prev_ex_wb = dict(self.prev_ex_wb)
        for name in ("if_id_meta", "id_ex_meta", "ex_wb_meta",
                     "prev_if_id_meta", "prev_id_ex_meta", "prev_ex_wb_meta"):
            m = getattr(self, name)
            setattr(p, name, m.clone() if m is not None else None)
        p.captures = dict(self.captures)
        p.ex_remaining = self.ex_remaining
        p.fetch_stopped = self.fetch_stopped
        p.illegal_policy = self.illegal_policy
        p.glitches = {}
        p.dyn_counter = self.dyn_counter
        p.retires = []
        p.corruptions = []
        p.mechanisms = []
        p.record_trace = False
        p.trace = None
        p.record_latches = False
        p.latch_trace = None
        return p

    def run(self, max_cycles: int) -> None:
        while self.cycle < max_cycles and self.clock():
            pass

    def result(self) -> PipelineRun:
        status = "HALTED" if self.arch.halted else "NOT_HALTED"
        return PipelineRun(self.arch, status, self.cycle, self.retires,
                           self.corruptions, self.mechanisms,
                           self.trace, self.latch_trace)

    def _next_dyn(self) -> int:
        self.dyn_counter += 1
        return self.dyn_counter

    # -- one cycle -----------------------------------------------------------

    def clock(self) -> bool:
        """Advance one cycle; False once the machine has halted."""

        if self.arch.halted:
            return False
        cyc = self.cycle
        if self.record_trace:
            self.trace.append(self._trace_entry())
        if self.record_latches:
            self.latch_trace.append(
                (cyc, dict(self.if_id), dict(self.id_ex), dict(self.ex_wb)))

        spec = self.glitches.get(cyc)
        if spec is not None:
            self._apply_glitch(spec)

        # WB first: its register write is visible to ID in the same cycle
        self._writeback(cyc)
        if self.arch.halted:
            self.cycle = cyc + 1
            return False

        (ex_completed, ex_wb_next, ex_wb_meta, ex_forward,
         redirect, kill_younger) = self._execute()

        if not ex_completed:
            # multi-cycle op keeps EX: everything upstream holds in place
            self.prev_ex_wb, self.ex_wb = self.ex_wb, ex_wb_next
            self.prev_ex_wb_meta, self.ex_wb_meta = self.ex_wb_meta, ex_wb_meta
            self.prev_if_id = self.if_id
            self.prev_id_ex = self.id_ex
            self.prev_if_id_meta = self.if_id_meta
            self.prev_id_ex_meta = self.id_ex_meta
            self.captures = {
                "IF_ID": (False, None, self.if_id["valid"]),
                "ID_EX": (False, None, self.id_ex["valid"]),
                "EX_WB": (True, None, 0),
            }
            self.cycle = cyc + 1
            return True

        squash = kill_younger or redirect is not None
        id_ex_next, id_ex_meta, id_class, stall = \
            self._decode_stage(ex_forward, squash)

        if squash:
            id_ex_next["valid"] = 0
            stall = False

        # IF
        if squash or not stall:
            if kill_younger:
                if_id_next, if_meta, if_class = self._fetch_slot()
                if_id_next["valid"] = 0
                self.fetch_stopped = True
            elif redirect is not None:
                if_id_next, if_meta, if_class = self._fetch_slot()
                if_id_next["valid"] = 0
                self.fetch_pc = redirect
            elif self.fetch_stopped:
                if_id_next, if_meta, if_class = bubble("IF_ID"), None, None
            else:
                if_id_next, if_meta, if_class = self._fetch_slot()
                self.fetch_pc = (self.fetch_pc + 4) & MASK32

        # latch updates (the edge that closes this cycle)
        self.prev_ex_wb, self.ex_wb = self.ex_wb, ex_wb_next
        self.prev_ex_wb_meta, self.ex_wb_meta = self.ex_wb_meta, ex_wb_meta
        self.prev_id_ex, self.id_ex = self.id_ex, id_ex_next
        self.prev_id_ex_meta, self.id_ex_meta = self.id_ex_meta, id_ex_meta
        if stall:
            # consumer waits in ID; IF_ID holds, nothing fetched
            self.prev_if_id = self.if_id
            self.prev_if_id_meta = self.if_id_meta
            if_capture = (False, None, self.if_id["valid"])
        else:
            self.prev_if_id, self.if_id = self.if_id, if_id_next
            self.prev_if_id_meta, self.if_id_meta = self.if_id_meta, if_meta
            if_capture = (True, if_class, if_id_next["valid"])

        self.captures = {
            "IF_ID": if_capture,
            "ID_EX": (True, id_class, id_ex_next["valid"]),
            "EX_WB": (True,
                      ex_wb_meta.iclass_name if ex_wb_meta else None,
                      ex_wb_next["valid"]),
        }
        self.cycle = cyc + 1
        return True

    # -- stages ----------------------------------------------------------------

    def _writeback(self, cyc: int) -> None:
        ew = self.ex_wb
        if not ew["valid"]:
            return
        meta = self.ex_wb_meta
        if meta is None:  # revived slot with no recorded origin
            meta = SlotMeta(self._next_dyn())
        arch = self.arch
        if meta.trap_cause:
            self.retires.append(StepEvent(meta.pc, meta.pc, meta.raw,
                                          meta.mnemonic, halt=meta.trap_cause))
            arch.halted = True
            arch.halt_cause = meta.trap_cause
            arch.pc = meta.pc
            return
        rd = ew["rd"] & 31
        reg_write = None
        if rd:
            new = (ew["mem_data"] if ew["is_load"] & 1 else ew["result"]) \
                & MASK32
            reg_write = (rd, arch.regs[rd], new)
            arch.regs[rd] = new
        halt_cause = meta.halt[0] if meta.halt else None
        self.retires.append(StepEvent(meta.pc, meta.next_pc, meta.raw,
                                      meta.mnemonic, reg_write=reg_write,
                                      mem_write=meta.mem_write,
                                      output=meta.output, halt=halt_cause))
        arch.pc = meta.next_pc
        if meta.halt:
            arch.halted = True
            arch.halt_cause, arch.exit_code = meta.halt

    def _execute(self):
        """Returns (completed, ex_wb_next, ex_wb_meta, forward, redirect,
        kill_younger)."""

        ie = self.id_ex
        if not ie["valid"]:
            return True, bubble("EX_WB"), None, None, None, False

        ctl = ie["control"]
        op4 = ctl & 15
        unit = (ctl >> 4) & 7

        if self.ex_remaining == 0:
            self.ex_remaining = 32 if (unit == UNIT_MULDIV and 4 <= op4 <= 7) \
                else 1
        self.ex_remaining -= 1
        if self.ex_remaining:
            return False, bubble("EX_WB"), None, None, None, False

        meta = self.id_ex_meta
        if meta is None:
            meta = SlotMeta(self._next_dyn(), pc=ie["pc"])
        rs1 = ie["rs1_val"]
        rs2 = ie["rs2_val"]
        imm = ie["imm"]
        rd = ie["rd"] & 31 if ctl & F_REG_WRITE else 0
        pc = ie["pc"] & MASK32
        subop = (ctl >> 9) & 1
        sys2 = (ctl >> 10) & 3

        result = 0
        is_load = 0
        mem_data = 0
        trap = None
        halt = None
        mem_write = None
        output = None
        redirect = None
        next_pc = (pc + 4) & MASK32

        if unit == UNIT_ALU:
            result = _alu_op4(op4, rs1, imm if ctl & F_USE_IMM else rs2)
        elif unit == UNIT_MULDIV:
            result = machine.muldiv(_MULDIV_MNEM[op4], rs1, rs2) \
                if op4 < 8 else 0
        elif unit == UNIT_LOAD:
            mnem = _LOAD_MNEM.get(op4)
            if mnem is None:
                rd = 0
            else:
                addr = (rs1 + imm) & MASK32
                value, trap = machine.load_from(self.arch, mnem, addr)
                if trap is None:
                    is_load = 1
                    mem_data = value
                    result = addr
        elif unit == UNIT_STORE:
            mnem = _STORE_MNEM.get(op4)
            if mnem is not None:
                addr = (rs1 + imm) & MASK32
                mem_write, output, halt, trap = machine.store_effect(
                    self.arch, mnem, addr, rs2)
        elif unit == UNIT_BRANCH:
            if _branch_op4(op4, rs1, rs2):
                target = (pc + imm) & MASK32
                if target & 3:
                    trap = "MISALIGNED_FETCH"
                else:
                    redirect = target
                    next_pc = target
        elif unit == UNIT_JUMP:
            if subop:
                target = (rs1 + imm) & 0xFFFFFFFE
            else:
                target = (pc + imm) & MASK32
            if target & 3:
                trap = "MISALIGNED_FETCH"
            else:
                result = (pc + 4) & MASK32
                redirect = target
                next_pc = target
        elif unit == UNIT_UPPER:
            result = (pc + imm) & MASK32 if subop else imm & MASK32
        else:  # UNIT_SYSTEM
            if sys2 == 1:
                halt = ("ECALL", 0)
            elif sys2 == 2:
                halt = ("EBREAK", 0)
            elif sys2 == 3:
                cause = TRAP_CARRIER_CAUSES[op4] \
                    if op4 < len(TRAP_CARRIER_CAUSES) else "ILLEGAL"
                trap = meta.fault_cause or cause

        out_meta = meta.clone()
        out_meta.pc = pc
        if trap:
            out_meta.trap_cause = trap
            out_meta.next_pc = pc
            out_meta.mem_write = None
            out_meta.output = None
            out_meta.halt = None
            slot = {"result": 0, "rd": 0, "is_load": 0, "mem_data": 0,
                    "valid": 1}
            return True, slot, out_meta, None, None, True

        out_meta.next_pc = next_pc
        out_meta.mem_write = mem_write
        out_meta.output = output
        out_meta.halt = halt
        slot = {"result": result, "rd": rd,
                "is_load": is_load, "mem_data": mem_data, "valid": 1}
        forward = (rd, result) if rd and not is_load else None
        return True, slot, out_meta, forward, redirect, halt is not None

    def _decode_stage(self, ex_forward, squash):
        """Returns (id_ex_next, meta, capture class, stall)."""

        f = self.if_id
        if not f["valid"]:
            return bubble("ID_EX"), None, None, False
        meta = self.if_id_meta
        if meta is None:
            meta = SlotMeta(self._next_dyn())
        word = f["instr_word"]
        pc = f["pc"] & MASK32

        if meta.fault_cause:
            slot = {"control": trap_carrier_control(meta.fault_cause),
                    "rs1_val": 0, "rs2_val": 0, "imm": 0, "rd": 0,
                    "pc": pc, "valid": 1}
            out = meta.clone()
            out.pc = pc
            out.iclass_name = "SYSTEM"
            return slot, out, "SYSTEM", False

        d = cached_decode(word)
        mnemonic = ""
        if isinstance(d, Illegal):
            if self.illegal_policy is IllegalPolicy.NOP_REPLACE:
                if meta.word_corrupted and not meta.nop_recorded:
                    meta.nop_recorded = True
                    self.mechanisms.append(MechanismEvent(
                        "NOP_REPLACEMENT", self.cycle, pc,
                        f"word 0x{word:08X}"))
                d = cached_decode(NOP_WORD)
                mnemonic = d.mnemonic
            else:
                slot = {"control": trap_carrier_control("ILLEGAL"),
                        "rs1_val": 0, "rs2_val": 0, "imm": 0, "rd": 0,
                        "pc": pc, "valid": 1}
                out = meta.clone()
                out.pc = pc
                out.raw = word
                out.mnemonic = ""
                out.iclass_name = "SYSTEM"
                out.fault_cause = "ILLEGAL"
                return slot, out, "SYSTEM", False
        else:
            mnemonic = d.mnemonic

        control = CONTROL[mnemonic]
        use_rs1 = mnemonic not in _NO_RS1
        use_rs2 = d.iclass in (IClass.ALU_REG, IClass.MULDIV,
                               IClass.BRANCH, IClass.STORE)

        if not squash:
            # one-cycle gap after a load producing a consumed register
            ex = self.id_ex
            if ex["valid"]:
                ectl = ex["control"]
                if ((ectl >> 4) & 7 == UNIT_LOAD and ectl & F_REG_WRITE):
                    lrd = ex["rd"] & 31
                    if lrd and ((use_rs1 and d.rs1 == lrd)
                                or (use_rs2 and d.rs2 == lrd)):
                        return bubble("ID_EX"), None, None, True

        regs = self.arch.regs

        def operand(r: int) -> int:
            if ex_forward is not None and ex_forward[0] == r:
                return ex_forward[1]
            return regs[r]

        slot = {
            "control": control,
            "rs1_val": operand(d.rs1) if use_rs1 else 0,
            "rs2_val": operand(d.rs2) if use_rs2 else 0,
            "imm": d.imm & MASK32,
            "rd": d.rd if control & F_REG_WRITE else 0,
            "pc": pc,
            "valid": 1,
        }
        out = meta.clone()
        out.pc = pc
        out.raw = word
        out.mnemonic = mnemonic
        out.iclass_name = d.iclass.value
        return slot, out, d.iclass.value, False

    def _fetch_slot(self):
        """Build the IF_ID slot for the word being fetched this cycle."""

        pc = self.fetch_pc & MASK32
        meta = SlotMeta(self._next_dyn(), pc=pc)
        if pc & 3:
            meta.fault_cause = "MISALIGNED_FETCH"
            return ({"instr_word": 0, "pc": pc, "valid": 1}, meta, "SYSTEM")
        word = self.arch.mem.get(pc >> 2)
        if word is None:
            meta.fault_cause = "FETCH_FAULT"
            return ({"instr_word": 0, "pc": pc, "valid": 1}, meta, "SYSTEM")
        meta.raw = word
        d = cached_decode(word)
        if isinstance(d, Illegal):
            iclass = "SYSTEM"
        else:
            iclass = d.iclass.value
            meta.mnemonic = d.mnemonic
        return ({"instr_word": word, "pc": pc, "valid": 1}, meta, iclass)

    # -- glitch application ----------------------------------------------------

    def _apply_glitch(self, spec: GlitchSpec) -> None:
        self.illegal_policy = spec.illegal_policy
        caps = {}
        latch_attrs = {"IF_ID": ("if_id", "prev_if_id"),
                       "ID_EX": ("id_ex", "prev_id_ex"),
                       "EX_WB": ("ex_wb", "prev_ex_wb")}
        for latch, (cur_name, prev_name) in latch_attrs.items():
            fresh, iclass, _valid = self.captures[latch]
            caps[latch] = LatchCapture(latch, fresh, iclass,
                                       getattr(self, cur_name),
                                       getattr(self, prev_name))
        effect = plan_effect(spec, caps, self.timing)
        for latch, le in effect.latches.items():
            cur_name, prev_name = latch_attrs[latch]
            target = getattr(self, cur_name)
            clean_word = target.get("instr_word")
            meta0 = getattr(self, cur_name + "_meta")
            victim_pc = meta0.pc if meta0 is not None else target.get("pc")
            target.update(le.value())
            for fc in le.fields:
                self.corruptions.append(CorruptionEvent(
                    spec.cycle, latch, fc.field, le.iclass, fc.late_bits,
                    fc.clean, fc.corrupted, le.ghost, le.bubble_injected,
                    pc=victim_pc))
            meta_name = cur_name + "_meta"
            if le.ghost:
                stale = getattr(self, prev_name + "_meta")
                meta = stale.clone() if stale else \
                    SlotMeta(self._next_dyn(), pc=target.get("pc", 0))
                meta.ghost = True
                setattr(self, meta_name, meta)
                self.mechanisms.append(MechanismEvent(
                    "GHOST_INSTRUCTION", spec.cycle,
                    target.get("pc", meta.pc), latch))
            if latch == "IF_ID" and target["valid"]:
                new_word = target["instr_word"]
                if new_word != clean_word:
                    meta = getattr(self, meta_name)
                    if meta is None:
                        meta = SlotMeta(self._next_dyn(), pc=target["pc"])
                        setattr(self, meta_name, meta)
                    meta.word_corrupted = True
                    meta.raw = new_word
                    nd = cached_decode(new_word)
                    if isinstance(nd, Instruction):
                        self.mechanisms.append(MechanismEvent(
                            "MUTATED_INSTRUCTION", spec.cycle, target["pc"],
                            f"0x{clean_word:08X}->0x{new_word:08X} "
                            f"({nd.mnemonic})"))

    # -- tracing -----------------------------------------------------------------

    def _trace_entry(self) -> CycleTrace:
        occ: dict[str, tuple | None] = {}
        fm = self.if_id_meta
        occ["ID"] = (self.if_id["pc"], fm.mnemonic if fm else "",
                     fm.iclass_name if fm else None,
                     fm.dyn_id if fm else -1) if self.if_id["valid"] else None
        em = self.id_ex_meta
        occ["EX"] = (self.id_ex["pc"], em.mnemonic if em else "",
                     em.iclass_name if em else None,
                     em.dyn_id if em else -1) if self.id_ex["valid"] else None
        wm = self.ex_wb_meta
        occ["WB"] = (wm.pc if wm else 0, wm.mnemonic if wm else "",
                     wm.iclass_name if wm else None,
                     wm.dyn_id if wm else -1) if self.ex_wb["valid"] else None
        if self.fetch_stopped or self.arch.halted:
            occ["IF"] = None
        else:
            pc = self.fetch_pc & MASK32
            word = self.arch.mem.get(pc >> 2) if not pc & 3 else None
            if word is None:
                occ["IF"] = (pc, "", None, -1)
            else:
                d = cached_decode(word)
                occ["IF"] = (pc, getattr(d, "mnemonic", ""),
                             d.iclass.value if isinstance(d, Instruction)
                             else None, -1)
        return CycleTrace(self.cycle, occ, dict(self.captures))


def run_pipeline(program: Program, *, timing: TimingModel | None = None,
                 glitches=(), max_cycles: int = 1_000_000,
                 strict: bool = False, record_trace: bool = False,
                 record_latches: bool = False) -> PipelineRun:
    p = Pipeline(program, timing=timing, strict=strict,
                 record_trace=record_trace, record_latches=record_latches)
    for spec in glitches:
        p.schedule(spec)
    p.run(max_cycles)
    return p.result()
