import random

import pytest

from glitchbench.glitch import (CorruptionPolicy, FieldCorruption, GlitchSpec,
                                IllegalPolicy, LatchCapture, plan_effect)
from glitchbench.latches import LATCHES, bubble, field_names
from glitchbench.timing import reference_timing

TM = reference_timing()


def cap(latch, iclass, incoming, previous, fresh=True):
    inc = bubble(latch)
    inc.update(incoming)
    prev = bubble(latch)
    prev.update(previous)
    return LatchCapture(latch, fresh, iclass, inc, prev)


def one_latch(captures):
    out = {}
    for c in captures:
        out[c.latch] = c
    return out


def test_safe_offset_touches_nothing():
    c = cap("IF_ID", "LOAD", {"instr_word": 0x00032283, "pc": 0x40, "valid": 1},
            {"instr_word": 0x13, "pc": 0x3C, "valid": 1})
    spec = GlitchSpec(cycle=5, offset_ns=9.5)
    eff = plan_effect(spec, one_latch([c]), TM)
    assert not eff.any_corruption
    assert eff.latches == {}


def test_held_and_idle_latches_immune():
    held = LatchCapture("IF_ID", False, "LOAD",
                        dict(bubble("IF_ID")), dict(bubble("IF_ID")))
    idle = LatchCapture("ID_EX", True, None,
                        dict(bubble("ID_EX")), dict(bubble("ID_EX")))
    eff = plan_effect(GlitchSpec(0, 1.0), {"IF_ID": held, "ID_EX": idle}, TM)
    assert eff.latches == {}


def test_stale_bits_merges_previous_value():
    clean = 0x00032283  # lw
    prev = 0xFFFFFFFF
    c = cap("IF_ID", "LOAD", {"instr_word": clean, "pc": 0x40, "valid": 1},
            {"instr_word": prev, "pc": 0x3C, "valid": 1})
    # between the pc threshold (8.6*0.75+0.2) and the word threshold: only
    # instr_word bits can be late
    spec = GlitchSpec(3, 8.3, CorruptionPolicy.STALE_BITS)
    eff = plan_effect(spec, one_latch([c]), TM)
    assert set(eff.latches) == {"IF_ID"}
    le = eff.latches["IF_ID"]
    assert [f.field for f in le.fields] == ["instr_word"]
    fc = le.fields[0]
    late = TM.late_bits("LOAD", "IF_ID", "instr_word", 8.3)
    assert fc.late_bits == late
    mask = 0
    for b in late:
        mask |= 1 << b
    assert fc.corrupted == (clean & ~mask) | (prev & mask)
    assert not le.ghost and not le.bubble_injected


def test_zero_late_bits_clears():
    clean = 0xFFFFFFFF
    c = cap("IF_ID", "LOAD", {"instr_word": clean, "pc": 0, "valid": 1},
            {"instr_word": 0, "pc": 0, "valid": 1})
    spec = GlitchSpec(3, 8.3, CorruptionPolicy.ZERO_LATE_BITS)
    eff = plan_effect(spec, one_latch([c]), TM)
    fc = eff.latches["IF_ID"].fields[0]
    mask = 0
    for b in fc.late_bits:
        mask |= 1 << b
    assert fc.corrupted == clean & ~mask


def test_stale_register_reverts_whole_latch():
    c = cap("ID_EX", "ALU_REG",
            {"control": 0x0100, "rs1_val": 7, "rs2_val": 9, "imm": 0,
             "rd": 3, "pc": 8, "valid": 1},
            {"control": 0x0777, "rs1_val": 1, "rs2_val": 2, "imm": 5,
             "rd": 4, "pc": 4, "valid": 1})
    spec = GlitchSpec(3, 6.0, CorruptionPolicy.STALE_REGISTER)
    eff = plan_effect(spec, one_latch([c]), TM)
    le = eff.latches["ID_EX"]
    assert set(f.field for f in le.fields) == set(field_names("ID_EX"))
    assert le.value() == c.previous
    assert any(f.late_bits for f in le.fields)


def test_ghost_revival_and_bubble_kill():
    # squashed slot (valid_in 0) over a previously valid latch: a deep
    # glitch leaves the valid bit stale at 1 while fields mix
    ghost = cap("IF_ID", "ALU_IMM",
                {"instr_word": 0x00100093, "pc": 0x10, "valid": 0},
                {"instr_word": 0x00208463, "pc": 0x0C, "valid": 1})
    eff = plan_effect(GlitchSpec(7, 1.0, CorruptionPolicy.STALE_BITS),
                      one_latch([ghost]), TM)
    le = eff.latches["IF_ID"]
    assert le.ghost and not le.bubble_injected
    assert le.value()["valid"] == 1

    kill = cap("IF_ID", "ALU_IMM",
               {"instr_word": 0x00100093, "pc": 0x10, "valid": 1},
               {"instr_word": 0, "pc": 0x0C, "valid": 0})
    eff = plan_effect(GlitchSpec(7, 1.0, CorruptionPolicy.STALE_BITS),
                      one_latch([kill]), TM)
    le = eff.latches["IF_ID"]
    assert le.bubble_injected and not le.ghost
    assert le.value()["valid"] == 0


def test_corruption_recorded_even_when_value_unchanged():
    same = {"instr_word": 0x00000013, "pc": 0x40, "valid": 1}
    c = cap("IF_ID", "ALU_IMM", same, same)
    eff = plan_effect(GlitchSpec(2, 7.5), one_latch([c]), TM)
    le = eff.latches["IF_ID"]
    assert le.corrupted
    fc = {f.field: f for f in le.fields}["instr_word"]
    assert fc.corrupted == fc.clean  # stale bits happen to match


def test_selectivity_between_thresholds():
    # LOAD entering decode alongside a MULDIV entering execute: offsets in
    # (8.4, 8.8) must hit only the fetch-side latch
    lw = cap("IF_ID", "LOAD", {"instr_word": 0x00032283, "pc": 8, "valid": 1},
             {"instr_word": 0, "pc": 4, "valid": 1})
    mul = cap("ID_EX", "MULDIV",
              {"control": 0x0101, "rs1_val": 3, "rs2_val": 4, "imm": 0,
               "rd": 5, "pc": 4, "valid": 1},
              {"control": 0, "rs1_val": 0, "rs2_val": 0, "imm": 0,
               "rd": 0, "pc": 0, "valid": 1})
    eff = plan_effect(GlitchSpec(4, 8.6), one_latch([lw, mul]), TM)
    assert set(eff.latches) == {"IF_ID"}
    eff = plan_effect(GlitchSpec(4, 8.39), one_latch([lw, mul]), TM)
    assert set(eff.latches) == {"IF_ID", "ID_EX"}
    eff = plan_effect(GlitchSpec(4, 8.8), one_latch([lw, mul]), TM)
    assert eff.latches == {}


def test_late_set_grows_as_offset_shrinks():
    rng = random.Random(0x61)
    c = cap("ID_EX", "BRANCH",
            {"control": 0x0406, "rs1_val": rng.getrandbits(32),
             "rs2_val": rng.getrandbits(32), "imm": 16, "rd": 0,
             "pc": 0x100, "valid": 1},
            {"control": 0, "rs1_val": 0, "rs2_val": 0, "imm": 0,
             "rd": 0, "pc": 0, "valid": 1})
    prev_sets = None
    for offset in [8.2, 7.0, 5.5, 4.0, 2.5, 1.0]:
        eff = plan_effect(GlitchSpec(0, offset), one_latch([c]), TM)
        le = eff.latches.get("ID_EX")
        sets = {f.field: set(f.late_bits) for f in (le.fields if le else ())}
        if prev_sets is not None:
            for fname, bits in prev_sets.items():
                assert fname in sets and bits <= sets[fname]
        prev_sets = sets
    assert prev_sets  # deepest offset corrupts something


def test_policy_default_and_spec_fields():
    spec = GlitchSpec(9, 4.25)
    assert spec.policy is CorruptionPolicy.STALE_BITS
    assert spec.illegal_policy is IllegalPolicy.NOP_REPLACE
    assert spec.cycle == 9 and spec.offset_ns == 4.25
