"""Assembler and image container checks."""

from __future__ import annotations

import json

import pytest

from glitchbench import asm, isa


def words_of(prog: asm.Program) -> dict[int, int]:
    return prog.words()


def test_two_pass_forward_reference():
    prog = asm.assemble("""
        beq x1, x2, done
        addi x3, x3, 1
    done:
        ebreak
    """)
    w = words_of(prog)
    assert w[0] == isa.encode("beq", rs1=1, rs2=2, imm=8)
    assert w[8] == isa.encode("ebreak")
    assert prog.symbols["done"] == 8
    assert prog.entry == 0


def test_backward_branch_to_own_label_encodes_zero_offset():
    prog = asm.assemble("loop: beq x1, x2, loop\n")
    assert words_of(prog)[0] == 0x00208063


def test_numeric_branch_targets_are_relative():
    prog = asm.assemble("beq x1, x2, 8\nbne x1, x2, -4\n")
    w = words_of(prog)
    assert w[0] == isa.encode("beq", rs1=1, rs2=2, imm=8)
    assert w[4] == isa.encode("bne", rs1=1, rs2=2, imm=-4)


def test_li_is_always_two_instructions():
    for value in (0, 1, -1, 7, 0x12345678, -0x80000000, 0xFFFFFFFF, 2047, 2048):
        prog = asm.assemble(f"li x5, {value}\nebreak\n")
        w = words_of(prog)
        assert len(w) == 3, f"li {value} did not expand to lui+addi"
        lui = isa.decode(w[0])
        addi = isa.decode(w[4])
        assert (lui.mnemonic, addi.mnemonic) == ("lui", "addi")
        got = (lui.imm + addi.imm) & 0xFFFFFFFF
        assert got == value & 0xFFFFFFFF, f"li {value} materialized {got:#x}"


def test_pseudo_expansions():
    prog = asm.assemble("nop\nmv x2, x3\nj next\nnext: ret\n")
    w = words_of(prog)
    assert w[0] == isa.NOP_WORD
    assert w[4] == isa.encode("addi", rd=2, rs1=3, imm=0)
    assert w[8] == isa.encode("jal", rd=0, imm=4)
    assert w[12] == isa.encode("jalr", rd=0, rs1=1, imm=0)


def test_abi_register_names():
    prog = asm.assemble("add a0, sp, ra\n")
    assert words_of(prog)[0] == isa.encode("add", rd=10, rs1=2, rs2=1)


def test_directives_and_symbols():
    prog = asm.assemble("""
        .equ PORT, 0x80000000
        .org 0x100
    start:
        li x6, PORT
        sw x1, 0(x6)
        ebreak
        .org 0x200
    table:
        .word 1, 2, table+8
        .byte 0xff, -1
        .ascii "ok\\n"
    """)
    assert prog.entry == 0x100
    assert prog.symbols["PORT"] == 0x80000000
    assert prog.symbols["table"] == 0x200
    w = words_of(prog)
    assert w[0x200] == 1 and w[0x204] == 2 and w[0x208] == 0x208
    seg = {s.base: s.data for s in prog.segments}[0x200]
    assert seg[12:14] == b"\xff\xff"
    assert seg[14:17] == b"ok\n"


def test_org_splits_segments():
    prog = asm.assemble(".org 0\nnop\n.org 0x1000\nnop\n")
    bases = [s.base for s in prog.segments]
    assert bases == [0, 0x1000]


def test_errors_carry_source_spans():
    cases = [
        ("addi x1, x1, 99999\n", "out of range"),
        ("frobnicate x1\n", "unknown mnemonic"),
        ("a: nop\na: nop\n", "duplicate label"),
        ("beq x1, x2, nowhere\n", "unresolved symbol"),
        ("lw x1, 0(x99)\n", "bad register"),
        (".org 1\nnop\n", "unaligned"),
        ("nop\n.org 0\nnop\n", "overlapping"),
    ]
    for src, fragment in cases:
        with pytest.raises(asm.AsmError) as err:
            asm.assemble(src)
        assert fragment in str(err.value), src
        assert err.value.span.line >= 1


def test_illegal_directive_emits_raw_word():
    prog = asm.assemble(".illegal 0xffffffff\n.illegal 0\n")
    w = words_of(prog)
    assert w[0] == 0xFFFFFFFF and w[4] == 0
    assert isinstance(isa.decode(w[0]), isa.Illegal)


def test_disassemble_reassemble_identity():
    # every emitted word survives a disassemble/re-assemble trip
    src = """
        .org 0x40
    entry:
        li x6, 0x80000000
        lw x5, 8(x6)
        addi x5, x5, -1
        sw x5, 4(x6)
        beq x5, x0, entry
        jal x1, entry
        jalr x0, 0(x1)
        lui x7, 74565
        auipc x8, 1
        div x9, x5, x7
        fence
        ebreak
        .illegal 0xffffffff
    """
    prog = asm.assemble(src)
    w = words_of(prog)
    lines = [f".org {addr}\n{isa.disassemble(word)}"
             for addr, word in sorted(w.items())]
    again = asm.assemble("\n".join(lines))
    assert words_of(again) == w


def test_image_roundtrip(tmp_path):
    prog = asm.assemble(".org 0x80\nli x1, 42\nebreak\n.org 0x400\n.word 7, 8\n")
    path = tmp_path / "prog.img"
    asm.store_image(prog, path)
    back = asm.load_image(path)
    assert back.entry == prog.entry
    assert [(s.base, s.data) for s in back.segments] == \
           [(s.base, s.data) for s in prog.segments]
    assert back.symbols == prog.symbols
    # manifest shape is stable
    manifest = json.loads(path.read_text())
    assert set(manifest["segments"][0]) == {"base", "file", "len", "sha256"}


def test_image_checksum_and_overlap_detection(tmp_path):
    prog = asm.assemble("nop\nebreak\n")
    path = tmp_path / "a.img"
    asm.store_image(prog, path)

    seg = tmp_path / "a.img.seg0"
    seg.write_bytes(b"\x00" * 8)
    with pytest.raises(asm.ImageError, match="checksum"):
        asm.load_image(path)

    asm.store_image(prog, path)
    manifest = json.loads(path.read_text())
    manifest["segments"].append(dict(manifest["segments"][0]))
    path.write_text(json.dumps(manifest))
    with pytest.raises(asm.ImageError, match="overlap"):
        asm.load_image(path)

    path.write_text("{not json")
    with pytest.raises(asm.ImageError, match="unreadable"):
        asm.load_image(path)


def test_entry_outside_segments_rejected(tmp_path):
    prog = asm.assemble("nop\nebreak\n")
    path = tmp_path / "b.img"
    asm.store_image(prog, path)
    manifest = json.loads(path.read_text())
    manifest["entry"] = 0x9000
    path.write_text(json.dumps(manifest))
    with pytest.raises(asm.ImageError, match="entry"):
        asm.load_image(path)
