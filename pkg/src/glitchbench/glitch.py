"""Glitch parameters and the capture-corruption planner.

A glitch is a single premature clock edge: in the victim cycle the capture
edge arrives `offset` nanoseconds after the launch edge instead of a full
period later. For every latch that actually captures at that edge, bits whose
arrival time exceeds offset - t_setup miss the edge; what the latch ends up
holding for those bits depends on the corruption policy.

Latches that hold (stall) or that capture a reset bubble have no in-flight
data and come through clean.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .latches import FIELD_WIDTH, LATCHES, field_names
from .timing import TimingModel


class CorruptionPolicy(enum.Enum):
    # late bits keep the latch's previous contents
    STALE_BITS = "STALE_BITS"
    # any late bit makes the whole latch keep its previous contents
    STALE_REGISTER = "STALE_REGISTER"
    # late bits capture as zero
    ZERO_LATE_BITS = "ZERO_LATE_BITS"


class IllegalPolicy(enum.Enum):
    """What the decoder does with a corrupted word that no longer decodes."""

    NOP_REPLACE = "NOP_REPLACE"
    TRAP = "TRAP"


@dataclass(frozen=True)
class GlitchSpec:
    cycle: int
    offset_ns: float
    policy: CorruptionPolicy = CorruptionPolicy.STALE_BITS
    illegal_policy: IllegalPolicy = IllegalPolicy.NOP_REPLACE


@dataclass(frozen=True)
class LatchCapture:
    """What one latch is doing at the glitched edge.

    fresh=False means the latch held its old value (no capture, immune).
    iclass=None means the incoming data is a reset bubble with no driver
    (stall insertion, post-halt drain), which is also immune. A squashed
    instruction still drives the latch inputs, so flush bubbles keep the
    class of the squashed instruction and stay corruptible.
    """

    latch: str
    fresh: bool
    iclass: str | None
    incoming: dict      # field -> value the capture would latch glitch-free
    previous: dict      # field -> value latched the cycle before


@dataclass(frozen=True)
class FieldCorruption:
    field: str
    late_bits: tuple[int, ...]
    clean: int
    corrupted: int


@dataclass(frozen=True)
class LatchEffect:
    latch: str
    iclass: str
    fields: tuple[FieldCorruption, ...]
    ghost: bool = False          # valid corrupted 0 -> 1, stale slot revived
    bubble_injected: bool = False  # valid corrupted 1 -> 0, slot killed

    @property
    def corrupted(self) -> bool:
        return bool(self.fields)

    def value(self) -> dict:
        out = dict()
        for fc in self.fields:
            out[fc.field] = fc.corrupted
        return out


@dataclass(frozen=True)
class GlitchEffect:
    spec: GlitchSpec
    latches: dict = field(default_factory=dict)  # latch -> LatchEffect

    @property
    def any_corruption(self) -> bool:
        return any(e.corrupted for e in self.latches.values())


def _mask_merge(clean: int, stale: int, bits: tuple[int, ...]) -> int:
    mask = 0
    for b in bits:
        mask |= 1 << b
    return (clean & ~mask) | (stale & mask)


def _mask_clear(clean: int, bits: tuple[int, ...]) -> int:
    mask = 0
    for b in bits:
        mask |= 1 << b
    return clean & ~mask


def plan_effect(spec: GlitchSpec, captures: dict,
                timing: TimingModel) -> GlitchEffect:
    """Work out the corrupted contents of every latch at the glitched edge.

    `captures` maps latch name to LatchCapture. Corruption is recorded per
    field whenever any bit arrives late, even if the substituted value
    happens to equal the clean one; downstream divergence is a separate
    question from timing violation.
    """

    timing.check_offset(spec.offset_ns)
    effects: dict[str, LatchEffect] = {}
    for latch in LATCHES:
        cap = captures.get(latch)
        if cap is None or not cap.fresh or cap.iclass is None:
            continue
        late: dict[str, tuple[int, ...]] = {}
        for fname in field_names(latch):
            bits = timing.late_bits(cap.iclass, latch, fname, spec.offset_ns)
            if bits:
                late[fname] = bits
        if not late:
            continue

        fields = []
        if spec.policy is CorruptionPolicy.STALE_REGISTER:
            # one late bit anywhere reverts the entire register
            for fname in field_names(latch):
                fields.append(FieldCorruption(
                    fname, late.get(fname, ()),
                    cap.incoming[fname], cap.previous[fname]))
        else:
            for fname, bits in late.items():
                clean = cap.incoming[fname]
                if spec.policy is CorruptionPolicy.STALE_BITS:
                    bad = _mask_merge(clean, cap.previous[fname], bits)
                else:
                    bad = _mask_clear(clean, bits)
                fields.append(FieldCorruption(fname, bits, clean, bad))

        by_name = {fc.field: fc for fc in fields}
        valid_in = cap.incoming["valid"] & 1
        valid_out = by_name["valid"].corrupted & 1 \
            if "valid" in by_name else valid_in
        effects[latch] = LatchEffect(
            latch, cap.iclass, tuple(fields),
            ghost=(valid_in == 0 and valid_out == 1),
            bubble_injected=(valid_in == 1 and valid_out == 0))
    return GlitchEffect(spec, effects)
