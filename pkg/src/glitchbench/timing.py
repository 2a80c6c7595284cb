"""Per-class, per-latch timing annotations and the clock-glitch arithmetic.

The model is deliberately simple: every (instruction class, latch) pair has a
critical-path delay t_crit measured from the launching clock edge to the last
settling bit of that latch's input. A glitch that shortens the active cycle to
`offset` nanoseconds corrupts a capture when the data needed more time than
the edge allowed, i.e. when offset < t_crit + t_setup. Individual bits settle
earlier than the field maximum, so partial corruption is resolved per bit via
a deterministic pseudo-random arrival spread.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .isa import IClass
from .latches import FIELD_WIDTH, LATCH_FIELDS, LATCHES

CLASS_NAMES = tuple(c.value for c in IClass)


class TimingError(ValueError):
    """Raised for malformed or inconsistent timing descriptions."""


@dataclass(frozen=True)
class TimingModel:
    clock_period_ns: float
    setup_ns: float
    min_glitch_ns: float
    crit_ns: dict          # (iclass name, latch) -> float
    field_factors: dict    # latch -> {field -> float in (0, 1]}
    bit_spread_seed: int
    _arrival_cache: dict = field(default_factory=dict, compare=False, repr=False)

    # -- scalar queries ----------------------------------------------------

    def crit(self, iclass: str, latch: str) -> float:
        return self.crit_ns[iclass, latch]

    def slack(self, iclass: str, latch: str) -> float:
        return self.clock_period_ns - self.setup_ns - self.crit(iclass, latch)

    def violates(self, iclass: str, latch: str, offset: float) -> bool:
        """True when a glitch edge at `offset` corrupts this capture."""

        self.check_offset(offset)
        return offset < self.crit(iclass, latch) + self.setup_ns

    def check_offset(self, offset: float) -> None:
        if not self.min_glitch_ns <= offset < self.clock_period_ns:
            raise TimingError(
                f"offset {offset} outside [{self.min_glitch_ns}, "
                f"{self.clock_period_ns})")

    def max_factor(self, latch: str) -> float:
        return max(self.field_factors[latch].values())

    def threshold(self, iclass: str, latch: str) -> float:
        """Largest bit arrival plus setup: offsets below this corrupt."""

        return self.crit(iclass, latch) * self.max_factor(latch) + self.setup_ns

    # -- per-bit arrivals ---------------------------------------------------

    def field_arrival(self, iclass: str, latch: str, fname: str) -> float:
        return self.crit(iclass, latch) * self.field_factors[latch][fname]

    def bit_arrivals(self, iclass: str, latch: str, fname: str) -> tuple[float, ...]:
        """Arrival time of every bit of one latch field, LSB first.

        One designated bit lands exactly at the field arrival; the rest are
        scattered into [0.3, 1.0) of it by a seeded hash, so the profile is
        reproducible across runs and processes.
        """

        key = (iclass, latch, fname)
        hit = self._arrival_cache.get(key)
        if hit is not None:
            return hit
        width = FIELD_WIDTH[latch, fname]
        peak = self.field_arrival(iclass, latch, fname)
        chosen = self._hash(latch, fname, "pick") % width
        arrivals = []
        for bit in range(width):
            if bit == chosen:
                arrivals.append(peak)
            else:
                u = self._hash(latch, fname, str(bit)) / 2**64
                arrivals.append(peak * (0.3 + 0.7 * u))
        out = tuple(arrivals)
        self._arrival_cache[key] = out
        return out

    def late_bits(self, iclass: str, latch: str, fname: str,
                  offset: float) -> tuple[int, ...]:
        """Bits of one field whose data misses the early capture edge.

        Compared as arrival + setup > offset, the same expression
        threshold() evaluates, so the two agree bit-for-bit in floating
        point and an offset exactly on a threshold stays safe."""

        return tuple(b for b, t in
                     enumerate(self.bit_arrivals(iclass, latch, fname))
                     if t + self.setup_ns > offset)

    def _hash(self, *parts: str) -> int:
        text = "|".join((str(self.bit_spread_seed),) + parts)
        return int.from_bytes(
            hashlib.sha256(text.encode()).digest()[:8], "big")

    # -- io ------------------------------------------------------------------

    def to_dict(self) -> dict:
        crit: dict[str, dict[str, float]] = {}
        for (iclass, latch), value in sorted(self.crit_ns.items()):
            crit.setdefault(iclass, {})[latch] = value
        return {
            "clock_period_ns": self.clock_period_ns,
            "setup_ns": self.setup_ns,
            "min_glitch_ns": self.min_glitch_ns,
            "crit_ns": crit,
            "field_factors": {k: dict(v) for k, v in self.field_factors.items()},
            "bit_spread_seed": self.bit_spread_seed,
        }


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise TimingError(msg)


def timing_from_dict(doc: dict) -> TimingModel:
    _require(isinstance(doc, dict), "timing document must be an object")
    for key in ("clock_period_ns", "setup_ns", "min_glitch_ns",
                "crit_ns", "field_factors", "bit_spread_seed"):
        _require(key in doc, f"missing key {key!r}")
    period = float(doc["clock_period_ns"])
    setup = float(doc["setup_ns"])
    o_min = float(doc["min_glitch_ns"])
    seed = doc["bit_spread_seed"]
    _require(period > 0, "clock_period_ns must be positive")
    _require(0 < setup < period, "setup_ns must lie inside the clock period")
    _require(isinstance(seed, int) and seed >= 0,
             "bit_spread_seed must be a non-negative integer")

    raw_crit = doc["crit_ns"]
    _require(isinstance(raw_crit, dict), "crit_ns must be an object")
    _require(set(raw_crit) == set(CLASS_NAMES),
             f"crit_ns must cover exactly {sorted(CLASS_NAMES)}")
    crit: dict[tuple[str, str], float] = {}
    for iclass, row in raw_crit.items():
        _require(isinstance(row, dict) and set(row) == set(LATCHES),
                 f"crit_ns[{iclass!r}] must cover exactly {list(LATCHES)}")
        for latch, value in row.items():
            value = float(value)
            _require(0 < value < period - setup,
                     f"crit_ns[{iclass!r}][{latch!r}]={value} must be in "
                     f"(0, {period - setup})")
            crit[iclass, latch] = value

    raw_ff = doc["field_factors"]
    _require(isinstance(raw_ff, dict) and set(raw_ff) == set(LATCHES),
             f"field_factors must cover exactly {list(LATCHES)}")
    factors: dict[str, dict[str, float]] = {}
    for latch, row in raw_ff.items():
        names = {name for name, _ in LATCH_FIELDS[latch]}
        _require(isinstance(row, dict) and set(row) == names,
                 f"field_factors[{latch!r}] must cover exactly {sorted(names)}")
        factors[latch] = {}
        for fname, fac in row.items():
            fac = float(fac)
            _require(0 < fac <= 1.0,
                     f"field_factors[{latch!r}][{fname!r}]={fac} "
                     "must be in (0, 1]")
            factors[latch][fname] = fac

    _require(o_min > 0, "min_glitch_ns must be positive")
    floor = min(crit.values()) + setup
    _require(o_min < floor,
             f"min_glitch_ns={o_min} must be below the weakest capture "
             f"threshold {floor}")
    return TimingModel(period, setup, o_min, crit, factors, seed)


def load_timing(path) -> TimingModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise TimingError(f"cannot read timing file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TimingError(f"timing file is not valid JSON: {exc}") from exc
    return timing_from_dict(doc)


def save_timing(model: TimingModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def reference_timing() -> TimingModel:
    """The synthetic annotation set shipped as fixtures/timing_ref.json.

    Numbers are hand-picked to exercise the interesting structure: loads are
    the slowest fetch-side class, divides dominate the execute latch, writeback
    paths are short, and every latch has a field whose factor is exactly 1.0
    so the per-class threshold equals t_crit + t_setup.
    """

    crit = {
        #              IF_ID  ID_EX  EX_WB
        "ALU_REG":    (7.9,   7.0,   4.5),
        "ALU_IMM":    (7.8,   7.0,   4.5),
        "LOAD":       (8.6,   7.6,   5.2),
        "STORE":      (8.1,   7.4,   4.2),
        "BRANCH":     (8.0,   7.8,   4.0),
        "JUMP":       (7.7,   7.2,   4.4),
        "UPPER":      (7.5,   6.2,   4.3),
        "MULDIV":     (8.2,   8.2,   6.0),
        "SYSTEM":     (7.2,   5.5,   3.5),
    }
    doc = {
        "clock_period_ns": 10.0,
        "setup_ns": 0.2,
        "min_glitch_ns": 1.0,
        "crit_ns": {name: dict(zip(LATCHES, row)) for name, row in crit.items()},
        "field_factors": {
            "IF_ID": {"instr_word": 1.0, "pc": 0.75, "valid": 0.12},
            "ID_EX": {"control": 0.9, "rs1_val": 1.0, "rs2_val": 0.97,
                      "imm": 0.85, "rd": 0.6, "pc": 0.5, "valid": 0.1},
            "EX_WB": {"result": 1.0, "rd": 0.5, "is_load": 0.35,
                      "mem_data": 0.96, "valid": 0.1},
        },
        "bit_spread_seed": 0x5EED5EED,
    }
    return timing_from_dict(doc)
