"""CPD instance data model, the CPD text format v1, and a seeded generator.

Indices are 1-based on disk and 0-based in memory; the conversion happens
only in ``parse_instance``/``parse_json`` and ``serialize``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

FORMAT_VERSION = 1


class CpdFormatError(ValueError):
    """Malformed CPD document. ``code`` is machine readable, ``line`` is 1-based."""

    def __init__(self, code: str, message: str, line: Optional[int] = None):
        self.code = code
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class InstanceError(ValueError):
    def __init__(self, violations: list["Violation"]):
        self.violations = violations
        super().__init__("; ".join(f"{v.code}: {v.message}" for v in violations))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class Instance:
    """A CPD instance with sparse integer energies.

    ``unary`` maps ``(i, r)`` and ``pairwise`` maps ``(i, r, j, s)`` with
    ``i < j``, all 0-based. Missing keys are zero energies. Treat the maps as
    read-only; instances are shared between solver runs.
    """

    n: int
    rotamer_counts: tuple[int, ...]
    unary: dict[tuple[int, int], int] = field(default_factory=dict)
    pairwise: dict[tuple[int, int, int, int], int] = field(default_factory=dict)

    @property
    def m(self) -> int:
        return int(sum(self.rotamer_counts))

    @property
    def search_space(self) -> int:
        size = 1
        for l in self.rotamer_counts:
            size *= l
        return size


@dataclass(frozen=True)
class Assignment:
    """One rotamer per position, 0-based. ``one_based()`` gives the file view."""

    choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "choices", tuple(int(c) for c in self.choices))

    @classmethod
    def from_one_based(cls, choices: Iterable[int]) -> "Assignment":
        return cls(tuple(int(c) - 1 for c in choices))

    def one_based(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.choices)

    def __len__(self):
        return len(self.choices)

    def __iter__(self):
        return iter(self.choices)

    def __getitem__(self, i):
        return self.choices[i]


def check_assignment(inst: Instance, asg: Assignment) -> None:
    if len(asg.choices) != inst.n:
        raise ValueError(f"assignment has {len(asg.choices)} choices for {inst.n} positions")
    for i, (c, l) in enumerate(zip(asg.choices, inst.rotamer_counts)):
        if not 0 <= c < l:
            raise ValueError(f"choice {c + 1} out of range [1, {l}] at position {i + 1}")


def validate(inst: Instance, require_nonnegative: bool = False) -> list[Violation]:
    """Return every invariant violation of ``inst`` (empty list means valid).

    ``require_nonnegative`` additionally enforces the benchmark dataset's
    contract that all energies are non-negative.
    """
    out: list[Violation] = []
    counts = tuple(inst.rotamer_counts)
    if not isinstance(inst.n, (int, np.integer)) or inst.n < 1:
        out.append(Violation("positions-positive", f"n must be >= 1, got {inst.n}"))
    if len(counts) != inst.n:
        out.append(Violation("rotamer-count-length",
                             f"{len(counts)} rotamer counts for n={inst.n}"))
    for i, l in enumerate(counts):
        if l < 1:
            out.append(Violation("rotamer-count-positive",
                                 f"position {i + 1} has {l} rotamers"))

    def count(i):
        return counts[i] if 0 <= i < len(counts) else 0

    def check_energy(e, what):
        if not isinstance(e, (int, np.integer)) or isinstance(e, bool):
            out.append(Violation("energy-type", f"{what}: energy {e!r} is not an integer"))
        elif not INT64_MIN <= int(e) <= INT64_MAX:
            out.append(Violation("energy-overflow", f"{what}: energy {e} outside int64"))
        elif require_nonnegative and e < 0:
            out.append(Violation("energy-negative", f"{what}: energy {e} < 0"))

    for (i, r), e in inst.unary.items():
        what = f"unary ({i + 1},{r + 1})"
        if not 0 <= i < inst.n:
            out.append(Violation("position-out-of-range", f"{what}: position out of range"))
        elif not 0 <= r < count(i):
            out.append(Violation("rotamer-out-of-range", f"{what}: rotamer out of range"))
        check_energy(e, what)

    for (i, r, j, s), e in inst.pairwise.items():
        what = f"pair ({i + 1},{r + 1},{j + 1},{s + 1})"
        if not (0 <= i < inst.n and 0 <= j < inst.n):
            out.append(Violation("position-out-of-range", f"{what}: position out of range"))
        else:
            if i >= j:
                out.append(Violation("pair-order", f"{what}: pairwise key requires i < j"))
            if not (0 <= r < count(i) and 0 <= s < count(j)):
                out.append(Violation("rotamer-out-of-range", f"{what}: rotamer out of range"))
        check_energy(e, what)
    return out


def _int(token: str, lineno: int) -> int:
    try:
        return int(token, 10)
    except ValueError:
        raise CpdFormatError("syntax", f"expected an integer, got {token!r}", lineno) from None


def parse_instance(text: str) -> Instance:
    """Parse a CPD text format v1 document.

    Every failure is raised as :class:`CpdFormatError`.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            lines.append((lineno, body))

    def expect_header(idx, keyword):
        if idx >= len(lines):
            raise CpdFormatError("syntax", f"unexpected end of input, expected '{keyword}'",
                                 lines[-1][0] if lines else None)
        lineno, toks = lines[idx]
        if toks[0] != keyword:
            raise CpdFormatError("syntax", f"expected '{keyword}', got {toks[0]!r}", lineno)
        return lineno, toks[1:]

    lineno, rest = expect_header(0, "cpd")
    if len(rest) != 1 or _int(rest[0], lineno) != FORMAT_VERSION:
        raise CpdFormatError("version", f"unsupported format version {' '.join(rest)!r}", lineno)

    lineno, rest = expect_header(1, "positions")
    if len(rest) != 1:
        raise CpdFormatError("syntax", "'positions' takes exactly one value", lineno)
    n = _int(rest[0], lineno)
    if n < 1:
        raise CpdFormatError("positions-positive", f"n must be >= 1, got {n}", lineno)

    lineno, rest = expect_header(2, "rotamers")
    counts = tuple(_int(t, lineno) for t in rest)
    if len(counts) != n:
        raise CpdFormatError("rotamer-count-length",
                             f"expected {n} rotamer counts, got {len(counts)}", lineno)
    for i, l in enumerate(counts):
        if l < 1:
            raise CpdFormatError("rotamer-count-positive",
                                 f"position {i + 1} has {l} rotamers", lineno)

    unary: dict[tuple[int, int], int] = {}
    pairwise: dict[tuple[int, int, int, int], int] = {}
    ended = False
    for lineno, toks in lines[3:]:
        if ended:
            raise CpdFormatError("syntax", "content after 'end'", lineno)
        kw, args = toks[0], toks[1:]
        if kw == "end":
            if args:
                raise CpdFormatError("syntax", "'end' takes no arguments", lineno)
            ended = True
        elif kw == "unary":
            if len(args) != 3:
                raise CpdFormatError("syntax", "'unary' takes 3 values: i r E", lineno)
            i, r, e = (_int(t, lineno) for t in args)
            if not 1 <= i <= n:
                raise CpdFormatError("position-out-of-range", f"position {i} not in [1, {n}]", lineno)
            if not 1 <= r <= counts[i - 1]:
                raise CpdFormatError("rotamer-out-of-range",
                                     f"rotamer {r} not in [1, {counts[i - 1]}]", lineno)
            _check_range(e, lineno)
            key = (i - 1, r - 1)
            if key in unary:
                raise CpdFormatError("duplicate-key", f"duplicate unary key ({i},{r})", lineno)
            unary[key] = e
        elif kw == "pair":
            if len(args) != 5:
                raise CpdFormatError("syntax", "'pair' takes 5 values: i r j s E", lineno)
            i, r, j, s, e = (_int(t, lineno) for t in args)
            for p in (i, j):
                if not 1 <= p <= n:
                    raise CpdFormatError("position-out-of-range",
                                         f"position {p} not in [1, {n}]", lineno)
            if i >= j:
                raise CpdFormatError("pair-order", "pairwise key requires i < j", lineno)
            if not 1 <= r <= counts[i - 1] or not 1 <= s <= counts[j - 1]:
                raise CpdFormatError("rotamer-out-of-range", "rotamer index out of range", lineno)
            _check_range(e, lineno)
            key = (i - 1, r - 1, j - 1, s - 1)
            if key in pairwise:
                raise CpdFormatError("duplicate-key",
                                     f"duplicate pair key ({i},{r},{j},{s})", lineno)
            pairwise[key] = e
        else:
            raise CpdFormatError("syntax", f"unknown record {kw!r}", lineno)
    if not ended:
        raise CpdFormatError("syntax", "missing 'end'", lines[-1][0])
    return Instance(n, counts, unary, pairwise)


def _check_range(e: int, lineno: Optional[int]) -> None:
    if not INT64_MIN <= e <= INT64_MAX:
        raise CpdFormatError("energy-overflow", f"energy {e} outside int64 range", lineno)


def parse_json(text: str) -> Instance:
    """Parse the JSON mirror of format v1 (1-based indices, same checks)."""
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise CpdFormatError("syntax", f"invalid JSON: {exc}") from None
    try:
        n = doc["n"]
        counts = doc["rotamer_counts"]
        unary_rows = doc.get("unary", [])
        pair_rows = doc.get("pairwise", [])
    except (KeyError, TypeError, AttributeError) as exc:
        raise CpdFormatError("syntax", f"missing or malformed field: {exc}") from None
    # re-emit as text so both front ends share one validator
    try:
        lines = ["cpd 1", f"positions {_json_int(n)}",
                 "rotamers " + " ".join(str(_json_int(l)) for l in counts)]
        for row in unary_rows:
            lines.append("unary " + " ".join(str(_json_int(v)) for v in _row(row, 3)))
        for row in pair_rows:
            lines.append("pair " + " ".join(str(_json_int(v)) for v in _row(row, 5)))
    except TypeError as exc:
        raise CpdFormatError("syntax", str(exc)) from None
    lines.append("end")
    return parse_instance("\n".join(lines))


def _json_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise CpdFormatError("syntax", f"expected an integer, got {v!r}")
    return v


def _row(row, width):
    if not isinstance(row, list) or len(row) != width:
        raise CpdFormatError("syntax", f"expected an array of {width} integers, got {row!r}")
    return row


def serialize(inst: Instance) -> str:
    """Canonical text form; keys sorted so output is byte-stable."""
    out = [f"cpd {FORMAT_VERSION}", f"positions {inst.n}",
           "rotamers " + " ".join(str(l) for l in inst.rotamer_counts)]
    for (i, r) in sorted(inst.unary):
        out.append(f"unary {i + 1} {r + 1} {int(inst.unary[i, r])}")
    for key in sorted(inst.pairwise):
        i, r, j, s = key
        out.append(f"pair {i + 1} {r + 1} {j + 1} {s + 1} {int(inst.pairwise[key])}")
    out.append("end")
    return "\n".join(out) + "\n"


def serialize_json(inst: Instance) -> str:
    doc = {
        "n": inst.n,
        "rotamer_counts": list(inst.rotamer_counts),
        "unary": [[i + 1, r + 1, int(inst.unary[i, r])] for (i, r) in sorted(inst.unary)],
        "pairwise": [[i + 1, r + 1, j + 1, s + 1, int(inst.pairwise[i, r, j, s])]
                     for (i, r, j, s) in sorted(inst.pairwise)],
    }
    return json.dumps(doc, indent=1) + "\n"


Converter = Callable[[str], str]


def load_instance(path: str | os.PathLike, converter: Optional[Converter] = None) -> Instance:
    """Read an instance file.

    ``converter`` is the hook for foreign formats: it receives the path and
    must return a CPD text v1 document. Without one, ``.json`` files go
    through :func:`parse_json` and everything else through
    :func:`parse_instance`.
    """
    path = os.fspath(path)
    if converter is not None:
        return parse_instance(converter(path))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.lower().endswith(".json"):
        return parse_json(text)
    return parse_instance(text)


def generate_random(n: int, l_min: int, l_max: int, e_max: int, density: float,
                    seed: int, e_min: int = 0) -> Instance:
    """Seeded random instance.

    Rotamer counts are uniform in ``[l_min, l_max]``. Each unary and pairwise
    entry is present with probability ``density`` and, when present, uniform
    in ``[e_min, e_max]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= l_min <= l_max:
        raise ValueError("need 1 <= l_min <= l_max")
    if e_max < 0 or e_min > e_max:
        raise ValueError("need e_max >= 0 and e_min <= e_max")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    counts = tuple(int(c) for c in rng.integers(l_min, l_max + 1, size=n))

    unary = {}
    for i, l in enumerate(counts):
        keep = rng.random(l) < density
        vals = rng.integers(e_min, e_max + 1, size=l)
        for r in np.flatnonzero(keep):
            unary[i, int(r)] = int(vals[r])

    pairwise = {}
    for i in range(n):
        for j in range(i + 1, n):
            shape = (counts[i], counts[j])
            keep = rng.random(shape) < density
            vals = rng.integers(e_min, e_max + 1, size=shape)
            for r, s in zip(*np.nonzero(keep)):
                pairwise[i, int(r), j, int(s)] = int(vals[r, s])
    return Instance(n, counts, unary, pairwise)


def separable(counts: Sequence[int], unary: dict[tuple[int, int], int]) -> Instance:
    return Instance(len(counts), tuple(counts), dict(unary), {})
