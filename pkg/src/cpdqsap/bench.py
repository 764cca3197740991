"""Run records, solution files, and the benchmark table.

Each table row shows the objective, a reference objective,
``Ratio = reference / solver`` in percent, and wall time. A ratio
above 100% means the solver beat the reference.
"""
from __future__ import annotations

import csv
import io
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .instance import Assignment, CpdFormatError, Instance, generate_random, load_instance
from .model import build_model, objective_exact
from .penalty import NumericalFailure, PenaltyParams, SolveReport, solve
from .rounding import RoundingMode

log = logging.getLogger(__name__)

INSTANCE_SUFFIXES = (".cpd", ".txt", ".json")
CSV_COLUMNS = ("name", "n", "m", "objective", "relaxation", "ratio_pct", "time_ms",
               "reason", "outer_iters", "inner_iters", "reference")
_INT_COLUMNS = {"n", "m", "objective", "outer_iters", "inner_iters", "reference"}
_FLOAT_COLUMNS = {"relaxation", "ratio_pct", "time_ms"}


@dataclass(frozen=True)
class RunRecord:
    name: str
    n: Optional[int]
    m: Optional[int]
    objective: Optional[int]
    relaxation: Optional[float]
    ratio_pct: Optional[float]
    time_ms: float
    reason: str
    outer_iters: Optional[int]
    inner_iters: Optional[int]
    reference: Optional[int] = None

    def __post_init__(self):
        if self.time_ms < 0:
            raise ValueError("time_ms must be >= 0")
        if self.ratio_pct is not None and self.reference is None:
            raise ValueError("ratio needs a reference value")

    @property
    def ok(self) -> bool:
        return self.objective is not None


def ratio_pct(reference: int, objective: int) -> Optional[float]:
    if objective == 0:
        return 100.0 if reference == 0 else None
    return 100.0 * reference / objective


def record_from_report(name: str, inst: Instance, rep: SolveReport,
                       reference: Optional[int] = None) -> RunRecord:
    return RunRecord(
        name=name, n=inst.n, m=inst.m, objective=rep.objective, relaxation=rep.relaxation,
        ratio_pct=None if reference is None else ratio_pct(reference, rep.objective),
        time_ms=rep.time_ms, reason=rep.reason, outer_iters=rep.outer_iters,
        inner_iters=rep.inner_iters, reference=reference,
    )


def failed_record(name: str, reason: str, time_ms: float = 0.0,
                  inst: Optional[Instance] = None) -> RunRecord:
    return RunRecord(name, inst.n if inst else None, inst.m if inst else None, None, None,
                     None, time_ms, reason, None, None)


# -- solution files ---------------------------------------------------------

def format_solution(objective: int, relaxation: float, asg: Assignment) -> str:
    lines = [f"objective {objective}", f"relaxation {relaxation!r}"]
    lines += [f"choose {i} {r}" for i, r in enumerate(asg.one_based(), start=1)]
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> tuple[int, float, Assignment]:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        if rows[0][0] != "objective" or rows[1][0] != "relaxation":
            raise ValueError("expected 'objective' and 'relaxation' header lines")
        objective, relaxation = int(rows[0][1]), float(rows[1][1])
        choices = []
        for k, row in enumerate(rows[2:], start=1):
            if row[0] != "choose" or int(row[1]) != k:
                raise ValueError(f"expected 'choose {k} <r>', got {' '.join(row)!r}")
            choices.append(int(row[2]))
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed solution file: {exc}") from None
    return objective, relaxation, Assignment.from_one_based(choices)


def check_solution(inst: Instance, text: str) -> int:
    """Recompute the objective of a solution file; raise if it disagrees."""
    objective, _, asg = parse_solution(text)
    exact = objective_exact(build_model(inst), asg)
    if exact != objective:
        raise ValueError(f"solution claims {objective}, assignment evaluates to {exact}")
    return exact


# -- CSV and text tables ------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def records_to_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        d = asdict(rec)
        w.writerow([_cell(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def records_from_csv(text: str) -> list[RunRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    out = []
    for row in reader:
        kw = {}
        for name, raw in row.items():
            if name in _INT_COLUMNS:
                kw[name] = int(raw) if raw else None
            elif name in _FLOAT_COLUMNS:
                kw[name] = float(raw) if raw else None
            else:
                kw[name] = raw
        out.append(RunRecord(**kw))
    return out


def format_hms(ms: float) -> str:
    total = ms / 1000.0
    h, rem = divmod(total, 3600)
    m, s = divmod(rem, 60)
    return f"{int(h)}:{int(m):02d}:{s:06.3f}"


def format_table(records: list[RunRecord]) -> str:
    header = ("NO.", "Data", "n", "m", "Objective", "Reference", "Ratio", "Time", "Reason")
    rows = []
    for k, r in enumerate(records, start=1):
        rows.append((
            str(k), r.name, _cell(r.n), _cell(r.m), _cell(r.objective), _cell(r.reference),
            "-" if r.ratio_pct is None else f"{r.ratio_pct:.2f}%",
            format_hms(r.time_ms), r.reason,
        ))
    widths = [max(len(h), *(len(row[c]) for row in rows)) if rows else len(h)
              for c, h in enumerate(header)]
    left = {1, 8}

    def fmt(cells):
        return "  ".join(c.ljust(w) if i in left else c.rjust(w)
                         for i, (c, w) in enumerate(zip(cells, widths))).rstrip()

    lines = [fmt(header), fmt(["-" * w for w in widths])]
    lines += [fmt(row) for row in rows]
    lines.append(summary_line(records))
    return "\n".join(lines) + "\n"


def summary_line(records: list[RunRecord]) -> str:
    ratios = [r.ratio_pct for r in records if r.ratio_pct is not None]
    med = f"{statistics.median(ratios):.2f}%" if ratios else "-"
    solved = sum(r.ok for r in records)
    total = sum(r.time_ms for r in records)
    return (f"instances: {len(records)}  solved: {solved}  median ratio: {med}  "
            f"total time: {format_hms(total)}")


# -- running -----------------------------------------------------------------

def read_references(path: str | os.PathLike) -> dict[str, int]:
    refs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].split()
            if not body:
                continue
            if len(body) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<name> <integer>'")
            # a leading '*' marks a non-proven reference, as in published tables
            refs[body[0]] = int(body[1].lstrip("*"))
    return refs


def instance_files(directory: str | os.PathLike) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in INSTANCE_SUFFIXES)


def run_one(path: str, params: PenaltyParams, mode: str, reference: Optional[int] = None,
            oracle_cap: Optional[int] = None, converter=None) -> RunRecord:
    name = Path(path).stem
    try:
        inst = load_instance(path, converter)
    except (CpdFormatError, OSError, UnicodeDecodeError) as exc:
        log.warning("%s: %s", path, exc)
        return failed_record(name, "parse-error")
    if oracle_cap is not None and reference is None:
        from .oracle import SearchSpaceTooLarge, brute_force
        try:
            reference = brute_force(inst, oracle_cap).value
        except SearchSpaceTooLarge:
            pass
    try:
        rep = solve(build_model(inst), params, mode=mode)
    except (NumericalFailure, OverflowError) as exc:
        log.warning("%s: %s", path, exc)
        return failed_record(name, "numeric-error", inst=inst)
    return record_from_report(name, inst, rep, reference)


def run_bench(directory: str | os.PathLike, params: PenaltyParams,
              mode: str = RoundingMode.GREEDY_GRADIENT.value,
              references: Optional[dict[str, int]] = None, oracle_cap: Optional[int] = None,
              workers: Optional[int] = None, converter=None) -> list[RunRecord]:
    """One record per instance file, ordered by instance name."""
    references = references or {}
    paths = instance_files(directory)
    jobs = [(str(p), params, mode, references.get(p.stem), oracle_cap, converter)
            for p in paths]
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            records = list(pool.map(run_one, *zip(*jobs)))
    else:
        records = [run_one(*job) for job in jobs]
    return sorted(records, key=lambda r: r.name)


# -- seeded random suite ------------------------------------------------------

def suite_instance(seed: int, l_min: int = 2, l_max: int = 4, e_max: int = 100,
                   n_range: tuple[int, int] = (2, 6)) -> Instance:
    """Dense random instance whose size is drawn from the same seed."""
    n = int(np.random.default_rng(seed).integers(n_range[0], n_range[1] + 1))
    return generate_random(n, l_min, l_max, e_max, 1.0, seed)
