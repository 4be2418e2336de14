"""Bundled MIP solver adapter.

A small command-line program speaking the same file protocol as any external
solver driven by the gateway: read an MPS file, optimize, write a solution
file of "name value" lines. Optimization is delegated to scipy's milp
(HiGHS). Installed as the ``valign-milp`` console script and used as the
default solver command when none is configured.

SOS sets are rejected unless ``--sos binarize`` is given, in which case each
set is rewritten with auxiliary binaries; this requires finite bounds on all
set members.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, sparse


class MpsError(ValueError):
    """Raised on any defect in the MPS input."""


@dataclass
class ParsedMps:
    name: str = ""
    objective_row: str = ""
    row_sense: dict[str, str] = field(default_factory=dict)      # L/G/E
    row_order: list[str] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    col_index: dict[str, int] = field(default_factory=dict)
    entries: list[tuple[str, str, float]] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    rhs: dict[str, float] = field(default_factory=dict)
    ranges: dict[str, float] = field(default_factory=dict)
    lower: dict[str, float] = field(default_factory=dict)
    upper: dict[str, float] = field(default_factory=dict)
    integer: set[str] = field(default_factory=set)
    sos_sets: list[tuple[int, str, list[tuple[str, float]]]] = field(
        default_factory=list)

    def touch(self, var: str) -> None:
        if var not in self.col_index:
            self.col_index[var] = len(self.columns)
            self.columns.append(var)


def parse_mps(text: str) -> ParsedMps:
    mps = ParsedMps()
    section = None
    in_integer = False
    current_sos: list[tuple[str, float]] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        tokens = raw.split()
        head = tokens[0].upper()

        if not raw[0].isspace():
            if head == "NAME":
                mps.name = tokens[1] if len(tokens) > 1 else ""
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "SOS"):
                section = head
                in_integer = False
                current_sos = None
                continue
            if head == "ENDATA":
                section = None
                break
            raise MpsError(f"line {lineno}: unknown section {tokens[0]!r}")

        if section == "ROWS":
            if len(tokens) != 2:
                raise MpsError(f"line {lineno}: malformed row declaration")
            sense, name = tokens[0].upper(), tokens[1]
            if sense == "N":
                if not mps.objective_row:
                    mps.objective_row = name
                continue
            if sense not in ("L", "G", "E"):
                raise MpsError(f"line {lineno}: unknown row sense {sense!r}")
            if name in mps.row_sense:
                raise MpsError(f"line {lineno}: duplicate row {name!r}")
            mps.row_sense[name] = sense
            mps.row_order.append(name)

        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1] == "'MARKER'":
                marker = tokens[2].strip("'").upper()
                in_integer = marker == "INTORG"
                continue
            if len(tokens) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed column entry")
            var = tokens[0]
            mps.touch(var)
            if in_integer:
                mps.integer.add(var)
            for pos in range(1, len(tokens), 2):
                row, value = tokens[pos], _parse_num(tokens[pos + 1], lineno)
                if row == mps.objective_row:
                    mps.objective[var] = mps.objective.get(var, 0.0) + value
                elif row in mps.row_sense:
                    mps.entries.append((row, var, value))
                else:
                    raise MpsError(f"line {lineno}: unknown row {row!r}")

        elif section == "RHS":
            if len(tokens) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed RHS entry")
            for pos in range(1, len(tokens), 2):
                row, value = tokens[pos], _parse_num(tokens[pos + 1], lineno)
                if row not in mps.row_sense and row != mps.objective_row:
                    raise MpsError(f"line {lineno}: unknown row {row!r}")
                mps.rhs[row] = value

        elif section == "RANGES":
            if len(tokens) not in (3, 5):
                raise MpsError(f"line {lineno}: malformed RANGES entry")
            for pos in range(1, len(tokens), 2):
                row, value = tokens[pos], _parse_num(tokens[pos + 1], lineno)
                if row not in mps.row_sense:
                    raise MpsError(f"line {lineno}: unknown row {row!r}")
                mps.ranges[row] = value

        elif section == "BOUNDS":
            kind = tokens[0].upper()
            if kind in ("FR", "MI", "PL", "BV"):
                if len(tokens) != 3:
                    raise MpsError(f"line {lineno}: malformed bound")
                var = tokens[2]
            else:
                if len(tokens) != 4:
                    raise MpsError(f"line {lineno}: malformed bound")
                var = tokens[2]
            mps.touch(var)
            if kind == "UP":
                mps.upper[var] = _parse_num(tokens[3], lineno)
            elif kind == "LO":
                mps.lower[var] = _parse_num(tokens[3], lineno)
            elif kind == "FX":
                value = _parse_num(tokens[3], lineno)
                mps.lower[var] = value
                mps.upper[var] = value
            elif kind == "FR":
                mps.lower[var] = -math.inf
                mps.upper[var] = math.inf
            elif kind == "MI":
                mps.lower[var] = -math.inf
            elif kind == "PL":
                mps.upper[var] = math.inf
            elif kind == "BV":
                mps.integer.add(var)
                mps.lower[var] = 0.0
                mps.upper[var] = 1.0
            elif kind in ("UI", "LI"):
                mps.integer.add(var)
                value = _parse_num(tokens[3], lineno)
                if kind == "UI":
                    mps.upper[var] = value
                else:
                    mps.lower[var] = value
            else:
                raise MpsError(f"line {lineno}: unknown bound type {kind!r}")

        elif section == "SOS":
            if tokens[0].upper() in ("S1", "S2"):
                sos_type = int(tokens[0][1])
                name = tokens[-1]
                current_sos = []
                mps.sos_sets.append((sos_type, name, current_sos))
            else:
                if current_sos is None or len(tokens) != 2:
                    raise MpsError(f"line {lineno}: malformed SOS entry")
                var, weight = tokens[0], _parse_num(tokens[1], lineno)
                mps.touch(var)
                current_sos.append((var, weight))

        else:
            raise MpsError(f"line {lineno}: data outside any section")

    if not mps.objective_row:
        raise MpsError("no objective row declared")
    return mps


def _parse_num(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise MpsError(f"line {lineno}: bad number {token!r}") from exc
    if value != value:
        raise MpsError(f"line {lineno}: NaN not allowed")
    return value


def binarize_sos(mps: ParsedMps) -> None:
    """Rewrite SOS sets with auxiliary binaries and linking rows in place."""
    for seq, (sos_type, name, members) in enumerate(mps.sos_sets, start=1):
        ordered = sorted(members, key=lambda m: m[1])
        for var, _ in ordered:
            lo = mps.lower.get(var, 0.0)
            hi = mps.upper.get(var, math.inf)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise MpsError(
                    f"SOS set {name}: member {var} has unbounded domain; "
                    "cannot binarize")
        if sos_type == 1:
            flags = []
            for pos, (var, _) in enumerate(ordered, start=1):
                flag = f"_SOSB_{seq}_{pos}"
                flags.append(flag)
                _add_binary(mps, flag)
                _link_member(mps, f"_SOSL_{seq}_{pos}", var, flag)
            row = f"_SOSC_{seq}"
            mps.row_sense[row] = "L"
            mps.row_order.append(row)
            mps.rhs[row] = 1.0
            for flag in flags:
                mps.entries.append((row, flag, 1.0))
        else:
            segs = []
            for pos in range(1, len(ordered)):
                seg = f"_SOSB_{seq}_{pos}"
                segs.append(seg)
                _add_binary(mps, seg)
            row = f"_SOSC_{seq}"
            mps.row_sense[row] = "E"
            mps.row_order.append(row)
            mps.rhs[row] = 1.0
            for seg in segs:
                mps.entries.append((row, seg, 1.0))
            for pos, (var, _) in enumerate(ordered, start=1):
                adjacent = []
                if pos >= 2:
                    adjacent.append(segs[pos - 2])
                if pos <= len(segs):
                    adjacent.append(segs[pos - 1])
                _link_member(mps, f"_SOSL_{seq}_{pos}", var, *adjacent)
    mps.sos_sets.clear()


def _add_binary(mps: ParsedMps, name: str) -> None:
    mps.touch(name)
    mps.integer.add(name)
    mps.lower[name] = 0.0
    mps.upper[name] = 1.0


def _link_member(mps: ParsedMps, row_base: str, var: str, *flags: str) -> None:
    hi = mps.upper.get(var, math.inf)
    lo = mps.lower.get(var, 0.0)
    row = row_base + "U"
    mps.row_sense[row] = "L"
    mps.row_order.append(row)
    mps.entries.append((row, var, 1.0))
    for flag in flags:
        mps.entries.append((row, flag, -hi))
    if lo < 0.0:
        row = row_base + "L"
        mps.row_sense[row] = "G"
        mps.row_order.append(row)
        mps.entries.append((row, var, 1.0))
        for flag in flags:
            mps.entries.append((row, flag, -lo))


def _row_interval(mps: ParsedMps, row: str) -> tuple[float, float]:
    sense = mps.row_sense[row]
    rhs = mps.rhs.get(row, 0.0)
    rng = mps.ranges.get(row)
    if rng is None:
        if sense == "L":
            return -math.inf, rhs
        if sense == "G":
            return rhs, math.inf
        return rhs, rhs
    if sense == "L":
        return rhs - abs(rng), rhs
    if sense == "G":
        return rhs, rhs + abs(rng)
    if rng >= 0:
        return rhs, rhs + rng
    return rhs + rng, rhs


def solve_parsed(mps: ParsedMps, time_limit: float | None,
                 gap: float | None) -> tuple[str, float | None, np.ndarray | None]:
    """Returns (status, objective, values): status in optimal|feasible|
    timeout|infeasible|unbounded|error."""
    ncols = len(mps.columns)
    c = np.zeros(ncols)
    for var, coeff in mps.objective.items():
        c[mps.col_index[var]] = coeff

    lo = np.zeros(ncols)
    hi = np.full(ncols, math.inf)
    for var, value in mps.lower.items():
        lo[mps.col_index[var]] = value
    for var, value in mps.upper.items():
        hi[mps.col_index[var]] = value

    integrality = np.zeros(ncols)
    for var in mps.integer:
        integrality[mps.col_index[var]] = 1

    constraints = []
    if mps.row_order:
        row_pos = {name: pos for pos, name in enumerate(mps.row_order)}
        rows = [row_pos[row] for row, _, _ in mps.entries]
        cols = [mps.col_index[var] for _, var, _ in mps.entries]
        data = [coeff for _, _, coeff in mps.entries]
        matrix = sparse.csr_matrix((data, (rows, cols)),
                                   shape=(len(mps.row_order), ncols))
        lob = np.array([_row_interval(mps, row)[0] for row in mps.row_order])
        upb = np.array([_row_interval(mps, row)[1] for row in mps.row_order])
        constraints = [optimize.LinearConstraint(matrix, lob, upb)]

    options: dict[str, object] = {"presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    if gap is not None:
        options["mip_rel_gap"] = float(gap)

    result = optimize.milp(c, constraints=constraints,
                           integrality=integrality,
                           bounds=optimize.Bounds(lo, hi),
                           options=options)

    if result.status == 0:
        return "optimal", float(result.fun), result.x
    if result.status == 1:
        if result.x is not None:
            return "feasible", float(result.fun), result.x
        return "timeout", None, None
    if result.status == 2:
        return "infeasible", None, None
    if result.status == 3:
        return "unbounded", None, None
    return "error", None, None


def write_solution(path: str, status: str, objective: float | None,
                   wall_time: float, columns: list[str],
                   values: np.ndarray | None,
                   col_index: dict[str, int]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"status {status}\n")
        if objective is not None:
            fh.write(f"objective {objective!r}\n")
        fh.write(f"wall_time {wall_time!r}\n")
        if values is not None:
            for var in columns:
                if var.startswith("_SOSB_"):
                    continue
                fh.write(f"{var} {float(values[col_index[var]])!r}\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="valign-milp",
        description="File-protocol MIP solver: MPS in, name-value solution out.")
    parser.add_argument("mps", help="input MPS file")
    parser.add_argument("solution", help="output solution file")
    parser.add_argument("--time-limit", type=float, default=None,
                        help="wall-clock limit in seconds")
    parser.add_argument("--gap", type=float, default=None,
                        help="relative MIP gap tolerance")
    parser.add_argument("--sos", choices=("reject", "binarize"),
                        default="reject",
                        help="how to treat SOS sections (default: reject)")
    args = parser.parse_args(argv)

    start = time.monotonic()
    try:
        with open(args.mps, "r", encoding="ascii") as fh:
            mps = parse_mps(fh.read())
        if mps.sos_sets:
            if args.sos == "reject":
                raise MpsError(
                    "MPS contains SOS sections; rerun with --sos binarize")
            binarize_sos(mps)
        status, objective, values = solve_parsed(
            mps, args.time_limit, args.gap)
    except (MpsError, OSError) as exc:
        print(f"valign-milp: {exc}", file=sys.stderr)
        try:
            with open(args.solution, "w", encoding="ascii") as fh:
                fh.write("status error\n")
                fh.write(f"message {exc}\n")
        except OSError:
            pass
        return 3

    wall = time.monotonic() - start
    write_solution(args.solution, status, objective, wall,
                   mps.columns, values, mps.col_index)
    print(f"valign-milp: {status}"
          + (f" objective {objective}" if objective is not None else ""))
    return 0


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
