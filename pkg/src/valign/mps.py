"""Deterministic free-format MPS writer.

Layout contract (also consumed by the bundled adapter in milp_solve):

* leading comment lines ``* key: value`` carry model provenance;
* fixed ``NAME VALIGN`` record so files differ only where models differ;
* one objective row ``N COST``;
* COLUMNS holds one (variable, row, coefficient) triple per line, grouped
  by variable in declaration order, objective entry first;
* ranged rows (two-sided inequalities) appear as sense L plus a RANGES
  entry, meaning rhs - range <= expr <= rhs;
* binaries are declared in BOUNDS with BV;
* SOS sets use a header line `` S<type> SET <name>`` followed by indented
  ``variable weight`` member lines.
"""

from __future__ import annotations

import math

from valign.builder import MilpModel

_SENSE = {"<=": "L", "=": "E", ">=": "G"}

OBJECTIVE_ROW = "COST"
BOUND_SET = "BND"
RHS_SET = "RHS"
RANGE_SET = "RNG"


def _num(value: float) -> str:
    if value != value or math.isinf(value):
        raise ValueError(f"non-finite coefficient {value!r} in MPS output")
    return repr(float(value))


def emit_mps_text(model: MilpModel) -> str:
    """Render the model; pure function of its contents."""
    model.lint()
    lines: list[str] = []
    for key, value in model.provenance:
        lines.append(f"* {key}: {value}")
    lines.append(f"NAME {model.name}")
    lines.append("ROWS")
    lines.append(f" N {OBJECTIVE_ROW}")
    for row in model.constraints:
        lines.append(f" {_SENSE[row.sense]} {row.name}")

    obj = dict(model.objective)
    by_var: dict[str, list[tuple[str, float]]] = {v.name: [] for v in model.variables}
    for row in model.constraints:
        for var, coeff in row.coeffs:
            by_var[var].append((row.name, coeff))

    lines.append("COLUMNS")
    for var in model.variables:
        entries: list[tuple[str, float]] = []
        if var.name in obj:
            entries.append((OBJECTIVE_ROW, obj[var.name]))
        entries.extend(by_var[var.name])
        if not entries:
            entries.append((OBJECTIVE_ROW, 0.0))
        for row_name, coeff in entries:
            lines.append(f"    {var.name} {row_name} {_num(coeff)}")

    lines.append("RHS")
    for row in model.constraints:
        if row.rhs != 0.0:
            lines.append(f"    {RHS_SET} {row.name} {_num(row.rhs)}")

    ranged = [row for row in model.constraints if row.rhs_range is not None]
    if ranged:
        lines.append("RANGES")
        for row in ranged:
            lines.append(f"    {RANGE_SET} {row.name} {_num(row.rhs_range)}")

    lines.append("BOUNDS")
    for var in model.variables:
        if var.kind == "binary":
            lines.append(f" BV {BOUND_SET} {var.name}")
            continue
        lo, hi = var.lower, var.upper
        if lo == 0.0 and hi == math.inf:
            continue
        if lo == hi:
            lines.append(f" FX {BOUND_SET} {var.name} {_num(lo)}")
            continue
        if lo == -math.inf and hi == math.inf:
            lines.append(f" FR {BOUND_SET} {var.name}")
            continue
        if lo == -math.inf:
            lines.append(f" MI {BOUND_SET} {var.name}")
        elif lo != 0.0:
            lines.append(f" LO {BOUND_SET} {var.name} {_num(lo)}")
        if hi != math.inf:
            lines.append(f" UP {BOUND_SET} {var.name} {_num(hi)}")

    if model.sos_sets:
        lines.append("SOS")
        for sos in model.sos_sets:
            lines.append(f" S{sos.sos_type} SET {sos.name}")
            for var, weight in sos.members:
                lines.append(f"    {var} {_num(weight)}")

    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def emit_mps(model: MilpModel, path: str) -> str:
    """Write the rendering to path; returns the path."""
    text = emit_mps_text(model)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)
    return path


def strip_comments(text: str) -> str:
    """Drop comment lines; used to compare models modulo provenance."""
    return "\n".join(line for line in text.splitlines()
                     if not line.startswith("*")) + "\n"
