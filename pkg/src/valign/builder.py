"""Construction of the alignment MILP variants as solver-neutral models.

Three model families share the spline, volume, and slope rows:

* MHQNF: per-haul directed transit chains with time-expanded block logic.
* QNF: the same construction restricted to a single haul class.
* CTG: a block-free complete transportation graph with one arc per
  (supply node, demand node) pair, quadratic in the section count.

Variable names are a stable external contract (they appear in MPS files and
solution files): A_<g>_<k>, U_<i>, VP_<i>, VM_<i>, FR/FU/FL_<h>_<t>_<i>_<j>,
FB/FW_<h>_<t>_<pit>_<dir>, Y_<k>_<t>, X_<i>_<j>. Pit volume variables use
node indices n+j (borrow) and n+n_borrow+k (waste).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from valign.instance import (
    HaulClass,
    RoadInstance,
    big_m,
    block_access_sets,
    cheapest_haul,
    global_big_m,
)


class BuildError(ValueError):
    """Raised when a model cannot be constructed for an instance/config."""


@dataclass(frozen=True, slots=True)
class Variable:
    name: str
    kind: str = "continuous"    # "continuous" | "binary"
    lower: float = 0.0
    upper: float = math.inf


@dataclass(frozen=True, slots=True)
class LinearConstraint:
    """Row: sum(coeff * var) <sense> rhs.

    A ranged row (rhs_range is not None, sense "<=") additionally satisfies
    expr >= rhs - rhs_range.
    """

    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str                  # "<=" | "=" | ">="
    rhs: float
    rhs_range: float | None = None


@dataclass(frozen=True, slots=True)
class SosSet:
    name: str
    sos_type: int               # 1 or 2
    members: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class MilpModel:
    name: str
    variables: tuple[Variable, ...]
    constraints: tuple[LinearConstraint, ...]
    sos_sets: tuple[SosSet, ...]
    objective: tuple[tuple[str, float], ...]
    sense: str = "min"
    provenance: tuple[tuple[str, str], ...] = ()

    @cached_property
    def variable_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    @property
    def binary_count(self) -> int:
        return sum(1 for v in self.variables if v.kind == "binary")

    def lint(self) -> None:
        """Check referential integrity; raises BuildError on any defect."""
        seen: set[str] = set()
        for v in self.variables:
            if v.name in seen:
                raise BuildError(f"variable {v.name} declared twice")
            seen.add(v.name)
            if v.lower > v.upper:
                raise BuildError(f"variable {v.name}: lower > upper")
            if v.kind == "binary" and (v.lower < 0 or v.upper > 1):
                raise BuildError(f"variable {v.name}: binary outside [0,1]")
        row_names: set[str] = set()
        for row in self.constraints:
            if row.name in row_names:
                raise BuildError(f"row {row.name} declared twice")
            row_names.add(row.name)
            row_vars = set()
            for var, coeff in row.coeffs:
                if var not in seen:
                    raise BuildError(f"row {row.name}: unknown variable {var}")
                if var in row_vars:
                    raise BuildError(f"row {row.name}: duplicate variable {var}")
                row_vars.add(var)
                if not math.isfinite(coeff):
                    raise BuildError(f"row {row.name}: non-finite coefficient")
        for var, coeff in self.objective:
            if var not in seen:
                raise BuildError(f"objective: unknown variable {var}")
            if not math.isfinite(coeff):
                raise BuildError(f"objective: non-finite cost on {var}")
        for sos in self.sos_sets:
            if len(sos.members) < 2:
                raise BuildError(f"SOS set {sos.name}: needs >= 2 members")
            weights = [w for _, w in sos.members]
            if len(set(weights)) != len(weights):
                raise BuildError(f"SOS set {sos.name}: duplicate weights")
            for var, _ in sos.members:
                if var not in seen:
                    raise BuildError(f"SOS set {sos.name}: unknown variable {var}")


BLOCK_TECHNIQUES = ("basic", "sos1")
VOLUME_MODES = ("linear", "piecewise-sos2", "piecewise-binary")
MODELS = ("MHQNF", "QNF", "CTG")


@dataclass(frozen=True)
class BuilderConfig:
    """Which model variant to build and with which formulation switches."""

    model: str = "MHQNF"
    haul_subset: tuple[HaulClass, ...] | None = None
    block_technique: str = "basic"
    volume_mode: str = "linear"
    name: str = ""

    def validate(self) -> None:
        if self.model not in MODELS:
            raise BuildError(f"unknown model {self.model!r}")
        if self.block_technique not in BLOCK_TECHNIQUES:
            raise BuildError(f"unknown block technique {self.block_technique!r}")
        if self.volume_mode not in VOLUME_MODES:
            raise BuildError(f"unknown volume mode {self.volume_mode!r}")
        if self.model == "QNF":
            if self.haul_subset is None or len(self.haul_subset) != 1:
                raise BuildError("QNF requires exactly one haul class")


# Published single-haul benchmark cost pairs (loading, per-meter).
QNF_COST_PAIRS: dict[str, tuple[float, float]] = {
    "short": (0.000, 0.008),
    "middle": (0.600, 0.004),
    "long": (2.600, 0.002),
    "avg": (1.067, 0.005),
}

_NAMED_QNF = {"QNS": "short", "QNM": "middle", "QNL": "long", "QNA": "avg"}


def named_config(name: str) -> BuilderConfig:
    """Benchmark configuration registry: MQN/CTG/QNS/QNM/QNL/QNA x -B/-S1."""
    base, _, suffix = name.partition("-")
    if suffix not in ("B", "S1"):
        raise BuildError(f"unknown config name {name!r} (expected -B or -S1 suffix)")
    technique = "basic" if suffix == "B" else "sos1"
    if base == "MQN":
        return BuilderConfig(model="MHQNF", block_technique=technique, name=name)
    if base == "CTG":
        return BuilderConfig(model="CTG", block_technique=technique, name=name)
    if base in _NAMED_QNF:
        label = _NAMED_QNF[base]
        loading, per_m = QNF_COST_PAIRS[label]
        haul = HaulClass(label, loading_cost=loading, unit_haul_cost=per_m)
        return BuilderConfig(model="QNF", haul_subset=(haul,),
                             block_technique=technique, name=name)
    raise BuildError(f"unknown config name {name!r}")


def effective_hauls(instance: RoadInstance,
                    config: BuilderConfig) -> tuple[HaulClass, ...]:
    hauls = config.haul_subset if config.haul_subset is not None \
        else instance.cost_model.hauls
    return tuple(hauls)


class _Assembler:
    """Accumulates a model; rejects duplicate names as they appear."""

    def __init__(self, name: str):
        self.name = name
        self.variables: dict[str, Variable] = {}
        self.rows: dict[str, LinearConstraint] = {}
        self.sos: list[SosSet] = []
        self.objective: dict[str, float] = {}

    def var(self, name: str, lower: float = 0.0, upper: float = math.inf,
            kind: str = "continuous", cost: float = 0.0) -> str:
        if name in self.variables:
            raise BuildError(f"variable {name} declared twice")
        self.variables[name] = Variable(name, kind, lower, upper)
        if cost != 0.0:
            self.objective[name] = self.objective.get(name, 0.0) + cost
        return name

    def row(self, name: str, coeffs: Mapping[str, float] | Iterable[tuple[str, float]],
            sense: str, rhs: float, rhs_range: float | None = None) -> None:
        if name in self.rows:
            raise BuildError(f"row {name} declared twice")
        merged: dict[str, float] = {}
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        for var, coeff in items:
            merged[var] = merged.get(var, 0.0) + coeff
        self.rows[name] = LinearConstraint(
            name, tuple(merged.items()), sense, rhs, rhs_range)

    def add_sos(self, name: str, sos_type: int,
                members: Sequence[tuple[str, float]]) -> None:
        self.sos.append(SosSet(name, sos_type, tuple(members)))

    def finish(self, provenance: Sequence[tuple[str, str]]) -> MilpModel:
        model = MilpModel(
            name=self.name,
            variables=tuple(self.variables.values()),
            constraints=tuple(self.rows.values()),
            sos_sets=tuple(self.sos),
            objective=tuple(self.objective.items()),
            provenance=tuple(provenance),
        )
        model.lint()
        return model


def _check_segments(instance: RoadInstance) -> None:
    layout = instance.segment_layout
    for g in range(1, layout.segment_count + 1):
        start, end = instance.segment_span(g)
        if end <= start:
            raise BuildError(f"segment {g} has zero length (stations {start}..{end})")


def _spline_rows(asm: _Assembler, instance: RoadInstance, volume_mode: str) -> None:
    """Shared rows: coefficients, offsets, volumes, continuity, slope."""
    layout = instance.segment_layout
    m = layout.segment_count

    for g in range(1, m + 1):
        for k in (1, 2, 3):
            asm.var(f"A_{g}_{k}", -math.inf, math.inf)
    for i in range(1, instance.n + 1):
        sec = instance.section(i)
        asm.var(f"U_{i}", sec.offset_lo, sec.offset_hi)

    n_b = len(instance.borrow_pits)
    for i in range(1, instance.n + 1):
        cap = big_m(instance, i, volume_mode)
        asm.var(f"VP_{i}", 0.0, cap, cost=instance.material_of(i).excavation)
    for j, pit in enumerate(instance.borrow_pits, start=1):
        asm.var(f"VP_{instance.n + j}", 0.0, pit.capacity)
    for i in range(1, instance.n + 1):
        cap = big_m(instance, i, volume_mode)
        asm.var(f"VM_{i}", 0.0, cap, cost=instance.material_of(i).embankment)
    for k, pit in enumerate(instance.waste_pits, start=1):
        asm.var(f"VM_{instance.n + n_b + k}", 0.0, pit.capacity)

    # Offset definition: U_i + P(s_i) = E_i, expanded over local coordinates.
    for i in range(1, instance.n + 1):
        g = layout.segment_of(i)
        sigma = instance.local_coordinate(i)
        asm.row(f"OFF_{i}",
                [(f"U_{i}", 1.0), (f"A_{g}_1", 1.0), (f"A_{g}_2", sigma),
                 (f"A_{g}_3", sigma * sigma)],
                "=", instance.section(i).ground_elevation)

    if volume_mode == "linear":
        for i in range(1, instance.n + 1):
            asm.row(f"VOL_{i}",
                    [(f"VP_{i}", 1.0), (f"VM_{i}", -1.0),
                     (f"U_{i}", -instance.section(i).area)],
                    "=", 0.0)
    else:
        missing = [i for i in range(1, instance.n + 1)
                   if i not in instance.curve_by_section]
        if missing:
            raise BuildError(
                "piecewise volume mode needs a curve for every section; "
                f"missing for sections {missing}")
        for i in range(1, instance.n + 1):
            curve = instance.curve_by_section[i]
            breaks = len(curve.offsets)
            lams = [asm.var(f"LAM_{i}_{b}", 0.0, 1.0) for b in range(1, breaks + 1)]
            asm.row(f"PWS_{i}", [(lam, 1.0) for lam in lams], "=", 1.0)
            asm.row(f"PWU_{i}",
                    [(f"U_{i}", 1.0)] + [(lam, -off) for lam, off
                                         in zip(lams, curve.offsets)],
                    "=", 0.0)
            asm.row(f"PWC_{i}",
                    [(f"VP_{i}", 1.0)] + [(lam, -c) for lam, c
                                          in zip(lams, curve.cut)],
                    "=", 0.0)
            asm.row(f"PWF_{i}",
                    [(f"VM_{i}", 1.0)] + [(lam, -fl) for lam, fl
                                          in zip(lams, curve.fill)],
                    "=", 0.0)
            if volume_mode == "piecewise-sos2":
                asm.add_sos(f"SV_{i}", 2,
                            [(lam, off) for lam, off in zip(lams, curve.offsets)])
            else:
                zs = [asm.var(f"Z_{i}_{b}", 0.0, 1.0, kind="binary")
                      for b in range(1, breaks)]
                asm.row(f"PWZ_{i}", [(z, 1.0) for z in zs], "=", 1.0)
                for b in range(1, breaks + 1):
                    adjacent = []
                    if b >= 2:
                        adjacent.append((zs[b - 2], -1.0))
                    if b <= breaks - 1:
                        adjacent.append((zs[b - 1], -1.0))
                    asm.row(f"PWA_{i}_{b}", [(lams[b - 1], 1.0)] + adjacent,
                            "<=", 0.0)

    # Continuity at each internal boundary: segment g-1 evaluated at its far
    # end equals segment g at its origin (local coordinate 0).
    for g in range(2, m + 1):
        start_prev, end_prev = instance.segment_span(g - 1)
        span = end_prev - start_prev
        asm.row(f"C0_{g}",
                [(f"A_{g - 1}_1", 1.0), (f"A_{g - 1}_2", span),
                 (f"A_{g - 1}_3", span * span), (f"A_{g}_1", -1.0)],
                "=", 0.0)
        asm.row(f"C1_{g}",
                [(f"A_{g - 1}_2", 1.0), (f"A_{g - 1}_3", 2.0 * span),
                 (f"A_{g}_2", -1.0)],
                "=", 0.0)

    # Grade is affine per segment: bounding both endpoints bounds the segment.
    slope_range = instance.slope_hi - instance.slope_lo
    for g in range(1, m + 1):
        start, end = instance.segment_span(g)
        span = end - start
        asm.row(f"SLP_{g}_S", [(f"A_{g}_2", 1.0)],
                "<=", instance.slope_hi, rhs_range=slope_range)
        asm.row(f"SLP_{g}_E", [(f"A_{g}_2", 1.0), (f"A_{g}_3", 2.0 * span)],
                "<=", instance.slope_hi, rhs_range=slope_range)


def build(instance: RoadInstance, config: BuilderConfig) -> MilpModel:
    """Build the MHQNF or QNF flow model (or dispatch to CTG)."""
    config.validate()
    instance.check()
    if config.model == "CTG":
        return build_ctg(instance, config)
    _check_segments(instance)

    hauls = effective_hauls(instance, config)
    if config.model == "QNF" and len(hauls) != 1:
        raise BuildError("QNF requires exactly one haul class")
    n = instance.n
    blocks = instance.sorted_blocks
    n_blocks = len(blocks)
    steps = list(range(n_blocks + 1))  # time steps 0..n_b
    stations = instance.stations

    asm = _Assembler("VALIGN")
    _spline_rows(asm, instance, config.volume_mode)

    n_borrow = len(instance.borrow_pits)

    # Flow variables. Transit arcs leaving the road at either end exist with
    # zero bounds so conservation rows keep a uniform shape.
    for h in range(1, len(hauls) + 1):
        haul = hauls[h - 1]
        for t in steps:
            for i in range(1, n + 1):
                right_cost = haul.unit_haul_cost * (stations[i] - stations[i - 1]) \
                    if i < n else 0.0
                left_cost = haul.unit_haul_cost * (stations[i - 1] - stations[i - 2]) \
                    if i > 1 else 0.0
                asm.var(f"FR_{h}_{t}_{i}_{i + 1}",
                        0.0, math.inf if i < n else 0.0, cost=right_cost)
                asm.var(f"FU_{h}_{t}_{i}_{i + 1}", cost=haul.loading_cost)
                asm.var(f"FL_{h}_{t}_{i - 1}_{i}")
                asm.var(f"FR_{h}_{t}_{i}_{i - 1}",
                        0.0, math.inf if i > 1 else 0.0, cost=left_cost)
                asm.var(f"FU_{h}_{t}_{i}_{i - 1}", cost=haul.loading_cost)
                asm.var(f"FL_{h}_{t}_{i + 1}_{i}")
            for j, pit in enumerate(instance.borrow_pits, start=1):
                mat = instance.material_of(pit.attached_section)
                cost = mat.excavation + haul.loading_cost \
                    + haul.unit_haul_cost * pit.dead_haul
                asm.var(f"FB_{h}_{t}_{j}_{pit.attached_section + 1}", cost=cost)
                asm.var(f"FB_{h}_{t}_{j}_{pit.attached_section - 1}", cost=cost)
            for k, pit in enumerate(instance.waste_pits, start=1):
                mat = instance.material_of(pit.attached_section)
                cost = mat.embankment + haul.unit_haul_cost * pit.dead_haul
                asm.var(f"FW_{h}_{t}_{k}_{pit.attached_section - 1}", cost=cost)
                asm.var(f"FW_{h}_{t}_{k}_{pit.attached_section + 1}", cost=cost)

    for k in range(1, n_blocks + 1):
        for t in steps:
            asm.var(f"Y_{k}_{t}", 0.0, 1.0, kind="binary")

    # Conservation at every transit node, rightward then leftward chain.
    for h in range(1, len(hauls) + 1):
        for t in steps:
            for i in range(1, n + 1):
                right: dict[str, float] = {}
                if i > 1:
                    right[f"FR_{h}_{t}_{i - 1}_{i}"] = 1.0
                right[f"FU_{h}_{t}_{i}_{i + 1}"] = 1.0
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit.attached_section == i:
                        right[f"FB_{h}_{t}_{j}_{i + 1}"] = 1.0
                right[f"FR_{h}_{t}_{i}_{i + 1}"] = -1.0
                right[f"FL_{h}_{t}_{i - 1}_{i}"] = -1.0
                for k, pit in enumerate(instance.waste_pits, start=1):
                    if pit.attached_section == i:
                        right[f"FW_{h}_{t}_{k}_{i - 1}"] = -1.0
                asm.row(f"FCR_{h}_{t}_{i}", right, "=", 0.0)

                left: dict[str, float] = {}
                if i < n:
                    left[f"FR_{h}_{t}_{i + 1}_{i}"] = 1.0
                left[f"FU_{h}_{t}_{i}_{i - 1}"] = 1.0
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit.attached_section == i:
                        left[f"FB_{h}_{t}_{j}_{i - 1}"] = 1.0
                left[f"FR_{h}_{t}_{i}_{i - 1}"] = -1.0
                left[f"FL_{h}_{t}_{i + 1}_{i}"] = -1.0
                for k, pit in enumerate(instance.waste_pits, start=1):
                    if pit.attached_section == i:
                        left[f"FW_{h}_{t}_{k}_{i + 1}"] = -1.0
                asm.row(f"FCL_{h}_{t}_{i}", left, "=", 0.0)

    # Balance: total unload/load over hauls and steps equals section volume;
    # same for pit flows against pit volume variables.
    hs = range(1, len(hauls) + 1)
    for i in range(1, n + 1):
        cut_terms = {f"FU_{h}_{t}_{i}_{i + 1}": 1.0 for h in hs for t in steps}
        cut_terms.update({f"FU_{h}_{t}_{i}_{i - 1}": 1.0 for h in hs for t in steps})
        cut_terms[f"VP_{i}"] = -1.0
        asm.row(f"BALC_{i}", cut_terms, "=", 0.0)
        fill_terms = {f"FL_{h}_{t}_{i - 1}_{i}": 1.0 for h in hs for t in steps}
        fill_terms.update({f"FL_{h}_{t}_{i + 1}_{i}": 1.0 for h in hs for t in steps})
        fill_terms[f"VM_{i}"] = -1.0
        asm.row(f"BALF_{i}", fill_terms, "=", 0.0)
    for j, pit in enumerate(instance.borrow_pits, start=1):
        sec = pit.attached_section
        terms = {f"FB_{h}_{t}_{j}_{sec + 1}": 1.0 for h in hs for t in steps}
        terms.update({f"FB_{h}_{t}_{j}_{sec - 1}": 1.0 for h in hs for t in steps})
        terms[f"VP_{n + j}"] = -1.0
        asm.row(f"BALB_{j}", terms, "=", 0.0)
        del terms[f"VP_{n + j}"]
        asm.row(f"CAPB_{j}", terms, "<=", pit.capacity)
    for k, pit in enumerate(instance.waste_pits, start=1):
        sec = pit.attached_section
        terms = {f"FW_{h}_{t}_{k}_{sec - 1}": 1.0 for h in hs for t in steps}
        terms.update({f"FW_{h}_{t}_{k}_{sec + 1}": 1.0 for h in hs for t in steps})
        terms[f"VM_{n + n_borrow + k}"] = -1.0
        asm.row(f"BALW_{k}", terms, "=", 0.0)
        del terms[f"VM_{n + n_borrow + k}"]
        asm.row(f"CAPW_{k}", terms, "<=", pit.capacity)

    if blocks:
        _block_rows(asm, instance, config, hauls, steps)

    provenance = _provenance(instance, config, hauls, steps)
    return asm.finish(provenance)


def _block_rows(asm: _Assembler, instance: RoadInstance, config: BuilderConfig,
                hauls: tuple[HaulClass, ...], steps: list[int]) -> None:
    """Block gating, region gating, removal indicators, enforcement."""
    n = instance.n
    blocks = instance.sorted_blocks
    n_blocks = len(blocks)
    m_flow = global_big_m(instance, config.volume_mode)
    hs = range(1, len(hauls) + 1)
    sos1 = config.block_technique == "sos1"

    if sos1:
        # Complement of the removal indicator, shared across pair sets.
        for k in range(1, n_blocks + 1):
            for u in range(n_blocks):
                asm.var(f"W_{k}_{u}", 0.0, 1.0)
                asm.row(f"WDEF_{k}_{u}",
                        [(f"W_{k}_{u}", 1.0), (f"Y_{k}_{u}", 1.0)], "=", 1.0)

    # Four gated pairs per block: transit into/out of the block section on
    # each chain must match the local load/unload until the block is removed.
    for k, blk in enumerate(blocks, start=1):
        s = blk.section
        pair_arcs = {
            "LI": (lambda h, t: (f"FR_{h}_{t}_{s - 1}_{s}", f"FL_{h}_{t}_{s - 1}_{s}")),
            "LO": (lambda h, t: (f"FR_{h}_{t}_{s}_{s + 1}", f"FU_{h}_{t}_{s}_{s + 1}")),
            "RI": (lambda h, t: (f"FR_{h}_{t}_{s + 1}_{s}", f"FL_{h}_{t}_{s + 1}_{s}")),
            "RO": (lambda h, t: (f"FR_{h}_{t}_{s}_{s - 1}", f"FU_{h}_{t}_{s}_{s - 1}")),
        }
        for h in hs:
            for t in steps:
                for tag, arcs in pair_arcs.items():
                    transit, local = arcs(h, t)
                    if t == 0:
                        # Nothing is removed before construction starts.
                        asm.row(f"B{tag}E_{k}_{h}_{t}",
                                [(transit, 1.0), (local, -1.0)], "=", 0.0)
                    elif not sos1:
                        asm.row(f"B{tag}P_{k}_{h}_{t}",
                                [(transit, 1.0), (local, -1.0),
                                 (f"Y_{k}_{t - 1}", -m_flow)], "<=", 0.0)
                        asm.row(f"B{tag}N_{k}_{h}_{t}",
                                [(transit, -1.0), (local, 1.0),
                                 (f"Y_{k}_{t - 1}", -m_flow)], "<=", 0.0)
                    else:
                        # Finite slack bound keeps the set convertible to
                        # binaries by solvers without native SOS support.
                        slack = asm.var(f"BS_{tag}_{k}_{h}_{t}", 0.0, m_flow)
                        asm.row(f"B{tag}P_{k}_{h}_{t}",
                                [(transit, 1.0), (local, -1.0), (slack, -1.0)],
                                "<=", 0.0)
                        asm.row(f"B{tag}N_{k}_{h}_{t}",
                                [(transit, -1.0), (local, 1.0), (slack, -1.0)],
                                "<=", 0.0)
                        asm.add_sos(f"SB_{tag}_{k}_{h}_{t}", 1,
                                    [(slack, 1.0), (f"W_{k}_{t - 1}", 2.0)])

    # Region gating: all movement inside regions sealed off by unremoved
    # blocks (no access road) is forbidden until a sealing block is removed.
    pairs, left_set, right_set = block_access_sets(instance)

    def gate(row_name: str, flow: str, ys: list[str], t: int) -> None:
        coeffs: list[tuple[str, float]] = [(flow, 1.0)]
        if t >= 1:
            coeffs += [(y.replace("<T>", str(t - 1)), -m_flow) for y in ys]
        asm.row(row_name, coeffs, "<=", 0.0)

    def region(tag: str, ys_tpl: list[str], lo_arc: int, hi_arc: int,
               pit_ok, key: str) -> None:
        # lo_arc..hi_arc: transit arcs (i, i+1) with lo_arc <= i, i+1 <= hi_arc
        for h in hs:
            for t in steps:
                for i in range(lo_arc, hi_arc):
                    gate(f"G{tag}R_{key}_{h}_{t}_{i}",
                         f"FR_{h}_{t}_{i}_{i + 1}", ys_tpl, t)
                    gate(f"G{tag}L_{key}_{h}_{t}_{i}",
                         f"FR_{h}_{t}_{i + 1}_{i}", ys_tpl, t)
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit_ok(pit.attached_section):
                        sec = pit.attached_section
                        gate(f"G{tag}BP_{key}_{h}_{t}_{j}",
                             f"FB_{h}_{t}_{j}_{sec + 1}", ys_tpl, t)
                        gate(f"G{tag}BM_{key}_{h}_{t}_{j}",
                             f"FB_{h}_{t}_{j}_{sec - 1}", ys_tpl, t)
                for w, pit in enumerate(instance.waste_pits, start=1):
                    if pit_ok(pit.attached_section):
                        sec = pit.attached_section
                        gate(f"G{tag}WM_{key}_{h}_{t}_{w}",
                             f"FW_{h}_{t}_{w}_{sec - 1}", ys_tpl, t)
                        gate(f"G{tag}WP_{key}_{h}_{t}_{w}",
                             f"FW_{h}_{t}_{w}_{sec + 1}", ys_tpl, t)

    for k1, k2 in pairs:
        s1, s2 = blocks[k1 - 1].section, blocks[k2 - 1].section
        region("2", [f"Y_{k1}_<T>", f"Y_{k2}_<T>"], s1, s2,
               lambda sec: s1 <= sec - 1 and sec + 1 <= s2, f"{k1}_{k2}")
    for k in left_set:
        s = blocks[k - 1].section
        region("L", [f"Y_{k}_<T>"], 1, s,
               lambda sec: sec + 1 <= s, str(k))
    for k in right_set:
        s = blocks[k - 1].section
        region("R", [f"Y_{k}_<T>"], s, n,
               lambda sec: s <= sec - 1, str(k))

    # Removal indicators: a block may be flagged removed at step u only once
    # its section's full cut and fill have been moved by then.
    for k, blk in enumerate(blocks, start=1):
        s = blk.section
        m_vol = big_m(instance, s, config.volume_mode)
        for u in steps:
            cut_terms: dict[str, float] = {}
            fill_terms: dict[str, float] = {}
            for h in hs:
                for t in range(u + 1):
                    cut_terms[f"FU_{h}_{t}_{s}_{s + 1}"] = 1.0
                    cut_terms[f"FU_{h}_{t}_{s}_{s - 1}"] = 1.0
                    fill_terms[f"FL_{h}_{t}_{s - 1}_{s}"] = 1.0
                    fill_terms[f"FL_{h}_{t}_{s + 1}_{s}"] = 1.0
            cut_terms[f"VP_{s}"] = -1.0
            cut_terms[f"Y_{k}_{u}"] = -m_vol
            asm.row(f"RIC_{k}_{u}", cut_terms, ">=", -m_vol)
            fill_terms[f"VM_{s}"] = -1.0
            fill_terms[f"Y_{k}_{u}"] = -m_vol
            asm.row(f"RIF_{k}_{u}", fill_terms, ">=", -m_vol)

    # At least u blocks are removed by the end of step u; removal is final.
    for u in range(1, n_blocks + 1):
        asm.row(f"ENF_{u}",
                {f"Y_{k}_{u}": 1.0 for k in range(1, n_blocks + 1)}, ">=", float(u))
    for k in range(1, n_blocks + 1):
        for t in range(1, n_blocks + 1):
            asm.row(f"MON_{k}_{t}",
                    [(f"Y_{k}_{t}", 1.0), (f"Y_{k}_{t - 1}", -1.0)], ">=", 0.0)


def build_ctg(instance: RoadInstance,
              config: BuilderConfig | None = None) -> MilpModel:
    """Complete transportation graph variant (block-free instances only)."""
    config = config or BuilderConfig(model="CTG")
    if config.model != "CTG":
        config = replace(config, model="CTG")
    config.validate()
    instance.check()
    if instance.blocks:
        raise BuildError("CTG requires a block-free instance")
    _check_segments(instance)

    n = instance.n
    n_borrow = len(instance.borrow_pits)
    asm = _Assembler("VALIGN")
    _spline_rows(asm, instance, config.volume_mode)

    # Material cost is carried on arcs, so strip VP/VM objective entries.
    asm.objective.clear()

    hauls = instance.cost_model.hauls
    stations = instance.stations

    def node_info(node: int) -> tuple[float, float, float, float]:
        """(station, dead haul, excavation rate, embankment rate)."""
        if node <= n:
            mat = instance.material_of(node)
            return stations[node - 1], 0.0, mat.excavation, mat.embankment
        if node <= n + n_borrow:
            pit = instance.borrow_pits[node - n - 1]
        else:
            pit = instance.waste_pits[node - n - n_borrow - 1]
        mat = instance.material_of(pit.attached_section)
        return (stations[pit.attached_section - 1], pit.dead_haul,
                mat.excavation, mat.embankment)

    supply_nodes = list(range(1, n + 1)) + [n + j for j in range(1, n_borrow + 1)]
    demand_nodes = list(range(1, n + 1)) + \
        [n + n_borrow + k for k in range(1, len(instance.waste_pits) + 1)]

    for src in supply_nodes:
        st_s, dead_s, exc_s, _ = node_info(src)
        for dst in demand_nodes:
            if src == dst:
                continue
            st_d, dead_d, _, emb_d = node_info(dst)
            dist = abs(st_d - st_s) + dead_s + dead_d
            cost = exc_s + cheapest_haul(hauls, dist)[1] + emb_d
            asm.var(f"X_{src}_{dst}", cost=cost)

    for i in range(1, n + 1):
        out_terms = {f"X_{i}_{dst}": 1.0 for dst in demand_nodes if dst != i}
        out_terms[f"VP_{i}"] = -1.0
        asm.row(f"CTS_{i}", out_terms, "=", 0.0)
        in_terms = {f"X_{src}_{i}": 1.0 for src in supply_nodes if src != i}
        in_terms[f"VM_{i}"] = -1.0
        asm.row(f"CTD_{i}", in_terms, "=", 0.0)
    for j in range(1, n_borrow + 1):
        node = n + j
        terms = {f"X_{node}_{dst}": 1.0 for dst in demand_nodes}
        terms[f"VP_{node}"] = -1.0
        asm.row(f"CTB_{j}", terms, "=", 0.0)
    for k in range(1, len(instance.waste_pits) + 1):
        node = n + n_borrow + k
        terms = {f"X_{src}_{node}": 1.0 for src in supply_nodes}
        terms[f"VM_{node}"] = -1.0
        asm.row(f"CTW_{k}", terms, "=", 0.0)

    provenance = _provenance(instance, config, hauls, [0])
    return asm.finish(provenance)


def fix_offsets(model: MilpModel, offsets: Sequence[float]) -> MilpModel:
    """Pin every section offset, reducing the MILP to earthwork allocation."""
    n = sum(1 for v in model.variables if v.name.startswith("U_"))
    if len(offsets) != n:
        raise BuildError(f"need {n} offsets, got {len(offsets)}")
    rows = list(model.constraints)
    fixed: list[LinearConstraint] = []
    for i, value in enumerate(offsets, start=1):
        var = model.variable_map.get(f"U_{i}")
        if var is None:
            raise BuildError(f"model has no offset variable U_{i}")
        if not var.lower - 1e-9 <= value <= var.upper + 1e-9:
            raise BuildError(
                f"offset {value} outside bounds [{var.lower}, {var.upper}] "
                f"of section {i}")
        fixed.append(LinearConstraint(f"FIX_{i}", ((f"U_{i}", 1.0),), "=", value))
    out = replace(model, constraints=tuple(rows + fixed),
                  provenance=model.provenance + (("fixed_offsets", "yes"),))
    out.lint()
    return out


def _provenance(instance: RoadInstance, config: BuilderConfig,
                hauls: Sequence[HaulClass], steps: Sequence[int]
                ) -> list[tuple[str, str]]:
    return [
        ("model", config.model),
        ("config_name", config.name or "-"),
        ("block_technique", config.block_technique),
        ("volume_mode", config.volume_mode),
        ("hauls", ";".join(f"{h.name}:{h.loading_cost}:{h.unit_haul_cost}"
                           for h in hauls)),
        ("sections", str(instance.n)),
        ("blocks", str(len(instance.blocks))),
        ("time_steps", str(len(steps))),
    ]
