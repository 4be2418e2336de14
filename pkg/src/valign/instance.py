"""Domain types for a road corridor and pure geometry/cost helpers.

A road is discretized into sections at increasing stations. The vertical
profile is a quadratic spline: one polynomial per segment, each segment
spanning a run of consecutive sections, evaluated in segment-local
coordinates for numerical conditioning on long roads.

The offset at a section is ground elevation minus road elevation, so a
positive offset means net excavation. Earthwork prices come from per-material
excavation/embankment rates and per-haul-class loading and movement rates.
Site features (borrow/waste pits, blocks, access roads) attach to sections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Sequence


class InstanceError(ValueError):
    """Raised for invalid instances; carries the full violation list."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid instance:\n" + "\n".join(self.violations))


@dataclass(frozen=True, slots=True)
class Section:
    """One discretization cell of the road."""

    index: int              # 1-based ordinal
    station: float          # meters from road start
    ground_elevation: float
    area: float             # square meters, volume per meter of offset
    material: int           # 1-based id into the cost model's materials
    offset_lo: float
    offset_hi: float


@dataclass(frozen=True, slots=True)
class SegmentLayout:
    """Sections per spline segment, in road order."""

    segment_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "segment_sizes", tuple(int(c) for c in self.segment_sizes))

    @property
    def segment_count(self) -> int:
        return len(self.segment_sizes)

    @property
    def section_count(self) -> int:
        return sum(self.segment_sizes)

    def first_section(self, g: int) -> int:
        """1-based index of the first section of segment g (1-based)."""
        return 1 + sum(self.segment_sizes[: g - 1])

    def segment_of(self, i: int) -> int:
        """Segment (1-based) containing section i (1-based)."""
        if not 1 <= i <= self.section_count:
            raise IndexError(f"section {i} out of range 1..{self.section_count}")
        acc = 0
        for g, size in enumerate(self.segment_sizes, start=1):
            acc += size
            if i <= acc:
                return g
        raise AssertionError("unreachable")


@dataclass(frozen=True, slots=True)
class HaulClass:
    """Equipment category: fixed loading cost plus movement cost per meter."""

    name: str
    loading_cost: float     # $/m3
    unit_haul_cost: float   # $/(m3*m)


@dataclass(frozen=True, slots=True)
class Material:
    name: str
    excavation: float   # $/m3 cut
    embankment: float   # $/m3 fill


@dataclass(frozen=True, slots=True)
class CostModel:
    materials: tuple[Material, ...]
    hauls: tuple[HaulClass, ...]


@dataclass(frozen=True, slots=True)
class Pit:
    """Borrow (source) or waste (sink) pit attached to an interior section."""

    kind: str               # "borrow" | "waste"
    attached_section: int   # 1-based section index
    capacity: float         # m3
    dead_haul: float        # meters between pit and its attached section


@dataclass(frozen=True, slots=True)
class Block:
    """Obstacle over whose section no material may move until removed."""

    section: int


@dataclass(frozen=True, slots=True)
class AccessRoad:
    """Entry point to the corridor."""

    section: int


@dataclass(frozen=True, slots=True)
class VolumeCurve:
    """Piecewise-linear cut/fill volumes as functions of the offset."""

    section: int
    offsets: tuple[float, ...]
    cut: tuple[float, ...]
    fill: tuple[float, ...]

    def cut_at(self, u: float) -> float:
        return _interp(self.offsets, self.cut, u)

    def fill_at(self, u: float) -> float:
        return _interp(self.offsets, self.fill, u)


def _interp(xs: Sequence[float], ys: Sequence[float], x: float) -> float:
    if x <= xs[0]:
        return ys[0]
    if x >= xs[-1]:
        return ys[-1]
    for a, b, ya, yb in zip(xs, xs[1:], ys, ys[1:]):
        if a <= x <= b:
            w = (x - a) / (b - a)
            return ya + w * (yb - ya)
    raise AssertionError("unreachable")


# Published benchmark cost set: four materials, three haul classes.
def default_cost_model() -> CostModel:
    return CostModel(
        materials=(
            Material("M1", excavation=4.0, embankment=2.0),
            Material("M2", excavation=4.0, embankment=2.0),
            Material("M3", excavation=20.0, embankment=1.8),
            Material("M4", excavation=4.0, embankment=2.0),
        ),
        hauls=(
            HaulClass("short", loading_cost=0.0, unit_haul_cost=0.008),
            HaulClass("middle", loading_cost=0.6, unit_haul_cost=0.004),
            HaulClass("long", loading_cost=2.6, unit_haul_cost=0.002),
        ),
    )


DEFAULT_SLOPE_LO = -0.1
DEFAULT_SLOPE_HI = 0.1


@dataclass(frozen=True)
class RoadInstance:
    """Complete problem input: corridor, costs, and site features."""

    sections: tuple[Section, ...]
    segment_layout: SegmentLayout
    cost_model: CostModel
    borrow_pits: tuple[Pit, ...] = ()
    waste_pits: tuple[Pit, ...] = ()
    blocks: tuple[Block, ...] = ()
    access_roads: tuple[AccessRoad, ...] = ()
    slope_lo: float = DEFAULT_SLOPE_LO
    slope_hi: float = DEFAULT_SLOPE_HI
    volume_curves: tuple[VolumeCurve, ...] = ()

    # -- derived views ----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.sections)

    @cached_property
    def stations(self) -> tuple[float, ...]:
        return tuple(s.station for s in self.sections)

    @cached_property
    def sorted_blocks(self) -> tuple[Block, ...]:
        """Blocks in canonical order (by section index)."""
        return tuple(sorted(self.blocks, key=lambda b: b.section))

    @cached_property
    def curve_by_section(self) -> dict[int, VolumeCurve]:
        return {c.section: c for c in self.volume_curves}

    def section(self, i: int) -> Section:
        return self.sections[i - 1]

    def material_of(self, i: int) -> Material:
        return self.cost_model.materials[self.section(i).material - 1]

    def distance(self, i: int, j: int) -> float:
        return abs(self.stations[j - 1] - self.stations[i - 1])

    def segment_span(self, g: int) -> tuple[float, float]:
        """Station range covered by segment g's polynomial."""
        layout = self.segment_layout
        start = self.stations[layout.first_section(g) - 1]
        if g < layout.segment_count:
            end = self.stations[layout.first_section(g + 1) - 1]
        else:
            end = self.stations[-1]
        return start, end

    def local_coordinate(self, i: int) -> float:
        """Segment-local coordinate of section i."""
        g = self.segment_layout.segment_of(i)
        return self.stations[i - 1] - self.segment_span(g)[0]

    def profile(self, coeffs: Sequence[Sequence[float]], station: float) -> float:
        return evaluate_profile(coeffs, self.segment_layout, self.stations, station)

    def grade(self, coeffs: Sequence[Sequence[float]], station: float) -> float:
        return evaluate_grade(coeffs, self.segment_layout, self.stations, station)

    # -- validation --------------------------------------------------------

    def violations(self) -> list[str]:
        """All invariant violations, each tagged with a field path."""
        out: list[str] = []
        n = len(self.sections)
        if n == 0:
            out.append("sections: at least one section required")

        for pos, sec in enumerate(self.sections):
            path = f"sections[{pos}]"
            if sec.index != pos + 1:
                out.append(f"{path}.index: expected {pos + 1}, got {sec.index}")
            if not math.isfinite(sec.station):
                out.append(f"{path}.station: must be finite")
            if pos > 0 and sec.station <= self.sections[pos - 1].station:
                out.append(f"{path}.station: stations must be strictly increasing")
            if not (sec.area > 0) or not math.isfinite(sec.area):
                out.append(f"{path}.area: must be positive and finite")
            if not math.isfinite(sec.ground_elevation):
                out.append(f"{path}.ground_elevation: must be finite")
            if not 1 <= sec.material <= len(self.cost_model.materials):
                out.append(f"{path}.material: id {sec.material} not in 1..{len(self.cost_model.materials)}")
            if not (sec.offset_lo <= sec.offset_hi):
                out.append(f"{path}.offset_lo: must not exceed offset_hi")
            if not (math.isfinite(sec.offset_lo) and math.isfinite(sec.offset_hi)):
                out.append(f"{path}.offset_lo/offset_hi: must be finite")

        if self.segment_layout.section_count != n:
            out.append(
                f"segments: sizes sum to {self.segment_layout.section_count}, expected {n}")
        for pos, size in enumerate(self.segment_layout.segment_sizes):
            if size < 1:
                out.append(f"segments[{pos}]: size must be >= 1")

        if not self.cost_model.materials:
            out.append("materials: at least one material required")
        for pos, mat in enumerate(self.cost_model.materials):
            if mat.excavation < 0 or mat.embankment < 0:
                out.append(f"materials[{pos}]: rates must be >= 0")
            if not (math.isfinite(mat.excavation) and math.isfinite(mat.embankment)):
                out.append(f"materials[{pos}]: rates must be finite")
        if not self.cost_model.hauls:
            out.append("hauls: at least one haul class required")
        for pos, haul in enumerate(self.cost_model.hauls):
            if haul.loading_cost < 0 or not math.isfinite(haul.loading_cost):
                out.append(f"hauls[{pos}].loading_cost: must be >= 0 and finite")
            if not (haul.unit_haul_cost > 0) or not math.isfinite(haul.unit_haul_cost):
                out.append(f"hauls[{pos}].unit_haul_cost: must be > 0 and finite")

        for name, pits, kind in (("borrow_pits", self.borrow_pits, "borrow"),
                                 ("waste_pits", self.waste_pits, "waste")):
            for pos, pit in enumerate(pits):
                path = f"{name}[{pos}]"
                if pit.kind != kind:
                    out.append(f"{path}.kind: expected {kind!r}, got {pit.kind!r}")
                if not 2 <= pit.attached_section <= n - 1:
                    out.append(
                        f"{path}.section: pit must attach to an interior section "
                        f"(2..{n - 1}), got {pit.attached_section}")
                if pit.capacity < 0 or not math.isfinite(pit.capacity):
                    out.append(f"{path}.capacity: must be >= 0 and finite")
                if pit.dead_haul < 0 or not math.isfinite(pit.dead_haul):
                    out.append(f"{path}.dead_haul: must be >= 0 and finite")

        seen_blocks: set[int] = set()
        for pos, blk in enumerate(self.blocks):
            path = f"blocks[{pos}]"
            if not 2 <= blk.section <= n - 1:
                out.append(f"{path}.section: block must sit on an interior section "
                           f"(2..{n - 1}), got {blk.section}")
            if blk.section in seen_blocks:
                out.append(f"{path}.section: duplicate block section {blk.section}")
            seen_blocks.add(blk.section)

        for pos, road in enumerate(self.access_roads):
            if not 1 <= road.section <= n:
                out.append(f"access_roads[{pos}].section: out of range 1..{n}")

        if not (self.slope_lo < self.slope_hi):
            out.append("slope: slope_lo must be < slope_hi")
        if not (math.isfinite(self.slope_lo) and math.isfinite(self.slope_hi)):
            out.append("slope: bounds must be finite")

        seen_curves: set[int] = set()
        for pos, curve in enumerate(self.volume_curves):
            path = f"volume_curves[{pos}]"
            if not 1 <= curve.section <= n:
                out.append(f"{path}.section: out of range 1..{n}")
            if curve.section in seen_curves:
                out.append(f"{path}.section: duplicate curve for section {curve.section}")
            seen_curves.add(curve.section)
            k = len(curve.offsets)
            if k < 2 or len(curve.cut) != k or len(curve.fill) != k:
                out.append(f"{path}: needs >= 2 breakpoints with equal-length columns")
                continue
            if any(b <= a for a, b in zip(curve.offsets, curve.offsets[1:])):
                out.append(f"{path}.offsets: must be strictly increasing")
            if any(b < a for a, b in zip(curve.cut, curve.cut[1:])):
                out.append(f"{path}.cut: must be nondecreasing in offset")
            if any(b > a for a, b in zip(curve.fill, curve.fill[1:])):
                out.append(f"{path}.fill: must be nonincreasing in offset")
            vals = curve.offsets + curve.cut + curve.fill
            if not all(math.isfinite(v) for v in vals):
                out.append(f"{path}: all breakpoint values must be finite")
            if 1 <= curve.section <= n:
                sec = self.section(curve.section)
                if curve.offsets[0] > sec.offset_lo or curve.offsets[-1] < sec.offset_hi:
                    out.append(f"{path}.offsets: must cover the section's offset bounds")
        return out

    def check(self) -> "RoadInstance":
        bad = self.violations()
        if bad:
            raise InstanceError(bad)
        return self


def evaluate_profile(coeffs: Sequence[Sequence[float]], layout: SegmentLayout,
                     stations: Sequence[float], station: float) -> float:
    """Spline elevation at a station; coefficients are segment-local."""
    g = _segment_at(layout, stations, station)
    a1, a2, a3 = coeffs[g - 1]
    sigma = station - stations[layout.first_section(g) - 1]
    return a1 + a2 * sigma + a3 * sigma * sigma


def evaluate_grade(coeffs: Sequence[Sequence[float]], layout: SegmentLayout,
                   stations: Sequence[float], station: float) -> float:
    """Spline slope (first derivative) at a station."""
    g = _segment_at(layout, stations, station)
    _, a2, a3 = coeffs[g - 1]
    sigma = station - stations[layout.first_section(g) - 1]
    return a2 + 2.0 * a3 * sigma


def _segment_at(layout: SegmentLayout, stations: Sequence[float], station: float) -> int:
    if station < stations[0] or station > stations[-1]:
        raise ValueError(f"station {station} outside road extent "
                         f"[{stations[0]}, {stations[-1]}]")
    g = 1
    for cand in range(2, layout.segment_count + 1):
        if stations[layout.first_section(cand) - 1] <= station:
            g = cand
        else:
            break
    return g


def cheapest_haul(cost_model: CostModel | Sequence[HaulClass],
                  distance: float) -> tuple[int, float]:
    """Cheapest haul class for a move of the given length.

    Returns (0-based haul index, per-m3 cost including loading); ties go to
    the lowest index.
    """
    hauls = getattr(cost_model, "hauls", cost_model)
    best_idx = 0
    best_cost = math.inf
    for idx, haul in enumerate(hauls):
        cost = haul.loading_cost + haul.unit_haul_cost * distance
        if cost < best_cost:
            best_idx, best_cost = idx, cost
    return best_idx, best_cost


def block_access_sets(instance: RoadInstance) -> tuple[
        tuple[tuple[int, int], ...], tuple[int, ...], tuple[int, ...]]:
    """Region-gating sets over canonically ordered blocks.

    Returns (pairs, left, right) of 1-based indices into
    ``instance.sorted_blocks``: consecutive block pairs with no access-road
    section strictly between them; blocks with no access road in sections
    1..section-1; blocks with no access road in sections section+1..n.
    """
    blocks = instance.sorted_blocks
    roads = sorted(r.section for r in instance.access_roads)
    n = instance.n

    def road_in(lo: int, hi: int) -> bool:
        return any(lo <= r <= hi for r in roads)

    pairs = tuple(
        (k, k + 1)
        for k, (a, b) in enumerate(zip(blocks, blocks[1:]), start=1)
        if not road_in(a.section + 1, b.section - 1))
    left = tuple(k for k, b in enumerate(blocks, start=1)
                 if not road_in(1, b.section - 1))
    right = tuple(k for k, b in enumerate(blocks, start=1)
                  if not road_in(b.section + 1, n))
    return pairs, left, right


def big_m(instance: RoadInstance, section: int, volume_mode: str = "linear") -> float:
    """Largest possible cut or fill volume at a section."""
    sec = instance.section(section)
    if volume_mode != "linear":
        curve = instance.curve_by_section.get(section)
        if curve is not None:
            return max(max(abs(v) for v in curve.cut),
                       max(abs(v) for v in curve.fill))
    if not (math.isfinite(sec.offset_lo) and math.isfinite(sec.offset_hi)):
        raise ValueError(f"section {section}: unbounded offsets")
    return sec.area * max(abs(sec.offset_lo), abs(sec.offset_hi))


def global_big_m(instance: RoadInstance, volume_mode: str = "linear") -> float:
    """Flow-gating constant: total possible earthwork plus borrow capacity."""
    total = sum(big_m(instance, i, volume_mode) for i in range(1, instance.n + 1))
    return total + sum(p.capacity for p in instance.borrow_pits)


def renumber_sections(sections: Iterable[Section]) -> tuple[Section, ...]:
    """Assign 1-based indices in list order."""
    return tuple(replace(s, index=pos + 1) for pos, s in enumerate(sections))
