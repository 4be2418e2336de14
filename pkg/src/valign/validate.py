"""Independent re-check of decoded solutions.

Every constraint family is evaluated from first principles on the decoded
result (flow arithmetic, block reachability, spline evaluation), without
reusing the MILP rows. recompute_cost re-derives the objective from flows
and volumes by its own arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from valign.builder import BuilderConfig, effective_hauls
from valign.gateway import AlignmentResult
from valign.instance import (
    RoadInstance,
    block_access_sets,
    cheapest_haul,
    evaluate_grade,
    evaluate_profile,
)

FAMILIES = (
    "flow_conservation",
    "balance",
    "capacity",
    "block_gating",
    "removal_logic",
    "continuity",
    "slope",
    "volume",
    "bounds",
)


@dataclass
class FamilyResult:
    worst: float = 0.0
    count: int = 0


@dataclass
class ViolationReport:
    tolerance: float
    families: dict[str, FamilyResult] = field(
        default_factory=lambda: {name: FamilyResult() for name in FAMILIES})

    @property
    def passed(self) -> bool:
        return all(f.worst <= self.tolerance for f in self.families.values())

    def summary(self) -> str:
        lines = []
        for name in FAMILIES:
            fam = self.families[name]
            verdict = "pass" if fam.worst <= self.tolerance else "FAIL"
            lines.append(f"{name}: worst={fam.worst:.3e} "
                         f"violations={fam.count} {verdict}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'} "
                     f"at tolerance {self.tolerance:g}")
        return "\n".join(lines)

    def _hit(self, family: str, magnitude: float, scale: float,
             relative: bool) -> None:
        if relative:
            magnitude = magnitude / max(1.0, scale)
        fam = self.families[family]
        fam.worst = max(fam.worst, magnitude)
        if magnitude > self.tolerance:
            fam.count += 1


def validate(instance: RoadInstance, config: BuilderConfig,
             result: AlignmentResult, tolerance: float = 1e-6,
             relative: bool = False) -> ViolationReport:
    instance.check()
    report = ViolationReport(tolerance=tolerance)
    val = result.values.get

    def hit(family: str, magnitude: float, scale: float = 1.0) -> None:
        report._hit(family, magnitude, scale, relative)

    _check_geometry(instance, config, result, hit)
    if config.model == "CTG":
        _check_ctg_flows(instance, result, hit)
    else:
        hauls = effective_hauls(instance, config)
        steps = range(len(instance.blocks) + 1)
        _check_conservation(instance, hauls, steps, val, hit)
        _check_balance(instance, hauls, steps, result, val, hit)
        _check_blocks(instance, hauls, steps, result, val, hit)
        _check_flow_bounds(instance, hauls, steps, val, hit)
    return report


def _check_geometry(instance, config, result, hit) -> None:
    layout = instance.segment_layout
    coeffs = result.coefficients

    for g in range(2, layout.segment_count + 1):
        start_prev, end_prev = instance.segment_span(g - 1)
        span = end_prev - start_prev
        a1, a2, a3 = coeffs[g - 2]
        b1, b2, b3 = coeffs[g - 1]
        left_val = a1 + a2 * span + a3 * span * span
        left_grad = a2 + 2.0 * a3 * span
        hit("continuity", abs(left_val - b1), max(abs(left_val), abs(b1)))
        hit("continuity", abs(left_grad - b2), max(abs(left_grad), abs(b2)))

    for g in range(1, layout.segment_count + 1):
        start, end = instance.segment_span(g)
        span = end - start
        _, a2, a3 = coeffs[g - 1]
        for grade in (a2, a2 + 2.0 * a3 * span):
            hit("slope", max(0.0, instance.slope_lo - grade), 1.0)
            hit("slope", max(0.0, grade - instance.slope_hi), 1.0)

    stations = instance.stations
    for i in range(1, instance.n + 1):
        sec = instance.section(i)
        road = evaluate_profile(coeffs, layout, stations, sec.station)
        offset = result.offsets[i - 1]
        hit("volume", abs(offset - (sec.ground_elevation - road)),
            abs(sec.ground_elevation))
        cut = result.section_cut[i - 1]
        fill = result.section_fill[i - 1]
        if config.volume_mode == "linear":
            hit("volume", abs((cut - fill) - sec.area * offset),
                abs(sec.area * offset))
        else:
            curve = instance.curve_by_section[i]
            hit("volume", abs(cut - curve.cut_at(offset)), abs(cut))
            hit("volume", abs(fill - curve.fill_at(offset)), abs(fill))
        hit("bounds", max(0.0, sec.offset_lo - offset), 1.0)
        hit("bounds", max(0.0, offset - sec.offset_hi), 1.0)
        hit("bounds", max(0.0, -cut), 1.0)
        hit("bounds", max(0.0, -fill), 1.0)

    for amount in result.borrow_used + result.waste_used:
        hit("bounds", max(0.0, -amount), 1.0)
    for j, pit in enumerate(instance.borrow_pits):
        hit("capacity", max(0.0, result.borrow_used[j] - pit.capacity),
            pit.capacity)
    for k, pit in enumerate(instance.waste_pits):
        hit("capacity", max(0.0, result.waste_used[k] - pit.capacity),
            pit.capacity)


def _check_conservation(instance, hauls, steps, val, hit) -> None:
    n = instance.n
    for h in range(1, len(hauls) + 1):
        for t in steps:
            for i in range(1, n + 1):
                acc = val(f"FU_{h}_{t}_{i}_{i + 1}", 0.0)
                scale = abs(acc)
                if i > 1:
                    flow = val(f"FR_{h}_{t}_{i - 1}_{i}", 0.0)
                    acc += flow
                    scale += abs(flow)
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit.attached_section == i:
                        acc += val(f"FB_{h}_{t}_{j}_{i + 1}", 0.0)
                acc -= val(f"FR_{h}_{t}_{i}_{i + 1}", 0.0)
                acc -= val(f"FL_{h}_{t}_{i - 1}_{i}", 0.0)
                for k, pit in enumerate(instance.waste_pits, start=1):
                    if pit.attached_section == i:
                        acc -= val(f"FW_{h}_{t}_{k}_{i - 1}", 0.0)
                hit("flow_conservation", abs(acc), scale)

                acc = val(f"FU_{h}_{t}_{i}_{i - 1}", 0.0)
                scale = abs(acc)
                if i < n:
                    flow = val(f"FR_{h}_{t}_{i + 1}_{i}", 0.0)
                    acc += flow
                    scale += abs(flow)
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit.attached_section == i:
                        acc += val(f"FB_{h}_{t}_{j}_{i - 1}", 0.0)
                acc -= val(f"FR_{h}_{t}_{i}_{i - 1}", 0.0)
                acc -= val(f"FL_{h}_{t}_{i + 1}_{i}", 0.0)
                for k, pit in enumerate(instance.waste_pits, start=1):
                    if pit.attached_section == i:
                        acc -= val(f"FW_{h}_{t}_{k}_{i + 1}", 0.0)
                hit("flow_conservation", abs(acc), scale)


def _check_balance(instance, hauls, steps, result, val, hit) -> None:
    n = instance.n
    hs = range(1, len(hauls) + 1)
    for i in range(1, n + 1):
        unload = sum(val(f"FU_{h}_{t}_{i}_{i + 1}", 0.0)
                     + val(f"FU_{h}_{t}_{i}_{i - 1}", 0.0)
                     for h in hs for t in steps)
        load = sum(val(f"FL_{h}_{t}_{i - 1}_{i}", 0.0)
                   + val(f"FL_{h}_{t}_{i + 1}_{i}", 0.0)
                   for h in hs for t in steps)
        hit("balance", abs(unload - result.section_cut[i - 1]), abs(unload))
        hit("balance", abs(load - result.section_fill[i - 1]), abs(load))
    for j, pit in enumerate(instance.borrow_pits, start=1):
        sec = pit.attached_section
        total = sum(val(f"FB_{h}_{t}_{j}_{sec + 1}", 0.0)
                    + val(f"FB_{h}_{t}_{j}_{sec - 1}", 0.0)
                    for h in hs for t in steps)
        hit("balance", abs(total - result.borrow_used[j - 1]), abs(total))
        hit("capacity", max(0.0, total - pit.capacity), pit.capacity)
    for k, pit in enumerate(instance.waste_pits, start=1):
        sec = pit.attached_section
        total = sum(val(f"FW_{h}_{t}_{k}_{sec - 1}", 0.0)
                    + val(f"FW_{h}_{t}_{k}_{sec + 1}", 0.0)
                    for h in hs for t in steps)
        hit("balance", abs(total - result.waste_used[k - 1]), abs(total))
        hit("capacity", max(0.0, total - pit.capacity), pit.capacity)


def _check_blocks(instance, hauls, steps, result, val, hit) -> None:
    blocks = instance.sorted_blocks
    if not blocks:
        return
    n = instance.n
    n_blocks = len(blocks)
    hs = range(1, len(hauls) + 1)

    def removed(k: int, t: int) -> bool:
        # Gate state for step t is the indicator at the end of step t-1.
        return t >= 1 and result.removal.get((k, t - 1), 0.0) >= 0.5

    for k, blk in enumerate(blocks, start=1):
        s = blk.section
        for h in hs:
            for t in steps:
                if removed(k, t):
                    continue
                hit("block_gating",
                    abs(val(f"FR_{h}_{t}_{s - 1}_{s}", 0.0)
                        - val(f"FL_{h}_{t}_{s - 1}_{s}", 0.0)), 1.0)
                hit("block_gating",
                    abs(val(f"FR_{h}_{t}_{s}_{s + 1}", 0.0)
                        - val(f"FU_{h}_{t}_{s}_{s + 1}", 0.0)), 1.0)
                hit("block_gating",
                    abs(val(f"FR_{h}_{t}_{s + 1}_{s}", 0.0)
                        - val(f"FL_{h}_{t}_{s + 1}_{s}", 0.0)), 1.0)
                hit("block_gating",
                    abs(val(f"FR_{h}_{t}_{s}_{s - 1}", 0.0)
                        - val(f"FU_{h}_{t}_{s}_{s - 1}", 0.0)), 1.0)

    pairs, left_set, right_set = block_access_sets(instance)

    def region_check(ks: tuple[int, ...], lo_arc: int, hi_arc: int,
                     pit_ok) -> None:
        for h in hs:
            for t in steps:
                if any(removed(k, t) for k in ks):
                    continue
                for i in range(lo_arc, hi_arc):
                    hit("block_gating",
                        abs(val(f"FR_{h}_{t}_{i}_{i + 1}", 0.0)), 1.0)
                    hit("block_gating",
                        abs(val(f"FR_{h}_{t}_{i + 1}_{i}", 0.0)), 1.0)
                for j, pit in enumerate(instance.borrow_pits, start=1):
                    if pit_ok(pit.attached_section):
                        sec = pit.attached_section
                        hit("block_gating",
                            abs(val(f"FB_{h}_{t}_{j}_{sec + 1}", 0.0)), 1.0)
                        hit("block_gating",
                            abs(val(f"FB_{h}_{t}_{j}_{sec - 1}", 0.0)), 1.0)
                for w, pit in enumerate(instance.waste_pits, start=1):
                    if pit_ok(pit.attached_section):
                        sec = pit.attached_section
                        hit("block_gating",
                            abs(val(f"FW_{h}_{t}_{w}_{sec - 1}", 0.0)), 1.0)
                        hit("block_gating",
                            abs(val(f"FW_{h}_{t}_{w}_{sec + 1}", 0.0)), 1.0)

    for k1, k2 in pairs:
        s1, s2 = blocks[k1 - 1].section, blocks[k2 - 1].section
        region_check((k1, k2), s1, s2,
                     lambda sec: s1 <= sec - 1 and sec + 1 <= s2)
    for k in left_set:
        s = blocks[k - 1].section
        region_check((k,), 1, s, lambda sec: sec + 1 <= s)
    for k in right_set:
        s = blocks[k - 1].section
        region_check((k,), s, n, lambda sec: s <= sec - 1)

    # Removal bookkeeping.
    for k in range(1, n_blocks + 1):
        prev = None
        for t in steps:
            y = result.removal.get((k, t), 0.0)
            hit("bounds", abs(y - round(y)), 1.0)
            hit("bounds", max(0.0, -y, y - 1.0), 1.0)
            if prev is not None:
                hit("removal_logic", max(0.0, prev - y), 1.0)
            prev = y
    for u in range(1, n_blocks + 1):
        total = sum(result.removal.get((k, u), 0.0)
                    for k in range(1, n_blocks + 1))
        hit("removal_logic", max(0.0, float(u) - total), 1.0)
    for k, blk in enumerate(blocks, start=1):
        s = blk.section
        cut_needed = result.section_cut[s - 1]
        fill_needed = result.section_fill[s - 1]
        for u in steps:
            if result.removal.get((k, u), 0.0) < 0.5:
                continue
            unload = sum(val(f"FU_{h}_{t}_{s}_{s + 1}", 0.0)
                         + val(f"FU_{h}_{t}_{s}_{s - 1}", 0.0)
                         for h in hs for t in range(u + 1))
            load = sum(val(f"FL_{h}_{t}_{s - 1}_{s}", 0.0)
                       + val(f"FL_{h}_{t}_{s + 1}_{s}", 0.0)
                       for h in hs for t in range(u + 1))
            hit("removal_logic", max(0.0, cut_needed - unload),
                abs(cut_needed))
            hit("removal_logic", max(0.0, fill_needed - load),
                abs(fill_needed))


def _check_flow_bounds(instance, hauls, steps, val, hit) -> None:
    n = instance.n
    for h in range(1, len(hauls) + 1):
        for t in steps:
            hit("bounds", abs(val(f"FR_{h}_{t}_{n}_{n + 1}", 0.0)), 1.0)
            hit("bounds", abs(val(f"FR_{h}_{t}_1_0", 0.0)), 1.0)
            for i in range(1, n + 1):
                for name in (f"FR_{h}_{t}_{i}_{i + 1}", f"FR_{h}_{t}_{i}_{i - 1}",
                             f"FU_{h}_{t}_{i}_{i + 1}", f"FU_{h}_{t}_{i}_{i - 1}",
                             f"FL_{h}_{t}_{i - 1}_{i}", f"FL_{h}_{t}_{i + 1}_{i}"):
                    hit("bounds", max(0.0, -val(name, 0.0)), 1.0)
            for j in range(1, len(instance.borrow_pits) + 1):
                sec = instance.borrow_pits[j - 1].attached_section
                hit("bounds", max(0.0, -val(f"FB_{h}_{t}_{j}_{sec + 1}", 0.0)), 1.0)
                hit("bounds", max(0.0, -val(f"FB_{h}_{t}_{j}_{sec - 1}", 0.0)), 1.0)
            for k in range(1, len(instance.waste_pits) + 1):
                sec = instance.waste_pits[k - 1].attached_section
                hit("bounds", max(0.0, -val(f"FW_{h}_{t}_{k}_{sec - 1}", 0.0)), 1.0)
                hit("bounds", max(0.0, -val(f"FW_{h}_{t}_{k}_{sec + 1}", 0.0)), 1.0)


def _ctg_nodes(instance: RoadInstance) -> tuple[list[int], list[int]]:
    n = instance.n
    n_borrow = len(instance.borrow_pits)
    supply = list(range(1, n + 1)) + [n + j for j in range(1, n_borrow + 1)]
    demand = list(range(1, n + 1)) + \
        [n + n_borrow + k for k in range(1, len(instance.waste_pits) + 1)]
    return supply, demand


def _check_ctg_flows(instance, result, hit) -> None:
    n = instance.n
    n_borrow = len(instance.borrow_pits)
    val = result.values.get
    supply, demand = _ctg_nodes(instance)
    for i in range(1, n + 1):
        out = sum(val(f"X_{i}_{dst}", 0.0) for dst in demand if dst != i)
        into = sum(val(f"X_{src}_{i}", 0.0) for src in supply if src != i)
        hit("balance", abs(out - result.section_cut[i - 1]), abs(out))
        hit("balance", abs(into - result.section_fill[i - 1]), abs(into))
    for j, pit in enumerate(instance.borrow_pits, start=1):
        out = sum(val(f"X_{n + j}_{dst}", 0.0) for dst in demand)
        hit("balance", abs(out - result.borrow_used[j - 1]), abs(out))
        hit("capacity", max(0.0, out - pit.capacity), pit.capacity)
    for k, pit in enumerate(instance.waste_pits, start=1):
        node = n + n_borrow + k
        into = sum(val(f"X_{src}_{node}", 0.0) for src in supply)
        hit("balance", abs(into - result.waste_used[k - 1]), abs(into))
        hit("capacity", max(0.0, into - pit.capacity), pit.capacity)
    for src in supply:
        for dst in demand:
            if src != dst:
                hit("bounds", max(0.0, -val(f"X_{src}_{dst}", 0.0)), 1.0)


def recompute_cost(instance: RoadInstance, config: BuilderConfig,
                   result: AlignmentResult) -> float:
    """Objective re-derived from the decoded result's flows and volumes."""
    if config.model == "CTG":
        return _recompute_ctg(instance, result)
    hauls = effective_hauls(instance, config)
    steps = range(len(instance.blocks) + 1)
    n = instance.n
    stations = instance.stations

    total = 0.0
    for i in range(1, n + 1):
        mat = instance.material_of(i)
        total += mat.excavation * result.section_cut[i - 1]
        total += mat.embankment * result.section_fill[i - 1]

    val = result.values.get
    for h, haul in enumerate(hauls, start=1):
        for t in steps:
            for i in range(1, n + 1):
                if i < n:
                    dist = stations[i] - stations[i - 1]
                    total += haul.unit_haul_cost * dist \
                        * val(f"FR_{h}_{t}_{i}_{i + 1}", 0.0)
                if i > 1:
                    dist = stations[i - 1] - stations[i - 2]
                    total += haul.unit_haul_cost * dist \
                        * val(f"FR_{h}_{t}_{i}_{i - 1}", 0.0)
                total += haul.loading_cost * (
                    val(f"FU_{h}_{t}_{i}_{i + 1}", 0.0)
                    + val(f"FU_{h}_{t}_{i}_{i - 1}", 0.0))
            for j, pit in enumerate(instance.borrow_pits, start=1):
                mat = instance.material_of(pit.attached_section)
                unit = mat.excavation + haul.loading_cost \
                    + haul.unit_haul_cost * pit.dead_haul
                sec = pit.attached_section
                total += unit * (val(f"FB_{h}_{t}_{j}_{sec + 1}", 0.0)
                                 + val(f"FB_{h}_{t}_{j}_{sec - 1}", 0.0))
            for k, pit in enumerate(instance.waste_pits, start=1):
                mat = instance.material_of(pit.attached_section)
                unit = mat.embankment + haul.unit_haul_cost * pit.dead_haul
                sec = pit.attached_section
                total += unit * (val(f"FW_{h}_{t}_{k}_{sec - 1}", 0.0)
                                 + val(f"FW_{h}_{t}_{k}_{sec + 1}", 0.0))
    return total


def _recompute_ctg(instance: RoadInstance, result: AlignmentResult) -> float:
    n = instance.n
    n_borrow = len(instance.borrow_pits)
    hauls = instance.cost_model.hauls
    stations = instance.stations
    val = result.values.get

    def info(node: int) -> tuple[float, float, float, float]:
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

    supply, demand = _ctg_nodes(instance)
    total = 0.0
    for src in supply:
        st_s, dead_s, exc_s, _ = info(src)
        for dst in demand:
            if src == dst:
                continue
            flow = val(f"X_{src}_{dst}", 0.0)
            if flow == 0.0:
                continue
            st_d, dead_d, _, emb_d = info(dst)
            dist = abs(st_d - st_s) + dead_s + dead_d
            total += (exc_s + cheapest_haul(hauls, dist)[1] + emb_d) * flow
    return total
