"""Brute-force oracles: transportation pricing and offset enumeration."""

import itertools
import random

import pytest

from valign.instance import Pit
from valign.oracle import (
    FlowNode,
    OracleInfeasible,
    TransportationProblem,
    allocation_cost,
    earthwork_problem,
    enumerate_optimal,
    section_volumes,
    solve_transportation,
)

from conftest import (
    BORROW_FILL_COST,
    BORROW_FILL_OFFSETS,
    TWO_NODE_COST,
    TWO_NODE_OFFSETS,
    make_instance,
)


def test_single_arc_cost():
    inst = make_instance([100.0] * 3, areas=[10.0] * 3, offset=2.0)
    cost = allocation_cost(inst, TWO_NODE_OFFSETS)
    assert cost == pytest.approx(TWO_NODE_COST, rel=1e-12)


def test_zero_plan_costs_nothing():
    inst = make_instance([100.0] * 3)
    assert allocation_cost(inst, (0.0, 0.0, 0.0)) == 0.0


def test_borrow_fill_cost():
    inst = make_instance(
        [100.0] * 3, areas=[10.0] * 3, offset=2.0,
        borrow=[Pit("borrow", 2, 50.0, 50.0)])
    cost = allocation_cost(inst, BORROW_FILL_OFFSETS)
    assert cost == pytest.approx(BORROW_FILL_COST, rel=1e-12)


def test_infeasible_balance_raises():
    # fill demand with no cut and no borrow pit
    inst = make_instance([100.0] * 3, areas=[10.0] * 3, offset=2.0)
    with pytest.raises(OracleInfeasible):
        allocation_cost(inst, (0.0, 0.0, -1.0))


def test_two_by_two_matches_enumeration():
    """Min-cost assignment of two supplies to two demands equals the best
    of the two extreme assignment plans."""
    inst = make_instance([100.0] * 4, areas=[10.0, 12.0, 12.0, 10.0],
                         offset=2.0)
    offsets = (1.0, -0.5, 0.5, -1.0)
    cut, fill = section_volumes(inst, offsets)
    # brute force over split fractions of supply 1 between the two demands
    plan_costs = []
    sups = [(i, cut[i]) for i in range(4) if cut[i] > 0]
    dems = [(j, fill[j]) for j in range(4) if fill[j] > 0]
    assert len(sups) == 2 and len(dems) == 2
    from valign.instance import cheapest_haul, default_cost_model
    cm = default_cost_model()

    def unit(i, j):
        mat_i = inst.material_of(i + 1)
        mat_j = inst.material_of(j + 1)
        return (mat_i.excavation + mat_j.embankment
                + cheapest_haul(cm, inst.distance(i + 1, j + 1))[1])

    (i1, s1), (i2, s2) = sups
    (j1, d1), (j2, d2) = dems
    # network flow optimum sits at an extreme point: supply 1 sends as much
    # as possible to one demand, the rest follows by balance
    for x in (min(s1, d1), max(0.0, s1 - d2)):
        cost = (x * unit(i1, j1) + (s1 - x) * unit(i1, j2)
                + (d1 - x) * unit(i2, j1) + (d2 - s1 + x) * unit(i2, j2))
        plan_costs.append(cost)
    oracle_cost = allocation_cost(inst, offsets)
    assert oracle_cost == pytest.approx(min(plan_costs), rel=1e-9)


def test_transportation_relabeling_invariance():
    rng = random.Random(11)
    sups = [FlowNode("sup", i, rng.uniform(0, 200), rng.uniform(1, 5),
                     rng.uniform(0, 30)) for i in range(3)]
    dems = [FlowNode("dem", i, rng.uniform(0, 200), rng.uniform(1, 5),
                     rng.uniform(0, 30)) for i in range(3)]
    total_s = sum(n.volume for n in sups)
    total_d = sum(n.volume for n in dems)
    # balance by padding the short side with a free slack node
    if total_s > total_d:
        dems.append(FlowNode("dem", 9, total_s - total_d, 0.0, 0.0,
                             firm=False))
    else:
        sups.append(FlowNode("sup", 9, total_d - total_s, 0.0, 0.0,
                             firm=False))
    from valign.instance import default_cost_model
    hauls = default_cost_model().hauls
    base = solve_transportation(
        TransportationProblem(tuple(sups), tuple(dems), hauls))[1]
    for perm in itertools.permutations(range(len(sups))):
        shuffled = TransportationProblem(
            tuple(sups[p] for p in perm), tuple(dems), hauls)
        assert solve_transportation(shuffled)[1] == pytest.approx(
            base, rel=1e-9)


def test_enumerate_flat_ground_zero():
    inst = make_instance([100.0] * 3, offset=2.0)
    offsets, cost = enumerate_optimal(
        inst, [[-1.0, 0.0, 1.0]] * 3)
    assert cost == 0.0
    assert offsets == (0.0, 0.0, 0.0)


def test_enumerate_symmetric_hump():
    """Symmetric ground and grids: the optimum cost is invariant under
    mirroring, so the returned plan's cost equals its mirror's cost."""
    inst = make_instance([100.0, 101.0, 100.0], areas=[10.0] * 3, offset=3.0)
    grid = [-1.0, 0.0, 1.0]
    offsets, cost = enumerate_optimal(inst, [grid] * 3)
    mirrored = tuple(reversed(offsets))
    assert allocation_cost(inst, mirrored) == pytest.approx(cost, rel=1e-9)


def test_enumerate_respects_slope_bounds():
    # steep offsets would need a grade beyond the bounds; they are skipped
    inst = make_instance([100.0, 100.0], spacing=10.0, areas=[10.0] * 2,
                         offset=5.0, slope=(-0.05, 0.05))
    offsets, cost = enumerate_optimal(
        inst, [[0.0, 2.0], [0.0, -2.0]])
    # 2 m drop over 10 m violates the bound; only balanced choices remain
    assert offsets == (0.0, 0.0)
    assert cost == 0.0


def test_enumerate_guards():
    inst = make_instance([100.0] * 3)
    with pytest.raises(ValueError):
        enumerate_optimal(inst, [[0.0]] * 2)  # wrong grid count
    with pytest.raises(ValueError):
        enumerate_optimal(inst, [[0.0] * 6] * 3)  # grid too large
    big = make_instance([100.0] * 9)
    with pytest.raises(ValueError):
        enumerate_optimal(big, [[0.0]] * 9)  # too many sections
    multi = make_instance([100.0] * 4, segments=[2, 2])
    with pytest.raises(ValueError):
        enumerate_optimal(multi, [[0.0]] * 4)


def test_earthwork_problem_uses_dead_haul():
    inst = make_instance(
        [100.0] * 3, areas=[10.0] * 3, offset=2.0,
        waste=[Pit("waste", 2, 50.0, 100.0)])
    # cut 10 at section 2 goes to the waste pit: excavation 4 +
    # cheapest(100 m dead haul) + embankment 2
    cost = allocation_cost(inst, (0.0, 1.0, 0.0))
    assert cost == pytest.approx(10 * (4.0 + 0.8 + 2.0), rel=1e-12)


def test_section_volumes_sign_split():
    inst = make_instance([100.0] * 3, areas=[10.0, 20.0, 30.0], offset=2.0)
    cut, fill = section_volumes(inst, (0.5, 0.0, -0.5))
    assert cut == pytest.approx([5.0, 0.0, 0.0])
    assert fill == pytest.approx([0.0, 0.0, 15.0])
