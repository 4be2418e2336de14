"""Instance model: geometry, cost breakpoints, big-M sizing, block sets."""

import math
import random

import pytest

from valign.instance import (
    HaulClass,
    InstanceError,
    Pit,
    big_m,
    block_access_sets,
    cheapest_haul,
    default_cost_model,
    global_big_m,
)

from conftest import make_instance


def test_default_cost_model_values():
    cm = default_cost_model()
    assert [m.excavation for m in cm.materials] == [4.0, 4.0, 20.0, 4.0]
    assert [m.embankment for m in cm.materials] == [2.0, 2.0, 1.8, 2.0]
    assert [(h.loading_cost, h.unit_haul_cost) for h in cm.hauls] == [
        (0.0, 0.008), (0.6, 0.004), (2.6, 0.002)]


def test_cheapest_haul_breakpoints():
    cm = default_cost_model()
    # short below 150 m, middle between, long above 1000 m
    assert cheapest_haul(cm, 100.0)[0] == 0
    assert cheapest_haul(cm, 500.0)[0] == 1
    assert cheapest_haul(cm, 2000.0)[0] == 2
    # crossover arithmetic is exact
    assert 0.008 * 150 == 0.6 + 0.004 * 150
    assert 0.6 + 0.004 * 1000 == 2.6 + 0.002 * 1000


def test_cheapest_haul_cost_value():
    cm = default_cost_model()
    idx, cost = cheapest_haul(cm, 40.0)
    assert idx == 0
    assert cost == pytest.approx(0.008 * 40.0)


def test_profile_and_grade():
    inst = make_instance([100] * 6, segments=[3, 3])
    coeffs = [(2.0, -0.05, 0.001), (2.0, -0.05, 0.001)]
    sigma = 7.0
    assert inst.profile(coeffs, sigma) == pytest.approx(
        2.0 - 0.05 * sigma + 0.001 * sigma * sigma)
    # finite-difference check of the grade, away from the segment joint
    rng = random.Random(5)
    for _ in range(20):
        c = [(rng.uniform(-5, 5), rng.uniform(-0.1, 0.1),
              rng.uniform(-0.001, 0.001)) for _ in range(2)]
        s = rng.uniform(1.0, 55.0)
        eps = 1e-5
        fd = (inst.profile(c, s + eps) - inst.profile(c, s - eps)) / (2 * eps)
        assert inst.grade(c, s) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_local_coordinate_and_spans():
    inst = make_instance([100] * 6, segments=[3, 3])
    # a segment's polynomial covers up to the next segment's first station
    assert inst.segment_span(1) == (0.0, 60.0)
    assert inst.segment_span(2) == (60.0, 100.0)
    # segment-local coordinates restart at each segment start
    assert inst.local_coordinate(1) == 0.0
    assert inst.local_coordinate(4) == 0.0
    assert inst.local_coordinate(6) == 40.0


def test_distance_symmetry():
    inst = make_instance([100] * 4)
    assert inst.distance(1, 4) == 60.0
    assert inst.distance(4, 1) == 60.0
    assert inst.distance(2, 2) == 0.0


def test_big_m_from_area_and_offsets():
    inst = make_instance([100] * 3, areas=[10, 20, 30], offset=2.0)
    assert big_m(inst, 2) == pytest.approx(20 * 2.0)
    total = sum(big_m(inst, i) for i in range(1, 4))
    assert global_big_m(inst) == pytest.approx(total)


def test_global_big_m_includes_borrow_capacity():
    pit = Pit(kind="borrow", attached_section=2, capacity=77.0,
              dead_haul=10.0)
    base = make_instance([100] * 3, areas=[10, 10, 10], offset=1.0)
    with_pit = make_instance([100] * 3, areas=[10, 10, 10], offset=1.0,
                             borrow=[pit])
    assert global_big_m(with_pit) == pytest.approx(global_big_m(base) + 77.0)


def test_block_access_sets_pairs_and_sides():
    inst = make_instance([100] * 9, blocks=[3, 6], access=[4])
    pairs, left, right = block_access_sets(inst)
    # access road sits strictly between the two blocks: pair is broken
    assert pairs == ()
    # no access left of block at 3, none right of block at 6
    assert left == (1,)
    assert right == (2,)


def test_block_access_sets_gated_pair():
    inst = make_instance([100] * 9, blocks=[3, 6], access=[2, 8])
    pairs, left, right = block_access_sets(inst)
    assert pairs == ((1, 2),)
    assert left == ()
    assert right == ()


def test_block_access_sets_order_invariance():
    a = make_instance([100] * 9, blocks=[6, 3], access=[2, 8])
    b = make_instance([100] * 9, blocks=[3, 6], access=[8, 2])
    assert block_access_sets(a) == block_access_sets(b)


def test_invalid_instances_rejected():
    with pytest.raises(InstanceError):
        make_instance([100] * 3, blocks=[1])  # block on a boundary section
    with pytest.raises(InstanceError):
        make_instance([100] * 3, borrow=[Pit("borrow", 3, 10.0, 5.0)])
    with pytest.raises(InstanceError):
        make_instance([100] * 4, segments=[2, 3])  # sizes exceed sections
    with pytest.raises(InstanceError):
        make_instance([100, 100], slope=(0.1, -0.1))  # inverted bounds


def test_volume_curve_interpolation():
    from valign.instance import VolumeCurve
    curve = VolumeCurve(section=1, offsets=(-1.0, 0.0, 1.0),
                        cut=(0.0, 0.0, 50.0), fill=(40.0, 0.0, 0.0))
    assert curve.cut_at(0.5) == pytest.approx(25.0)
    assert curve.fill_at(-0.25) == pytest.approx(10.0)
    assert curve.cut_at(-0.7) == 0.0


def test_haul_class_is_hashable_value():
    h = HaulClass("short", loading_cost=0.0, unit_haul_cost=0.008)
    assert h == HaulClass("short", 0.0, 0.008)
