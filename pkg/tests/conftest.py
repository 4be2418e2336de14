"""Shared fixtures: canonical instances and the bundled solver command."""

from __future__ import annotations

import sys
from typing import Sequence

import pytest

from valign.instance import (
    AccessRoad,
    Block,
    Pit,
    RoadInstance,
    Section,
    SegmentLayout,
    VolumeCurve,
    default_cost_model,
)

BUNDLED_SOLVER = (f"{sys.executable} -m valign.milp_solve "
                  "--time-limit {timelimit} --gap {gap} --sos binarize "
                  "{mps} {sol}")


def make_instance(elevations: Sequence[float], spacing: float = 20.0,
                  areas: Sequence[float] | None = None,
                  materials: Sequence[int] | None = None,
                  offset: float = 5.0,
                  segments: Sequence[int] | None = None,
                  borrow: Sequence[Pit] = (), waste: Sequence[Pit] = (),
                  blocks: Sequence[int] = (), access: Sequence[int] = (),
                  slope: tuple[float, float] = (-0.1, 0.1),
                  curves: Sequence[VolumeCurve] = ()) -> RoadInstance:
    n = len(elevations)
    sections = tuple(
        Section(index=i + 1, station=spacing * i, ground_elevation=float(e),
                area=float(areas[i]) if areas is not None else 100.0,
                material=materials[i] if materials is not None else 1,
                offset_lo=-offset, offset_hi=offset)
        for i, e in enumerate(elevations))
    layout = SegmentLayout(tuple(segments) if segments is not None else (n,))
    return RoadInstance(
        sections=sections, segment_layout=layout,
        cost_model=default_cost_model(),
        borrow_pits=tuple(borrow), waste_pits=tuple(waste),
        blocks=tuple(Block(section=k) for k in blocks),
        access_roads=tuple(AccessRoad(section=a) for a in access),
        slope_lo=slope[0], slope_hi=slope[1],
        volume_curves=tuple(curves)).check()


@pytest.fixture(scope="session")
def solver_command() -> str:
    return BUNDLED_SOLVER


@pytest.fixture(scope="session")
def two_node_instance() -> RoadInstance:
    """Three flat sections; areas pick out a 10 m3 cut at section 1 and a
    10 m3 fill at section 3 once offsets are fixed to (1, 0, -1)."""
    return make_instance([100.0, 100.0, 100.0], areas=[10.0, 10.0, 10.0],
                         offset=2.0)


TWO_NODE_OFFSETS = (1.0, 0.0, -1.0)
TWO_NODE_COST = 63.2  # 10*(4+2) + 10*0.008*40

# Borrow-only fill: 10 m3 from a pit 50 m off section 2, embanked one
# 20 m hop away at section 3.
BORROW_FILL_COST = 65.6  # 10*(4+0+0.008*50) + 10*2 + 10*0.008*20


@pytest.fixture(scope="session")
def borrow_fill_instance() -> RoadInstance:
    return make_instance(
        [100.0, 100.0, 100.0], areas=[10.0, 10.0, 10.0], offset=2.0,
        borrow=[Pit(kind="borrow", attached_section=2, capacity=50.0,
                    dead_haul=50.0)])


BORROW_FILL_OFFSETS = (0.0, 0.0, -1.0)


@pytest.fixture(scope="session")
def hump_block_instance() -> RoadInstance:
    """Five sections with a hump at the blocked middle: cut at section 3
    must cross outward while the block gates movement over it."""
    return make_instance([100.0, 100.0, 102.0, 100.0, 100.0],
                         areas=[40.0, 40.0, 40.0, 40.0, 40.0],
                         offset=4.0, blocks=[3], access=[1, 5])
