"""Model construction: counts, naming, config handling, lint, fix_offsets."""

import math

import pytest

from valign.builder import (
    BuildError,
    BuilderConfig,
    QNF_COST_PAIRS,
    build,
    effective_hauls,
    fix_offsets,
    named_config,
)
from valign.instance import HaulClass, Pit

from conftest import make_instance


def single_haul_config() -> BuilderConfig:
    return named_config("QNS-B")


def test_variable_count_three_sections_one_haul():
    inst = make_instance([100.0] * 3)
    model = build(inst, single_haul_config())
    flows = [v for v in model.variables if v.name[:2] in ("FR", "FU", "FL")]
    assert len(flows) == 6 * 3  # 6 per section: {FR,FU,FL} x 2 directions
    assert len(model.variables) == 30  # + VP,VM (6), U (3), A (3)
    assert model.binary_count == 0


def test_block_adds_time_steps_and_binaries():
    inst = make_instance([100.0] * 5, blocks=[3], access=[1])
    model = build(inst, single_haul_config())
    assert model.binary_count == 2  # n_b * |T| = 1 * 2
    names = {v.name for v in model.variables}
    assert "Y_1_0" in names and "Y_1_1" in names
    # flows double with the second time step
    flows = [v for v in model.variables if v.name.startswith("FR_")]
    assert len(flows) == 2 * 2 * 5


def test_qnf_equals_mhqnf_with_one_haul():
    inst = make_instance([100.0, 101.0, 100.0], areas=[30.0] * 3)
    for label, (loading, per_m) in QNF_COST_PAIRS.items():
        haul = HaulClass(label, loading_cost=loading, unit_haul_cost=per_m)
        qnf = build(inst, BuilderConfig(model="QNF", haul_subset=(haul,),
                                        name=f"QNF-{label}"))
        mh = build(inst, BuilderConfig(model="MHQNF", haul_subset=(haul,),
                                       name=f"MH-{label}"))
        assert [v.name for v in qnf.variables] == \
            [v.name for v in mh.variables]
        assert qnf.constraints == mh.constraints
        assert qnf.objective == mh.objective


def test_mhqnf_uses_all_hauls_by_default():
    inst = make_instance([100.0] * 3)
    config = named_config("MQN-B")
    assert len(effective_hauls(inst, config)) == 3
    model = build(inst, config)
    assert any(v.name.startswith("FR_3_") for v in model.variables)


def test_boundary_transit_flows_are_pinned():
    inst = make_instance([100.0] * 3)
    model = build(inst, single_haul_config())
    vmap = {v.name: v for v in model.variables}
    assert vmap["FR_1_0_3_4"].upper == 0.0  # off the right end
    assert vmap["FR_1_0_1_0"].upper == 0.0  # off the left end
    assert vmap["FR_1_0_1_2"].upper == math.inf


def test_ctg_arc_counts():
    inst = make_instance([100.0] * 3)
    model = build(inst, named_config("CTG-B"))
    arcs = [v for v in model.variables if v.name.startswith("X_")]
    assert len(arcs) == 6  # ordered section pairs

    with_pits = make_instance(
        [100.0] * 3, borrow=[Pit("borrow", 2, 10.0, 5.0)],
        waste=[Pit("waste", 2, 10.0, 5.0)])
    model = build(with_pits, named_config("CTG-B"))
    arcs = [v for v in model.variables if v.name.startswith("X_")]
    # 3 sections + borrow + waste = 5 nodes; borrow only ships out, waste
    # only receives, pit-to-pit arcs dropped: 6 + 3 + 3 + 1 = 13
    assert len(arcs) == 13


def test_ctg_refuses_blocks():
    inst = make_instance([100.0] * 5, blocks=[3], access=[1])
    with pytest.raises(BuildError):
        build(inst, named_config("CTG-B"))


def test_piecewise_needs_curves():
    inst = make_instance([100.0] * 3)
    with pytest.raises(BuildError):
        build(inst, BuilderConfig(volume_mode="piecewise-sos2", name="x"))


def test_sos1_block_technique_emits_sets():
    inst = make_instance([100.0] * 5, blocks=[3], access=[1])
    model = build(inst, named_config("MQN-S1"))
    assert model.sos_sets
    assert all(s.sos_type == 1 for s in model.sos_sets)
    # slack members are bounded so the sets stay binarizable
    vmap = {v.name: v for v in model.variables}
    for s in model.sos_sets:
        slack = vmap[s.members[0][0]]
        assert math.isfinite(slack.upper)


def test_model_lint_passes_on_all_variants():
    inst = make_instance([100.0, 102.0, 100.0, 101.0], areas=[25.0] * 4,
                         segments=[2, 2],
                         borrow=[Pit("borrow", 2, 10.0, 5.0)],
                         waste=[Pit("waste", 3, 10.0, 5.0)])
    for name in ("MQN-B", "QNS-B", "QNA-B", "CTG-B"):
        model = build(inst, named_config(name))
        model.lint()  # raises on any inconsistency


def test_named_config_rejects_unknown():
    with pytest.raises(BuildError):
        named_config("MQN-X")
    with pytest.raises(BuildError):
        named_config("FOO-B")


def test_fix_offsets_adds_rows_and_checks_bounds():
    inst = make_instance([100.0] * 3, offset=2.0)
    model = build(inst, single_haul_config())
    fixed = fix_offsets(model, (1.0, 0.0, -1.0))
    extra = [c for c in fixed.constraints if c.name.startswith("FIX_")]
    assert len(extra) == 3
    assert all(c.sense == "=" for c in extra)
    with pytest.raises(BuildError):
        fix_offsets(model, (3.0, 0.0, 0.0))  # outside the offset window
    with pytest.raises(BuildError):
        fix_offsets(model, (0.0, 0.0))  # wrong arity


def test_objective_sense_and_provenance():
    inst = make_instance([100.0] * 3)
    model = build(inst, named_config("MQN-B"))
    assert model.sense == "min"
    prov = dict(model.provenance)
    assert prov["model"] == "MHQNF"
    assert prov["config_name"] == "MQN-B"


def test_conservation_row_counts():
    inst = make_instance([100.0] * 4)
    model = build(inst, named_config("MQN-B"))
    fcr = [c for c in model.constraints if c.name.startswith("FCR_")]
    fcl = [c for c in model.constraints if c.name.startswith("FCL_")]
    # one row per (haul, time, section) and direction
    assert len(fcr) == 3 * 1 * 4
    assert len(fcl) == 3 * 1 * 4
