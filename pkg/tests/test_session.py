"""Session state machine tests: eversion gating, pouch clamping, the
stiffen-bend-lock rest capture, rejection atomicity, log replay, and
scenario file IO.
"""

import json
import math

import numpy as np
import pytest

from vinesim.commands import (
    CommandScript,
    Grow,
    PullTendon,
    ReleaseTendon,
    Retract,
    SetPouch,
    WaitEquilibrium,
)
from vinesim.model import MaterialModel, RobotDescription
from vinesim.session import (
    REASON_GROW_BEYOND_TOTAL,
    REASON_GROW_REQUIRES_UNJAMMED,
    REASON_INVALID_VALUE,
    REASON_NEGATIVE_LENGTH,
    REASON_RETRACT_BEYOND_BASE,
    REASON_RETRACT_REQUIRES_STRAIGHT,
    REASON_RETRACT_REQUIRES_UNJAMMED,
    REASON_SECTION_NOT_EXPOSED,
    REASON_TENDON_OUT_OF_RANGE,
    ReplayError,
    Scenario,
    ScenarioError,
    Session,
    load_log,
    load_scenario,
    replay_log,
    save_scenario,
)
from vinesim.units import ATMOSPHERE_PA


def fresh():
    return Session()


def grown():
    s = fresh()
    assert s.execute(Grow(1.0))["ok"]
    return s


def test_fresh_session_logs_initial_state():
    s = fresh()
    assert len(s.log) == 1
    rec = s.log[0]
    assert rec["seq"] == 0
    assert rec["command"] is None
    assert rec["ok"] is True
    assert rec["state_hash"] == s.state_hash()
    assert s.exposed_count == 0
    assert s.everted == 0.0


def test_grow_half_meter_exposes_two_sections():
    s = fresh()
    rec = s.execute(Grow(0.5))
    assert rec["ok"]
    assert s.everted == 0.5
    assert s.exposed_count == 2
    assert len(s.pouches) == 2
    assert s.q.shape == (2, 2)
    # freshly exposed pouches ride at body pressure: unjammed
    assert all(p == s.internal_abs for p in s.pouches)


def test_partial_section_attaches_to_last_segment():
    s = fresh()
    s.execute(Grow(0.3))
    assert s.exposed_count == 1
    np.testing.assert_allclose(s.segment_lengths(), [0.3])
    s.execute(Grow(0.2))
    assert s.exposed_count == 2
    np.testing.assert_allclose(s.segment_lengths(), [0.25, 0.25])


def test_exposure_monotone_under_growth():
    s = fresh()
    seen = [s.exposed_count]
    for _ in range(20):
        s.execute(Grow(0.05))
        seen.append(s.exposed_count)
    assert seen == sorted(seen)
    assert seen[-1] == 4
    assert s.everted == pytest.approx(1.0)


def test_grow_rejected_while_jammed_state_unchanged():
    s = fresh()
    s.execute(Grow(0.5))
    s.execute(SetPouch(1, ATMOSPHERE_PA))
    before = s.state_hash()
    rec = s.execute(Grow(0.25))
    assert not rec["ok"]
    assert rec["reason"] == REASON_GROW_REQUIRES_UNJAMMED
    assert rec["detail"]["sections"] == [1]
    assert s.state_hash() == before
    assert s.everted == 0.5


def test_grow_beyond_total_rejected():
    s = grown()
    rec = s.execute(Grow(0.01))
    assert rec["reason"] == REASON_GROW_BEYOND_TOTAL
    assert s.everted == 1.0


def test_negative_lengths_rejected():
    s = fresh()
    assert s.execute(Grow(-0.1))["reason"] == REASON_NEGATIVE_LENGTH
    assert s.execute(Retract(-0.1))["reason"] == REASON_NEGATIVE_LENGTH


def test_set_pouch_clamps_to_valid_band():
    s = fresh()
    s.execute(Grow(0.5))
    rec = s.execute(SetPouch(0, 5e6))
    assert rec["ok"]
    assert s.pouches[0] == s.internal_abs
    assert rec["detail"]["clamped_to_kpa"] == pytest.approx(s.internal_abs / 1e3)
    rec = s.execute(SetPouch(0, -3.0))
    assert rec["ok"]
    assert s.pouches[0] == 0.0


def test_set_pouch_requires_exposed_section():
    s = fresh()
    rec = s.execute(SetPouch(0, ATMOSPHERE_PA))
    assert rec["reason"] == REASON_SECTION_NOT_EXPOSED
    s.execute(Grow(0.5))
    rec = s.execute(SetPouch(3, ATMOSPHERE_PA))
    assert rec["reason"] == REASON_SECTION_NOT_EXPOSED
    assert rec["detail"] == {"section": 3, "exposed": 2}


def test_tendon_command_validation():
    s = grown()
    assert s.execute(PullTendon(9, tension=1.0))["reason"] \
        == REASON_TENDON_OUT_OF_RANGE
    assert s.execute(ReleaseTendon(-1))["reason"] == REASON_TENDON_OUT_OF_RANGE
    rec = s.execute(PullTendon(0, tension=700.0))
    assert rec["reason"] == REASON_INVALID_VALUE
    assert rec["detail"]["tension_limit_n"] == 600.0


def test_wait_with_nothing_everted():
    s = fresh()
    rec = s.execute(WaitEquilibrium())
    assert rec["ok"]
    assert rec["detail"] == {"converged": True, "joints": 0}


def test_pull_and_wait_bends_chain():
    s = grown()
    s.execute(PullTendon(0, tension=150.0))
    rec = s.execute(WaitEquilibrium())
    assert rec["ok"] and rec["detail"]["converged"]
    # tendon 0 sits at station angle 0 (+x): the chain bends toward +x
    assert rec["detail"]["tip_mm"][0] > 10.0
    assert np.max(np.abs(s.q)) > 0.01


def test_stiffen_bend_lock_rest_capture():
    s = grown()
    s.execute(PullTendon(0, tension=150.0))
    s.execute(WaitEquilibrium())
    bent = s.q.copy()
    for sec in range(4):
        s.execute(SetPouch(sec, ATMOSPHERE_PA))
    np.testing.assert_array_equal(s.rest, bent)
    s.execute(ReleaseTendon(0))
    s.execute(WaitEquilibrium())
    # all tendons slack, all sections jammed: the chain holds the locked
    # shape exactly (the unloaded solve returns the rest configuration)
    np.testing.assert_array_equal(s.q, bent)
    # unjamming releases the locks and the chain springs straight
    for sec in range(4):
        s.execute(SetPouch(sec, s.internal_abs))
    np.testing.assert_array_equal(s.rest, np.zeros((4, 2)))
    s.execute(WaitEquilibrium())
    np.testing.assert_array_equal(s.q, np.zeros((4, 2)))


def test_retract_requires_straight_then_succeeds():
    s = grown()
    s.execute(PullTendon(0, tension=150.0))
    s.execute(WaitEquilibrium())
    before = s.state_hash()
    rec = s.execute(Retract(0.1))
    assert rec["reason"] == REASON_RETRACT_REQUIRES_STRAIGHT
    assert rec["detail"]["max_angle_deg"] > 0.5
    assert s.state_hash() == before
    s.execute(ReleaseTendon(0))
    s.execute(WaitEquilibrium())
    rec = s.execute(Retract(0.3))
    assert rec["ok"]
    assert s.everted == pytest.approx(0.7)
    assert s.exposed_count == 2


def test_retract_requires_unjammed():
    s = grown()
    s.execute(SetPouch(2, ATMOSPHERE_PA))
    rec = s.execute(Retract(0.1))
    assert rec["reason"] == REASON_RETRACT_REQUIRES_UNJAMMED
    assert rec["detail"]["sections"] == [2]


def test_retract_beyond_base_rejected():
    s = fresh()
    s.execute(Grow(0.25))
    rec = s.execute(Retract(0.5))
    assert rec["reason"] == REASON_RETRACT_BEYOND_BASE


def test_displacement_controlled_pull():
    s = grown()
    s.execute(PullTendon(0, target_length=0.99))
    rec = s.execute(WaitEquilibrium())
    assert rec["ok"]
    assert rec["detail"]["resolved_tensions"]["tendon_0_n"] > 0.0
    assert rec["detail"]["tip_mm"][0] > 5.0


def test_internal_gauge_must_be_positive():
    with pytest.raises(ValueError):
        Session(internal_gauge=0.0)


def test_five_unequal_sections():
    desc = RobotDescription(section_lengths=(0.2, 0.15, 0.3, 0.1, 0.25))
    s = Session(description=desc)
    s.execute(Grow(1.0))
    assert s.exposed_count == 5
    assert s.q.shape == (5, 2)
    np.testing.assert_allclose(s.segment_lengths(),
                               [0.2, 0.15, 0.3, 0.1, 0.25])


# --- snapshot ----------------------------------------------------------------

def test_snapshot_reports_consistent_view():
    s = grown()
    s.execute(PullTendon(0, tension=120.0))
    s.execute(WaitEquilibrium())
    snap = s.snapshot()
    assert snap["everted_mm"] == 1000.0
    assert snap["exposed"] == 4
    assert snap["log_index"] == len(s.log) - 1
    assert snap["state_hash"] == s.state_hash()
    assert len(snap["segments"]) == 4
    assert len(snap["sections"]) == 4
    assert len(snap["wrinkled"]) == 4
    assert snap["tip_mm"] == pytest.approx(
        [v * 1e3 for v in s.last_equilibrium.tip_position])
    got = np.radians(np.asarray(snap["joint_angles_deg"]))
    np.testing.assert_allclose(got, s.q, atol=1e-12)
    assert not snap["sections"][0]["jammed"]


# --- logs and replay ---------------------------------------------------------

def fig7_like_script():
    return CommandScript(commands=(
        Grow(1.0),
        SetPouch(0, ATMOSPHERE_PA),
        SetPouch(1, ATMOSPHERE_PA),
        SetPouch(2, ATMOSPHERE_PA),
        PullTendon(0, tension=90.0),
        WaitEquilibrium(),
        SetPouch(3, ATMOSPHERE_PA),
        ReleaseTendon(0),
        WaitEquilibrium(),
    ))


def test_replay_reproduces_state(tmp_path):
    scn = Scenario(description=RobotDescription(), material=MaterialModel())
    live = Session.from_scenario(scn)
    live.run_script(fig7_like_script())
    path = tmp_path / "run.log.jsonl"
    live.save_log(path)

    records = load_log(path)
    assert len(records) == len(live.log)
    replayed = replay_log(scn, records)
    assert replayed.state_hash() == live.state_hash()
    assert replayed.log == live.log


def test_repeated_runs_give_bit_identical_logs(tmp_path):
    paths = []
    for i in range(2):
        s = Session()
        s.run_script(fig7_like_script())
        p = tmp_path / ("run%d.jsonl" % i)
        s.save_log(p)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_replay_detects_divergence(tmp_path):
    live = Session()
    live.run_script(fig7_like_script())
    records = [dict(r) for r in live.log]
    records[3]["state_hash"] = "0" * 64
    scn = Scenario(description=RobotDescription(), material=MaterialModel())
    with pytest.raises(ReplayError, match="diverged at seq 3"):
        replay_log(scn, records)


def test_replay_checks_initial_state(tmp_path):
    live = Session()
    records = [dict(r) for r in live.log]
    records[0]["state_hash"] = "0" * 64
    scn = Scenario(description=RobotDescription(), material=MaterialModel())
    with pytest.raises(ReplayError, match="initial state"):
        replay_log(scn, records)


def test_replay_rejects_unknown_log_schema():
    live = Session()
    records = [dict(r) for r in live.log]
    records[0]["schema_version"] = 99
    scn = Scenario(description=RobotDescription(), material=MaterialModel())
    with pytest.raises(ReplayError, match="schema_version"):
        replay_log(scn, records)


def test_rejected_commands_replay_too(tmp_path):
    live = Session()
    live.execute(Grow(0.5))
    live.execute(SetPouch(0, ATMOSPHERE_PA))
    rec = live.execute(Grow(0.25))       # rejected: section 0 jammed
    assert not rec["ok"]
    scn = Scenario(description=RobotDescription(), material=MaterialModel())
    replayed = replay_log(scn, [dict(r) for r in live.log])
    assert replayed.state_hash() == live.state_hash()


# --- scenario files ----------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    scn = Scenario(
        description=RobotDescription(section_lengths=(0.2, 0.2, 0.3)),
        material=MaterialModel(deltaP_sat=5123.456789),
        internal_gauge=13800.0,
        script=fig7_like_script(),
    )
    p = tmp_path / "scenario.json"
    save_scenario(scn, p)
    back = load_scenario(p)
    assert back == scn


def test_minimal_scenario_uses_reference_defaults(tmp_path):
    p = tmp_path / "min.json"
    p.write_text('{"schema_version": 1}\n')
    scn = load_scenario(p)
    assert scn.description == RobotDescription()
    assert scn.material == MaterialModel()
    assert scn.internal_gauge == 6900.0
    assert len(scn.script) == 0


def test_scenario_parse_error_names_line(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text('{"schema_version": 1,\n  "internal_kpa": }\n')
    with pytest.raises(ScenarioError, match="line 2"):
        load_scenario(p)


def test_scenario_parse_error_names_field(tmp_path):
    p = tmp_path / "badfield.json"
    p.write_text(json.dumps({
        "schema_version": 1,
        "description": {"schema_version": 1, "beam_radius_mm": -5.0},
    }))
    with pytest.raises(ScenarioError, match="description"):
        load_scenario(p)


def test_scenario_rejects_unknown_schema(tmp_path):
    p = tmp_path / "future.json"
    p.write_text('{"schema_version": 42}\n')
    with pytest.raises(ScenarioError, match="schema_version"):
        load_scenario(p)


def test_log_parse_error_names_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text('{"seq": 0}\nnot json\n')
    with pytest.raises(ScenarioError, match="line 2"):
        load_log(p)
