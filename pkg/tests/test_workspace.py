"""Reachable-set sampling over jamming patterns.

Oracles here avoid the module's own folding math wherever possible: arcs are
checked against plain trigonometry, pattern ids are decoded independently and
pushed through forward_kinematics, and hull areas are pinned as regression
values measured once on the default robot.
"""

import math

import numpy as np
import pytest

from vinesim.model import MaterialModel, RobotDescription
from vinesim.statics import forward_kinematics
from vinesim.workspace import (
    expansion_ratio,
    sample_workspace,
    save_points_csv,
    tension_sensitivity,
)

DEG = math.pi / 180.0


def _sorted_rows(points):
    # canonical row order; +0.0 folds -0.0 so bitwise compares are stable
    a = np.asarray(points) + 0.0
    return a[np.lexsort((a[:, 2], a[:, 1], a[:, 0]))]


# ---------------------------------------------------------------------------
# degenerate and small grids


def test_single_point_grid_is_straight_tip(desc, material):
    # step larger than the half-range leaves only the zero angle
    res = sample_workspace(desc, material, angle_max=0.01 * DEG, angle_step=5.0 * DEG)
    assert res.total_grid == 1
    assert res.points.shape == (1, 3)
    total = sum(desc.section_lengths)
    np.testing.assert_array_equal(res.points[0], [0.0, 0.0, total])
    assert res.hull_measure == 0.0
    assert not res.partial


def test_single_point_grid_base_only_matches(desc, material):
    res = sample_workspace(
        desc, material, mode="base-only", angle_max=0.01 * DEG, angle_step=5.0 * DEG
    )
    assert res.points.shape == (1, 3)
    np.testing.assert_array_equal(res.points[0], [0.0, 0.0, sum(desc.section_lengths)])


def test_degenerate_base_grid_rejected_for_ratio(desc, material):
    with pytest.raises(ValueError, match="degenerate"):
        expansion_ratio(desc, material, angle_max=0.01 * DEG, angle_step=5.0 * DEG)


# ---------------------------------------------------------------------------
# single-joint arc oracle


def test_base_sweep_of_one_section_robot_is_an_arc(material):
    length = 0.4
    one = RobotDescription(section_lengths=(length,))
    res = sample_workspace(
        one, material, mode="base-only", angle_max=30.0 * DEG, angle_step=5.0 * DEG
    )
    assert res.points.shape == (13, 3)
    radii = np.linalg.norm(res.points, axis=1)
    np.testing.assert_allclose(radii, length, rtol=0.0, atol=1e-15)
    # the sweep is planar and spans the requested fan
    assert np.all(res.points[:, 1] == 0.0)
    tilts = np.degrees(np.arctan2(res.points[:, 0], res.points[:, 2]))
    np.testing.assert_allclose(sorted(tilts), np.arange(-30.0, 31.0, 5.0), atol=1e-12)


def test_base_sweep_points_lie_on_expected_chord_spacing(material):
    length = 0.4
    one = RobotDescription(section_lengths=(length,))
    res = sample_workspace(
        one, material, mode="base-only", angle_max=30.0 * DEG, angle_step=5.0 * DEG
    )
    pts = res.points[np.argsort(np.arctan2(res.points[:, 0], res.points[:, 2]))]
    chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    np.testing.assert_allclose(
        chords, 2.0 * length * math.sin(2.5 * DEG), rtol=1e-12
    )


# ---------------------------------------------------------------------------
# subset and expansion


def test_base_only_points_are_a_bitwise_subset_of_multi_joint(desc, material):
    multi = sample_workspace(desc, material)
    base = sample_workspace(desc, material, mode="base-only")
    assert base.points.shape[0] < multi.points.shape[0]
    multi_rows = {row.tobytes() for row in multi.points}
    for row in base.points:
        assert row.tobytes() in multi_rows


def test_expansion_ratio_exceeds_one_and_pins_regression_value(desc, material):
    ratio, multi, base = expansion_ratio(desc, material)
    assert ratio > 1.0
    assert multi.hull_measure > base.hull_measure
    # regression pins measured on the default robot at the 5 degree grid
    assert base.hull_measure == pytest.approx(0.089921754594, rel=1e-9)
    assert multi.hull_measure == pytest.approx(1.070065399779, rel=1e-9)
    assert ratio == pytest.approx(11.899961300956, rel=1e-9)


def test_grid_refinement_changes_hull_area_under_two_percent(desc, material):
    coarse = sample_workspace(desc, material, angle_step=5.0 * DEG)
    fine = sample_workspace(desc, material, angle_step=2.5 * DEG)
    change = abs(fine.hull_measure - coarse.hull_measure) / coarse.hull_measure
    assert change < 0.02


# ---------------------------------------------------------------------------
# rigid rotation invariance


def test_azimuth_rotation_rotates_points_and_preserves_hull(desc, material):
    flat = sample_workspace(desc, material, budget=400)
    turned = sample_workspace(desc, material, budget=400, azimuth=40.0 * DEG)
    c, s = math.cos(40.0 * DEG), math.sin(40.0 * DEG)
    manual = np.column_stack(
        [flat.points[:, 0] * c, flat.points[:, 0] * s, flat.points[:, 2]]
    )
    np.testing.assert_array_equal(_sorted_rows(manual), _sorted_rows(turned.points))
    assert turned.hull_measure == pytest.approx(flat.hull_measure, rel=1e-9)


# ---------------------------------------------------------------------------
# budget truncation


def test_budget_truncates_and_flags_partial(desc, material):
    res = sample_workspace(desc, material, budget=100)
    assert res.partial
    assert res.points.shape == (100, 3)
    assert res.total_grid == 13 ** 4
    assert sorted(res.pattern_ids.tolist()) == list(range(100))


def test_full_grid_is_not_partial(desc, material):
    res = sample_workspace(desc, material)
    assert not res.partial
    assert res.points.shape[0] == res.total_grid == 13 ** 4
    assert sorted(res.pattern_ids.tolist()) == list(range(13 ** 4))


# ---------------------------------------------------------------------------
# planar fold agrees with the full kinematic chain


def test_planar_points_match_forward_kinematics(desc, material):
    res = sample_workspace(desc, material, budget=80)
    grid = np.arange(-6, 7) * (5.0 * DEG)
    lengths = np.asarray(desc.section_lengths)
    n = len(lengths)
    for pid, pt in zip(res.pattern_ids, res.points):
        rem = int(pid)
        picks = []
        for _ in range(n):
            picks.append(rem % len(grid))
            rem //= len(grid)
        picks.reverse()  # last joint varies fastest in the id
        q = np.array([[0.0, grid[p]] for p in picks])
        _, tip = forward_kinematics(lengths, q)
        np.testing.assert_allclose(pt, tip, rtol=0.0, atol=1e-12)


# ---------------------------------------------------------------------------
# spatial sampling


def test_spatial_mode_parallel_matches_serial(material):
    two = RobotDescription(section_lengths=(0.5, 0.5))
    kw = dict(
        spatial=True,
        angle_max=15.0 * DEG,
        angle_step=15.0 * DEG,
        azimuth_step=60.0 * DEG,
    )
    serial = sample_workspace(two, material, jobs=1, **kw)
    parallel = sample_workspace(two, material, jobs=2, **kw)
    assert serial.spatial and parallel.spatial
    np.testing.assert_array_equal(serial.pattern_ids, parallel.pattern_ids)
    np.testing.assert_array_equal(serial.points, parallel.points)


def test_spatial_mode_covers_out_of_plane_points(material):
    two = RobotDescription(section_lengths=(0.5, 0.5))
    res = sample_workspace(
        two,
        material,
        spatial=True,
        angle_max=15.0 * DEG,
        angle_step=15.0 * DEG,
        azimuth_step=60.0 * DEG,
    )
    # straight option plus one tilt magnitude at six azimuths, per joint
    assert res.total_grid == 7 ** 2
    assert res.points.shape == (49, 3)
    assert np.any(np.abs(res.points[:, 1]) > 1e-3)
    assert res.hull_measure > 0.0


# ---------------------------------------------------------------------------
# tension sensitivity


def test_tension_sensitivity_matches_lever_sum(desc, material):
    from vinesim.model import joint_law
    from vinesim.workspace import DEFAULT_INTERNAL_GAUGE_PA

    law = joint_law(material, DEFAULT_INTERNAL_GAUGE_PA, 0.0, desc)
    total = sum(desc.section_lengths)
    starts = np.concatenate([[0.0], np.cumsum(desc.section_lengths)[:-1]])
    levers = total - starts
    expect = float(np.sum(levers * desc.tendon_radial_offset / law.stiffness))
    got = tension_sensitivity(desc, material)
    assert got == pytest.approx(expect, rel=1e-12)
    # order of magnitude sanity: a few millimetres of tip motion per newton
    assert got == pytest.approx(3.39e-3, rel=0.01)


# ---------------------------------------------------------------------------
# CSV export


def test_save_points_csv_format(tmp_path, desc, material):
    res = sample_workspace(desc, material, budget=50)
    out = tmp_path / "points.csv"
    save_points_csv(res, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "x_mm,y_mm,z_mm,pattern_id"
    assert len(lines) == 51
    for text, pt, pid in zip(lines[1:], res.points, res.pattern_ids):
        cols = text.split(",")
        assert len(cols) == 4
        for col, value in zip(cols[:3], pt * 1000.0):
            assert col == "%.6f" % value
        assert cols[3] == str(int(pid))


# ---------------------------------------------------------------------------
# argument validation


def test_mode_validation(desc, material):
    with pytest.raises(ValueError, match="mode"):
        sample_workspace(desc, material, mode="fancy")


def test_budget_validation(desc, material):
    with pytest.raises(ValueError, match="budget"):
        sample_workspace(desc, material, budget=0)


def test_angle_grid_validation(desc, material):
    with pytest.raises(ValueError, match="positive"):
        sample_workspace(desc, material, angle_step=-1.0)
    with pytest.raises(ValueError, match="positive"):
        sample_workspace(desc, material, angle_max=0.0)
    with pytest.raises(ValueError, match="pi/2"):
        sample_workspace(desc, material, angle_max=2.0)
