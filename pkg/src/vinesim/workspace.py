"""Reachable-tip-set sampling under the lock-in assumption.

A configuration counts as reachable when every joint can be driven to its
grid angle by a stiffen-bend-lock stage and then held there by jamming, so
the sampled set is pure kinematics over the per-joint angle grid. Base-only
mode sweeps just the base joint (the fixed-stiffness comparison); multi-joint
mode sweeps every joint independently, which is what patterned jamming buys.

Planar sampling (the default) keeps all bends in one vertical plane and is
evaluated with a vectorized cumulative-angle fold. Spatial sampling sweeps
the bend azimuth per joint in fixed steps and walks the full product grid,
optionally across worker processes.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .model import (MaterialModel, RobotDescription,
                    DEFAULT_INTERNAL_GAUGE_PA, joint_law)
from .statics import forward_kinematics

DEFAULT_BUDGET = 2_000_000


@dataclass
class WorkspaceResult:
    mode: str                   # "base-only" | "multi-joint"
    points: np.ndarray          # (m, 3) tip positions, m, sorted by row
    pattern_ids: np.ndarray     # (m,) grid enumeration index per point
    hull_measure: float         # convex hull area m^2 (planar) / volume m^3
    spatial: bool
    partial: bool               # grid truncated at the sampling budget
    total_grid: int             # full grid size before any truncation
    sensitivity: float          # tip m per N of stage tension error

    @property
    def count(self):
        return len(self.points)


def _angle_grid(angle_max, angle_step):
    if angle_max <= 0.0 or angle_step <= 0.0:
        raise ValueError("angle_max and angle_step must be positive")
    if angle_max > math.pi / 2:
        raise ValueError("angle_max exceeds the pi/2 joint box")
    k = int(math.floor(angle_max / angle_step + 1e-9))
    return np.arange(-k, k + 1, dtype=float) * angle_step


def tension_sensitivity(desc: RobotDescription, material: MaterialModel,
                        internal_gauge=DEFAULT_INTERNAL_GAUGE_PA):
    """First-order tip displacement per newton of tension error during a
    bend stage, summed over joints at the straight configuration: each
    joint's angle error is arm/k per newton and moves the tip by the lever
    to the tip."""
    law = joint_law(material, internal_gauge, 0.0, desc)
    lengths = np.asarray(desc.section_lengths, float)
    total = float(lengths.sum())
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    levers = total - starts
    return float(np.sum(levers * desc.tendon_radial_offset / law.stiffness))


def _decode_grid(ids, sizes):
    """Per-joint option indices for flat pattern ids, row-major (the last
    joint varies fastest)."""
    picks = np.empty((len(ids), len(sizes)), dtype=np.int64)
    rem = ids.copy()
    for j in range(len(sizes) - 1, -1, -1):
        picks[:, j] = rem % sizes[j]
        rem //= sizes[j]
    return picks


def _planar_tips(lengths, grids, azimuth, ids):
    """Tips for the planar angle grid rows selected by flat ids.

    The bend plane is the vertical plane at the given azimuth from +x; a
    common azimuth commutes through the chain, so the cumulative-angle fold
    stays exact.
    """
    picks = _decode_grid(ids, [len(g) for g in grids])
    thetas = np.empty(picks.shape)
    for j, g in enumerate(grids):
        thetas[:, j] = g[picks[:, j]]
    cum = np.cumsum(thetas, axis=1)
    u = np.sin(cum) @ lengths        # in-plane horizontal coordinate
    z = np.cos(cum) @ lengths
    return np.column_stack([u * math.cos(azimuth), u * math.sin(azimuth), z])


def _fk_chunk(args):
    lengths, qs = args
    pts = np.empty((len(qs), 3))
    for i, q in enumerate(qs):
        _, tip = forward_kinematics(lengths, q)
        pts[i] = tip
    return pts


def _hull_measure(points, spatial, azimuth=0.0):
    """Convex hull area of the planar section (spatial=False) or hull
    volume (spatial=True). Degenerate clouds measure zero."""
    from scipy.spatial import ConvexHull, QhullError
    if spatial:
        if len(points) < 4:
            return 0.0
        try:
            return float(ConvexHull(points).volume)
        except QhullError:
            return 0.0
    # planar: in-plane coordinates (u, z) in the bend plane
    u = points[:, 0] * math.cos(azimuth) + points[:, 1] * math.sin(azimuth)
    flat = np.column_stack([u, points[:, 2]])
    if len(flat) < 3:
        return 0.0
    try:
        return float(ConvexHull(flat).volume)   # 2D hull volume is area
    except QhullError:
        return 0.0


def sample_workspace(desc: RobotDescription, material: MaterialModel,
                     mode="multi-joint",
                     angle_max=math.radians(30.0),
                     angle_step=math.radians(5.0),
                     budget=DEFAULT_BUDGET,
                     spatial=False,
                     azimuth=0.0,
                     azimuth_step=math.radians(30.0),
                     internal_gauge=DEFAULT_INTERNAL_GAUGE_PA,
                     jobs=1) -> WorkspaceResult:
    """Sample the reachable tip set on a per-joint angle grid.

    mode "base-only" sweeps only the base joint with the rest held straight;
    "multi-joint" sweeps every joint. A budget smaller than the grid
    truncates the enumeration (in pattern-id order) and sets the partial
    flag. Points come back row-sorted so aggregation order never depends on
    how the work was split.
    """
    if mode not in ("base-only", "multi-joint"):
        raise ValueError("mode must be 'base-only' or 'multi-joint'")
    if budget is not None and budget < 1:
        raise ValueError("budget must be at least 1")
    n = desc.section_count
    lengths = np.asarray(desc.section_lengths, float)
    g = _angle_grid(angle_max, angle_step)

    if not spatial:
        grids = [g if (mode == "multi-joint" or j == 0)
                 else np.array([0.0]) for j in range(n)]
        total = math.prod(len(x) for x in grids)
        m = total if budget is None else min(total, budget)
        partial = m < total
        ids = np.arange(m, dtype=np.int64)
        pts = _planar_tips(lengths, grids, azimuth, ids)
    else:
        n_az = max(1, int(round(2 * math.pi / azimuth_step)))
        pos = g[g > 0.0]
        options = [(0.0, 0.0)]
        for th in pos:
            for k in range(n_az):
                ps = azimuth + k * azimuth_step
                options.append((-th * math.sin(ps), th * math.cos(ps)))
        per_joint = [options if (mode == "multi-joint" or j == 0)
                     else [(0.0, 0.0)] for j in range(n)]
        sizes = [len(o) for o in per_joint]
        total = math.prod(sizes)
        m = total if budget is None else min(total, budget)
        partial = m < total
        ids = np.arange(m, dtype=np.int64)
        picks = _decode_grid(ids, sizes)
        qs = np.empty((m, n, 2))
        for j in range(n):
            qs[:, j, :] = np.asarray(per_joint[j], float)[picks[:, j]]
        if jobs > 1 and m > 1:
            chunks = np.array_split(np.arange(m), jobs)
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                parts = list(ex.map(_fk_chunk,
                                    [(lengths, qs[c]) for c in chunks]))
            pts = np.vstack(parts)
        else:
            pts = _fk_chunk((lengths, qs))

    order = np.lexsort((ids, pts[:, 2], pts[:, 1], pts[:, 0]))
    pts, ids = pts[order], ids[order]
    return WorkspaceResult(
        mode=mode, points=pts, pattern_ids=ids,
        hull_measure=_hull_measure(pts, spatial, azimuth),
        spatial=spatial, partial=partial, total_grid=total,
        sensitivity=tension_sensitivity(desc, material, internal_gauge))


def expansion_ratio(desc: RobotDescription, material: MaterialModel,
                    **kwargs) -> Tuple[float, WorkspaceResult, WorkspaceResult]:
    """Hull-measure ratio of multi-joint over base-only sampling with
    identical grid settings. The base grid is a subset of the multi grid,
    so the ratio is at least 1."""
    multi = sample_workspace(desc, material, mode="multi-joint", **kwargs)
    base = sample_workspace(desc, material, mode="base-only", **kwargs)
    if base.hull_measure <= 0.0:
        raise ValueError("base-only hull is degenerate; refine the grid")
    return multi.hull_measure / base.hull_measure, multi, base


def save_points_csv(result: WorkspaceResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_mm", "y_mm", "z_mm", "pattern_id"])
        for p, i in zip(result.points, result.pattern_ids):
            w.writerow(["%.6f" % (p[0] * 1e3), "%.6f" % (p[1] * 1e3),
                        "%.6f" % (p[2] * 1e3), int(i)])
