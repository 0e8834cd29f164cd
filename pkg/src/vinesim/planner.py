"""Stiffen-bend-lock sequence planning.

Turns per-joint angle targets into a CommandScript: jam everything, unjam
the active joint's distal neighbor section, pull tendons sized from the
joint law and tendon geometry, wait, re-jam to lock, release, settle. Every
stage is verified by executing it on an internal simulation session; small
misses trigger Newton corrections of the stage tension.

Stages run distal to proximal: a proximal-first order would make later
pulls torque already-locked distal joints through longer moment arms.
"""

import json
import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .commands import (CommandScript, Grow, PullTendon, ReleaseTendon,
                       SetPouch, WaitEquilibrium)
from .model import (JointLaw, MaterialModel, RobotDescription, SectionState,
                    DEFAULT_INTERNAL_GAUGE_PA, effective_rigidity, joint_law,
                    skin_area_moment)
from .session import Session
from .statics import moment_arm
from .units import ATMOSPHERE_PA


class PlanningError(RuntimeError):
    pass


class AllocationError(ValueError):
    pass


@dataclass(frozen=True)
class TargetConfiguration:
    """Per-joint rotation targets (wx, wy) in rad with per-joint tolerances."""
    targets: np.ndarray
    tolerances: np.ndarray = None

    def __post_init__(self):
        t = np.asarray(self.targets, float).reshape(-1, 2)
        object.__setattr__(self, "targets", t)
        if self.tolerances is None:
            tol = np.full(len(t), math.radians(2.0))
        else:
            tol = np.asarray(self.tolerances, float).reshape(-1)
        object.__setattr__(self, "tolerances", tol)
        if len(tol) != len(t):
            raise ValueError("one tolerance per joint required")
        if np.any(tol <= 0.0):
            raise ValueError("tolerances must be positive")
        if np.any(np.hypot(t[:, 0], t[:, 1]) > math.pi / 2):
            raise ValueError("targets exceed the pi/2 box constraint")

    @property
    def n(self):
        return len(self.targets)


TARGET_SCHEMA_VERSION = 1


def target_to_dict(target: TargetConfiguration) -> dict:
    return {
        "schema_version": TARGET_SCHEMA_VERSION,
        "targets_deg": [[math.degrees(a), math.degrees(b)]
                        for a, b in target.targets],
        "tolerances_deg": [math.degrees(t) for t in target.tolerances],
        "_si": {
            "targets": [[float(a).hex(), float(b).hex()]
                        for a, b in target.targets],
            "tolerances": [float(t).hex() for t in target.tolerances],
        },
    }


def target_from_dict(d: dict) -> TargetConfiguration:
    ver = d.get("schema_version", TARGET_SCHEMA_VERSION)
    if ver != TARGET_SCHEMA_VERSION:
        raise ValueError("unknown target schema_version %r" % ver)
    si = d.get("_si")
    if si is not None:
        targets = np.array([[float.fromhex(a), float.fromhex(b)]
                            for a, b in si["targets"]])
        tol = np.array([float.fromhex(t) for t in si["tolerances"]])
    else:
        targets = np.radians(np.asarray(d["targets_deg"], float))
        tol = np.radians(np.asarray(d["tolerances_deg"], float)) \
            if "tolerances_deg" in d else None
    return TargetConfiguration(targets=targets, tolerances=tol)


def load_targets(path) -> TargetConfiguration:
    with open(path) as fh:
        return target_from_dict(json.load(fh))


def save_targets(target: TargetConfiguration, path):
    with open(path, "w") as fh:
        json.dump(target_to_dict(target), fh, indent=2)
        fh.write("\n")


def _unit(alpha):
    return np.array([-math.sin(alpha), math.cos(alpha)])


def allocate_tensions(desc: RobotDescription, phi, magnitude) -> np.ndarray:
    """Nonnegative tendon tensions producing a joint moment of the given
    magnitude in bend-plane direction phi, minimizing total tension.

    Uses the small-angle moment map: tendon t at station alpha_t contributes
    T * r_t * (-sin alpha_t, cos alpha_t). Singles and tendon pairs are
    enumerated; with three tendons at 120 degrees at most two are nonzero
    and any direction is feasible.
    """
    if magnitude < 0.0:
        raise AllocationError("moment magnitude must be nonnegative")
    angles = desc.tendon_angles
    nt = len(angles)
    if nt < 2:
        raise AllocationError("tension allocation needs at least 2 tendons")
    r_t = desc.tendon_radial_offset
    target = magnitude * _unit(phi)
    out = np.zeros(nt)
    if magnitude == 0.0:
        return out
    units = [_unit(a) for a in angles]
    best = None
    best_vec = None
    # singles
    for i, u in enumerate(units):
        cross = u[0] * target[1] - u[1] * target[0]
        dot = float(u @ target)
        if abs(cross) <= 1e-12 * magnitude and dot > 0.0:
            T = magnitude / r_t
            if best is None or T < best * (1.0 - 1e-12):
                best = T
                vec = np.zeros(nt)
                vec[i] = T
                best_vec = vec
    # pairs
    for i in range(nt):
        for j in range(i + 1, nt):
            ui, uj = units[i], units[j]
            det = ui[0] * uj[1] - ui[1] * uj[0]
            if abs(det) < 1e-12:
                continue
            Ti = (target[0] * uj[1] - target[1] * uj[0]) / (det * r_t)
            Tj = (ui[0] * target[1] - ui[1] * target[0]) / (det * r_t)
            if Ti < -1e-12 or Tj < -1e-12:
                continue
            Ti = Ti if Ti > 0.0 else 0.0
            Tj = Tj if Tj > 0.0 else 0.0
            s = Ti + Tj
            if best is None or s < best * (1.0 - 1e-12):
                best = s
                vec = np.zeros(nt)
                vec[i], vec[j] = Ti, Tj
                best_vec = vec
    if best_vec is None:
        raise AllocationError(
            "no nonnegative tension allocation reaches direction "
            "%.4f rad with this tendon layout (degenerate stations?)" % phi)
    return best_vec


@dataclass(frozen=True)
class InverseMoment:
    moment: float           # N m, regularized law inverted at the target
    plateau_crossed: bool   # True: answer includes the epsilon-slope branch


def inverse_single_joint(law: JointLaw, angle, regularization=1e-4) -> InverseMoment:
    """Moment that holds one joint at the given deviation angle under the
    regularized bilinear law. Past the wrinkle angle the physical law is
    flat, so the inverse follows the epsilon slope and is flagged as reduced
    accuracy."""
    if angle < 0.0:
        raise ValueError("angle must be nonnegative")
    if angle > math.pi / 2:
        raise ValueError("angle %.3f rad is beyond the pi/2 box constraint"
                         % angle)
    ws = law.wrinkle_angle
    if angle <= ws:
        return InverseMoment(moment=law.stiffness * angle,
                             plateau_crossed=False)
    return InverseMoment(
        moment=law.plateau_moment
        + regularization * law.stiffness * (angle - ws),
        plateau_crossed=True)


@dataclass
class StageReport:
    joint: int
    target_deg: float
    achieved_deg: float
    tensions: np.ndarray        # N per tendon
    retries: int
    max_drift_deg: float        # peak transient excursion of locked joints

    def as_text(self):
        pulled = ", ".join("t%d=%.1fN" % (i, T)
                           for i, T in enumerate(self.tensions) if T > 0.0)
        return ("stage joint %d: target %.2f deg, achieved %.2f deg, "
                "%s, retries %d, transient disturbance %.3f deg"
                % (self.joint, self.target_deg, self.achieved_deg,
                   pulled or "no pull", self.retries, self.max_drift_deg))


@dataclass
class PlanResult:
    script: CommandScript
    stages: List[StageReport]
    achieved: np.ndarray        # (n,2) rad, final simulated configuration
    max_drift_deg: float        # peak transient over all stages; settled
    final_state_hash: str       # drift beyond tolerance raises instead

    def report_text(self):
        lines = [s.as_text() for s in self.stages]
        lines.append("peak transient disturbance %.3f deg"
                     % self.max_drift_deg)
        return "\n".join(lines)


def _arm(theta, desc, segment_length):
    d = min(desc.stopper_spacing, segment_length)
    return moment_arm(theta, desc.tendon_radial_offset, d)


def _darm(theta, desc, segment_length, h=1e-7):
    return (_arm(theta + h, desc, segment_length)
            - _arm(theta - h, desc, segment_length)) / (2.0 * h)


def _stage_tension(law, theta, desc, segment_length, regularization):
    inv = inverse_single_joint(law, theta, regularization)
    arm = _arm(theta, desc, segment_length)
    if arm <= 0.0:
        return None, inv
    return inv.moment / arm, inv


def _emit_jam_state(session, script_cmds, pouch_targets, last=None):
    """SetPouch commands driving every section to pouch_targets. Commands
    are emitted unconditionally (SetPouch is idempotent) so the script
    states the full jam pattern explicitly; `last` reorders that section's
    command to the end, which puts the stage's unjam after the jams."""
    order = [s for s in range(len(pouch_targets)) if s != last]
    if last is not None:
        order.append(last)
    for s in order:
        cmd = SetPouch(section=s, pressure=pouch_targets[s])
        script_cmds.append(cmd)
        rec = session.execute(cmd)
        if not rec["ok"]:
            raise PlanningError("internal: SetPouch(%d) rejected: %s"
                                % (s, rec["reason"]))


def _run(session, script_cmds, cmd):
    script_cmds.append(cmd)
    rec = session.execute(cmd)
    if not rec["ok"]:
        raise PlanningError("internal: %s rejected: %s"
                            % (rec["command"]["op"], rec["reason"]))
    return rec


def plan_stiffen_bend_lock(desc: RobotDescription, material: MaterialModel,
                           target: TargetConfiguration,
                           internal_gauge=DEFAULT_INTERNAL_GAUGE_PA,
                           n_retry=5, drift_tolerance=None,
                           include_growth=True,
                           regularization=1e-4) -> PlanResult:
    """Sequence the stiffen-bend-lock stages for every nonzero target joint,
    distal to proximal, verifying each stage on a simulated session.

    "Maximum jamming" is a pouch at 0 absolute (vacuum-equivalent dP), the
    conservative end of the achievable range. The emitted script starts
    with a Grow to full length when include_growth is set (the default), so
    it can run on a fresh session; pass False when the executing session is
    already grown.
    """
    n = desc.section_count
    if target.n != n:
        raise PlanningError("target has %d joints, robot has %d sections"
                            % (target.n, n))
    if drift_tolerance is None:
        drift_tol = target.tolerances.copy()
    else:
        drift_tol = np.broadcast_to(np.asarray(drift_tolerance, float),
                                    (n,)).copy()
    mags = np.hypot(target.targets[:, 0], target.targets[:, 1])
    active = [j for j in range(n) if mags[j] > 0.0]
    if not active:
        return PlanResult(script=CommandScript(()), stages=[],
                          achieved=np.zeros((n, 2)), max_drift_deg=0.0,
                          final_state_hash=Session(
                              desc, material, internal_gauge).state_hash())
    active.sort(reverse=True)   # distal -> proximal

    session = Session(desc, material, internal_gauge)
    internal_abs = session.internal_abs
    cmds: List = []
    grow = Grow(length=desc.total_length)
    if include_growth:
        _run(session, cmds, grow)
    else:
        rec = session.execute(grow)
        if not rec["ok"]:
            raise PlanningError("internal: growth rejected: %s" % rec["reason"])

    soft_law = joint_law(material, internal_gauge, 0.0, desc)
    stages: List[StageReport] = []
    overall_drift = 0.0

    for j in active:
        theta_star = float(mags[j])
        tau = target.targets[j]
        phi = math.atan2(-tau[0], tau[1])   # bend-plane azimuth of the target
        seg_len = desc.section_lengths[j]

        T_aligned, inv = _stage_tension(soft_law, theta_star, desc, seg_len,
                                        regularization)
        if T_aligned is None:
            raise PlanningError(
                "joint %d: target %.1f deg puts the tendon chord past the "
                "joint center; no pulling moment exists there"
                % (j, math.degrees(theta_star)))
        alloc = allocate_tensions(desc, phi, inv.moment)
        scale0 = T_aligned / (inv.moment / desc.tendon_radial_offset)
        tensions = alloc * scale0
        if float(np.max(tensions)) > desc.tendon_tension_limit:
            raise PlanningError(
                "joint %d: required tension %.1f N exceeds the %.0f N limit"
                % (j, float(np.max(tensions)), desc.tendon_tension_limit))

        # stiffen everything, then soften the governing (distal) section
        pouch_targets = [0.0] * n
        pouch_targets[j] = internal_abs
        _emit_jam_state(session, cmds, pouch_targets, last=j)
        lock_values = session.rest.copy()

        pulled = [t for t in range(len(tensions)) if tensions[t] > 0.0]
        for t in pulled:
            _run(session, cmds, PullTendon(tendon=t,
                                           tension=float(tensions[t])))
        _run(session, cmds, WaitEquilibrium())

        retries = 0
        transient_drift = 0.0
        scale = 1.0
        while True:
            dev = session.q[j] - tau
            err = math.hypot(dev[0], dev[1])
            for i in range(n):
                if i == j:
                    continue
                drift = session.q[i] - lock_values[i]
                transient_drift = max(transient_drift,
                                      math.hypot(drift[0], drift[1]))
            if err <= target.tolerances[j]:
                break
            if retries >= n_retry:
                raise PlanningError(
                    "joint %d: %.3f deg from target after %d tension "
                    "corrections" % (j, math.degrees(err), n_retry))
            # Newton on the aligned single-joint model:
            # M_reg(theta) = s * T0 * arm(theta)
            theta_hat = float(math.hypot(*session.q[j]))
            ws = soft_law.wrinkle_angle
            mreg_slope = soft_law.stiffness if theta_hat <= ws \
                else regularization * soft_law.stiffness
            arm = _arm(theta_hat, desc, seg_len)
            darm = _darm(theta_hat, desc, seg_len)
            denom = mreg_slope - scale * T_aligned * darm
            dtheta_ds = T_aligned * arm / denom if denom != 0.0 else None
            if not dtheta_ds or not math.isfinite(dtheta_ds):
                raise PlanningError(
                    "joint %d: degenerate Newton step at %.3f deg"
                    % (j, math.degrees(theta_hat)))
            scale += (theta_star - theta_hat) / dtheta_ds
            if scale <= 0.0:
                raise PlanningError(
                    "joint %d: tension correction went nonpositive" % j)
            new_tensions = alloc * scale0 * scale
            if float(np.max(new_tensions)) > desc.tendon_tension_limit:
                raise PlanningError(
                    "joint %d: corrected tension %.1f N exceeds the %.0f N "
                    "limit" % (j, float(np.max(new_tensions)),
                               desc.tendon_tension_limit))
            tensions = new_tensions
            for t in pulled:
                _run(session, cmds, PullTendon(tendon=t,
                                               tension=float(tensions[t])))
            _run(session, cmds, WaitEquilibrium())
            retries += 1

        # lock the active joint, release the pull, settle
        _run(session, cmds, SetPouch(section=j, pressure=0.0))
        for t in pulled:
            _run(session, cmds, ReleaseTendon(tendon=t))
        _run(session, cmds, WaitEquilibrium())

        # settled drift is the lock-integrity quantity; the transient
        # excursion during the pull is reported but only the settled value
        # is held to the drift tolerance
        drift_bad = []
        for i in range(n):
            if i == j:
                continue
            settled = math.hypot(*(session.q[i] - lock_values[i]))
            if settled > drift_tol[i]:
                drift_bad.append((i, math.degrees(settled)))
        if drift_bad:
            report = ", ".join("joint %d by %.3f deg" % b for b in drift_bad)
            raise PlanningError(
                "stage for joint %d moved locked joints: %s" % (j, report))
        overall_drift = max(overall_drift, transient_drift)
        stages.append(StageReport(
            joint=j, target_deg=math.degrees(theta_star),
            achieved_deg=float(np.degrees(math.hypot(*session.q[j]))),
            tensions=tensions.copy(), retries=retries,
            max_drift_deg=math.degrees(transient_drift)))

    # final check against every active target
    for j in active:
        err = math.hypot(*(session.q[j] - target.targets[j]))
        if err > target.tolerances[j]:
            raise PlanningError(
                "joint %d finished %.3f deg off target"
                % (j, math.degrees(err)))

    return PlanResult(script=CommandScript(tuple(cmds)), stages=stages,
                      achieved=session.q.copy(),
                      max_drift_deg=math.degrees(overall_drift),
                      final_state_hash=session.state_hash())


def jam_pressures_for_ratio(material: MaterialModel, desc: RobotDescription,
                            internal_gauge, stiffness_scale):
    """Pouch absolute pressure giving a joint stiffness of stiffness_scale
    times the unjammed stiffness (>= 1), inverting the saturating skin law.
    Returns 0.0 (full jam) when the requested stiffness is at or beyond the
    saturated value."""
    if stiffness_scale < 1.0:
        raise ValueError("stiffness_scale must be >= 1")
    internal_abs = internal_gauge + ATMOSPHERE_PA
    ei_unj = effective_rigidity(material, internal_gauge, 0.0, desc)
    ei_needed = stiffness_scale * ei_unj
    I = skin_area_moment(desc, material)
    ei_u = material.E_unjammed * I
    ei_sat = material.skin_gain * material.E_jammed_ref * I
    tube = material.pressure_rigidity_offset \
        + material.pressure_rigidity_slope * internal_gauge
    g = (ei_needed - tube - ei_u) / (ei_sat - ei_u)
    if g <= 0.0:
        return internal_abs
    g_max = 1.0 - math.exp(-internal_abs / material.deltaP_sat)
    if g >= g_max:
        return 0.0
    dp = -material.deltaP_sat * math.log1p(-g)
    return internal_abs - dp


def plan_simultaneous(desc: RobotDescription, material: MaterialModel,
                      target: TargetConfiguration,
                      internal_gauge=DEFAULT_INTERNAL_GAUGE_PA,
                      include_growth=True,
                      regularization=1e-4) -> PlanResult:
    """One-shot multi-joint bend: grade the section pressures so joint
    stiffnesses are inversely proportional to the target angles, pull once,
    re-jam everything. Best effort; the returned report carries simulated
    achieved angles, and unlike the staged planner, misses are reported, not
    raised."""
    n = desc.section_count
    if target.n != n:
        raise PlanningError("target has %d joints, robot has %d sections"
                            % (target.n, n))
    mags = np.hypot(target.targets[:, 0], target.targets[:, 1])
    active = [j for j in range(n) if mags[j] > 0.0]
    if not active:
        return plan_stiffen_bend_lock(desc, material, target, internal_gauge,
                                      include_growth=include_growth)
    phis = [math.atan2(-target.targets[j][0], target.targets[j][1])
            for j in active]
    for p in phis[1:]:
        d = abs(p - phis[0]) % (2 * math.pi)
        if min(d, 2 * math.pi - d) > 1e-9:
            raise PlanningError(
                "simultaneous mode shares one tendon pull; targets must lie "
                "in a common bend plane")
    phi = phis[0]
    j_max = max(active, key=lambda j: mags[j])
    theta_max = float(mags[j_max])

    session = Session(desc, material, internal_gauge)
    cmds: List = []
    grow = Grow(length=desc.total_length)
    if include_growth:
        _run(session, cmds, grow)
    else:
        rec = session.execute(grow)
        if not rec["ok"]:
            raise PlanningError("internal: growth rejected: %s" % rec["reason"])

    pouch_targets = []
    for s in range(n):
        if s in active:
            pouch_targets.append(jam_pressures_for_ratio(
                material, desc, internal_gauge, theta_max / mags[s]))
        else:
            pouch_targets.append(0.0)
    _emit_jam_state(session, cmds, pouch_targets)

    soft_law = joint_law(material, internal_gauge, 0.0, desc)
    seg_len = desc.section_lengths[j_max]
    T_aligned, inv = _stage_tension(soft_law, theta_max, desc, seg_len,
                                    regularization)
    if T_aligned is None:
        raise PlanningError("joint %d: no pulling moment at %.1f deg"
                            % (j_max, math.degrees(theta_max)))
    alloc = allocate_tensions(desc, phi, inv.moment)
    tensions = alloc * (T_aligned / (inv.moment / desc.tendon_radial_offset))
    if float(np.max(tensions)) > desc.tendon_tension_limit:
        raise PlanningError("required tension %.1f N exceeds the %.0f N limit"
                            % (float(np.max(tensions)),
                               desc.tendon_tension_limit))
    pulled = [t for t in range(len(tensions)) if tensions[t] > 0.0]
    for t in pulled:
        _run(session, cmds, PullTendon(tendon=t, tension=float(tensions[t])))
    _run(session, cmds, WaitEquilibrium())

    stages = [StageReport(
        joint=j, target_deg=math.degrees(float(mags[j])),
        achieved_deg=float(np.degrees(math.hypot(*session.q[j]))),
        tensions=tensions.copy(), retries=0, max_drift_deg=0.0)
        for j in sorted(active, reverse=True)]

    for s in active:
        _run(session, cmds, SetPouch(section=s, pressure=0.0))
    for t in pulled:
        _run(session, cmds, ReleaseTendon(tendon=t))
    _run(session, cmds, WaitEquilibrium())

    return PlanResult(script=CommandScript(tuple(cmds)), stages=stages,
                      achieved=session.q.copy(), max_drift_deg=0.0,
                      final_state_hash=session.state_hash())
