"""Quasi-static equilibrium of the segmented beam.

The beam is a serial chain of rigid segments coupled by 2-DOF rotational
joints (one at the base, one per section interface). State is q[j] =
(wx, wy), the rotation vector components of joint j in its parent frame;
rotation about the beam axis is excluded.

Equilibrium minimizes total potential energy

    E(q) = sum_j U_j(|q_j - rest_j|) - sum_t T_t * S_t(q) - F_tip . tip(q)

where U_j integrates the bilinear joint law (linear up to the wrinkling
plateau, then a small regularizing slope so the energy stays coercive) and
S_t is the total tendon shortening. Stoppers pin each tendon to the beam
wall at fixed stations, so segment-interior runs have constant length and
only the chord spanning each kinked joint contributes to S_t. That makes
the tendon energy separable per joint, which keeps gradients local.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .geom import exp_so3, left_jacobian
from .model import JointLaw, MaterialModel, RobotDescription, SectionState, \
    joint_laws_for_sections

ZHAT = np.array([0.0, 0.0, 1.0])


def tendon_direction(alpha):
    """Unit generalized-force direction of a tendon at station angle alpha in
    one joint's (wx, wy) space; multiply by the radial offset to get the
    small-angle moment per unit tension."""
    return np.array([-math.sin(alpha), math.cos(alpha)])


def joint_shortening(w, alpha, radial_offset, anchor_depth):
    """Tendon shortening across one kinked joint.

    The tendon leaves the parent-side anchor A = r*nhat at the interface and
    reaches the child-side anchor at r*nhat + d*zhat (child frame); the
    chord length is |R(w)(r nhat + d zhat) - r nhat| and the shortening is
    d minus that chord. Evaluated as

        s = 2 r (d sin(th) c - 2 r sin^2(th/2) |what x nhat|^2) / (d + chord)

    with c = nhat . (what x zhat), which is algebraically identical but does
    not difference two nearly equal lengths, so it stays accurate at small
    angles where the naive form loses all significant digits.
    """
    d = anchor_depth
    r = radial_offset
    th = math.hypot(w[0], w[1])
    if th < 1e-300:
        return 0.0
    nhat = np.array([math.cos(alpha), math.sin(alpha), 0.0])
    what = np.array([w[0], w[1], 0.0]) / th
    c = nhat[0] * what[1] - nhat[1] * what[0]  # nhat . (what x zhat)
    cr = np.cross(what, nhat)
    m2 = float(cr @ cr)
    num = 2.0 * r * (d * math.sin(th) * c - 2.0 * r * math.sin(0.5 * th) ** 2 * m2)
    u = exp_so3(np.array([w[0], w[1], 0.0])) @ (r * nhat + d * ZHAT)
    chord = np.linalg.norm(u - r * nhat)
    return num / (d + chord)


def moment_arm(theta, radial_offset, anchor_depth):
    """Moment arm of an aligned tendon about a joint bent by theta in the
    tendon's plane: perpendicular distance from the joint center to the
    chord between the flanking anchors."""
    r, d = radial_offset, anchor_depth
    e1 = r * (math.cos(theta) - 1.0) + d * math.sin(theta)
    e2 = d * math.cos(theta) - r * math.sin(theta)
    span = math.hypot(e1, e2)
    return r * e2 / span


def forward_kinematics(lengths, q):
    """World pose of each segment and the tip.

    Returns (poses, tip) where poses[j] = (origin, R) of segment j's frame;
    segment j extends from origin along R @ zhat for lengths[j].
    """
    q = np.asarray(q, float).reshape(len(lengths), 2)
    R = np.eye(3)
    o = np.zeros(3)
    poses = []
    for j, L in enumerate(lengths):
        R = R @ exp_so3(np.array([q[j, 0], q[j, 1], 0.0]))
        poses.append((o.copy(), R.copy()))
        o = o + R @ (L * ZHAT)
    return poses, o


def segment_tilt_angles(lengths, q):
    """Angle of each segment's axis from the base z axis, rad."""
    poses, _ = forward_kinematics(lengths, q)
    return np.array([math.acos(min(1.0, max(-1.0, R[2, 2]))) for _, R in poses])


@dataclass
class ChainModel:
    """Discrete-joint statics model of the exposed portion of the robot.

    regularization is the post-plateau slope as a fraction of the linear
    stiffness; it keeps the energy strictly convex past wrinkling onset so
    the minimizer has a unique target. 1e-4 leaves the plateau flat to within
    0.01 percent per radian and can be raised if a pathological script stalls
    the line search.
    """
    lengths: np.ndarray          # m, per segment
    laws: List[JointLaw]
    tendon_angles: Sequence[float]   # rad, station angle per tendon
    radial_offset: float             # m
    spacing: float                   # m, stopper pitch
    rest: np.ndarray = None          # (n,2) rad, rest rotation per joint
    regularization: float = 1e-4

    def __post_init__(self):
        self.lengths = np.asarray(self.lengths, float)
        if self.rest is None:
            self.rest = np.zeros((self.n, 2))
        else:
            self.rest = np.asarray(self.rest, float).reshape(self.n, 2)
        if len(self.laws) != self.n:
            raise ValueError("need one joint law per segment")
        # anchor depth: first stopper into the child segment
        self.anchor_depth = np.minimum(self.spacing, self.lengths)

    @property
    def n(self):
        return len(self.lengths)

    # --- joint energy / moment ---

    def _u_joint(self, phi, j):
        law = self.laws[j]
        k, mp = law.stiffness, law.plateau_moment
        ws = mp / k
        if phi <= ws:
            return 0.5 * k * phi * phi
        ex = phi - ws
        return 0.5 * k * ws * ws + mp * ex + 0.5 * self.regularization * k * ex * ex

    def _m_reg(self, phi, j):
        law = self.laws[j]
        k, mp = law.stiffness, law.plateau_moment
        ws = mp / k
        if phi <= ws:
            return k * phi
        return mp + self.regularization * k * (phi - ws)

    def joint_moment(self, phi, j):
        """Physical (unregularized) restoring moment at deviation phi."""
        law = self.laws[j]
        return min(law.stiffness * phi, law.plateau_moment)

    def regularized_moment(self, phi, j):
        return self._m_reg(phi, j)

    # --- tendon geometry ---

    def tendon_shortening(self, q, alpha):
        """Total shortening of a tendon at station angle alpha, m."""
        q = np.asarray(q, float).reshape(self.n, 2)
        return sum(joint_shortening(q[j], alpha, self.radial_offset,
                                    self.anchor_depth[j])
                   for j in range(self.n))

    def tendon_path_length(self, q, tendon_index_or_alpha):
        """Length of the tendon path from base to tip through its stoppers.

        Within a segment the stoppers hold the tendon parallel to the wall,
        so those runs keep their straight-configuration length; each joint
        crossing replaces an axial run of anchor_depth with the kinked
        chord. Straight configuration therefore gives exactly the everted
        length.
        """
        alpha = (self.tendon_angles[tendon_index_or_alpha]
                 if isinstance(tendon_index_or_alpha, (int, np.integer))
                 else float(tendon_index_or_alpha))
        return float(np.sum(self.lengths)) - self.tendon_shortening(q, alpha)

    # --- energy ---

    def energy_and_gradient(self, qflat, tensions, tip_force=None):
        q = np.asarray(qflat, float).reshape(self.n, 2)
        V = 0.0
        G = np.zeros((self.n, 2))
        for j in range(self.n):
            dev = q[j] - self.rest[j]
            phi = math.hypot(dev[0], dev[1])
            V += self._u_joint(phi, j)
            if phi > 1e-14:
                G[j] += self._m_reg(phi, j) * dev / phi
            else:
                G[j] += self.laws[j].stiffness * dev
            w3 = np.array([q[j, 0], q[j, 1], 0.0])
            R = exp_so3(w3)
            Jl = left_jacobian(w3)
            d = self.anchor_depth[j]
            for T, alpha in zip(tensions, self.tendon_angles):
                if T == 0.0:
                    continue
                nhat = np.array([math.cos(alpha), math.sin(alpha), 0.0])
                A = self.radial_offset * nhat
                u = R @ (A + d * ZHAT)
                diff = u - A
                nrm = np.linalg.norm(diff)
                V -= T * joint_shortening(q[j], alpha, self.radial_offset, d)
                unit = diff / nrm
                for kk in range(2):
                    # d(chord)/dw_k = unit . ((Jl e_k) x u); shortening flips sign
                    dsk = -unit @ np.cross(Jl[:, kk], u)
                    G[j, kk] -= T * dsk
        if tip_force is not None:
            poses, tip = forward_kinematics(self.lengths, q)
            V -= float(tip_force @ tip)
            Rparent = np.eye(3)
            for j in range(self.n):
                w3 = np.array([q[j, 0], q[j, 1], 0.0])
                Jl = left_jacobian(w3)
                origin = poses[j][0]
                for kk in range(2):
                    ax_world = Rparent @ Jl[:, kk]
                    G[j, kk] -= float(tip_force @ np.cross(ax_world, tip - origin))
                Rparent = Rparent @ exp_so3(w3)
        if not (math.isfinite(V) and np.all(np.isfinite(G))):
            bad = np.where(~np.isfinite(G).all(axis=1))[0]
            joint = int(bad[0]) if bad.size else 0
            raise FloatingPointError(
                "non-finite energy or gradient at joint %d" % joint)
        return V, G.ravel()


@dataclass
class TendonState:
    """Per-tendon control: mode "tension" (N) or "length" (m, absolute target
    path length). Exactly one control mode applies per tendon per solve."""
    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("tension", "length"):
            raise ValueError("tendon mode must be 'tension' or 'length'")
        if self.mode == "tension" and self.value < 0.0:
            raise ValueError("tension must be nonnegative")


@dataclass
class EquilibriumResult:
    q: np.ndarray                 # (n,2) rad, joint rotation vectors
    joint_deviation: np.ndarray   # rad, |q - rest| per joint
    joint_moments: np.ndarray     # N m, physical restoring moment per joint
    wrinkled: np.ndarray          # bool per joint: at or past plateau onset
    tensions: np.ndarray          # N per tendon, as applied
    tip_position: np.ndarray      # m, world
    energy: float                 # J
    converged: bool
    message: str
    grad_norm: float              # max abs energy gradient component, N m
    residual_norm: float          # grad_norm over the largest plateau moment
    iterations: int

    @property
    def joint_angles_deg(self):
        """Total rotation magnitude per joint (not deviation from rest), deg."""
        mags = np.hypot(self.q[:, 0], self.q[:, 1])
        return np.degrees(mags)

    def joint_moment_vectors(self, rest):
        """Restoring moment as a vector per joint, directed against the
        deviation from the given rest configuration."""
        dev = self.q - np.asarray(rest, float).reshape(-1, 2)
        mags = np.hypot(dev[:, 0], dev[:, 1])
        out = np.zeros_like(dev)
        nz = mags > 0.0
        out[nz] = -dev[nz] / mags[nz, None] * self.joint_moments[nz, None]
        return out


def solve_equilibrium(chain: ChainModel, tensions, tip_force=None, q0=None,
                      gtol=1e-10) -> EquilibriumResult:
    """Minimize the chain energy with analytic gradients.

    L-BFGS-B with the function-decrease test disabled (ftol=0): the energy
    is cheap and near the minimum its decrements sit at rounding level, so
    only the projected-gradient test is meaningful. Components are bounded
    to +-pi/2; a segment folded further than that is outside the model's
    validity anyway.
    """
    n2 = 2 * chain.n
    if q0 is None:
        q0 = np.zeros(n2)
    tensions = np.asarray(tensions, float)
    if len(tensions) != len(chain.tendon_angles):
        raise ValueError("one tension per tendon required")
    if np.any(tensions < 0.0):
        raise ValueError("tendon tensions must be nonnegative")
    if not np.any(tensions) and tip_force is None:
        # Unloaded chain: the energy is a sum of nonnegative per-joint wells,
        # minimized exactly at the rest configuration. Returning it directly
        # keeps settled states bit-exact instead of iteratively almost-zero.
        q = chain.rest.copy()
        _, tip = forward_kinematics(chain.lengths, q)
        plateaus = np.array([law.plateau_moment for law in chain.laws])
        return EquilibriumResult(
            q=q, joint_deviation=np.zeros(chain.n),
            joint_moments=np.zeros(chain.n),
            wrinkled=np.zeros(chain.n, dtype=bool), tensions=tensions.copy(),
            tip_position=tip, energy=0.0, converged=True,
            message="unloaded chain: exact rest equilibrium",
            grad_norm=0.0, residual_norm=0.0, iterations=0)
    res = minimize(
        lambda qq: chain.energy_and_gradient(qq, tensions, tip_force),
        np.asarray(q0, float).ravel(), jac=True, method="L-BFGS-B",
        bounds=[(-math.pi / 2, math.pi / 2)] * n2,
        options=dict(maxiter=10000, ftol=0.0, gtol=gtol, maxls=100))
    q = res.x.reshape(chain.n, 2)
    dev = np.hypot(*(q - chain.rest).T)
    moments = np.array([chain.joint_moment(dev[j], j) for j in range(chain.n)])
    plateaus = np.array([law.plateau_moment for law in chain.laws])
    wrinkled = moments >= plateaus * (1.0 - 1e-12)
    _, tip = forward_kinematics(chain.lengths, q)
    gnorm = float(np.max(np.abs(res.jac)))
    return EquilibriumResult(
        q=q, joint_deviation=dev, joint_moments=moments, wrinkled=wrinkled,
        tensions=tensions.copy(), tip_position=tip, energy=float(res.fun),
        converged=bool(res.success), message=str(res.message),
        grad_norm=gnorm, residual_norm=gnorm / float(np.max(plateaus)),
        iterations=int(res.nit))


def solve_tendon_displacement(chain: ChainModel, tendon_index, delta,
                              max_tension, q0=None, iters=50, gtol=1e-10,
                              base_tensions=None, tip_force=None):
    """Pull one tendon to a commanded shortening delta (m), holding the other
    tendons at base_tensions (default slack). Bisects the controlled
    tension, which is monotone in that tendon's shortening; returns
    (EquilibriumResult, tension, limited) where limited means the commanded
    shortening was not reachable within max_tension and the result sits at
    the limit.
    """
    if delta < 0.0:
        raise ValueError("commanded shortening must be nonnegative")
    alpha = chain.tendon_angles[tendon_index]
    if base_tensions is None:
        tens = np.zeros(len(chain.tendon_angles))
    else:
        tens = np.asarray(base_tensions, float).copy()

    def at(T, qq):
        tens[tendon_index] = T
        r = solve_equilibrium(chain, tens, tip_force=tip_force, q0=qq,
                              gtol=gtol)
        return r, chain.tendon_shortening(r.q, alpha)

    res, s_hi = at(max_tension, q0)
    if s_hi < delta:
        return res, max_tension, True
    lo, hi = 0.0, max_tension
    q = res.q.ravel()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        res, s = at(mid, q)
        q = res.q.ravel()
        if s < delta:
            lo = mid
        else:
            hi = mid
    return res, 0.5 * (lo + hi), False


def cantilever_tip_force(rigidity, onset_moment, length, deflection):
    """Transverse force at the free end of a cantilevered section deflected
    by `deflection`, as the virtual bench test measures it.

    Linear small-deflection response 3 EI delta / L^3 capped by the plateau
    force onset_moment / L (the root moment saturates first). Returns
    (force, beyond_small_deflection); the flag warns when deflection exceeds
    10 percent of the length and the linear formula grows optimistic.
    """
    if length <= 0.0:
        raise ValueError("length must be positive")
    f_lin = 3.0 * rigidity * deflection / length ** 3
    f_cap = onset_moment / length
    return min(f_lin, f_cap), deflection > 0.1 * length


@dataclass
class TipForceCurve:
    deflections: np.ndarray             # m
    forces: np.ndarray                  # N
    beyond_small_deflection: np.ndarray  # bool per point, validity warning


def cantilever_force_sweep(rigidity, onset_moment, length,
                           deflections) -> TipForceCurve:
    """Force-deflection curve of the virtual cantilever bench: linear rise,
    plateau at the onset moment, with a per-point warning flag once the
    deflection leaves small-deflection validity."""
    deflections = np.asarray(deflections, float)
    forces = np.empty_like(deflections)
    flags = np.zeros(deflections.shape, dtype=bool)
    for i, d in enumerate(deflections):
        forces[i], flags[i] = cantilever_tip_force(rigidity, onset_moment,
                                                   length, d)
    return TipForceCurve(deflections=deflections, forces=forces,
                         beyond_small_deflection=flags)


# --- virtual two-segment experiment -----------------------------------------

@dataclass
class TwoSegmentResult:
    forces: np.ndarray          # N, swept transverse tip loads
    distal_trace: np.ndarray    # rad, outer segment orientation per load step
    proximal_trace: np.ndarray  # rad, inner segment orientation per load step
    classification: str         # "pivot" | "single_unit" | "mixed"

    @property
    def peak_force(self):
        return float(self.forces[-1])

    @property
    def distal_tilt(self):
        return float(self.distal_trace[-1])

    @property
    def proximal_tilt(self):
        return float(self.proximal_trace[-1])


def virtual_two_segment_test(desc: RobotDescription,
                             material: MaterialModel,
                             proximal: SectionState,
                             distal: SectionState,
                             segment_length=0.25,
                             load_multiplier=2.0,
                             steps=25) -> TwoSegmentResult:
    """Push the tip of a two-section beam sideways and classify the bend.

    The transverse load ramps to load_multiplier times the smallest force
    that saturates either joint in the straight pose, stepping with warm
    starts and recording both segment orientations. Classification looks at
    the pose at peak load: if the distal segment has tilted at least five
    times the proximal one the pair acts as a pivot at the interface; if
    the two tilts agree within 10 percent the pair bends as one unit about
    the base.
    """
    laws = joint_laws_for_sections(material, desc, [proximal, distal])
    lengths = np.array([segment_length, segment_length])
    chain = ChainModel(lengths=lengths, laws=laws,
                       tendon_angles=desc.tendon_angles,
                       radial_offset=desc.tendon_radial_offset,
                       spacing=desc.stopper_spacing)
    levers = np.array([2.0 * segment_length, segment_length])
    f_peak = load_multiplier * min(laws[j].plateau_moment / levers[j]
                                   for j in range(2))
    forces = np.linspace(0.0, f_peak, steps)
    prox = np.zeros(steps)
    dist = np.zeros(steps)
    q0 = np.zeros(4)
    zero_t = np.zeros(len(desc.tendon_angles))
    for i, F in enumerate(forces):
        res = solve_equilibrium(chain, zero_t,
                                tip_force=np.array([F, 0.0, 0.0]), q0=q0)
        q0 = res.q.ravel()
        tilts = segment_tilt_angles(lengths, res.q)
        prox[i], dist[i] = tilts[0], tilts[1]
    if dist[-1] >= 5.0 * prox[-1]:
        cls = "pivot"
    elif abs(dist[-1] - prox[-1]) <= 0.1 * abs(prox[-1]):
        cls = "single_unit"
    else:
        cls = "mixed"
    return TwoSegmentResult(forces=forces, distal_trace=dist,
                            proximal_trace=prox, classification=cls)


def chain_for_states(desc: RobotDescription, material: MaterialModel,
                     states: List[SectionState], lengths=None,
                     rest=None) -> ChainModel:
    """ChainModel for the given per-section states; lengths defaults to the
    description's section lengths (pass explicitly for partial eversion)."""
    if lengths is None:
        lengths = np.asarray(desc.section_lengths[:len(states)], float)
    laws = joint_laws_for_sections(material, desc, states)
    return ChainModel(lengths=np.asarray(lengths, float), laws=laws,
                      tendon_angles=desc.tendon_angles,
                      radial_offset=desc.tendon_radial_offset,
                      spacing=desc.stopper_spacing, rest=rest)
