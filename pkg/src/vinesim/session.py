"""Stateful robot session: growth state machine, command validation and
execution, scenario IO, structured logging.

State semantics:
  * everted_length is the material pushed out so far; sections become
    controllable (pouch state, joints) only once fully everted. A partial
    section is unjammed fabric rigidly attached to the tip, so it extends
    the last exposed segment without adding a joint.
  * joint j is governed by section j (its distal neighbor): unjamming a
    section softens the joint at its proximal end, and the jammed stack
    distal of an interface is what keeps a locked bend in place.
  * jamming a section (dP leaving zero) freezes that joint's rest rotation
    at the current configuration; unjamming resets the rest to zero.

Every command is atomic: a rejected command appends a log record with a
machine-readable reason and leaves the state bit-identical. Log timestamps
are the event sequence number, not wall-clock time, so repeated runs of the
same script produce byte-identical logs; pass wall_clock=True to add a real
timestamp field for operational use.
"""

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .commands import (Command, CommandScript, Grow, PullTendon,
                       ReleaseTendon, Retract, SetPouch, WaitEquilibrium,
                       command_from_dict, command_to_dict)
from .model import (MaterialModel, RobotDescription, SectionState,
                    DEFAULT_INTERNAL_GAUGE_PA, description_from_dict,
                    description_to_dict, material_from_dict, material_to_dict)
from .statics import (TendonState, chain_for_states, solve_equilibrium,
                      solve_tendon_displacement)
from .units import ATMOSPHERE_PA

LOG_SCHEMA_VERSION = 1
SCENARIO_SCHEMA_VERSION = 1

# rejection reason codes
REASON_NEGATIVE_LENGTH = "negative_length"
REASON_GROW_BEYOND_TOTAL = "grow_beyond_total"
REASON_GROW_REQUIRES_UNJAMMED = "grow_requires_unjammed"
REASON_RETRACT_BEYOND_BASE = "retract_beyond_base"
REASON_RETRACT_REQUIRES_UNJAMMED = "retract_requires_unjammed"
REASON_RETRACT_REQUIRES_STRAIGHT = "retract_requires_straight"
REASON_SECTION_NOT_EXPOSED = "section_not_exposed"
REASON_TENDON_OUT_OF_RANGE = "tendon_out_of_range"
REASON_INVALID_VALUE = "invalid_value"
REASON_UNKNOWN_COMMAND = "unknown_command"

_EXPOSURE_EPS = 1e-12   # m
_STRAIGHT_TOL = 1e-6    # rad, "all joint angles zero" for retraction


class ScenarioError(ValueError):
    pass


class ReplayError(RuntimeError):
    pass


@dataclass
class Scenario:
    description: RobotDescription
    material: MaterialModel
    internal_gauge: float = DEFAULT_INTERNAL_GAUGE_PA   # Pa above atmosphere
    script: CommandScript = field(default_factory=lambda: CommandScript(()))

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCENARIO_SCHEMA_VERSION,
            "internal_kpa": self.internal_gauge / 1e3,
            "_si": {"internal_gauge": float(self.internal_gauge).hex()},
            "description": description_to_dict(self.description),
            "material": material_to_dict(self.material),
        }
        if len(self.script):
            d["script"] = self.script.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        ver = d.get("schema_version", SCENARIO_SCHEMA_VERSION)
        if ver != SCENARIO_SCHEMA_VERSION:
            raise ScenarioError("unknown scenario schema_version %r" % ver)

        def parse(fieldname, fn, default):
            if fieldname not in d:
                return default()
            try:
                return fn(d[fieldname])
            except ScenarioError:
                raise
            except Exception as e:
                raise ScenarioError("field %r: %s" % (fieldname, e))

        si = d.get("_si", {})
        if "internal_gauge" in si:
            internal = float.fromhex(si["internal_gauge"])
        else:
            internal = parse("internal_kpa", lambda v: float(v) * 1e3,
                             lambda: DEFAULT_INTERNAL_GAUGE_PA)
        return cls(
            description=parse("description", description_from_dict,
                              RobotDescription),
            material=parse("material", material_from_dict, MaterialModel),
            internal_gauge=internal,
            script=parse("script", CommandScript.from_dict,
                         lambda: CommandScript(())),
        )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError("line %d column %d: %s"
                            % (e.lineno, e.colno, e.msg))
    if not isinstance(d, dict):
        raise ScenarioError("scenario root must be a JSON object")
    return Scenario.from_dict(d)


def save_scenario(scn: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scn.to_dict(), fh, indent=2)
        fh.write("\n")


def _hexf(v):
    return float(v).hex()


class Session:
    """One robot, one command queue. Commands apply strictly in order."""

    def __init__(self, description: RobotDescription = None,
                 material: MaterialModel = None,
                 internal_gauge=DEFAULT_INTERNAL_GAUGE_PA,
                 pouch_margin=0.0, gtol=1e-10, wall_clock=False):
        self.desc = description if description is not None else RobotDescription()
        self.material = material if material is not None else MaterialModel()
        if internal_gauge <= 0.0:
            raise ValueError("internal gauge pressure must be positive")
        self.internal_gauge = float(internal_gauge)
        self.internal_abs = float(internal_gauge) + ATMOSPHERE_PA
        self.pouch_margin = float(pouch_margin)
        self.gtol = float(gtol)
        self.wall_clock = bool(wall_clock)

        self.everted = 0.0
        self.pouches: List[float] = []      # Pa absolute, exposed sections
        self.tendons = [TendonState("tension", 0.0)
                        for _ in self.desc.tendon_angles]
        self.q = np.zeros((0, 2))
        self.rest = np.zeros((0, 2))
        self.last_equilibrium = None
        self.log: List[dict] = []
        self.seq = 0
        # seq 0 is the initial state, so even an empty script leaves a
        # log that pins down where the session started
        init = {
            "schema_version": LOG_SCHEMA_VERSION,
            "seq": self.seq,
            "t": self.seq,
            "command": None,
            "ok": True,
            "reason": None,
            "state_hash": self.state_hash(),
        }
        if self.wall_clock:
            init["wall_time"] = time.time()
        self.log.append(init)
        self.seq += 1

    @classmethod
    def from_scenario(cls, scn: Scenario, **kw) -> "Session":
        return cls(description=scn.description, material=scn.material,
                   internal_gauge=scn.internal_gauge, **kw)

    # --- derived geometry ---

    @property
    def exposed_count(self):
        total = 0.0
        n = 0
        for L in self.desc.section_lengths:
            total += L
            if total <= self.everted + _EXPOSURE_EPS:
                n += 1
            else:
                break
        return n

    def segment_lengths(self):
        """Effective rigid-segment lengths: exposed sections, with any
        partially everted remainder appended to the last one."""
        k = self.exposed_count
        lengths = list(self.desc.section_lengths[:k])
        remainder = self.everted - sum(lengths)
        if remainder > _EXPOSURE_EPS and k > 0:
            lengths[-1] += remainder
        return np.asarray(lengths, float)

    def section_states(self):
        return [SectionState(pouch_pressure=p, internal_pressure=self.internal_abs)
                for p in self.pouches]

    def _chain(self):
        return chain_for_states(self.desc, self.material,
                                self.section_states(),
                                lengths=self.segment_lengths(),
                                rest=self.rest.copy())

    def _jammed_sections(self):
        return [i for i, p in enumerate(self.pouches)
                if self.internal_abs - p > 0.0]

    # --- state hash ---

    def state_dict(self):
        """Canonical fundamental state. Floats as hex so the hash is exact."""
        return {
            "everted": _hexf(self.everted),
            "internal": _hexf(self.internal_abs),
            "pouches": [_hexf(p) for p in self.pouches],
            "tendons": [[t.mode, _hexf(t.value)] for t in self.tendons],
            "q": [[_hexf(a), _hexf(b)] for a, b in self.q],
            "rest": [[_hexf(a), _hexf(b)] for a, b in self.rest],
        }

    def state_hash(self):
        blob = json.dumps(self.state_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # --- command execution ---

    def execute(self, cmd: Command) -> dict:
        ok, reason, detail = self._apply(cmd)
        record = {
            "schema_version": LOG_SCHEMA_VERSION,
            "seq": self.seq,
            "t": self.seq,
            "command": command_to_dict(cmd),
            "ok": ok,
            "reason": reason,
            "state_hash": self.state_hash(),
        }
        if detail:
            record["detail"] = detail
        if self.wall_clock:
            record["wall_time"] = time.time()
        self.log.append(record)
        self.seq += 1
        return record

    def run_script(self, script: CommandScript) -> List[dict]:
        return [self.execute(c) for c in script]

    def _apply(self, cmd) -> Tuple[bool, Optional[str], Optional[dict]]:
        if isinstance(cmd, Grow):
            return self._grow(cmd)
        if isinstance(cmd, Retract):
            return self._retract(cmd)
        if isinstance(cmd, SetPouch):
            return self._set_pouch(cmd)
        if isinstance(cmd, PullTendon):
            return self._pull(cmd)
        if isinstance(cmd, ReleaseTendon):
            return self._release(cmd)
        if isinstance(cmd, WaitEquilibrium):
            return self._wait()
        return False, REASON_UNKNOWN_COMMAND, {"type": type(cmd).__name__}

    def _grow(self, cmd: Grow):
        if not math.isfinite(cmd.length) or cmd.length < 0.0:
            return False, REASON_NEGATIVE_LENGTH, None
        if self.everted + cmd.length > self.desc.total_length + _EXPOSURE_EPS:
            return False, REASON_GROW_BEYOND_TOTAL, {
                "requested_mm": (self.everted + cmd.length) * 1e3,
                "total_mm": self.desc.total_length * 1e3}
        jammed = self._jammed_sections()
        if jammed:
            return False, REASON_GROW_REQUIRES_UNJAMMED, {"sections": jammed}
        old_n = self.exposed_count
        self.everted += cmd.length
        self._resize_joints(old_n)
        self.last_equilibrium = None
        return True, None, None

    def _retract(self, cmd: Retract):
        if not math.isfinite(cmd.length) or cmd.length < 0.0:
            return False, REASON_NEGATIVE_LENGTH, None
        if cmd.length > self.everted + _EXPOSURE_EPS:
            return False, REASON_RETRACT_BEYOND_BASE, {
                "everted_mm": self.everted * 1e3}
        jammed = self._jammed_sections()
        if jammed:
            return False, REASON_RETRACT_REQUIRES_UNJAMMED, {"sections": jammed}
        if self.q.size and float(np.max(np.abs(self.q))) > _STRAIGHT_TOL:
            return False, REASON_RETRACT_REQUIRES_STRAIGHT, {
                "max_angle_deg": math.degrees(float(np.max(np.abs(self.q))))}
        self.everted = max(0.0, self.everted - cmd.length)
        self._resize_joints(len(self.pouches))
        self.last_equilibrium = None
        return True, None, None

    def _resize_joints(self, old_n):
        n = self.exposed_count
        if n > old_n:
            pad = n - old_n
            self.pouches.extend([self.internal_abs] * pad)
            self.q = np.vstack([self.q, np.zeros((pad, 2))])
            self.rest = np.vstack([self.rest, np.zeros((pad, 2))])
        elif n < old_n:
            del self.pouches[n:]
            self.q = self.q[:n].copy()
            self.rest = self.rest[:n].copy()

    def _set_pouch(self, cmd: SetPouch):
        s = cmd.section
        if not isinstance(s, (int, np.integer)) or s < 0 or s >= self.exposed_count:
            return False, REASON_SECTION_NOT_EXPOSED, {
                "section": s, "exposed": self.exposed_count}
        if not math.isfinite(cmd.pressure):
            return False, REASON_INVALID_VALUE, None
        p = min(max(0.0, cmd.pressure), self.internal_abs + self.pouch_margin)
        old_dp = max(0.0, self.internal_abs - self.pouches[s])
        new_dp = max(0.0, self.internal_abs - p)
        if old_dp == 0.0 and new_dp > 0.0:
            self.rest[s] = self.q[s]       # lock the governed joint here
        elif old_dp > 0.0 and new_dp == 0.0:
            self.rest[s] = 0.0
        self.pouches[s] = p
        detail = None
        if p != cmd.pressure:
            detail = {"clamped_to_kpa": p / 1e3}
        return True, None, detail

    def _pull(self, cmd: PullTendon):
        t = cmd.tendon
        if not isinstance(t, (int, np.integer)) or t < 0 or \
                t >= len(self.tendons):
            return False, REASON_TENDON_OUT_OF_RANGE, {"tendon": t}
        if cmd.tension is not None:
            if not math.isfinite(cmd.tension) or cmd.tension < 0.0:
                return False, REASON_INVALID_VALUE, None
            if cmd.tension > self.desc.tendon_tension_limit:
                return False, REASON_INVALID_VALUE, {
                    "tension_limit_n": self.desc.tendon_tension_limit}
            self.tendons[t] = TendonState("tension", float(cmd.tension))
        else:
            if not math.isfinite(cmd.target_length) or cmd.target_length < 0.0:
                return False, REASON_INVALID_VALUE, None
            self.tendons[t] = TendonState("length", float(cmd.target_length))
        return True, None, None

    def _release(self, cmd: ReleaseTendon):
        t = cmd.tendon
        if not isinstance(t, (int, np.integer)) or t < 0 or \
                t >= len(self.tendons):
            return False, REASON_TENDON_OUT_OF_RANGE, {"tendon": t}
        self.tendons[t] = TendonState("tension", 0.0)
        return True, None, None

    def _wait(self):
        if self.exposed_count == 0:
            self.last_equilibrium = None
            return True, None, {"converged": True, "joints": 0}
        chain = self._chain()
        base = np.array([t.value if t.mode == "tension" else 0.0
                         for t in self.tendons])
        length_modes = [i for i, t in enumerate(self.tendons)
                        if t.mode == "length"]
        limited = False
        resolved = {}
        if not length_modes:
            res = solve_equilibrium(chain, base, q0=self.q.ravel(),
                                    gtol=self.gtol)
        else:
            # One bisection per displacement-controlled tendon; with several,
            # alternate a few rounds (best effort; scripts in practice drive
            # one tendon by length at a time).
            rounds = 1 if len(length_modes) == 1 else 3
            res = None
            q0 = self.q.ravel()
            for _ in range(rounds):
                for i in length_modes:
                    delta = max(0.0, self.everted - self.tendons[i].value)
                    res, T, lim = solve_tendon_displacement(
                        chain, i, delta,
                        max_tension=self.desc.tendon_tension_limit,
                        q0=q0, gtol=self.gtol, base_tensions=base)
                    base[i] = T
                    resolved["tendon_%d_n" % i] = float(T)
                    limited = limited or lim
                    q0 = res.q.ravel()
        self.q = res.q.copy()
        self.last_equilibrium = res
        detail = {"converged": bool(res.converged),
                  "wrinkled": [bool(w) for w in res.wrinkled],
                  "tip_mm": [float(v) * 1e3 for v in res.tip_position]}
        if resolved:
            detail["resolved_tensions"] = resolved
        if limited:
            detail["tension_limited"] = True
        return True, None, detail

    # --- log IO / replay ---

    def save_log(self, path):
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec, sort_keys=True,
                                    separators=(",", ":")))
                fh.write("\n")

    def snapshot(self) -> dict:
        """Console-facing state message body (human units)."""
        from .statics import forward_kinematics
        lengths = self.segment_lengths()
        poses, tip = forward_kinematics(lengths, self.q) if len(lengths) \
            else ([], np.zeros(3))
        eq = self.last_equilibrium
        wrinkled = [bool(w) for w in eq.wrinkled] if eq is not None \
            else [False] * self.exposed_count
        segments = []
        for j, (origin, R) in enumerate(poses):
            end = origin + R @ np.array([0.0, 0.0, lengths[j]])
            segments.append({
                "origin_mm": [float(v) * 1e3 for v in origin],
                "end_mm": [float(v) * 1e3 for v in end],
            })
        return {
            "everted_mm": self.everted * 1e3,
            "total_length_mm": self.desc.total_length * 1e3,
            "internal_kpa": self.internal_gauge / 1e3,
            "internal_abs_kpa": self.internal_abs / 1e3,
            "exposed": self.exposed_count,
            "sections": [
                {"index": i, "pouch_abs_kpa": p / 1e3,
                 "delta_p_kpa": max(0.0, self.internal_abs - p) / 1e3,
                 "jammed": self.internal_abs - p > 0.0}
                for i, p in enumerate(self.pouches)],
            "tendons": [{"index": i, "mode": t.mode, "value": t.value}
                        for i, t in enumerate(self.tendons)],
            "joint_angles_deg": [[math.degrees(a), math.degrees(b)]
                                 for a, b in self.q],
            "rest_angles_deg": [[math.degrees(a), math.degrees(b)]
                                for a, b in self.rest],
            "segments": segments,
            "tip_mm": [float(v) * 1e3 for v in tip],
            "wrinkled": wrinkled,
            "log_index": self.seq - 1,
            "state_hash": self.state_hash(),
        }


def load_log(path) -> List[dict]:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ScenarioError("log line %d: %s" % (lineno, e.msg))
    return records


def replay_log(scn: Scenario, records: List[dict], verify=True) -> Session:
    """Re-execute a log against a fresh session. With verify, every
    re-executed command must land on the recorded state hash."""
    session = Session.from_scenario(scn)
    for rec in records:
        ver = rec.get("schema_version")
        if ver != LOG_SCHEMA_VERSION:
            raise ReplayError("seq %s: unknown log schema_version %r"
                              % (rec.get("seq"), ver))
        if rec["command"] is None:
            # initial-state record: nothing to execute, but the starting
            # hash must match the scenario
            if verify and rec["state_hash"] != session.log[0]["state_hash"]:
                raise ReplayError(
                    "initial state differs from the scenario: %s != %s"
                    % (session.log[0]["state_hash"], rec["state_hash"]))
            continue
        out = session.execute(command_from_dict(rec["command"]))
        if verify:
            if out["ok"] != rec["ok"] or out["state_hash"] != rec["state_hash"]:
                raise ReplayError(
                    "replay diverged at seq %s: hash %s != recorded %s"
                    % (rec.get("seq"), out["state_hash"], rec["state_hash"]))
    return session
