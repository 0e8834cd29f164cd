"""Session commands and their file form.

Files carry human units (mm, kPa, degrees) per the interface convention.
Converting between those and the SI floats used internally is not exactly
invertible in binary floating point, and replay integrity demands that a
parsed command reproduce the original bit for bit; serialized commands
therefore also carry an `_si` map of the exact SI values as float hex
strings. Hand-written files may omit `_si`, in which case the human-unit
fields are converted at parse time.
"""

import json
from dataclasses import dataclass
from typing import Optional, Tuple, Union

SCRIPT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Grow:
    length: float  # m, lengthening relative to current everted length


@dataclass(frozen=True)
class Retract:
    length: float  # m


@dataclass(frozen=True)
class SetPouch:
    section: int
    pressure: float  # Pa absolute


@dataclass(frozen=True)
class PullTendon:
    """Exactly one of tension (N) or target_length (m, absolute path length
    from base to tip) must be set."""
    tendon: int
    tension: Optional[float] = None
    target_length: Optional[float] = None

    def __post_init__(self):
        if (self.tension is None) == (self.target_length is None):
            raise ValueError("PullTendon takes exactly one of tension "
                             "or target_length")
        if self.tension is not None and self.tension < 0.0:
            raise ValueError("tension must be nonnegative")


@dataclass(frozen=True)
class ReleaseTendon:
    tendon: int


@dataclass(frozen=True)
class WaitEquilibrium:
    pass


Command = Union[Grow, Retract, SetPouch, PullTendon, ReleaseTendon,
                WaitEquilibrium]


def _hex(v):
    return float(v).hex()


def _from_si(d, key, human_key, human_scale, payload):
    """Exact value from the _si map when present, else the converted human
    field."""
    si = d.get("_si", {})
    if key in si:
        return float.fromhex(si[key])
    return payload[human_key] / human_scale


def command_to_dict(cmd: Command) -> dict:
    if isinstance(cmd, Grow):
        return {"op": "grow", "length_mm": cmd.length * 1e3,
                "_si": {"length": _hex(cmd.length)}}
    if isinstance(cmd, Retract):
        return {"op": "retract", "length_mm": cmd.length * 1e3,
                "_si": {"length": _hex(cmd.length)}}
    if isinstance(cmd, SetPouch):
        return {"op": "set_pouch", "section": cmd.section,
                "pressure_kpa": cmd.pressure / 1e3,
                "_si": {"pressure": _hex(cmd.pressure)}}
    if isinstance(cmd, PullTendon):
        d = {"op": "pull_tendon", "tendon": cmd.tendon}
        if cmd.tension is not None:
            d["tension_n"] = cmd.tension
            d["_si"] = {"tension": _hex(cmd.tension)}
        else:
            d["target_length_mm"] = cmd.target_length * 1e3
            d["_si"] = {"target_length": _hex(cmd.target_length)}
        return d
    if isinstance(cmd, ReleaseTendon):
        return {"op": "release_tendon", "tendon": cmd.tendon}
    if isinstance(cmd, WaitEquilibrium):
        return {"op": "wait_equilibrium"}
    raise TypeError("not a command: %r" % (cmd,))


def command_from_dict(d: dict) -> Command:
    try:
        op = d["op"]
    except (KeyError, TypeError):
        raise ValueError("command record missing 'op' field")
    if op == "grow":
        return Grow(length=_from_si(d, "length", "length_mm", 1e3, d))
    if op == "retract":
        return Retract(length=_from_si(d, "length", "length_mm", 1e3, d))
    if op == "set_pouch":
        return SetPouch(section=int(d["section"]),
                        pressure=_from_si(d, "pressure", "pressure_kpa",
                                          1e-3, d))
    if op == "pull_tendon":
        if "tension_n" in d or "tension" in d.get("_si", {}):
            return PullTendon(tendon=int(d["tendon"]),
                              tension=_from_si(d, "tension", "tension_n",
                                               1.0, d))
        return PullTendon(tendon=int(d["tendon"]),
                          target_length=_from_si(d, "target_length",
                                                 "target_length_mm", 1e3, d))
    if op == "release_tendon":
        return ReleaseTendon(tendon=int(d["tendon"]))
    if op == "wait_equilibrium":
        return WaitEquilibrium()
    raise ValueError("unknown command op %r" % op)


@dataclass(frozen=True)
class CommandScript:
    commands: Tuple[Command, ...]

    def __len__(self):
        return len(self.commands)

    def __iter__(self):
        return iter(self.commands)

    def to_dict(self) -> dict:
        return {"schema_version": SCRIPT_SCHEMA_VERSION,
                "commands": [command_to_dict(c) for c in self.commands]}

    @classmethod
    def from_dict(cls, d: dict) -> "CommandScript":
        ver = d.get("schema_version")
        if ver != SCRIPT_SCHEMA_VERSION:
            raise ValueError("unsupported script schema_version %r" % ver)
        return cls(commands=tuple(command_from_dict(c)
                                  for c in d["commands"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CommandScript":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
