"""Domain types and closed-form material/structural laws.

The robot is an inflated fabric beam wrapped in jamming-layer stacks. Bending
compliance concentrates at section interfaces, modeled downstream as discrete
2-DOF joints; this module owns the scalar laws those joints are built from:

  * flexural modulus of the layer stack from a three-point bend test,
  * jamming-skin flexural rigidity as a saturating function of the pouch
    pressure difference,
  * wrinkling / collapse moments of the pressurized membrane tube.
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

from .units import ATMOSPHERE_PA

# Internal body pressure used throughout the reference experiments, Pa gauge.
DEFAULT_INTERNAL_GAUGE_PA = 6900.0


@dataclass(frozen=True)
class MaterialModel:
    """Material constants plus the four calibrated stiffness parameters.

    The first block is measured directly; the second block comes out of
    calibration.fit_parameters and has fitted defaults so the simulator is
    usable out of the box.
    """
    E_unjammed: float = 263.2e3       # Pa, flexural modulus of a free stack
    E_jammed_ref: float = 3038.6e3    # Pa, flexural modulus of a jammed stack
    stack_thickness: float = 1.82e-3  # m, layer stack thickness (test specimen d)
    stack_width: float = 35e-3        # m, test specimen width

    # calibrated:
    pressure_rigidity_offset: float = 0.4817   # N m^2, membrane-tube term at zero gauge
    pressure_rigidity_slope: float = 8.133e-6  # N m^2 / Pa, gain on internal pressure
    skin_gain: float = 16.99                   # saturated skin rigidity multiplier, -
    deltaP_sat: float = 4770.0                 # Pa, jamming saturation scale

    def __post_init__(self):
        if not (self.E_jammed_ref > self.E_unjammed > 0.0):
            raise ValueError("need E_jammed_ref > E_unjammed > 0")
        if self.deltaP_sat <= 0.0:
            raise ValueError("deltaP_sat must be positive")


@dataclass(frozen=True)
class RobotDescription:
    """Immutable geometry of one robot. Defaults mirror the reference build:

    55 mm diameter tube, four 0.25 m sections, six jamming stacks around the
    circumference, three tendons 120 degrees apart routed through stoppers
    every 60 mm.
    """
    beam_radius: float = 27.5e-3            # m
    section_lengths: tuple = (0.25, 0.25, 0.25, 0.25)  # m each
    layer_stacks_per_section: int = 6
    layers_per_stack: int = 15
    layer_width: float = 18e-3              # m, width of one stack
    tendon_count: int = 3
    tendon_angles: tuple = (0.0, 2.0943951023931953, 4.1887902047863905)  # rad
    tendon_radial_offset: float = 27.5e-3   # m
    stopper_spacing: float = 60e-3          # m
    tendon_tension_limit: float = 600.0     # N, per tendon
    fabric_baseline: MaterialModel = field(default_factory=MaterialModel)

    def __post_init__(self):
        if self.beam_radius <= 0.0:
            raise ValueError("beam_radius must be positive")
        if any(L <= 0.0 for L in self.section_lengths):
            raise ValueError("section lengths must be positive")
        if self.tendon_radial_offset > self.beam_radius + 1e-12:
            raise ValueError("tendon_radial_offset cannot exceed beam_radius")
        if self.tendon_count != len(self.tendon_angles):
            raise ValueError("tendon_count does not match tendon_angles")
        tau = 2.0 * math.pi
        angs = [a % tau for a in self.tendon_angles]
        for i in range(len(angs)):
            for j in range(i + 1, len(angs)):
                d = abs(angs[i] - angs[j])
                if min(d, tau - d) < 1e-9:
                    raise ValueError("tendon_angles must be pairwise distinct")

    @property
    def total_length(self):
        return float(sum(self.section_lengths))

    @property
    def section_count(self):
        return len(self.section_lengths)


@dataclass(frozen=True)
class FlexuralTest:
    """Three-point bend test record. slope is the initial force/displacement
    slope (taken below 0.5 mm displacement)."""
    span: float       # m
    width: float      # m
    thickness: float  # m
    slope: float      # N/m


@dataclass(frozen=True)
class SectionState:
    """Pouch state of one section. Pressures are absolute Pa.

    pouch_pressure = 0 is a fully evacuated pouch (strongest jamming),
    pouch_pressure = atmosphere is positive-pressure jamming with the pouch
    vented, pouch_pressure = internal_pressure is unjammed.
    """
    pouch_pressure: float    # Pa absolute
    internal_pressure: float  # Pa absolute

    @property
    def delta_p(self):
        """Jamming pressure difference, clamped at zero from below. A pouch
        pressurized above the body confers no extra softness."""
        return max(0.0, self.internal_pressure - self.pouch_pressure)

    @property
    def unjammed(self):
        return self.delta_p == 0.0

    def with_pouch(self, pouch_pressure):
        return replace(self, pouch_pressure=pouch_pressure)


def unjammed_state(internal_gauge=DEFAULT_INTERNAL_GAUGE_PA):
    p_abs = internal_gauge + ATMOSPHERE_PA
    return SectionState(pouch_pressure=p_abs, internal_pressure=p_abs)


def jammed_state(internal_gauge=DEFAULT_INTERNAL_GAUGE_PA, pouch_abs=ATMOSPHERE_PA):
    """Jammed section; default pouch at atmosphere (no vacuum line needed)."""
    return SectionState(pouch_pressure=pouch_abs,
                        internal_pressure=internal_gauge + ATMOSPHERE_PA)


def _si_map(**values):
    """Exact float sidecar for interface files: human-unit fields are for
    reading, the _si map is what a loader trusts when present, so that
    load(save(x)) == x bit for bit despite unit conversion."""
    return {k: float(v).hex() for k, v in values.items()}


def material_to_dict(m: MaterialModel) -> dict:
    """Interface-file form of the material constants (kPa / mm where those
    units apply; rigidities stay in N m^2)."""
    return {
        "schema_version": 1,
        "e_unjammed_kpa": m.E_unjammed / 1e3,
        "e_jammed_ref_kpa": m.E_jammed_ref / 1e3,
        "stack_thickness_mm": m.stack_thickness * 1e3,
        "stack_width_mm": m.stack_width * 1e3,
        "pressure_rigidity_offset_nm2": m.pressure_rigidity_offset,
        "pressure_rigidity_slope_nm2_per_kpa": m.pressure_rigidity_slope * 1e3,
        "skin_gain": m.skin_gain,
        "deltap_sat_kpa": m.deltaP_sat / 1e3,
        "_si": _si_map(E_unjammed=m.E_unjammed, E_jammed_ref=m.E_jammed_ref,
                       stack_thickness=m.stack_thickness,
                       stack_width=m.stack_width,
                       pressure_rigidity_offset=m.pressure_rigidity_offset,
                       pressure_rigidity_slope=m.pressure_rigidity_slope,
                       skin_gain=m.skin_gain, deltaP_sat=m.deltaP_sat),
    }


def _field(d, si_key, human_key, scale, default):
    """Field value precedence: exact _si entry, then converted human-unit
    field, then the dataclass default."""
    si = d.get("_si", {})
    if si_key in si:
        return float.fromhex(si[si_key])
    if human_key in d:
        return d[human_key] * scale
    return default


def material_from_dict(d: dict) -> MaterialModel:
    if d.get("schema_version") != 1:
        raise ValueError("unsupported material schema_version %r"
                         % d.get("schema_version"))
    base = MaterialModel()
    return MaterialModel(
        E_unjammed=_field(d, "E_unjammed", "e_unjammed_kpa", 1e3,
                          base.E_unjammed),
        E_jammed_ref=_field(d, "E_jammed_ref", "e_jammed_ref_kpa", 1e3,
                            base.E_jammed_ref),
        stack_thickness=_field(d, "stack_thickness", "stack_thickness_mm",
                               1e-3, base.stack_thickness),
        stack_width=_field(d, "stack_width", "stack_width_mm", 1e-3,
                           base.stack_width),
        pressure_rigidity_offset=_field(d, "pressure_rigidity_offset",
                                        "pressure_rigidity_offset_nm2", 1.0,
                                        base.pressure_rigidity_offset),
        pressure_rigidity_slope=_field(d, "pressure_rigidity_slope",
                                       "pressure_rigidity_slope_nm2_per_kpa",
                                       1e-3, base.pressure_rigidity_slope),
        skin_gain=_field(d, "skin_gain", "skin_gain", 1.0, base.skin_gain),
        deltaP_sat=_field(d, "deltaP_sat", "deltap_sat_kpa", 1e3,
                          base.deltaP_sat),
    )


def description_to_dict(desc: RobotDescription) -> dict:
    return {
        "schema_version": 1,
        "beam_radius_mm": desc.beam_radius * 1e3,
        "section_lengths_mm": [L * 1e3 for L in desc.section_lengths],
        "layer_stacks_per_section": desc.layer_stacks_per_section,
        "layers_per_stack": desc.layers_per_stack,
        "layer_width_mm": desc.layer_width * 1e3,
        "tendon_angles_deg": [math.degrees(a) for a in desc.tendon_angles],
        "tendon_radial_offset_mm": desc.tendon_radial_offset * 1e3,
        "stopper_spacing_mm": desc.stopper_spacing * 1e3,
        "tendon_tension_limit_n": desc.tendon_tension_limit,
        "_si": {
            **_si_map(beam_radius=desc.beam_radius,
                      layer_width=desc.layer_width,
                      tendon_radial_offset=desc.tendon_radial_offset,
                      stopper_spacing=desc.stopper_spacing,
                      tendon_tension_limit=desc.tendon_tension_limit),
            "section_lengths": [float(L).hex() for L in desc.section_lengths],
            "tendon_angles": [float(a).hex() for a in desc.tendon_angles],
        },
    }


def description_from_dict(d: dict) -> RobotDescription:
    if d.get("schema_version") != 1:
        raise ValueError("unsupported description schema_version %r"
                         % d.get("schema_version"))
    si = d.get("_si", {})
    base = RobotDescription()
    if "section_lengths" in si:
        lengths = tuple(float.fromhex(h) for h in si["section_lengths"])
    elif "section_lengths_mm" in d:
        lengths = tuple(v / 1e3 for v in d["section_lengths_mm"])
    else:
        lengths = base.section_lengths
    if "tendon_angles" in si:
        angles = tuple(float.fromhex(h) for h in si["tendon_angles"])
    elif "tendon_angles_deg" in d:
        angles = tuple(math.radians(v) for v in d["tendon_angles_deg"])
    else:
        angles = base.tendon_angles
    return RobotDescription(
        beam_radius=_field(d, "beam_radius", "beam_radius_mm", 1e-3,
                           base.beam_radius),
        section_lengths=lengths,
        layer_stacks_per_section=int(d.get("layer_stacks_per_section",
                                           base.layer_stacks_per_section)),
        layers_per_stack=int(d.get("layers_per_stack", base.layers_per_stack)),
        layer_width=_field(d, "layer_width", "layer_width_mm", 1e-3,
                           base.layer_width),
        tendon_count=len(angles),
        tendon_angles=angles,
        tendon_radial_offset=_field(d, "tendon_radial_offset",
                                    "tendon_radial_offset_mm", 1e-3,
                                    base.tendon_radial_offset),
        stopper_spacing=_field(d, "stopper_spacing", "stopper_spacing_mm",
                               1e-3, base.stopper_spacing),
        tendon_tension_limit=_field(d, "tendon_tension_limit",
                                    "tendon_tension_limit_n", 1.0,
                                    base.tendon_tension_limit),
    )


def flexural_modulus(test: FlexuralTest) -> float:
    """Flexural modulus from a three-point bend: E = L^3 m / (4 b d^3)."""
    for name in ("span", "width", "thickness"):
        if getattr(test, name) <= 0.0:
            raise ValueError("flexural test field %r must be positive" % name)
    return test.span ** 3 * test.slope / (4.0 * test.width * test.thickness ** 3)


def skin_area_moment(desc: RobotDescription, material: MaterialModel) -> float:
    """Second moment of area of the jamming skin about the neutral axis.

    The stacks are modeled as thin rectangles distributed evenly around the
    tube at the beam radius; averaging cos^2 over the circumference gives the
    r^2/2 parallel-axis term, plus each stack's own t^3/12.
    """
    n = desc.layer_stacks_per_section
    w = desc.layer_width
    t = material.stack_thickness
    r = desc.beam_radius
    return n * w * t * r ** 2 / 2.0 + n * w * t ** 3 / 12.0


def skin_flexural_rigidity(material: MaterialModel, delta_p: float,
                           desc: RobotDescription) -> float:
    """EI of the jamming skin at pressure difference delta_p (Pa, >= 0).

    Interpolates from the unjammed stack rigidity at delta_p = 0 toward the
    saturated jammed value with a (1 - exp(-dP/deltaP_sat)) factor. Monotone
    nondecreasing and continuous; exact at zero by construction.
    """
    if delta_p < 0.0:
        raise ValueError("delta_p must be nonnegative (clamp in SectionState)")
    I = skin_area_moment(desc, material)
    ei_unjammed = material.E_unjammed * I
    ei_saturated = material.skin_gain * material.E_jammed_ref * I
    g = 1.0 - math.exp(-delta_p / material.deltaP_sat)
    return ei_unjammed + (ei_saturated - ei_unjammed) * g


def effective_rigidity(material: MaterialModel, p_gauge: float, delta_p: float,
                       desc: RobotDescription) -> float:
    """Total bending rigidity of a section: pressurized-tube term (affine in
    gauge pressure) plus the jamming-skin term."""
    tube = material.pressure_rigidity_offset + material.pressure_rigidity_slope * p_gauge
    return tube + skin_flexural_rigidity(material, delta_p, desc)


def wrinkling_moment(p_gauge: float, radius: float, skin_factor: float = 1.0) -> float:
    """Moment at which the compressed side of the inflated tube wrinkles.

    Classical membrane onset pi p r^3 / 2, scaled by skin_factor >= 1 to
    credit the jamming skin for carrying moment beyond the bare membrane.
    """
    if p_gauge < 0.0:
        raise ValueError("gauge pressure must be nonnegative")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    return (math.pi * p_gauge * radius ** 3 / 2.0) * skin_factor


def collapse_moment(p_gauge: float, radius: float) -> float:
    """Full-collapse moment of the bare membrane tube: twice the unscaled
    wrinkling onset."""
    return 2.0 * wrinkling_moment(p_gauge, radius, 1.0)


def wrinkling_skin_factor(material: MaterialModel, p_gauge: float, delta_p: float,
                          desc: RobotDescription) -> float:
    """Moment share carried by skin + tube stiffness relative to the bare
    membrane: the ratio of total rigidity to the pressure-slope contribution.

    With the calibrated parameters this is well above 1 for every operating
    state, so the plateau scales with the section's jamming state.
    """
    ei = effective_rigidity(material, p_gauge, delta_p, desc)
    membrane = material.pressure_rigidity_slope * max(p_gauge, 1e-9)
    return ei / membrane


# --- joint governance -------------------------------------------------------

def governing_section(joint_index: int) -> int:
    """Section whose jamming state sets joint stiffness.

    Joint 0 is the base joint; joint i >= 1 sits at the interface between
    sections i-1 and i. A joint follows its distal neighbor: unjamming
    section i is what activates the bend at its proximal interface, and the
    jammed stack on the far side of an interface keeps a locked bend in
    place while its proximal neighbor is softened. That makes the governing
    section of joint i simply section i.
    """
    return joint_index


@dataclass(frozen=True)
class JointLaw:
    """Bilinear torsional behavior of one virtual joint."""
    stiffness: float        # N m / rad
    plateau_moment: float   # N m

    def __post_init__(self):
        if self.stiffness <= 0.0 or self.plateau_moment <= 0.0:
            raise ValueError("joint law needs positive stiffness and plateau")

    @property
    def wrinkle_angle(self):
        return self.plateau_moment / self.stiffness


def joint_law(material: MaterialModel, p_gauge: float, delta_p: float,
              desc: RobotDescription) -> JointLaw:
    """Joint law for a joint governed by a section at the given state.

    The torsional stiffness is the governing section's rigidity over a hinge
    length equal to the beam radius (the crease zone of a kinked tube scales
    with its radius and is otherwise configuration independent). The plateau
    is the wrinkling moment with the same section's skin factor.
    """
    ei = effective_rigidity(material, p_gauge, delta_p, desc)
    k = ei / desc.beam_radius
    m_plateau = wrinkling_moment(
        p_gauge, desc.beam_radius,
        wrinkling_skin_factor(material, p_gauge, delta_p, desc))
    return JointLaw(stiffness=k, plateau_moment=m_plateau)


def joint_laws_for_sections(material: MaterialModel, desc: RobotDescription,
                            states: List[SectionState]) -> List[JointLaw]:
    """One law per joint (base + one per interface) for the exposed sections."""
    laws = []
    for j in range(len(states)):
        st = states[governing_section(j)]
        p_gauge = st.internal_pressure - ATMOSPHERE_PA
        laws.append(joint_law(material, p_gauge, st.delta_p, desc))
    return laws
