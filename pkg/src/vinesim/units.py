"""Unit conversions at file boundaries.

Everything internal is SI (m, N, Pa, rad). Scenario/target/log files and CLI
flags use mm, kPa and degrees, which is how the hardware numbers are usually
quoted, so conversions happen exactly once at parse/emit time.
"""

import math

ATMOSPHERE_PA = 101325.0  # standard atmosphere, Pa absolute

MM_PER_M = 1000.0
KPA_PER_PA = 1e-3


def mm_to_m(x_mm: float) -> float:
    return x_mm / MM_PER_M


def m_to_mm(x_m: float) -> float:
    return x_m * MM_PER_M


def kpa_to_pa(x_kpa: float) -> float:
    return x_kpa / KPA_PER_PA


def pa_to_kpa(x_pa: float) -> float:
    return x_pa * KPA_PER_PA


def deg_to_rad(x_deg: float) -> float:
    return math.radians(x_deg)


def rad_to_deg(x_rad: float) -> float:
    return math.degrees(x_rad)


def gauge_to_absolute(p_gauge_pa: float) -> float:
    """Gauge pressure (relative to atmosphere) to absolute."""
    return p_gauge_pa + ATMOSPHERE_PA


def absolute_to_gauge(p_abs_pa: float) -> float:
    return p_abs_pa - ATMOSPHERE_PA
