"""
Canonical unit conversions

Converts between SI-style units and the canonical DU/TU/MU system defined by
a SystemParams instance.
"""

from typing import Dict, Tuple

from loguru import logger

from ..errors import UnitConversionError
from .cr3bp import SystemParams

_ALIASES = {
    "m/s^2": "m/s²",
    "m/s2": "m/s²",
    "DU/TU^2": "DU/TU²",
    "DU/TU2": "DU/TU²",
}


def _unit_table(params: SystemParams) -> Dict[str, Tuple[str, float]]:
    """Map unit name to (dimension, size in SI base units)"""
    return {
        "m": ("length", 1.0),
        "km": ("length", 1e3),
        "DU": ("length", params.du_meters),
        "s": ("time", 1.0),
        "TU": ("time", params.tu_seconds),
        "m/s": ("velocity", 1.0),
        "DU/TU": ("velocity", params.velocity_unit),
        "m/s²": ("acceleration", 1.0),
        "DU/TU²": ("acceleration", params.acceleration_unit),
        "kg": ("mass", 1.0),
        "MU": ("mass", params.mu_kg),
    }


def unit_convert(quantity: float, from_unit: str, to_unit: str, params: SystemParams) -> float:
    """Scale a quantity between two units of the same dimension"""
    table = _unit_table(params)
    src = _ALIASES.get(from_unit, from_unit)
    dst = _ALIASES.get(to_unit, to_unit)
    if src not in table or dst not in table:
        raise UnitConversionError(f"Unknown unit pair: {from_unit} -> {to_unit}")
    src_dim, src_size = table[src]
    dst_dim, dst_size = table[dst]
    if src_dim != dst_dim:
        raise UnitConversionError(f"Cannot convert {src_dim} ({from_unit}) to {dst_dim} ({to_unit})")
    if src == dst:
        return float(quantity)
    return float(quantity) * (src_size / dst_size)


def thrust_to_acceleration(thrust: float, mass_kg: float, thrust_unit: str = "N") -> float:
    """Acceleration in m/s² produced by a thrust on a spacecraft mass"""
    scale = {"N": 1.0, "mN": 1e-3}
    if thrust_unit not in scale:
        raise UnitConversionError(f"Unknown thrust unit: {thrust_unit}")
    if mass_kg <= 0.0:
        raise UnitConversionError(f"Spacecraft mass must be positive, got {mass_kg}")
    return thrust * scale[thrust_unit] / mass_kg


def u_max_from_thrust(thrust: float, mass_kg: float, params: SystemParams, thrust_unit: str = "N") -> float:
    """Acceleration bound in DU/TU² for a thruster and spacecraft mass"""
    acceleration = thrust_to_acceleration(thrust, mass_kg, thrust_unit)
    u_max = unit_convert(acceleration, "m/s²", "DU/TU²", params)
    logger.debug(
        f"Thrust {thrust} {thrust_unit} on {mass_kg} kg -> {acceleration:.6e} m/s² "
        f"= {u_max:.6e} DU/TU²"
    )
    return u_max
