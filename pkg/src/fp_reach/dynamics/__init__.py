"""
Dynamics package for fp-reach

- cr3bp.py: rotating-frame vector field, derivatives, Jacobi integral
- units.py: canonical unit conversions
"""

from .cr3bp import (
    ControlVec,
    State6,
    SystemParams,
    as_state,
    eom,
    eom_batch,
    eom_controlled,
    hessian_contract,
    hessian_contract_batch,
    jacobi_constant,
    jacobian,
    jacobian_batch,
)
from .units import thrust_to_acceleration, u_max_from_thrust, unit_convert

__all__ = [
    "ControlVec",
    "State6",
    "SystemParams",
    "as_state",
    "eom",
    "eom_batch",
    "eom_controlled",
    "hessian_contract",
    "hessian_contract_batch",
    "jacobi_constant",
    "jacobian",
    "jacobian_batch",
    "thrust_to_acceleration",
    "u_max_from_thrust",
    "unit_convert",
]
