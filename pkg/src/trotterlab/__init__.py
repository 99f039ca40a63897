"""Numerical lab for the arithmetic-mean Trotter product formula on unitary groups."""

__version__ = "0.1.0"

from .degenerate import DegenerateOperator, FormSum, form_sum, make_degenerate, target_group, target_resolvent
from .kato import KatoFunction, builtin, from_cli_name, validate
from .operator_core import Subspace, apply_function, hermitian_eig, intersect, orth_complement, projector, subspace_sum
from .product import ProductScheme, F, F_power, S, accretive_parts, chernoff_exp, energy_residual, resolvent_S

__all__ = [
    "DegenerateOperator", "FormSum", "form_sum", "make_degenerate", "target_group", "target_resolvent",
    "KatoFunction", "builtin", "from_cli_name", "validate",
    "Subspace", "apply_function", "hermitian_eig", "intersect", "orth_complement", "projector", "subspace_sum",
    "ProductScheme", "F", "F_power", "S", "accretive_parts", "chernoff_exp", "energy_residual", "resolvent_S",
]
