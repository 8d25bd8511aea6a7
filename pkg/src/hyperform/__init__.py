"""Hyperfunctions as relative Dolbeault cocycles."""

__version__ = "0.1.0"

from .errors import HyperformError  # noqa: E402
from .formcalc import Form  # noqa: E402
from .hyperops import (ConeSpec, Hyperform, SupportSpec, boundary_value, delta, delta_form,  # noqa: E402
                       embed_form, embed_real_analytic, external_product, fiber_integrate, hyper_d, mult,
                       partial_derivative, restrict_boundary_value, support_in_cone)
from .quadpair import Cutoff, Density, PairingResult, grothendieck_residue, pair, sphere_integral  # noqa: E402
from .relcochain import CoveringSpec, RelCochain, is_cocycle  # noqa: E402

__all__ = [
    "HyperformError", "Form", "ConeSpec", "Hyperform", "SupportSpec", "boundary_value", "delta", "delta_form",
    "embed_form", "embed_real_analytic", "external_product", "fiber_integrate", "hyper_d", "mult",
    "partial_derivative", "restrict_boundary_value", "support_in_cone", "Cutoff", "Density", "PairingResult",
    "grothendieck_residue", "pair", "sphere_integral", "CoveringSpec", "RelCochain", "is_cocycle",
]
