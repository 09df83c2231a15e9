"""Exact computation in stratified Lie algebras and Carnot groups."""
from .symbolic import MultiPoly, PolyVectorField, field_bracket, poly_apply, solve_kernel
from .liealg import (
    StratifiedAlgebra,
    Subalgebra,
    bracket,
    check_carnot_homomorphism,
    homogeneous_dimension,
    image_dimension_drop,
    subalgebra_closure,
    validate_algebra,
)
from .group import GroupPoint, bch_product, dilate, inverse, left_invariant_field

__version__ = "0.1.0"
