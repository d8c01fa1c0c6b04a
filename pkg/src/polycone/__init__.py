"""Polytope approximations of cones of nonnegative polynomials on the sphere."""
from .errors import (
    ConfigurationError,
    ConfigurationWarning,
    DegenerateInputError,
    GridTooCoarseError,
    InputError,
    InternalConsistencyError,
    PolyconeError,
    RankError,
    StructuralError,
)
from .kernel import Subspace, even_symmetric_sextics, full_space, phi, reproducing_kernel
from .polyspace import HomogeneousPolynomial, inner_product, space_dimension, sphere_power
from .polytope import (
    PolytopeH,
    PolytopeV,
    build_deterministic,
    build_random,
    build_tensorized,
    loewner_position,
)
from .sparsifier import VectorSystem, bss_sparsify, whiten
from .verifier import SupportOracle, certify_containment, ngon_check, support_B

__version__ = "0.1.0"
