"""Heisenberg groups with a grading derivation: structure, visual quasimetrics,
coset geometry and the quasi-isometry classification of the parabolic boundaries."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .core import LieElement, SolvElement, bch_inv, bch_mul, bracket, omega, solv_inv, solv_mul  # noqa: E402
from .derivation import (  # noqa: E402
    AdaptedBasis,
    DerivationSpec,
    GradedStructure,
    StructureReport,
    build_adapted_basis,
    conjugate,
    decompose,
    flow,
    random_automorphism,
    validate_derivation,
    verify_structure,
)
from .metric import (  # noqa: E402
    NetConfig,
    QuasimetricParams,
    RegularityReport,
    chain_dist,
    dist_0,
    dist_A,
    norm_0,
    norm_A,
    quasi_triangle_ratio,
    regularity_estimate,
)
from .cosets import (  # noqa: E402
    CosetSpec,
    HausdorffProfile,
    coset_dist_H,
    coset_dist_U1,
    dist_DA,
    hausdorff_profile,
    point_to_coset_dist,
    slice_dist,
    slice_map,
)
from .classify import (  # noqa: E402
    BoundaryMap,
    Classification,
    almost_similarity_fit,
    build_isometry,
    classify,
    distortion_probe,
    eta_envelope,
    qi_invariants,
    verify_isometry,
)
from .specio import parse_spec, serialize_spec  # noqa: E402
