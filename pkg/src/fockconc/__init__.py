"""Faber-Krahn type concentration estimates for the Gaussian STFT, computed in Fock space."""
from .kernels import backend
from .fock import (
    FockFunction,
    make_fock,
    monomial,
    evaluate,
    density,
    inner,
    norm,
    kernel_function,
)
from .concentration import (
    GridSpec,
    DensityGrid,
    ConcentrationProfile,
    RegionMask,
    DeficitReport,
    sample_density,
    profile,
    fk_bound,
    deficit,
    superlevel_mask,
    convexity_G,
    lemma_bounds,
    global_max,
)
from .geometry import BoundaryGraph, fraenkel_asymmetry, symdiff_measure, boundary_graph, shape_checks
from .stability import (
    gaussian_distance,
    stability_report,
    v_coefficient,
    v_coefficient_oracle,
    second_variation,
    sharpness_sweep,
    localization_matrix,
    top_eigenpair,
)
from .highdim import MCSpec, e_star, fk_bound_d, deficit_d, rearrangement_check_d
from .transforms import SampledSignal, HermiteExpansion, hermite_expand, bargmann, stft_gaussian, bargmann_identity_residual

__version__ = "0.1.0"
