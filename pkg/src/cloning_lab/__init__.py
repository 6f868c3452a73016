"""Optimal universal cloning and state estimation for qudits."""

from cloning_lab.qudit import (
    apply_shrink,
    bloch_from_density,
    build_generator_basis,
    density_from_bloch,
    eta_from_fidelity,
    fidelity_from_eta,
    fidelity_pure,
    haar_random_state,
    haar_random_states,
    overlap_moment,
)
from cloning_lab.symmetric import (
    SymmetricBasis,
    SymmetricState,
    embed_product_state,
    pseudo_mixture_decompose,
    reduce_single_particle,
    sym_dimension,
    symmetrizer,
)
from cloning_lab.cloner import (
    ClonerSpec,
    clone,
    cloner_fidelity,
    cloner_fidelity_asymptotic,
    cloner_shrinking_factor,
)
from cloning_lab.estimator import (
    Povm,
    average_fidelity,
    build_covariant_povm,
    design_povm,
    estimation_fidelity_exact,
    measure_prepare_channel_eta,
    outcome_distribution,
    validate_povm,
)

__version__ = "0.1.0"
