"""Adaptive social learning over hidden directed graphs.

Simulates belief formation on a left-stochastic combination matrix,
recovers that matrix online from the publicly exchanged beliefs, and
explains the result through pairwise influence measures and
most-influential-path extraction.
"""
from ._kernels import BACKEND
from .graphs import (
    CombinationMatrix,
    SpectralProfile,
    generate_erdos_renyi,
    is_strongly_connected,
    load_graph,
    perturb_edges,
    regenerate_edges,
    save_graph,
    spectral_profile,
)
from .influence import (
    InfluenceMap,
    InfluencePath,
    eta,
    influence_derivative_check,
    influence_map,
    most_influential_path,
    path_influence,
)
from .likelihoods import (
    LikelihoodModel,
    LogRatioMatrix,
    ObservationBatch,
    generate_model,
    kl_divergence,
    load_model,
    log_likelihood_ratio_matrix,
    mean_likelihood_matrix,
    min_second_moment_eigenvalue,
    sample_observations,
    save_model,
)
from .ogl import (
    EdgeChurn,
    LearnerState,
    MsdTrace,
    RegenerateEdges,
    StateChange,
    gradient,
    initial_learner,
    kmeans_binarize,
    loss,
    msd,
    ogl_update,
    run_online,
    steady_state_bound,
    threshold_edges,
)
from .social import (
    BeliefState,
    adapt_step,
    combine_step,
    estimate_state_agent,
    estimate_states,
    initial_state,
    log_belief_matrix,
    majority_vote,
    recursion_reference,
    step,
)

__version__ = "0.1.0"
