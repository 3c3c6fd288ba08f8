"""Sequential mixed-distance designs for two-layer computer experiments.

Builds experimental designs for an inner simulation code whose outputs feed a
second, outer code.  New runs are chosen where the predicted inner outputs
(principal-component scores under independent Gaussian-process surrogates) are
farthest from everything observed so far, so the design fills the outer code's
input space rather than just the original one.
"""

from .bench import (PROBLEMS, ReplicationPlan, TestProblem, branin_mod_outer,
                    camel_inner, highdim_inner, initial_design, run_replication,
                    zigzag_outer)
from .design import (DesignMatrix, LhdDesign, SlicedCandidateSet, euclidean_distance,
                     generate_lhd, generate_slhd, optimize_mmlhd, phi_q)
from .engine import (FittedSurrogates, MixedDistanceTerms, SmddConfig, SmddState,
                     acquisition_phi_q, dist_h, fit_surrogate_stack,
                     mixed_distance_outer, mixed_distance_sq_h)
from .errors import (DegenerateDistanceError, DegenerateOutputError, DesignComplete,
                     ExhaustedCandidatesError, IllConditionedError, ProtocolError,
                     SmddError, StateFileError)
from .gp import BasisSpec, GpModel, Kernel, fit_gp, kernel_eval, posterior
from .metrics import MetricReport, aid, mpv
from .pca import PcaModel, PcScores, fit_pca, realized_scores, scores, \
    select_num_pcs, standardize

__version__ = "0.1.0"

__all__ = [
    "PROBLEMS", "ReplicationPlan", "TestProblem", "branin_mod_outer",
    "camel_inner", "highdim_inner", "initial_design", "run_replication",
    "zigzag_outer", "DesignMatrix", "LhdDesign", "SlicedCandidateSet",
    "euclidean_distance", "generate_lhd", "generate_slhd", "optimize_mmlhd",
    "phi_q", "FittedSurrogates", "MixedDistanceTerms", "SmddConfig", "SmddState",
    "acquisition_phi_q", "dist_h", "fit_surrogate_stack", "mixed_distance_outer",
    "mixed_distance_sq_h", "DegenerateDistanceError", "DegenerateOutputError",
    "DesignComplete", "ExhaustedCandidatesError", "IllConditionedError",
    "ProtocolError", "SmddError", "StateFileError", "BasisSpec", "GpModel",
    "Kernel", "fit_gp", "kernel_eval", "posterior", "MetricReport", "aid", "mpv",
    "PcaModel", "PcScores", "fit_pca", "realized_scores", "scores",
    "select_num_pcs", "standardize",
]
