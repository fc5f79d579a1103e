"""Hidden-walk scenery simulation and reconstruction.

A symmetric aperiodic random walk on the integers draws one observation
per step from a site-attached probability law; all but finitely many
sites carry a common reference law.  This package simulates the
observation stream and reconstructs the deviating site laws, up to a
shift and reflection, from the observations alone: time-gap moments are
estimated by weighted block averages, converted to distance-indexed
moments through the left inverse of a transition-probability matrix,
and fed to an inward endpoint-first recursion.
"""

from .errors import (AlphabetMismatch, AmbiguousPairing, Asymmetric, ConfigError,
                     DegenerateEndpoint, DimensionMismatch, EmptyScenery,
                     HorizonTooSmall, InconsistentProfiles, InsufficientObservations,
                     InvalidIncrementLaw, NegativeDiscriminant, NoSeparatingFunction,
                     NoSignal, NotCentered, NotNormalized, OddWidth, Periodic,
                     RankNotReached, SceneryScopeError)
from .lattice_walk import (IncrementLaw, TransitionRow, law_from_json,
                           return_probability, step_distribution, validate, weight)
from .moments import (BlockSchedule, PVector, block_estimate, estimate_ell,
                      estimate_p, exact_block_mean, exact_p, exact_p_vector,
                      make_schedule)
from .reconstruct import (BruteForceQ, EstimatedQ, ExactPipelineQ, ExactSource,
                          ObservedSource, ProfilePair, ReconstructConfig,
                          ReconstructionResult, Tolerances, center_value, endpoints,
                          interior_pair, merge_profiles, reconstruct_scenery,
                          recover_profile, recover_profile_general, resolve_pairing,
                          select_auxiliary)
from .scenery import (Alphabet, BracketSequence, COIN_ALPHABET, CoinScenery, Scenery,
                      SiteLaw, TestFunction, bounds, brute_force_Q, canonical_bracket,
                      center, coin_law, fair_coin_law, identity_function,
                      indicator_functions, mean_of, reflect, scenery_from_json,
                      scenery_to_json, shift, site_means)
from .sim import ObservationStream, observe, read_observations, sample_walk, write_observations
from .tensor_algebra import (MomentMatrix, QTensor, build_M, choose_r,
                             solve_Q, solve_Q_entry_exact, srw_submatrix_check)

__version__ = "0.1.0"
