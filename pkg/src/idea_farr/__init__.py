"""IDEA model, Farr's law and the damped SIR model, with conversions among them."""

from .errors import (DomainError, EpiModelError, EstimationError, FitError,
                     ParseError, ValidationError)
from .farr import (FarrEstimate, PooledK, ci_coverage, compute_k_series,
                   d_to_k, detect_waves, k_to_d, pool_k)
from .idea import (BrownleeParams, IdeaFit, IdeaParams, fit_idea,
                   from_brownlee, idea_curve, idea_incidence, project,
                   to_brownlee)
from .sir import (SirParams, SirTrajectory, SweepResult,
                  closed_form_small_outbreak, compare_with_idea,
                  map_rho_to_k, map_sir_to_idea, simulate_damped_sir,
                  sweep_parameter_space, trajectory_distance)
from .timeseries import (CsvSchema, GenerationSeries, RawSeries, SeriesKind,
                         aggregate_to_generations,
                         cumulative_to_pseudo_incidence, ingest_csv)

__version__ = "0.1.0"
