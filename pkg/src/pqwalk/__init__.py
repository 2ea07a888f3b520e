"""Discrete-time quantum walks with persistent step lengths 1 or 2."""

__version__ = "0.1.0"

from ._accel import BACKEND
from .errors import (BoundaryOverflowError, ContractError, DataError, DomainError,
                     NormalizationError, NumericalContractError, ResourceError, WalkError)
from .lattice import (CoinOperator, WalkState, coin_apply, dense_oracle_evolve, evolve,
                      init_state, probability_at, shift_apply, step)
from .policy import (RngStream, Scheme, StepPolicy, effective_persistence, generate_sequence,
                     initial_length, next_length_scheme1, next_length_scheme2)
from .observables import (DensityMode, DistributionSnapshot, EntropyPoint, MomentPoint,
                          entanglement_entropy, moments, reduced_density, snapshot)
from .ensemble import (Accumulator, EnsembleResult, RunConfig, merge, read_result,
                       run_ensemble, run_trajectory, write_result)
