"""Unadjusted Hamiltonian Monte Carlo with a stratified Monte Carlo time integrator."""

from .integrators import (
    IntegratorParams,
    PhasePoint,
    Trajectory,
    exact_flow_gaussian,
    hamiltonian,
    smc_step,
    smc_trajectory,
    stratum_average_force,
    two_stage_step,
    verlet_step,
)
from .potentials import PotentialModel, parse_model
from .randomness import RandomStream, make_stream, trial_streams
from .samplers import (
    adjusted_hmc_step,
    exact_hmc_step,
    randomized_uhmc_run,
    tune_randomized,
    tune_uhmc,
    uhmc_chain,
    uhmc_step,
)

__all__ = [
    "IntegratorParams", "PhasePoint", "PotentialModel", "RandomStream", "Trajectory",
    "adjusted_hmc_step", "exact_flow_gaussian", "exact_hmc_step", "hamiltonian",
    "make_stream", "parse_model", "randomized_uhmc_run", "smc_step", "smc_trajectory",
    "stratum_average_force", "trial_streams", "tune_randomized", "tune_uhmc",
    "two_stage_step", "uhmc_chain", "uhmc_step", "verlet_step",
]
__version__ = "0.1.0"
