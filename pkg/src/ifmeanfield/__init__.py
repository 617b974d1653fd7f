"""Mean-field limits of spatially extended integrate-and-fire networks.

Particle simulation, a finite-volume Fokker-Planck solver, McKean-Vlasov
sampling and the diagnostics that compare them.
"""

from .config import ExperimentConfig, load_config, parse_config, dump_config, preset
from .errors import (BudgetError, ConfigError, ContractError, DomainError, IFMeanFieldError, RangeError,
                     StepSizeError, UsageError)
from .fokker_planck import ConditionalGridDensity, discretize_initial, fp_solve, mild_residual, weak_residual_phi
from .laws import InitialLaws, PositionLaw, VoltageDensity
from .mckean_vlasov import mkv_simulate
from .model import ModelCoefficients, ThetaKernel, drift_b
from .particles import SimConfig, euler_refinement_error, euler_step, simulate
from .wasserstein import wasserstein1_joint, wasserstein1_v

__version__ = "0.1.0"
