"""Simulation of a two-photon driven quantum-dot biexciton cascade.

The package integrates the three-level Lindblad master equation over pulse
sequences and runs Rabi, Ramsey and spin-echo experiments on it.
"""

__version__ = "0.1.0"

from .errors import (CalibrationError, FitDomainError, FitError, FitQualityError,
                     IncompleteDecayError, IntegrationFailure, InvalidArgument,
                     ModelMismatchError, NumericalError, StiffnessError)
from .qcore import DensityMatrix, Level, commutator, dissipator, populations, projector
from .model import Drive, PhysicalParams, envelope, hamiltonian, incoherent_rate, master_rhs
from .solver import (REPETITION_PERIOD, InvariantMonitor, Method, SolverConfig, Trajectory,
                     emission_probability, eventual_emission, evolve, lifetime_fit)
from .pulses import PulseSequence, calibrate_pi, echo_triple, ramsey_pair, single
from .experiments import (EfficiencyReport, FitResult, InhomogeneousNoise, VisibilityCurve,
                          calibrate_noise, echo_scan, efficiency_report, fit_decay, rabi_sweep,
                          ramsey_scan)
from ._backend import NAME as backend_name
