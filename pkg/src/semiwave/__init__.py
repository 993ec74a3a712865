"""Semiclassical wavepacket propagation with an hbar^(1/2) coefficient
cascade, optimal truncation, and a split-operator reference solver."""

from .basis import (BasisCoefficients, WavepacketFrame, apply_lowering,
                    apply_position, apply_raising, evaluate_basis,
                    evaluate_phi0, evaluate_state, frame_at)
from .classical import (ClassicalState, Trajectory, initial_state,
                        integrate_flow, linearization_check, lyapunov_fit)
from .hierarchy import (CascadeBounds, CoefficientHierarchy,
                        apply_potential_term, bound_constants,
                        integrate_hierarchy)
from .oracle import GridSpec, l2_error, propagate
from .potentials import (DecayMetadata, GaussianSum, Polynomial, decay_check,
                         double_well, free_potential, gaussian_barrier,
                         harmonic, quartic_well)
from .scattering import (AsymptoticData, classical_asymptotics,
                         coefficient_limits, smatrix_apply)
from .truncation import (EhrenfestSchedule, TruncationPlan,
                         assemble_wavefunction, choose_l, ehrenfest_schedule,
                         localization_mass, residual_norm)

__version__ = "0.1.0"
