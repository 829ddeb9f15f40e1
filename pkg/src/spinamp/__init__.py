"""Spin amplification by heteronuclear spin diffusion and field cycling."""

from .dynamics import (FlipFlop, FreeSegment, HamiltonianSettings, PulseSegment, apply_pulse,
                       assemble_hamiltonian, expectation, product_state, propagate,
                       run_trajectory, spin_operator)
from .field_cycle import (MEASURED_T1, ProtocolConfig, ProtocolResult, T1Map, Timeline,
                          build_timeline, cycle_survival, run_protocol)
from .mixing import (PoolState, StepParams, amplified_difference, gain_closed_form,
                     response_spectrum, signal_ratio, step)
from .pulse import (ShapedPulse, bloch_response, calibrate_duration, constant_pulse,
                    excitation_profile, hermite_shape)
from .spin_system import (FieldPoint, SpinSite, SpinSpecies, SpinSystem, classify_regime,
                          dipolar_coupling)

__version__ = "0.1.0"
