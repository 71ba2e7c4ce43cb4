"""Essential-spectrum annulus estimation for steady flows on the 3-torus.

The instability of a steady flow at vanishing wavelength is carried by a
transport system along flow trajectories: position, a wave vector carried by
the inverse-transpose Jacobian, and a transverse amplitude whose exponential
stretching rates bound the essential spectrum of the evolution operator.
This package integrates that system, extracts minimal and maximal stretching
exponents over sampled initial data, and reports the resulting spectral
annulus, together with the drift audits and closed-form oracles needed to
trust the numbers.
"""

from .bas import (BasState, FiberFrame, IntegrationError, IntegratorControls,
                  StateValidationError, TrajectoryRecord, bas_rhs,
                  bas_rhs_split, hamiltonian, integrate_bas, jacobian_flow,
                  scaled_hamiltonian)
from .cocycle import (CocycleResult, ExponentSample, cocycle_matrix,
                      evolve_exponents, fiber_basis, init_fiber_frame)
from .config import VERSION, RunConfig, apply_overrides, canonical_json, load_config
from .flows import (FlowEval, FlowValidationError, FourierFlow,
                    SteadyEulerReport, check_steady_euler, eval_flow,
                    load_flow_file, make_abc_flow, make_kolmogorov_flow,
                    make_shear_flow, reduce_point)
from .spectrum import (AnnulusReport, EstimateError, GapReport, SamplePlan,
                       SpectrumEstimate, annulus, connectedness_diagnostic,
                       default_gap_resolution, estimate_spectrum,
                       fibonacci_sphere, find_stagnation_points,
                       kronecker_sequence, sample_omega, sample_omega_perp,
                       sample_stagnation_slices)
from .verify import (DriftReport, OracleState, StepHalvingStudy,
                     audit_trajectory, kolmogorov_oracle, oracle_comparison,
                     shear_oracle, step_halving_study)

__version__ = VERSION

__all__ = [
    "AnnulusReport", "BasState", "CocycleResult", "DriftReport",
    "EstimateError", "ExponentSample", "FiberFrame", "FlowEval",
    "FlowValidationError", "FourierFlow", "GapReport", "IntegrationError",
    "IntegratorControls", "OracleState", "RunConfig", "SamplePlan",
    "SpectrumEstimate", "StateValidationError", "SteadyEulerReport",
    "StepHalvingStudy", "TrajectoryRecord", "VERSION", "annulus",
    "apply_overrides", "audit_trajectory", "bas_rhs", "bas_rhs_split",
    "canonical_json", "check_steady_euler", "cocycle_matrix",
    "connectedness_diagnostic", "default_gap_resolution", "estimate_spectrum",
    "eval_flow", "evolve_exponents", "fiber_basis", "fibonacci_sphere",
    "find_stagnation_points", "hamiltonian", "init_fiber_frame",
    "integrate_bas", "jacobian_flow", "kolmogorov_oracle",
    "kronecker_sequence", "load_config", "load_flow_file", "make_abc_flow",
    "make_kolmogorov_flow", "make_shear_flow", "oracle_comparison",
    "reduce_point", "sample_omega", "sample_omega_perp",
    "sample_stagnation_slices", "scaled_hamiltonian", "shear_oracle",
    "step_halving_study", "__version__",
]
