"""spin1topo: spin-1 monopole simulation and readout toolkit.

Submodules, roughly bottom-up:

* operators    spin-1 matrices, tensor products, gauge-fixed eigensystems
* model        momentum-space Hamiltonian and its drive-parameter form
* geometry     arrow + ellipsoid chart of pure states, angle tracks
* topology     Wilson loops, curvature, monopole charges, loop flux
* dynamics     ramp evolution (closed and dephasing), finite-time flux
* drive        rf tone compilation, demodulation, frame phase bookkeeping
* measurement  analysis pulses, photon counting, flux pipeline
* cli          `spin1topo` command-line front end

The names most users need are re-exported here.
"""

from .errors import (ConfigError, DegenerateBand, GapClosedOnLoop,
                     GapClosedOnSphere, NotConverged, NotHermitian,
                     NotPhysical, NyquistViolation, PopulationsInconsistent,
                     Spin1TopoError, StepTooLarge, TensorDegenerate,
                     UndersampledLoop, VectorDegenerate)
from .operators import SPIN_X, SPIN_Y, SPIN_Z, TENSOR_OPS
from .model import (CouplingParams, DriveParams, MomentumPoint, band_gaps,
                    drive_hamiltonian, drive_params, gap_closing_points,
                    hamiltonian_on_sphere, min_gap_on_sphere,
                    momentum_hamiltonian, sphere_eigensystem)
from .geometry import (AXIS_NOISE_FLOOR, AngleTrack, CanonicalAngles,
                       SpinMoments, TensorEllipsoid, angles_from_moments,
                       canonical_angles, covariance_tensor, ellipsoid,
                       generalized_solid_angles, guided_unwrap, moments,
                       moments_from_density, state_from_angles, unwrap_track)
from .topology import (DEFAULT_LOOP_CENTER, ChargeResult, FluxResult,
                       LoopSpec, VortexScan, berry_curvature, charge_from_fz,
                       chart_track, eigenstate_track, flux_from_track,
                       flux_scan_beta, locate_flux_jump, loop_flux,
                       monopole_charge, phase_diagram, vortex_scan,
                       wilson_loop_phase)
from .dynamics import (DephasingModel, LoopRunResult, RampSchedule,
                       adiabatic_loop_run, adiabaticity_bias, anisotropies,
                       evolve_lindblad, evolve_schrodinger,
                       track_from_moments)
from .drive import (CarrierConfig, Demodulated, DriveTrajectory, FramePhase,
                    Waveform, accumulated_phase, compile_waveforms,
                    demodulate, load_waveform, measurement_compensation,
                    resonant_frame_hamiltonian, save_waveform)
from .measurement import (AnalysisPulses, CountRecord, DetectionConfig,
                          PipelineResult, analysis_pulses,
                          bootstrap_uncertainty, bright_probability,
                          estimate_moment, expected_bright_fraction,
                          flux_measurement_pipeline, measured_moments,
                          measure_observable, pulse_unitary,
                          simulate_detection, unfold_populations)

__version__ = "0.1.0"
