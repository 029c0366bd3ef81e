//! Simulation core for concatenated continuous driving of a spin qubit:
//! drive-scheme Hamiltonians in the lab and rotating frames, Lindblad
//! evolution under Ornstein-Uhlenbeck noise, Monte-Carlo ensembles, and the
//! decay / fidelity analysis on top.
//!
//! `no_std` + `alloc`: all IO, parallelism and file formats live in the
//! companion binary crate.
//!
//! Unit conventions, used everywhere without further comment:
//! - time in us;
//! - user-facing frequencies cyclic in MHz, converted once via [`ang`];
//! - internal Hamiltonian coefficients angular in rad/us.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod drives;
pub mod error;
pub mod evolution;
pub mod experiments;
pub mod noise;
pub mod operator;
pub mod state;

pub use analysis::{
    bootstrap_t2, coherence, dressed_rabi_frequency, extract_envelope, fit_best_model,
    fit_envelope, gate_fidelity, snapshot_fidelity, snapshot_samples, DecayModel, FitResult,
    ProcessSample,
};
pub use drives::{
    effective_hamiltonian_order2, interaction1_hamiltonian, lab_drive_hamiltonian,
    lab_hamiltonian, rf_control_hamiltonian, transform_frame, two_qubit_hamiltonian, DriveSpec,
    FrameLabel, NoiseSample, RfControl, SchemeConfig, Variant,
};
pub use error::CoreError;
pub use evolution::{
    cf4_propagator, lindblad_rhs, pauli_pairs, run_ensemble, run_process_trajectory,
    run_state_snapshots, run_trajectory, EnsembleAccumulator, EnsembleResult, EnsembleRunner,
    Integrator, LindbladConfig, MagneticNoise, ObservableKind, ProcessSnapshot, RunPlan,
    SerialRunner, TrajectoryResult, TrajectoryRun, TwoQubitRun,
};
pub use experiments::{
    cross_validate_frames, fit_rabi_contrast, preset_dressed_control, preset_dressed_ramsey,
    preset_dressed_ramsey_t2_sweep, preset_order_scaling, preset_persistent_rabi,
    preset_single_drive_rabi, preset_two_qubit_fidelity, run_noise_selfcheck, run_preset,
    run_t2_sweep, CheckOp, CheckOutcome, ExperimentPreset, PresetOutcome, RabiFit, Recipe,
    ReferenceCheck, RunOverrides,
};
pub use noise::{derive_seed, ou_step, sample_trajectory, NoiseTrajectory, OuParams, OuSampler};
pub use operator::{pauli, project_dipolar_to_qubit, propagator, tensor, Operator, PauliAxis};
pub use state::{Ket, QuantumState};

/// Cyclic MHz -> angular rad/us.
pub const fn ang(f_mhz: f64) -> f64 {
    2.0 * core::f64::consts::PI * f_mhz
}

/// Angular rad/us -> cyclic MHz.
pub const fn cyc(w_rad_per_us: f64) -> f64 {
    w_rad_per_us / (2.0 * core::f64::consts::PI)
}
