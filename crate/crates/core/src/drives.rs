//! Drive-scheme Hamiltonians for nested continuous driving of a single spin,
//! in three frames:
//!
//! - `Lab`: carrier at omega plus all drive tones on sigma_x, static
//!   (omega/2) sigma_z splitting. Only useful for short validation runs.
//! - `Int1`: rotating frame of the carrier after the rotating-wave
//!   approximation. First drive becomes the static (Omega_1/2) sigma_x;
//!   higher orders become nested cosine envelopes. Magnetic detuning noise
//!   survives as (delta_b/2) sigma_z.
//! - `Int2`: rotating frame of the first drive. For the refined (nested
//!   amplitude-modulation) scheme this is the secular second-order effective
//!   Hamiltonian: first-order amplitude noise moves to sigma_x with
//!   coefficient (Omega_1/2) delta_1, the second drive becomes static
//!   (Omega_2/2) sigma_y, and magnetic noise averages out. For the
//!   simplified (phase-offset tone) scheme the exact transformed Hamiltonian
//!   is kept, counter-rotating terms included: at Omega_2/Omega_1 ratios of
//!   interest the counter-rotating ripple is *not* negligible, and dropping
//!   it breaks the frame cross-validation this crate performs.
//!
//! Every builder takes the instantaneous noise values as plain numbers; the
//! caller (the Lindblad stepper) owns the noise processes and holds each
//! value constant across one noise cell.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::CoreError;
use crate::operator::{propagator_unchecked, tensor, Operator};
use crate::{ang, cyc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Nested amplitude-modulated tones; admits orders 1..=4.
    Refined,
    /// Single phase-offset second tone at omega + Omega_1; order 2 only.
    Simplified,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameLabel {
    Lab,
    Int1,
    Int2,
}

impl FrameLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameLabel::Lab => "lab",
            FrameLabel::Int1 => "int1",
            FrameLabel::Int2 => "int2",
        }
    }
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Refined => "refined",
            Variant::Simplified => "simplified",
        }
    }
}

/// One drive tone: nominal amplitude (cyclic MHz, the Rabi frequency it
/// produces) plus the OU parameters of its relative amplitude noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriveSpec {
    pub omega_mhz: f64,
    /// stationary std of the *relative* amplitude error delta_k
    pub amp_sigma_rel: f64,
    pub amp_tau_us: f64,
}

impl DriveSpec {
    pub fn noiseless(omega_mhz: f64) -> Self {
        DriveSpec {
            omega_mhz,
            amp_sigma_rel: 0.0,
            amp_tau_us: 1.0,
        }
    }

    pub fn with_amp_noise(omega_mhz: f64, sigma_rel: f64, tau_us: f64) -> Self {
        DriveSpec {
            omega_mhz,
            amp_sigma_rel: sigma_rel,
            amp_tau_us: tau_us,
        }
    }

    pub fn has_noise(&self) -> bool {
        self.amp_sigma_rel > 0.0
    }
}

/// Auxiliary control tone entering on sigma_z (lab / first frame), used to
/// rotate the most-protected dressed qubit. One phase per drive order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RfControl {
    pub omega_mhz: f64,
    pub phases_rad: Vec<f64>,
}

/// Full single-qubit drive scheme.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeConfig {
    pub variant: Variant,
    /// lab carrier frequency omega (cyclic MHz); only the Lab frame uses it
    pub carrier_mhz: f64,
    /// nominal amplitudes Omega_1..Omega_K, outermost first
    pub drives: Vec<DriveSpec>,
    /// phase of the simplified scheme's second tone
    pub phi_rad: f64,
    pub rf: Option<RfControl>,
}

pub const DEFAULT_CARRIER_MHZ: f64 = 2042.0;
pub const MAX_ORDERS: usize = 4;

impl SchemeConfig {
    pub fn refined(drives_mhz: &[f64]) -> Self {
        SchemeConfig {
            variant: Variant::Refined,
            carrier_mhz: DEFAULT_CARRIER_MHZ,
            drives: drives_mhz.iter().map(|&f| DriveSpec::noiseless(f)).collect(),
            phi_rad: 0.0,
            rf: None,
        }
    }

    pub fn simplified(omega1_mhz: f64, omega2_mhz: f64, phi_rad: f64) -> Self {
        SchemeConfig {
            variant: Variant::Simplified,
            carrier_mhz: DEFAULT_CARRIER_MHZ,
            drives: alloc::vec![
                DriveSpec::noiseless(omega1_mhz),
                DriveSpec::noiseless(omega2_mhz),
            ],
            phi_rad,
            rf: None,
        }
    }

    /// Apply the same relative amplitude noise to every drive order (each
    /// order still gets an independent realization).
    pub fn with_amp_noise(mut self, sigma_rel: f64, tau_us: f64) -> Self {
        for d in &mut self.drives {
            d.amp_sigma_rel = sigma_rel;
            d.amp_tau_us = tau_us;
        }
        self
    }

    pub fn with_rf(mut self, omega_mhz: f64, phases_rad: &[f64]) -> Self {
        self.rf = Some(RfControl {
            omega_mhz,
            phases_rad: phases_rad.to_vec(),
        });
        self
    }

    pub fn with_carrier(mut self, carrier_mhz: f64) -> Self {
        self.carrier_mhz = carrier_mhz;
        self
    }

    /// Number of nested drive orders K.
    pub fn order(&self) -> usize {
        self.drives.len()
    }

    /// Omega_k in rad/us, k 1-based.
    pub fn omega_ang(&self, k: usize) -> f64 {
        ang(self.drives[k - 1].omega_mhz)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let k = self.order();
        if k == 0 {
            return Err(CoreError::MissingDrive { order: 1 });
        }
        if k > MAX_ORDERS {
            return Err(CoreError::TooManyDrives { n: k });
        }
        for (i, d) in self.drives.iter().enumerate() {
            if !(d.omega_mhz > 0.0) || !d.omega_mhz.is_finite() {
                return Err(CoreError::MissingDrive { order: i + 1 });
            }
            if d.amp_sigma_rel < 0.0 || !d.amp_sigma_rel.is_finite() || d.amp_tau_us <= 0.0 {
                return Err(CoreError::InvalidNoise {
                    reason: "drive amplitude noise needs sigma >= 0 and tau > 0",
                });
            }
        }
        if self.variant == Variant::Simplified && k != 2 {
            return Err(CoreError::SimplifiedOrder { order: k });
        }
        if let Some(rf) = &self.rf {
            if rf.phases_rad.len() != k {
                return Err(CoreError::RfPhaseCount {
                    phases: rf.phases_rad.len(),
                    orders: k,
                });
            }
            if !(rf.omega_mhz > 0.0) || !rf.omega_mhz.is_finite() {
                return Err(CoreError::InvalidNoise {
                    reason: "rf amplitude must be finite and > 0",
                });
            }
        }
        if !self.carrier_mhz.is_finite() || self.carrier_mhz < 0.0 {
            return Err(CoreError::InvalidNoise {
                reason: "carrier frequency must be finite and >= 0",
            });
        }
        Ok(())
    }

    /// Non-fatal scheme-hierarchy diagnostics: the nested construction
    /// assumes Omega_{k+1} << Omega_k, and the protected-qubit control
    /// assumes Omega_rf << Omega_K.
    pub fn hierarchy_warnings(&self) -> Vec<String> {
        use alloc::format;
        let mut out = Vec::new();
        for w in self.drives.windows(2) {
            if w[1].omega_mhz > 0.2 * w[0].omega_mhz {
                out.push(format!(
                    "drive hierarchy is weak: {} MHz under {} MHz (ratio {:.2} > 0.2); \
                     the rotating-frame averaging this scheme relies on degrades",
                    w[1].omega_mhz,
                    w[0].omega_mhz,
                    w[1].omega_mhz / w[0].omega_mhz
                ));
            }
        }
        if let (Some(rf), Some(last)) = (&self.rf, self.drives.last()) {
            if rf.omega_mhz > 0.2 * last.omega_mhz {
                out.push(format!(
                    "rf control {} MHz is not small against the innermost drive {} MHz",
                    rf.omega_mhz, last.omega_mhz
                ));
            }
        }
        out
    }

    /// Validate that `frame` makes sense for this scheme.
    pub fn check_frame(&self, frame: FrameLabel) -> Result<(), CoreError> {
        self.validate()?;
        match frame {
            FrameLabel::Lab => {
                if !(self.carrier_mhz > 0.0) {
                    return Err(CoreError::InvalidNoise {
                        reason: "lab-frame evolution needs a positive carrier frequency",
                    });
                }
                Ok(())
            }
            FrameLabel::Int1 => Ok(()),
            FrameLabel::Int2 => {
                if self.order() < 2 {
                    return Err(CoreError::OrderTooLow);
                }
                Ok(())
            }
        }
    }
}

/// Instantaneous values of all noise processes feeding one qubit's
/// Hamiltonian: relative amplitude errors per drive order plus the magnetic
/// detuning delta_b (angular, rad/us). A default value means "quiet".
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseSample {
    pub deltas: [f64; MAX_ORDERS],
    pub delta_b: f64,
}

impl NoiseSample {
    pub const QUIET: NoiseSample = NoiseSample {
        deltas: [0.0; MAX_ORDERS],
        delta_b: 0.0,
    };
}

/// Effective amplitude of order k including its noise: Omega_k (1+delta_k),
/// rad/us.
fn amp(cfg: &SchemeConfig, noise: &NoiseSample, k: usize) -> f64 {
    cfg.omega_ang(k) * (1.0 + noise.deltas[k - 1])
}

/// Nested-envelope product for order k in the first rotating frame:
/// odd k = 2k'+1 rides on the even sub-harmonics, even k = 2k' on the odd
/// ones, each with the 2^(k'-1) strength factor.
fn nested_envelope(cfg: &SchemeConfig, k: usize, t: f64) -> f64 {
    if k == 1 {
        return 0.5;
    }
    let kp = k / 2; // k' for even k; (k-1)/2 == k/2 for odd k
    let mut prod = libm::pow(2.0, kp as f64 - 1.0);
    if k % 2 == 1 {
        for j in 1..=kp {
            prod *= libm::cos(cfg.omega_ang(2 * j) * t);
        }
    } else {
        for j in 1..=kp {
            prod *= libm::cos(cfg.omega_ang(2 * j - 1) * t);
        }
    }
    prod
}

/// sigma_z control envelope Omega_rf prod_k cos(Omega_k t + phi_k), rad/us;
/// zero when no rf control is configured.
pub fn rf_control_envelope(cfg: &SchemeConfig, t: f64) -> f64 {
    match &cfg.rf {
        None => 0.0,
        Some(rf) => {
            let mut v = ang(rf.omega_mhz);
            for (k, &phi) in rf.phases_rad.iter().enumerate() {
                v *= libm::cos(cfg.omega_ang(k + 1) * t + phi);
            }
            v
        }
    }
}

/// The sigma_z control term in the lab / first rotating frame.
pub fn rf_control_hamiltonian(cfg: &SchemeConfig, t: f64) -> Operator {
    Operator::from_pauli_coefficients(0.0, 0.0, 0.0, rf_control_envelope(cfg, t))
}

/// rf control after averaging over the first drive: the phase phi_1 picks
/// the control axis in the dressed frame,
/// (Omega_rf/2) prod_{k>=2} cos(Omega_k t + phi_k) (cos(phi_1) sigma_z - sin(phi_1) sigma_y).
fn rf_int2_terms(cfg: &SchemeConfig, t: f64) -> (f64, f64) {
    match &cfg.rf {
        None => (0.0, 0.0),
        Some(rf) => {
            let mut env = 0.5 * ang(rf.omega_mhz);
            let phi1 = rf.phases_rad[0];
            for (k, &phi) in rf.phases_rad.iter().enumerate().skip(1) {
                env *= libm::cos(cfg.omega_ang(k + 1) * t + phi);
            }
            (-env * libm::sin(phi1), env * libm::cos(phi1))
        }
    }
}

/// Drive tones only (the sigma_x part of the lab Hamiltonian), rad/us.
pub fn lab_drive_hamiltonian(cfg: &SchemeConfig, t: f64, noise: &NoiseSample) -> Operator {
    let w = ang(cfg.carrier_mhz);
    let mut ax = 0.0;
    match cfg.variant {
        Variant::Refined => {
            for k in 1..=cfg.order() {
                // lab envelope is twice the rotating-frame one
                let env = 2.0 * nested_envelope(cfg, k, t) * amp(cfg, noise, k);
                let carrier = if k % 2 == 1 {
                    libm::cos(w * t)
                } else {
                    libm::cos(w * t + core::f64::consts::FRAC_PI_2)
                };
                ax += env * carrier;
            }
        }
        Variant::Simplified => {
            ax += amp(cfg, noise, 1) * libm::cos(w * t);
            let w2 = w + cfg.omega_ang(1);
            ax += amp(cfg, noise, 2) * libm::cos(w2 * t + cfg.phi_rad);
        }
    }
    Operator::from_pauli_coefficients(0.0, ax, 0.0, 0.0)
}

/// Full lab-frame Hamiltonian: splitting + detuning noise + drives + rf.
pub fn lab_hamiltonian(cfg: &SchemeConfig, t: f64, noise: &NoiseSample) -> Operator {
    let az = 0.5 * ang(cfg.carrier_mhz) + 0.5 * noise.delta_b + rf_control_envelope(cfg, t);
    lab_drive_hamiltonian(cfg, t, noise) + Operator::from_pauli_coefficients(0.0, 0.0, 0.0, az)
}

/// First rotating frame (carrier removed, RWA applied once).
pub fn interaction1_hamiltonian(cfg: &SchemeConfig, t: f64, noise: &NoiseSample) -> Operator {
    let mut ax = 0.0;
    let mut ay = 0.0;
    match cfg.variant {
        Variant::Refined => {
            for k in 1..=cfg.order() {
                let term = nested_envelope(cfg, k, t) * amp(cfg, noise, k);
                if k % 2 == 1 {
                    ax += term;
                } else {
                    ay += term;
                }
            }
        }
        Variant::Simplified => {
            ax += 0.5 * amp(cfg, noise, 1);
            let a2 = 0.5 * amp(cfg, noise, 2);
            let arg = cfg.omega_ang(1) * t + cfg.phi_rad;
            ax += a2 * libm::cos(arg);
            ay += a2 * libm::sin(arg);
        }
    }
    let az = 0.5 * noise.delta_b + rf_control_envelope(cfg, t);
    Operator::from_pauli_coefficients(0.0, ax, ay, az)
}

/// Second rotating frame (first drive removed).
///
/// Refined: secular result. The noisy part of the first drive survives as
/// (Omega_1/2) delta_1 sigma_x, order 2 becomes the static (Omega_2/2)(1+delta_2)
/// sigma_y, orders 3 and 4 keep their envelopes on sigma_x / sigma_y, and
/// magnetic noise averages out (it rotates at Omega_1, far above 1/tau_m).
///
/// Simplified: exact transform of the first-frame Hamiltonian (minus the
/// averaged-out magnetic term); keeps the counter-rotating pieces at
/// Omega_1 and 2 Omega_1.
pub fn effective_hamiltonian_order2(cfg: &SchemeConfig, t: f64, noise: &NoiseSample) -> Operator {
    debug_assert!(cfg.order() >= 2, "check_frame(Int2) first");
    let (rf_y, rf_z) = rf_int2_terms(cfg, t);
    let mut ax = 0.5 * cfg.omega_ang(1) * noise.deltas[0];
    let mut ay = rf_y;
    let mut az = rf_z;
    match cfg.variant {
        Variant::Refined => {
            ay += 0.5 * amp(cfg, noise, 2);
            if cfg.order() >= 3 {
                ax += amp(cfg, noise, 3) * libm::cos(cfg.omega_ang(2) * t);
            }
            if cfg.order() >= 4 {
                ay += amp(cfg, noise, 4) * libm::cos(cfg.omega_ang(3) * t);
            }
        }
        Variant::Simplified => {
            let a2 = amp(cfg, noise, 2);
            let w1 = cfg.omega_ang(1);
            let arg = w1 * t + cfg.phi_rad;
            ax += 0.5 * a2 * libm::cos(arg);
            ay += 0.25 * a2 * (libm::sin(cfg.phi_rad) + libm::sin(2.0 * w1 * t + cfg.phi_rad));
            az += -0.25 * a2 * (libm::cos(cfg.phi_rad) - libm::cos(2.0 * w1 * t + cfg.phi_rad));
        }
    }
    Operator::from_pauli_coefficients(0.0, ax, ay, az)
}

/// Fully time-averaged (static) second-frame Hamiltonian for an order-2
/// scheme. For the refined variant this equals
/// `effective_hamiltonian_order2`; for the simplified variant it is the
/// secular limit (Omega_2/4)(sin(phi) sigma_y - cos(phi) sigma_z) that the
/// full form oscillates around.
pub fn effective_order2_secular(cfg: &SchemeConfig, noise: &NoiseSample) -> Result<Operator, CoreError> {
    cfg.check_frame(FrameLabel::Int2)?;
    if cfg.order() != 2 {
        return Err(CoreError::SimplifiedOrder { order: cfg.order() });
    }
    let ax = 0.5 * cfg.omega_ang(1) * noise.deltas[0];
    let a2 = amp(cfg, noise, 2);
    Ok(match cfg.variant {
        Variant::Refined => Operator::from_pauli_coefficients(0.0, ax, 0.5 * a2, 0.0),
        Variant::Simplified => Operator::from_pauli_coefficients(
            0.0,
            ax,
            0.25 * a2 * libm::sin(cfg.phi_rad),
            -0.25 * a2 * libm::cos(cfg.phi_rad),
        ),
    })
}

/// Dispatch on the frame label. Call `check_frame` once before stepping.
pub fn hamiltonian(cfg: &SchemeConfig, frame: FrameLabel, t: f64, noise: &NoiseSample) -> Operator {
    match frame {
        FrameLabel::Lab => lab_hamiltonian(cfg, t, noise),
        FrameLabel::Int1 => interaction1_hamiltonian(cfg, t, noise),
        FrameLabel::Int2 => effective_hamiltonian_order2(cfg, t, noise),
    }
}

/// Fastest cyclic frequency (MHz) appearing in the Hamiltonian in the given
/// frame; 0 when it is static between noise updates. The step-size rule
/// dt <= 1/(50 f_max) keys off this.
pub fn fastest_frequency_mhz(cfg: &SchemeConfig, frame: FrameLabel) -> f64 {
    let f1 = cfg.drives[0].omega_mhz;
    match frame {
        FrameLabel::Lab => {
            cfg.carrier_mhz
                + match cfg.variant {
                    Variant::Simplified => f1,
                    Variant::Refined => f1, // tones sit within omega +/- Omega_1
                }
        }
        FrameLabel::Int1 => f1,
        FrameLabel::Int2 => match cfg.variant {
            Variant::Simplified => 2.0 * f1,
            Variant::Refined => {
                if cfg.order() >= 3 || cfg.rf.is_some() {
                    // nested envelopes (and the rf product) oscillate at Omega_2
                    cfg.drives[1].omega_mhz
                } else {
                    0.0
                }
            }
        },
    }
}

/// True when the frame Hamiltonian is constant between noise updates, so a
/// single propagator can be reused across a whole noise cell.
pub fn is_static_between_noise_updates(cfg: &SchemeConfig, frame: FrameLabel) -> bool {
    if cfg.rf.is_some() {
        return false;
    }
    match frame {
        FrameLabel::Lab => false,
        // a lone first drive leaves (Omega_1/2)(1+delta_1) sigma_x + (delta_b/2) sigma_z
        FrameLabel::Int1 => cfg.order() == 1,
        FrameLabel::Int2 => cfg.variant == Variant::Refined && cfg.order() == 2,
    }
}

// ---- frame changes ----

/// Generator removed when passing from `frame` to the next deeper one.
fn frame_generator(cfg: &SchemeConfig, from: FrameLabel) -> Operator {
    match from {
        FrameLabel::Lab => {
            Operator::from_pauli_coefficients(0.0, 0.0, 0.0, 0.5 * ang(cfg.carrier_mhz))
        }
        FrameLabel::Int1 => Operator::from_pauli_coefficients(0.0, 0.5 * cfg.omega_ang(1), 0.0, 0.0),
        FrameLabel::Int2 => unreachable!(),
    }
}

fn frame_level(f: FrameLabel) -> usize {
    match f {
        FrameLabel::Lab => 0,
        FrameLabel::Int1 => 1,
        FrameLabel::Int2 => 2,
    }
}

/// Unitary V with rho_to = V rho_from V^dag at time t. Deeper frames rotate
/// *with* the noiseless generators: V(int_{n+1} <- int_n) = e^{+i H0_n t}.
pub fn frame_change_unitary(
    cfg: &SchemeConfig,
    from: FrameLabel,
    to: FrameLabel,
    t_us: f64,
) -> Result<Operator, CoreError> {
    cfg.check_frame(from)?;
    cfg.check_frame(to)?;
    let (a, b) = (frame_level(from), frame_level(to));
    if a == b {
        return Ok(Operator::identity(2));
    }
    let levels = [FrameLabel::Lab, FrameLabel::Int1, FrameLabel::Int2];
    let mut v = Operator::identity(2);
    if b > a {
        for lvl in a..b {
            // e^{+i H0 t} = propagator of H0 over -t
            v = propagator_unchecked(&frame_generator(cfg, levels[lvl]), -t_us) * v;
        }
    } else {
        for lvl in (b..a).rev() {
            v = propagator_unchecked(&frame_generator(cfg, levels[lvl]), t_us) * v;
        }
    }
    Ok(v)
}

/// Map a state between frames at time t.
pub fn transform_frame(
    state: &crate::state::QuantumState,
    cfg: &SchemeConfig,
    from: FrameLabel,
    to: FrameLabel,
    t_us: f64,
) -> Result<crate::state::QuantumState, CoreError> {
    let v = frame_change_unitary(cfg, from, to, t_us)?;
    let mut out = *state;
    out.evolve_unitary(&v);
    Ok(out)
}

// ---- two-qubit ----

/// Validate a qubit pair for evolution in `frame`.
pub fn check_two_qubit(
    a: &SchemeConfig,
    b: &SchemeConfig,
    frame: FrameLabel,
) -> Result<(), CoreError> {
    a.check_frame(frame)?;
    b.check_frame(frame)?;
    match frame {
        FrameLabel::Lab => Err(CoreError::UnsupportedFrameTransform),
        FrameLabel::Int1 => Ok(()),
        FrameLabel::Int2 => {
            if a.drives[0].omega_mhz != b.drives[0].omega_mhz {
                Err(CoreError::UnequalFirstDrives {
                    a: a.drives[0].omega_mhz,
                    b: b.drives[0].omega_mhz,
                })
            } else {
                Ok(())
            }
        }
    }
}

fn embed(op: &Operator, right: bool) -> Operator {
    let id = Operator::identity(2);
    if right {
        tensor(&id, op)
    } else {
        tensor(op, &id)
    }
}

/// Coupled pair. First frame: full dipolar projection plus each qubit's
/// first-frame Hamiltonian. Second frame: averaging over the common first
/// drive turns the coupling into (J/4)(sigma_y sigma_y + sigma_z sigma_z)
/// and removes the single-qubit sigma_z pieces.
pub fn two_qubit_hamiltonian(
    cfg_a: &SchemeConfig,
    cfg_b: &SchemeConfig,
    j_mhz: f64,
    frame: FrameLabel,
    t: f64,
    noise_a: &NoiseSample,
    noise_b: &NoiseSample,
) -> Operator {
    match frame {
        FrameLabel::Lab => unreachable!("check_two_qubit rejects lab-frame pairs"),
        FrameLabel::Int1 => {
            crate::operator::project_dipolar_to_qubit(j_mhz)
                + embed(&interaction1_hamiltonian(cfg_a, t, noise_a), false)
                + embed(&interaction1_hamiltonian(cfg_b, t, noise_b), true)
        }
        FrameLabel::Int2 => {
            two_qubit_coupling_int2(j_mhz)
                + embed(&effective_hamiltonian_order2(cfg_a, t, noise_a), false)
                + embed(&effective_hamiltonian_order2(cfg_b, t, noise_b), true)
        }
    }
}

/// (J/4)(sigma_y sigma_y + sigma_z sigma_z), rad/us. Spectrum
/// {+J/2, 0, 0, -J/2} (angular): the Bell states psi_plus/phi_plus are the
/// zero modes.
pub fn two_qubit_coupling_int2(j_mhz: f64) -> Operator {
    let sy = crate::operator::pauli(crate::operator::PauliAxis::Y);
    let sz = crate::operator::pauli(crate::operator::PauliAxis::Z);
    (tensor(&sy, &sy) + tensor(&sz, &sz)) * (0.25 * ang(j_mhz))
}

/// Per-qubit frame-change unitary applied to both tensor factors.
pub fn two_qubit_frame_change(
    cfg_a: &SchemeConfig,
    cfg_b: &SchemeConfig,
    from: FrameLabel,
    to: FrameLabel,
    t_us: f64,
) -> Result<Operator, CoreError> {
    let va = frame_change_unitary(cfg_a, from, to, t_us)?;
    let vb = frame_change_unitary(cfg_b, from, to, t_us)?;
    Ok(tensor(&va, &vb))
}

/// Convenience: cyclic MHz of the given drive order's nominal amplitude.
pub fn drive_mhz(cfg: &SchemeConfig, k: usize) -> f64 {
    cyc(cfg.omega_ang(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{pauli, PauliAxis};
    use crate::state::Ket;
    use approx::assert_abs_diff_eq;

    fn h02(cfg: &SchemeConfig) -> Operator {
        Operator::from_pauli_coefficients(0.0, 0.5 * cfg.omega_ang(1), 0.0, 0.0)
    }

    /// exact second-frame Hamiltonian V H1 V^dag - H0 for comparison
    fn int2_exact(cfg: &SchemeConfig, t: f64, noise: &NoiseSample) -> Operator {
        let v = frame_change_unitary(cfg, FrameLabel::Int1, FrameLabel::Int2, t).unwrap();
        v * interaction1_hamiltonian(cfg, t, noise) * v.adjoint() - h02(cfg)
    }

    #[test]
    fn refined_first_frame_spot_values() {
        let cfg = SchemeConfig::refined(&[40.0, 4.0, 0.5, 0.0625]);
        cfg.validate().unwrap();
        let noise = NoiseSample {
            deltas: [0.01, -0.02, 0.03, 0.05],
            delta_b: 0.7,
        };
        let t = 0.0137;
        let h = interaction1_hamiltonian(&cfg, t, &noise);
        let (w1, w2, w3, w4) = (ang(40.0), ang(4.0), ang(0.5), ang(0.0625));
        let ax = 0.5 * w1 * 1.01 + w3 * 1.03 * libm::cos(w2 * t);
        let ay = w2 * 0.98 * libm::cos(w1 * t)
            + 2.0 * w4 * 1.05 * libm::cos(w1 * t) * libm::cos(w3 * t);
        let expected = Operator::from_pauli_coefficients(0.0, ax, ay, 0.35);
        assert!(h.max_abs_diff(&expected) < 1e-12);
        assert!(h.hermiticity_dev() < 1e-15);
    }

    #[test]
    fn refined_second_frame_spot_values() {
        let cfg = SchemeConfig::refined(&[40.0, 4.0, 0.5, 0.0625]);
        let noise = NoiseSample {
            deltas: [0.01, -0.02, 0.03, 0.05],
            delta_b: 0.7, // must be absent below
        };
        let t = 0.0531;
        let h = effective_hamiltonian_order2(&cfg, t, &noise);
        let (w1, w2, w3, w4) = (ang(40.0), ang(4.0), ang(0.5), ang(0.0625));
        let ax = 0.5 * w1 * 0.01 + w3 * 1.03 * libm::cos(w2 * t);
        let ay = 0.5 * w2 * 0.98 + w4 * 1.05 * libm::cos(w3 * t);
        let expected = Operator::from_pauli_coefficients(0.0, ax, ay, 0.0);
        assert!(h.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn simplified_second_frame_is_exact_transform() {
        // the implemented simplified Int2 Hamiltonian must equal
        // V H1 V^dag - H0 exactly (up to the averaged-out magnetic term)
        let cfg = SchemeConfig::simplified(20.0, 2.0, 0.7);
        let noise = NoiseSample {
            deltas: [0.013, -0.024, 0.0, 0.0],
            delta_b: 0.0,
        };
        for i in 0..40 {
            let t = 0.123 * i as f64;
            let direct = effective_hamiltonian_order2(&cfg, t, &noise);
            let exact = int2_exact(&cfg, t, &noise);
            assert!(
                direct.max_abs_diff(&exact) < 1e-10,
                "t = {t}: diff {}",
                direct.max_abs_diff(&exact)
            );
        }
    }

    #[test]
    fn refined_second_frame_is_secular_average() {
        // K = 3 ladder with exact common period: averaging the exact
        // transform over one innermost period must land on the static part
        // of the implemented Hamiltonian, with all oscillating terms gone.
        let cfg = SchemeConfig::refined(&[16.0, 2.0, 0.25]);
        let noise = NoiseSample {
            deltas: [0.02, -0.01, 0.04, 0.0],
            delta_b: 1.3,
        };
        let period = 1.0 / 0.25; // 2pi/Omega_3 in us
        let n = 32768usize;
        let mut avg = Operator::zeros(2);
        for i in 0..n {
            let t = period * i as f64 / n as f64;
            avg = avg + int2_exact(&cfg, t, &noise) * (1.0 / n as f64);
        }
        let (w1, w2) = (ang(16.0), ang(2.0));
        let expected =
            Operator::from_pauli_coefficients(0.0, 0.5 * w1 * 0.02, 0.5 * w2 * 0.99, 0.0);
        assert!(
            avg.max_abs_diff(&expected) < 1e-6 * w1,
            "diff {}",
            avg.max_abs_diff(&expected)
        );
        // and the implemented form averages to the same static part
        let mut avg_impl = Operator::zeros(2);
        for i in 0..n {
            let t = period * i as f64 / n as f64;
            avg_impl = avg_impl + effective_hamiltonian_order2(&cfg, t, &noise) * (1.0 / n as f64);
        }
        assert!(avg_impl.max_abs_diff(&expected) < 1e-9 * w1);
    }

    #[test]
    fn simplified_secular_limit() {
        let w2 = ang(2.0);
        for (phi, ay, az) in [
            (0.0, 0.0, -0.25 * w2),
            (core::f64::consts::FRAC_PI_2, 0.25 * w2, 0.0),
        ] {
            let cfg = SchemeConfig::simplified(20.0, 2.0, phi);
            let h = effective_order2_secular(&cfg, &NoiseSample::QUIET).unwrap();
            let expected = Operator::from_pauli_coefficients(0.0, 0.0, ay, az);
            assert!(h.max_abs_diff(&expected) < 1e-12, "phi = {phi}");
        }
        // refined secular = (Omega_2/2) sigma_y
        let cfg = SchemeConfig::refined(&[20.0, 2.0]);
        let h = effective_order2_secular(&cfg, &NoiseSample::QUIET).unwrap();
        assert!(h
            .max_abs_diff(&Operator::from_pauli_coefficients(0.0, 0.0, 0.5 * w2, 0.0))
            < 1e-12);
    }

    #[test]
    fn lab_frame_reduces_to_first_frame_under_rwa() {
        // Omega_1/omega = 1/50; overlap loss from the dropped
        // counter-rotating terms is O((Omega_1/omega)^2)
        let cfg = SchemeConfig::refined(&[8.0]).with_carrier(400.0);
        let ratio: f64 = 8.0 / 400.0;
        let f_max = fastest_frequency_mhz(&cfg, FrameLabel::Lab);
        assert_abs_diff_eq!(f_max, 408.0);
        let dt = 1.0 / (50.0 * f_max);
        let horizon = 2.0 / 8.0; // two Rabi periods
        let steps = (horizon / dt) as usize;

        let mut lab = Ket::down();
        let mut int1 = Ket::down();
        let mut min_overlap: f64 = 1.0;
        for s in 0..steps {
            let tm = (s as f64 + 0.5) * dt;
            lab = lab.apply(&propagator_unchecked(
                &lab_hamiltonian(&cfg, tm, &NoiseSample::QUIET),
                dt,
            ));
            int1 = int1.apply(&propagator_unchecked(
                &interaction1_hamiltonian(&cfg, tm, &NoiseSample::QUIET),
                dt,
            ));
            let t = (s + 1) as f64 * dt;
            let v = frame_change_unitary(&cfg, FrameLabel::Lab, FrameLabel::Int1, t).unwrap();
            let mapped = lab.apply(&v);
            let overlap = mapped.inner(&int1).norm();
            min_overlap = min_overlap.min(overlap * overlap);
        }
        assert!(
            min_overlap >= 1.0 - 10.0 * ratio * ratio,
            "min overlap {min_overlap}"
        );
        // and the first frame actually Rabi-oscillates: after half a period
        // the bare populations have inverted
        let mut k = Ket::down();
        let h = interaction1_hamiltonian(&cfg, 0.0, &NoiseSample::QUIET);
        k = k.apply(&propagator_unchecked(&h, 0.5 / 8.0));
        assert!(crate::state::QuantumState::from_ket(&k).basis_population(0) > 0.999);
    }

    #[test]
    fn frame_changes_compose_and_invert() {
        let cfg = SchemeConfig::refined(&[40.0, 4.0]);
        let t = 0.77;
        let v02 = frame_change_unitary(&cfg, FrameLabel::Lab, FrameLabel::Int2, t).unwrap();
        let v01 = frame_change_unitary(&cfg, FrameLabel::Lab, FrameLabel::Int1, t).unwrap();
        let v12 = frame_change_unitary(&cfg, FrameLabel::Int1, FrameLabel::Int2, t).unwrap();
        assert!((v12 * v01).max_abs_diff(&v02) < 1e-12);
        let v20 = frame_change_unitary(&cfg, FrameLabel::Int2, FrameLabel::Lab, t).unwrap();
        assert!((v20 * v02).max_abs_diff(&Operator::identity(2)) < 1e-12);
        assert!(v02.unitarity_dev() < 1e-12);
        // same frame = identity
        let vid = frame_change_unitary(&cfg, FrameLabel::Int1, FrameLabel::Int1, t).unwrap();
        assert!(vid.max_abs_diff(&Operator::identity(2)) < 1e-15);
    }

    #[test]
    fn bare_state_seen_from_second_frame() {
        // V(int1 -> int2) |down> = cos(Omega_1 t/2)|down> + i sin|up>
        let cfg = SchemeConfig::refined(&[40.0, 4.0]);
        let w1 = cfg.omega_ang(1);
        for i in 0..10 {
            let t = 0.031 * i as f64;
            let v = frame_change_unitary(&cfg, FrameLabel::Int1, FrameLabel::Int2, t).unwrap();
            let chi = Ket::down().apply(&v);
            let th = 0.5 * w1 * t;
            assert!((chi.get(1) - num_complex::Complex64::new(libm::cos(th), 0.0)).norm() < 1e-12);
            assert!((chi.get(0) - num_complex::Complex64::new(0.0, libm::sin(th))).norm() < 1e-12);
        }
    }

    #[test]
    fn rf_control_axes() {
        // phi_1 = 0: control along sigma_z; phi_1 = pi/2: along -sigma_y
        let w_rf = ang(0.1);
        let cfg = SchemeConfig::refined(&[40.0, 4.0]).with_rf(0.1, &[0.0, 0.0]);
        let h = effective_hamiltonian_order2(&cfg, 0.0, &NoiseSample::QUIET);
        let expected =
            Operator::from_pauli_coefficients(0.0, 0.0, 0.5 * ang(4.0), 0.5 * w_rf);
        assert!(h.max_abs_diff(&expected) < 1e-12);

        let cfg = SchemeConfig::refined(&[40.0, 4.0])
            .with_rf(0.1, &[core::f64::consts::FRAC_PI_2, 0.0]);
        let h = effective_hamiltonian_order2(&cfg, 0.0, &NoiseSample::QUIET);
        let expected =
            Operator::from_pauli_coefficients(0.0, 0.0, 0.5 * ang(4.0) - 0.5 * w_rf, 0.0);
        assert!(h.max_abs_diff(&expected) < 1e-12);

        // first-frame envelope: product of all order cosines
        let cfg = SchemeConfig::refined(&[40.0, 4.0]).with_rf(0.1, &[0.3, 0.6]);
        let t = 0.0193;
        let env = rf_control_envelope(&cfg, t);
        let expected =
            w_rf * libm::cos(ang(40.0) * t + 0.3) * libm::cos(ang(4.0) * t + 0.6);
        assert_abs_diff_eq!(env, expected, epsilon = 1e-12);
        assert!(rf_control_hamiltonian(&cfg, t)
            .max_abs_diff(&Operator::from_pauli_coefficients(0.0, 0.0, 0.0, expected))
            < 1e-12);
    }

    #[test]
    fn two_qubit_spectrum_and_embedding() {
        // coupling spectrum: {+J/2, 0, 0, -J/2} angular
        let j_mhz = 0.05;
        let j = ang(j_mhz);
        let hc = two_qubit_coupling_int2(j_mhz);
        let evals = hc.eigvalsh();
        assert_abs_diff_eq!(evals[0], -0.5 * j, epsilon = 1e-12);
        assert_abs_diff_eq!(evals[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evals[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evals[3], 0.5 * j, epsilon = 1e-12);

        // full second-frame pair Hamiltonian with quiet noise is the ideal
        // gate generator: coupling + (Omega_2/2) sigma_y on each qubit
        let a = SchemeConfig::refined(&[40.0, 40.0 / 30.0]);
        let b = SchemeConfig::refined(&[40.0, 40.0 / 30.0]);
        check_two_qubit(&a, &b, FrameLabel::Int2).unwrap();
        let h = two_qubit_hamiltonian(&a, &b, j_mhz, FrameLabel::Int2, 1.23, &NoiseSample::QUIET, &NoiseSample::QUIET);
        let sy = pauli(PauliAxis::Y);
        let id = Operator::identity(2);
        let w2h = 0.5 * ang(40.0 / 30.0);
        let ideal = hc + tensor(&sy, &id) * w2h + tensor(&id, &sy) * w2h;
        assert!(h.max_abs_diff(&ideal) < 1e-12);

        // first-frame pair: dipolar part plus embedded single-qubit terms
        let h1 = two_qubit_hamiltonian(&a, &b, j_mhz, FrameLabel::Int1, 0.37, &NoiseSample::QUIET, &NoiseSample::QUIET);
        let expect1 = crate::operator::project_dipolar_to_qubit(j_mhz)
            + tensor(&interaction1_hamiltonian(&a, 0.37, &NoiseSample::QUIET), &id)
            + tensor(&id, &interaction1_hamiltonian(&b, 0.37, &NoiseSample::QUIET));
        assert!(h1.max_abs_diff(&expect1) < 1e-12);
    }

    #[test]
    fn config_validation_errors() {
        assert!(matches!(
            SchemeConfig::refined(&[]).validate(),
            Err(CoreError::MissingDrive { order: 1 })
        ));
        assert!(matches!(
            SchemeConfig::refined(&[40.0, 4.0, 0.5, 0.06, 0.008]).validate(),
            Err(CoreError::TooManyDrives { n: 5 })
        ));
        let mut bad = SchemeConfig::simplified(20.0, 2.0, 0.0);
        bad.drives.push(DriveSpec::noiseless(0.2));
        assert!(matches!(
            bad.validate(),
            Err(CoreError::SimplifiedOrder { order: 3 })
        ));
        assert!(matches!(
            SchemeConfig::refined(&[40.0, 4.0]).with_rf(0.1, &[0.0]).validate(),
            Err(CoreError::RfPhaseCount { phases: 1, orders: 2 })
        ));
        assert!(matches!(
            SchemeConfig::refined(&[40.0]).check_frame(FrameLabel::Int2),
            Err(CoreError::OrderTooLow)
        ));
        let a = SchemeConfig::refined(&[40.0, 4.0]);
        let b = SchemeConfig::refined(&[20.0, 4.0]);
        assert!(matches!(
            check_two_qubit(&a, &b, FrameLabel::Int2),
            Err(CoreError::UnequalFirstDrives { .. })
        ));
        assert!(check_two_qubit(&a, &b, FrameLabel::Int1).is_ok());
        assert!(check_two_qubit(&a, &b, FrameLabel::Lab).is_err());

        let warn = SchemeConfig::refined(&[40.0, 20.0]).hierarchy_warnings();
        assert_eq!(warn.len(), 1);
        assert!(SchemeConfig::refined(&[40.0, 1.3]).hierarchy_warnings().is_empty());
    }

    #[test]
    fn fastest_frequencies() {
        let r = SchemeConfig::refined(&[40.0, 4.0]).with_carrier(2042.0);
        assert_abs_diff_eq!(fastest_frequency_mhz(&r, FrameLabel::Lab), 2082.0);
        assert_abs_diff_eq!(fastest_frequency_mhz(&r, FrameLabel::Int1), 40.0);
        assert_abs_diff_eq!(fastest_frequency_mhz(&r, FrameLabel::Int2), 0.0);
        assert!(is_static_between_noise_updates(&r, FrameLabel::Int2));

        let r3 = SchemeConfig::refined(&[40.0, 4.0, 0.5]);
        assert_abs_diff_eq!(fastest_frequency_mhz(&r3, FrameLabel::Int2), 4.0);
        assert!(!is_static_between_noise_updates(&r3, FrameLabel::Int2));

        let s = SchemeConfig::simplified(20.0, 2.0, 0.0);
        assert_abs_diff_eq!(fastest_frequency_mhz(&s, FrameLabel::Int2), 40.0);
        assert_abs_diff_eq!(fastest_frequency_mhz(&s, FrameLabel::Int1), 20.0);

        let rf = SchemeConfig::refined(&[40.0, 4.0]).with_rf(0.1, &[0.0, 0.0]);
        assert_abs_diff_eq!(fastest_frequency_mhz(&rf, FrameLabel::Int2), 4.0);
        assert!(!is_static_between_noise_updates(&rf, FrameLabel::Int2));
    }

    #[test]
    fn consecutive_drive_axes_are_orthogonal() {
        // read each order's drive axis off the noiseless constructions: the
        // hierarchy alternates sigma_x / sigma_y, so consecutive axes must be
        // trace-orthogonal
        let q = &NoiseSample::QUIET;
        let lv = [40.0, 4.0, 0.4, 0.04];
        let axis = |h: Operator| {
            let n = 0.5 / h.max_abs();
            h.scaled(num_complex::Complex64::new(n, 0.0))
        };
        let a1 = axis(interaction1_hamiltonian(
            &SchemeConfig::refined(&lv[..1]),
            0.0,
            q,
        ));
        let a2 = axis(effective_order2_secular(&SchemeConfig::refined(&lv[..2]), q).unwrap());
        // orders 3 and 4 enter the second-frame Hamiltonian as tones on top
        // of the order-2 scheme; isolate each by differencing
        let d3 = effective_hamiltonian_order2(&SchemeConfig::refined(&lv[..3]), 0.0, q)
            - effective_hamiltonian_order2(&SchemeConfig::refined(&lv[..2]), 0.0, q);
        let d4 = effective_hamiltonian_order2(&SchemeConfig::refined(&lv), 0.0, q)
            - effective_hamiltonian_order2(&SchemeConfig::refined(&lv[..3]), 0.0, q);
        let (a3, a4) = (axis(d3), axis(d4));
        assert!(a1.max_abs_diff(&pauli(PauliAxis::X).scaled(num_complex::Complex64::new(0.5, 0.0))) < 1e-12);
        assert!(a2.max_abs_diff(&pauli(PauliAxis::Y).scaled(num_complex::Complex64::new(0.5, 0.0))) < 1e-12);
        assert!(a3.max_abs_diff(&pauli(PauliAxis::X).scaled(num_complex::Complex64::new(0.5, 0.0))) < 1e-12);
        assert!(a4.max_abs_diff(&pauli(PauliAxis::Y).scaled(num_complex::Complex64::new(0.5, 0.0))) < 1e-12);
        for pair in [[a1, a2], [a2, a3], [a3, a4]] {
            assert!((pair[0] * pair[1]).trace().norm() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn constructed_hamiltonians_are_hermitian(
            k in 1usize..=4,
            use_simplified in proptest::bool::ANY,
            w1 in 5.0f64..80.0,
            ratio in 0.01f64..0.2,
            phi in 0.0f64..6.3,
            t in 0.0f64..20.0,
            db in -0.5f64..0.5,
            d in -0.01f64..0.01,
            frame_pick in 0usize..3,
        ) {
            let mut drives = alloc::vec![w1];
            for _ in 1..k {
                drives.push(drives[drives.len() - 1] * ratio);
            }
            let cfg = if use_simplified && k >= 2 {
                SchemeConfig::simplified(drives[0], drives[1], phi)
            } else {
                SchemeConfig::refined(&drives)
            };
            cfg.validate().unwrap();
            let noise = NoiseSample {
                deltas: [d, -d, d, -d],
                delta_b: db,
            };
            let frame = match frame_pick {
                0 => FrameLabel::Lab,
                1 => FrameLabel::Int1,
                _ => FrameLabel::Int2,
            };
            if cfg.check_frame(frame).is_ok() {
                let h = hamiltonian(&cfg, frame, t, &noise);
                proptest::prop_assert!(h.hermiticity_dev() < 1e-12);
            }
            if frame != FrameLabel::Lab && check_two_qubit(&cfg, &cfg, frame).is_ok() {
                let h2 = two_qubit_hamiltonian(&cfg, &cfg, 0.05, frame, t, &noise, &noise);
                proptest::prop_assert!(h2.hermiticity_dev() < 1e-12);
            }
        }
    }
}
