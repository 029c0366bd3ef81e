use thiserror::Error;

/// Everything that can go wrong inside the simulation core.
///
/// The CLI maps these onto exit codes: configuration/validation problems are
/// distinguished from numerical invariant violations by the variant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("operator is not Hermitian (max |H - H^dag| = {dev:.3e})")]
    NotHermitian { dev: f64 },

    #[error("dimension mismatch: {a} vs {b}")]
    DimensionMismatch { a: usize, b: usize },

    #[error("unsupported operator dimension {dim} (only 2 and 4)")]
    UnsupportedDimension { dim: usize },

    #[error("invalid noise parameters: {reason}")]
    InvalidNoise { reason: &'static str },

    #[error("empty time grid")]
    EmptyGrid,

    #[error("time grid is not strictly increasing")]
    NonMonotoneGrid,

    #[error("drive orders must be contiguous starting at 1")]
    NonContiguousOrders,

    #[error("at most 4 nested drive orders are supported (got {n})")]
    TooManyDrives { n: usize },

    #[error("simplified drive variant is only defined for order 2 (got order {order})")]
    SimplifiedOrder { order: usize },

    #[error("rf control needs one phase per drive order ({phases} phases, {orders} orders)")]
    RfPhaseCount { phases: usize, orders: usize },

    #[error("frame transform between these frames is not supported (levels differ by more than one)")]
    UnsupportedFrameTransform,

    #[error("scheme has no drive of order {order}")]
    MissingDrive { order: usize },

    #[error("second-order effective Hamiltonian requires a scheme of order >= 2")]
    OrderTooLow,

    #[error("two-qubit evolution in the doubly-dressed frame requires equal first-drive amplitudes ({a} vs {b} MHz)")]
    UnequalFirstDrives { a: f64, b: f64 },

    #[error("timestep {dt_us:.3e} us exceeds the resolution limit {max_us:.3e} us (= 1/(50 f_max))")]
    TimestepTooLarge { dt_us: f64, max_us: f64 },

    #[error("timestep must be positive and finite")]
    InvalidTimestep,

    #[error("horizon must be positive and finite")]
    InvalidHorizon,

    #[error("state invariant violated at t = {t_us:.4} us: {which} = {value:.3e}")]
    StateInvariant {
        which: &'static str,
        value: f64,
        t_us: f64,
    },

    #[error("reference state is not pure (purity = {purity:.6})")]
    MixedReference { purity: f64 },

    #[error("not enough usable data points for the fit ({n})")]
    InsufficientData { n: usize },

    #[error("fit did not converge: {reason}")]
    FitDiverged { reason: &'static str },

    #[error("no spectral peak above the noise floor")]
    NoSpectralPeak,

    #[error("window contains ~{periods:.1} oscillation periods; need at least {needed}")]
    TooFewPeriods { periods: f64, needed: usize },

    #[error("spectral estimate needs a uniform time grid")]
    NonUniformGrid,

    #[error("missing process-tomography sample for Pauli pair ({mu},{nu})")]
    MissingBasisSample { mu: usize, nu: usize },

    #[error("frame cross-validation failed: min state fidelity {fidelity:.6} < {required:.6} over the validation window")]
    CrossValidationFailed { fidelity: f64, required: f64 },
}

impl CoreError {
    /// True for errors that indicate a broken run (numerical invariant
    /// violations) rather than a rejected configuration.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            CoreError::StateInvariant { .. }
                | CoreError::CrossValidationFailed { .. }
                | CoreError::NotHermitian { .. }
                | CoreError::TimestepTooLarge { .. }
        )
    }
}
