//! Ornstein-Uhlenbeck noise sources.
//!
//! Two physical channels share this machinery: slow magnetic (detuning)
//! noise entering the Hamiltonian as (delta_b/2) sigma_z, and relative drive
//! amplitude noise entering each drive tone as Omega_k (1 + delta_k). Both
//! are stationary OU processes, advanced with the *exact* discrete update
//!
//!   x(t+dt) = x(t) e^{-dt/tau} + sigma sqrt(1 - e^{-2dt/tau}) g,  g ~ N(0,1)
//!
//! so statistics are independent of the step size, not just in the dt -> 0
//! limit. Every channel owns its own counter-based seed, which makes
//! ensembles reproducible, order-independent and embarrassingly parallel.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Stationary OU parameters. `sigma` is the stationary standard deviation in
/// whatever unit the consumer uses (rad/us for magnetic noise, dimensionless
/// relative deviation for amplitude noise); `tau_us` is the correlation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuParams {
    pub sigma: f64,
    pub tau_us: f64,
    pub seed: u64,
}

impl OuParams {
    pub fn new(sigma: f64, tau_us: f64, seed: u64) -> Self {
        OuParams {
            sigma,
            tau_us,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(CoreError::InvalidNoise {
                reason: "sigma must be finite and >= 0",
            });
        }
        if !self.tau_us.is_finite() || self.tau_us <= 0.0 {
            return Err(CoreError::InvalidNoise {
                reason: "tau_us must be finite and > 0",
            });
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.sigma > 0.0
    }
}

// Seed-derivation channel codes. A full seed is
// derive_seed(master, CHANNEL, index) with `index` the trajectory number
// (or resample number for CH_BOOTSTRAP).
pub const CH_MAGNETIC: u64 = 1;
pub const CH_DRIVE_BASE: u64 = 16; // drive order k uses CH_DRIVE_BASE + k
pub const CH_QUBIT_B_OFFSET: u64 = 256; // second qubit's channels sit this far up
pub const CH_BOOTSTRAP: u64 = 4096;

pub const fn drive_channel(order: usize) -> u64 {
    CH_DRIVE_BASE + order as u64
}

/// SplitMix64 finalizer; a good 64-bit mixer, used purely as a hash here.
pub const fn splitmix64(z: u64) -> u64 {
    let z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based seed tree: master -> channel -> per-trajectory index.
/// Collision-free in practice and independent of execution order.
pub const fn derive_seed(master: u64, channel: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ channel) ^ index)
}

/// Exact one-step OU update.
pub fn ou_step(x: f64, dt: f64, tau_us: f64, sigma: f64, gauss: f64) -> f64 {
    let decay = libm::exp(-dt / tau_us);
    x * decay + sigma * libm::sqrt(1.0 - decay * decay) * gauss
}

/// Streaming OU sampler: drawn stationary at construction, then advanced by
/// arbitrary (positive) time increments.
#[derive(Clone, Debug)]
pub struct OuSampler {
    rng: ChaCha12Rng,
    sigma: f64,
    tau_us: f64,
    x: f64,
}

impl OuSampler {
    pub fn new(params: &OuParams) -> Result<Self, CoreError> {
        params.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
        let g: f64 = rng.sample(StandardNormal);
        Ok(OuSampler {
            rng,
            sigma: params.sigma,
            tau_us: params.tau_us,
            x: params.sigma * g,
        })
    }

    pub fn current(&self) -> f64 {
        self.x
    }

    pub fn advance(&mut self, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let g: f64 = self.rng.sample(StandardNormal);
        self.x = ou_step(self.x, dt, self.tau_us, self.sigma, g);
        self.x
    }
}

/// A realized noise path on an explicit time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseTrajectory {
    pub t_us: Vec<f64>,
    pub x: Vec<f64>,
}

/// Sample an OU path on `t_us` (strictly increasing, first point gets the
/// stationary draw).
pub fn sample_trajectory(params: &OuParams, t_us: &[f64]) -> Result<NoiseTrajectory, CoreError> {
    if t_us.is_empty() {
        return Err(CoreError::EmptyGrid);
    }
    for w in t_us.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::NonMonotoneGrid);
        }
    }
    let mut sampler = OuSampler::new(params)?;
    let mut x = Vec::with_capacity(t_us.len());
    x.push(sampler.current());
    for w in t_us.windows(2) {
        x.push(sampler.advance(w[1] - w[0]));
    }
    Ok(NoiseTrajectory {
        t_us: t_us.to_vec(),
        x,
    })
}

// ---- statistics helpers (used by the noise self-check and by tests) ----

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Normalized autocorrelation at integer lag (in samples).
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    if lag >= xs.len() {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return 0.0;
    }
    let num: f64 = xs[..xs.len() - lag]
        .iter()
        .zip(&xs[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    num / denom
}

/// Two-sample Kolmogorov-Smirnov statistic D = sup |F_a - F_b|.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max(libm::fabs(fa - fb));
    }
    d
}

/// Asymptotic two-sample KS acceptance threshold at significance `alpha`:
/// reject equality if D exceeds this.
pub fn ks_threshold(alpha: f64, n: usize, m: usize) -> f64 {
    let c = libm::sqrt(-libm::log(alpha / 2.0) / 2.0);
    c * libm::sqrt((n + m) as f64 / (n as f64 * m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ou_step_exact_decay() {
        // no stochastic part: pure exponential relaxation toward zero
        let x1 = ou_step(1.0, 0.5, 2.0, 0.0, 12345.0);
        assert_abs_diff_eq!(x1, libm::exp(-0.25), epsilon = 1e-15);
        // zero correlation survives one step: full refresh when dt >> tau
        let x2 = ou_step(1.0e6, 2000.0, 1.0, 1.0, 0.5);
        assert_abs_diff_eq!(x2, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn trajectory_deterministic_and_channel_independent() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let p1 = OuParams::new(1.3, 5.0, derive_seed(99, CH_MAGNETIC, 7));
        let a = sample_trajectory(&p1, &t).unwrap();
        let b = sample_trajectory(&p1, &t).unwrap();
        assert_eq!(a, b);

        let p2 = OuParams::new(1.3, 5.0, derive_seed(99, CH_MAGNETIC, 8));
        let c = sample_trajectory(&p2, &t).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn seed_derivation_spreads() {
        // no collisions over a realistic block of (channel, index) pairs
        let mut seen = std::collections::HashSet::new();
        for ch in [CH_MAGNETIC, drive_channel(1), drive_channel(4), CH_BOOTSTRAP] {
            for idx in 0..2000u64 {
                assert!(seen.insert(derive_seed(42, ch, idx)));
                assert!(seen.insert(derive_seed(43, ch, idx)));
            }
        }
    }

    #[test]
    fn stationary_statistics() {
        let sigma = 0.7;
        let tau = 3.0;
        let dt = 0.3;
        let n = 400_000usize;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let p = OuParams::new(sigma, tau, 2024);
        let traj = sample_trajectory(&p, &t).unwrap();

        let var = variance(&traj.x);
        assert!(
            libm::fabs(var - sigma * sigma) < 0.02 * sigma * sigma,
            "variance {var} vs {}",
            sigma * sigma
        );

        // autocorrelation at lag k: e^{-k dt / tau}
        for lag in [1usize, 5, 10, 20] {
            let expected = libm::exp(-(lag as f64) * dt / tau);
            let got = autocorrelation(&traj.x, lag);
            assert!(
                libm::fabs(got - expected) < 0.02,
                "lag {lag}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn step_size_invariance_ks() {
        // endpoint distribution after T = 5 tau must not depend on dt
        let sigma = 1.0;
        let tau = 2.0;
        let horizon = 10.0;
        let n_traj = 4000usize;
        let endpoint = |steps: usize, salt: u64| -> Vec<f64> {
            let t: Vec<f64> = (0..=steps).map(|i| i as f64 * horizon / steps as f64).collect();
            (0..n_traj)
                .map(|k| {
                    let p = OuParams::new(sigma, tau, derive_seed(7, salt, k as u64));
                    *sample_trajectory(&p, &t).unwrap().x.last().unwrap()
                })
                .collect()
        };
        let coarse = endpoint(5, 100);
        let fine = endpoint(500, 200);
        let d = ks_statistic(&coarse, &fine);
        let thr = ks_threshold(0.01, n_traj, n_traj);
        assert!(d < thr, "KS D = {d} >= {thr}");
    }

    #[test]
    fn zero_sigma_is_silent() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let p = OuParams::new(0.0, 1.0, 5);
        let traj = sample_trajectory(&p, &t).unwrap();
        assert!(traj.x.iter().all(|&x| x == 0.0));
        assert!(!p.is_active());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(OuParams::new(-1.0, 1.0, 0).validate().is_err());
        assert!(OuParams::new(1.0, 0.0, 0).validate().is_err());
        assert!(OuParams::new(1.0, f64::NAN, 0).validate().is_err());
        assert!(matches!(
            sample_trajectory(&OuParams::new(1.0, 1.0, 0), &[]),
            Err(CoreError::EmptyGrid)
        ));
        assert!(matches!(
            sample_trajectory(&OuParams::new(1.0, 1.0, 0), &[0.0, 0.0]),
            Err(CoreError::NonMonotoneGrid)
        ));
    }

    #[test]
    fn ks_detects_distinct_distributions() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..3000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..3000)
            .map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let same: Vec<f64> = (0..3000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let thr = ks_threshold(0.01, 3000, 3000);
        assert!(ks_statistic(&a, &b) > thr);
        assert!(ks_statistic(&a, &same) < thr);
    }
}
