//! Post-processing: coherence curves, decay-envelope fits and T2, spectral
//! frequency estimates, and two-qubit average gate fidelity.
//!
//! All fits here are deliberately simple and transparent: free-amplitude
//! log-linear least squares on extracted envelopes. Confidence intervals
//! come from a nonparametric bootstrap over ensemble realizations (1000
//! resamples, percentile method) with a slope-variance delta-method
//! fallback when no per-realization data is retained.

use alloc::vec::Vec;

use serde::Serialize;

use crate::error::CoreError;
use crate::evolution::{pauli_pairs, EnsembleResult, ObservableKind, ProcessSnapshot};
use crate::noise::{derive_seed, splitmix64, CH_BOOTSTRAP};
use crate::operator::Operator;
use crate::state::QuantumState;

/// Fraction of the initial envelope below which points are excluded from
/// log-linear fits (they carry mostly noise and bias the log).
pub const FIT_FLOOR: f64 = 0.05;
/// Minimum number of envelope points a fit needs.
pub const MIN_FIT_POINTS: usize = 4;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// A spectral peak must rise this far above the median spectrum magnitude.
pub const PEAK_OVER_MEDIAN: f64 = 3.0;
/// Periods the spectral window must contain for a usable estimate.
pub const MIN_PERIODS: f64 = 8.0;

// ---------------------------------------------------------------- coherence

/// Ensemble coherence f(t) = sqrt(<psi0| rho_bar |psi0>), computed from the
/// averaged reference-overlap column. Reduces to the pure-state overlap
/// |<psi0|psi(t)>| when rho_bar stays pure; its fully-depolarized floor is
/// sqrt(1/2) rather than 0.
///
/// `reference` must be the same (pure) state the run recorded its overlap
/// column against.
pub fn coherence(
    series: &EnsembleResult,
    reference: &QuantumState,
) -> Result<Vec<f64>, CoreError> {
    let purity = reference.purity();
    if purity < 1.0 - 1e-9 {
        return Err(CoreError::MixedReference { purity });
    }
    Ok(series
        .mean_of(ObservableKind::OverlapRef)
        .iter()
        .map(|&p| libm::sqrt(p.clamp(0.0, 1.0)))
        .collect())
}

// ---------------------------------------------------------------- envelopes

/// Reduce an oscillating series to its upper peak envelope: block maxima of
/// |y| over windows of `window_us` (one carrier period is the natural
/// choice). A series with fewer than three sign changes is taken to *be*
/// an envelope already and is passed through as |y|.
pub fn extract_envelope(
    t_us: &[f64],
    y: &[f64],
    window_us: f64,
) -> Result<(Vec<f64>, Vec<f64>), CoreError> {
    if t_us.len() != y.len() {
        return Err(CoreError::DimensionMismatch {
            a: t_us.len(),
            b: y.len(),
        });
    }
    if t_us.len() < 3 {
        return Err(CoreError::InsufficientData { n: t_us.len() });
    }
    let crossings = y.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
    if crossings < 3 {
        return Ok((t_us.to_vec(), y.iter().map(|v| libm::fabs(*v)).collect()));
    }
    if !(window_us > 0.0) {
        return Err(CoreError::InvalidTimestep);
    }
    let mut t_out = Vec::new();
    let mut s_out = Vec::new();
    let t0 = t_us[0];
    let mut block = 0usize;
    let mut best: Option<(f64, f64)> = None;
    for (&t, &v) in t_us.iter().zip(y) {
        let b = libm::floor((t - t0) / window_us) as usize;
        if b != block {
            if let Some((tp, sp)) = best.take() {
                t_out.push(tp);
                s_out.push(sp);
            }
            block = b;
        }
        let a = libm::fabs(v);
        if best.map(|(_, s)| a > s).unwrap_or(true) {
            best = Some((t, a));
        }
    }
    if let Some((tp, sp)) = best {
        t_out.push(tp);
        s_out.push(sp);
    }
    Ok((t_out, s_out))
}

// ---------------------------------------------------------------- fitting

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// S(t) = A exp(-b^2 t^2 / 2); T2 = sqrt(2)/b
    Gaussian,
    /// S(t) = A exp(-r t); T2 = 1/r
    Exponential,
}

impl DecayModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecayModel::Gaussian => "gaussian",
            DecayModel::Exponential => "exponential",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FitResult {
    pub model: DecayModel,
    /// b (rad/us) for Gaussian, rate (1/us) for exponential
    pub param: f64,
    /// delta-method standard error of `param` from the regression slope
    pub param_se: f64,
    pub amplitude: f64,
    /// time at which the fitted shape reaches e^-1 of its amplitude
    pub t2_us: f64,
    /// 95% interval; `None` when the decay was unresolvable and `t2_us` is
    /// only a lower bound (the fit horizon)
    pub t2_ci95: Option<(f64, f64)>,
    /// root-mean-square misfit in linear (not log) space
    pub rms_residual: f64,
    pub n_points: usize,
    pub t2_is_lower_bound: bool,
}

/// Plain least squares y = c + m x; returns (m, c, se_m).
fn linfit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let m = sxy / sxx;
    let c = my - m * mx;
    let dof = (xs.len().max(3) - 2) as f64;
    let see: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (c + m * x);
            e * e
        })
        .sum::<f64>()
        / dof;
    (m, c, libm::sqrt(see / sxx))
}

/// Fit one decay model to an (already extracted) envelope via free-amplitude
/// log-linear least squares. Points below `FIT_FLOOR` of the initial
/// envelope are dropped. A non-decaying envelope yields the T2-lower-bound
/// sentinel (param 0, t2 = fit horizon) rather than an error.
pub fn fit_envelope(t_us: &[f64], s: &[f64], model: DecayModel) -> Result<FitResult, CoreError> {
    if t_us.len() != s.len() {
        return Err(CoreError::DimensionMismatch {
            a: t_us.len(),
            b: s.len(),
        });
    }
    let s0 = s.iter().copied().fold(0.0_f64, f64::max);
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(CoreError::FitDiverged {
            reason: "envelope has no positive values",
        });
    }
    let floor = FIT_FLOOR * s0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut t_last = t_us.first().copied().unwrap_or(0.0);
    for (&t, &v) in t_us.iter().zip(s) {
        t_last = t_last.max(t);
        if v > floor {
            xs.push(match model {
                DecayModel::Gaussian => t * t,
                DecayModel::Exponential => t,
            });
            ys.push(libm::log(v));
        }
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(CoreError::InsufficientData { n: xs.len() });
    }
    let (m, c, se_m) = linfit(&xs, &ys);
    if !m.is_finite() || !c.is_finite() {
        return Err(CoreError::FitDiverged {
            reason: "singular regression",
        });
    }
    let amplitude = libm::exp(c);

    // slope -> physical parameter (and its delta-method se)
    let (param, param_se) = match model {
        DecayModel::Gaussian => {
            // ln S = c - (b^2/2) t^2 => slope m = -b^2/2
            if m < 0.0 {
                let b = libm::sqrt(-2.0 * m);
                (b, se_m / b)
            } else {
                (0.0, 0.0)
            }
        }
        DecayModel::Exponential => {
            if m < 0.0 {
                (-m, se_m)
            } else {
                (0.0, 0.0)
            }
        }
    };

    let predict = |t: f64| match model {
        DecayModel::Gaussian => amplitude * libm::exp(-0.5 * param * param * t * t),
        DecayModel::Exponential => amplitude * libm::exp(-param * t),
    };
    let rms = libm::sqrt(
        t_us.iter()
            .zip(s)
            .map(|(&t, &v)| {
                let e = v - predict(t);
                e * e
            })
            .sum::<f64>()
            / t_us.len() as f64,
    );

    if param <= 0.0 {
        return Ok(FitResult {
            model,
            param: 0.0,
            param_se,
            amplitude,
            t2_us: t_last,
            t2_ci95: None,
            rms_residual: rms,
            n_points: xs.len(),
            t2_is_lower_bound: true,
        });
    }

    let t2 = match model {
        DecayModel::Gaussian => libm::sqrt(2.0) / param,
        DecayModel::Exponential => 1.0 / param,
    };
    let se_t2 = t2 / param * param_se;
    Ok(FitResult {
        model,
        param,
        param_se,
        amplitude,
        t2_us: t2,
        t2_ci95: Some(((t2 - 1.96 * se_t2).max(0.0), t2 + 1.96 * se_t2)),
        rms_residual: rms,
        n_points: xs.len(),
        t2_is_lower_bound: false,
    })
}

/// Fit both decay models and keep whichever has the smaller linear-space
/// residual.
pub fn fit_best_model(t_us: &[f64], s: &[f64]) -> Result<FitResult, CoreError> {
    let g = fit_envelope(t_us, s, DecayModel::Gaussian);
    let e = fit_envelope(t_us, s, DecayModel::Exponential);
    match (g, e) {
        (Ok(a), Ok(b)) => Ok(if a.rms_residual <= b.rms_residual { a } else { b }),
        (Ok(a), Err(_)) => Ok(a),
        (Err(_), Ok(b)) => Ok(b),
        (Err(a), Err(_)) => Err(a),
    }
}

/// Nonparametric bootstrap 95% CI for T2: resample whole realizations with
/// replacement from the retained per-trajectory series, rebuild the mean,
/// re-extract and refit with the model held fixed at the point estimate's
/// choice. Returns `None` when fewer than half the resamples produce a
/// resolvable decay (the slope-variance CI from `fit_envelope` then stands).
pub fn bootstrap_t2(
    t_us: &[f64],
    realizations: &[Vec<f64>],
    window_us: f64,
    model: DecayModel,
    master_seed: u64,
) -> Option<(f64, f64)> {
    let n = realizations.len();
    if n < 8 {
        return None;
    }
    let mut t2s = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut mean = alloc::vec![0.0f64; t_us.len()];
    for r in 0..BOOTSTRAP_RESAMPLES {
        // cheap deterministic index stream; one splitmix per draw
        let mut state = derive_seed(master_seed, CH_BOOTSTRAP, r as u64);
        for v in mean.iter_mut() {
            *v = 0.0;
        }
        for _ in 0..n {
            state = splitmix64(state);
            let pick = (state % n as u64) as usize;
            for (v, x) in mean.iter_mut().zip(&realizations[pick]) {
                *v += x;
            }
        }
        for v in mean.iter_mut() {
            *v /= n as f64;
        }
        let Ok((tp, sp)) = extract_envelope(t_us, &mean, window_us) else {
            continue;
        };
        let Ok(fit) = fit_envelope(&tp, &sp, model) else {
            continue;
        };
        if !fit.t2_is_lower_bound {
            t2s.push(fit.t2_us);
        }
    }
    if t2s.len() < BOOTSTRAP_RESAMPLES / 2 {
        return None;
    }
    t2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pick = |q: f64| t2s[((q * (t2s.len() - 1) as f64) as usize).min(t2s.len() - 1)];
    Some((pick(0.025), pick(0.975)))
}

// ---------------------------------------------------------------- spectrum

/// Dominant nonzero frequency (cyclic MHz) of a uniformly sampled series:
/// Hann-windowed, mean-subtracted, zero-padded DFT with parabolic
/// interpolation of the log-magnitude peak.
pub fn dressed_rabi_frequency(t_us: &[f64], y: &[f64]) -> Result<f64, CoreError> {
    let n = t_us.len();
    if n != y.len() {
        return Err(CoreError::DimensionMismatch { a: n, b: y.len() });
    }
    if n < 16 {
        return Err(CoreError::InsufficientData { n });
    }
    let dt = (t_us[n - 1] - t_us[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(CoreError::NonMonotoneGrid);
    }
    for w in t_us.windows(2) {
        if libm::fabs(w[1] - w[0] - dt) > 1e-6 * dt.max(1e-12) {
            return Err(CoreError::NonUniformGrid);
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;

    // zero-padded length >= 4n as a power of two, capped to keep the direct
    // DFT cheap (n here is <= a few thousand output points)
    let mut m = 1usize;
    while m < 4 * n {
        m *= 2;
    }
    m = m.min(16384);

    let two_pi = 2.0 * core::f64::consts::PI;
    let windowed: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = 0.5 * (1.0 - libm::cos(two_pi * i as f64 / (n - 1) as f64));
            (v - mean) * w
        })
        .collect();

    let half = m / 2;
    let mut mag = alloc::vec![0.0f64; half];
    for (k, out) in mag.iter_mut().enumerate().skip(1) {
        let (mut re, mut im) = (0.0, 0.0);
        let wk = two_pi * k as f64 / m as f64;
        for (i, &v) in windowed.iter().enumerate() {
            let ph = wk * i as f64;
            re += v * libm::cos(ph);
            im -= v * libm::sin(ph);
        }
        *out = libm::sqrt(re * re + im * im);
    }

    // ignore the lowest bins (window main lobe around DC after mean removal)
    let k_min = 2;
    let (k_peak, &peak) = mag
        .iter()
        .enumerate()
        .skip(k_min)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .ok_or(CoreError::NoSpectralPeak)?;
    let mut sorted = mag[k_min..].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if !(peak > PEAK_OVER_MEDIAN * median) || peak <= 0.0 {
        return Err(CoreError::NoSpectralPeak);
    }

    // parabolic refinement on log magnitude
    let delta = if k_peak > k_min && k_peak + 1 < half {
        let (a, b, c) = (
            libm::log(mag[k_peak - 1].max(1e-300)),
            libm::log(peak.max(1e-300)),
            libm::log(mag[k_peak + 1].max(1e-300)),
        );
        let denom = a - 2.0 * b + c;
        if libm::fabs(denom) > 1e-12 {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let freq = (k_peak as f64 + delta) / (m as f64 * dt);

    let periods = freq * (t_us[n - 1] - t_us[0]);
    if periods < MIN_PERIODS {
        return Err(CoreError::TooFewPeriods {
            periods,
            needed: MIN_PERIODS as usize,
        });
    }
    Ok(freq)
}

// ---------------------------------------------------------------- fidelity

/// One sampled channel action: which Pauli pair went in, what came out.
#[derive(Clone, Debug)]
pub struct ProcessSample {
    pub mu: usize,
    pub nu: usize,
    pub output: Operator,
}

/// Pauli-index labels matching the order of [`pauli_pairs`].
pub fn pauli_pair_labels() -> [(usize, usize); 15] {
    let mut out = [(0usize, 0usize); 15];
    let mut idx = 0;
    for mu in 0..4 {
        for nu in 0..4 {
            if mu == 0 && nu == 0 {
                continue;
            }
            out[idx] = (mu, nu);
            idx += 1;
        }
    }
    out
}

/// Unpack a lockstep process snapshot into labeled samples.
pub fn snapshot_samples(snap: &ProcessSnapshot) -> Vec<ProcessSample> {
    pauli_pair_labels()
        .iter()
        .zip(&snap.mapped)
        .map(|(&(mu, nu), op)| ProcessSample {
            mu,
            nu,
            output: *op,
        })
        .collect()
}

/// Average two-qubit gate fidelity between a target unitary and a sampled
/// channel: F = (1/16)[4 + (1/5) sum_mu,nu tr((U s U^dag) M(s))] over the
/// 15 non-identity Pauli pairs. Identity channel gives 1, the completely
/// depolarizing channel 0.25.
pub fn gate_fidelity(u_ideal: &Operator, samples: &[ProcessSample]) -> Result<f64, CoreError> {
    let basis = pauli_pairs();
    let labels = pauli_pair_labels();
    let mut found: [Option<&Operator>; 15] = [None; 15];
    for s in samples {
        if let Some(pos) = labels.iter().position(|&(m, n)| (m, n) == (s.mu, s.nu)) {
            // the channel must stay trace-preserving: traceless in,
            // traceless out
            let tr = s.output.trace().norm();
            if tr > 1e-6 {
                return Err(CoreError::StateInvariant {
                    which: "process-sample trace",
                    value: tr,
                    t_us: f64::NAN,
                });
            }
            found[pos] = Some(&s.output);
        }
    }
    let mut total = 0.0;
    for (i, slot) in found.iter().enumerate() {
        let (mu, nu) = labels[i];
        let m = slot.ok_or(CoreError::MissingBasisSample { mu, nu })?;
        let ideal_image = *u_ideal * basis[i] * u_ideal.adjoint();
        total += (ideal_image * *m).trace().re;
    }
    Ok((4.0 + total / 5.0) / 16.0)
}

/// Fidelity straight from a lockstep snapshot.
pub fn snapshot_fidelity(u_ideal: &Operator, snap: &ProcessSnapshot) -> Result<f64, CoreError> {
    gate_fidelity(u_ideal, &snapshot_samples(snap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ang;
    use crate::evolution::apply_contraction;
    use crate::operator::{pauli, propagator_unchecked, tensor, PauliAxis};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn synth(b: f64, f_mhz: f64, horizon: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
        let y = t
            .iter()
            .map(|&t| (-0.5 * b * b * t * t).exp() * (ang(f_mhz) * t).cos())
            .collect();
        (t, y)
    }

    #[test]
    fn recovers_synthetic_gaussian_decay() {
        // beat at 40 MHz under exp(-b^2 t^2/2), b = 2pi*0.098 rad/us
        let b = ang(0.098);
        let (t, y) = synth(b, 40.0, 6.0, 24000);
        let (tp, sp) = extract_envelope(&t, &y, 1.0 / 40.0).unwrap();
        let fit = fit_envelope(&tp, &sp, DecayModel::Gaussian).unwrap();
        assert!(
            (fit.param - b).abs() / b < 0.02,
            "b = {} vs {}",
            fit.param,
            b
        );
        assert_abs_diff_eq!(fit.t2_us, 2.0f64.sqrt() / b, epsilon = 0.05);
        assert!(!fit.t2_is_lower_bound);
        let best = fit_best_model(&tp, &sp).unwrap();
        assert_eq!(best.model, DecayModel::Gaussian);
    }

    #[test]
    fn recovers_synthetic_exponential_decay() {
        let r = 0.31;
        let n = 4000;
        let t: Vec<f64> = (0..n).map(|i| 12.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.9 * (-r * t).exp()).collect();
        // monotone series: pass-through envelope
        let (tp, sp) = extract_envelope(&t, &y, 0.5).unwrap();
        assert_eq!(tp.len(), t.len());
        let fit = fit_envelope(&tp, &sp, DecayModel::Exponential).unwrap();
        assert!((fit.param - r).abs() / r < 0.02);
        assert_abs_diff_eq!(fit.amplitude, 0.9, epsilon = 0.01);
        let best = fit_best_model(&tp, &sp).unwrap();
        assert_eq!(best.model, DecayModel::Exponential);
    }

    #[test]
    fn flat_envelope_reports_lower_bound() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let y = vec![0.8; 200];
        let fit = fit_envelope(&t, &y, DecayModel::Gaussian).unwrap();
        assert!(fit.t2_is_lower_bound);
        assert_abs_diff_eq!(fit.t2_us, t.last().copied().unwrap(), epsilon = 1e-12);
        assert!(fit.t2_ci95.is_none());
        assert_eq!(fit.param, 0.0);
    }

    #[test]
    fn fit_rejects_starved_input() {
        let t = [0.0, 1.0, 2.0];
        let s = [1.0, 0.5, 0.2];
        assert!(matches!(
            fit_envelope(&t, &s, DecayModel::Exponential),
            Err(CoreError::InsufficientData { .. })
        ));
    }

    #[test]
    fn bootstrap_brackets_the_point_estimate() {
        // 40 realizations of a noisy exponential envelope
        let n_t = 120;
        let t: Vec<f64> = (0..n_t).map(|i| 10.0 * i as f64 / (n_t - 1) as f64).collect();
        let mut reals = Vec::new();
        let mut state = 7u64;
        for _ in 0..40 {
            let mut row = Vec::with_capacity(n_t);
            for &tt in &t {
                state = splitmix64(state);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                row.push((-0.4 * tt).exp() + 0.05 * u);
            }
            reals.push(row);
        }
        let mean: Vec<f64> = (0..n_t)
            .map(|j| reals.iter().map(|r| r[j]).sum::<f64>() / reals.len() as f64)
            .collect();
        let fit = fit_envelope(&t, &mean, DecayModel::Exponential).unwrap();
        let (lo, hi) =
            bootstrap_t2(&t, &reals, 1.0, DecayModel::Exponential, 99).expect("bootstrap CI");
        assert!(lo <= fit.t2_us && fit.t2_us <= hi, "{lo} {} {hi}", fit.t2_us);
        assert!(hi - lo < 0.5 * fit.t2_us);
    }

    proptest! {
        #[test]
        fn gaussian_fit_is_time_scale_equivariant(
            b in 0.05f64..2.0,
            scale in 0.2f64..5.0,
        ) {
            let n = 400;
            let horizon = 3.0 / b;
            let t: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
            let s: Vec<f64> = t.iter().map(|&t| (-0.5 * b * b * t * t).exp()).collect();
            let fit = fit_envelope(&t, &s, DecayModel::Gaussian).unwrap();
            let t2: Vec<f64> = t.iter().map(|&t| t * scale).collect();
            let fit2 = fit_envelope(&t2, &s, DecayModel::Gaussian).unwrap();
            // same samples on a stretched clock: b shrinks by 1/scale
            prop_assert!((fit2.param - fit.param / scale).abs() < 1e-6 * fit.param);
        }
    }

    #[test]
    fn spectral_peak_at_rabi_frequency() {
        let n = 2000;
        let t: Vec<f64> = (0..n).map(|i| 1.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| 0.5 + 0.5 * (ang(40.0) * t).cos()).collect();
        let f = dressed_rabi_frequency(&t, &y).unwrap();
        assert!((f - 40.0).abs() < 0.1, "estimated {f} MHz");
    }

    #[test]
    fn spectral_estimator_flags_short_windows_and_flat_series() {
        let n = 512;
        // 3 periods only
        let t: Vec<f64> = (0..n).map(|i| 1.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = t.iter().map(|&t| (ang(3.0) * t).cos()).collect();
        assert!(matches!(
            dressed_rabi_frequency(&t, &y),
            Err(CoreError::TooFewPeriods { .. })
        ));
        let flat = vec![0.25; n];
        assert!(matches!(
            dressed_rabi_frequency(&t, &flat),
            Err(CoreError::NoSpectralPeak)
        ));
        // non-uniform grid
        let mut tb = t.clone();
        tb[100] += 0.3 / n as f64;
        assert!(matches!(
            dressed_rabi_frequency(&tb, &y),
            Err(CoreError::NonUniformGrid)
        ));
    }

    #[test]
    fn refined_vs_simplified_frequency_ratio_is_two() {
        // generator (W/2) sy vs (W/4)(...): populations oscillate at W
        // cyclic vs W/2 cyclic; the estimator must resolve the factor 2
        let n = 4096;
        let horizon = 20.0;
        let w = ang(1.0);
        let t: Vec<f64> = (0..n).map(|i| horizon * i as f64 / (n - 1) as f64).collect();
        let refined: Vec<f64> = t.iter().map(|&t| 0.5 * (1.0 + (w * t).cos())).collect();
        let simplified: Vec<f64> = t.iter().map(|&t| 0.5 * (1.0 + (0.5 * w * t).cos())).collect();
        let fr = dressed_rabi_frequency(&t, &refined).unwrap();
        let fs = dressed_rabi_frequency(&t, &simplified).unwrap();
        assert!((fr / fs - 2.0).abs() < 0.02, "ratio {}", fr / fs);
        assert!((fr - 1.0).abs() < 0.01);
    }

    #[test]
    fn identity_channel_has_unit_fidelity() {
        let h = two_qubit_test_generator();
        let u = propagator_unchecked(&h, 1.7);
        let samples: Vec<ProcessSample> = pauli_pair_labels()
            .iter()
            .zip(pauli_pairs())
            .map(|(&(mu, nu), x)| ProcessSample {
                mu,
                nu,
                output: u * x * u.adjoint(),
            })
            .collect();
        let f = gate_fidelity(&u, &samples).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn depolarizing_channel_hits_quarter_floor() {
        let u = Operator::identity(4);
        let samples: Vec<ProcessSample> = pauli_pair_labels()
            .iter()
            .map(|&(mu, nu)| ProcessSample {
                mu,
                nu,
                output: Operator::zeros(4),
            })
            .collect();
        let f = gate_fidelity(&u, &samples).unwrap();
        assert_abs_diff_eq!(f, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_requires_all_basis_samples() {
        let u = Operator::identity(4);
        let samples: Vec<ProcessSample> = pauli_pair_labels()
            .iter()
            .zip(pauli_pairs())
            .skip(1)
            .map(|(&(mu, nu), x)| ProcessSample { mu, nu, output: x })
            .collect();
        assert!(matches!(
            gate_fidelity(&u, &samples),
            Err(CoreError::MissingBasisSample { mu: 0, nu: 1 })
        ));
    }

    #[test]
    fn dissipative_channel_fidelity_matches_contraction_arithmetic() {
        // pure per-qubit dephasing-like contraction with known factors:
        // each Pauli pair picks up l_a(mu) * l_b(nu), so the Eq-style sum
        // is separable and checkable by hand
        let gamma = 0.2;
        let dt = 1.3;
        let l = crate::evolution::DissipatorFrame::DressedX.contraction(gamma, dt);
        let samples: Vec<ProcessSample> = pauli_pair_labels()
            .iter()
            .zip(pauli_pairs())
            .map(|(&(mu, nu), x)| {
                let mut out = x;
                apply_contraction(&mut out, l, 0);
                apply_contraction(&mut out, l, 1);
                ProcessSample {
                    mu,
                    nu,
                    output: out,
                }
            })
            .collect();
        let f = gate_fidelity(&Operator::identity(4), &samples).unwrap();
        let lv = [1.0, l.0, l.1, l.2];
        let mut s = 0.0;
        for mu in 0..4 {
            for nu in 0..4 {
                if mu == 0 && nu == 0 {
                    continue;
                }
                s += 4.0 * lv[mu] * lv[nu];
            }
        }
        assert_abs_diff_eq!(f, (4.0 + s / 5.0) / 16.0, epsilon = 1e-10);
    }

    fn two_qubit_test_generator() -> Operator {
        let sy = pauli(PauliAxis::Y);
        let sz = pauli(PauliAxis::Z);
        (tensor(&sy, &sy) + tensor(&sz, &sz)) * 0.25
    }

    #[test]
    fn coherence_floor_and_mixed_reference() {
        use crate::evolution::{run_ensemble, TrajectoryRun};
        use crate::drives::{FrameLabel, SchemeConfig};
        use crate::state::Ket;
        let run = TrajectoryRun::new(SchemeConfig::refined(&[20.0, 1.0]), FrameLabel::Int2, 2.0);
        let res = run_ensemble(&run, 2, None).unwrap();
        let f = coherence(&res, &QuantumState::from_ket(&Ket::down())).unwrap();
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-9);
        assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mixed = QuantumState::maximally_mixed(2);
        assert!(matches!(
            coherence(&res, &mixed),
            Err(CoreError::MixedReference { .. })
        ));
    }
}
