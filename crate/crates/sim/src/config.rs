//! Flat key=value experiment configuration.
//!
//! A config file holds one `key = value` pair per line (`#` starts a
//! comment). Files never define an experiment from scratch: each
//! subcommand starts from its preset and the file overrides named knobs.
//! Command-line flags override file values. Unknown keys are rejected so a
//! typo cannot silently fall back to a default.
//!
//! Override scope, chosen so cross-run comparisons inside one preset stay
//! meaningful:
//! - drive keys (`omegaK_mhz`, `phi_rad`, `carrier_mhz`, `variant`) apply
//!   to every embedded run whose scheme has that drive order, baselines
//!   and companion runs included;
//! - environment keys (amplitude/magnetic noise, `t1_us`, integrator and
//!   grid keys) apply to every embedded run unconditionally;
//! - `frame` applies only to the primary run(s), never to a comparison
//!   run whose frame is part of the experiment design;
//! - `horizon_us`, `realizations` and `seed` follow the preset runner's
//!   own override rules (horizon moves the primary run only).
//!
//! The sweep subcommand picks its second-drive amplitudes, phases and
//! variants internally, so those keys are rejected there; the noise
//! self-check accepts only `seed`.

use std::collections::BTreeSet;
use std::path::Path;

use ccd_core::experiments::Recipe;
use ccd_core::{
    ang, cyc, ExperimentPreset, FrameLabel, Integrator, LindbladConfig, MagneticNoise,
    RunOverrides, SchemeConfig, TrajectoryRun, Variant,
};
use thiserror::Error;

/// Lab-frame propagation resolves the microwave carrier itself, ~5e-6 us
/// per step; longer horizons than this are rejected as a configuration
/// error rather than left to run for hours.
pub const LAB_HORIZON_CAP_US: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("config line {line}: unknown key \"{key}\"")]
    UnknownKey { key: String, line: usize },
    #[error("config line {line}: duplicate key \"{key}\"")]
    DuplicateKey { key: String, line: usize },
    #[error("config line {line}: bad value for {key}: {why}")]
    BadValue {
        key: &'static str,
        line: usize,
        why: String,
    },
    #[error("key {key} does not apply to {subcommand}: {why}")]
    Inapplicable {
        key: &'static str,
        subcommand: String,
        why: &'static str,
    },
    #[error(
        "lab-frame horizon {got} us exceeds the {cap} us cap (the lab frame resolves the carrier)"
    )]
    LabHorizon { got: f64, cap: f64 },
    #[error("invalid scheme after overrides: {0}")]
    Scheme(ccd_core::CoreError),
}

/// Every recognized config key, in documentation order.
pub const KEYS: &[&str] = &[
    "omega1_mhz",
    "omega2_mhz",
    "omega3_mhz",
    "omega4_mhz",
    "phi_rad",
    "variant",
    "carrier_mhz",
    "amp_sigma_rel",
    "amp_tau_us",
    "magnetic",
    "b_sigma_mhz",
    "b_tau_us",
    "t1_us",
    "frame",
    "integrator",
    "dt_us",
    "noise_update_us",
    "n_out",
    "horizon_us",
    "realizations",
    "seed",
    "j_mhz",
    "rf_omega_mhz",
];

/// Parsed-but-not-yet-applied overrides; `None` means "preset default".
#[derive(Clone, Debug, Default)]
pub struct Settings {
    pub omega_mhz: [Option<f64>; 4],
    pub phi_rad: Option<f64>,
    pub variant: Option<Variant>,
    pub carrier_mhz: Option<f64>,
    pub amp_sigma_rel: Option<f64>,
    pub amp_tau_us: Option<f64>,
    pub magnetic_on: Option<bool>,
    pub b_sigma_mhz: Option<f64>,
    pub b_tau_us: Option<f64>,
    /// `Some(None)` switches relaxation off (`t1_us = inf`)
    pub t1_us: Option<Option<f64>>,
    pub frame: Option<FrameLabel>,
    pub integrator: Option<Integrator>,
    pub dt_us: Option<f64>,
    pub noise_update_us: Option<f64>,
    pub n_out: Option<usize>,
    pub horizon_us: Option<f64>,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub j_mhz: Option<f64>,
    pub rf_omega_mhz: Option<f64>,
}

fn parse_f64(key: &'static str, val: &str, line: usize) -> Result<f64, ConfigError> {
    let x: f64 = val.parse().map_err(|_| ConfigError::BadValue {
        key,
        line,
        why: format!("\"{val}\" is not a number"),
    })?;
    if !x.is_finite() {
        return Err(ConfigError::BadValue {
            key,
            line,
            why: "must be finite".into(),
        });
    }
    Ok(x)
}

fn parse_pos(key: &'static str, val: &str, line: usize) -> Result<f64, ConfigError> {
    let x = parse_f64(key, val, line)?;
    if x <= 0.0 {
        return Err(ConfigError::BadValue {
            key,
            line,
            why: "must be positive".into(),
        });
    }
    Ok(x)
}

fn parse_nonneg(key: &'static str, val: &str, line: usize) -> Result<f64, ConfigError> {
    let x = parse_f64(key, val, line)?;
    if x < 0.0 {
        return Err(ConfigError::BadValue {
            key,
            line,
            why: "must be >= 0".into(),
        });
    }
    Ok(x)
}

/// `auto` answers the echo in a run manifest: the planner picks the value.
fn parse_auto_pos(key: &'static str, val: &str, line: usize) -> Result<Option<f64>, ConfigError> {
    if val == "auto" {
        Ok(None)
    } else {
        parse_pos(key, val, line).map(Some)
    }
}

impl Settings {
    pub fn parse_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = k.trim();
            let val = v.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    key: key.into(),
                    line,
                });
            }
            s.set(key, val, line)?;
        }
        Ok(s)
    }

    fn set(&mut self, key: &str, val: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "omega1_mhz" => self.omega_mhz[0] = Some(parse_pos("omega1_mhz", val, line)?),
            "omega2_mhz" => self.omega_mhz[1] = Some(parse_pos("omega2_mhz", val, line)?),
            "omega3_mhz" => self.omega_mhz[2] = Some(parse_pos("omega3_mhz", val, line)?),
            "omega4_mhz" => self.omega_mhz[3] = Some(parse_pos("omega4_mhz", val, line)?),
            "phi_rad" => self.phi_rad = Some(parse_f64("phi_rad", val, line)?),
            "variant" => {
                self.variant = Some(match val {
                    "refined" => Variant::Refined,
                    "simplified" => Variant::Simplified,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "variant",
                            line,
                            why: format!("\"{val}\" (expected refined|simplified)"),
                        })
                    }
                })
            }
            "carrier_mhz" => self.carrier_mhz = Some(parse_pos("carrier_mhz", val, line)?),
            "amp_sigma_rel" => self.amp_sigma_rel = Some(parse_nonneg("amp_sigma_rel", val, line)?),
            "amp_tau_us" => self.amp_tau_us = Some(parse_pos("amp_tau_us", val, line)?),
            "magnetic" => {
                self.magnetic_on = Some(match val {
                    "on" => true,
                    "off" => false,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "magnetic",
                            line,
                            why: format!("\"{val}\" (expected on|off)"),
                        })
                    }
                })
            }
            "b_sigma_mhz" => self.b_sigma_mhz = Some(parse_pos("b_sigma_mhz", val, line)?),
            "b_tau_us" => self.b_tau_us = Some(parse_pos("b_tau_us", val, line)?),
            "t1_us" => {
                self.t1_us = Some(if val == "inf" {
                    None
                } else {
                    Some(parse_pos("t1_us", val, line)?)
                })
            }
            "frame" => {
                self.frame = Some(match val {
                    "lab" => FrameLabel::Lab,
                    "int1" => FrameLabel::Int1,
                    "int2" => FrameLabel::Int2,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "frame",
                            line,
                            why: format!("\"{val}\" (expected lab|int1|int2)"),
                        })
                    }
                })
            }
            "integrator" => {
                self.integrator = Some(match val {
                    "splitting" => Integrator::Splitting,
                    "rk4" => Integrator::Rk4,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: "integrator",
                            line,
                            why: format!("\"{val}\" (expected splitting|rk4)"),
                        })
                    }
                })
            }
            "dt_us" => self.dt_us = parse_auto_pos("dt_us", val, line)?,
            "noise_update_us" => {
                self.noise_update_us = parse_auto_pos("noise_update_us", val, line)?
            }
            "n_out" => {
                let n: usize = val.parse().map_err(|_| ConfigError::BadValue {
                    key: "n_out",
                    line,
                    why: format!("\"{val}\" is not an integer"),
                })?;
                if n < 2 {
                    return Err(ConfigError::BadValue {
                        key: "n_out",
                        line,
                        why: "need at least 2 output points".into(),
                    });
                }
                self.n_out = Some(n);
            }
            "horizon_us" => self.horizon_us = parse_auto_pos("horizon_us", val, line)?,
            "realizations" => {
                let n: usize = val.parse().map_err(|_| ConfigError::BadValue {
                    key: "realizations",
                    line,
                    why: format!("\"{val}\" is not an integer"),
                })?;
                if n == 0 {
                    return Err(ConfigError::BadValue {
                        key: "realizations",
                        line,
                        why: "must be >= 1".into(),
                    });
                }
                self.realizations = Some(n);
            }
            "seed" => {
                if val == "auto" {
                    self.seed = None;
                } else {
                    self.seed = Some(val.parse().map_err(|_| ConfigError::BadValue {
                        key: "seed",
                        line,
                        why: format!("\"{val}\" is not a u64"),
                    })?);
                }
            }
            "j_mhz" => self.j_mhz = Some(parse_pos("j_mhz", val, line)?),
            "rf_omega_mhz" => self.rf_omega_mhz = Some(parse_nonneg("rf_omega_mhz", val, line)?),
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.into(),
                    line,
                })
            }
        }
        Ok(())
    }

    /// Names of the keys this settings object would override.
    pub fn keys_set(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (i, w) in self.omega_mhz.iter().enumerate() {
            if w.is_some() {
                v.push(["omega1_mhz", "omega2_mhz", "omega3_mhz", "omega4_mhz"][i]);
            }
        }
        macro_rules! mark {
            ($($field:ident => $name:literal),* $(,)?) => {
                $(if self.$field.is_some() { v.push($name); })*
            };
        }
        mark!(
            phi_rad => "phi_rad",
            variant => "variant",
            carrier_mhz => "carrier_mhz",
            amp_sigma_rel => "amp_sigma_rel",
            amp_tau_us => "amp_tau_us",
            magnetic_on => "magnetic",
            b_sigma_mhz => "b_sigma_mhz",
            b_tau_us => "b_tau_us",
            t1_us => "t1_us",
            frame => "frame",
            integrator => "integrator",
            dt_us => "dt_us",
            noise_update_us => "noise_update_us",
            n_out => "n_out",
            horizon_us => "horizon_us",
            realizations => "realizations",
            seed => "seed",
            j_mhz => "j_mhz",
            rf_omega_mhz => "rf_omega_mhz",
        );
        v
    }

    pub fn run_overrides(&self) -> RunOverrides {
        RunOverrides {
            n: self.realizations,
            horizon_us: self.horizon_us,
            seed: self.seed,
        }
    }

    fn apply_scheme(&self, scheme: &mut SchemeConfig) {
        for (k, w) in self.omega_mhz.iter().enumerate() {
            if let (Some(w), Some(d)) = (w, scheme.drives.get_mut(k)) {
                d.omega_mhz = *w;
            }
        }
        if let Some(phi) = self.phi_rad {
            scheme.phi_rad = phi;
        }
        if let Some(c) = self.carrier_mhz {
            scheme.carrier_mhz = c;
        }
        if let Some(v) = self.variant {
            // single-drive baselines have no second tone to construct
            // differently; leave them alone
            if scheme.drives.len() >= 2 {
                scheme.variant = v;
            }
        }
        if let Some(s) = self.amp_sigma_rel {
            for d in &mut scheme.drives {
                d.amp_sigma_rel = s;
            }
        }
        if let Some(tau) = self.amp_tau_us {
            for d in &mut scheme.drives {
                d.amp_tau_us = tau;
            }
        }
        if let Some(w) = self.rf_omega_mhz {
            if let Some(rf) = &mut scheme.rf {
                rf.omega_mhz = w;
            }
        }
    }

    fn apply_env(&self, run: &mut TrajectoryRun) {
        if let Some(t1) = self.t1_us {
            run.lindblad = LindbladConfig { t1_us: t1 };
        }
        run.magnetic = self.resolve_magnetic(run.magnetic);
        if let Some(ig) = self.integrator {
            run.integrator = ig;
        }
        if let Some(dt) = self.dt_us {
            run.dt_us = Some(dt);
        }
        if let Some(s) = self.noise_update_us {
            run.noise_update_us = Some(s);
        }
        if let Some(n) = self.n_out {
            run.n_out = n;
        }
    }

    fn resolve_magnetic(&self, current: Option<MagneticNoise>) -> Option<MagneticNoise> {
        let on = self.magnetic_on.unwrap_or(current.is_some());
        if !on {
            return None;
        }
        let base = current.unwrap_or(MagneticNoise {
            sigma: ang(ccd_core::experiments::DEFAULT_MAGNETIC_SIGMA_MHZ),
            tau_us: ccd_core::experiments::DEFAULT_MAGNETIC_TAU_US,
        });
        Some(MagneticNoise {
            sigma: self.b_sigma_mhz.map(ang).unwrap_or(base.sigma),
            tau_us: self.b_tau_us.unwrap_or(base.tau_us),
        })
    }

    /// Apply to one preset; `subcommand` is only used in error messages.
    pub fn apply(&self, preset: &mut ExperimentPreset, subcommand: &str) -> Result<(), ConfigError> {
        // drive keys must land somewhere, otherwise the override is a typo
        for (k, w) in self.omega_mhz.iter().enumerate() {
            if w.is_some() {
                let order = k + 1;
                let hit = embedded_schemes(preset)
                    .iter()
                    .any(|s| s.drives.len() >= order);
                if !hit {
                    return Err(ConfigError::Inapplicable {
                        key: ["omega1_mhz", "omega2_mhz", "omega3_mhz", "omega4_mhz"][k],
                        subcommand: subcommand.into(),
                        why: "no embedded run has a drive of that order",
                    });
                }
            }
        }
        if self.rf_omega_mhz.is_some() && preset.run.scheme.rf.is_none() {
            return Err(ConfigError::Inapplicable {
                key: "rf_omega_mhz",
                subcommand: subcommand.into(),
                why: "this preset has no rf control tone",
            });
        }
        match (&mut preset.recipe, self.j_mhz) {
            (Recipe::PairFidelity(spec), Some(j)) => {
                spec.j_mhz = j;
                // the gate horizon tracks J*t = 0.5
                preset.run.horizon_us = 0.5 / ang(j);
            }
            (_, Some(_)) => {
                return Err(ConfigError::Inapplicable {
                    key: "j_mhz",
                    subcommand: subcommand.into(),
                    why: "only the two-qubit preset has a dipolar coupling",
                })
            }
            _ => {}
        }

        for scheme in embedded_schemes_mut(preset) {
            self.apply_scheme(scheme);
            scheme.validate().map_err(ConfigError::Scheme)?;
        }
        for run in embedded_runs(preset) {
            self.apply_env(run);
        }
        if let Recipe::PairFidelity(spec) = &mut preset.recipe {
            if let Some(t1) = self.t1_us {
                spec.lindblad = LindbladConfig { t1_us: t1 };
            }
            spec.magnetic = self.resolve_magnetic(spec.magnetic);
        }
        if let Some(frame) = self.frame {
            for run in primary_runs(preset) {
                run.frame = frame;
            }
        }
        for run in primary_runs(preset) {
            let h = self.horizon_us.unwrap_or(run.horizon_us);
            if run.frame == FrameLabel::Lab && h > LAB_HORIZON_CAP_US {
                return Err(ConfigError::LabHorizon {
                    got: h,
                    cap: LAB_HORIZON_CAP_US,
                });
            }
        }
        Ok(())
    }

    /// Apply to every point of the strength sweep. The sweep constructs
    /// its own schemes, so scheme-shaping keys are rejected.
    pub fn apply_sweep(&self, points: &mut [ExperimentPreset]) -> Result<(), ConfigError> {
        let reject: [(&'static str, bool); 8] = [
            ("omega1_mhz", self.omega_mhz[0].is_some()),
            ("omega2_mhz", self.omega_mhz[1].is_some()),
            ("omega3_mhz", self.omega_mhz[2].is_some()),
            ("omega4_mhz", self.omega_mhz[3].is_some()),
            ("phi_rad", self.phi_rad.is_some()),
            ("variant", self.variant.is_some()),
            ("j_mhz", self.j_mhz.is_some()),
            ("rf_omega_mhz", self.rf_omega_mhz.is_some()),
        ];
        for (key, set) in reject {
            if set {
                return Err(ConfigError::Inapplicable {
                    key,
                    subcommand: "t2-sweep".into(),
                    why: "the sweep chooses its drive schemes per point",
                });
            }
        }
        let env_only = Settings {
            omega_mhz: [None; 4],
            phi_rad: None,
            variant: None,
            j_mhz: None,
            rf_omega_mhz: None,
            ..self.clone()
        };
        for p in points {
            env_only.apply(p, "t2-sweep")?;
        }
        Ok(())
    }

    /// The noise self-check has no experiment attached; only the seed and
    /// output-side flags make sense.
    pub fn reject_all_but_seed(&self, subcommand: &str) -> Result<(), ConfigError> {
        for key in self.keys_set() {
            if key != "seed" {
                return Err(ConfigError::Inapplicable {
                    key,
                    subcommand: subcommand.into(),
                    why: "this subcommand runs a fixed statistical battery",
                });
            }
        }
        Ok(())
    }
}

fn embedded_runs(p: &mut ExperimentPreset) -> Vec<&mut TrajectoryRun> {
    let mut v: Vec<&mut TrajectoryRun> = vec![&mut p.run];
    match &mut p.recipe {
        Recipe::CoherenceFit { companions, .. } => {
            v.extend(companions.iter_mut().map(|c| &mut c.run))
        }
        Recipe::PersistentContrast { control, .. } => v.push(control),
        Recipe::OrderLadder { runs } => v.extend(runs.iter_mut().map(|(_, r)| r)),
        Recipe::RabiEnvelope { .. } | Recipe::DressedFrequency | Recipe::PairFidelity(_) => {}
    }
    v
}

fn embedded_schemes_mut(p: &mut ExperimentPreset) -> Vec<&mut SchemeConfig> {
    let mut v: Vec<&mut SchemeConfig> = vec![&mut p.run.scheme];
    match &mut p.recipe {
        Recipe::CoherenceFit { companions, .. } => {
            v.extend(companions.iter_mut().map(|c| &mut c.run.scheme))
        }
        Recipe::PersistentContrast { control, .. } => v.push(&mut control.scheme),
        Recipe::OrderLadder { runs } => v.extend(runs.iter_mut().map(|(_, r)| &mut r.scheme)),
        Recipe::PairFidelity(spec) => {
            v.push(&mut spec.scheme);
            v.push(&mut spec.single);
        }
        Recipe::RabiEnvelope { .. } | Recipe::DressedFrequency => {}
    }
    v
}

fn embedded_schemes(p: &ExperimentPreset) -> Vec<&SchemeConfig> {
    let mut v: Vec<&SchemeConfig> = vec![&p.run.scheme];
    match &p.recipe {
        Recipe::CoherenceFit { companions, .. } => {
            v.extend(companions.iter().map(|c| &c.run.scheme))
        }
        Recipe::PersistentContrast { control, .. } => v.push(&control.scheme),
        Recipe::OrderLadder { runs } => v.extend(runs.iter().map(|(_, r)| &r.scheme)),
        Recipe::PairFidelity(spec) => {
            v.push(&spec.scheme);
            v.push(&spec.single);
        }
        Recipe::RabiEnvelope { .. } | Recipe::DressedFrequency => {}
    }
    v
}

fn primary_runs(p: &mut ExperimentPreset) -> Vec<&mut TrajectoryRun> {
    let mut v: Vec<&mut TrajectoryRun> = vec![&mut p.run];
    if let Recipe::OrderLadder { runs } = &mut p.recipe {
        v.extend(runs.iter_mut().map(|(_, r)| r));
    }
    v
}

// ------------------------------------------------------------------- echo

fn frame_str(f: FrameLabel) -> &'static str {
    match f {
        FrameLabel::Lab => "lab",
        FrameLabel::Int1 => "int1",
        FrameLabel::Int2 => "int2",
    }
}

fn variant_str(v: Variant) -> &'static str {
    match v {
        Variant::Refined => "refined",
        Variant::Simplified => "simplified",
    }
}

fn push(map: &mut Vec<(String, String)>, key: &str, val: String) {
    map.push((key.to_string(), val));
}

fn echo_common(map: &mut Vec<(String, String)>, run: &TrajectoryRun, n_used: usize) {
    push(
        map,
        "amp_sigma_rel",
        format!("{}", run.scheme.drives[0].amp_sigma_rel),
    );
    push(
        map,
        "amp_tau_us",
        format!("{}", run.scheme.drives[0].amp_tau_us),
    );
    match run.magnetic {
        Some(m) => {
            push(map, "magnetic", "on".into());
            push(map, "b_sigma_mhz", format!("{}", cyc(m.sigma)));
            push(map, "b_tau_us", format!("{}", m.tau_us));
        }
        None => push(map, "magnetic", "off".into()),
    }
    push(
        map,
        "t1_us",
        run.lindblad
            .t1_us
            .map(|t| format!("{t}"))
            .unwrap_or_else(|| "inf".into()),
    );
    push(
        map,
        "integrator",
        match run.integrator {
            Integrator::Splitting => "splitting",
            Integrator::Rk4 => "rk4",
        }
        .into(),
    );
    push(
        map,
        "dt_us",
        run.dt_us
            .map(|x| format!("{x}"))
            .unwrap_or_else(|| "auto".into()),
    );
    push(
        map,
        "noise_update_us",
        run.noise_update_us
            .map(|x| format!("{x}"))
            .unwrap_or_else(|| "auto".into()),
    );
    push(map, "n_out", format!("{}", run.n_out));
    push(map, "realizations", format!("{n_used}"));
}

/// The fully resolved configuration of a preset's main run, as config-file
/// pairs. Feeding these back through `--config` reproduces the run
/// bit-identically (file order carries no meaning).
pub fn echo_preset(preset: &ExperimentPreset, n_used: usize, seed: u64) -> Vec<(String, String)> {
    let run = &preset.run;
    let mut map = Vec::new();
    for (k, d) in run.scheme.drives.iter().enumerate() {
        push(&mut map, KEYS[k], format!("{}", d.omega_mhz));
    }
    push(&mut map, "phi_rad", format!("{}", run.scheme.phi_rad));
    push(&mut map, "variant", variant_str(run.scheme.variant).into());
    push(&mut map, "carrier_mhz", format!("{}", run.scheme.carrier_mhz));
    echo_common(&mut map, run, n_used);
    push(&mut map, "frame", frame_str(run.frame).into());
    push(&mut map, "horizon_us", format!("{}", run.horizon_us));
    push(&mut map, "seed", format!("{seed}"));
    if let Recipe::PairFidelity(spec) = &preset.recipe {
        push(&mut map, "j_mhz", format!("{}", spec.j_mhz));
    }
    if let Some(rf) = &run.scheme.rf {
        push(&mut map, "rf_omega_mhz", format!("{}", rf.omega_mhz));
    }
    map
}

/// Sweep echo: environment keys (uniform across points) plus whichever
/// run-shape overrides were set; per-point drive amplitudes, phases and
/// horizons stay internal and echo as `auto`.
pub fn echo_sweep(points: &[ExperimentPreset], s: &Settings, n_used: usize) -> Vec<(String, String)> {
    let mut map = Vec::new();
    if let Some(p) = points.first() {
        echo_common(&mut map, &p.run, n_used);
        push(&mut map, "carrier_mhz", format!("{}", p.run.scheme.carrier_mhz));
        push(
            &mut map,
            "frame",
            s.frame
                .map(frame_str)
                .map(String::from)
                .unwrap_or_else(|| frame_str(p.run.frame).into()),
        );
    }
    push(
        &mut map,
        "horizon_us",
        s.horizon_us
            .map(|x| format!("{x}"))
            .unwrap_or_else(|| "auto".into()),
    );
    push(
        &mut map,
        "seed",
        s.seed
            .map(|x| format!("{x}"))
            .unwrap_or_else(|| "auto".into()),
    );
    map
}
