//! Run artifacts: CSV time series / tables, a JSON summary, and the run
//! manifest that suffices to reproduce the run bit-identically.
//!
//! All floats are written with Rust's shortest round-trip formatting:
//! always a `.` decimal point, never thousands separators, and parsing the
//! text back yields the identical bits.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ccd_core::evolution::OBSERVABLES;
use ccd_core::experiments::{NamedFit, NamedTable};
use ccd_core::{CheckOutcome, EnsembleResult, ObservableKind, PresetOutcome};
use chrono::{DateTime, Utc};
use serde::Serialize;

pub fn observable_column(kind: ObservableKind) -> &'static str {
    match kind {
        ObservableKind::BlochX => "bloch_x",
        ObservableKind::BlochY => "bloch_y",
        ObservableKind::BlochZ => "bloch_z",
        ObservableKind::PDown => "p_down",
        ObservableKind::PUp => "p_up",
        ObservableKind::OverlapRef => "overlap_ref",
        ObservableKind::OverlapIdeal => "overlap_ideal",
        ObservableKind::Purity => "purity",
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    f.flush()
}

/// `time_us`, the ensemble means, then the standard errors (`_se` suffix).
pub fn series_csv(res: &EnsembleResult) -> String {
    let mut s = String::from("time_us");
    for kind in OBSERVABLES {
        s.push(',');
        s.push_str(observable_column(kind));
    }
    for kind in OBSERVABLES {
        s.push(',');
        s.push_str(observable_column(kind));
        s.push_str("_se");
    }
    s.push('\n');
    for (i, t) in res.t_us.iter().enumerate() {
        s.push_str(&format!("{t}"));
        for kind in OBSERVABLES {
            s.push_str(&format!(",{}", res.mean_of(kind)[i]));
        }
        for kind in OBSERVABLES {
            s.push_str(&format!(",{}", res.se_of(kind)[i]));
        }
        s.push('\n');
    }
    s
}

pub fn table_csv(table: &NamedTable) -> String {
    let mut s = table.columns.join(",");
    s.push('\n');
    for row in &table.rows {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            s.push_str(&format!("{v}"));
            first = false;
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub preset: &'a str,
    pub n_used: usize,
    pub master_seed: u64,
    pub cross_validation_fidelity: Option<f64>,
    pub scalars: &'a BTreeMap<String, f64>,
    pub fits: &'a [NamedFit],
    /// the expected-reference record with per-check pass/fail
    pub checks: &'a [CheckOutcome],
    pub all_checks_passed: bool,
    pub tables: &'a [NamedTable],
    /// the configuration this run resolved to, in config-file pairs
    pub resolved_config: BTreeMap<String, String>,
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub subcommand: &'a str,
    pub tool: &'static str,
    pub version: &'static str,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub master_seed: u64,
    pub threads: usize,
    /// keys the config file / flags overrode, for quick diffing
    pub overridden_keys: Vec<&'static str>,
    /// complete config (defaults materialized); `ccd-sim <subcommand>
    /// --config <this map as a file>` reproduces the run bit-identically
    pub resolved_config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Write every artifact of one finished run into `dir`, returning the
/// relative file names (CSV series and tables, then summary, then
/// manifest).
pub struct ArtifactWriter<'a> {
    pub dir: &'a Path,
    pub subcommand: &'a str,
    pub started: DateTime<Utc>,
    pub threads: usize,
    pub overridden_keys: Vec<&'static str>,
    pub resolved_config: Vec<(String, String)>,
}

impl ArtifactWriter<'_> {
    pub fn write(&self, outcome: &PresetOutcome) -> std::io::Result<Vec<String>> {
        fs::create_dir_all(self.dir)?;
        let mut names = Vec::new();
        let mut used: BTreeMap<String, usize> = BTreeMap::new();
        let mut unique = |stem: String| -> String {
            let n = used.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                stem
            } else {
                format!("{stem}_{n}")
            }
        };

        for (name, res) in &outcome.series {
            let stem = if name == "main" {
                self.subcommand.to_string()
            } else {
                format!("{}.{}", self.subcommand, sanitize(name))
            };
            let file = format!("{}.csv", unique(stem));
            write_atomic(&self.dir.join(&file), series_csv(res).as_bytes())?;
            names.push(file);
        }
        for table in &outcome.tables {
            let file = format!(
                "{}.csv",
                unique(format!("{}.{}", self.subcommand, sanitize(table.name)))
            );
            write_atomic(&self.dir.join(&file), table_csv(table).as_bytes())?;
            names.push(file);
        }

        let config_map: BTreeMap<String, String> = self.resolved_config.iter().cloned().collect();
        let summary = Summary {
            preset: &outcome.preset,
            n_used: outcome.n_used,
            master_seed: outcome.master_seed,
            cross_validation_fidelity: outcome.cross_validation_fidelity,
            scalars: &outcome.scalars,
            fits: &outcome.fits,
            checks: &outcome.checks,
            all_checks_passed: outcome.all_passed(),
            tables: &outcome.tables,
            resolved_config: config_map.clone(),
        };
        let summary_file = format!("{}.summary.json", self.subcommand);
        write_atomic(
            &self.dir.join(&summary_file),
            serde_json::to_string_pretty(&summary)
                .expect("summary serializes")
                .as_bytes(),
        )?;
        names.push(summary_file);

        let manifest_file = format!("{}.manifest.json", self.subcommand);
        let manifest = Manifest {
            subcommand: self.subcommand,
            tool: "ccd-sim",
            version: env!("CARGO_PKG_VERSION"),
            started: self.started,
            finished: Utc::now(),
            master_seed: outcome.master_seed,
            threads: self.threads,
            overridden_keys: self.overridden_keys.clone(),
            resolved_config: config_map,
            outputs: {
                let mut o = names.clone();
                o.push(manifest_file.clone());
                o
            },
        };
        write_atomic(
            &self.dir.join(&manifest_file),
            serde_json::to_string_pretty(&manifest)
                .expect("manifest serializes")
                .as_bytes(),
        )?;
        names.push(manifest_file);
        Ok(names)
    }
}

/// Full paths of the artifacts `write` produced.
pub fn full_paths(dir: &Path, names: &[String]) -> Vec<PathBuf> {
    names.iter().map(|n| dir.join(n)).collect()
}
