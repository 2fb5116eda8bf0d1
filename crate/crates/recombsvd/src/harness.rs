//! Synthetic evaluation harness: FP/FN rates over the rate-configuration
//! grid and location-error ECDFs per method and vector, as plot-ready CSV.
//!
//! A false positive is calling more hot spots than the truth, a false
//! negative calling fewer; rates are per cell over scored trials. Location
//! errors (|inferred − nearest true breakpoint|) are collected only from
//! trials where the hot spot count was correct. Zero-recombination cells
//! have no defined FN rate and report it as NA.

use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::detector::{self, DetectConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::simgen::{self, derive_seed, SimulationConfig};

const TRIAL_TAG: u64 = 0x7472_6961_6c; // "trial"
const DETECT_TAG: u64 = 0x6465_74; // "det"

pub const COMMON_RATES: [f64; 2] = [0.05, 0.25];
pub const INDIVIDUAL_RATES: [f64; 2] = [0.05, 0.25];
pub const RECOMB_COUNTS: [usize; 3] = [0, 1, 2];

/// The full synthetic evaluation: every (r_c, r_i, recombinations) cell with
/// a fixed number of trials.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentGrid {
    pub trials: usize,
    pub population_size: usize,
    pub sequence_length: usize,
    pub detector: DetectConfig,
    pub master_seed: u64,
    /// Two random breakpoints are kept at least this far apart.
    pub min_separation: usize,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        let detector = DetectConfig::default();
        let min_separation = 3 * detector.window;
        ExperimentGrid {
            trials: 20,
            population_size: 100,
            sequence_length: 1000,
            detector,
            master_seed: 1,
            min_separation,
        }
    }
}

/// One cell of the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellSpec {
    pub index: usize,
    pub common_rate: f64,
    pub individual_rate: f64,
    pub num_recomb: usize,
}

fn rate_name(rate: f64) -> &'static str {
    if rate < 0.15 {
        "low"
    } else {
        "high"
    }
}

impl CellSpec {
    /// Table-style label, e.g. "high/low".
    pub fn label(&self) -> String {
        format!(
            "{}/{}",
            rate_name(self.common_rate),
            rate_name(self.individual_rate)
        )
    }

    /// Filesystem-safe stem, e.g. "high_low_2".
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_{}",
            rate_name(self.common_rate),
            rate_name(self.individual_rate),
            self.num_recomb
        )
    }
}

/// The 12 cells in deterministic order.
pub fn cells() -> Vec<CellSpec> {
    let mut out = Vec::with_capacity(12);
    let mut index = 0;
    for &common_rate in &COMMON_RATES {
        for &individual_rate in &INDIVIDUAL_RATES {
            for &num_recomb in &RECOMB_COUNTS {
                out.push(CellSpec {
                    index,
                    common_rate,
                    individual_rate,
                    num_recomb,
                });
                index += 1;
            }
        }
    }
    out
}

/// Location errors for one (vector, method) stream within a cell.
#[derive(Debug, Clone, Serialize)]
pub struct LocationErrors {
    pub vector_index: usize,
    pub method: String,
    pub errors: Vec<f64>,
}

/// Scores for one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub cell: CellSpec,
    pub trials: usize,
    pub scored_trials: usize,
    pub fp_count: usize,
    pub fn_count: usize,
    pub fp_rate: f64,
    /// NA (None) for zero-recombination cells.
    pub fn_rate: Option<f64>,
    /// Trials in which a vector-3 call exists.
    pub duplicate_eligible: usize,
    /// Of those, trials where the vector-3 location fell within w of the
    /// vector-2 location.
    pub duplicate_count: usize,
    pub duplicate_rate: Option<f64>,
    pub location_errors: Vec<LocationErrors>,
    /// Per-trial diagnostics for trials that failed outright; excluded from
    /// scoring but never silently dropped.
    pub failures: Vec<String>,
}

struct TrialScore {
    inferred: usize,
    truth: Vec<usize>,
    report: DetectionReport,
}

/// Simulates and scores every trial of one cell; trials run in parallel with
/// per-trial seeds derived from (master seed, cell, trial).
pub fn run_cell(grid: &ExperimentGrid, cell: &CellSpec) -> CellResult {
    let outcomes: Vec<std::result::Result<TrialScore, String>> = (0..grid.trials)
        .into_par_iter()
        .map(|trial| {
            let sim_seed = derive_seed(grid.master_seed, TRIAL_TAG + cell.index as u64, trial as u64);
            let config = SimulationConfig {
                population_size: grid.population_size,
                sequence_length: grid.sequence_length,
                common_rate: cell.common_rate,
                individual_rate: cell.individual_rate,
                num_recomb: cell.num_recomb,
                recomb_locations: None,
                min_separation: grid.min_separation,
                seed: sim_seed,
            };
            let run = || -> Result<TrialScore> {
                let sim = simgen::simulate(&config)?;
                let det = DetectConfig {
                    seed: derive_seed(sim_seed, DETECT_TAG, 0),
                    ..grid.detector.clone()
                };
                let report = detector::detect(&sim.population, &det)?;
                Ok(TrialScore {
                    inferred: report.number_of_hotspots,
                    truth: sim.truth,
                    report,
                })
            };
            run().map_err(|e| format!("trial {trial}: {e}"))
        })
        .collect();

    let mut scored_trials = 0;
    let mut fp_count = 0;
    let mut fn_count = 0;
    let mut duplicate_eligible = 0;
    let mut duplicate_count = 0;
    let mut failures = Vec::new();
    let mut errors: Vec<LocationErrors> = Vec::new();

    let mut push_error = |vector_index: usize, method: &str, value: f64| {
        if let Some(slot) = errors
            .iter_mut()
            .find(|e| e.vector_index == vector_index && e.method == method)
        {
            slot.errors.push(value);
        } else {
            errors.push(LocationErrors {
                vector_index,
                method: method.to_string(),
                errors: vec![value],
            });
        }
    };

    for outcome in outcomes {
        let score = match outcome {
            Ok(score) => score,
            Err(diagnostic) => {
                failures.push(diagnostic);
                continue;
            }
        };
        scored_trials += 1;
        let truth_count = score.truth.len();
        if score.inferred > truth_count {
            fp_count += 1;
        }
        if score.inferred < truth_count {
            fn_count += 1;
        }

        if cell.num_recomb == 2 {
            if let Some(third) = score
                .report
                .hotspots
                .iter()
                .find(|c| c.vector_index == 3)
            {
                duplicate_eligible += 1;
                if third.duplicate_of.is_some() {
                    duplicate_count += 1;
                }
            }
        }

        if score.inferred == truth_count && truth_count > 0 {
            for call in &score.report.hotspots {
                let nearest = |loc: usize| -> f64 {
                    score
                        .truth
                        .iter()
                        .map(|&t| loc.abs_diff(t))
                        .min()
                        .unwrap() as f64
                };
                push_error(call.vector_index, "diff", nearest(call.diff_location));
                push_error(call.vector_index, "ols", nearest(call.ols_location));
            }
        }
    }

    let fp_rate = if scored_trials > 0 {
        fp_count as f64 / scored_trials as f64
    } else {
        0.0
    };
    let fn_rate = if cell.num_recomb == 0 {
        None
    } else if scored_trials > 0 {
        Some(fn_count as f64 / scored_trials as f64)
    } else {
        Some(0.0)
    };
    let duplicate_rate = if duplicate_eligible > 0 {
        Some(duplicate_count as f64 / duplicate_eligible as f64)
    } else {
        None
    };

    CellResult {
        cell: *cell,
        trials: grid.trials,
        scored_trials,
        fp_count,
        fn_count,
        fp_rate,
        fn_rate,
        duplicate_eligible,
        duplicate_count,
        duplicate_rate,
        location_errors: errors,
        failures,
    }
}

/// Runs every cell of the grid in order.
pub fn run_grid(grid: &ExperimentGrid) -> Vec<CellResult> {
    cells().iter().map(|cell| run_cell(grid, cell)).collect()
}

/// Right-continuous empirical CDF as sorted (value, fraction ≤ value) pairs.
pub fn ecdf(errors: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::Contract("ecdf of an empty sample".into()));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    Ok(out)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// `table.csv`: one row per cell with rates and raw counts.
pub fn write_table_csv<W: Write>(results: &[CellResult], mut writer: W) -> Result<()> {
    writeln!(
        writer,
        "cell,common_rate,individual_rate,num_recomb,trials,scored_trials,\
         fp_count,fp_rate,fn_count,fn_rate,duplicate_eligible,duplicate_count,duplicate_rate,failures"
    )?;
    for r in results {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell.label(),
            r.cell.common_rate,
            r.cell.individual_rate,
            r.cell.num_recomb,
            r.trials,
            r.scored_trials,
            r.fp_count,
            r.fp_rate,
            r.fn_count,
            fmt_opt(r.fn_rate),
            r.duplicate_eligible,
            r.duplicate_count,
            fmt_opt(r.duplicate_rate),
            r.failures.len(),
        )?;
    }
    Ok(())
}

/// One `ecdf_<cell>_<method>_v<vector>.csv` per non-empty error stream;
/// returns the written paths.
pub fn write_ecdf_files(results: &[CellResult], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for r in results {
        for stream in &r.location_errors {
            if stream.errors.is_empty() {
                continue;
            }
            let steps = ecdf(&stream.errors)?;
            let path = dir.join(format!(
                "ecdf_{}_{}_v{}.csv",
                r.cell.file_stem(),
                stream.method,
                stream.vector_index
            ));
            let mut file = std::fs::File::create(&path)?;
            writeln!(file, "error,fraction")?;
            for (value, fraction) in steps {
                writeln!(file, "{value},{fraction}")?;
            }
            written.push(path);
        }
    }
    Ok(written)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    grid: &'a ExperimentGrid,
    breakpoint_mode: &'a str,
    cells: Vec<CellSpec>,
}

/// Run manifest recording all parameters and the seeding scheme.
pub fn write_manifest_json<W: Write>(grid: &ExperimentGrid, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(
        writer,
        &Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            grid,
            breakpoint_mode: "random uniform in [0.2L, 0.8L] per trial",
            cells: cells(),
        },
    )?;
    Ok(())
}
