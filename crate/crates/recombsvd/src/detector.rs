//! Existence testing and location inference for recombination hot spots.
//!
//! A population with a recombination produces a second right singular vector
//! that transitions smoothly from one sign to the other, so its mean
//! successive difference d̄ is small. The threshold γ is calibrated per
//! population from permuted surrogates: each of M replicates applies one
//! shared random position permutation to every sequence, which redistributes
//! mismatch locations while preserving per-pair totals, and γ is the lower
//! α-quantile of the replicate d̄ values. Vector m = 2 tests the first hot
//! spot, m = 3 the second, and so on; evaluation stops at the first negative
//! verdict.
//!
//! Locations come from slope maximization over the chosen right singular
//! vector: `diff` takes |x[i−⌊w/2⌋] − x[i+⌊w/2⌋]|, `ols` the absolute dot
//! product with the centered unit ramp (proportional to the least-squares
//! slope of the window, so both share their argmax with the normalized
//! estimate).

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::distmat::MismatchOperator;
use crate::error::{Error, Result};
use crate::seqio::SequencePopulation;
use crate::simgen::{derive_seed, random_permutation};
use crate::svd::{self, SvdFactors, SvdOptions};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PERMUTATION_TAG: u64 = 0x7065_726d; // "perm"
const OBSERVED_TAG: u64 = 0x6f62_73; // "obs"

/// Detection parameters; defaults are w = 50, M = 100, α = 0.05, K = 2.
#[derive(Debug, Clone, Serialize)]
pub struct DetectConfig {
    /// Smoothing half-width w; also the slope window size.
    pub window: usize,
    /// Number of permutation replicates M.
    pub permutations: usize,
    /// Lower-tail quantile level for γ.
    pub alpha: f64,
    pub seed: u64,
    /// Maximum number of hot spots K; vectors 2..K+1 are tested in order.
    pub max_hotspots: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig {
            window: 50,
            permutations: 100,
            alpha: 0.05,
            seed: 0,
            max_hotspots: 2,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be positive".into()));
        }
        if self.permutations == 0 {
            return Err(Error::InvalidConfig(
                "at least one permutation replicate is required".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.max_hotspots == 0 {
            return Err(Error::InvalidConfig(
                "max hotspots must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// d̄(x): the sum of absolute successive differences divided by the vector
/// length N (the stated divisor is N, not N−1).
pub fn mean_successive_difference(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Contract(format!(
            "mean successive difference needs at least 2 entries, got {}",
            x.len()
        )));
    }
    let sum: f64 = x.windows(2).map(|p| (p[0] - p[1]).abs()).sum();
    Ok(sum / x.len() as f64)
}

/// |x[center−⌊w/2⌋] − x[center+⌊w/2⌋]| at a 0-based center index.
pub fn slope_diff(x: &[f64], center: usize, window: usize) -> Result<f64> {
    let h = window / 2;
    if center < h || center + h >= x.len() {
        return Err(Error::Bounds(format!(
            "slope window [{center}−{h}, {center}+{h}] outside 0..{}",
            x.len()
        )));
    }
    Ok((x[center - h] - x[center + h]).abs())
}

/// |⟨window, z⟩| where z ramps from −⌊w/2⌋ to ⌊w/2⌋ in unit increments.
pub fn slope_ols(x: &[f64], center: usize, window: usize) -> Result<f64> {
    let h = window / 2;
    if center < h || center + h >= x.len() {
        return Err(Error::Bounds(format!(
            "slope window [{center}−{h}, {center}+{h}] outside 0..{}",
            x.len()
        )));
    }
    let mut acc = 0.0;
    for (offset, &value) in x[center - h..=center + h].iter().enumerate() {
        acc += value * (offset as f64 - h as f64);
    }
    Ok(acc.abs())
}

/// Locations and scores from one right singular vector, in 1-based genomic
/// coordinates. `tie` records that another center reached the same score
/// (the smaller index wins).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LocatedHotspot {
    pub diff_location: usize,
    pub diff_score: f64,
    pub diff_tie: bool,
    pub ols_location: usize,
    pub ols_score: f64,
    pub ols_tie: bool,
}

/// Scans all valid slope-window centers of `v` and takes the argmax per
/// method; `column_offset` maps the winning column to genomic coordinates.
pub fn locate_hotspot(v: &[f64], window: usize, column_offset: usize) -> Result<LocatedHotspot> {
    let h = window / 2;
    if v.len() < 2 * h + 1 {
        return Err(Error::Window {
            window,
            length: v.len(),
        });
    }
    let mut best_diff = (0usize, f64::NEG_INFINITY, false);
    let mut best_ols = (0usize, f64::NEG_INFINITY, false);
    for center in h..v.len() - h {
        let d = slope_diff(v, center, window)?;
        if d > best_diff.1 {
            best_diff = (center, d, false);
        } else if d == best_diff.1 {
            best_diff.2 = true;
        }
        let o = slope_ols(v, center, window)?;
        if o > best_ols.1 {
            best_ols = (center, o, false);
        } else if o == best_ols.1 {
            best_ols.2 = true;
        }
    }
    Ok(LocatedHotspot {
        diff_location: best_diff.0 + column_offset + 1,
        diff_score: best_diff.1,
        diff_tie: best_diff.2,
        ols_location: best_ols.0 + column_offset + 1,
        ols_score: best_ols.1,
        ols_tie: best_ols.2,
    })
}

/// One existence test: recombination is present iff d̄ < γ.
#[derive(Debug, Clone, Serialize)]
pub struct ExistenceTest {
    /// Which right singular vector (2 for the first hot spot).
    pub vector_index: usize,
    pub d_bar: f64,
    pub gamma: f64,
    pub num_permutations: usize,
    pub alpha: f64,
    pub verdict: bool,
    /// The backing singular value is tied with a neighbor; the vector basis
    /// is then arbitrary within the tied subspace.
    pub unstable: bool,
}

/// A located hot spot with both methods' answers.
#[derive(Debug, Clone, Serialize)]
pub struct HotspotCall {
    pub vector_index: usize,
    pub diff_location: usize,
    pub diff_score: f64,
    pub diff_tie: bool,
    pub ols_location: usize,
    pub ols_score: f64,
    pub ols_tie: bool,
    /// Earlier vector whose location lies within w of this one (flag only,
    /// the call is never suppressed).
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportParameters {
    pub window: usize,
    /// Window length 2w+1: the smoothing window is inclusive of both ends.
    pub window_length: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub max_hotspots: usize,
    pub k: usize,
    pub orthonormality_tol: f64,
    pub residual_tol: f64,
    pub tool: String,
    pub version: String,
}

/// Which location method(s) to include in serialized reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    Diff,
    Ols,
    Both,
}

impl std::str::FromStr for MethodSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diff" => Ok(MethodSelection::Diff),
            "ols" => Ok(MethodSelection::Ols),
            "both" => Ok(MethodSelection::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown method \"{other}\" (expected diff, ols, or both)"
            ))),
        }
    }
}

/// Full detection outcome for one population.
#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub parameters: ReportParameters,
    /// The distance matrix was identically zero or had rank < 2; no
    /// existence test is meaningful and zero hot spots are reported.
    pub no_signal: bool,
    pub singular_values: Vec<f64>,
    pub existence_tests: Vec<ExistenceTest>,
    pub hotspots: Vec<HotspotCall>,
    pub number_of_hotspots: usize,
}

impl DetectionReport {
    /// Canonical JSON with one hotspot entry per (vector, method).
    pub fn to_json(&self, method: MethodSelection) -> String {
        let mut hotspots = Vec::new();
        for call in &self.hotspots {
            if method != MethodSelection::Ols {
                hotspots.push(json!({
                    "vector_index": call.vector_index,
                    "method": "diff",
                    "location": call.diff_location,
                    "score": call.diff_score,
                    "tie": call.diff_tie,
                    "duplicate_flag": call.duplicate_of.is_some(),
                    "duplicate_of": call.duplicate_of,
                }));
            }
            if method != MethodSelection::Diff {
                hotspots.push(json!({
                    "vector_index": call.vector_index,
                    "method": "ols",
                    "location": call.ols_location,
                    "score": call.ols_score,
                    "tie": call.ols_tie,
                    "duplicate_flag": call.duplicate_of.is_some(),
                    "duplicate_of": call.duplicate_of,
                }));
            }
        }
        let value = json!({
            "parameters": self.parameters,
            "no_signal": self.no_signal,
            "singular_values": self.singular_values,
            "existence_tests": self.existence_tests,
            "hotspots": hotspots,
            "number_of_hotspots": self.number_of_hotspots,
        });
        serde_json::to_string_pretty(&value).expect("report serialization cannot fail")
    }
}

/// Lower empirical α-quantile (type 1): the ⌈αM⌉-th smallest value.
fn lower_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let idx = ((alpha * m as f64 - 1e-9).ceil() as usize)
        .saturating_sub(1)
        .min(m - 1);
    sorted[idx]
}

fn svd_options(seed: u64) -> SvdOptions {
    SvdOptions {
        seed,
        ..SvdOptions::default()
    }
}

/// d̄ of right singular vectors 2..=k for each of M permuted replicates.
/// Replicates run in parallel; replicate r derives its permutation and SVD
/// seed from (seed, r), so results are schedule-independent.
fn replicate_dbars(
    base: &MismatchOperator,
    k: usize,
    permutations: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..permutations)
        .into_par_iter()
        .map(|r| {
            let replicate_seed = derive_seed(seed, PERMUTATION_TAG, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed);
            let perm = random_permutation(base.seq_length(), &mut rng);
            let mut inverse = vec![0u32; perm.len()];
            for (new_pos, &old_pos) in perm.iter().enumerate() {
                inverse[old_pos as usize] = new_pos as u32;
            }
            let op = base.permuted(&inverse);
            let factors = svd::truncated_svd_operator(&op, k, &svd_options(replicate_seed), 0)
                .map_err(|e| Error::Replicate {
                    index: r,
                    source: Box::new(e),
                })?;
            (2..=k)
                .map(|m| mean_successive_difference(factors.right_vector(m - 1)))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Replicate {
                    index: r,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// γ for one vector index: the lower α-quantile of d̄ over M permuted
/// replicates of the population.
pub fn permutation_null_threshold(
    pop: &SequencePopulation,
    window: usize,
    vector_index: usize,
    permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    if vector_index < 2 {
        return Err(Error::InvalidConfig(format!(
            "existence tests start at the second right singular vector, got {vector_index}"
        )));
    }
    if permutations == 0 {
        return Err(Error::InvalidConfig(
            "at least one permutation replicate is required".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let base = MismatchOperator::from_population(pop, window)?;
    let max_rank = base.n_pairs().min(base.n_cols());
    if vector_index > max_rank {
        return Err(Error::Rank {
            requested: vector_index,
            max: max_rank,
        });
    }
    let dbars = replicate_dbars(&base, vector_index, permutations, seed)?;
    let values: Vec<f64> = dbars.iter().map(|row| row[vector_index - 2]).collect();
    Ok(lower_quantile(&values, alpha))
}

fn report_parameters(config: &DetectConfig, k: usize) -> ReportParameters {
    ReportParameters {
        window: config.window,
        window_length: 2 * config.window + 1,
        permutations: config.permutations,
        alpha: config.alpha,
        seed: config.seed,
        max_hotspots: config.max_hotspots,
        k,
        orthonormality_tol: svd::ORTHONORMALITY_TOL,
        residual_tol: svd::RESIDUAL_TOL,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Runs the full pipeline: build the smoothed distance matrix once, take
/// k = K+1 singular triplets, test vectors 2..K+1 in order against their
/// permutation-null thresholds (all thresholds reuse the same M replicate
/// SVDs), locate hot spots for positive verdicts, and stop at the first
/// negative verdict.
pub fn detect(pop: &SequencePopulation, config: &DetectConfig) -> Result<DetectionReport> {
    config.validate()?;
    let w = config.window;
    if pop.length() < 3 * w + 1 {
        return Err(Error::InvalidConfig(format!(
            "sequence length {} too short for window {w}: locating needs L ≥ 3w+1",
            pop.length()
        )));
    }

    let base = MismatchOperator::from_population(pop, w)?;
    let requested_k = config.max_hotspots + 1;
    let max_rank = base.n_pairs().min(base.n_cols());
    let k = requested_k.min(max_rank);

    // All sequences identical, or too few pairs for a second singular
    // vector: reported as "no signal" with zero hot spots.
    if base.no_mismatches() || k < 2 {
        return Ok(DetectionReport {
            parameters: report_parameters(config, k),
            no_signal: true,
            singular_values: Vec::new(),
            existence_tests: Vec::new(),
            hotspots: Vec::new(),
            number_of_hotspots: 0,
        });
    }

    let observed_seed = derive_seed(config.seed, OBSERVED_TAG, 0);
    let factors = svd::truncated_svd_operator(&base, k, &svd_options(observed_seed), w)?;
    if factors.singular_values()[0] <= 0.0 {
        return Ok(DetectionReport {
            parameters: report_parameters(config, k),
            no_signal: true,
            singular_values: factors.singular_values().to_vec(),
            existence_tests: Vec::new(),
            hotspots: Vec::new(),
            number_of_hotspots: 0,
        });
    }

    let dbars = replicate_dbars(&base, k, config.permutations, config.seed)?;
    let gammas: Vec<f64> = (2..=k)
        .map(|m| {
            let values: Vec<f64> = dbars.iter().map(|row| row[m - 2]).collect();
            lower_quantile(&values, config.alpha)
        })
        .collect();

    let mut existence_tests = Vec::new();
    let mut hotspots: Vec<HotspotCall> = Vec::new();
    for m in 2..=k {
        let v = factors.right_vector(m - 1);
        let d_bar = mean_successive_difference(v)?;
        let gamma = gammas[m - 2];
        let verdict = d_bar < gamma;
        existence_tests.push(ExistenceTest {
            vector_index: m,
            d_bar,
            gamma,
            num_permutations: config.permutations,
            alpha: config.alpha,
            verdict,
            unstable: factors.is_tied(m - 1),
        });
        if !verdict {
            break;
        }
        let location = locate_hotspot(v, w, factors.column_offset())?;
        let duplicate_of = hotspots
            .iter()
            .find(|c| {
                c.diff_location.abs_diff(location.diff_location) <= w
                    || c.ols_location.abs_diff(location.ols_location) <= w
            })
            .map(|c| c.vector_index);
        hotspots.push(HotspotCall {
            vector_index: m,
            diff_location: location.diff_location,
            diff_score: location.diff_score,
            diff_tie: location.diff_tie,
            ols_location: location.ols_location,
            ols_score: location.ols_score,
            ols_tie: location.ols_tie,
            duplicate_of,
        });
    }

    Ok(DetectionReport {
        parameters: report_parameters(config, k),
        no_signal: false,
        singular_values: factors.singular_values().to_vec(),
        number_of_hotspots: hotspots.len(),
        existence_tests,
        hotspots,
    })
}

/// Right singular vectors of a population's smoothed distance matrix, for
/// plot-data export.
pub fn population_factors(
    pop: &SequencePopulation,
    window: usize,
    k: usize,
    seed: u64,
) -> Result<SvdFactors> {
    let base = MismatchOperator::from_population(pop, window)?;
    svd::truncated_svd_operator(&base, k, &svd_options(seed), window)
}
