//! Synthetic sequence populations with 0, 1, or 2 recombination hot spots.
//!
//! Protocol: draw a uniform ancestral sequence, mutate each position of two
//! copies independently at the common rate to obtain parents A and B, splice
//! daughter templates at the breakpoints (position `t` belongs to the left
//! segment), sample `n` templates uniformly with replacement, then mutate
//! each sampled sequence per position at the individual rate. "Mutating at
//! rate r" means a per-position Bernoulli(r) substitution to a uniformly
//! chosen *different* character.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::seqio::{Alphabet, SequencePopulation};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a stream seed from (master, tag, index); replicates and trials
/// seed their own generators so results are schedule-independent.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index)
}

/// Parameters of one synthetic dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Population size n.
    pub population_size: usize,
    /// Aligned sequence length L.
    pub sequence_length: usize,
    /// Common mutation rate r_c, applied per position to each parent.
    pub common_rate: f64,
    /// Individual mutation rate r_i, applied per position to each sequence.
    pub individual_rate: f64,
    /// Number of recombination hot spots (0, 1, or 2).
    pub num_recomb: usize,
    /// Fixed 1-based breakpoints; `None` draws them uniformly from the
    /// central 60% of the sequence.
    pub recomb_locations: Option<Vec<usize>>,
    /// Minimum separation between two random breakpoints.
    pub min_separation: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(common_rate: f64, individual_rate: f64, num_recomb: usize, seed: u64) -> Self {
        SimulationConfig {
            population_size: 100,
            sequence_length: 1000,
            common_rate,
            individual_rate,
            num_recomb,
            recomb_locations: None,
            min_separation: 150,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "population size must be at least 2, got {}",
                self.population_size
            )));
        }
        if self.sequence_length < 3 {
            return Err(Error::InvalidConfig(format!(
                "sequence length must be at least 3, got {}",
                self.sequence_length
            )));
        }
        for (name, rate) in [
            ("common rate", self.common_rate),
            ("individual rate", self.individual_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        if self.num_recomb > 2 {
            return Err(Error::InvalidConfig(format!(
                "at most 2 recombinations are supported, got {}",
                self.num_recomb
            )));
        }
        if let Some(locations) = &self.recomb_locations {
            if locations.len() != self.num_recomb {
                return Err(Error::InvalidConfig(format!(
                    "{} locations given for {} recombinations",
                    locations.len(),
                    self.num_recomb
                )));
            }
            for pair in locations.windows(2) {
                if pair[1] <= pair[0] {
                    return Err(Error::InvalidConfig(
                        "recombination locations must be strictly increasing".into(),
                    ));
                }
            }
            for &t in locations {
                if t <= 1 || t >= self.sequence_length {
                    return Err(Error::InvalidConfig(format!(
                        "recombination location {t} outside (1, {})",
                        self.sequence_length
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPopulation {
    pub population: SequencePopulation,
    /// 1-based breakpoint positions, ascending.
    pub truth: Vec<usize>,
    /// Parent pattern per sequence, one letter per segment (e.g. "AB").
    pub provenance: Vec<String>,
    pub config: SimulationConfig,
}

#[derive(Serialize)]
struct TruthSidecar<'a> {
    recomb_locations: &'a [usize],
    location_mode: &'a str,
    provenance: &'a [String],
    config: &'a SimulationConfig,
}

impl SimulatedPopulation {
    /// Sidecar JSON with the breakpoints, per-sequence provenance, and the
    /// full configuration echo.
    pub fn write_truth_json<W: Write>(&self, writer: W) -> Result<()> {
        let mode = if self.config.recomb_locations.is_some() {
            "fixed"
        } else {
            "random"
        };
        serde_json::to_writer_pretty(
            writer,
            &TruthSidecar {
                recomb_locations: &self.truth,
                location_mode: mode,
                provenance: &self.provenance,
                config: &self.config,
            },
        )?;
        Ok(())
    }
}

/// Substitutes the character at `pos` with a uniform draw over the other
/// alphabet characters (uniform over the whole alphabet if the current
/// character is foreign).
fn mutate_char(current: u8, alphabet: &Alphabet, rng: &mut ChaCha8Rng) -> u8 {
    let symbols = alphabet.symbols();
    assert!(
        symbols.len() >= 2,
        "mutation requires at least two alphabet characters"
    );
    match symbols.iter().position(|&s| s == current) {
        Some(idx) => {
            let r = rng.gen_range(0..symbols.len() - 1);
            symbols[if r >= idx { r + 1 } else { r }]
        }
        None => symbols[rng.gen_range(0..symbols.len())],
    }
}

fn mutate_positions(seq: &mut [u8], rate: f64, alphabet: &Alphabet, rng: &mut ChaCha8Rng) {
    if rate <= 0.0 {
        return;
    }
    for pos in 0..seq.len() {
        if rng.gen::<f64>() < rate {
            seq[pos] = mutate_char(seq[pos], alphabet, rng);
        }
    }
}

/// Two parents derived from one uniform ancestral sequence by independent
/// per-position mutation at the common rate.
pub fn make_parents(
    length: usize,
    common_rate: f64,
    alphabet: &Alphabet,
    rng: &mut ChaCha8Rng,
) -> (Vec<u8>, Vec<u8>) {
    let symbols = alphabet.symbols();
    let ancestral: Vec<u8> = (0..length)
        .map(|_| symbols[rng.gen_range(0..symbols.len())])
        .collect();
    let mut parent_a = ancestral.clone();
    let mut parent_b = ancestral;
    mutate_positions(&mut parent_a, common_rate, alphabet, rng);
    mutate_positions(&mut parent_b, common_rate, alphabet, rng);
    (parent_a, parent_b)
}

/// All 2^(num_recomb+1) splice templates over the segments cut at the given
/// 1-based breakpoints, labeled by parent pattern in lexicographic order
/// (A < B). Position `t` belongs to the segment left of breakpoint `t`.
pub fn make_daughters(
    parent_a: &[u8],
    parent_b: &[u8],
    locations: &[usize],
) -> Result<Vec<(Vec<u8>, String)>> {
    let length = parent_a.len();
    if parent_b.len() != length {
        return Err(Error::Contract("parents must have equal length".into()));
    }
    for &t in locations {
        if t <= 1 || t >= length {
            return Err(Error::InvalidConfig(format!(
                "recombination location {t} outside (1, {length})"
            )));
        }
    }
    let segments = locations.len() + 1;
    // Segment s covers 0-based positions [bounds[s], bounds[s+1]).
    let mut bounds = Vec::with_capacity(segments + 1);
    bounds.push(0usize);
    bounds.extend(locations.iter().map(|&t| t));
    bounds.push(length);

    let mut templates = Vec::with_capacity(1 << segments);
    for mask in 0..(1u32 << segments) {
        let mut seq = Vec::with_capacity(length);
        let mut pattern = String::with_capacity(segments);
        for s in 0..segments {
            let use_b = (mask >> (segments - 1 - s)) & 1 == 1;
            let parent = if use_b { parent_b } else { parent_a };
            pattern.push(if use_b { 'B' } else { 'A' });
            seq.extend_from_slice(&parent[bounds[s]..bounds[s + 1]]);
        }
        templates.push((seq, pattern));
    }
    Ok(templates)
}

/// Uniform-with-replacement sampling of `n` templates followed by individual
/// mutation; returns the sequences and their provenance patterns.
pub fn sample_population(
    templates: &[(Vec<u8>, String)],
    n: usize,
    individual_rate: f64,
    alphabet: &Alphabet,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<u8>>, Vec<String>) {
    assert!(!templates.is_empty());
    let mut sequences = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for _ in 0..n {
        let (template, pattern) = &templates[rng.gen_range(0..templates.len())];
        let mut seq = template.clone();
        mutate_positions(&mut seq, individual_rate, alphabet, rng);
        sequences.push(seq);
        provenance.push(pattern.clone());
    }
    (sequences, provenance)
}

fn draw_locations(config: &SimulationConfig, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if let Some(fixed) = &config.recomb_locations {
        return Ok(fixed.clone());
    }
    if config.num_recomb == 0 {
        return Ok(Vec::new());
    }
    // Kept away from the edges so full slope windows exist around the truth.
    let length = config.sequence_length;
    let lo = ((length as f64) * 0.2).ceil() as usize;
    let hi = ((length as f64) * 0.8).floor() as usize;
    if lo < 2 || hi >= length || lo > hi {
        return Err(Error::InvalidConfig(format!(
            "sequence length {length} too short for random breakpoint placement"
        )));
    }
    if config.num_recomb == 1 {
        return Ok(vec![rng.gen_range(lo..=hi)]);
    }
    if hi - lo < config.min_separation {
        return Err(Error::InvalidConfig(format!(
            "cannot place two breakpoints at least {} apart within [{lo}, {hi}]",
            config.min_separation
        )));
    }
    loop {
        let a = rng.gen_range(lo..=hi);
        let b = rng.gen_range(lo..=hi);
        let (a, b) = (a.min(b), a.max(b));
        if b - a >= config.min_separation {
            return Ok(vec![a, b]);
        }
    }
}

/// Runs the full protocol for one seeded configuration.
pub fn simulate(config: &SimulationConfig) -> Result<SimulatedPopulation> {
    config.validate()?;
    let alphabet = Alphabet::nucleotide();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let truth = draw_locations(config, &mut rng)?;
    let (parent_a, parent_b) = make_parents(
        config.sequence_length,
        config.common_rate,
        &alphabet,
        &mut rng,
    );
    let templates = make_daughters(&parent_a, &parent_b, &truth)?;
    let (sequences, provenance) = sample_population(
        &templates,
        config.population_size,
        config.individual_rate,
        &alphabet,
        &mut rng,
    );

    let width = config.population_size.to_string().len();
    let labels = (1..=config.population_size)
        .map(|i| format!("seq{i:0width$}"))
        .collect();
    let population = SequencePopulation::with_alphabet(labels, sequences, alphabet)?;
    Ok(SimulatedPopulation {
        population,
        truth,
        provenance,
        config: config.clone(),
    })
}

/// Uniform random permutation of `0..length`.
pub fn random_permutation(length: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut perm: Vec<u32> = (0..length as u32).collect();
    perm.shuffle(rng);
    perm
}

/// Applies one uniform random position permutation to every sequence; the
/// no-recombination surrogate of the permutation null.
pub fn permute_population(pop: &SequencePopulation, seed: u64) -> SequencePopulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = random_permutation(pop.length(), &mut rng);
    pop.permute_positions(&perm)
}
