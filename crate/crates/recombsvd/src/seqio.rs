//! Aligned sequence populations: FASTA parsing, validation, and indexing.
//!
//! All genomic coordinates on the public surface are 1-based, matching the
//! conventions of the output reports. Characters are kept verbatim; the only
//! normalization is optional case folding to upper case (on by default).
//! Gaps, Ns, and ambiguity codes are ordinary characters: two positions match
//! iff their bytes are identical after folding.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Declared character set of a population. Characters outside the set are
/// retained and compared byte-for-byte; the alphabet only matters to the
/// simulator, which draws substitutions from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<u8>,
}

impl Alphabet {
    pub fn nucleotide() -> Self {
        Alphabet {
            symbols: b"ACGT".to_vec(),
        }
    }

    pub fn new(symbols: &[u8]) -> Self {
        Alphabet {
            symbols: symbols.to_vec(),
        }
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::nucleotide()
    }
}

/// An immutable population of `n ≥ 2` aligned sequences of equal length `L`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequencePopulation {
    sequences: Vec<Vec<u8>>,
    labels: Vec<String>,
    length: usize,
    alphabet: Alphabet,
}

/// Options for [`parse_fasta`].
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Fold sequence characters to upper case (FASTA case is conventionally
    /// insignificant). Disable to compare raw bytes.
    pub fold_case: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { fold_case: true }
    }
}

impl SequencePopulation {
    /// Builds a population from parallel label/sequence lists, enforcing the
    /// alignment invariants.
    pub fn new(labels: Vec<String>, sequences: Vec<Vec<u8>>) -> Result<Self> {
        Self::with_alphabet(labels, sequences, Alphabet::nucleotide())
    }

    pub fn with_alphabet(
        labels: Vec<String>,
        sequences: Vec<Vec<u8>>,
        alphabet: Alphabet,
    ) -> Result<Self> {
        assert_eq!(labels.len(), sequences.len());
        if sequences.is_empty() {
            return Err(Error::EmptyInput);
        }
        if sequences.len() < 2 {
            return Err(Error::TooFewSequences {
                found: sequences.len(),
            });
        }
        let length = sequences[0].len();
        for (label, seq) in labels.iter().zip(&sequences) {
            if seq.is_empty() {
                return Err(Error::MalformedRecord {
                    label: label.clone(),
                });
            }
            if seq.len() != length {
                return Err(Error::Alignment {
                    label: label.clone(),
                    expected: length,
                    found: seq.len(),
                });
            }
        }
        Ok(SequencePopulation {
            sequences,
            labels,
            length,
            alphabet,
        })
    }

    /// Number of sequences `n`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Aligned length `L`.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sequence(&self, index: usize) -> &[u8] {
        &self.sequences[index]
    }

    pub fn sequences(&self) -> &[Vec<u8>] {
        &self.sequences
    }

    /// Entries `y..z` inclusive of sequence `j`; all three indices are
    /// 1-based. Requires `1 ≤ y ≤ z ≤ L` and `1 ≤ j ≤ n`.
    pub fn subsequence(&self, j: usize, y: usize, z: usize) -> Result<&[u8]> {
        if j < 1 || j > self.sequences.len() {
            return Err(Error::Bounds(format!(
                "sequence index {j} outside 1..={}",
                self.sequences.len()
            )));
        }
        if y < 1 || z < y || z > self.length {
            return Err(Error::Bounds(format!(
                "positions {y}..{z} outside 1..={} or reversed",
                self.length
            )));
        }
        Ok(&self.sequences[j - 1][y - 1..z])
    }

    /// Applies one position permutation to every sequence: output position
    /// `q` holds the input character at position `perm[q]` (0-based mapping,
    /// `perm` must be a permutation of `0..L`).
    pub fn permute_positions(&self, perm: &[u32]) -> SequencePopulation {
        assert_eq!(perm.len(), self.length);
        let sequences = self
            .sequences
            .iter()
            .map(|seq| perm.iter().map(|&p| seq[p as usize]).collect())
            .collect();
        SequencePopulation {
            sequences,
            labels: self.labels.clone(),
            length: self.length,
            alphabet: self.alphabet.clone(),
        }
    }
}

/// Parses FASTA text into a population. Sequence lines are concatenated with
/// internal whitespace stripped; headers (without the `>`) become labels.
pub fn parse_fasta<R: BufRead>(reader: R, options: ParseOptions) -> Result<SequencePopulation> {
    let mut labels: Vec<String> = Vec::new();
    let mut sequences: Vec<Vec<u8>> = Vec::new();
    let mut saw_any_header = false;

    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim_end();
        if let Some(header) = trimmed.strip_prefix('>') {
            saw_any_header = true;
            labels.push(header.trim().to_string());
            sequences.push(Vec::new());
        } else {
            if trimmed.trim().is_empty() {
                continue;
            }
            let current = match sequences.last_mut() {
                Some(seq) => seq,
                None => {
                    return Err(Error::MalformedRecord {
                        label: "<sequence data before first header>".into(),
                    })
                }
            };
            for &b in trimmed.as_bytes() {
                if b.is_ascii_whitespace() {
                    continue;
                }
                current.push(if options.fold_case {
                    b.to_ascii_uppercase()
                } else {
                    b
                });
            }
        }
    }

    if !saw_any_header {
        return Err(Error::EmptyInput);
    }
    SequencePopulation::new(labels, sequences)
}

pub fn parse_fasta_path<P: AsRef<Path>>(
    path: P,
    options: ParseOptions,
) -> Result<SequencePopulation> {
    let file = std::fs::File::open(path)?;
    parse_fasta(std::io::BufReader::new(file), options)
}

/// Writes `>label\n<sequence>\n` per record with no line wrapping, the exact
/// inverse of [`parse_fasta`] on (labels, sequences).
pub fn write_fasta<W: Write>(pop: &SequencePopulation, mut writer: W) -> Result<()> {
    for (label, seq) in pop.labels().iter().zip(pop.sequences()) {
        writer.write_all(b">")?;
        writer.write_all(label.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.write_all(seq)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
