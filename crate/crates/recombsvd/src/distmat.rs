//! Smoothed Hamming distance matrices over all unordered sequence pairs.
//!
//! For a pair (i, j) and half-width `w`, the entry at genomic position `y`
//! (with `w+1 ≤ y ≤ L−w`) is the Hamming distance between the two inclusive
//! length-(2w+1) windows centered at `y`. Columns are indexed 0-based
//! internally; 1-based column `c` maps to genomic position `c + w`.
//!
//! Two equivalent representations are kept:
//! - [`SmoothedDistanceMatrix`]: dense counts, one `u16` per (pair, column);
//! - [`MismatchOperator`]: per-pair mismatch position lists plus the window
//!   half-width. Rows of the dense matrix are window sums over the lists, so
//!   the operator supports matrix-vector products via prefix sums and
//!   gather/scatter without materializing counts, and a position permutation
//!   of the underlying sequences is a relabeling of the lists.

use rayon::prelude::*;
use std::io::Write;

use crate::error::{Error, Result};
use crate::seqio::SequencePopulation;
use crate::svd::SvdOperator;

/// Largest accepted half-width; keeps window counts within `u16`.
pub const MAX_WINDOW: usize = 32_767;

/// Number of positions where `a` and `b` differ. Errors if lengths differ.
pub fn hamming(a: &[u8], b: &[u8]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "hamming requires equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

fn validate_window(window: usize, length: usize) -> Result<()> {
    if window == 0 || length < 2 * window + 1 {
        return Err(Error::Window { window, length });
    }
    if window > MAX_WINDOW {
        return Err(Error::Window { window, length });
    }
    Ok(())
}

/// Writes the smoothed distance row for one pair into `out` (length `L−2w`),
/// sliding the window incrementally: the entering position's mismatch
/// indicator is added and the exiting one subtracted.
fn smoothed_counts_into(a: &[u8], b: &[u8], window: usize, out: &mut [u16]) {
    let wlen = 2 * window + 1;
    debug_assert_eq!(a.len(), b.len());
    debug_assert_eq!(out.len(), a.len() - 2 * window);

    let mut acc: u32 = 0;
    for pos in 0..wlen {
        acc += u32::from(a[pos] != b[pos]);
    }
    out[0] = acc as u16;
    for c in 1..out.len() {
        acc += u32::from(a[c + 2 * window] != b[c + 2 * window]);
        acc -= u32::from(a[c - 1] != b[c - 1]);
        out[c] = acc as u16;
    }
}

/// Smoothed Hamming distance sequence for sequences `i` and `j` (0-based);
/// entry `c` corresponds to genomic position `c + w + 1`.
pub fn smoothed_pair_sequence(
    pop: &SequencePopulation,
    i: usize,
    j: usize,
    window: usize,
) -> Result<Vec<u32>> {
    if i == j || i >= pop.len() || j >= pop.len() {
        return Err(Error::Bounds(format!(
            "pair ({i}, {j}) invalid for population of {}",
            pop.len()
        )));
    }
    validate_window(window, pop.length())?;
    let mut row = vec![0u16; pop.length() - 2 * window];
    smoothed_counts_into(pop.sequence(i), pop.sequence(j), window, &mut row);
    Ok(row.into_iter().map(u32::from).collect())
}

/// Enumerates unordered pairs in lexicographic (i, j) order with i < j.
fn pair_index(n: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i as u32, j as u32));
        }
    }
    pairs
}

/// Dense smoothed Hamming distance matrix: P = n(n−1)/2 rows, C = L−2w columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothedDistanceMatrix {
    values: Vec<u16>,
    n_pairs: usize,
    n_cols: usize,
    window: usize,
    seq_length: usize,
    pair_index: Vec<(u32, u32)>,
}

impl SmoothedDistanceMatrix {
    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Window half-width `w`; also the column offset of the genomic mapping.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn seq_length(&self) -> usize {
        self.seq_length
    }

    /// Sequence pair (i, j) of a row, i < j, 0-based.
    pub fn pair(&self, row: usize) -> (usize, usize) {
        let (i, j) = self.pair_index[row];
        (i as usize, j as usize)
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pair_index
    }

    pub fn row(&self, row: usize) -> &[u16] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn value(&self, row: usize, col: usize) -> u32 {
        u32::from(self.values[row * self.n_cols + col])
    }

    /// 1-based genomic position of 0-based column `col`.
    pub fn genomic_position(&self, col: usize) -> usize {
        col + self.window + 1
    }

    /// TSV dump: header row of genomic positions, then one row per pair
    /// labeled `label_i|label_j`.
    pub fn write_tsv<W: Write>(&self, labels: &[String], mut writer: W) -> Result<()> {
        write!(writer, "pair")?;
        for col in 0..self.n_cols {
            write!(writer, "\t{}", self.genomic_position(col))?;
        }
        writeln!(writer)?;
        for row in 0..self.n_pairs {
            let (i, j) = self.pair(row);
            write!(writer, "{}|{}", labels[i], labels[j])?;
            for &v in self.row(row) {
                write!(writer, "\t{v}")?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

/// Builds the dense matrix over all pairs; rows are computed independently in
/// parallel.
pub fn build_matrix(pop: &SequencePopulation, window: usize) -> Result<SmoothedDistanceMatrix> {
    validate_window(window, pop.length())?;
    let n = pop.len();
    let n_cols = pop.length() - 2 * window;
    let pairs = pair_index(n);
    let n_pairs = pairs.len();

    let mut values = vec![0u16; n_pairs * n_cols];
    values
        .par_chunks_mut(n_cols)
        .zip(pairs.par_iter())
        .for_each(|(row, &(i, j))| {
            smoothed_counts_into(
                pop.sequence(i as usize),
                pop.sequence(j as usize),
                window,
                row,
            );
        });

    Ok(SmoothedDistanceMatrix {
        values,
        n_pairs,
        n_cols,
        window,
        seq_length: pop.length(),
        pair_index: pairs,
    })
}

fn dot_u16(row: &[u16], v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = row.len() / 4;
    for c in 0..chunks {
        let r = &row[c * 4..c * 4 + 4];
        let x = &v[c * 4..c * 4 + 4];
        acc[0] += f64::from(r[0]) * x[0];
        acc[1] += f64::from(r[1]) * x[1];
        acc[2] += f64::from(r[2]) * x[2];
        acc[3] += f64::from(r[3]) * x[3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..row.len() {
        tail += f64::from(row[i]) * v[i];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

impl SvdOperator for SmoothedDistanceMatrix {
    fn nrows(&self) -> usize {
        self.n_pairs
    }

    fn ncols(&self) -> usize {
        self.n_cols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.values.chunks_exact(self.n_cols)) {
            *o = dot_u16(row, v);
        }
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&s, row) in u.iter().zip(self.values.chunks_exact(self.n_cols)) {
            if s == 0.0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o += s * f64::from(r);
            }
        }
    }

    fn apply_normal(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for row in self.values.chunks_exact(self.n_cols) {
            let s = dot_u16(row, v);
            if s == 0.0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o += s * f64::from(r);
            }
        }
    }
}

/// The same matrix in factored form: per-pair mismatch position lists plus
/// the smoothing window. Entry (p, c) equals the number of listed positions
/// of pair p inside the window of column c.
#[derive(Debug, Clone)]
pub struct MismatchOperator {
    offsets: Vec<usize>,
    positions: Vec<u32>,
    window: usize,
    seq_length: usize,
    n_cols: usize,
    pair_index: Vec<(u32, u32)>,
}

impl MismatchOperator {
    pub fn from_population(pop: &SequencePopulation, window: usize) -> Result<Self> {
        validate_window(window, pop.length())?;
        let pairs = pair_index(pop.len());
        let lists: Vec<Vec<u32>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let a = pop.sequence(i as usize);
                let b = pop.sequence(j as usize);
                a.iter()
                    .zip(b)
                    .enumerate()
                    .filter(|(_, (x, y))| x != y)
                    .map(|(pos, _)| pos as u32)
                    .collect()
            })
            .collect();

        let mut offsets = Vec::with_capacity(pairs.len() + 1);
        offsets.push(0usize);
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut positions = Vec::with_capacity(total);
        for list in &lists {
            positions.extend_from_slice(list);
            offsets.push(positions.len());
        }

        Ok(MismatchOperator {
            offsets,
            positions,
            window,
            seq_length: pop.length(),
            n_cols: pop.length() - 2 * window,
            pair_index: pairs,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_index.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn seq_length(&self) -> usize {
        self.seq_length
    }

    /// Total mismatch count of a pair over the full length, independent of
    /// the window.
    pub fn pair_total(&self, row: usize) -> usize {
        self.offsets[row + 1] - self.offsets[row]
    }

    /// True when every pair of sequences is identical (the matrix is zero).
    pub fn no_mismatches(&self) -> bool {
        self.positions.is_empty()
    }

    fn list(&self, row: usize) -> &[u32] {
        &self.positions[self.offsets[row]..self.offsets[row + 1]]
    }

    /// The operator for the population with positions remapped by `inverse`,
    /// where `inverse[old] = new`. Equivalent to rebuilding from
    /// `pop.permute_positions(perm)` when `inverse` inverts `perm`.
    pub fn permuted(&self, inverse: &[u32]) -> MismatchOperator {
        assert_eq!(inverse.len(), self.seq_length);
        MismatchOperator {
            offsets: self.offsets.clone(),
            positions: self.positions.iter().map(|&p| inverse[p as usize]).collect(),
            window: self.window,
            seq_length: self.seq_length,
            n_cols: self.n_cols,
            pair_index: self.pair_index.clone(),
        }
    }

    /// Dense counts of one row; works for unsorted lists.
    pub fn materialize_row(&self, row: usize) -> Vec<u16> {
        // Difference array over column starts: position `pos` covers columns
        // [pos−2w, pos] clipped to [0, C).
        let mut diff = vec![0i32; self.n_cols + 1];
        let two_w = 2 * self.window;
        for &pos in self.list(row) {
            let pos = pos as usize;
            let lo = pos.saturating_sub(two_w);
            let hi = pos.min(self.n_cols - 1);
            if lo > hi {
                continue;
            }
            diff[lo] += 1;
            diff[hi + 1] -= 1;
        }
        let mut out = Vec::with_capacity(self.n_cols);
        let mut acc = 0i32;
        for c in 0..self.n_cols {
            acc += diff[c];
            out.push(acc as u16);
        }
        out
    }

    pub fn to_matrix(&self) -> SmoothedDistanceMatrix {
        let mut values = vec![0u16; self.n_pairs() * self.n_cols];
        values
            .par_chunks_mut(self.n_cols)
            .enumerate()
            .for_each(|(row, chunk)| {
                chunk.copy_from_slice(&self.materialize_row(row));
            });
        SmoothedDistanceMatrix {
            values,
            n_pairs: self.n_pairs(),
            n_cols: self.n_cols,
            window: self.window,
            seq_length: self.seq_length,
            pair_index: self.pair_index.clone(),
        }
    }

    /// Prefix sums of `v`; `smoothed[pos] = Σ v[c] over columns whose window
    /// contains pos` evaluates as a prefix difference.
    fn window_spread(&self, v: &[f64]) -> Vec<f64> {
        let two_w = 2 * self.window;
        let mut prefix = vec![0.0f64; self.n_cols + 1];
        for (c, &x) in v.iter().enumerate() {
            prefix[c + 1] = prefix[c] + x;
        }
        let mut t = vec![0.0f64; self.seq_length];
        for (pos, slot) in t.iter_mut().enumerate() {
            let hi = pos.min(self.n_cols - 1);
            let lo = pos.saturating_sub(two_w);
            if lo <= hi {
                *slot = prefix[hi + 1] - prefix[lo];
            }
        }
        t
    }

    /// Window sums of a length-L vector: `out[c] = Σ z[pos] for pos in
    /// [c, c+2w]`.
    fn window_collect(&self, z: &[f64], out: &mut [f64]) {
        let two_w = 2 * self.window;
        let mut prefix = vec![0.0f64; self.seq_length + 1];
        for (p, &x) in z.iter().enumerate() {
            prefix[p + 1] = prefix[p] + x;
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o = prefix[c + two_w + 1] - prefix[c];
        }
    }
}

impl SvdOperator for MismatchOperator {
    fn nrows(&self) -> usize {
        self.n_pairs()
    }

    fn ncols(&self) -> usize {
        self.n_cols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let t = self.window_spread(v);
        for (row, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &pos in self.list(row) {
                acc += t[pos as usize];
            }
            *o = acc;
        }
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let mut z = vec![0.0f64; self.seq_length];
        for (row, &s) in u.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for &pos in self.list(row) {
                z[pos as usize] += s;
            }
        }
        self.window_collect(&z, out);
    }

    fn apply_normal(&self, v: &[f64], out: &mut [f64]) {
        let t = self.window_spread(v);
        let mut z = vec![0.0f64; self.seq_length];
        for row in 0..self.n_pairs() {
            let list = self.list(row);
            let mut acc = 0.0;
            for &pos in list {
                acc += t[pos as usize];
            }
            if acc == 0.0 {
                continue;
            }
            for &pos in list {
                z[pos as usize] += acc;
            }
        }
        self.window_collect(&z, out);
    }
}
