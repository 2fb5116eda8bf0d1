//! Truncated SVD of the smoothed distance matrix.
//!
//! The top-k singular triplets are computed by Lanczos iteration on the
//! normal operator XᵀX with full reorthogonalization, so only matrix-vector
//! products with X are required and the factored mismatch representation can
//! be used directly. Ritz values/vectors come from the small tridiagonal
//! eigenproblem; left vectors are recovered as Xvᵢ/‖Xvᵢ‖. The iteration is
//! deterministic for a fixed seed (the seed drives the start vector and any
//! breakdown restarts).
//!
//! Contracts checked on every result before it is returned:
//! - singular values non-increasing;
//! - left and right vectors orthonormal within `ORTHONORMALITY_TOL`;
//! - `‖X vᵢ − dᵢ uᵢ‖ ≤ RESIDUAL_TOL · max(1, d₁)` for each retained triplet;
//! - sign convention: the largest-magnitude entry of each right vector is
//!   positive (uᵢ and vᵢ are flipped together).

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::distmat::SmoothedDistanceMatrix;
use crate::error::{Error, Result};

/// Orthonormality tolerance: |⟨a, b⟩ − δ_ab| for retained vector pairs.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
/// Residual tolerance, relative to max(1, d₁).
pub const RESIDUAL_TOL: f64 = 1e-6;
/// Adjacent singular values closer than this (relative to max(1, d₁)) are
/// reported as tied; any orthonormal basis of the tied subspace is accepted.
pub const TIE_TOL: f64 = 1e-6;

/// Matrix-free view of a real matrix: forward, transpose, and normal
/// (XᵀX) products.
pub trait SvdOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
    fn apply_transpose(&self, u: &[f64], out: &mut [f64]);

    fn apply_normal(&self, v: &[f64], out: &mut [f64]) {
        let mut scratch = vec![0.0; self.nrows()];
        self.apply(v, &mut scratch);
        self.apply_transpose(&scratch, out);
    }
}

/// Plain row-major dense matrix; the general-purpose operand for tests and
/// ad-hoc decompositions.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols);
            data.extend_from_slice(&row);
        }
        DenseMatrix { nrows, ncols, data }
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                data.push(f(r, c));
            }
        }
        DenseMatrix { nrows, ncols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.ncols + c]
    }
}

impl SvdOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.ncols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.ncols)) {
            *o = dot(row, v);
        }
    }

    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&s, row) in u.iter().zip(self.data.chunks_exact(self.ncols)) {
            if s == 0.0 {
                continue;
            }
            for (o, &r) in out.iter_mut().zip(row) {
                *o += s * r;
            }
        }
    }
}

/// Iteration controls for [`truncated_svd`].
#[derive(Debug, Clone)]
pub struct SvdOptions {
    /// Drives the Lanczos start vector and breakdown restarts.
    pub seed: u64,
    /// Ritz residual target for the top-k pairs, relative to the largest
    /// Ritz value of XᵀX.
    pub ritz_tol: f64,
    /// Lanczos step budget; `None` means min(P, C), at which point the
    /// Krylov space is exhausted and the decomposition is exact.
    pub max_steps: Option<usize>,
    /// Steps between Ritz convergence checks.
    pub check_interval: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            seed: 7,
            ritz_tol: 1e-9,
            max_steps: None,
            check_interval: 8,
        }
    }
}

/// Top-k singular triplets with deterministic ordering and signs.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    k: usize,
    singular_values: Vec<f64>,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    column_offset: usize,
}

impl SvdFactors {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// i-th left singular vector, 0-based (length P).
    pub fn left_vector(&self, i: usize) -> &[f64] {
        &self.left[i]
    }

    /// i-th right singular vector, 0-based (length C).
    pub fn right_vector(&self, i: usize) -> &[f64] {
        &self.right[i]
    }

    /// 1-based genomic position of 0-based column `col` of the source matrix.
    pub fn genomic_position(&self, col: usize) -> usize {
        col + self.column_offset + 1
    }

    pub fn column_offset(&self) -> usize {
        self.column_offset
    }

    /// Whether singular value `i` is within [`TIE_TOL`] of a neighbor;
    /// detection results for tied vectors are unstable.
    pub fn is_tied(&self, i: usize) -> bool {
        let scale = self.singular_values[0].max(1.0);
        let d = self.singular_values[i];
        let before = i > 0 && (self.singular_values[i - 1] - d).abs() <= TIE_TOL * scale;
        let after = i + 1 < self.k && (d - self.singular_values[i + 1]).abs() <= TIE_TOL * scale;
        before || after
    }

    /// Copy with triplet `i` negated (both uᵢ and vᵢ). The SVD is
    /// sign-ambiguous, so downstream statistics must not change under this;
    /// exposed for diagnostics and invariant tests.
    pub fn with_flipped_sign(&self, i: usize) -> SvdFactors {
        let mut flipped = self.clone();
        for x in &mut flipped.left[i] {
            *x = -*x;
        }
        for x in &mut flipped.right[i] {
            *x = -*x;
        }
        flipped
    }

    /// CSV of right singular vectors: column 1 the genomic position, columns
    /// 2..k+1 the entries of v₁..v_k.
    pub fn write_right_vectors_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        write!(writer, "position")?;
        for i in 1..=self.k {
            write!(writer, ",v{i}")?;
        }
        writeln!(writer)?;
        let n = self.right.first().map_or(0, Vec::len);
        for col in 0..n {
            write!(writer, "{}", self.genomic_position(col))?;
            for v in &self.right {
                write!(writer, ",{}", v[col])?;
            }
            writeln!(writer)?;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let x = &a[c * 4..c * 4 + 4];
        let y = &b[c * 4..c * 4 + 4];
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    acc[0] + acc[1] + acc[2] + acc[3] + tail
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nrm = norm(&v);
        if nrm > 1e-6 {
            return v.iter().map(|x| x / nrm).collect();
        }
    }
}

/// Orthogonalizes `z` against `basis` twice (classical Gram-Schmidt with
/// reorthogonalization).
fn reorthogonalize(z: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, z);
            if c != 0.0 {
                axpy(z, -c, q);
            }
        }
    }
}

/// Draws a random vector orthonormal to `basis`.
fn random_orthonormal(n: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut v = random_unit(n, rng);
        reorthogonalize(&mut v, basis);
        let nrm = norm(&v);
        if nrm > 1e-6 {
            for x in &mut v {
                *x /= nrm;
            }
            return v;
        }
    }
}

struct RitzPairs {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Eigen-decomposes the (block-)tridiagonal T and returns the top-k Ritz
/// pairs with residual estimates |β_last · y[last]|.
fn top_ritz_pairs(alphas: &[f64], betas: &[f64], k: usize) -> RitzPairs {
    let j = alphas.len();
    let mut t = DMatrix::<f64>::zeros(j, j);
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for i in 0..j.saturating_sub(1) {
        t[(i, i + 1)] = betas[i];
        t[(i + 1, i)] = betas[i];
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let beta_last = betas.last().copied().unwrap_or(0.0);
    let take = k.min(j);
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    let mut residuals = Vec::with_capacity(take);
    for &idx in order.iter().take(take) {
        values.push(eig.eigenvalues[idx]);
        let col: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        residuals.push((beta_last * col[j - 1]).abs());
        vectors.push(col);
    }
    RitzPairs {
        values,
        vectors,
        residuals,
    }
}

/// Runs Lanczos on XᵀX until the top-k Ritz pairs meet `ritz_tol` or the
/// Krylov space is exhausted. Returns the basis and the final Ritz data.
fn lanczos<O: SvdOperator>(
    op: &O,
    k: usize,
    opts: &SvdOptions,
) -> Result<(Vec<Vec<f64>>, RitzPairs)> {
    let n = op.ncols();
    let exhaustion = n;
    let budget = opts.max_steps.unwrap_or(exhaustion).min(exhaustion);
    if budget < k {
        return Err(Error::InvalidConfig(format!(
            "Lanczos step budget {budget} is smaller than k = {k}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut qs: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut q = random_unit(n, &mut rng);
    let mut z = vec![0.0f64; n];
    let mut op_scale: f64 = 0.0;

    loop {
        qs.push(q.clone());
        op.apply_normal(&q, &mut z);
        let alpha = dot(&q, &z);
        alphas.push(alpha);
        axpy(&mut z, -alpha, &q);
        if qs.len() >= 2 {
            let prev_beta = betas[qs.len() - 2];
            if prev_beta != 0.0 {
                axpy(&mut z, -prev_beta, &qs[qs.len() - 2]);
            }
        }
        reorthogonalize(&mut z, &qs);
        let beta = norm(&z);
        op_scale = op_scale.max(alpha.abs() + beta);

        let breakdown = beta <= 1e-13 * op_scale.max(1e-300);
        if breakdown {
            betas.push(0.0);
        } else {
            betas.push(beta);
        }

        let steps = qs.len();
        let exhausted = steps >= exhaustion;
        if steps >= k && (steps % opts.check_interval == 0 || steps >= budget || breakdown) {
            let ritz = top_ritz_pairs(&alphas, &betas, k);
            let scale = ritz.values.first().copied().unwrap_or(0.0).max(1e-300);
            let worst = ritz.residuals.iter().cloned().fold(0.0f64, f64::max);
            // At exhaustion span(Q) is the whole column space, so the
            // decomposition is exact up to rounding regardless of `worst`.
            if worst <= opts.ritz_tol * scale || exhausted {
                return Ok((qs, ritz));
            }
            if steps >= budget {
                return Err(Error::Convergence {
                    achieved: worst / scale,
                    steps,
                    budget,
                });
            }
        }

        if breakdown {
            q = random_orthonormal(n, &qs, &mut rng);
        } else {
            q = z.iter().map(|x| x / beta).collect();
        }
    }
}

/// Truncated SVD of an arbitrary operator; `column_offset` is carried into
/// the factors for genomic coordinate mapping (pass 0 for plain matrices).
pub fn truncated_svd_operator<O: SvdOperator>(
    op: &O,
    k: usize,
    opts: &SvdOptions,
    column_offset: usize,
) -> Result<SvdFactors> {
    let max_rank = op.nrows().min(op.ncols());
    if k == 0 || k > max_rank {
        return Err(Error::Rank {
            requested: k,
            max: max_rank,
        });
    }

    let (qs, ritz) = lanczos(op, k, opts)?;
    let n = op.ncols();
    let m = op.nrows();

    // Ritz vectors in the original coordinates, re-orthonormalized.
    let mut right: Vec<Vec<f64>> = Vec::with_capacity(k);
    for y in &ritz.vectors {
        let mut v = vec![0.0f64; n];
        for (coeff, qcol) in y.iter().zip(&qs) {
            if *coeff != 0.0 {
                axpy(&mut v, *coeff, qcol);
            }
        }
        reorthogonalize(&mut v, &right);
        let nrm = norm(&v);
        for x in &mut v {
            *x /= nrm;
        }
        right.push(v);
    }

    // Singular values and left vectors; triplets sorted by d descending.
    let mut triplets: Vec<(f64, Vec<f64>, Option<Vec<f64>>)> = Vec::with_capacity(k);
    for v in right {
        let mut xv = vec![0.0f64; m];
        op.apply(&v, &mut xv);
        let d = norm(&xv);
        triplets.push((d, v, Some(xv)));
    }
    triplets.sort_by(|a, b| b.0.total_cmp(&a.0));

    let d1 = triplets[0].0;
    let floor = 1e-12 * d1.max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut singular_values = Vec::with_capacity(k);
    let mut right = Vec::with_capacity(k);
    let mut left: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (d, v, xv) in triplets {
        let u = match xv {
            Some(xv) if d > floor => xv.iter().map(|x| x / d).collect(),
            // Null directions of X: any unit vector orthogonal to the
            // retained left vectors completes the triplet.
            _ => random_orthonormal(m, &left, &mut rng),
        };
        singular_values.push(if d > floor { d } else { 0.0 });
        right.push(v);
        left.push(u);
    }

    // Sign convention: largest-magnitude entry of each right vector positive.
    for (v, u) in right.iter_mut().zip(left.iter_mut()) {
        let mut max_idx = 0;
        let mut max_abs = 0.0f64;
        for (i, &x) in v.iter().enumerate() {
            if x.abs() > max_abs {
                max_abs = x.abs();
                max_idx = i;
            }
        }
        if v[max_idx] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
            for x in u.iter_mut() {
                *x = -*x;
            }
        }
    }

    let factors = SvdFactors {
        k,
        singular_values,
        left,
        right,
        column_offset,
    };
    verify_contracts(op, &factors, qs.len(), opts)?;
    Ok(factors)
}

/// Top-k triplets of a smoothed distance matrix.
pub fn truncated_svd(
    x: &SmoothedDistanceMatrix,
    k: usize,
    opts: &SvdOptions,
) -> Result<SvdFactors> {
    truncated_svd_operator(x, k, opts, x.window())
}

fn verify_contracts<O: SvdOperator>(
    op: &O,
    f: &SvdFactors,
    steps: usize,
    opts: &SvdOptions,
) -> Result<()> {
    let k = f.k;
    let d1 = f.singular_values[0];

    for i in 1..k {
        if f.singular_values[i] > f.singular_values[i - 1] {
            return Err(Error::Contract(format!(
                "singular values out of order at {i}"
            )));
        }
    }

    let mut worst_orth = 0.0f64;
    for a in 0..k {
        for b in a..k {
            let target = if a == b { 1.0 } else { 0.0 };
            worst_orth = worst_orth.max((dot(&f.right[a], &f.right[b]) - target).abs());
            worst_orth = worst_orth.max((dot(&f.left[a], &f.left[b]) - target).abs());
        }
    }

    let mut worst_resid = 0.0f64;
    let mut xv = vec![0.0f64; op.nrows()];
    for i in 0..k {
        op.apply(&f.right[i], &mut xv);
        let d = f.singular_values[i];
        let mut r2 = 0.0;
        for (a, b) in xv.iter().zip(&f.left[i]) {
            let diff = a - d * b;
            r2 += diff * diff;
        }
        worst_resid = worst_resid.max(r2.sqrt());
    }

    if worst_orth > ORTHONORMALITY_TOL || worst_resid > RESIDUAL_TOL * d1.max(1.0) {
        return Err(Error::Convergence {
            achieved: worst_resid.max(worst_orth),
            steps,
            budget: opts.max_steps.unwrap_or(op.ncols()),
        });
    }
    Ok(())
}
