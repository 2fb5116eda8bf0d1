//! Shared test oracles, independent of the library's solver path.
#![allow(dead_code)] // each test target uses a different subset

/// Dense SVD by one-sided Jacobi rotations: orthogonalizes the columns of A
/// until convergence, then reads off singular values as column norms. Slow
/// and simple; the reference for small instances.
pub struct JacobiSvd {
    pub singular_values: Vec<f64>,
    /// Right singular vectors, one per retained value (length = ncols).
    pub right: Vec<Vec<f64>>,
    /// Left singular vectors (length = nrows); empty for zero values.
    pub left: Vec<Vec<f64>>,
}

pub fn jacobi_svd(a: &[Vec<f64>]) -> JacobiSvd {
    let m = a.len();
    let n = a[0].len();
    // Work on columns: cols[j][i] = A[i][j]; v accumulates the rotations.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(a, b)| a * b).sum() };
    let frob: f64 = cols.iter().map(|c| dot(c, c)).sum::<f64>().sqrt();
    let tol = 1e-14 * frob.max(1.0);

    for _sweep in 0..120 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let app = dot(&cols[p], &cols[p]);
                let aqq = dot(&cols[q], &cols[q]);
                let apq = dot(&cols[p], &cols[q]);
                if apq.abs() <= tol * tol / (n as f64) && apq.abs() <= 1e-300 {
                    continue;
                }
                if apq.abs() <= 1e-30 * (app * aqq).sqrt().max(1e-300) {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut singular_values = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for &j in &order {
        let d = norms[j];
        singular_values.push(d);
        right.push(v[j].clone());
        if d > 1e-300 {
            left.push(cols[j].iter().map(|x| x / d).collect());
        } else {
            left.push(Vec::new());
        }
    }
    JacobiSvd {
        singular_values,
        right,
        left,
    }
}

/// Brute-force smoothed Hamming row: Hamming distance of every explicit
/// window, straight from the definition.
pub fn naive_smoothed_row(a: &[u8], b: &[u8], w: usize) -> Vec<u32> {
    assert_eq!(a.len(), b.len());
    (0..a.len() - 2 * w)
        .map(|c| {
            a[c..c + 2 * w + 1]
                .iter()
                .zip(&b[c..c + 2 * w + 1])
                .filter(|(x, y)| x != y)
                .count() as u32
        })
        .collect()
}
