//! Independent reference implementations used only by tests. None of these
//! call into the library's numerical code.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Full SVD by one-sided (Hestenes) Jacobi: `a = u diag(s) v^T`, singular
/// values descending. `u` is m x r, `v` is n x r with r = min(m, n).
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    if m < n {
        let (u, s, v) = jacobi_svd(&a.transpose());
        return (v, s, u);
    }
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let alpha: f64 = w.column(i).iter().map(|x| x * x).sum();
                let beta: f64 = w.column(j).iter().map(|x| x * x).sum();
                let gamma: f64 = w.column(i).iter().zip(w.column(j).iter()).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt());
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let x = mat[(r, i)];
                        let y = mat[(r, j)];
                        mat[(r, i)] = c * x - s * y;
                        mat[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> = (0..n).map(|j| (w.column(j).norm(), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut vs = DMatrix::<f64>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &(sigma, src)) in order.iter().enumerate() {
        s.push(sigma);
        vs.set_column(dst, &v.column(src));
        if sigma > 0.0 {
            u.set_column(dst, &(w.column(src) / sigma));
        }
    }
    (u, s, vs)
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    jacobi_svd(a).1.first().copied().unwrap_or(0.0)
}

/// Raw varimax criterion, coded from the definition: sum over columns of
/// the population variance of the squared loadings.
pub fn varimax_objective(l: &DMatrix<f64>) -> f64 {
    let p = l.nrows() as f64;
    let mut total = 0.0;
    for c in l.column_iter() {
        let sq: Vec<f64> = c.iter().map(|x| x * x).collect();
        let mean = sq.iter().sum::<f64>() / p;
        total += sq.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / p;
    }
    total
}

/// Best criterion over rotations of a two-column loading matrix, by
/// exhaustive search over the angle grid `[0, pi/2)` with the given step.
/// (The criterion has period pi/2 in the angle.)
pub fn varimax_grid_best(l: &DMatrix<f64>, step: f64) -> f64 {
    assert_eq!(l.ncols(), 2);
    let mut best = f64::NEG_INFINITY;
    let steps = (std::f64::consts::FRAC_PI_2 / step).ceil() as usize;
    for i in 0..steps {
        let theta = i as f64 * step;
        let (s, c) = theta.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        best = best.max(varimax_objective(&(l * r)));
    }
    best
}

/// Random sparse matrix with roughly `density` nonzeros drawn uniformly
/// from `[0.5, 3)`; each column has at least one nonzero.
pub fn sparse_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            if rng.gen_bool(density) {
                a[(i, j)] = rng.gen_range(0.5..3.0);
            }
        }
        if a.column(j).iter().all(|&x| x == 0.0) {
            a[(rng.gen_range(0..m), j)] = rng.gen_range(0.5..3.0);
        }
    }
    a
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

/// `max |Q^T Q - I|`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let i = DMatrix::<f64>::identity(g.nrows(), g.ncols());
    (g - i).amax()
}
