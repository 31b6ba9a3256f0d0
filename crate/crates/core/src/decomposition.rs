//! Truncated SVD of a term-document matrix and varimax rotation of the
//! resulting term loadings.
//!
//! Small problems (min dimension <= [`DENSE_LIMIT`]) are decomposed densely.
//! Larger ones use Golub-Kahan-Lanczos bidiagonalization with full
//! reorthogonalization, growing the Krylov subspace until every requested
//! triplet meets the residual tolerance.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector_space::TermDocMatrix;

pub const DENSE_LIMIT: usize = 64;

/// A matrix we can only multiply by.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = A^T x`
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
    fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        let mut e = vec![0.0; self.ncols()];
        let mut col = vec![0.0; self.nrows()];
        for j in 0..self.ncols() {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.column_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        m
    }
}

impl LinearOperator for TermDocMatrix {
    fn nrows(&self) -> usize {
        self.n_terms()
    }
    fn ncols(&self) -> usize {
        self.n_docs()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.rmatvec(x, y)
    }
    fn to_dense(&self) -> DMatrix<f64> {
        TermDocMatrix::to_dense(self)
    }
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let r = self * DVector::from_column_slice(x);
        y.copy_from_slice(r.as_slice());
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        let r = self.tr_mul(&DVector::from_column_slice(x));
        y.copy_from_slice(r.as_slice());
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

struct Transposed<'a, A: ?Sized>(&'a A);

impl<A: LinearOperator + ?Sized> LinearOperator for Transposed<'_, A> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }
    fn ncols(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_transpose(x, y)
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply(x, y)
    }
}

/// `A - U diag(s) V^T` as an operator.
struct Residual<'a, A: ?Sized> {
    a: &'a A,
    svd: &'a SvdResult,
}

impl<A: LinearOperator + ?Sized> LinearOperator for Residual<'_, A> {
    fn nrows(&self) -> usize {
        self.a.nrows()
    }
    fn ncols(&self) -> usize {
        self.a.ncols()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply(x, y);
        let coef = self.svd.doc_factors.tr_mul(&DVector::from_column_slice(x));
        let scaled = coef.component_mul(&DVector::from_column_slice(&self.svd.singular_values));
        let low = &self.svd.term_factors * scaled;
        y.iter_mut().zip(low.iter()).for_each(|(y, l)| *y -= l);
    }
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.a.apply_transpose(x, y);
        let coef = self.svd.term_factors.tr_mul(&DVector::from_column_slice(x));
        let scaled = coef.component_mul(&DVector::from_column_slice(&self.svd.singular_values));
        let low = &self.svd.doc_factors * scaled;
        y.iter_mut().zip(low.iter()).for_each(|(y, l)| *y -= l);
    }
}

/// Top-k singular triplets: `A ~= U_k diag(s) V_k^T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdResult {
    pub k: usize,
    /// terms x k
    pub term_factors: DMatrix<f64>,
    /// Non-increasing, all positive.
    pub singular_values: Vec<f64>,
    /// docs x k
    pub doc_factors: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    /// Per-triplet residual bound, relative to the largest singular value.
    pub tol: f64,
    pub seed: u64,
    /// Maximum number of subspace enlargements in the iterative path.
    pub max_restarts: usize,
    /// Use the dense solver when `min(rows, cols) <= dense_limit`.
    pub dense_limit: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        SvdOptions {
            tol: 1e-10,
            seed: 0,
            max_restarts: 32,
            dense_limit: DENSE_LIMIT,
        }
    }
}

pub fn truncated_svd(a: &TermDocMatrix, k: usize, tol: f64) -> Result<SvdResult> {
    truncated_svd_with(
        a,
        k,
        &SvdOptions {
            tol,
            ..SvdOptions::default()
        },
    )
}

/// Triplets whose singular value is numerically zero are dropped, so the
/// result may hold fewer than `k` components when `rank(A) < k`.
pub fn truncated_svd_with<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    opts: &SvdOptions,
) -> Result<SvdResult> {
    let (m, n) = (a.nrows(), a.ncols());
    let max = m.min(n);
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if k > max {
        return Err(Error::KTooLarge { k, max });
    }
    let (s, u, v) = if max <= opts.dense_limit {
        dense_svd(&a.to_dense())
    } else if n <= m {
        lanczos_svd(a, k, opts)?
    } else {
        let (s, u, v) = lanczos_svd(&Transposed(a), k, opts)?;
        (s, v, u)
    };
    if s.first().map_or(true, |&s1| s1 == 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let cutoff = s[0] * (m.max(n) as f64) * f64::EPSILON * 4.0;
    let k = s.iter().take(k).take_while(|&&x| x > cutoff).count();
    let mut term_factors = u.columns(0, k).into_owned();
    let mut doc_factors = v.columns(0, k).into_owned();
    fix_signs(&mut term_factors, &mut doc_factors);
    Ok(SvdResult {
        k,
        term_factors,
        singular_values: s[..k].to_vec(),
        doc_factors,
    })
}

/// Flip each pair so its largest-magnitude term loading is positive.
fn fix_signs(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    for j in 0..u.ncols() {
        let col = u.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col.len() > 0 && col[best] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
}

/// Full SVD sorted by descending singular value.
fn dense_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let v = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| vt.row(i).transpose())
            .collect::<Vec<_>>(),
    );
    (s, u, v)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d: f64 = b.iter().zip(x.iter()).map(|(b, x)| b * x).sum();
            x.iter_mut().zip(b).for_each(|(x, b)| *x -= d * b);
        }
    }
}

fn random_unit(len: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut x, basis);
        let nx = norm(&x);
        if nx > 1e-8 {
            x.iter_mut().for_each(|v| *v /= nx);
            return Some(x);
        }
    }
    None
}

/// Golub-Kahan-Lanczos on an operator with `ncols <= nrows`. Returns all
/// Ritz triplets of the final subspace, sorted descending.
fn lanczos_svd<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    opts: &SvdOptions,
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (m, n) = (a.nrows(), a.ncols());
    debug_assert!(n <= m);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut steps = n.min((2 * k + 10).max(20));
    let tiny = 1e-12;

    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = vec![random_unit(n, &[], &mut rng).ok_or(Error::ZeroMatrix)?];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    for _restart in 0..=opts.max_restarts {
        while alphas.len() < steps {
            let j = alphas.len();
            a.apply(&vs[j], &mut u);
            if j > 0 {
                let b = betas[j - 1];
                u.iter_mut().zip(&us[j - 1]).for_each(|(x, p)| *x -= b * p);
            }
            orthogonalize(&mut u, &us);
            let mut alpha = norm(&u);
            if alpha <= tiny {
                alpha = 0.0;
                u = random_unit(m, &us, &mut rng).ok_or(Error::NoConvergence(j))?;
            } else {
                u.iter_mut().for_each(|x| *x /= alpha);
            }
            alphas.push(alpha);
            us.push(u.clone());

            if vs.len() == n {
                // Krylov space exhausted; B is square and exact
                betas.push(0.0);
                break;
            }
            a.apply_transpose(&us[j], &mut v);
            v.iter_mut().zip(&vs[j]).for_each(|(x, p)| *x -= alpha * p);
            orthogonalize(&mut v, &vs);
            let mut beta = norm(&v);
            if beta <= tiny {
                beta = 0.0;
                v = random_unit(n, &vs, &mut rng).ok_or(Error::NoConvergence(j))?;
            } else {
                v.iter_mut().for_each(|x| *x /= beta);
            }
            betas.push(beta);
            vs.push(v.clone());
        }

        let r = alphas.len();
        let mut b = DMatrix::zeros(r, r);
        for i in 0..r {
            b[(i, i)] = alphas[i];
            if i + 1 < r {
                b[(i, i + 1)] = betas[i];
            }
        }
        let (s, p, q) = dense_svd(&b);
        let ubasis = DMatrix::from_fn(m, r, |i, j| us[j][i]);
        let vbasis = DMatrix::from_fn(n, r, |i, j| vs[j][i]);
        let uk = &ubasis * &p;
        let vk = &vbasis * &q;

        if s[0] <= tiny {
            return Ok((s, uk, vk));
        }
        let want = k.min(r);
        let converged = (0..want).all(|i| {
            triplet_residual(a, &s, &uk, &vk, i) <= opts.tol * s[0]
        });
        if converged || r == n {
            if !converged {
                return Err(Error::NoConvergence(r));
            }
            return Ok((s, uk, vk));
        }
        steps = n.min(steps * 2);
    }
    Err(Error::NoConvergence(alphas.len()))
}

/// `max(|A v - s u|, |A^T u - s v|)` for triplet `i`.
fn triplet_residual<A: LinearOperator + ?Sized>(
    a: &A,
    s: &[f64],
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    i: usize,
) -> f64 {
    let ui: Vec<f64> = u.column(i).iter().copied().collect();
    let vi: Vec<f64> = v.column(i).iter().copied().collect();
    let mut av = vec![0.0; a.nrows()];
    let mut atu = vec![0.0; a.ncols()];
    a.apply(&vi, &mut av);
    a.apply_transpose(&ui, &mut atu);
    let r1: Vec<f64> = av.iter().zip(&ui).map(|(x, u)| x - s[i] * u).collect();
    let r2: Vec<f64> = atu.iter().zip(&vi).map(|(x, v)| x - s[i] * v).collect();
    norm(&r1).max(norm(&r2))
}

/// `‖A - U_k Σ_k V_k^T‖₂`.
pub fn reconstruction_error<A: LinearOperator + ?Sized>(a: &A, svd: &SvdResult) -> Result<f64> {
    if svd.term_factors.nrows() != a.nrows() || svd.doc_factors.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, factors are {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            svd.term_factors.nrows(),
            svd.k,
            svd.doc_factors.nrows(),
            svd.k
        )));
    }
    let residual = Residual { a, svd };
    if a.nrows().min(a.ncols()) <= DENSE_LIMIT {
        let r = residual.to_dense();
        return Ok(r.singular_values().iter().fold(0.0, |m: f64, &s| m.max(s)));
    }
    let opts = SvdOptions {
        tol: 1e-10,
        ..SvdOptions::default()
    };
    match truncated_svd_with(&residual, 1, &SvdOptions { dense_limit: 0, ..opts }) {
        Ok(r) => Ok(r.singular_values[0]),
        Err(Error::ZeroMatrix) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Term loadings `U_k diag(s)`.
pub fn scaled_term_loadings(svd: &SvdResult) -> DMatrix<f64> {
    let mut l = svd.term_factors.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        l.column_mut(j).scale_mut(*s);
    }
    l
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedConcepts {
    /// k x k orthogonal
    pub rotation: DMatrix<f64>,
    /// terms x k, `loadings * rotation`
    pub rotated_term_loadings: DMatrix<f64>,
    /// Criterion before the first sweep and after each sweep.
    pub criterion_history: Vec<f64>,
}

/// Sum over columns of the variance of squared loadings (raw varimax, no
/// Kaiser row normalization).
pub fn varimax_criterion(loadings: &DMatrix<f64>) -> f64 {
    let p = loadings.nrows() as f64;
    if p == 0.0 {
        return 0.0;
    }
    loadings
        .column_iter()
        .map(|c| {
            let sq: f64 = c.iter().map(|x| x * x).sum::<f64>() / p;
            let quad: f64 = c.iter().map(|x| x.powi(4)).sum::<f64>() / p;
            quad - sq * sq
        })
        .sum()
}

/// Kaiser's pairwise varimax: sweep over all column pairs, rotating each
/// pair by the angle that maximizes its contribution, until a sweep gains
/// less than `tol` or `max_iter` sweeps have run.
pub fn varimax_rotate(loadings: &DMatrix<f64>, max_iter: usize, tol: f64) -> RotatedConcepts {
    let (p, k) = loadings.shape();
    let mut l = loadings.clone();
    let mut rot = DMatrix::<f64>::identity(k, k);
    let mut history = vec![varimax_criterion(&l)];
    if k < 2 || p == 0 {
        return RotatedConcepts {
            rotation: rot,
            rotated_term_loadings: l,
            criterion_history: history,
        };
    }

    for _ in 0..max_iter {
        for i in 0..k - 1 {
            for j in i + 1..k {
                let phi = pair_angle(&l, i, j);
                if phi == 0.0 {
                    continue;
                }
                rotate_pair(&mut l, i, j, phi);
                rotate_pair(&mut rot, i, j, phi);
            }
        }
        let c = varimax_criterion(&l);
        let gain = c - history[history.len() - 1];
        history.push(c);
        if gain < tol {
            break;
        }
    }

    let rotated_term_loadings = loadings * &rot;
    RotatedConcepts {
        rotation: rot,
        rotated_term_loadings,
        criterion_history: history,
    }
}

/// Optimal plane-rotation angle for columns `i`, `j`.
fn pair_angle(l: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let p = l.nrows() as f64;
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for (x, y) in l.column(i).iter().zip(l.column(j).iter()) {
        let u = x * x - y * y;
        let v = 2.0 * x * y;
        a += u;
        b += v;
        c += u * u - v * v;
        d += 2.0 * u * v;
    }
    let num = d - 2.0 * a * b / p;
    let den = c - (a * a - b * b) / p;
    if num.abs() < 1e-15 && den >= 0.0 {
        return 0.0;
    }
    num.atan2(den) / 4.0
}

fn rotate_pair(m: &mut DMatrix<f64>, i: usize, j: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    for r in 0..m.nrows() {
        let x = m[(r, i)];
        let y = m[(r, j)];
        m[(r, i)] = c * x + s * y;
        m[(r, j)] = -s * x + c * y;
    }
}

/// Varimax on `U_k diag(s)`.
pub fn rotate_concepts(svd: &SvdResult, max_iter: usize, tol: f64) -> RotatedConcepts {
    varimax_rotate(&scaled_term_loadings(svd), max_iter, tol)
}
