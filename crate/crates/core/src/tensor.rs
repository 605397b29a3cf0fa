//! Dense complex tensors and the small set of linear-algebra kernels the
//! MPO machinery is built on.
//!
//! Tensors are stored row-major: the last axis varies fastest. Matrices use
//! nalgebra's [`DMatrix`] directly.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A dense multi-dimensional array of complex numbers in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::DimensionMismatch(format!(
                "zero extent in shape {shape:?}"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![ZERO; n],
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self {
            shape: vec![r, c],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        let st = strides(&self.shape);
        self.data[index.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn scale(&self, alpha: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * alpha).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "{:?} + {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x.conj()).collect(),
        }
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    /// Reorders axes so that output axis `k` is input axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let in_strides = strides(&self.shape);
        let src_strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let n = self.data.len();
        let mut data = Vec::with_capacity(n);
        let mut idx = vec![0usize; shape.len()];
        let mut offset = 0usize;
        for _ in 0..n {
            data.push(self.data[offset]);
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                offset += src_strides[k];
                if idx[k] < shape[k] {
                    break;
                }
                offset -= src_strides[k] * shape[k];
                idx[k] = 0;
            }
        }
        Self { shape, data }
    }

    /// Interprets the tensor as a matrix with the first `split` axes as rows.
    pub fn to_matrix(&self, split: usize) -> Matrix {
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        Matrix::from_row_slice(rows, cols, &self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Sums over the paired axes of `a` and `b`. The result carries the unpaired
/// axes of `a` followed by the unpaired axes of `b`, each in original order.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return Err(Error::DimensionMismatch(format!(
                "axis pair ({i}, {j}) out of range"
            )));
        }
        if a.shape[i] != b.shape[j] {
            return Err(Error::DimensionMismatch(format!(
                "axis {i} of a has extent {}, axis {j} of b has extent {}",
                a.shape[i], b.shape[j]
            )));
        }
    }
    let a_free: Vec<usize> = (0..a.rank())
        .filter(|k| !pairs.iter().any(|p| p.0 == *k))
        .collect();
    let b_free: Vec<usize> = (0..b.rank())
        .filter(|k| !pairs.iter().any(|p| p.1 == *k))
        .collect();
    let a_perm: Vec<usize> = a_free
        .iter()
        .copied()
        .chain(pairs.iter().map(|p| p.0))
        .collect();
    let b_perm: Vec<usize> = pairs
        .iter()
        .map(|p| p.1)
        .chain(b_free.iter().copied())
        .collect();
    let am = a.permute(&a_perm).to_matrix(a_free.len());
    let bm = b.permute(&b_perm).to_matrix(pairs.len());
    let cm = am * bm;
    let mut shape: Vec<usize> = a_free.iter().map(|&k| a.shape[k]).collect();
    shape.extend(b_free.iter().map(|&k| b.shape[k]));
    if shape.is_empty() {
        shape.push(1);
    }
    let t = DenseTensor::from_matrix(&cm);
    Ok(DenseTensor {
        shape,
        data: t.data,
    })
}

/// Result of a truncated singular value decomposition `m ≈ u · diag(s) · vt`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
    pub discarded_weight: f64,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (k, &sk) in self.s.iter().enumerate() {
            us.column_mut(k).scale_mut(sk);
        }
        us * &self.vt
    }
}

/// Reconstruction error accepted from a library SVD, in units of
/// `ε·max(rows, cols)·‖M‖_F`.
const SVD_CHECK_FACTOR: f64 = 64.0;

fn svd_residual(m: &Matrix, u: &Matrix, s: &[f64], vt: &Matrix) -> f64 {
    let mut us = u.clone();
    for (c, &x) in s.iter().enumerate() {
        us.column_mut(c).scale_mut(x);
    }
    (m - us * vt).norm()
}

fn library_svd(m: Matrix) -> Option<(Matrix, Vec<f64>, Matrix)> {
    let svd = m.try_svd(true, true, f64::EPSILON, 0)?;
    Some((
        svd.u?,
        svd.singular_values.iter().copied().collect(),
        svd.v_t?,
    ))
}

/// One-sided Jacobi SVD of a tall matrix; slow but reliable.
fn jacobi_svd_tall(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let mut v = Matrix::identity(cols, cols);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a.column(p).norm_squared();
                let beta: f64 = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                if gamma.norm() <= f64::EPSILON * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                // rotate so that columns p and q become orthogonal
                let phase = gamma / gamma.norm();
                let zeta = (beta - alpha) / (2.0 * gamma.norm());
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..rows {
                    let (x, y) = (a[(i, p)], a[(i, q)]);
                    a[(i, p)] = x * c - y * phase.conj() * sn;
                    a[(i, q)] = x * phase * sn + y * c;
                }
                for i in 0..cols {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = x * c - y * phase.conj() * sn;
                    v[(i, q)] = x * phase * sn + y * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut u = Matrix::zeros(rows, cols);
    for j in 0..cols {
        if s[j] > 0.0 {
            u.set_column(j, &(a.column(j) / C64::new(s[j], 0.0)));
        }
    }
    (u, s, v.adjoint())
}

/// SVD `M = U·diag(s)·Vᴴ` whose reconstruction is verified. The library
/// routine occasionally returns inaccurate factors for matrices with widely
/// spread singular values; the adjoint and a one-sided Jacobi iteration
/// serve as fallbacks. Singular values are not sorted.
pub fn svd_checked(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (rows, cols) = m.shape();
    let bound = SVD_CHECK_FACTOR * f64::EPSILON * rows.max(cols) as f64 * m.norm();
    if let Some((u, s, vt)) = library_svd(m.clone()) {
        if svd_residual(m, &u, &s, &vt) <= bound {
            return (u, s, vt);
        }
    }
    if let Some((u, s, vt)) = library_svd(m.adjoint()) {
        let (u, vt) = (vt.adjoint(), u.adjoint());
        if svd_residual(m, &u, &s, &vt) <= bound {
            return (u, s, vt);
        }
    }
    if rows >= cols {
        jacobi_svd_tall(m)
    } else {
        let (u, s, vt) = jacobi_svd_tall(&m.adjoint());
        (vt.adjoint(), s, u.adjoint())
    }
}

/// Singular value decomposition keeping at most `max_rank` values and
/// dropping those below `tol · s_max`.
pub fn svd_truncate(m: &Matrix, max_rank: usize, tol: f64) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return TruncatedSvd {
            u: Matrix::zeros(rows, 0),
            s: vec![],
            vt: Matrix::zeros(0, cols),
            discarded_weight: 0.0,
        };
    }
    let (u, sv, vt) = svd_checked(m);
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let smax = order.first().map(|&k| sv[k]).unwrap_or(0.0);
    let mut keep = Vec::new();
    let mut discarded = 0.0;
    for &k in &order {
        if keep.len() < max_rank && sv[k] > tol * smax && sv[k] > 0.0 {
            keep.push(k);
        } else {
            discarded += sv[k] * sv[k];
        }
    }
    let mut uk = Matrix::zeros(rows, keep.len());
    let mut vk = Matrix::zeros(keep.len(), cols);
    for (n, &k) in keep.iter().enumerate() {
        uk.set_column(n, &u.column(k));
        vk.set_row(n, &vt.row(k));
    }
    TruncatedSvd {
        u: uk,
        s: keep.iter().map(|&k| sv[k]).collect(),
        vt: vk,
        discarded_weight: discarded,
    }
}

/// Householder QR with column pivoting, `m[:, pivots] = q · r`.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    pub rank: usize,
    /// Input column indices in pivot order; the first `rank` span the column space.
    pub pivots: Vec<usize>,
    /// Thin orthonormal factor, `rows × min(rows, cols)`.
    pub q: Matrix,
    /// Upper-trapezoidal factor, `min(rows, cols) × cols`, columns in pivot order.
    pub r: Matrix,
}

pub const DEFAULT_RANK_TOL: f64 = 1e-12;

pub fn qr_column_pivoted(m: &Matrix, tol: f64) -> PivotedQr {
    qr_threshold_pivoted(m, tol, 1.0)
}

/// Pivoted QR that takes the lowest-index column whose remaining norm is at
/// least `kappa` times the largest one. `kappa = 1` is ordinary pivoting;
/// smaller values make the pivot order follow the column order whenever the
/// norms are comparable.
pub fn qr_threshold_pivoted(m: &Matrix, tol: f64, kappa: f64) -> PivotedQr {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    let mut a = m.clone();
    let mut pivots: Vec<usize> = (0..cols).collect();
    let mut reflectors: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(k);
    let mut rank = 0;
    let mut r11 = 0.0;
    let mut rank_done = false;
    for step in 0..k {
        let norms: Vec<f64> = (step..cols)
            .map(|j| (step..rows).map(|i| a[(i, j)].norm_sqr()).sum())
            .collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        // original column indices decide among acceptable candidates
        let best = (step..cols)
            .filter(|&j| norms[j - step] >= kappa * kappa * max)
            .min_by_key(|&j| pivots[j])
            .unwrap_or(step);
        if step == 0 {
            r11 = max.sqrt();
        }
        if !rank_done && max.sqrt() > tol * r11 && r11 > 0.0 {
            rank += 1;
        } else {
            rank_done = true;
        }
        a.swap_columns(step, best);
        pivots.swap(step, best);

        let x: nalgebra::DVector<C64> = a
            .view((step, step), (rows - step, 1))
            .column(0)
            .into_owned();
        let alpha = x.norm();
        let mut v = x.clone();
        if alpha > 0.0 {
            let x0 = x[0];
            let phase = if x0.norm() > 0.0 {
                x0 / x0.norm()
            } else {
                crate::tensor::ONE
            };
            v[0] += phase * alpha;
            let vn = v.norm();
            v /= C64::new(vn, 0.0);
            // a[step.., step..] -= 2 v (v^H a)
            let mut sub = a.view_mut((step, step), (rows - step, cols - step));
            let w = v.adjoint() * &sub;
            sub -= (&v * w) * C64::new(2.0, 0.0);
        } else {
            v.fill(ZERO);
        }
        reflectors.push(v);
    }
    let mut r = Matrix::zeros(k, cols);
    for i in 0..k {
        for j in i..cols {
            r[(i, j)] = a[(i, j)];
        }
    }
    // Q = H_0 H_1 ... H_{k-1} applied to the first k unit vectors
    let mut q = Matrix::zeros(rows, k);
    for i in 0..k {
        q[(i, i)] = ONE;
    }
    for (step, v) in reflectors.iter().enumerate().rev() {
        let mut sub = q.view_mut((step, 0), (rows - step, k));
        let w = v.adjoint() * &sub;
        sub -= (v * w) * C64::new(2.0, 0.0);
    }
    PivotedQr { rank, pivots, q, r }
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Matrix,
    /// Frobenius norm of `a · x - b`.
    pub residual: f64,
}

/// Minimizes `‖a·x − b‖_F` for `a` of full column rank.
pub fn solve_least_squares(a: &Matrix, b: &Matrix) -> Result<LeastSquares> {
    solve_least_squares_tol(a, b, DEFAULT_RANK_TOL)
}

pub fn solve_least_squares_tol(a: &Matrix, b: &Matrix, tol: f64) -> Result<LeastSquares> {
    let (rows, cols) = a.shape();
    if b.nrows() != rows {
        return Err(Error::DimensionMismatch(format!(
            "a has {rows} rows, b has {}",
            b.nrows()
        )));
    }
    if cols == 0 {
        return Ok(LeastSquares {
            x: Matrix::zeros(0, b.ncols()),
            residual: b.norm(),
        });
    }
    let qr = qr_column_pivoted(a, tol);
    if qr.rank < cols {
        return Err(Error::RankDeficient {
            rank: qr.rank,
            cols,
        });
    }
    let qtb = qr.q.adjoint() * b;
    let mut y = Matrix::zeros(cols, b.ncols());
    for c in 0..b.ncols() {
        for i in (0..cols).rev() {
            let mut acc = qtb[(i, c)];
            for j in i + 1..cols {
                acc -= qr.r[(i, j)] * y[(j, c)];
            }
            y[(i, c)] = acc / qr.r[(i, i)];
        }
    }
    let mut x = Matrix::zeros(cols, b.ncols());
    for (i, &p) in qr.pivots.iter().enumerate() {
        x.set_row(p, &y.row(i));
    }
    let residual = (a * &x - b).norm();
    Ok(LeastSquares { x, residual })
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

pub fn identity(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

/// Spectral norm via the largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> DenseTensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        DenseTensor::new(shape, data).unwrap()
    }

    #[test]
    fn identity_contraction_returns_vector() {
        let id = DenseTensor::from_matrix(&identity(2));
        let v = DenseTensor::new(vec![2], vec![C64::new(0.3, 1.0), C64::new(-2.0, 0.5)]).unwrap();
        let out = contract(&id, &v, &[(1, 0)]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn matrix_product_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(&mut rng, vec![2, 2]);
        let b = random_tensor(&mut rng, vec![2, 2]);
        let c = contract(&a, &b, &[(1, 0)]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    acc += a.get(&[i, k]) * b.get(&[k, j]);
                }
                assert!((c.get(&[i, j]) - acc).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn full_contraction_with_conjugate_is_squared_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tensor(&mut rng, vec![2, 3, 4]);
        let n = contract(&a, &a.conj(), &[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(n.shape(), &[1]);
        let v = n.data()[0];
        assert!(v.im.abs() < 1e-14 && v.re >= 0.0);
        assert!((v.re - a.frobenius_norm().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn contraction_rejects_mismatched_extents() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 3]);
        assert!(matches!(
            contract(&a, &b, &[(1, 0)]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn contraction_orders_free_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&mut rng, vec![2, 3, 4]);
        let b = random_tensor(&mut rng, vec![3, 5]);
        let c = contract(&a, &b, &[(1, 0)]).unwrap();
        assert_eq!(c.shape(), &[2, 4, 5]);
        let mut acc = ZERO;
        for k in 0..3 {
            acc += a.get(&[1, k, 2]) * b.get(&[k, 4]);
        }
        assert!((c.get(&[1, 2, 4]) - acc).norm() < 1e-14);
    }

    #[test]
    fn contraction_is_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let a = random_tensor(&mut rng, vec![3, 2, 2]);
            let b = random_tensor(&mut rng, vec![3, 2, 2]);
            let c = random_tensor(&mut rng, vec![2, 4]);
            let alpha = C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let lhs = contract(&a.scale(alpha).add(&b).unwrap(), &c, &[(2, 0)]).unwrap();
            let rhs = contract(&a, &c, &[(2, 0)])
                .unwrap()
                .scale(alpha)
                .add(&contract(&b, &c, &[(2, 0)]).unwrap())
                .unwrap();
            let diff = lhs.add(&rhs.scale(-ONE)).unwrap();
            assert!(diff.frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&mut rng, vec![2, 3, 4]);
        let p = a.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), a.get(&[1, 2, 3]));
        assert_eq!(p.permute(&[1, 2, 0]), a);
    }

    #[test]
    fn svd_of_identity() {
        let t = svd_truncate(&identity(4), 4, 0.0);
        assert_eq!(t.s.len(), 4);
        assert!(t.s.iter().all(|s| (s - 1.0).abs() < 1e-14));
        assert_eq!(t.discarded_weight, 0.0);
    }

    #[test]
    fn svd_rank_one_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_matrix(&mut rng, 5, 1);
        let v = random_matrix(&mut rng, 1, 4);
        let m = &u * &v;
        let t = svd_truncate(&m, 1, 0.0);
        assert!((t.reconstruct() - &m).norm() < 1e-12);
    }

    #[test]
    fn svd_full_rank_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_matrix(&mut rng, 8, 8);
        let t = svd_truncate(&m, 8, 0.0);
        assert!((t.reconstruct() - &m).norm() <= 1e-12);
        for w in t.s.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn svd_discarded_weight_sums_dropped_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_matrix(&mut rng, 6, 5);
        let full = svd_truncate(&m, 5, 0.0);
        let cut = svd_truncate(&m, 2, 0.0);
        let expect: f64 = full.s[2..].iter().map(|s| s * s).sum();
        assert!((cut.discarded_weight - expect).abs() < 1e-12);
        assert!(((cut.reconstruct() - &m).norm().powi(2) - expect).abs() < 1e-10);
    }

    #[test]
    fn svd_of_empty_matrix() {
        let t = svd_truncate(&Matrix::zeros(0, 3), 4, 0.0);
        assert_eq!(t.rank(), 0);
    }

    #[test]
    fn pivoted_qr_edge_cases() {
        let z = qr_column_pivoted(&Matrix::zeros(3, 3), 1e-12);
        assert_eq!(z.rank, 0);
        let id = qr_column_pivoted(&identity(3), 1e-12);
        assert_eq!(id.rank, 3);
    }

    #[test]
    fn pivoted_qr_counts_duplicate_columns_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = random_matrix(&mut rng, 5, 4);
        let c0 = m.column(0).into_owned();
        m.set_column(2, &c0);
        let qr = qr_column_pivoted(&m, 1e-12);
        let svd_rank = svd_truncate(&m, 4, 1e-12).rank();
        assert_eq!(qr.rank, 3);
        assert_eq!(qr.rank, svd_rank);
        let kept = &qr.pivots[..qr.rank];
        assert!(!(kept.contains(&0) && kept.contains(&2)));
        // q is orthonormal and reproduces the permuted input
        assert!((qr.q.adjoint() * &qr.q - identity(4)).norm() < 1e-12);
        let mut perm = Matrix::zeros(5, 4);
        for (k, &p) in qr.pivots.iter().enumerate() {
            perm.set_column(k, &m.column(p));
        }
        assert!((&qr.q * &qr.r - perm).norm() < 1e-12);
    }

    #[test]
    fn pivoted_qr_rank_matches_svd_on_low_rank_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let rows = rng.random_range(3..9);
            let cols = rng.random_range(3..9);
            let r = rng.random_range(0..rows.min(cols) + 1);
            let m = random_matrix(&mut rng, rows, r) * random_matrix(&mut rng, r, cols);
            let qr = qr_column_pivoted(&m, 1e-10);
            let svd_rank = svd_truncate(&m, rows.min(cols), 1e-10).rank();
            assert_eq!(qr.rank, svd_rank);
        }
    }

    #[test]
    fn least_squares_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = random_matrix(&mut rng, 3, 2);
        let ls = solve_least_squares(&identity(3), &b).unwrap();
        assert!((ls.x - &b).norm() < 1e-15);
    }

    #[test]
    fn least_squares_consistent_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_matrix(&mut rng, 3, 2);
        let x0 = random_matrix(&mut rng, 2, 1);
        let ls = solve_least_squares(&a, &(&a * &x0)).unwrap();
        assert!(ls.residual <= 1e-12);
        assert!((ls.x - x0).norm() < 1e-12);
    }

    #[test]
    fn least_squares_residual_matches_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random_matrix(&mut rng, 5, 2);
        let b = random_matrix(&mut rng, 5, 1);
        let ls = solve_least_squares(&a, &b).unwrap();
        let aha = (a.adjoint() * &a).try_inverse().unwrap();
        let p = &a * aha * a.adjoint();
        let expected = ((identity(5) - p) * &b).norm();
        assert!((ls.residual - expected).abs() < 1e-12);
    }

    #[test]
    fn least_squares_signals_rank_deficiency() {
        let mut a = Matrix::zeros(3, 2);
        a[(0, 0)] = ONE;
        a[(0, 1)] = ONE;
        let b = Matrix::zeros(3, 1);
        assert!(matches!(
            solve_least_squares(&a, &b),
            Err(Error::RankDeficient { rank: 1, cols: 2 })
        ));
    }

    #[test]
    fn jacobi_fallback_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (r, c) in [(6, 4), (5, 5), (9, 1)] {
            let mut m = Matrix::from_fn(r, c, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            // widely spread column scales
            for j in 0..c {
                m.column_mut(j).scale_mut(10f64.powi(-3 * j as i32));
            }
            let (u, s, vt) = jacobi_svd_tall(&m);
            assert!(svd_residual(&m, &u, &s, &vt) < 1e-14 * m.norm());
            assert!((u.adjoint() * &u - Matrix::identity(c, c)).norm() < 1e-13);
            assert!((&vt * vt.adjoint() - Matrix::identity(c, c)).norm() < 1e-13);
            let mut lib = m
                .clone()
                .singular_values()
                .iter()
                .copied()
                .collect::<Vec<_>>();
            let mut mine = s.clone();
            lib.sort_by(f64::total_cmp);
            mine.sort_by(f64::total_cmp);
            for (a, b) in lib.iter().zip(&mine) {
                assert!((a - b).abs() < 1e-13 * lib[lib.len() - 1]);
            }
        }
    }

    #[test]
    fn checked_svd_handles_wide_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (r, c) in [(3, 7), (7, 3), (1, 4), (4, 1)] {
            let m = Matrix::from_fn(r, c, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let (u, s, vt) = svd_checked(&m);
            assert_eq!(u.nrows(), r);
            assert_eq!(vt.ncols(), c);
            assert!(svd_residual(&m, &u, &s, &vt) < 1e-13);
        }
    }
}
