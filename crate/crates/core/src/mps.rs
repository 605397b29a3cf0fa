//! Finite matrix product states and MPO application with SVD truncation.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::extensive::ExtensiveMPO;
use crate::fdmpo::FirstDegreeMPO;
use crate::tensor::{svd_truncate, DenseTensor, Matrix, ONE, ZERO};

/// Largest dense vector produced by [`FiniteMPS::to_dense`].
pub const MPS_DENSE_CAP: usize = 1 << 20;

/// Site tensors `A[s]` of shape `(D_left, D_right)` for each physical index `s`.
#[derive(Clone, Debug)]
pub struct FiniteMPS {
    d: usize,
    sites: Vec<Vec<Matrix>>,
    center: Option<usize>,
}

impl FiniteMPS {
    fn from_sites(d: usize, sites: Vec<Vec<Matrix>>, center: Option<usize>) -> Self {
        Self { d, sites, center }
    }

    /// `|s₀ s₁ …⟩` for local basis indices `s`.
    pub fn product_state(d: usize, local: &[usize]) -> Result<Self> {
        if local.is_empty() {
            return Err(Error::DimensionMismatch("empty chain".into()));
        }
        let mut sites = Vec::with_capacity(local.len());
        for &s in local {
            if s >= d {
                return Err(Error::DimensionMismatch(format!(
                    "local state {s} with d = {d}"
                )));
            }
            sites.push(
                (0..d)
                    .map(|k| Matrix::from_element(1, 1, if k == s { ONE } else { ZERO }))
                    .collect(),
            );
        }
        Ok(Self::from_sites(d, sites, None))
    }

    /// Normalized random state with uniform bond dimension `bond` away from the edges.
    pub fn random<R: Rng>(d: usize, n_sites: usize, bond: usize, rng: &mut R) -> Self {
        let mut sites = Vec::with_capacity(n_sites);
        for i in 0..n_sites {
            let dl = if i == 0 { 1 } else { bond };
            let dr = if i + 1 == n_sites { 1 } else { bond };
            sites.push(
                (0..d)
                    .map(|_| {
                        Matrix::from_fn(dl, dr, |_, _| {
                            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        })
                    })
                    .collect(),
            );
        }
        let mut psi = Self::from_sites(d, sites, None);
        psi.sweep(usize::MAX, 0.0);
        psi
    }

    /// Exact MPS of a dense vector, site 0 most significant.
    pub fn from_dense(v: &DVector<C64>, d: usize, n_sites: usize) -> Result<Self> {
        let dim = d.checked_pow(n_sites as u32).unwrap_or(usize::MAX);
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {d}^{n_sites}",
                v.len()
            )));
        }
        let mut sites = Vec::with_capacity(n_sites);
        // rem[(a, rest)], rest runs over the remaining sites
        let mut rem = Matrix::from_iterator(1, dim, v.iter().copied());
        for i in 0..n_sites - 1 {
            let dl = rem.nrows();
            let rest = rem.ncols() / d;
            let mut m = Matrix::zeros(dl * d, rest);
            for a in 0..dl {
                for s in 0..d {
                    for r in 0..rest {
                        m[(a * d + s, r)] = rem[(a, s * rest + r)];
                    }
                }
            }
            let svd = svd_truncate(&m, usize::MAX, 1e-15);
            let k = svd.rank().max(1);
            let u = if svd.rank() == 0 {
                Matrix::zeros(dl * d, 1)
            } else {
                svd.u.clone()
            };
            sites.push(
                (0..d)
                    .map(|s| Matrix::from_fn(dl, k, |a, b| u[(a * d + s, b)]))
                    .collect(),
            );
            let mut next = if svd.rank() == 0 {
                Matrix::zeros(1, rest)
            } else {
                svd.vt.clone()
            };
            for (r, &sv) in svd.s.iter().enumerate() {
                next.row_mut(r).scale_mut(sv);
            }
            rem = next;
            let _ = i;
        }
        let dl = rem.nrows();
        sites.push(
            (0..d)
                .map(|s| Matrix::from_fn(dl, 1, |a, _| rem[(a, s)]))
                .collect(),
        );
        Ok(Self::from_sites(d, sites, Some(n_sites - 1)))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.center
    }

    /// Rank-3 tensor `(D_left, d, D_right)` of site `i`.
    pub fn site_tensor(&self, i: usize) -> DenseTensor {
        let site = &self.sites[i];
        let (dl, dr) = site[0].shape();
        let mut data = Vec::with_capacity(dl * self.d * dr);
        for a in 0..dl {
            for m in site {
                for b in 0..dr {
                    data.push(m[(a, b)]);
                }
            }
        }
        DenseTensor::new(vec![dl, self.d, dr], data).expect("consistent site shape")
    }

    /// Bond dimensions between neighbouring sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(|s| s[0].ncols())
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Self) -> Result<C64> {
        if self.d != other.d || self.n_sites() != other.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "overlap of {}×{} with {}×{}",
                self.n_sites(),
                self.d,
                other.n_sites(),
                other.d
            )));
        }
        let mut env = Matrix::from_element(1, 1, ONE);
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let mut next = Matrix::zeros(a[0].ncols(), b[0].ncols());
            for s in 0..self.d {
                next += a[s].adjoint() * &env * &b[s];
            }
            env = next;
        }
        Ok(env[(0, 0)])
    }

    pub fn norm(&self) -> f64 {
        self.overlap(self)
            .map(|v| v.re.max(0.0).sqrt())
            .unwrap_or(0.0)
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let site = self.center.unwrap_or(0);
            for m in &mut self.sites[site] {
                m.unscale_mut(n);
            }
        }
    }

    /// Dense state vector, site 0 most significant.
    pub fn to_dense(&self) -> Result<DVector<C64>> {
        let dim = self
            .d
            .checked_pow(self.n_sites() as u32)
            .unwrap_or(usize::MAX);
        if dim > MPS_DENSE_CAP {
            return Err(Error::DenseCap {
                dim,
                cap: MPS_DENSE_CAP,
            });
        }
        // acc[(prefix, bond)]
        let mut acc = Matrix::from_element(1, 1, ONE);
        for site in &self.sites {
            let dr = site[0].ncols();
            let mut next = Matrix::zeros(acc.nrows() * self.d, dr);
            for s in 0..self.d {
                let block = &acc * &site[s];
                for p in 0..acc.nrows() {
                    next.row_mut(p * self.d + s).copy_from(&block.row(p));
                }
            }
            acc = next;
        }
        Ok(DVector::from_iterator(dim, acc.column(0).iter().copied()))
    }

    /// `⟨H⟩/⟨ψ|ψ⟩` for a first-degree MPO.
    pub fn expectation(&self, h: &FirstDegreeMPO) -> Result<f64> {
        if h.d() != self.d {
            return Err(Error::PhysicalDimension {
                left: h.d(),
                right: self.d,
            });
        }
        let grid = h.site_grid();
        let n = grid.len();
        let mut env: Vec<Option<Matrix>> = vec![None; n];
        env[0] = Some(Matrix::from_element(1, 1, ONE));
        for site in &self.sites {
            let dr = site[0].ncols();
            let mut next: Vec<Option<Matrix>> = vec![None; n];
            for (i, e) in env.iter().enumerate() {
                let Some(e) = e else { continue };
                for (j, op) in grid[i].iter().enumerate() {
                    let Some(op) = op else { continue };
                    let mut acc = Matrix::zeros(dr, dr);
                    for so in 0..self.d {
                        for si in 0..self.d {
                            let w = op[(so, si)];
                            if w != ZERO {
                                acc += site[so].adjoint() * e * &site[si] * w;
                            }
                        }
                    }
                    match &mut next[j] {
                        Some(x) => *x += acc,
                        slot => *slot = Some(acc),
                    }
                }
            }
            env = next;
        }
        let value = env[n - 1].as_ref().map_or(ZERO, |m| m[(0, 0)]);
        Ok(value.re / self.overlap(self)?.re)
    }

    /// Left-to-right QR sweep, then right-to-left truncated SVD sweep.
    /// Returns the discarded weight relative to the squared norm.
    fn sweep(&mut self, max_bond: usize, tol: f64) -> f64 {
        let d = self.d;
        let n = self.sites.len();
        for i in 0..n - 1 {
            let (dl, dr) = self.sites[i][0].shape();
            let mut m = Matrix::zeros(dl * d, dr);
            for s in 0..d {
                for a in 0..dl {
                    m.row_mut(a * d + s).copy_from(&self.sites[i][s].row(a));
                }
            }
            let qr = m.qr();
            let (q, r) = (qr.q(), qr.r());
            let k = q.ncols();
            self.sites[i] = (0..d)
                .map(|s| Matrix::from_fn(dl, k, |a, b| q[(a * d + s, b)]))
                .collect();
            for s in 0..d {
                self.sites[i + 1][s] = &r * &self.sites[i + 1][s];
            }
        }
        let mut discarded = 0.0;
        for i in (1..n).rev() {
            let (dl, dr) = self.sites[i][0].shape();
            let mut m = Matrix::zeros(dl, d * dr);
            for s in 0..d {
                m.view_mut((0, s * dr), (dl, dr))
                    .copy_from(&self.sites[i][s]);
            }
            let svd = svd_truncate(&m, max_bond, tol);
            let kept: f64 = svd.s.iter().map(|x| x * x).sum();
            if kept + svd.discarded_weight > 0.0 {
                discarded += svd.discarded_weight / (kept + svd.discarded_weight);
            }
            let k = svd.rank().max(1);
            let (u, vt) = if svd.rank() == 0 {
                (Matrix::zeros(dl, 1), Matrix::zeros(1, d * dr))
            } else {
                let mut us = svd.u.clone();
                for (c, &s) in svd.s.iter().enumerate() {
                    us.column_mut(c).scale_mut(s);
                }
                (us, svd.vt.clone())
            };
            self.sites[i] = (0..d)
                .map(|s| vt.view((0, s * dr), (k, dr)).into_owned())
                .collect();
            for s in 0..d {
                self.sites[i - 1][s] = &self.sites[i - 1][s] * &u;
            }
        }
        self.center = Some(0);
        self.normalize();
        discarded
    }
}

/// Result of [`apply_mpo`].
#[derive(Clone, Debug)]
pub struct AppliedState {
    pub state: FiniteMPS,
    /// Sum over bonds of the discarded squared singular values, each
    /// relative to the squared norm at that bond.
    pub discarded_weight: f64,
}

/// Exact contraction of an extensive MPO (level (1) at both ends) with an
/// MPS, followed by a QR sweep and a truncating SVD sweep.
pub fn apply_mpo(
    mpo: &ExtensiveMPO,
    psi: &FiniteMPS,
    d_max: usize,
    svd_tol: f64,
) -> Result<AppliedState> {
    if mpo.d() != psi.d {
        return Err(Error::PhysicalDimension {
            left: mpo.d(),
            right: psi.d,
        });
    }
    let d = psi.d;
    let n_levels = mpo.bond_dimension();
    let n = psi.n_sites();
    let mut sites = Vec::with_capacity(n);
    for (i, site) in psi.sites.iter().enumerate() {
        let (dl, dr) = site[0].shape();
        let rows = if i == 0 { 1 } else { n_levels };
        let cols = if i + 1 == n { 1 } else { n_levels };
        let mut out = vec![Matrix::zeros(rows * dl, cols * dr); d];
        for (&(li, lj), op) in mpo.entries() {
            if li >= rows || lj >= cols {
                continue;
            }
            for so in 0..d {
                let mut block = out[so].view_mut((li * dl, lj * dr), (dl, dr));
                for si in 0..d {
                    let w = op[(so, si)];
                    if w != ZERO {
                        block += &site[si] * w;
                    }
                }
            }
        }
        sites.push(out);
    }
    let mut state = FiniteMPS::from_sites(d, sites, None);
    let discarded_weight = state.sweep(d_max, svd_tol);
    Ok(AppliedState {
        state,
        discarded_weight,
    })
}

/// `sqrt(1 − |⟨A|B⟩|²)` of the normalized states.
pub fn trace_distance_error(a: &FiniteMPS, b: &FiniteMPS) -> Result<f64> {
    if let (Ok(va), Ok(vb)) = (a.to_dense(), b.to_dense()) {
        return Ok(trace_distance_dense(&va, &vb));
    }
    let o = a.overlap(b)? / (a.norm() * b.norm());
    Ok((1.0 - o.norm_sqr()).max(0.0).sqrt())
}

/// Same metric for dense vectors, evaluated as the norm of the component of
/// `b` orthogonal to `a`, which stays accurate below `√ε_machine`.
pub fn trace_distance_dense(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    let a = a / C64::new(a.norm(), 0.0);
    let b = b / C64::new(b.norm(), 0.0);
    let perp = &b - &a * a.dotc(&b);
    perp.norm().min(1.0)
}
