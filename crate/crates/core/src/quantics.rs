//! Quantics tensor trains: functions on a `2ᴿ`-point dyadic grid with one
//! binary digit per site, least-significant bit first.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tensor::{svd_truncate, DenseTensor, Matrix, ONE, ZERO};

/// Largest bit count accepted for dense sampling.
pub const MAX_SAMPLED_BITS: usize = 24;

/// Relative singular-value cutoff applied after products and integrals.
/// Singular values below this multiple of `ε·√m·‖M‖` are treated as roundoff.
const ROUNDOFF_FACTOR: f64 = 4.0;
pub const RECOMPRESS_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct QuanticsTrain {
    /// `sites[α][x]` is the `D_α × D_{α+1}` matrix for bit value `x`.
    sites: Vec<[Matrix; 2]>,
    t0: f64,
    t1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrigKind {
    Sin,
    Cos,
}

impl QuanticsTrain {
    fn from_sites(sites: Vec<[Matrix; 2]>, t0: f64, t1: f64) -> Self {
        Self { sites, t0, t1 }
    }

    pub fn bits(&self) -> usize {
        self.sites.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn grid_len(&self) -> u64 {
        1u64 << self.bits()
    }

    /// Grid spacing `Δx = (t1 − t0)/2ᴿ`.
    pub fn spacing(&self) -> f64 {
        (self.t1 - self.t0) / self.grid_len() as f64
    }

    pub fn grid_point(&self, n: u64) -> f64 {
        self.t0 + (self.t1 - self.t0) * n as f64 / self.grid_len() as f64
    }

    /// Bond dimensions between consecutive sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1]
            .iter()
            .map(|s| s[0].ncols())
            .collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Site `α` as a `(D_α, 2, D_{α+1})` tensor.
    pub fn site_tensor(&self, alpha: usize) -> DenseTensor {
        let [m0, m1] = &self.sites[alpha];
        let (dl, dr) = m0.shape();
        let mut data = Vec::with_capacity(dl * 2 * dr);
        for l in 0..dl {
            for m in [m0, m1] {
                for r in 0..dr {
                    data.push(m[(l, r)]);
                }
            }
        }
        DenseTensor::new(vec![dl, 2, dr], data).expect("consistent site shape")
    }

    pub fn evaluate(&self, n: u64) -> C64 {
        let mut v = Matrix::from_element(1, 1, ONE);
        for (alpha, site) in self.sites.iter().enumerate() {
            v = v * &site[((n >> alpha) & 1) as usize];
        }
        v[(0, 0)]
    }

    /// `Σₙ f(xₙ)`.
    pub fn sum(&self) -> C64 {
        let mut v = Matrix::from_element(1, 1, ONE);
        for site in &self.sites {
            v = v * (&site[0] + &site[1]);
        }
        v[(0, 0)]
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for m in out.sites[0].iter_mut() {
            *m *= c;
        }
        out
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.bits() != other.bits() {
            return Err(Error::DimensionMismatch(format!(
                "{} bits vs {} bits",
                self.bits(),
                other.bits()
            )));
        }
        if (self.t0 - other.t0).abs() > 1e-15 || (self.t1 - other.t1).abs() > 1e-15 {
            return Err(Error::DimensionMismatch(
                "quantics trains live on different domains".into(),
            ));
        }
        Ok(())
    }

    /// Direct sum: evaluates to `f + g`, bond dimensions add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let r = self.bits();
        let sites = (0..r)
            .map(|alpha| {
                let mk = |x: usize| {
                    let (a, b) = (&self.sites[alpha][x], &other.sites[alpha][x]);
                    if r == 1 {
                        return a + b;
                    }
                    if alpha == 0 {
                        let mut m = Matrix::zeros(1, a.ncols() + b.ncols());
                        m.view_mut((0, 0), a.shape()).copy_from(a);
                        m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
                        m
                    } else if alpha == r - 1 {
                        let mut m = Matrix::zeros(a.nrows() + b.nrows(), 1);
                        m.view_mut((0, 0), a.shape()).copy_from(a);
                        m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
                        m
                    } else {
                        let mut m = Matrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
                        m.view_mut((0, 0), a.shape()).copy_from(a);
                        m.view_mut(a.shape(), b.shape()).copy_from(b);
                        m
                    }
                };
                [mk(0), mk(1)]
            })
            .collect();
        Ok(Self::from_sites(sites, self.t0, self.t1))
    }

    /// Left-to-right QR sweep followed by a right-to-left truncated SVD sweep.
    pub fn recompress(&self, tol: f64) -> Self {
        let mut sites = self.sites.clone();
        let r = sites.len();
        for alpha in 0..r.saturating_sub(1) {
            let [m0, m1] = &sites[alpha];
            let (dl, dr) = m0.shape();
            let mut stacked = Matrix::zeros(2 * dl, dr);
            stacked.view_mut((0, 0), (dl, dr)).copy_from(m0);
            stacked.view_mut((dl, 0), (dl, dr)).copy_from(m1);
            let qr = stacked.qr();
            let (q, rr) = (qr.q(), qr.r());
            let k = q.ncols();
            sites[alpha] = [q.rows(0, dl).into_owned(), q.rows(dl, dl).into_owned()];
            let next = &sites[alpha + 1];
            sites[alpha + 1] = [&rr * &next[0], &rr * &next[1]];
            debug_assert_eq!(sites[alpha][0].ncols(), k);
        }
        for alpha in (1..r).rev() {
            let [m0, m1] = &sites[alpha];
            let (dl, dr) = m0.shape();
            let mut wide = Matrix::zeros(dl, 2 * dr);
            wide.view_mut((0, 0), (dl, dr)).copy_from(m0);
            wide.view_mut((0, dr), (dl, dr)).copy_from(m1);
            let svd = svd_truncate(&wide, usize::MAX, tol);
            let k = svd.rank().max(1);
            let (u, vt) = if svd.rank() == 0 {
                (Matrix::zeros(dl, 1), Matrix::zeros(1, 2 * dr))
            } else {
                let mut us = svd.u.clone();
                for (c, &s) in svd.s.iter().enumerate() {
                    us.column_mut(c).scale_mut(s);
                }
                (us, svd.vt.clone())
            };
            sites[alpha] = [
                vt.columns(0, dr).into_owned(),
                vt.columns(dr, dr).into_owned(),
            ];
            let prev = &sites[alpha - 1];
            sites[alpha - 1] = [&prev[0] * &u, &prev[1] * &u];
            debug_assert_eq!(sites[alpha][0].nrows(), k);
        }
        Self::from_sites(sites, self.t0, self.t1)
    }
}

/// `exp(a·x)` on the unit grid `xₙ = n/2ᴿ`; every site is `(1, exp(a·2^{α−R}))`.
pub fn qtt_exp(a: C64, bits: usize) -> QuanticsTrain {
    qtt_exp_on(a, 0.0, 1.0, bits)
}

/// `exp(a·t)` on the grid over `[t0, t1)`.
pub fn qtt_exp_on(a: C64, t0: f64, t1: f64, bits: usize) -> QuanticsTrain {
    assert!(bits >= 1, "at least one bit");
    let len = t1 - t0;
    let sites = (0..bits)
        .map(|alpha| {
            let step = (a * (len * (2f64).powi(alpha as i32 - bits as i32))).exp();
            let base = if alpha == 0 { (a * t0).exp() } else { ONE };
            [
                Matrix::from_element(1, 1, base),
                Matrix::from_element(1, 1, base * step),
            ]
        })
        .collect();
    QuanticsTrain::from_sites(sites, t0, t1)
}

/// `sin` or `cos` of `frequency·x + phase` on the unit grid, bond dimension 2.
pub fn qtt_trig(kind: TrigKind, frequency: f64, phase: f64, bits: usize) -> QuanticsTrain {
    qtt_trig_on(kind, 1.0, frequency, phase, 0.0, 1.0, bits)
}

/// `amplitude·trig(frequency·t + phase)` over `[t0, t1)` as a sum of two exponentials.
pub fn qtt_trig_on(
    kind: TrigKind,
    amplitude: f64,
    frequency: f64,
    phase: f64,
    t0: f64,
    t1: f64,
    bits: usize,
) -> QuanticsTrain {
    let i = C64::new(0.0, 1.0);
    let ep = (i * phase).exp();
    let (cp, cm) = match kind {
        TrigKind::Sin => (ep / (2.0 * i), -ep.conj() / (2.0 * i)),
        TrigKind::Cos => (ep / 2.0, ep.conj() / 2.0),
    };
    let plus = qtt_exp_on(i * frequency, t0, t1, bits).scale(cp * amplitude);
    let minus = qtt_exp_on(-i * frequency, t0, t1, bits).scale(cm * amplitude);
    plus.add(&minus).expect("same grid")
}

/// Constant function, bond dimension 1.
pub fn qtt_constant(c: C64, t0: f64, t1: f64, bits: usize) -> QuanticsTrain {
    qtt_exp_on(ZERO, t0, t1, bits).scale(c)
}

/// Samples `f` on all `2ᴿ` grid points and compresses by sequential SVD.
/// The grid error is at most `tol·max|f|` plus roundoff.
pub fn qtt_from_samples<F: Fn(f64) -> C64>(
    f: F,
    t0: f64,
    t1: f64,
    bits: usize,
    max_bond: usize,
    tol: f64,
) -> Result<QuanticsTrain> {
    if bits == 0 || bits > MAX_SAMPLED_BITS {
        return Err(Error::Unsupported(format!(
            "sampling needs 1..={MAX_SAMPLED_BITS} bits, got {bits}"
        )));
    }
    let n = 1usize << bits;
    let h = (t1 - t0) / n as f64;
    let values: Vec<C64> = (0..n).map(|k| f(t0 + h * k as f64)).collect();
    let fmax = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let step_tol = if bits > 1 {
        tol * fmax / ((bits - 1) as f64).sqrt()
    } else {
        0.0
    };
    // rem[l, m] with m = x + 2·rest, x the current bit
    let mut rem = DMatrix::from_row_slice(1, n, &values);
    drop(values);
    let mut sites = Vec::with_capacity(bits);
    for _alpha in 0..bits - 1 {
        let dl = rem.nrows();
        let half = rem.ncols() / 2;
        // Mᴴ as a tall matrix: row `rest`, column `x·dl + l`
        let mut tall = Matrix::zeros(half, 2 * dl);
        for l in 0..dl {
            for rest in 0..half {
                tall[(rest, l)] = rem[(l, 2 * rest)].conj();
                tall[(rest, dl + l)] = rem[(l, 2 * rest + 1)].conj();
            }
        }
        drop(rem);
        let (u, s, vt) = wide_svd_from_tall_adjoint(tall);
        // smallest k whose discarded tail stays under the step tolerance,
        // never resolving below the roundoff level of the factorization
        let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let step_tol = step_tol.max(ROUNDOFF_FACTOR * f64::EPSILON * (half as f64).sqrt() * norm);
        let mut k = s.len();
        let mut tail = 0.0;
        while k > 1 && tail + s[k - 1] * s[k - 1] <= step_tol * step_tol {
            tail += s[k - 1] * s[k - 1];
            k -= 1;
        }
        if k > max_bond {
            return Err(Error::BondCap { cap: max_bond });
        }
        sites.push([
            u.view((0, 0), (dl, k)).into_owned(),
            u.view((dl, 0), (dl, k)).into_owned(),
        ]);
        let mut next = vt.rows(0, k).into_owned();
        for (r, &sv) in s.iter().take(k).enumerate() {
            next.row_mut(r).scale_mut(sv);
        }
        rem = next;
    }
    let dl = rem.nrows();
    let last0 = Matrix::from_fn(dl, 1, |l, _| rem[(l, 0)]);
    let last1 = Matrix::from_fn(dl, 1, |l, _| rem[(l, 1)]);
    sites.push([last0, last1]);
    Ok(QuanticsTrain::from_sites(sites, t0, t1))
}

/// SVD of the wide matrix `M` given `Mᴴ` (tall): returns `U`, singular values
/// in descending order and `Vᴴ`.
fn wide_svd_from_tall_adjoint(tall: Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let qr = tall.qr();
    let (q, r) = (qr.q(), qr.r());
    // M = Rᴴ Qᴴ, Rᴴ = U S Wᴴ  =>  M = U S (Q W)ᴴ
    let (u, sv, wt) = crate::tensor::svd_checked(&r.adjoint());
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut us = Matrix::zeros(u.nrows(), order.len());
    let mut ws = Matrix::zeros(order.len(), wt.ncols());
    for (c, &k) in order.iter().enumerate() {
        us.set_column(c, &u.column(k));
        ws.set_row(c, &wt.row(k));
    }
    let vt = ws * q.adjoint();
    (us, order.iter().map(|&k| sv[k]).collect(), vt)
}

/// Pointwise product; bond dimensions multiply before recompression.
pub fn pointwise_product(f: &QuanticsTrain, g: &QuanticsTrain) -> Result<QuanticsTrain> {
    f.check_compatible(g)?;
    let sites = f
        .sites
        .iter()
        .zip(&g.sites)
        .map(|(a, b)| [a[0].kronecker(&b[0]), a[1].kronecker(&b[1])])
        .collect();
    Ok(QuanticsTrain::from_sites(sites, f.t0, f.t1).recompress(RECOMPRESS_TOL))
}

/// Bond-dimension-2 MPO mapping `f` to `F(yₙ) = Σ_{m<n} f(xₘ)·Δx`.
#[derive(Clone, Debug)]
pub struct CumulativeIntegralMPO {
    bits: usize,
    delta_x: f64,
}

impl CumulativeIntegralMPO {
    pub fn new(bits: usize, delta_x: f64) -> Self {
        Self { bits, delta_x }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Entry `W[a, b, y, x]` of a site tensor.
    ///
    /// Bond `a` faces the less significant side, `b` the more significant one.
    /// State 1 means the deciding bit lies further up, state 0 that it was
    /// already passed.
    pub fn element(&self, a: usize, b: usize, y: usize, x: usize) -> f64 {
        let mut w = 0.0;
        if a == 1 && b == 1 {
            w += 1.0;
        }
        if x == y && a == 0 && b == 0 {
            w += 1.0;
        }
        if y == 1 && x == 0 && a == 1 && b == 0 {
            w += self.delta_x;
        }
        w
    }

    /// The site tensor as a `(2, 2, 2, 2)` array indexed `[a, b, y, x]`.
    pub fn site_tensor(&self) -> DenseTensor {
        let mut data = Vec::with_capacity(16);
        for a in 0..2 {
            for b in 0..2 {
                for y in 0..2 {
                    for x in 0..2 {
                        data.push(C64::new(self.element(a, b, y, x), 0.0));
                    }
                }
            }
        }
        DenseTensor::new(vec![2, 2, 2, 2], data).expect("16 entries")
    }

    /// Applies the MPO with `a = 1` on the least significant end and `b = 0`
    /// on the most significant end.
    pub fn apply(&self, f: &QuanticsTrain) -> Result<QuanticsTrain> {
        if f.bits() != self.bits {
            return Err(Error::DimensionMismatch(format!(
                "{} bits vs {} bits",
                f.bits(),
                self.bits
            )));
        }
        let r = self.bits;
        let mut sites = Vec::with_capacity(r);
        for (alpha, site) in f.sites.iter().enumerate() {
            let (dl, dr) = site[0].shape();
            let a_range: Vec<usize> = if alpha == 0 { vec![1] } else { vec![0, 1] };
            let b_range: Vec<usize> = if alpha == r - 1 { vec![0] } else { vec![0, 1] };
            let mut out = [
                Matrix::zeros(a_range.len() * dl, b_range.len() * dr),
                Matrix::zeros(a_range.len() * dl, b_range.len() * dr),
            ];
            for (ia, &a) in a_range.iter().enumerate() {
                for (ib, &b) in b_range.iter().enumerate() {
                    for (y, o) in out.iter_mut().enumerate() {
                        for x in 0..2 {
                            let w = self.element(a, b, y, x);
                            if w != 0.0 {
                                let mut block = o.view_mut((ia * dl, ib * dr), (dl, dr));
                                block += &site[x] * C64::new(w, 0.0);
                            }
                        }
                    }
                }
            }
            sites.push(out);
        }
        Ok(QuanticsTrain::from_sites(sites, f.t0, f.t1).recompress(RECOMPRESS_TOL))
    }
}

pub fn cumulative_integral_mpo(bits: usize, delta_x: f64) -> CumulativeIntegralMPO {
    CumulativeIntegralMPO::new(bits, delta_x)
}
