//! First-degree MPOs and their closed algebra.
//!
//! A first-degree MPO is the upper-triangular single-site tensor
//!
//! ```text
//! [ 1  L  D ]
//! [ 0  A  R ]
//! [ 0  0  1 ]
//! ```
//!
//! with `χ` middle slots. Level 0 is "not started", level `χ+1` is "finished".

use num_complex::Complex64 as C64;

use crate::chain::dense_chain;
use crate::error::{Error, Result};
use crate::tensor::{identity, Matrix};

pub type SiteOperator = Matrix;

/// Default cap on the Hilbert-space dimension of dense expansions.
pub const DENSE_CAP: usize = 1 << 6;

type Grid = Vec<Vec<Option<Matrix>>>;

#[derive(Clone, Debug)]
pub struct FirstDegreeMPO {
    d: usize,
    l: Vec<Option<Matrix>>,
    a: Vec<Vec<Option<Matrix>>>,
    r: Vec<Option<Matrix>>,
    on_site: Option<Matrix>,
    middle_labels: Vec<String>,
}

fn check_op(op: &Option<Matrix>, d: usize) -> Result<()> {
    match op {
        Some(m) if m.nrows() != d || m.ncols() != d => Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        ))),
        _ => Ok(()),
    }
}

fn mul_opt(x: &Option<Matrix>, y: &Option<Matrix>) -> Option<Matrix> {
    match (x, y) {
        (Some(x), Some(y)) => Some(x * y),
        _ => None,
    }
}

fn add_into(slot: &mut Option<Matrix>, op: &Option<Matrix>) {
    if let Some(op) = op {
        match slot {
            Some(acc) => *acc += op,
            None => *slot = Some(op.clone()),
        }
    }
}

impl FirstDegreeMPO {
    /// Builds an MPO from its blocks. `a` must be `χ×χ` with `χ = l.len() = r.len()`.
    pub fn new(
        d: usize,
        l: Vec<Option<Matrix>>,
        a: Vec<Vec<Option<Matrix>>>,
        r: Vec<Option<Matrix>>,
        on_site: Option<Matrix>,
    ) -> Result<Self> {
        let chi = l.len();
        if r.len() != chi || a.len() != chi || a.iter().any(|row| row.len() != chi) {
            return Err(Error::DimensionMismatch(format!(
                "L has {chi} slots, R has {}, A is {}x{}",
                r.len(),
                a.len(),
                a.first().map_or(0, Vec::len)
            )));
        }
        for op in l
            .iter()
            .chain(r.iter())
            .chain(a.iter().flatten())
            .chain(std::iter::once(&on_site))
        {
            check_op(op, d)?;
        }
        let middle_labels = vec!["2".to_string(); chi];
        Ok(Self {
            d,
            l,
            a,
            r,
            on_site,
            middle_labels,
        })
    }

    /// Sum of two-site terms `Σ L_k R_k`, optional longer-range couplings
    /// through `A`, and an on-site term.
    pub fn from_terms(
        d: usize,
        two_site: Vec<(Matrix, Matrix)>,
        longer: Option<Vec<Vec<Option<Matrix>>>>,
        on_site: Option<Matrix>,
    ) -> Result<Self> {
        let chi = two_site.len();
        let (l, r): (Vec<_>, Vec<_>) = two_site
            .into_iter()
            .map(|(l, r)| (Some(l), Some(r)))
            .unzip();
        let a = longer.unwrap_or_else(|| vec![vec![None; chi]; chi]);
        Self::new(d, l, a, r, on_site)
    }

    pub fn zero(d: usize) -> Self {
        Self {
            d,
            l: vec![],
            a: vec![],
            r: vec![],
            on_site: None,
            middle_labels: vec![],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn chi(&self) -> usize {
        self.l.len()
    }

    pub fn l(&self, i: usize) -> Option<&Matrix> {
        self.l[i].as_ref()
    }

    pub fn a(&self, i: usize, j: usize) -> Option<&Matrix> {
        self.a[i][j].as_ref()
    }

    pub fn r(&self, i: usize) -> Option<&Matrix> {
        self.r[i].as_ref()
    }

    pub fn on_site(&self) -> Option<&Matrix> {
        self.on_site.as_ref()
    }

    pub fn middle_labels(&self) -> &[String] {
        &self.middle_labels
    }

    pub fn with_middle_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.chi() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} slots",
                labels.len(),
                self.chi()
            )));
        }
        self.middle_labels = labels;
        Ok(self)
    }

    /// The `(χ+2)×(χ+2)` operator-valued site tensor. Absent entries are `None`.
    pub fn site_grid(&self) -> Grid {
        let chi = self.chi();
        let n = chi + 2;
        let mut g: Grid = vec![vec![None; n]; n];
        g[0][0] = Some(identity(self.d));
        g[n - 1][n - 1] = Some(identity(self.d));
        g[0][n - 1] = self.on_site.clone();
        for i in 0..chi {
            g[0][1 + i] = self.l[i].clone();
            g[1 + i][n - 1] = self.r[i].clone();
            for j in 0..chi {
                g[1 + i][1 + j] = self.a[i][j].clone();
            }
        }
        g
    }

    /// Checks the block upper-triangular form of the site tensor.
    pub fn is_upper_triangular(&self) -> bool {
        let g = self.site_grid();
        let n = g.len();
        let id = identity(self.d);
        let corners = g[0][0].as_ref() == Some(&id) && g[n - 1][n - 1].as_ref() == Some(&id);
        let first_col = (1..n).all(|i| g[i][0].is_none());
        let last_row = (0..n - 1).all(|j| g[n - 1][j].is_none());
        corners && first_col && last_row
    }

    fn from_grid(d: usize, g: Grid, middle_labels: Vec<String>) -> Self {
        let n = g.len();
        let chi = n - 2;
        let mut l = vec![None; chi];
        let mut r = vec![None; chi];
        let mut a = vec![vec![None; chi]; chi];
        for i in 0..chi {
            l[i] = g[0][1 + i].clone();
            r[i] = g[1 + i][n - 1].clone();
            for j in 0..chi {
                a[i][j] = g[1 + i][1 + j].clone();
            }
        }
        Self {
            d,
            l,
            a,
            r,
            on_site: g[0][n - 1].clone(),
            middle_labels,
        }
    }

    fn check_d(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::PhysicalDimension {
                left: self.d,
                right: other.d,
            });
        }
        Ok(())
    }

    /// Dense `d^n × d^n` matrix of the operator on an open chain.
    pub fn to_dense(&self, n_sites: usize) -> Result<Matrix> {
        self.to_dense_with_cap(n_sites, DENSE_CAP)
    }

    pub fn to_dense_with_cap(&self, n_sites: usize, cap: usize) -> Result<Matrix> {
        let g = self.site_grid();
        let n = g.len();
        let entries: Vec<(usize, usize, &Matrix)> = g
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(j, op)| op.as_ref().map(|m| (i, j, m)))
            })
            .collect();
        dense_chain(entries, n, self.d, n_sites, 0, n - 1, cap)
    }
}

/// Block concatenation; `χ = χ₁ + χ₂`.
pub fn fdmpo_add(h1: &FirstDegreeMPO, h2: &FirstDegreeMPO) -> Result<FirstDegreeMPO> {
    h1.check_d(h2)?;
    let (c1, c2) = (h1.chi(), h2.chi());
    let chi = c1 + c2;
    let mut a = vec![vec![None; chi]; chi];
    for i in 0..c1 {
        for j in 0..c1 {
            a[i][j] = h1.a[i][j].clone();
        }
    }
    for i in 0..c2 {
        for j in 0..c2 {
            a[c1 + i][c1 + j] = h2.a[i][j].clone();
        }
    }
    let mut on_site = h1.on_site.clone();
    add_into(&mut on_site, &h2.on_site);
    let mut labels = h1.middle_labels.clone();
    labels.extend(h2.middle_labels.iter().cloned());
    Ok(FirstDegreeMPO {
        d: h1.d,
        l: h1.l.iter().chain(&h2.l).cloned().collect(),
        a,
        r: h1.r.iter().chain(&h2.r).cloned().collect(),
        on_site,
        middle_labels: labels,
    })
}

/// Multiplies by `λ`, absorbed into the `L` row and `D`.
pub fn fdmpo_scale(h: &FirstDegreeMPO, lambda: C64) -> FirstDegreeMPO {
    let scale = |op: &Option<Matrix>| {
        if lambda == C64::new(0.0, 0.0) {
            None
        } else {
            op.as_ref().map(|m| m * lambda)
        }
    };
    FirstDegreeMPO {
        d: h.d,
        l: h.l.iter().map(scale).collect(),
        a: h.a.clone(),
        r: h.r.clone(),
        on_site: scale(&h.on_site),
        middle_labels: h.middle_labels.clone(),
    }
}

/// Terms of `H1·H2` whose supports overlap on at least one site.
///
/// Middle slots are ordered `(2,1)`, `(1,2)`, `(2,2)`, `(2,3)`, `(3,2)` over the
/// pair of factor states, so `χ₁₂ = 2χ₁ + 2χ₂ + χ₁χ₂`.
pub fn nondisjoint_product(h1: &FirstDegreeMPO, h2: &FirstDegreeMPO) -> Result<FirstDegreeMPO> {
    h1.check_d(h2)?;
    let (g1, g2) = (h1.site_grid(), h2.site_grid());
    let (c1, c2) = (h1.chi(), h2.chi());
    let (e1, e2) = (c1 + 1, c2 + 1);
    let mut states: Vec<(usize, usize)> = vec![(0, 0)];
    let mut labels = Vec::new();
    for i in 0..c1 {
        states.push((1 + i, 0));
        labels.push(format!("({},1)", h1.middle_labels[i]));
    }
    for j in 0..c2 {
        states.push((0, 1 + j));
        labels.push(format!("(1,{})", h2.middle_labels[j]));
    }
    for i in 0..c1 {
        for j in 0..c2 {
            states.push((1 + i, 1 + j));
            labels.push(format!("({},{})", h1.middle_labels[i], h2.middle_labels[j]));
        }
    }
    for i in 0..c1 {
        states.push((1 + i, e2));
        labels.push(format!("({},3)", h1.middle_labels[i]));
    }
    for j in 0..c2 {
        states.push((e1, 1 + j));
        labels.push(format!("(3,{})", h2.middle_labels[j]));
    }
    states.push((e1, e2));
    let n = states.len();
    let mut g: Grid = vec![vec![None; n]; n];
    for (p, &(x, y)) in states.iter().enumerate() {
        for (q, &(x2, y2)) in states.iter().enumerate() {
            g[p][q] = mul_opt(&g1[x][x2], &g2[y][y2]);
        }
    }
    Ok(FirstDegreeMPO::from_grid(h1.d, g, labels))
}

/// Non-disjoint square with equivalent levels merged; `χ₁₁ = 2χ + χ²`.
///
/// Middle blocks are `a` (χ slots), `b` (χ² slots) and `c` (χ slots).
pub fn nondisjoint_square(h: &FirstDegreeMPO) -> Result<FirstDegreeMPO> {
    let chi = h.chi();
    let p = nondisjoint_product(h, h)?;
    let mut g = p.site_grid();
    let mut labels = p.middle_labels.clone();
    // grid indices: 0 start, then (2,1), (1,2), (2,2), (2,3), (3,2), end
    let s21 = 1;
    let s12 = 1 + chi;
    let s23 = 1 + 2 * chi + chi * chi;
    let s32 = s23 + chi;
    let n = g.len();
    let mut keep = vec![true; n];
    for j in 0..chi {
        // same history: fold the row of (1,2) into (2,1), drop its column
        let row = g[s12 + j].clone();
        for (k, op) in row.iter().enumerate() {
            add_into(&mut g[s21 + j][k], op);
        }
        keep[s12 + j] = false;
        // same future: fold the column of (3,2) into (2,3), drop its row
        for i in 0..n {
            let op = g[i][s32 + j].clone();
            add_into(&mut g[i][s23 + j], &op);
        }
        keep[s32 + j] = false;
    }
    let idx: Vec<usize> = (0..n).filter(|&i| keep[i]).collect();
    let g: Grid = idx
        .iter()
        .map(|&i| idx.iter().map(|&j| g[i][j].clone()).collect())
        .collect();
    let labels: Vec<String> = idx[1..idx.len() - 1]
        .iter()
        .map(|&i| std::mem::take(&mut labels[i - 1]))
        .collect();
    Ok(FirstDegreeMPO::from_grid(h.d, g, labels))
}

/// `[H1, H2]` as the difference of the two non-disjoint products.
pub fn commutator(h1: &FirstDegreeMPO, h2: &FirstDegreeMPO) -> Result<FirstDegreeMPO> {
    let p12 = nondisjoint_product(h1, h2)?;
    let p21 = nondisjoint_product(h2, h1)?;
    fdmpo_add(&p12, &fdmpo_scale(&p21, C64::new(-1.0, 0.0)))
}

pub fn fdmpo_to_dense(h: &FirstDegreeMPO, n_sites: usize) -> Result<Matrix> {
    h.to_dense(n_sites)
}

pub mod pauli {
    //! Spin-1/2 operators.
    use super::Matrix;
    use crate::tensor::{I, ONE, ZERO};

    pub fn id() -> Matrix {
        Matrix::identity(2, 2)
    }

    pub fn x() -> Matrix {
        Matrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> Matrix {
        Matrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
    }

    pub fn z() -> Matrix {
        Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }
}

#[cfg(test)]
mod tests {
    use super::pauli::{x, z};
    use super::*;
    use crate::tensor::{identity, kron};

    fn ising() -> FirstDegreeMPO {
        FirstDegreeMPO::from_terms(2, vec![(z(), z())], None, None).unwrap()
    }

    fn field() -> FirstDegreeMPO {
        FirstDegreeMPO::from_terms(2, vec![], None, Some(x())).unwrap()
    }

    fn embed(ops: &[Matrix]) -> Matrix {
        ops.iter()
            .fold(Matrix::identity(1, 1), |acc, op| kron(&acc, op))
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn ising_dense_on_three_sites() {
        let id = identity(2);
        let expect = embed(&[z(), z(), id.clone()]) + embed(&[id, z(), z()]);
        assert!(close(&ising().to_dense(3).unwrap(), &expect, 1e-14));
    }

    #[test]
    fn field_dense_on_two_sites() {
        let expect = embed(&[x(), identity(2)]) + embed(&[identity(2), x()]);
        assert!(close(&field().to_dense(2).unwrap(), &expect, 1e-14));
        assert!(close(&field().to_dense(1).unwrap(), &x(), 1e-14));
    }

    #[test]
    fn decaying_coupling_is_a_geometric_double_sum() {
        let lambda = 0.6;
        let h = FirstDegreeMPO::from_terms(
            2,
            vec![(z(), z())],
            Some(vec![vec![Some(identity(2) * C64::new(lambda, 0.0))]]),
            None,
        )
        .unwrap();
        let n = 4;
        let mut expect = Matrix::zeros(16, 16);
        for i in 0..n {
            for j in i + 1..n {
                let mut ops = vec![identity(2); n];
                ops[i] = z();
                ops[j] = z();
                expect += embed(&ops) * C64::new(lambda.powi((j - i - 1) as i32), 0.0);
            }
        }
        assert!(close(&h.to_dense(4).unwrap(), &expect, 1e-13));
    }

    #[test]
    fn rejects_wrong_operator_size() {
        let r = FirstDegreeMPO::from_terms(2, vec![], None, Some(identity(3)));
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn add_zero_and_tfi() {
        let h = ising();
        let s = fdmpo_add(&h, &FirstDegreeMPO::zero(2)).unwrap();
        assert!(close(
            &s.to_dense(4).unwrap(),
            &h.to_dense(4).unwrap(),
            1e-14
        ));
        let tfi = fdmpo_add(&ising(), &field()).unwrap();
        let expect = ising().to_dense(4).unwrap() + field().to_dense(4).unwrap();
        assert!(close(&tfi.to_dense(4).unwrap(), &expect, 1e-13));
        let two = fdmpo_add(&tfi, &tfi).unwrap();
        let three = fdmpo_add(&two, &ising()).unwrap();
        assert_eq!(two.chi(), 2);
        assert_eq!(
            fdmpo_add(&two, &fdmpo_add(&three, &FirstDegreeMPO::zero(2)).unwrap())
                .unwrap()
                .chi(),
            5
        );
    }

    #[test]
    fn add_rejects_dimension_mismatch() {
        assert!(matches!(
            fdmpo_add(&ising(), &FirstDegreeMPO::zero(3)),
            Err(Error::PhysicalDimension { left: 2, right: 3 })
        ));
    }

    #[test]
    fn scale_cases() {
        let h = ising();
        let one = fdmpo_scale(&h, C64::new(1.0, 0.0));
        assert!(close(
            &one.to_dense(3).unwrap(),
            &h.to_dense(3).unwrap(),
            0.0
        ));
        let zero = fdmpo_scale(&h, C64::new(0.0, 0.0));
        assert!(zero.to_dense(3).unwrap().norm() == 0.0);
        let mi = fdmpo_scale(&h, C64::new(0.0, -1.0));
        assert!(close(
            &mi.to_dense(3).unwrap(),
            &(h.to_dense(3).unwrap() * C64::new(0.0, -1.0)),
            1e-14
        ));
    }

    #[test]
    fn product_bond_dimension() {
        let p = nondisjoint_product(&ising(), &ising()).unwrap();
        assert_eq!(p.chi(), 5);
        assert!(p.is_upper_triangular());
        let q = nondisjoint_product(&fdmpo_add(&ising(), &ising()).unwrap(), &ising()).unwrap();
        assert_eq!(q.chi(), 2 * 2 + 2 + 2);
    }

    #[test]
    fn product_with_zero_is_zero() {
        let p = nondisjoint_product(&ising(), &FirstDegreeMPO::zero(2)).unwrap();
        assert_eq!(p.to_dense(4).unwrap().norm(), 0.0);
    }

    #[test]
    fn field_square_is_on_site_only() {
        let s = nondisjoint_square(&field()).unwrap();
        let expect = identity(16) * C64::new(4.0, 0.0);
        assert!(close(&s.to_dense(4).unwrap(), &expect, 1e-13));
    }

    #[test]
    fn square_matches_product() {
        let tfi = fdmpo_add(&ising(), &field()).unwrap();
        let s = nondisjoint_square(&tfi).unwrap();
        let p = nondisjoint_product(&tfi, &tfi).unwrap();
        assert_eq!(nondisjoint_square(&ising()).unwrap().chi(), 3);
        assert_eq!(s.chi(), 2 * tfi.chi() + tfi.chi().pow(2));
        assert!(s.is_upper_triangular());
        assert!(close(
            &s.to_dense(4).unwrap(),
            &p.to_dense(4).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn commutator_cases() {
        let tfi = fdmpo_add(&ising(), &field()).unwrap();
        assert!(commutator(&tfi, &tfi).unwrap().to_dense(4).unwrap().norm() <= 1e-12);
        let (a, b) = (ising().to_dense(4).unwrap(), field().to_dense(4).unwrap());
        let c = commutator(&ising(), &field()).unwrap();
        assert!(close(&c.to_dense(4).unwrap(), &(&a * &b - &b * &a), 1e-12));
        let alpha = C64::new(0.3, -1.2);
        let lhs = commutator(&fdmpo_scale(&ising(), alpha), &field())
            .unwrap()
            .to_dense(4)
            .unwrap();
        assert!(close(&lhs, &(c.to_dense(4).unwrap() * alpha), 1e-12));
    }

    #[test]
    fn dense_cap() {
        assert!(matches!(
            ising().to_dense(7),
            Err(Error::DenseCap { dim: 128, cap: 64 })
        ));
        assert!(ising().to_dense_with_cap(7, 128).is_ok());
    }

    #[test]
    fn energy_of_product_state_is_extensive() {
        let tfi = fdmpo_add(&ising(), &field()).unwrap();
        let theta: f64 = 0.7;
        let site = nalgebra::DVector::from_vec(vec![
            C64::new(theta.cos(), 0.0),
            C64::new(theta.sin(), 0.0),
        ]);
        let energy = |n: usize| {
            let v = (0..n).fold(
                nalgebra::DVector::from_element(1, C64::new(1.0, 0.0)),
                |acc, _| acc.kronecker(&site),
            );
            let h = tfi.to_dense(n).unwrap();
            (v.adjoint() * h * &v)[(0, 0)].re
        };
        // per-bond and per-site contributions fix E(L) = (L-1) e_b + L e_s
        let (e2, e4) = (energy(2), energy(4));
        let es = 2.0 * theta.sin() * theta.cos();
        let eb = (theta.cos().powi(2) - theta.sin().powi(2)).powi(2);
        assert!((e2 - (eb + 2.0 * es)).abs() < 1e-13);
        assert!((e4 - (3.0 * eb + 4.0 * es)).abs() < 1e-13);
        assert!(((e4 - e2) - (2.0 * eb + 2.0 * es)).abs() < 1e-13);
    }
}
