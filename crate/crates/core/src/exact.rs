//! Dense state-vector reference evolution with classical Runge–Kutta.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::driving::TimeDependentHamiltonian;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Largest Hilbert space dimension accepted by [`exact_evolve`].
pub const EXACT_DIM_CAP: usize = 1 << 10;

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &Matrix) -> Self {
        let n = m.nrows();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for i in 0..n {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.norm() > 0.0 {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_start.push(cols.len());
        }
        Self {
            n,
            row_start,
            cols,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `out += c·M·x`.
    fn mul_add(&self, c: C64, x: &[C64], out: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            out[i] += c * acc;
        }
    }
}

/// Integrates `∂ₜψ = −iH(t)ψ` from `t0` to `t` with `substeps` RK4 steps.
pub fn exact_evolve(
    h: &TimeDependentHamiltonian,
    psi0: &DVector<C64>,
    n_sites: usize,
    t0: f64,
    t: f64,
    substeps: usize,
) -> Result<DVector<C64>> {
    let dim = h.d().checked_pow(n_sites as u32).unwrap_or(usize::MAX);
    if dim > EXACT_DIM_CAP {
        return Err(Error::DenseCap {
            dim,
            cap: EXACT_DIM_CAP,
        });
    }
    if psi0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} for dimension {dim}",
            psi0.len()
        )));
    }
    if substeps == 0 {
        return Err(Error::InvalidOrder(0));
    }
    let terms: Vec<CsrMatrix> = h
        .channels()
        .iter()
        .map(|c| {
            c.hamiltonian
                .to_dense_with_cap(n_sites, EXACT_DIM_CAP)
                .map(|m| CsrMatrix::from_dense(&m))
        })
        .collect::<Result<_>>()?;
    let drivings = h.drivings();
    let rhs = |s: f64, x: &[C64], out: &mut [C64]| {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (m, f) in terms.iter().zip(&drivings) {
            m.mul_add(C64::new(0.0, -f.eval(s)), x, out);
        }
    };
    let step = (t - t0) / substeps as f64;
    let mut y: Vec<C64> = psi0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![C64::new(0.0, 0.0); dim],
        vec![C64::new(0.0, 0.0); dim],
        vec![C64::new(0.0, 0.0); dim],
        vec![C64::new(0.0, 0.0); dim],
    );
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    for n in 0..substeps {
        let s = t0 + n as f64 * step;
        rhs(s, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + k1[i] * (0.5 * step);
        }
        rhs(s + 0.5 * step, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + k2[i] * (0.5 * step);
        }
        rhs(s + 0.5 * step, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + k3[i] * step;
        }
        rhs(s + step, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (step / 6.0);
        }
    }
    Ok(DVector::from_vec(y))
}

/// Substep count with `(t − t0)/substeps ≤ max_step`.
pub fn substeps_for(t0: f64, t: f64, max_step: f64) -> usize {
    (((t - t0).abs() / max_step).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::driving::{DrivenChannel, DrivingFunction};
    use crate::fdmpo::pauli::z;
    use crate::fdmpo::FirstDegreeMPO;
    use crate::testutil::{driven_ising, field_x, zz};

    fn basis(dim: usize, k: usize) -> DVector<C64> {
        let mut v = DVector::zeros(dim);
        v[k] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn constant_hamiltonian_matches_exponential() {
        let h = TimeDependentHamiltonian::new(vec![
            DrivenChannel {
                name: "zz".into(),
                hamiltonian: zz(),
                driving: DrivingFunction::Const { value: 1.0 },
            },
            DrivenChannel {
                name: "x".into(),
                hamiltonian: field_x(),
                driving: DrivingFunction::Const { value: 0.6 },
            },
        ])
        .unwrap();
        let psi = basis(16, 3);
        let out = exact_evolve(&h, &psi, 4, 0.0, 0.5, 5000).unwrap();
        let u = (h.dense_at(0.0, 4).unwrap() * C64::new(0.0, -0.5)).exp();
        assert!((out - u * psi).norm() < 1e-12);
    }

    #[test]
    fn commuting_drive_has_closed_form_phase() {
        let sz = FirstDegreeMPO::from_terms(2, vec![], None, Some(z())).unwrap();
        let h = TimeDependentHamiltonian::new(vec![DrivenChannel {
            name: "z".into(),
            hamiltonian: sz,
            driving: DrivingFunction::Sin {
                amplitude: 1.3,
                frequency: 2.0 * PI,
                phase: 0.2,
            },
        }])
        .unwrap();
        let psi = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let (t0, t) = (0.1, 0.85);
        let out = exact_evolve(&h, &psi, 1, t0, t, substeps_for(t0, t, 1e-3)).unwrap();
        let integral =
            -1.3 / (2.0 * PI) * ((2.0 * PI * t + 0.2).cos() - (2.0 * PI * t0 + 0.2).cos());
        let expect = DVector::from_vec(vec![
            psi[0] * C64::new(0.0, -integral).exp(),
            psi[1] * C64::new(0.0, integral).exp(),
        ]);
        assert!((out - expect).norm() < 1e-10);
    }

    #[test]
    fn zero_hamiltonian_and_norm() {
        let h = TimeDependentHamiltonian::new(vec![DrivenChannel {
            name: "zz".into(),
            hamiltonian: zz(),
            driving: DrivingFunction::Const { value: 0.0 },
        }])
        .unwrap();
        let psi = basis(8, 5);
        assert_eq!(exact_evolve(&h, &psi, 3, 0.0, 1.0, 10).unwrap(), psi);
        let out = exact_evolve(&driven_ising(), &basis(256, 0), 8, 0.0, 1.0, 10_000).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        assert!(matches!(
            exact_evolve(&driven_ising(), &basis(2048, 0), 11, 0.0, 1.0, 1),
            Err(Error::DenseCap { .. })
        ));
    }
}
