//! Shared fixtures for unit tests.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::driving::{DrivenChannel, DrivingFunction, TimeDependentHamiltonian};
use crate::fdmpo::pauli::{x, z};
use crate::fdmpo::FirstDegreeMPO;
use crate::tensor::{identity, Matrix};

pub fn zz() -> FirstDegreeMPO {
    FirstDegreeMPO::from_terms(2, vec![(z(), z())], None, None).unwrap()
}

pub fn field_x() -> FirstDegreeMPO {
    FirstDegreeMPO::from_terms(2, vec![], None, Some(x())).unwrap()
}

/// `sin(2πt)·ΣZZ + cos(2πt)·ΣX`.
pub fn driven_ising() -> TimeDependentHamiltonian {
    TimeDependentHamiltonian::new(vec![
        DrivenChannel {
            name: "zz".into(),
            hamiltonian: zz(),
            driving: DrivingFunction::Sin {
                amplitude: 1.0,
                frequency: 2.0 * PI,
                phase: 0.0,
            },
        },
        DrivenChannel {
            name: "x".into(),
            hamiltonian: field_x(),
            driving: DrivingFunction::Cos {
                amplitude: 1.0,
                frequency: 2.0 * PI,
                phase: 0.0,
            },
        },
    ])
    .unwrap()
}

/// Dense `U(t, t0)` from a fourth-order commutator-free exponential
/// integrator with `steps` substeps.
pub fn reference_propagator(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t: f64,
    n_sites: usize,
    steps: usize,
) -> Matrix {
    let dim = h.d().pow(n_sites as u32);
    let mut u = identity(dim);
    let dt = (t - t0) / steps as f64;
    let re = |v: f64| C64::new(v, 0.0);
    let c1 = 0.5 - 3f64.sqrt() / 6.0;
    let c2 = 0.5 + 3f64.sqrt() / 6.0;
    let a1 = re(0.25 + 3f64.sqrt() / 6.0);
    let a2 = re(0.25 - 3f64.sqrt() / 6.0);
    for k in 0..steps {
        let s = t0 + k as f64 * dt;
        let h1 = h.dense_at_with_cap(s + c1 * dt, n_sites, 1 << 10).unwrap();
        let h2 = h.dense_at_with_cap(s + c2 * dt, n_sites, 1 << 10).unwrap();
        let m = C64::new(0.0, -dt);
        let first = ((&h1 * a1 + &h2 * a2) * m).exp();
        let second = ((&h1 * a2 + &h2 * a1) * m).exp();
        u = second * first * u;
    }
    u
}

pub fn spectral_diff(a: &Matrix, b: &Matrix) -> f64 {
    crate::tensor::spectral_norm(&(a - b))
}
