//! First- and second-order Magnus operators and their Taylor exponentials.

use num_complex::Complex64 as C64;

use crate::driving::TimeDependentHamiltonian;
use crate::error::{Error, Result};
use crate::extensive::{Expansion, ExtensiveMPO};
use crate::fdmpo::{commutator, fdmpo_add, fdmpo_scale, FirstDegreeMPO};
use crate::integrals::TimeOrderedIntegralTable;
use crate::taylor::taylor_mpo;

/// `Ω₁ = Σₐ [fₐ] H⁽ᵃ⁾`.
pub fn magnus_omega1(
    h: &TimeDependentHamiltonian,
    integrals: &TimeOrderedIntegralTable,
) -> Result<FirstDegreeMPO> {
    let mut acc = FirstDegreeMPO::zero(h.d());
    for (a, c) in h.channels().iter().enumerate() {
        acc = fdmpo_add(&acc, &fdmpo_scale(&c.hamiltonian, integrals.get(&[a])?))?;
    }
    Ok(acc)
}

/// `Ω₂ = Σ_{a<b} αₐᵦ [H⁽ᵃ⁾, H⁽ᵇ⁾]` with `αₐᵦ = ½([fₐfᵦ] − [fᵦfₐ])`.
pub fn magnus_omega2(
    h: &TimeDependentHamiltonian,
    integrals: &TimeOrderedIntegralTable,
) -> Result<FirstDegreeMPO> {
    let mut acc = FirstDegreeMPO::zero(h.d());
    let ch = h.channels();
    for a in 0..ch.len() {
        for b in a + 1..ch.len() {
            let alpha = 0.5 * (integrals.get(&[a, b])? - integrals.get(&[b, a])?);
            let c = commutator(&ch[a].hamiltonian, &ch[b].hamiltonian)?;
            acc = fdmpo_add(&acc, &fdmpo_scale(&c, alpha))?;
        }
    }
    Ok(acc)
}

/// `exp(Ω₁ [+ Ω₂])` through the Taylor MPO at `τ = 1`.
pub fn magnus_evolution(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t: f64,
    magnus_order: usize,
    taylor_order: usize,
    integrals: &TimeOrderedIntegralTable,
) -> Result<ExtensiveMPO> {
    let omega = match magnus_order {
        1 => magnus_omega1(h, integrals)?,
        2 => fdmpo_add(&magnus_omega1(h, integrals)?, &magnus_omega2(h, integrals)?)?,
        n => {
            return Err(Error::Unsupported(format!(
                "Magnus order {n}; only 1 and 2 are available"
            )))
        }
    };
    let (d, levels, entries, order, _) =
        taylor_mpo(&omega, C64::new(1.0, 0.0), taylor_order)?.into_parts();
    ExtensiveMPO::new(
        d,
        levels,
        entries,
        order,
        Expansion::Magnus {
            t0,
            t,
            magnus_order,
        },
    )
}
