//! Extensive Taylor MPOs of `exp(τH)` for time-independent `H`.

use std::slice;

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::extensive::{taylor_coefficient, Expansion, ExtensiveMPO, PolynomialMPO};
use crate::fdmpo::FirstDegreeMPO;
use crate::power::PowerBuilder;

/// `[[𝟙+τD, L], [τR, A]]`.
pub fn taylor_first_order(h: &FirstDegreeMPO, tau: C64) -> Result<ExtensiveMPO> {
    taylor_mpo(h, tau, 1)
}

/// `N`-th order Taylor MPO. Levels are the ONE-stripped labels of `Hᴺ`;
/// each finished class is rerouted into level (1) with `τᵏ/k!`.
pub fn taylor_mpo(h: &FirstDegreeMPO, tau: C64, order: usize) -> Result<ExtensiveMPO> {
    let channels = slice::from_ref(h);
    let b = PowerBuilder::new(channels, order)?;
    let levels = b.compact_levels();
    let coef = |s: &[usize]| Ok(taylor_coefficient(tau, s.len()));
    let entries = b.compact_entries(&levels, None, &coef)?;
    ExtensiveMPO::new(b.d(), levels, entries, order, Expansion::Taylor { tau })
}

/// `N`-th order Taylor MPO with one positional symbol per factor and the
/// per-level rerouting factor `τ^{n₃}(N−n₃)!/N!`.
pub fn taylor_mpo_literal(h: &FirstDegreeMPO, tau: C64, order: usize) -> Result<ExtensiveMPO> {
    let channels = slice::from_ref(h);
    let b = PowerBuilder::new(channels, order)?;
    let levels = b.positional_levels()?;
    let coef = |s: &[usize]| Ok(taylor_coefficient(tau, s.len()));
    let entries = b.positional_entries(&levels, &coef)?;
    ExtensiveMPO::new(b.d(), levels, entries, order, Expansion::Taylor { tau })
}

/// The Taylor MPO as a polynomial family in `τ`.
pub fn taylor_polynomial(h: &FirstDegreeMPO, order: usize) -> Result<PolynomialMPO> {
    let channels = slice::from_ref(h);
    let b = PowerBuilder::new(channels, order)?;
    let levels = b.compact_levels();
    let weight = |k: usize| taylor_coefficient(C64::new(1.0, 0.0), k);
    let entries = b.compact_entries_by_power(&levels, &weight);
    Ok(PolynomialMPO::new(b.d(), levels, entries))
}
