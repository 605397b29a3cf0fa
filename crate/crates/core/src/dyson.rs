//! Dyson-series MPOs for time-dependent Hamiltonians.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::chain::dense_chain;
use crate::driving::TimeDependentHamiltonian;
use crate::error::{Error, Result};
use crate::extensive::{Expansion, ExtensiveMPO};
use crate::fdmpo::{FirstDegreeMPO, DENSE_CAP};
use crate::integrals::TimeOrderedIntegralTable;
use crate::level::{LevelLabel, Symbol};
use crate::power::PowerBuilder;
use crate::tensor::{identity, Matrix};

/// `H(t)` with one finishing level per channel; every edge into level `3ₐ`
/// carries `fₐ(t)`.
#[derive(Clone, Debug)]
pub struct RewiredHamiltonian {
    channels: Vec<FirstDegreeMPO>,
    weights: Vec<C64>,
}

impl RewiredHamiltonian {
    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// `(1)`, every channel's middle slots, then one `(3ₐ)` per channel.
    pub fn levels(&self) -> Vec<LevelLabel> {
        let mut out = vec![LevelLabel::identity()];
        for (channel, h) in self.channels.iter().enumerate() {
            for slot in 0..h.chi() {
                out.push(LevelLabel::new(vec![Symbol::Two { channel, slot }]));
            }
        }
        for channel in 0..self.channels.len() {
            out.push(LevelLabel::new(vec![Symbol::Three { channel }]));
        }
        out
    }

    /// Operator-valued site tensor over [`Self::levels`].
    pub fn site_grid(&self) -> Vec<Vec<Option<Matrix>>> {
        let levels = self.levels();
        let n = levels.len();
        let d = self.channels[0].d();
        let mut g = vec![vec![None; n]; n];
        g[0][0] = Some(identity(d));
        let n_two: usize = self.channels.iter().map(FirstDegreeMPO::chi).sum();
        let mut offset = 1;
        for (a, h) in self.channels.iter().enumerate() {
            let three = 1 + n_two + a;
            let f = self.weights[a];
            g[three][three] = Some(identity(d));
            g[0][three] = h.on_site().map(|m| m * f);
            for s in 0..h.chi() {
                g[0][offset + s] = h.l(s).cloned();
                g[offset + s][three] = h.r(s).map(|m| m * f);
                for t in 0..h.chi() {
                    g[offset + s][offset + t] = h.a(s, t).cloned();
                }
            }
            offset += h.chi();
        }
        g
    }

    /// Dense `H(t)`: the chain starts in level (1) and ends in any `(3ₐ)`.
    pub fn to_dense(&self, n_sites: usize) -> Result<Matrix> {
        let g = self.site_grid();
        let n = g.len();
        let d = self.channels[0].d();
        let entries: Vec<(usize, usize, &Matrix)> = g
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(j, op)| op.as_ref().map(|m| (i, j, m)))
            })
            .collect();
        let mut acc: Option<Matrix> = None;
        for a in 0..self.channels.len() {
            let m = dense_chain(
                entries.iter().copied(),
                n,
                d,
                n_sites,
                0,
                n - self.channels.len() + a,
                DENSE_CAP,
            )?;
            acc = Some(acc.map_or(m.clone(), |x| x + m));
        }
        Ok(acc.expect("at least one channel"))
    }
}

pub fn rewire(h: &TimeDependentHamiltonian, t: f64) -> RewiredHamiltonian {
    RewiredHamiltonian {
        channels: h.channel_mpos(),
        weights: h
            .channels()
            .iter()
            .map(|c| C64::new(c.driving.eval(t), 0.0))
            .collect(),
    }
}

fn check_table(
    h: &TimeDependentHamiltonian,
    order: usize,
    table: &TimeOrderedIntegralTable,
) -> Result<()> {
    if table.n_channels() != h.n_channels() {
        return Err(Error::DimensionMismatch(format!(
            "bracket table has {} channels, Hamiltonian has {}",
            table.n_channels(),
            h.n_channels()
        )));
    }
    if table.max_order() < order {
        return Err(Error::MissingBracket(vec![0; order]));
    }
    Ok(())
}

/// First-order Dyson MPO: `(1,1)` entry `𝟙 + Σₐ[fₐ]D⁽ᵃ⁾`, returns `[fₐ]R⁽ᵃ⁾`.
pub fn dyson_first_order(
    h: &TimeDependentHamiltonian,
    integrals: &Arc<TimeOrderedIntegralTable>,
) -> Result<ExtensiveMPO> {
    let (t0, t) = integrals.interval();
    dyson_mpo(h, t0, t, 1, integrals)
}

/// `N`-th order Dyson MPO. Levels are ONE-stripped labels of `H̃ᴺ`; each
/// finished class with channel subscripts `σ` is rerouted into (1) with `[f_σ]`.
pub fn dyson_mpo(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t: f64,
    order: usize,
    integrals: &Arc<TimeOrderedIntegralTable>,
) -> Result<ExtensiveMPO> {
    if order < 1 {
        return Err(Error::InvalidOrder(order));
    }
    let expansion = Expansion::Dyson {
        t0,
        t,
        table: Arc::clone(integrals),
    };
    if t == t0 {
        return Ok(ExtensiveMPO::identity(h.d(), order, expansion));
    }
    check_table(h, order, integrals)?;
    let channels = h.channel_mpos();
    let b = PowerBuilder::new(&channels, order)?;
    let levels = b.compact_levels();
    let coef = |s: &[usize]| integrals.get(s);
    let entries = b.compact_entries(&levels, None, &coef)?;
    ExtensiveMPO::new(h.d(), levels, entries, order, expansion)
}

/// Literal construction with one positional symbol per factor and the
/// per-level rerouting factor `[f_σ]·n₃!(N−n₃)!/N!`.
pub fn dyson_mpo_literal(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t: f64,
    order: usize,
    integrals: &Arc<TimeOrderedIntegralTable>,
) -> Result<ExtensiveMPO> {
    if order < 1 {
        return Err(Error::InvalidOrder(order));
    }
    check_table(h, order, integrals)?;
    let channels = h.channel_mpos();
    let b = PowerBuilder::new(&channels, order)?;
    let levels = b.positional_levels()?;
    let coef = |s: &[usize]| integrals.get(s);
    let entries = b.positional_entries(&levels, &coef)?;
    ExtensiveMPO::new(
        h.d(),
        levels,
        entries,
        order,
        Expansion::Dyson {
            t0,
            t,
            table: Arc::clone(integrals),
        },
    )
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;
    use std::f64::consts::PI;

    use super::*;
    use crate::driving::{DrivenChannel, DrivingFunction};
    use crate::fdmpo::pauli::{x, y, z};
    use crate::integrals::sequences;
    use crate::magnus::magnus_evolution;
    use crate::taylor::{taylor_first_order, taylor_mpo};
    use crate::tensor::kron;
    use crate::testutil::{driven_ising, field_x, reference_propagator, spectral_diff, zz};

    fn table(
        h: &TimeDependentHamiltonian,
        t0: f64,
        t: f64,
        order: usize,
    ) -> Arc<TimeOrderedIntegralTable> {
        Arc::new(
            TimeOrderedIntegralTable::from_hamiltonian(
                h,
                t0,
                t,
                order,
                crate::integrals::DEFAULT_BITS,
            )
            .unwrap(),
        )
    }

    fn constant_channel(m: FirstDegreeMPO) -> TimeDependentHamiltonian {
        TimeDependentHamiltonian::new(vec![DrivenChannel {
            name: "h".into(),
            hamiltonian: m,
            driving: DrivingFunction::Const { value: 1.0 },
        }])
        .unwrap()
    }

    #[test]
    fn rewired_structure() {
        let h = driven_ising();
        let r = rewire(&h, 0.3);
        let labels: Vec<String> = r.levels().iter().map(ToString::to_string).collect();
        assert_eq!(labels, ["(1)", "(2_1)", "(3_1)", "(3_2)"]);
        let g = r.site_grid();
        // ZZ channel: L into (2₁), R·f₁ into (3₁); field: D·f₂ into (3₂)
        let (f1, f2) = ((0.6 * PI).sin(), (0.6 * PI).cos());
        assert!((g[0][1].as_ref().unwrap() - z()).norm() < 1e-15);
        assert!((g[1][2].as_ref().unwrap() - z() * C64::new(f1, 0.0)).norm() < 1e-15);
        assert!((g[0][3].as_ref().unwrap() - x() * C64::new(f2, 0.0)).norm() < 1e-15);
        assert!(g[0][2].is_none() && g[1][3].is_none() && g[1][1].is_none());
        let expect = zz().to_dense(4).unwrap() * C64::new(f1, 0.0)
            + field_x().to_dense(4).unwrap() * C64::new(f2, 0.0);
        assert!((r.to_dense(4).unwrap() - expect).norm() < 1e-13);
    }

    #[test]
    fn single_constant_channel_is_taylor() {
        let h = constant_channel(fdmpo_add_tfi());
        let (t0, t) = (0.2, 0.3);
        let tab = table(&h, t0, t, 3);
        let tau = C64::new(0.0, -(t - t0));
        for n in 1..=3 {
            let dy = dyson_mpo(&h, t0, t, n, &tab).unwrap();
            let ta = taylor_mpo(&h.channels()[0].hamiltonian, tau, n).unwrap();
            assert_eq!(dy.levels(), ta.levels());
            assert!(dy.max_entry_difference(&ta).unwrap() < 1e-12, "order {n}");
            assert!((dy.to_dense(4).unwrap() - ta.to_dense(4).unwrap()).norm() < 1e-12);
        }
        let first = dyson_first_order(&h, &tab).unwrap();
        assert!(
            (first.to_dense(3).unwrap()
                - taylor_first_order(&h.channels()[0].hamiltonian, tau)
                    .unwrap()
                    .to_dense(3)
                    .unwrap())
            .norm()
                < 1e-12
        );
    }

    fn fdmpo_add_tfi() -> FirstDegreeMPO {
        crate::fdmpo::fdmpo_add(
            &zz(),
            &crate::fdmpo::fdmpo_scale(&field_x(), C64::new(0.7, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn zero_interval_is_identity() {
        let h = driven_ising();
        let tab = table(&h, 0.4, 0.4, 2);
        let m = dyson_mpo(&h, 0.4, 0.4, 2, &tab).unwrap();
        assert_eq!(m.bond_dimension(), 1);
        assert!((m.to_dense(3).unwrap() - identity(8)).norm() < 1e-15);
    }

    #[test]
    fn first_order_equals_first_order_magnus() {
        let h = driven_ising();
        let (t0, t) = (0.3, 0.35);
        let tab = table(&h, t0, t, 2);
        let dy = dyson_first_order(&h, &tab).unwrap();
        let ma = magnus_evolution(&h, t0, t, 1, 1, &tab).unwrap();
        assert_eq!(dy.bond_dimension(), 2);
        assert!((dy.to_dense(4).unwrap() - ma.to_dense(4).unwrap()).norm() < 1e-13);
        let (_, _) = (dy.entry(0, 0).unwrap(), dy.entry(1, 0).unwrap());
        let f1 = tab.get(&[0]).unwrap();
        assert!((dy.entry(1, 0).unwrap() - z() * f1).norm() < 1e-15);
    }

    #[test]
    fn missing_brackets_and_bad_order() {
        let h = driven_ising();
        let tab = table(&h, 0.0, 0.1, 1);
        assert!(matches!(
            dyson_mpo(&h, 0.0, 0.1, 2, &tab),
            Err(Error::MissingBracket(_))
        ));
        assert!(matches!(
            dyson_mpo(&h, 0.0, 0.1, 0, &tab),
            Err(Error::InvalidOrder(0))
        ));
    }

    #[test]
    fn overlapping_term_carries_ordered_bracket() {
        // LR channel then D channel: only [f₁f₂] is nonzero, so the dense
        // operator minus 𝟙 is the time-ordered product (L⊗R)·D summed over sites
        let (l, r, d) = (
            x() + y() * C64::new(0.0, 0.5),
            z() + x() * C64::new(0.3, 0.0),
            y() + z() * C64::new(2.0, 0.0),
        );
        let lr = FirstDegreeMPO::from_terms(2, vec![(l.clone(), r.clone())], None, None).unwrap();
        let dd = FirstDegreeMPO::from_terms(2, vec![], None, Some(d.clone())).unwrap();
        let h = TimeDependentHamiltonian::new(vec![
            DrivenChannel {
                name: "f".into(),
                hamiltonian: lr,
                driving: DrivingFunction::Const { value: 1.0 },
            },
            DrivenChannel {
                name: "g".into(),
                hamiltonian: dd,
                driving: DrivingFunction::Const { value: 1.0 },
            },
        ])
        .unwrap();
        let values: HashMap<Vec<usize>, C64> = sequences(2, 2)
            .into_iter()
            .map(|s| {
                let v = if s == [0, 1] {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                (s, v)
            })
            .collect();
        let tab = Arc::new(TimeOrderedIntegralTable::from_values(
            0.0, 1.0, 2, 2, values, 0.0,
        ));
        let dense = dyson_mpo(&h, 0.0, 1.0, 2, &tab)
            .unwrap()
            .to_dense(2)
            .unwrap();
        let id = identity(2);
        let expect = identity(4) + kron(&(&l * &d), &r) + kron(&l, &(&r * &d));
        assert!((dense - expect).norm() < 1e-14);
        let _ = id;
    }

    #[test]
    fn literal_and_compact_agree() {
        let h = driven_ising();
        let tab = table(&h, 0.3, 0.4, 3);
        for n in 1..=3 {
            let a = dyson_mpo(&h, 0.3, 0.4, n, &tab)
                .unwrap()
                .to_dense(4)
                .unwrap();
            let b = dyson_mpo_literal(&h, 0.3, 0.4, n, &tab)
                .unwrap()
                .to_dense(4)
                .unwrap();
            assert!((a - b).norm() < 1e-13, "order {n}");
        }
    }

    #[test]
    fn first_order_disjoint_part_is_half_product() {
        // two field sites acting at different positions: the N=1 MPO contains
        // D⊗D with coefficient [f][f] = 2·[ff]
        let h = driven_ising();
        let tab = table(&h, 0.3, 0.45, 2);
        let dense = dyson_mpo(&h, 0.3, 0.45, 1, &tab)
            .unwrap()
            .to_dense(2)
            .unwrap();
        let probe = kron(&x(), &x());
        let coef = (probe.adjoint() * &dense).trace() / C64::new(4.0, 0.0);
        let f2 = tab.get(&[1]).unwrap();
        assert!((coef - f2 * f2).norm() < 1e-12);
        assert!((coef - 2.0 * tab.get(&[1, 1]).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn error_ratio_under_halving() {
        let h = driven_ising();
        let t0 = 0.3;
        for n in 1..=3usize {
            let errs: Vec<f64> = [0.1, 0.05, 0.025]
                .iter()
                .map(|&dt| {
                    let tab = table(&h, t0, t0 + dt, n);
                    let m = dyson_mpo(&h, t0, t0 + dt, n, &tab)
                        .unwrap()
                        .to_dense(4)
                        .unwrap();
                    spectral_diff(&m, &reference_propagator(&h, t0, t0 + dt, 4, 64))
                })
                .collect();
            let target = 2f64.powi(n as i32 + 1);
            for w in errs.windows(2) {
                let ratio = w[0] / w[1];
                assert!(
                    (ratio / target - 1.0).abs() < 0.25,
                    "order {n}: ratio {ratio}, errors {errs:?}"
                );
            }
        }
    }
}
