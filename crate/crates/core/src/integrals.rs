//! Time-ordered integrals `[f_{a₁}…f_{aₖ}] = (−i)ᵏ ∫_{t>t₁>…>tₖ>t₀} f_{a₁}(t₁)…f_{aₖ}(tₖ)`.
//!
//! The first function carries the latest time.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::driving::{DrivingFunction, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::quantics::{cumulative_integral_mpo, pointwise_product, QuanticsTrain};

/// Default grid resolution in bits.
pub const DEFAULT_BITS: usize = 16;

/// Number of grids combined by Romberg extrapolation.
pub const ROMBERG_LEVELS: usize = 4;

/// Relative accuracy assumed for extrapolated quantics brackets at the
/// default resolution, with margin over the remaining Romberg error.
pub const QUANTICS_NOISE_FLOOR: f64 = 1e-10;

pub(crate) fn minus_i_pow(k: usize) -> C64 {
    [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ][k % 4]
}

/// Left-Riemann evaluation on the quantics grid: the innermost function is
/// integrated first, then each outer function multiplies the running
/// cumulative integral.
pub fn time_ordered_integral(fs: &[&QuanticsTrain]) -> Result<C64> {
    if fs.is_empty() {
        return Ok(C64::new(1.0, 0.0));
    }
    let g = nested_integrand(fs)?;
    Ok(close_integral(&g, fs.len()))
}

fn close_integral(g: &QuanticsTrain, k: usize) -> C64 {
    minus_i_pow(k) * g.sum() * g.spacing()
}

/// `g₁` with `gₖ = fₖ` and `gⱼ = fⱼ · cumint(gⱼ₊₁)`.
fn nested_integrand(fs: &[&QuanticsTrain]) -> Result<QuanticsTrain> {
    let k = fs.len();
    let mut g = fs[k - 1].clone();
    let cum = cumulative_integral_mpo(g.bits(), g.spacing());
    for j in (0..k - 1).rev() {
        g = pointwise_product(fs[j], &cum.apply(&g)?)?;
    }
    Ok(g)
}

/// Brackets for every channel sequence up to `max_order` over `[t0, t]`.
#[derive(Clone, Debug, Serialize)]
pub struct TimeOrderedIntegralTable {
    t0: f64,
    t: f64,
    max_order: usize,
    n_channels: usize,
    #[serde(skip)]
    values: HashMap<Vec<usize>, C64>,
    noise_floor: f64,
}

impl TimeOrderedIntegralTable {
    pub fn from_values(
        t0: f64,
        t: f64,
        max_order: usize,
        n_channels: usize,
        values: HashMap<Vec<usize>, C64>,
        noise_floor: f64,
    ) -> Self {
        Self {
            t0,
            t,
            max_order,
            n_channels,
            values,
            noise_floor,
        }
    }

    /// Romberg extrapolation of left-Riemann brackets on grids of `bits`,
    /// `bits − 1`, … bits. The nested sums have an error expansion in powers
    /// of `2^{−R}`, so each level removes one power. All-constant
    /// Hamiltonians use the closed form instead.
    pub fn from_hamiltonian(
        h: &TimeDependentHamiltonian,
        t0: f64,
        t: f64,
        max_order: usize,
        bits: usize,
    ) -> Result<Self> {
        let constants: Option<Vec<f64>> = h
            .drivings()
            .iter()
            .map(|f| match f {
                DrivingFunction::Const { value } => Some(*value),
                _ => None,
            })
            .collect();
        if let Some(c) = constants {
            return Ok(Self::constant(&c, t0, t, max_order));
        }
        let levels = ROMBERG_LEVELS.min(bits);
        if levels < 2 || t == t0 {
            return Self::riemann(h, t0, t, max_order, bits);
        }
        // row[j]: estimate with j powers removed, finest grid first
        let mut row: Vec<Self> = (0..levels)
            .map(|l| Self::riemann(h, t0, t, max_order, bits - l))
            .collect::<Result<_>>()?;
        for j in 1..levels {
            let w = (1u64 << j) as f64;
            row = row
                .windows(2)
                .map(|p| {
                    let values = p[0]
                        .values
                        .iter()
                        .map(|(k, v)| (k.clone(), (w * v - p[1].values[k]) / (w - 1.0)))
                        .collect();
                    Self {
                        values,
                        ..p[0].clone()
                    }
                })
                .collect();
        }
        let best = row.remove(0);
        Ok(Self {
            noise_floor: QUANTICS_NOISE_FLOOR,
            ..best
        })
    }

    /// Plain left-Riemann brackets at a single resolution.
    pub fn riemann(
        h: &TimeDependentHamiltonian,
        t0: f64,
        t: f64,
        max_order: usize,
        bits: usize,
    ) -> Result<Self> {
        let n = h.n_channels();
        let mut values = HashMap::new();
        if t == t0 {
            for seq in sequences(n, max_order) {
                values.insert(seq, C64::new(0.0, 0.0));
            }
            return Ok(Self::from_values(t0, t, max_order, n, values, 0.0));
        }
        let qtts: Vec<QuanticsTrain> = h
            .channels()
            .iter()
            .map(|c| c.driving.qtt(t0, t, bits))
            .collect::<Result<_>>()?;
        let cum = cumulative_integral_mpo(bits, qtts[0].spacing());
        // integrand of every suffix, built from the previous order
        let mut layer: BTreeMap<Vec<usize>, QuanticsTrain> = BTreeMap::new();
        for a in 0..n {
            layer.insert(vec![a], qtts[a].clone());
        }
        for order in 1..=max_order {
            for (seq, g) in &layer {
                values.insert(seq.clone(), close_integral(g, order));
            }
            if order == max_order {
                break;
            }
            let mut next = BTreeMap::new();
            for (seq, g) in &layer {
                let integrated = cum.apply(g)?;
                for a in 0..n {
                    let mut key = vec![a];
                    key.extend_from_slice(seq);
                    next.insert(key, pointwise_product(&qtts[a], &integrated)?);
                }
            }
            layer = next;
        }
        // plain left-Riemann sums carry an O(2^{-R}) relative bias
        let noise = QUANTICS_NOISE_FLOOR.max(8.0 / (1u64 << bits) as f64);
        Ok(Self::from_values(t0, t, max_order, n, values, noise))
    }

    /// Brackets of `[t0, t]` for a Hamiltonian whose channels are all constant:
    /// `[c₁…cₖ] = c₁⋯cₖ(−i(t−t₀))ᵏ/k!`.
    pub fn constant(values_of_channels: &[f64], t0: f64, t: f64, max_order: usize) -> Self {
        let n = values_of_channels.len();
        let mut values = HashMap::new();
        for seq in sequences(n, max_order) {
            let k = seq.len();
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            let prod: f64 = seq.iter().map(|&a| values_of_channels[a]).product();
            values.insert(seq, minus_i_pow(k) * (t - t0).powi(k as i32) * prod / fact);
        }
        Self::from_values(t0, t, max_order, n, values, 0.0)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.t0, self.t)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn noise_floor(&self) -> f64 {
        self.noise_floor
    }

    pub fn get(&self, seq: &[usize]) -> Result<C64> {
        if seq.is_empty() {
            return Ok(C64::new(1.0, 0.0));
        }
        self.values
            .get(seq)
            .copied()
            .ok_or_else(|| Error::MissingBracket(seq.to_vec()))
    }

    /// CSV with one row per channel sequence: names joined by spaces, real
    /// part, imaginary part.
    pub fn write_csv<W: std::io::Write>(&self, names: &[String], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sequence", "real", "imag"])?;
        for (seq, v) in self.entries() {
            let label: Vec<&str> = seq
                .iter()
                .map(|&a| names.get(a).map_or("?", String::as_str))
                .collect();
            w.write_record([
                label.join(" "),
                format!("{:e}", v.re),
                format!("{:e}", v.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// All entries ordered by length, then lexicographically.
    pub fn entries(&self) -> Vec<(Vec<usize>, C64)> {
        let mut v: Vec<_> = self.values.iter().map(|(k, v)| (k.clone(), *v)).collect();
        v.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
        v
    }
}

/// Every channel sequence of length `1..=max_order`.
pub fn sequences(n_channels: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_order {
        layer = layer
            .iter()
            .flat_map(|s| {
                (0..n_channels).map(move |a| {
                    let mut t = s.clone();
                    t.push(a);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Nested adaptive Gauss–Kronrod evaluation of a bracket, for `k ≤ 4`.
pub fn quad_time_ordered_integral(
    fs: &[&dyn Fn(f64) -> f64],
    t0: f64,
    t: f64,
    abs_tol: f64,
) -> Result<C64> {
    const MAX_EVALS: usize = 50_000_000;
    if fs.len() > 4 {
        return Err(Error::Unsupported(format!(
            "quadrature nesting depth {} exceeds 4",
            fs.len()
        )));
    }
    let evals = Cell::new(0usize);
    let q = Quadrature {
        fs,
        t0,
        tol: abs_tol,
        evals: &evals,
        max_evals: MAX_EVALS,
    };
    let v = q.nested(0, t)?;
    Ok(minus_i_pow(fs.len()) * v)
}

struct Quadrature<'a> {
    fs: &'a [&'a dyn Fn(f64) -> f64],
    t0: f64,
    tol: f64,
    evals: &'a Cell<usize>,
    max_evals: usize,
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

impl Quadrature<'_> {
    /// `∫_{t0}^{s} f_j(u)·nested(j+1, u) du`, with `nested(k, ·) = 1`.
    fn nested(&self, j: usize, s: f64) -> Result<f64> {
        if j == self.fs.len() {
            return Ok(1.0);
        }
        let g = |u: f64| -> Result<f64> { Ok((self.fs[j])(u) * self.nested(j + 1, u)?) };
        self.adaptive(&g, self.t0, s, self.tol, 0)
    }

    fn gk15(&self, g: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<(f64, f64)> {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut kronrod = 0.0;
        let mut gauss = 0.0;
        for (i, &x) in GK_NODES.iter().enumerate() {
            let s = if x == 0.0 {
                g(c)?
            } else {
                g(c - h * x)? + g(c + h * x)?
            };
            kronrod += K_WEIGHTS[i] * s;
            if i % 2 == 1 {
                gauss += G_WEIGHTS[i / 2] * s;
            }
        }
        self.evals.set(self.evals.get() + 15);
        if self.evals.get() > self.max_evals {
            return Err(Error::QuadratureBudget {
                tol: self.tol,
                evals: self.evals.get(),
            });
        }
        Ok((kronrod * h, (kronrod - gauss) * h))
    }

    fn adaptive(
        &self,
        g: &dyn Fn(f64) -> Result<f64>,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (v, err) = self.gk15(g, a, b)?;
        // below this the Kronrod–Gauss difference is roundoff
        let tol = tol.max(50.0 * f64::EPSILON * v.abs());
        if err.abs() <= tol || depth > 40 {
            if err.abs() > tol {
                return Err(Error::QuadratureBudget {
                    tol: self.tol,
                    evals: self.evals.get(),
                });
            }
            return Ok(v);
        }
        let m = 0.5 * (a + b);
        Ok(self.adaptive(g, a, m, 0.5 * tol, depth + 1)?
            + self.adaptive(g, m, b, 0.5 * tol, depth + 1)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantics::{qtt_constant, qtt_trig_on, TrigKind};
    use std::f64::consts::PI;

    fn one(_: f64) -> f64 {
        1.0
    }

    #[test]
    fn constant_brackets_on_grid() {
        let q = qtt_constant(C64::new(1.0, 0.0), 0.0, 1.0, 20);
        let v1 = time_ordered_integral(&[&q]).unwrap();
        assert!((v1 - C64::new(0.0, -1.0)).norm() < 1e-14);
        let v2 = time_ordered_integral(&[&q, &q]).unwrap();
        // left-Riemann sum of the simplex: (1 − 2^{−R})/2
        assert!((v2 - C64::new(-0.5, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn quadrature_cases() {
        let v = quad_time_ordered_integral(&[&one], 0.0, 0.5, 1e-12).unwrap();
        assert!((v - C64::new(0.0, -0.5)).norm() < 1e-14);
        for k in 1..=4 {
            let fs: Vec<&dyn Fn(f64) -> f64> = vec![&one; k];
            let v = quad_time_ordered_integral(&fs, 0.0, 1.0, 1e-12).unwrap();
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((v - minus_i_pow(k) / fact).norm() < 1e-12);
        }
        let s = |t: f64| (2.0 * PI * t).sin();
        let a = quad_time_ordered_integral(&[&s, &s], 0.0, 1.0, 1e-8).unwrap();
        let b = quad_time_ordered_integral(&[&s, &s], 0.0, 1.0, 1e-10).unwrap();
        assert!((a - b).norm() < 1e-8);
        let o: &dyn Fn(f64) -> f64 = &one;
        assert!(quad_time_ordered_integral(&[o; 5], 0.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn quantics_matches_quadrature() {
        let (t0, t1) = (0.1, 0.35);
        let r = 20;
        let qs = qtt_trig_on(TrigKind::Sin, 1.0, 2.0 * PI, 0.0, t0, t1, r);
        let qc = qtt_trig_on(TrigKind::Cos, 1.0, 2.0 * PI, 0.0, t0, t1, r);
        let s = |t: f64| (2.0 * PI * t).sin();
        let c = |t: f64| (2.0 * PI * t).cos();
        let grid = time_ordered_integral(&[&qs, &qc, &qs]).unwrap();
        let quad = quad_time_ordered_integral(&[&s, &c, &s], t0, t1, 1e-13).unwrap();
        let bound = 3.0 * qs.spacing() * (t1 - t0);
        assert!((grid - quad).norm() <= bound, "{grid} vs {quad}");
    }

    fn driven_table(t0: f64, t: f64, order: usize) -> TimeOrderedIntegralTable {
        driven_table_bits(t0, t, order, DEFAULT_BITS)
    }

    fn driven_table_bits(t0: f64, t: f64, order: usize, bits: usize) -> TimeOrderedIntegralTable {
        TimeOrderedIntegralTable::from_hamiltonian(
            &crate::testutil::driven_ising(),
            t0,
            t,
            order,
            bits,
        )
        .unwrap()
    }

    #[test]
    fn factoring_identities() {
        for (t0, t, bits) in [
            (0.0, 0.1, DEFAULT_BITS),
            (0.3, 0.55, DEFAULT_BITS),
            (0.7, 1.0, 24),
        ] {
            let tab = driven_table_bits(t0, t, 3, bits);
            let g = |s: &[usize]| tab.get(s).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert!((g(&[a]) * g(&[b]) - g(&[a, b]) - g(&[b, a])).norm() < 1e-8);
                    for c in 0..2 {
                        let lhs = g(&[a, b]) * g(&[c]);
                        let rhs = g(&[a, b, c]) + g(&[a, c, b]) + g(&[c, a, b]);
                        assert!((lhs - rhs).norm() < 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn table_matches_quadrature() {
        let (t0, t) = (0.3, 0.55);
        let tab = driven_table(t0, t, 3);
        let fs: [&dyn Fn(f64) -> f64; 2] = [&|t: f64| (2.0 * PI * t).sin(), &|t: f64| {
            (2.0 * PI * t).cos()
        }];
        for (seq, v) in tab.entries() {
            let f: Vec<&dyn Fn(f64) -> f64> = seq.iter().map(|&a| fs[a]).collect();
            let q = quad_time_ordered_integral(&f, t0, t, 1e-13).unwrap();
            assert!((v - q).norm() < 1e-8, "{seq:?}: {v} vs {q}");
        }
        let raw = TimeOrderedIntegralTable::riemann(&crate::testutil::driven_ising(), t0, t, 3, 16)
            .unwrap();
        for (seq, v) in raw.entries() {
            let f: Vec<&dyn Fn(f64) -> f64> = seq.iter().map(|&a| fs[a]).collect();
            let q = quad_time_ordered_integral(&f, t0, t, 1e-13).unwrap();
            // each nesting level contributes at most Δx·max|f|
            let bound = seq.len() as f64 * (t - t0) / 65536.0;
            assert!((v - q).norm() <= bound.max(1e-8));
        }
    }

    #[test]
    fn constant_closed_form() {
        let tab = TimeOrderedIntegralTable::constant(&[1.0, 2.0], 0.2, 0.7, 4);
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        for k in 1..=4 {
            let v = tab.get(&vec![0; k]).unwrap();
            assert!((v - C64::new(0.0, -0.5).powu(k as u32) / fact[k]).norm() < 1e-10);
        }
        assert_eq!(tab.get(&[]).unwrap(), C64::new(1.0, 0.0));
        assert!(matches!(
            tab.get(&[0, 0, 0, 0, 0]),
            Err(Error::MissingBracket(_))
        ));
    }

    #[test]
    fn sequences_enumeration() {
        let s = sequences(2, 3);
        assert_eq!(s.len(), 2 + 4 + 8);
        assert_eq!(s[0], vec![0]);
        assert_eq!(s[2], vec![0, 0]);
    }

    #[test]
    fn csv_lists_every_sequence() {
        let tab = TimeOrderedIntegralTable::constant(&[1.0, 2.0], 0.0, 0.5, 2);
        let mut buf = Vec::new();
        tab.write_csv(&["a".into(), "b".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sequence,real,imag");
        assert_eq!(lines.len(), 1 + 2 + 4);
        assert!(lines[1].starts_with("a,0e0,-5e-1"));
        assert!(lines.iter().any(|l| l.starts_with("b a,")));
    }
}
