//! Level-labelled MPOs without triangular termination, used for evolution
//! operators, and their polynomial-in-τ counterparts.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::chain::dense_chain;
use crate::error::{Error, Result};
use crate::integrals::TimeOrderedIntegralTable;
use crate::level::LevelLabel;
use crate::tensor::{identity, Matrix};

/// Default cap on the Hilbert-space dimension of dense expansions.
pub const EXTENSIVE_DENSE_CAP: usize = 1 << 10;

/// What the MPO expands and in which parameter.
#[derive(Clone, Debug)]
pub enum Expansion {
    /// Series of `exp(τH)` in `τ`.
    Taylor { tau: C64 },
    /// Time-ordered series over `[t0, t]` with its bracket table.
    Dyson {
        t0: f64,
        t: f64,
        table: Arc<TimeOrderedIntegralTable>,
    },
    /// `exp(Ω)` expanded with `τ = 1`.
    Magnus {
        t0: f64,
        t: f64,
        magnus_order: usize,
    },
}

impl Expansion {
    /// Coefficient attached to a completed channel sequence.
    pub fn coefficient(&self, channels: &[usize]) -> Result<C64> {
        match self {
            Expansion::Taylor { tau } => Ok(taylor_coefficient(*tau, channels.len())),
            Expansion::Magnus { .. } => Ok(taylor_coefficient(C64::new(1.0, 0.0), channels.len())),
            Expansion::Dyson { table, .. } => table.get(channels),
        }
    }

    pub fn n_channels(&self) -> usize {
        match self {
            Expansion::Dyson { table, .. } => table.n_channels(),
            _ => 1,
        }
    }

    /// Relative accuracy of the coefficients, zero when they are exact.
    pub fn noise_floor(&self) -> f64 {
        match self {
            Expansion::Dyson { table, .. } => table.noise_floor(),
            _ => 0.0,
        }
    }
}

pub(crate) fn taylor_coefficient(tau: C64, k: usize) -> C64 {
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    tau.powu(k as u32) / fact
}

#[derive(Serialize)]
struct ExpansionRecord {
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    magnus_order: Option<usize>,
}

#[derive(Serialize)]
struct EntryRecord {
    from: usize,
    to: usize,
    op: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize)]
struct MpoFile {
    d: usize,
    order: usize,
    bond_dimension: usize,
    levels: Vec<String>,
    expansion: ExpansionRecord,
    entry: Vec<EntryRecord>,
}

/// `(d, levels, entries, order, expansion)`.
pub(crate) type MpoParts = (
    usize,
    Vec<LevelLabel>,
    BTreeMap<(usize, usize), Matrix>,
    usize,
    Expansion,
);

#[derive(Clone, Debug)]
pub struct ExtensiveMPO {
    d: usize,
    levels: Vec<LevelLabel>,
    entries: BTreeMap<(usize, usize), Matrix>,
    order: usize,
    expansion: Expansion,
}

impl ExtensiveMPO {
    pub fn new(
        d: usize,
        levels: Vec<LevelLabel>,
        entries: BTreeMap<(usize, usize), Matrix>,
        order: usize,
        expansion: Expansion,
    ) -> Result<Self> {
        if levels.is_empty() || !levels[0].is_identity() {
            return Err(Error::DimensionMismatch("level (1) must come first".into()));
        }
        let n = levels.len();
        for (&(i, j), m) in &entries {
            if i >= n || j >= n {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside {n} levels"
                )));
            }
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) is not {d}x{d}"
                )));
            }
        }
        Ok(Self {
            d,
            levels,
            entries,
            order,
            expansion,
        })
    }

    /// The identity operator: a single level carrying `𝟙`.
    pub fn identity(d: usize, order: usize, expansion: Expansion) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), identity(d));
        Self {
            d,
            levels: vec![LevelLabel::identity()],
            entries,
            order,
            expansion,
        }
    }

    /// Structured-text dump: levels, expansion parameters and every nonzero
    /// entry as row-major `[re, im]` pairs.
    pub fn to_toml(&self) -> String {
        let file = MpoFile {
            d: self.d,
            order: self.order,
            expansion: match &self.expansion {
                Expansion::Taylor { tau } => ExpansionRecord {
                    kind: "taylor",
                    tau: Some([tau.re, tau.im]),
                    t0: None,
                    t: None,
                    magnus_order: None,
                },
                Expansion::Dyson { t0, t, .. } => ExpansionRecord {
                    kind: "dyson",
                    tau: None,
                    t0: Some(*t0),
                    t: Some(*t),
                    magnus_order: None,
                },
                Expansion::Magnus {
                    t0,
                    t,
                    magnus_order,
                } => ExpansionRecord {
                    kind: "magnus",
                    tau: None,
                    t0: Some(*t0),
                    t: Some(*t),
                    magnus_order: Some(*magnus_order),
                },
            },
            bond_dimension: self.bond_dimension(),
            levels: self.levels.iter().map(|l| l.to_string()).collect(),
            entry: self
                .entries
                .iter()
                .map(|(&(from, to), m)| EntryRecord {
                    from,
                    to,
                    op: (0..m.nrows())
                        .map(|i| {
                            (0..m.ncols())
                                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                                .collect()
                        })
                        .collect(),
                })
                .collect(),
        };
        toml::to_string(&file).unwrap_or_else(|e| format!("# MPO serialization failed: {e}\n"))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn expansion(&self) -> &Expansion {
        &self.expansion
    }

    pub fn levels(&self) -> &[LevelLabel] {
        &self.levels
    }

    pub fn bond_dimension(&self) -> usize {
        self.levels.len()
    }

    pub fn entries(&self) -> &BTreeMap<(usize, usize), Matrix> {
        &self.entries
    }

    pub fn entry(&self, from: usize, to: usize) -> Option<&Matrix> {
        self.entries.get(&(from, to))
    }

    pub fn level_index(&self, label: &LevelLabel) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }

    pub(crate) fn into_parts(self) -> MpoParts {
        (
            self.d,
            self.levels,
            self.entries,
            self.order,
            self.expansion,
        )
    }

    /// Dense matrix on an open chain with both boundaries on level (1).
    pub fn to_dense(&self, n_sites: usize) -> Result<Matrix> {
        self.to_dense_with_cap(n_sites, EXTENSIVE_DENSE_CAP)
    }

    pub fn to_dense_with_cap(&self, n_sites: usize, cap: usize) -> Result<Matrix> {
        let entries: Vec<(usize, usize, &Matrix)> =
            self.entries.iter().map(|(&(i, j), m)| (i, j, m)).collect();
        dense_chain(entries, self.levels.len(), self.d, n_sites, 0, 0, cap)
    }

    /// Largest entry-wise Frobenius difference to an MPO with the same levels.
    pub fn max_entry_difference(&self, other: &Self) -> Result<f64> {
        if self.levels != other.levels || self.d != other.d {
            return Err(Error::DimensionMismatch("level sets differ".into()));
        }
        let zero = Matrix::zeros(self.d, self.d);
        let keys: std::collections::BTreeSet<_> =
            self.entries.keys().chain(other.entries.keys()).collect();
        Ok(keys
            .into_iter()
            .map(|k| {
                (self.entries.get(k).unwrap_or(&zero) - other.entries.get(k).unwrap_or(&zero))
                    .norm()
            })
            .fold(0.0, f64::max))
    }
}

/// An MPO whose entries are polynomials in `τ`, stored by power.
#[derive(Clone, Debug)]
pub struct PolynomialMPO {
    d: usize,
    levels: Vec<LevelLabel>,
    entries: BTreeMap<(usize, usize), Vec<Matrix>>,
}

impl PolynomialMPO {
    pub(crate) fn new(
        d: usize,
        levels: Vec<LevelLabel>,
        entries: BTreeMap<(usize, usize), Vec<Matrix>>,
    ) -> Self {
        Self { d, levels, entries }
    }

    /// The τ-independent family `τ ↦ mpo`.
    pub fn constant(mpo: &ExtensiveMPO) -> Self {
        let entries = mpo
            .entries
            .iter()
            .map(|(&k, m)| (k, vec![m.clone()]))
            .collect();
        Self {
            d: mpo.d,
            levels: mpo.levels.clone(),
            entries,
        }
    }

    pub fn levels(&self) -> &[LevelLabel] {
        &self.levels
    }

    pub fn degree(&self) -> usize {
        self.entries
            .values()
            .map(|c| c.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    pub fn evaluate(&self, tau: C64, order: usize) -> ExtensiveMPO {
        let entries = self
            .entries
            .iter()
            .map(|(&k, coefs)| {
                let mut acc = Matrix::zeros(self.d, self.d);
                let mut p = C64::new(1.0, 0.0);
                for c in coefs {
                    acc += c * p;
                    p *= tau;
                }
                (k, acc)
            })
            .collect();
        ExtensiveMPO {
            d: self.d,
            levels: self.levels.clone(),
            entries,
            order,
            expansion: Expansion::Taylor { tau },
        }
    }

    /// `(1/p!)·dᵖ/dτᵖ` at `τ = 0` of the dense expansion on `n_sites`.
    ///
    /// Uses a block-Toeplitz site tensor with `p+1` copies of the levels:
    /// block `(i, j)` holds the coefficient of `τ^{j-i}`. The chain starts in
    /// block 0 and ends in block `p`.
    pub fn derivative_at_zero(&self, p: usize, n_sites: usize) -> Result<Matrix> {
        if p < 1 {
            return Err(Error::InvalidOrder(p));
        }
        let n = self.levels.len();
        let mut entries: Vec<(usize, usize, &Matrix)> = Vec::new();
        for (&(a, b), coefs) in &self.entries {
            for i in 0..=p {
                for (k, c) in coefs.iter().enumerate() {
                    if i + k <= p {
                        entries.push((i * n + a, (i + k) * n + b, c));
                    }
                }
            }
        }
        dense_chain(
            entries,
            (p + 1) * n,
            self.d,
            n_sites,
            0,
            p * n,
            EXTENSIVE_DENSE_CAP,
        )
    }
}

pub fn mpo_derivative_at_zero(family: &PolynomialMPO, p: usize, n_sites: usize) -> Result<Matrix> {
    family.derivative_at_zero(p, n_sites)
}
