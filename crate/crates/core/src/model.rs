//! TOML model files.
//!
//! ```toml
//! d = 2
//!
//! [[channel]]
//! name = "zz"
//! two_site = [{ left = "z", right = "z" }]
//! driving = { kind = "sin", frequency = 6.283185307179586 }
//!
//! [[channel]]
//! name = "x"
//! on_site = "x"
//! driving = { kind = "const", value = 0.8 }
//! ```
//!
//! Operators are Pauli names (`id`, `x`, `y`, `z`, for `d = 2`) or row-major
//! matrices whose entries are either real numbers or `[re, im]` pairs.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::driving::{DrivenChannel, DrivingFunction, TimeDependentHamiltonian};
use crate::error::{Error, Result};
use crate::fdmpo::{pauli, FirstDegreeMPO};
use crate::tensor::Matrix;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    fn value(&self) -> C64 {
        match *self {
            Scalar::Real(r) => C64::new(r, 0.0),
            Scalar::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Dense(Vec<Vec<Scalar>>),
}

impl OperatorSpec {
    pub fn to_matrix(&self, d: usize) -> Result<Matrix> {
        match self {
            OperatorSpec::Named(name) => {
                if d != 2 {
                    return Err(Error::Model(format!("named operator {name:?} needs d = 2")));
                }
                match name.to_ascii_lowercase().as_str() {
                    "id" | "i" | "identity" => Ok(pauli::id()),
                    "x" => Ok(pauli::x()),
                    "y" => Ok(pauli::y()),
                    "z" => Ok(pauli::z()),
                    other => Err(Error::Model(format!("unknown operator {other:?}"))),
                }
            }
            OperatorSpec::Dense(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Model(format!("operator matrix must be {d} x {d}")));
                }
                Ok(Matrix::from_fn(d, d, |i, j| rows[i][j].value()))
            }
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSiteSpec {
    pub left: OperatorSpec,
    pub right: OperatorSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    #[serde(default)]
    pub two_site: Vec<TwoSiteSpec>,
    /// `χ × χ` transfer operators between open terms; `"none"` leaves an entry empty.
    #[serde(default)]
    pub transfer: Option<Vec<Vec<OperatorSpec>>>,
    #[serde(default)]
    pub on_site: Option<OperatorSpec>,
    pub driving: DrivingFunction,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub d: usize,
    #[serde(rename = "channel")]
    pub channels: Vec<ChannelSpec>,
}

fn is_none(op: &OperatorSpec) -> bool {
    matches!(op, OperatorSpec::Named(n) if n.eq_ignore_ascii_case("none"))
}

impl ChannelSpec {
    fn build(&self, d: usize) -> Result<DrivenChannel> {
        let two_site = self
            .two_site
            .iter()
            .map(|t| Ok((t.left.to_matrix(d)?, t.right.to_matrix(d)?)))
            .collect::<Result<Vec<_>>>()?;
        let chi = two_site.len();
        let transfer = match &self.transfer {
            None => None,
            Some(rows) => {
                if rows.len() != chi || rows.iter().any(|r| r.len() != chi) {
                    return Err(Error::Model(format!(
                        "channel {:?}: transfer must be {chi} x {chi}",
                        self.name
                    )));
                }
                Some(
                    rows.iter()
                        .map(|r| {
                            r.iter()
                                .map(|op| {
                                    if is_none(op) {
                                        Ok(None)
                                    } else {
                                        op.to_matrix(d).map(Some)
                                    }
                                })
                                .collect()
                        })
                        .collect::<Result<Vec<Vec<_>>>>()?,
                )
            }
        };
        let on_site = self.on_site.as_ref().map(|o| o.to_matrix(d)).transpose()?;
        self.driving.validate()?;
        Ok(DrivenChannel {
            name: self.name.clone(),
            hamiltonian: FirstDegreeMPO::from_terms(d, two_site, transfer, on_site)?,
            driving: self.driving.clone(),
        })
    }
}

impl ModelSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn build(&self) -> Result<TimeDependentHamiltonian> {
        if self.d == 0 {
            return Err(Error::Model("d must be positive".into()));
        }
        if self.channels.is_empty() {
            return Err(Error::Model("at least one channel is required".into()));
        }
        TimeDependentHamiltonian::new(
            self.channels
                .iter()
                .map(|c| c.build(self.d))
                .collect::<Result<_>>()?,
        )
    }
}

pub fn parse_model(text: &str) -> Result<TimeDependentHamiltonian> {
    ModelSpec::from_toml(text)?.build()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TimeDependentHamiltonian> {
    parse_model(&std::fs::read_to_string(path)?)
}
