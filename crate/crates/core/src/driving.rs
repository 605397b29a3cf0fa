//! Driving functions and time-dependent Hamiltonians `H(t) = Σₐ fₐ(t) H⁽ᵃ⁾`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdmpo::{FirstDegreeMPO, DENSE_CAP};
use crate::quantics::{
    qtt_constant, qtt_exp_on, qtt_from_samples, qtt_trig_on, QuanticsTrain, TrigKind,
};
use crate::tensor::Matrix;

/// Bond cap and relative tolerance used when a function has to be sampled.
pub const SAMPLED_MAX_BOND: usize = 32;
pub const SAMPLED_TOL: f64 = 1e-13;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DrivingFunction {
    Const {
        value: f64,
    },
    Sin {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude·exp(rate·t)`.
    Exp {
        #[serde(default = "one")]
        amplitude: f64,
        rate: f64,
    },
    /// `Σₖ cₖ tᵏ`.
    Poly {
        coefficients: Vec<f64>,
    },
    /// Equally spaced samples over `[start, end]`, linearly interpolated.
    Samples {
        start: f64,
        end: f64,
        values: Vec<f64>,
    },
}

/// How a function repeats in time, used to reuse bracket tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Periodicity {
    Constant,
    Period(f64),
    Aperiodic,
}

impl DrivingFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DrivingFunction::Const { value } => *value,
            DrivingFunction::Sin {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
            DrivingFunction::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            DrivingFunction::Exp { amplitude, rate } => amplitude * (rate * t).exp(),
            DrivingFunction::Poly { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            DrivingFunction::Samples { start, end, values } => {
                let n = values.len();
                if n == 1 {
                    return values[0];
                }
                let s = ((t - start) / (end - start) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
                let k = (s.floor() as usize).min(n - 2);
                let w = s - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            DrivingFunction::Const { value } => value.is_finite(),
            DrivingFunction::Sin {
                amplitude,
                frequency,
                phase,
            }
            | DrivingFunction::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            DrivingFunction::Exp { amplitude, rate } => amplitude.is_finite() && rate.is_finite(),
            DrivingFunction::Poly { coefficients } => {
                !coefficients.is_empty() && coefficients.iter().all(|c| c.is_finite())
            }
            DrivingFunction::Samples { start, end, values } => {
                !values.is_empty() && end > start && values.iter().all(|v| v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("invalid driving function {self:?}")))
        }
    }

    pub fn periodicity(&self) -> Periodicity {
        match self {
            DrivingFunction::Const { .. } => Periodicity::Constant,
            DrivingFunction::Sin { frequency, .. } | DrivingFunction::Cos { frequency, .. }
                if *frequency != 0.0 =>
            {
                Periodicity::Period(2.0 * PI / frequency.abs())
            }
            DrivingFunction::Sin { .. } | DrivingFunction::Cos { .. } => Periodicity::Constant,
            DrivingFunction::Poly { coefficients } if coefficients.len() == 1 => {
                Periodicity::Constant
            }
            _ => Periodicity::Aperiodic,
        }
    }

    /// Quantics train over `[t0, t1)`: closed form where one exists,
    /// sampled and compressed otherwise.
    pub fn qtt(&self, t0: f64, t1: f64, bits: usize) -> Result<QuanticsTrain> {
        Ok(match self {
            DrivingFunction::Const { value } => qtt_constant(C64::new(*value, 0.0), t0, t1, bits),
            DrivingFunction::Sin {
                amplitude,
                frequency,
                phase,
            } => qtt_trig_on(TrigKind::Sin, *amplitude, *frequency, *phase, t0, t1, bits),
            DrivingFunction::Cos {
                amplitude,
                frequency,
                phase,
            } => qtt_trig_on(TrigKind::Cos, *amplitude, *frequency, *phase, t0, t1, bits),
            DrivingFunction::Exp { amplitude, rate } => {
                qtt_exp_on(C64::new(*rate, 0.0), t0, t1, bits).scale(C64::new(*amplitude, 0.0))
            }
            DrivingFunction::Poly { .. } | DrivingFunction::Samples { .. } => qtt_from_samples(
                |t| C64::new(self.eval(t), 0.0),
                t0,
                t1,
                bits,
                SAMPLED_MAX_BOND,
                SAMPLED_TOL,
            )?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct DrivenChannel {
    pub name: String,
    pub hamiltonian: FirstDegreeMPO,
    pub driving: DrivingFunction,
}

/// Channels in declaration order; this order fixes bracket keys and labels.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    d: usize,
    channels: Vec<DrivenChannel>,
}

impl TimeDependentHamiltonian {
    pub fn new(channels: Vec<DrivenChannel>) -> Result<Self> {
        let d = channels
            .first()
            .map(|c| c.hamiltonian.d())
            .ok_or_else(|| Error::Model("no channels".into()))?;
        for c in &channels {
            if c.hamiltonian.d() != d {
                return Err(Error::PhysicalDimension {
                    left: d,
                    right: c.hamiltonian.d(),
                });
            }
            c.driving.validate()?;
        }
        Ok(Self { d, channels })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn channels(&self) -> &[DrivenChannel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel_mpos(&self) -> Vec<FirstDegreeMPO> {
        self.channels
            .iter()
            .map(|c| c.hamiltonian.clone())
            .collect()
    }

    pub fn drivings(&self) -> Vec<DrivingFunction> {
        self.channels.iter().map(|c| c.driving.clone()).collect()
    }

    /// Common period of all channels, if one exists.
    pub fn periodicity(&self) -> Periodicity {
        let mut period: Option<f64> = None;
        for c in &self.channels {
            match c.driving.periodicity() {
                Periodicity::Constant => {}
                Periodicity::Aperiodic => return Periodicity::Aperiodic,
                Periodicity::Period(p) => match period {
                    None => period = Some(p),
                    Some(q) if ((p - q) / q).abs() < 1e-12 => {}
                    Some(_) => return Periodicity::Aperiodic,
                },
            }
        }
        period.map_or(Periodicity::Constant, Periodicity::Period)
    }

    /// `Σₐ fₐ(t)·dense(H⁽ᵃ⁾)`.
    pub fn dense_at(&self, t: f64, n_sites: usize) -> Result<Matrix> {
        self.dense_at_with_cap(t, n_sites, DENSE_CAP)
    }

    pub fn dense_at_with_cap(&self, t: f64, n_sites: usize, cap: usize) -> Result<Matrix> {
        let mut acc: Option<Matrix> = None;
        for c in &self.channels {
            let m =
                c.hamiltonian.to_dense_with_cap(n_sites, cap)? * C64::new(c.driving.eval(t), 0.0);
            acc = Some(match acc {
                Some(a) => a + m,
                None => m,
            });
        }
        Ok(acc.expect("at least one channel"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdmpo::pauli::{x, z};

    #[test]
    fn evaluations() {
        let s = DrivingFunction::Sin {
            amplitude: 2.0,
            frequency: 2.0 * PI,
            phase: 0.0,
        };
        assert!((s.eval(0.25) - 2.0).abs() < 1e-15);
        let p = DrivingFunction::Poly {
            coefficients: vec![1.0, 0.0, 3.0],
        };
        assert!((p.eval(2.0) - 13.0).abs() < 1e-15);
        let smp = DrivingFunction::Samples {
            start: 0.0,
            end: 1.0,
            values: vec![0.0, 1.0, 4.0],
        };
        assert!((smp.eval(0.75) - 2.5).abs() < 1e-15);
        assert!((smp.eval(1.0) - 4.0).abs() < 1e-15);
        let e = DrivingFunction::Exp {
            amplitude: 1.0,
            rate: -1.0,
        };
        assert!((e.eval(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn qtt_encodings_match_evaluation() {
        let fs = [
            DrivingFunction::Const { value: 0.3 },
            DrivingFunction::Sin {
                amplitude: 1.0,
                frequency: 2.0 * PI,
                phase: 0.1,
            },
            DrivingFunction::Cos {
                amplitude: 0.5,
                frequency: 3.0,
                phase: 0.0,
            },
            DrivingFunction::Exp {
                amplitude: 2.0,
                rate: 0.7,
            },
            DrivingFunction::Poly {
                coefficients: vec![0.5, -1.0, 0.25],
            },
        ];
        for f in &fs {
            let q = f.qtt(0.1, 0.6, 10).unwrap();
            for n in (0..1024).step_by(31) {
                let t = q.grid_point(n);
                assert!(
                    (q.evaluate(n) - C64::new(f.eval(t), 0.0)).norm() < 1e-12,
                    "{f:?}"
                );
            }
        }
    }

    #[test]
    fn periodicity() {
        let zz = FirstDegreeMPO::from_terms(2, vec![(z(), z())], None, None).unwrap();
        let fx = FirstDegreeMPO::from_terms(2, vec![], None, Some(x())).unwrap();
        let h = TimeDependentHamiltonian::new(vec![
            DrivenChannel {
                name: "zz".into(),
                hamiltonian: zz.clone(),
                driving: DrivingFunction::Sin {
                    amplitude: 1.0,
                    frequency: 2.0 * PI,
                    phase: 0.0,
                },
            },
            DrivenChannel {
                name: "x".into(),
                hamiltonian: fx,
                driving: DrivingFunction::Const { value: 1.0 },
            },
        ])
        .unwrap();
        assert_eq!(h.periodicity(), Periodicity::Period(1.0));
        let dense = h.dense_at(0.3, 3).unwrap();
        let expect = zz.to_dense(3).unwrap() * C64::new((0.6 * PI).sin(), 0.0)
            + h.channels()[1].hamiltonian.to_dense(3).unwrap();
        assert!((dense - expect).norm() < 1e-14);
    }
}
