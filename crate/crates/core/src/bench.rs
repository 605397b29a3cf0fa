//! Finite-chain error-scaling benchmark.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compression::{
    dyson_mpo_compressed, row_compress, taylor_mpo_compressed, CompressionReport,
    DEFAULT_COMPRESSION_TOL,
};
use crate::driving::{DrivingFunction, Periodicity, TimeDependentHamiltonian};
use crate::dyson::dyson_mpo;
use crate::error::{Error, Result};
use crate::exact::{exact_evolve, substeps_for};
use crate::extensive::ExtensiveMPO;
use crate::fdmpo::{fdmpo_add, fdmpo_scale, FirstDegreeMPO};
use crate::integrals::{TimeOrderedIntegralTable, DEFAULT_BITS};
use crate::magnus::magnus_evolution;
use crate::mps::{apply_mpo, trace_distance_dense, FiniteMPS};
use crate::taylor::taylor_mpo;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Taylor,
    Dyson,
    Magnus,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Taylor => "taylor",
            Method::Dyson => "dyson",
            Method::Magnus => "magnus",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "taylor" => Ok(Method::Taylor),
            "dyson" => Ok(Method::Dyson),
            "magnus" => Ok(Method::Magnus),
            other => Err(Error::Unsupported(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    /// `|0⟩^{⊗L}`.
    Zeros,
    /// Random MPS of the given bond dimension, drawn from the config seed.
    Random { bond: usize },
}

/// Parameters of one evolution run.
#[derive(Clone, Debug)]
pub struct EvolutionConfig {
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub order: usize,
    pub method: Method,
    pub n_sites: usize,
    pub d_max: usize,
    pub svd_tol: f64,
    pub qtt_bits: usize,
    /// Largest RK4 step of the reference integrator.
    pub oracle_step: f64,
    pub compress: bool,
    pub compression_tol: f64,
    pub initial: InitialState,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t_final: 1.0,
            dt: 0.125,
            order: 1,
            method: Method::Dyson,
            n_sites: 8,
            d_max: 16,
            svd_tol: 1e-14,
            qtt_bits: DEFAULT_BITS,
            oracle_step: 1e-4,
            compress: true,
            compression_tol: DEFAULT_COMPRESSION_TOL,
            initial: InitialState::Zeros,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    /// Number of steps; `dt` must divide the interval to within 1e-12.
    pub fn n_steps(&self) -> Result<usize> {
        let ratio = (self.t_final - self.t0) / self.dt;
        let n = ratio.round();
        if self.dt <= 0.0 || n < 1.0 || (ratio - n).abs() > 1e-12 * ratio.abs().max(1.0) {
            return Err(Error::Unsupported(format!(
                "dt = {} does not divide [{}, {}]",
                self.dt, self.t0, self.t_final
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub method: Method,
    pub order: usize,
    pub dt: f64,
    pub epsilon: f64,
    pub wall_time_per_step_s: f64,
    pub mpo_bond_dim: usize,
    pub mps_bond_dim: usize,
    pub seed: u64,
}

/// Final state and timings of one evolution.
#[derive(Clone, Debug)]
pub struct EvolutionRun {
    pub state: FiniteMPS,
    pub wall_time_per_step_s: f64,
    pub mpo_bond_dim: usize,
    pub discarded_weight: f64,
}

/// Bracket tables reused across steps whose intervals are congruent modulo
/// the driving period.
#[derive(Default)]
pub struct BracketCache {
    tables: HashMap<(i64, i64), Arc<TimeOrderedIntegralTable>>,
    hits: usize,
}

impl BracketCache {
    pub fn hits(&self) -> usize {
        self.hits
    }

    /// Table for `[t0, t0 + dt]`, or a cached one for a congruent interval.
    pub fn get(
        &mut self,
        h: &TimeDependentHamiltonian,
        t0: f64,
        dt: f64,
        max_order: usize,
        bits: usize,
    ) -> Result<Arc<TimeOrderedIntegralTable>> {
        let phase = match h.periodicity() {
            Periodicity::Constant => Some(0.0),
            Periodicity::Period(p) => Some(t0.rem_euclid(p)),
            Periodicity::Aperiodic => None,
        };
        let Some(phase) = phase else {
            return Ok(Arc::new(TimeOrderedIntegralTable::from_hamiltonian(
                h,
                t0,
                t0 + dt,
                max_order,
                bits,
            )?));
        };
        let key = ((phase * 1e12).round() as i64, (dt * 1e12).round() as i64);
        if let Some(t) = self.tables.get(&key) {
            if t.max_order() >= max_order {
                self.hits += 1;
                return Ok(Arc::clone(t));
            }
        }
        let table = Arc::new(TimeOrderedIntegralTable::from_hamiltonian(
            h,
            t0,
            t0 + dt,
            max_order,
            bits,
        )?);
        self.tables.insert(key, Arc::clone(&table));
        Ok(table)
    }
}

/// `Σₐ cₐ H⁽ᵃ⁾` for a model whose drivings are all constant.
pub fn static_hamiltonian(h: &TimeDependentHamiltonian) -> Result<FirstDegreeMPO> {
    let mut acc = FirstDegreeMPO::zero(h.d());
    for c in h.channels() {
        let DrivingFunction::Const { value } = c.driving else {
            return Err(Error::Unsupported(
                "the Taylor method needs constant driving functions".into(),
            ));
        };
        acc = fdmpo_add(&acc, &fdmpo_scale(&c.hamiltonian, C64::new(value, 0.0)))?;
    }
    Ok(acc)
}

/// Evolution operator over `[t0, t0 + dt]`, row-compressed at `compress`
/// when given.
pub fn step_mpo(
    h: &TimeDependentHamiltonian,
    method: Method,
    order: usize,
    t0: f64,
    dt: f64,
    table: &Arc<TimeOrderedIntegralTable>,
    compress: Option<f64>,
) -> Result<(ExtensiveMPO, Option<CompressionReport>)> {
    let split = |r: (ExtensiveMPO, CompressionReport)| (r.0, Some(r.1));
    match method {
        Method::Dyson => match compress {
            Some(tol) => dyson_mpo_compressed(h, t0, t0 + dt, order, table, tol).map(split),
            None => Ok((dyson_mpo(h, t0, t0 + dt, order, table)?, None)),
        },
        Method::Taylor => {
            let hs = static_hamiltonian(h)?;
            let tau = C64::new(0.0, -dt);
            match compress {
                Some(tol) => taylor_mpo_compressed(&hs, tau, order, tol).map(split),
                None => Ok((taylor_mpo(&hs, tau, order)?, None)),
            }
        }
        Method::Magnus => {
            let m = magnus_evolution(h, t0, t0 + dt, order.min(2), order, table)?;
            match compress {
                Some(tol) => row_compress(&m, order, tol).map(split),
                None => Ok((m, None)),
            }
        }
    }
}

pub fn initial_state(h: &TimeDependentHamiltonian, config: &EvolutionConfig) -> Result<FiniteMPS> {
    match config.initial {
        InitialState::Zeros => FiniteMPS::product_state(h.d(), &vec![0; config.n_sites]),
        InitialState::Random { bond } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            Ok(FiniteMPS::random(h.d(), config.n_sites, bond, &mut rng))
        }
    }
}

/// Steps the initial state from `t0` to `t_final`. Bracket tables are cached
/// within the run only, so the timing includes their cost.
pub fn evolve(h: &TimeDependentHamiltonian, config: &EvolutionConfig) -> Result<EvolutionRun> {
    let mut cache = BracketCache::default();
    let steps = config.n_steps()?;
    let mut state = initial_state(h, config)?;
    let mut discarded = 0.0;
    let mut bond = 1;
    let start = Instant::now();
    for k in 0..steps {
        let t = config.t0 + k as f64 * config.dt;
        let table = cache.get(h, t, config.dt, config.order, config.qtt_bits)?;
        let compress = config.compress.then_some(config.compression_tol);
        let (mpo, _) = step_mpo(
            h,
            config.method,
            config.order,
            t,
            config.dt,
            &table,
            compress,
        )?;
        bond = bond.max(mpo.bond_dimension());
        let out = apply_mpo(&mpo, &state, config.d_max, config.svd_tol)?;
        discarded += out.discarded_weight;
        state = out.state;
    }
    Ok(EvolutionRun {
        state,
        wall_time_per_step_s: start.elapsed().as_secs_f64() / steps as f64,
        mpo_bond_dim: bond,
        discarded_weight: discarded,
    })
}

/// Reference state from the RK4 integrator.
pub fn oracle_state(
    h: &TimeDependentHamiltonian,
    config: &EvolutionConfig,
) -> Result<DVector<C64>> {
    let psi0 = initial_state(h, config)?.to_dense()?;
    let substeps = substeps_for(config.t0, config.t_final, config.oracle_step);
    exact_evolve(
        h,
        &psi0,
        config.n_sites,
        config.t0,
        config.t_final,
        substeps,
    )
}

/// Sweeps every `(order, dt)` pair. With `self_reference`, errors are taken
/// against the highest-order, smallest-`dt` run instead of the integrator.
pub fn run_benchmark(
    h: &TimeDependentHamiltonian,
    base: &EvolutionConfig,
    orders: &[usize],
    dts: &[f64],
    self_reference: bool,
) -> Result<Vec<ErrorRecord>> {
    if orders.is_empty() || dts.is_empty() {
        return Err(Error::Unsupported(
            "benchmark needs at least one order and one dt".into(),
        ));
    }
    let max_order = *orders.iter().max().expect("non-empty");
    let mut runs: Vec<(usize, f64, EvolutionRun)> = Vec::new();
    let mut sorted_orders = orders.to_vec();
    sorted_orders.sort_unstable();
    sorted_orders.dedup();
    let mut sorted_dts = dts.to_vec();
    sorted_dts.sort_by(|a, b| b.total_cmp(a));
    sorted_dts.dedup();
    for &order in &sorted_orders {
        for &dt in &sorted_dts {
            let config = EvolutionConfig {
                order,
                dt,
                ..base.clone()
            };
            runs.push((order, dt, evolve(h, &config)?));
        }
    }
    let reference = if self_reference {
        let best_dt = sorted_dts.last().copied().expect("non-empty");
        let (_, _, run) = runs
            .iter()
            .find(|(o, dt, _)| *o == max_order && *dt == best_dt)
            .expect("reference run present");
        run.state.to_dense()?
    } else {
        oracle_state(h, base)?
    };
    runs.into_iter()
        .map(|(order, dt, run)| {
            Ok(ErrorRecord {
                method: base.method,
                order,
                dt,
                epsilon: trace_distance_dense(&run.state.to_dense()?, &reference),
                wall_time_per_step_s: run.wall_time_per_step_s,
                mpo_bond_dim: run.mpo_bond_dim,
                mps_bond_dim: run.state.max_bond(),
                seed: base.seed,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(records: &[ErrorRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `log ε` against `log dt` for one order, over
/// records with `dt_min ≤ dt ≤ dt_max` and `ε > floor`.
pub fn fit_slope(
    records: &[ErrorRecord],
    order: usize,
    dt_min: f64,
    dt_max: f64,
    floor: f64,
) -> Option<(f64, f64, usize)> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.order == order && r.dt >= dt_min && r.dt <= dt_max && r.epsilon > floor)
        .map(|r| (r.dt.ln(), r.epsilon.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx, pts.len()))
}

/// Total wall time to reach `target` error over `duration`, from the fit
/// `ε = C·dtᴺ` with the theoretical exponent and the mean per-step time.
pub fn runtime_at_target(
    records: &[ErrorRecord],
    order: usize,
    target: f64,
    duration: f64,
    floor: f64,
) -> Option<f64> {
    let pts: Vec<&ErrorRecord> = records
        .iter()
        .filter(|r| r.order == order && r.epsilon > floor)
        .collect();
    if pts.is_empty() {
        return None;
    }
    let n = order as f64;
    let log_c = pts
        .iter()
        .map(|r| r.epsilon.ln() - n * r.dt.ln())
        .sum::<f64>()
        / pts.len() as f64;
    let dt_star = ((target.ln() - log_c) / n).exp();
    let step_time = pts.iter().map(|r| r.wall_time_per_step_s).sum::<f64>() / pts.len() as f64;
    Some(duration / dt_star * step_time)
}
