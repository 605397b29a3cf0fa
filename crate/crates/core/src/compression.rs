//! Exact column compression and order-preserving row compression of
//! extensive MPOs.
//!
//! Row compression works per group of levels with `n₂` open and `n₃`
//! finished symbols. Each level is described by the coefficients it will
//! collect from every way of finishing within the expansion order; levels
//! whose coefficient vectors are linear combinations of already kept ones
//! are folded into those.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::driving::TimeDependentHamiltonian;
use crate::error::{Error, Result};
use crate::extensive::{taylor_coefficient, Expansion, ExtensiveMPO};
use crate::fdmpo::FirstDegreeMPO;
use crate::integrals::TimeOrderedIntegralTable;
use crate::level::{LevelLabel, Symbol};
use crate::power::{CoefFn, PowerBuilder};
use crate::tensor::{
    qr_column_pivoted, qr_threshold_pivoted, solve_least_squares_tol, svd_truncate, Matrix,
    DEFAULT_RANK_TOL,
};

/// Largest scaled residual accepted when expanding a removed level.
pub const EXPANSION_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct RemovedLevel {
    pub level: LevelLabel,
    /// Coefficients over kept levels, as `(label, [re, im])`.
    pub expansion: Vec<(LevelLabel, [f64; 2])>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompressionReport {
    pub kind: String,
    pub bond_dimension_before: usize,
    pub bond_dimension_after: usize,
    pub qr_tolerance: f64,
    pub kept_levels: Vec<LevelLabel>,
    pub removed_levels: Vec<RemovedLevel>,
}

impl CompressionReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# report serialization failed: {e}\n"))
    }
}

/// Merges levels whose labels agree after removing ONE symbols. Rows of a
/// class are summed into its first member and the other columns dropped.
pub fn column_compress(mpo: &ExtensiveMPO) -> (ExtensiveMPO, CompressionReport) {
    let levels = mpo.levels();
    let mut class_of = Vec::with_capacity(levels.len());
    let mut reps: Vec<usize> = Vec::new();
    let mut by_label: HashMap<LevelLabel, usize> = HashMap::new();
    for (i, l) in levels.iter().enumerate() {
        let key = l.strip_ones();
        let c = *by_label.entry(key).or_insert_with(|| {
            reps.push(i);
            reps.len() - 1
        });
        class_of.push(c);
    }
    let mut entries: BTreeMap<(usize, usize), Matrix> = BTreeMap::new();
    for (&(i, j), op) in mpo.entries() {
        let cj = class_of[j];
        if reps[cj] != j {
            continue;
        }
        match entries.get_mut(&(class_of[i], cj)) {
            Some(acc) => *acc += op,
            None => {
                entries.insert((class_of[i], cj), op.clone());
            }
        }
    }
    let new_levels: Vec<LevelLabel> = reps.iter().map(|&r| levels[r].strip_ones()).collect();
    let removed_levels = levels
        .iter()
        .enumerate()
        .filter(|(i, _)| reps[class_of[*i]] != *i)
        .map(|(i, l)| RemovedLevel {
            level: l.clone(),
            expansion: vec![(new_levels[class_of[i]].clone(), [1.0, 0.0])],
        })
        .collect();
    let out = ExtensiveMPO::new(
        mpo.d(),
        new_levels.clone(),
        entries,
        mpo.order(),
        mpo.expansion().clone(),
    )
    .expect("merging preserves structure");
    let report = CompressionReport {
        kind: "column".into(),
        bond_dimension_before: levels.len(),
        bond_dimension_after: new_levels.len(),
        qr_tolerance: 0.0,
        kept_levels: new_levels,
        removed_levels,
    };
    (out, report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum WordSymbol {
    Open,
    New(usize),
}

/// Every interleaving of `n_open` opens with up to `budget` new channel starts.
fn words(n_open: usize, budget: usize, n_channels: usize) -> Vec<Vec<WordSymbol>> {
    fn rec(
        open_left: usize,
        new_left: usize,
        n_channels: usize,
        cur: &mut Vec<WordSymbol>,
        out: &mut Vec<Vec<WordSymbol>>,
    ) {
        if open_left == 0 && new_left == 0 {
            out.push(cur.clone());
            return;
        }
        if open_left > 0 {
            cur.push(WordSymbol::Open);
            rec(open_left - 1, new_left, n_channels, cur, out);
            cur.pop();
        }
        if new_left > 0 {
            for a in 0..n_channels {
                cur.push(WordSymbol::New(a));
                rec(open_left, new_left - 1, n_channels, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    for k in 0..=budget {
        rec(n_open, k, n_channels, &mut Vec::new(), &mut out);
    }
    out
}

/// Sum of completion coefficients over all shuffles of `g` with the new
/// starts of `word` whose order of opens and starts equals `word`.
fn shuffle_coefficient(g: &[Symbol], word: &[WordSymbol], coef: &CoefFn<'_>) -> Result<C64> {
    fn rec(
        g: &[Symbol],
        word: &[WordSymbol],
        i: usize,
        w: usize,
        seq: &mut Vec<usize>,
        coef: &CoefFn<'_>,
        acc: &mut C64,
    ) -> Result<()> {
        if i == g.len() && w == word.len() {
            *acc += coef(seq)?;
            return Ok(());
        }
        if i < g.len() {
            let ch = g[i].channel().expect("compact labels carry channels");
            match g[i] {
                Symbol::Three { .. } => {
                    seq.push(ch);
                    rec(g, word, i + 1, w, seq, coef, acc)?;
                    seq.pop();
                }
                _ => {
                    if w < word.len() && word[w] == WordSymbol::Open {
                        seq.push(ch);
                        rec(g, word, i + 1, w + 1, seq, coef, acc)?;
                        seq.pop();
                    }
                }
            }
        }
        if w < word.len() {
            if let WordSymbol::New(a) = word[w] {
                seq.push(a);
                rec(g, word, i, w + 1, seq, coef, acc)?;
                seq.pop();
            }
        }
        Ok(())
    }
    let mut acc = C64::new(0.0, 0.0);
    rec(g, word, 0, 0, &mut Vec::new(), coef, &mut acc)?;
    Ok(acc)
}

fn gamma(
    levels: &[LevelLabel],
    idx: &[usize],
    words: &[Vec<WordSymbol>],
    coef: &CoefFn<'_>,
) -> Result<Matrix> {
    let mut m = Matrix::zeros(words.len(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        for (r, w) in words.iter().enumerate() {
            m[(r, c)] = shuffle_coefficient(levels[i].symbols(), w, coef)?;
        }
    }
    Ok(m)
}

/// Kept levels and, for each removed level, its expansion over kept ones.
#[derive(Clone, Debug, Default)]
pub(crate) struct RowPlan {
    pub kept: Vec<usize>,
    pub removed: Vec<(usize, Vec<(usize, C64)>)>,
}

/// Decides which levels survive, from labels and coefficients alone.
pub(crate) fn plan_row_compression(
    levels: &[LevelLabel],
    order: usize,
    n_channels: usize,
    coef: &CoefFn<'_>,
    tol: f64,
) -> Result<RowPlan> {
    let mut alive = vec![true; levels.len()];
    let mut plan = RowPlan::default();
    for n2 in 1..=order {
        let mut kept: HashMap<Vec<Symbol>, Vec<usize>> = HashMap::new();
        for n3 in 0..=order - n2 {
            let budget = order - n2 - n3;
            let mut groups: BTreeMap<Vec<Symbol>, Vec<usize>> = BTreeMap::new();
            for (i, l) in levels.iter().enumerate() {
                if alive[i] && l.len() == n2 + n3 && l.n2() == n2 && l.n3() == n3 {
                    groups.entry(l.opens()).or_default().push(i);
                }
            }
            let ws = words(n2, budget, n_channels);
            for (opens, mut members) in groups {
                members.sort_by(|&a, &b| levels[a].cmp(&levels[b]));
                let old = kept.get(&opens).cloned().unwrap_or_default();
                let mut g = gamma(levels, &members, &ws, coef)?;
                let mut k = gamma(levels, &old, &ws, coef)?;
                // row equilibration over everything that shares these words
                let mut scale = vec![1.0; ws.len()];
                for (r, s) in scale.iter_mut().enumerate() {
                    let m = g
                        .row(r)
                        .iter()
                        .chain(k.row(r).iter())
                        .map(|x| x.norm())
                        .fold(0.0, f64::max);
                    if m > 0.0 {
                        *s = m;
                    }
                }
                for (r, &s) in scale.iter().enumerate() {
                    g.row_mut(r).unscale_mut(s);
                    k.row_mut(r).unscale_mut(s);
                }
                let residual = if old.is_empty() {
                    g.clone()
                } else {
                    let u = svd_truncate(&k, usize::MAX, tol).u;
                    &g - &u * (u.adjoint() * &g)
                };
                let reference = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
                let qr = qr_threshold_pivoted(&residual, tol, PIVOT_THRESHOLD);
                let lead = if qr.r.nrows() > 0 && qr.r.ncols() > 0 {
                    qr.r[(0, 0)].norm()
                } else {
                    0.0
                };
                let rank = if lead > tol * reference { qr.rank } else { 0 };
                let new_kept: Vec<usize> = qr.pivots[..rank].iter().map(|&p| members[p]).collect();
                let rest: Vec<usize> = qr.pivots[rank..].iter().map(|&p| members[p]).collect();
                let mut all_kept = old.clone();
                all_kept.extend(&new_kept);
                plan.kept.extend(&new_kept);
                if !rest.is_empty() {
                    let mut kf = gamma(levels, &all_kept, &ws, coef)?;
                    let mut rf = gamma(levels, &rest, &ws, coef)?;
                    for (r, &s) in scale.iter().enumerate() {
                        kf.row_mut(r).unscale_mut(s);
                        rf.row_mut(r).unscale_mut(s);
                    }
                    let basis = qr_column_pivoted(&kf, tol);
                    let chosen: Vec<usize> = basis.pivots[..basis.rank].to_vec();
                    let mut ks = Matrix::zeros(kf.nrows(), chosen.len());
                    for (c, &p) in chosen.iter().enumerate() {
                        ks.set_column(c, &kf.column(p));
                    }
                    let x = if chosen.is_empty() {
                        Matrix::zeros(0, rest.len())
                    } else {
                        solve_least_squares_tol(&ks, &rf, 0.0)?.x
                    };
                    let fit = if chosen.is_empty() {
                        rf.clone()
                    } else {
                        &ks * &x - &rf
                    };
                    let worst = fit.iter().map(|v| v.norm()).fold(0.0, f64::max);
                    if worst > EXPANSION_RESIDUAL_TOL.max(10.0 * tol) {
                        return Err(Error::Residual {
                            residual: worst,
                            tol: EXPANSION_RESIDUAL_TOL,
                        });
                    }
                    for (c, &r) in rest.iter().enumerate() {
                        alive[r] = false;
                        let expansion = chosen
                            .iter()
                            .enumerate()
                            .filter(|(row, _)| x[(*row, c)] != C64::new(0.0, 0.0))
                            .map(|(row, &p)| (all_kept[p], x[(row, c)]))
                            .collect();
                        plan.removed.push((r, expansion));
                    }
                }
                kept.insert(opens, all_kept);
            }
        }
    }
    plan.kept.push(0);
    plan.kept.sort_unstable();
    Ok(plan)
}

/// Folds removed columns into kept ones and drops removed levels. Rows not
/// in `entries` are treated as absent.
fn apply_row_plan(
    d: usize,
    levels: &[LevelLabel],
    entries: &BTreeMap<(usize, usize), Matrix>,
    plan: &RowPlan,
) -> (Vec<LevelLabel>, BTreeMap<(usize, usize), Matrix>) {
    let mut new_index = vec![usize::MAX; levels.len()];
    for (n, &k) in plan.kept.iter().enumerate() {
        new_index[k] = n;
    }
    let folds: HashMap<usize, &Vec<(usize, C64)>> =
        plan.removed.iter().map(|(r, e)| (*r, e)).collect();
    let mut out: BTreeMap<(usize, usize), Matrix> = BTreeMap::new();
    let mut push = |key: (usize, usize), op: Matrix| match out.get_mut(&key) {
        Some(acc) => *acc += op,
        None => {
            out.insert(key, op);
        }
    };
    for (&(i, j), op) in entries {
        let ni = new_index[i];
        if ni == usize::MAX {
            continue;
        }
        if new_index[j] != usize::MAX {
            push((ni, new_index[j]), op.clone());
        } else if let Some(expansion) = folds.get(&j) {
            for &(k, x) in expansion.iter() {
                push((ni, new_index[k]), op * x);
            }
        }
    }
    let _ = d;
    (plan.kept.iter().map(|&k| levels[k].clone()).collect(), out)
}

fn report_from_plan(
    levels: &[LevelLabel],
    plan: &RowPlan,
    tol: f64,
    kind: &str,
) -> CompressionReport {
    CompressionReport {
        kind: kind.into(),
        bond_dimension_before: levels.len(),
        bond_dimension_after: plan.kept.len(),
        qr_tolerance: tol,
        kept_levels: plan.kept.iter().map(|&k| levels[k].clone()).collect(),
        removed_levels: plan
            .removed
            .iter()
            .map(|(r, e)| RemovedLevel {
                level: levels[*r].clone(),
                expansion: e
                    .iter()
                    .map(|&(k, x)| (levels[k].clone(), [x.re, x.im]))
                    .collect(),
            })
            .collect(),
    }
}

/// Approximate row compression, exact to order `N` in the expansion
/// parameter. The rank tolerance is raised to the coefficient noise floor.
pub fn row_compress(
    mpo: &ExtensiveMPO,
    order: usize,
    tol: f64,
) -> Result<(ExtensiveMPO, CompressionReport)> {
    let (mpo, _) = column_compress(mpo);
    let expansion = mpo.expansion().clone();
    let tol = tol.max(expansion.noise_floor());
    let coef = |s: &[usize]| expansion.coefficient(s);
    let plan = plan_row_compression(mpo.levels(), order, expansion.n_channels(), &coef, tol)?;
    let (levels, entries) = apply_row_plan(mpo.d(), mpo.levels(), mpo.entries(), &plan);
    let report = report_from_plan(mpo.levels(), &plan, tol, "row");
    Ok((
        ExtensiveMPO::new(mpo.d(), levels, entries, mpo.order(), expansion)?,
        report,
    ))
}

/// Row compression of a Taylor-type MPO.
pub fn compress_taylor(
    mpo: &ExtensiveMPO,
    order: usize,
    tol: f64,
) -> Result<(ExtensiveMPO, CompressionReport)> {
    match mpo.expansion() {
        Expansion::Taylor { .. } | Expansion::Magnus { .. } => row_compress(mpo, order, tol),
        Expansion::Dyson { .. } => Err(Error::Unsupported(
            "compress_taylor expects a Taylor expansion".into(),
        )),
    }
}

/// Compressed Taylor MPO built without materializing removed rows.
pub fn taylor_mpo_compressed(
    h: &FirstDegreeMPO,
    tau: C64,
    order: usize,
    tol: f64,
) -> Result<(ExtensiveMPO, CompressionReport)> {
    let channels = std::slice::from_ref(h);
    let coef = |s: &[usize]| Ok(taylor_coefficient(tau, s.len()));
    lazy_compressed(channels, order, 1, &coef, tol, Expansion::Taylor { tau })
}

/// Compressed Dyson MPO built without materializing removed rows.
pub fn dyson_mpo_compressed(
    h: &TimeDependentHamiltonian,
    t0: f64,
    t: f64,
    order: usize,
    integrals: &Arc<TimeOrderedIntegralTable>,
    tol: f64,
) -> Result<(ExtensiveMPO, CompressionReport)> {
    let expansion = Expansion::Dyson {
        t0,
        t,
        table: Arc::clone(integrals),
    };
    if t == t0 {
        let id = ExtensiveMPO::identity(h.d(), order, expansion);
        let report = report_from_plan(
            id.levels(),
            &RowPlan {
                kept: vec![0],
                removed: vec![],
            },
            tol,
            "row",
        );
        return Ok((id, report));
    }
    if integrals.max_order() < order || integrals.n_channels() != h.n_channels() {
        return Err(Error::MissingBracket(vec![0; order]));
    }
    let channels = h.channel_mpos();
    let coef = |s: &[usize]| integrals.get(s);
    let tol = tol.max(integrals.noise_floor());
    lazy_compressed(&channels, order, h.n_channels(), &coef, tol, expansion)
}

fn lazy_compressed(
    channels: &[FirstDegreeMPO],
    order: usize,
    n_channels: usize,
    coef: &CoefFn<'_>,
    tol: f64,
    expansion: Expansion,
) -> Result<(ExtensiveMPO, CompressionReport)> {
    let b = PowerBuilder::new(channels, order)?;
    let levels = b.compact_levels();
    let plan = plan_row_compression(&levels, order, n_channels, coef, tol)?;
    let entries = b.compact_entries(&levels, Some(&plan.kept), coef)?;
    let (kept_levels, kept_entries) = apply_row_plan(b.d(), &levels, &entries, &plan);
    let report = report_from_plan(&levels, &plan, tol, "row");
    Ok((
        ExtensiveMPO::new(b.d(), kept_levels, kept_entries, order, expansion)?,
        report,
    ))
}

/// Bond dimension of the compressed order-`N` Taylor MPO for `χ` middle
/// slots, from labels alone.
pub fn compressed_taylor_bond_dimension(chi: usize, order: usize, tol: f64) -> Result<usize> {
    let mut symbols = Vec::new();
    for slot in 0..chi {
        symbols.push(Symbol::Two { channel: 0, slot });
    }
    symbols.push(Symbol::Three { channel: 0 });
    let mut levels = vec![LevelLabel::identity()];
    let mut layer: Vec<Vec<Symbol>> = vec![vec![]];
    for _ in 0..order {
        layer = layer
            .iter()
            .flat_map(|g| {
                symbols.iter().map(move |&s| {
                    let mut h = g.clone();
                    h.push(s);
                    h
                })
            })
            .collect();
        levels.extend(
            layer
                .iter()
                .filter(|h| h.iter().any(Symbol::is_two))
                .cloned()
                .map(LevelLabel::new),
        );
    }
    let coef = |s: &[usize]| Ok(taylor_coefficient(C64::new(0.1, 0.0), s.len()));
    Ok(plan_row_compression(&levels, order, 1, &coef, tol)?
        .kept
        .len())
}

/// A level is kept in preference to a later-sorted one whenever its residual
/// norm is within this factor of the largest, so near-ties between mirror
/// labels resolve the same way at every time step.
pub const PIVOT_THRESHOLD: f64 = 0.1;

pub const DEFAULT_COMPRESSION_TOL: f64 = DEFAULT_RANK_TOL;
