//! Level structure of powers of (rewired) first-degree MPOs and the
//! rerouting of finished levels into level (1).
//!
//! Two constructions are provided. The positional one keeps one symbol per
//! factor, ONE included, exactly as the tensor power prescribes. The compact
//! one works directly with ONE-stripped labels, which is the positional result
//! after merging levels of equal history.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fdmpo::FirstDegreeMPO;
use crate::level::{LevelLabel, Symbol};
use crate::tensor::{identity, Matrix};

/// Upper bound on the number of positional levels.
pub const POSITIONAL_LEVEL_CAP: usize = 1 << 14;

pub(crate) struct PowerBuilder<'a> {
    channels: &'a [FirstDegreeMPO],
    order: usize,
    symbols: Vec<Symbol>,
    d: usize,
}

/// Coefficient of a completed channel sequence, with an optional key.
pub(crate) type CoefFn<'a> = dyn Fn(&[usize]) -> Result<C64> + 'a;

fn add_entry(map: &mut BTreeMap<(usize, usize), Matrix>, key: (usize, usize), op: Matrix) {
    match map.get_mut(&key) {
        Some(acc) => *acc += op,
        None => {
            map.insert(key, op);
        }
    }
}

impl<'a> PowerBuilder<'a> {
    pub(crate) fn new(channels: &'a [FirstDegreeMPO], order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::InvalidOrder(order));
        }
        let d = channels
            .first()
            .map(FirstDegreeMPO::d)
            .ok_or_else(|| Error::Model("no channels".into()))?;
        if let Some(bad) = channels.iter().find(|c| c.d() != d) {
            return Err(Error::PhysicalDimension {
                left: d,
                right: bad.d(),
            });
        }
        let mut symbols = Vec::new();
        for (channel, h) in channels.iter().enumerate() {
            for slot in 0..h.chi() {
                symbols.push(Symbol::Two { channel, slot });
            }
            symbols.push(Symbol::Three { channel });
        }
        Ok(Self {
            channels,
            order,
            symbols,
            d,
        })
    }

    pub(crate) fn d(&self) -> usize {
        self.d
    }

    /// Operator on the edge that starts a factor in state `y`.
    fn start_op(&self, y: Symbol) -> Option<&Matrix> {
        match y {
            Symbol::Two { channel, slot } => self.channels[channel].l(slot),
            Symbol::Three { channel } => self.channels[channel].on_site(),
            Symbol::One => None,
        }
    }

    /// Operator on the edge `x → y` of one factor; `Ok(None)` is the identity.
    fn advance_op(&self, x: Symbol, y: Symbol) -> std::result::Result<Option<&Matrix>, ()> {
        match (x, y) {
            (
                Symbol::Two {
                    channel: a,
                    slot: s,
                },
                Symbol::Two {
                    channel: b,
                    slot: t,
                },
            ) if a == b => self.channels[a].a(s, t).map(Some).ok_or(()),
            (
                Symbol::Two {
                    channel: a,
                    slot: s,
                },
                Symbol::Three { channel: b },
            ) if a == b => self.channels[a].r(s).map(Some).ok_or(()),
            (Symbol::Three { channel: a }, Symbol::Three { channel: b }) if a == b => Ok(None),
            _ => Err(()),
        }
    }

    /// Level (1) followed by every symbol sequence of length `1..=N` that
    /// contains an in-progress symbol.
    pub(crate) fn compact_levels(&self) -> Vec<LevelLabel> {
        let mut out = vec![LevelLabel::identity()];
        let mut layer: Vec<Vec<Symbol>> = vec![vec![]];
        for _ in 0..self.order {
            let mut next = Vec::with_capacity(layer.len() * self.symbols.len());
            for g in &layer {
                for &s in &self.symbols {
                    let mut h = g.clone();
                    h.push(s);
                    next.push(h);
                }
            }
            out.extend(
                next.iter()
                    .filter(|h| h.iter().any(Symbol::is_two))
                    .cloned()
                    .map(LevelLabel::new),
            );
            layer = next;
        }
        out
    }

    /// Sum over order-preserving embeddings of `g` into every reachable `h`.
    /// Embedded symbols advance, the others start fresh; operators multiply in
    /// position order with the first factor on the left.
    pub(crate) fn compact_transitions(&self, g: &LevelLabel) -> HashMap<Vec<Symbol>, Matrix> {
        let mut out: HashMap<Vec<Symbol>, Matrix> = HashMap::new();
        let mut h = Vec::with_capacity(self.order);
        self.walk(g.symbols(), 0, &mut h, identity(self.d), &mut out);
        out
    }

    fn walk(
        &self,
        g: &[Symbol],
        pos: usize,
        h: &mut Vec<Symbol>,
        op: Matrix,
        out: &mut HashMap<Vec<Symbol>, Matrix>,
    ) {
        if pos == g.len() && !h.is_empty() {
            match out.get_mut(h.as_slice()) {
                Some(acc) => *acc += &op,
                None => {
                    out.insert(h.clone(), op.clone());
                }
            }
        }
        if h.len() + g.len() - pos < self.order {
            for &y in &self.symbols {
                if let Some(m) = self.start_op(y) {
                    h.push(y);
                    self.walk(g, pos, h, &op * m, out);
                    h.pop();
                }
            }
        }
        if pos < g.len() {
            for &y in &self.symbols {
                if let Ok(m) = self.advance_op(g[pos], y) {
                    h.push(y);
                    let next = match m {
                        Some(m) => &op * m,
                        None => op.clone(),
                    };
                    self.walk(g, pos + 1, h, next, out);
                    h.pop();
                }
            }
        }
    }

    /// Compact MPO entries for the given rows (all rows when `None`).
    /// Finished targets are rerouted into level (1) with `coef`.
    pub(crate) fn compact_entries(
        &self,
        levels: &[LevelLabel],
        rows: Option<&[usize]>,
        coef: &CoefFn<'_>,
    ) -> Result<BTreeMap<(usize, usize), Matrix>> {
        let index: HashMap<&[Symbol], usize> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.symbols(), i))
            .collect();
        let all: Vec<usize> = (0..levels.len()).collect();
        let rows = rows.unwrap_or(&all);
        let mut entries = BTreeMap::new();
        for &i in rows {
            let g = &levels[i];
            if g.is_empty() {
                add_entry(&mut entries, (i, 0), identity(self.d));
            }
            for (h, op) in self.compact_transitions(g) {
                if h.iter().any(Symbol::is_two) {
                    let j = index[h.as_slice()];
                    add_entry(&mut entries, (i, j), op);
                } else {
                    let chans: Vec<usize> = h.iter().filter_map(Symbol::channel).collect();
                    let c = coef(&chans)?;
                    if c != C64::new(0.0, 0.0) {
                        add_entry(&mut entries, (i, 0), op * c);
                    }
                }
            }
        }
        Ok(entries)
    }

    /// Compact entries grouped by the length of the rerouted sequence, for
    /// polynomial families. Power `k` collects sequences of length `k`.
    pub(crate) fn compact_entries_by_power(
        &self,
        levels: &[LevelLabel],
        weight: &dyn Fn(usize) -> C64,
    ) -> BTreeMap<(usize, usize), Vec<Matrix>> {
        let index: HashMap<&[Symbol], usize> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.symbols(), i))
            .collect();
        let mut entries: BTreeMap<(usize, usize), Vec<Matrix>> = BTreeMap::new();
        let zero = Matrix::zeros(self.d, self.d);
        let mut push = |key: (usize, usize), power: usize, op: Matrix| {
            let coefs = entries.entry(key).or_default();
            if coefs.len() <= power {
                coefs.resize(power + 1, zero.clone());
            }
            coefs[power] += op;
        };
        for (i, g) in levels.iter().enumerate() {
            if g.is_empty() {
                push((i, 0), 0, identity(self.d));
            }
            for (h, op) in self.compact_transitions(g) {
                if h.iter().any(Symbol::is_two) {
                    push((i, index[h.as_slice()]), 0, op);
                } else {
                    push((i, 0), h.len(), op * weight(h.len()));
                }
            }
        }
        entries
    }

    /// Level (1…1) followed by every `N`-tuple over ONE and the channel
    /// symbols that contains an in-progress symbol.
    pub(crate) fn positional_levels(&self) -> Result<Vec<LevelLabel>> {
        let alphabet: Vec<Symbol> = std::iter::once(Symbol::One)
            .chain(self.symbols.iter().copied())
            .collect();
        let total = alphabet
            .len()
            .checked_pow(self.order as u32)
            .unwrap_or(usize::MAX);
        if total > POSITIONAL_LEVEL_CAP {
            return Err(Error::Unsupported(format!(
                "{total} positional levels exceed the cap {POSITIONAL_LEVEL_CAP}"
            )));
        }
        let mut tuples: Vec<Vec<Symbol>> = vec![vec![]];
        for _ in 0..self.order {
            tuples = tuples
                .iter()
                .flat_map(|t| {
                    alphabet.iter().map(move |&s| {
                        let mut u = t.clone();
                        u.push(s);
                        u
                    })
                })
                .collect();
        }
        let mut out = vec![LevelLabel::new(vec![Symbol::One; self.order])];
        out.extend(
            tuples
                .into_iter()
                .filter(|t| t.iter().any(Symbol::is_two))
                .map(LevelLabel::new),
        );
        Ok(out)
    }

    /// Per-factor edge operator of the positional power, `Ok(None)` = identity.
    fn factor_op(&self, x: Symbol, y: Symbol) -> std::result::Result<Option<&Matrix>, ()> {
        match (x, y) {
            (Symbol::One, Symbol::One) => Ok(None),
            (Symbol::One, y) => self.start_op(y).map(Some).ok_or(()),
            (x, y) => self.advance_op(x, y),
        }
    }

    /// Literal construction: the `N`-fold tensor power of the site tensor,
    /// then every finished level `l` is added into column (1) with
    /// `coef(σ)·n₃!(N−n₃)!/N!` and deleted.
    pub(crate) fn positional_entries(
        &self,
        levels: &[LevelLabel],
        coef: &CoefFn<'_>,
    ) -> Result<BTreeMap<(usize, usize), Matrix>> {
        let index: HashMap<&[Symbol], usize> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.symbols(), i))
            .collect();
        let alphabet: Vec<Symbol> = std::iter::once(Symbol::One)
            .chain(self.symbols.iter().copied())
            .collect();
        let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        let n = self.order;
        let mut entries = BTreeMap::new();
        for (i, g) in levels.iter().enumerate() {
            let mut partial: Vec<(Vec<Symbol>, Matrix)> = vec![(vec![], identity(self.d))];
            for &x in g.symbols() {
                let mut next = Vec::new();
                for (h, op) in &partial {
                    for &y in &alphabet {
                        if let Ok(m) = self.factor_op(x, y) {
                            let mut h2 = h.clone();
                            h2.push(y);
                            next.push((h2, m.map_or_else(|| op.clone(), |m| op * m)));
                        }
                    }
                }
                partial = next;
            }
            for (h, op) in partial {
                if h.iter().any(Symbol::is_two) {
                    add_entry(&mut entries, (i, index[h.as_slice()]), op);
                } else if h.iter().all(|s| *s == Symbol::One) {
                    add_entry(&mut entries, (i, 0), op);
                } else {
                    let chans: Vec<usize> = h.iter().filter_map(Symbol::channel).collect();
                    let k = chans.len();
                    let c = coef(&chans)? * (fact(k) * fact(n - k) / fact(n));
                    add_entry(&mut entries, (i, 0), op * c);
                }
            }
        }
        Ok(entries)
    }
}
