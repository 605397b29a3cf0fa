//! Virtual-level labels of powers of a first-degree MPO.

use std::fmt;

use serde::Serialize;

/// State of one factor of a Hamiltonian power: not started, in progress on a
/// channel's middle slot, or finished on a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Symbol {
    One,
    Two { channel: usize, slot: usize },
    Three { channel: usize },
}

impl Symbol {
    pub fn channel(&self) -> Option<usize> {
        match *self {
            Symbol::One => None,
            Symbol::Two { channel, .. } | Symbol::Three { channel } => Some(channel),
        }
    }

    pub fn is_two(&self) -> bool {
        matches!(self, Symbol::Two { .. })
    }

    pub fn is_three(&self) -> bool {
        matches!(self, Symbol::Three { .. })
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Symbol::One => write!(f, "1"),
            Symbol::Two { channel, slot: 0 } => write!(f, "2_{}", channel + 1),
            Symbol::Two { channel, slot } => write!(f, "2_{}.{}", channel + 1, slot + 1),
            Symbol::Three { channel } => write!(f, "3_{}", channel + 1),
        }
    }
}

/// Ordered tuple of symbols, one per factor. The first symbol belongs to the
/// leftmost factor. The empty label and any all-ONE label denote level (1).
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LevelLabel(pub Vec<Symbol>);

impl LevelLabel {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Self(symbols)
    }

    /// Level (1) in compact form.
    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn strip_ones(&self) -> Self {
        Self(
            self.0
                .iter()
                .copied()
                .filter(|s| *s != Symbol::One)
                .collect(),
        )
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|s| *s == Symbol::One)
    }

    pub fn n2(&self) -> usize {
        self.0.iter().filter(|s| s.is_two()).count()
    }

    pub fn n3(&self) -> usize {
        self.0.iter().filter(|s| s.is_three()).count()
    }

    /// The in-progress symbols in order.
    pub fn opens(&self) -> Vec<Symbol> {
        self.0.iter().copied().filter(Symbol::is_two).collect()
    }

    /// Channel of every non-ONE symbol, in order.
    pub fn channels(&self) -> Vec<usize> {
        self.0.iter().filter_map(Symbol::channel).collect()
    }
}

impl fmt::Display for LevelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() && self.0.len() <= 1 {
            return write!(f, "(1)");
        }
        let parts: Vec<String> = self.0.iter().map(|s| s.to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

impl Serialize for LevelLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn two(channel: usize) -> Symbol {
        Symbol::Two { channel, slot: 0 }
    }

    fn three(channel: usize) -> Symbol {
        Symbol::Three { channel }
    }

    #[test]
    fn strip_ones_merges_positional_variants() {
        let a = LevelLabel::new(vec![Symbol::One, two(0), three(1)]);
        let b = LevelLabel::new(vec![two(0), Symbol::One, three(1)]);
        let c = LevelLabel::new(vec![two(0), three(1), Symbol::One]);
        let target = LevelLabel::new(vec![two(0), three(1)]);
        assert_eq!(a.strip_ones(), target);
        assert_eq!(b.strip_ones(), target);
        assert_eq!(c.strip_ones(), target);
        assert_ne!(a, b);
        let set: HashSet<_> = [a, b, c].iter().map(LevelLabel::strip_ones).collect();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn counters() {
        let l = LevelLabel::new(vec![two(0), Symbol::One, three(1), two(1), three(0)]);
        assert_eq!(l.n2(), 2);
        assert_eq!(l.n3(), 2);
        assert_eq!(l.len(), 5);
        assert_eq!(l.opens(), vec![two(0), two(1)]);
        assert_eq!(l.channels(), vec![0, 1, 1, 0]);
    }

    #[test]
    fn identity_forms() {
        assert!(LevelLabel::identity().is_identity());
        assert!(LevelLabel::new(vec![Symbol::One; 3]).is_identity());
        assert_eq!(
            LevelLabel::new(vec![Symbol::One; 3]).strip_ones(),
            LevelLabel::identity()
        );
        assert_eq!(LevelLabel::identity().to_string(), "(1)");
    }

    #[test]
    fn display() {
        let l = LevelLabel::new(vec![two(0), three(1), Symbol::One]);
        assert_eq!(l.to_string(), "(2_1 3_2 1)");
        let s = LevelLabel::new(vec![Symbol::Two {
            channel: 0,
            slot: 1,
        }]);
        assert_eq!(s.to_string(), "(2_1.2)");
    }
}
