//! Finite membership structures.
//!
//! A model is a universe `{0, .., size-1}`, a membership relation (pair
//! `(a, b)` means `a in b`), and an interpretation map for constants.
//! Extensionality is *not* an invariant: violating models are representable
//! and reported by [`crate::semantics::is_extensional`].

use serde::de::Error as _;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteModel {
    size: usize,
    /// Row-major adjacency: `mem[a * size + b]` iff `a in b`.
    mem: Vec<bool>,
    pub constants: BTreeMap<String, usize>,
}

impl FiniteModel {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "model universe must be non-empty");
        FiniteModel {
            size,
            mem: vec![false; size * size],
            constants: BTreeMap::new(),
        }
    }

    pub fn from_pairs(size: usize, pairs: &[(usize, usize)]) -> Self {
        let mut m = FiniteModel::new(size);
        for &(a, b) in pairs {
            m.insert(a, b);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.mem[a * self.size + b]
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        assert!(a < self.size && b < self.size, "pair index out of range");
        self.mem[a * self.size + b] = true;
    }

    /// Membership pairs in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.size {
            for b in 0..self.size {
                if self.contains(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// The extension of element `b`: all `a` with `a in b`.
    pub fn extension(&self, b: usize) -> Vec<usize> {
        (0..self.size).filter(|&a| self.contains(a, b)).collect()
    }

    pub fn constant(&self, name: &str) -> Option<usize> {
        self.constants.get(name).copied()
    }

    /// Encodes the relation as an integer with pair (0,0) most significant,
    /// so ascending integers are the lexicographic bitmap order used by the
    /// finder.
    pub fn bitmap(&self) -> u64 {
        let n2 = self.size * self.size;
        assert!(n2 <= 64);
        let mut v = 0u64;
        for (i, &b) in self.mem.iter().enumerate() {
            if b {
                v |= 1u64 << (n2 - 1 - i);
            }
        }
        v
    }

    /// Inverse of [`FiniteModel::bitmap`].
    pub fn from_bitmap(size: usize, bits: u64) -> Self {
        let n2 = size * size;
        assert!(n2 <= 64);
        let mut m = FiniteModel::new(size);
        for i in 0..n2 {
            if bits & (1u64 << (n2 - 1 - i)) != 0 {
                m.mem[i] = true;
            }
        }
        m
    }

    /// Applies a permutation of the universe: element `i` is renamed to
    /// `perm[i]`. Constants are remapped accordingly.
    pub fn permuted(&self, perm: &[usize]) -> FiniteModel {
        let mut m = FiniteModel::new(self.size);
        for a in 0..self.size {
            for b in 0..self.size {
                if self.contains(a, b) {
                    m.insert(perm[a], perm[b]);
                }
            }
        }
        for (name, &e) in &self.constants {
            m.constants.insert(name.clone(), perm[e]);
        }
        m
    }
}

impl fmt::Display for FiniteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "universe: 0..{}", self.size)?;
        for b in 0..self.size {
            let ext: Vec<String> = self.extension(b).iter().map(|e| e.to_string()).collect();
            writeln!(f, "  {b} = {{{}}}", ext.join(", "))?;
        }
        if !self.constants.is_empty() {
            let cs: Vec<String> = self
                .constants
                .iter()
                .map(|(k, v)| format!("{k} -> {v}"))
                .collect();
            writeln!(f, "  constants: {}", cs.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    size: usize,
    #[serde(rename = "in")]
    pairs: Vec<(usize, usize)>,
    names: BTreeMap<String, usize>,
}

impl Serialize for FiniteModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ModelJson {
            size: self.size,
            pairs: self.pairs(),
            names: self.constants.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = ModelJson::deserialize(d)?;
        if raw.size < 1 {
            return Err(D::Error::custom("model size must be at least 1"));
        }
        let mut m = FiniteModel::new(raw.size);
        for (a, b) in raw.pairs {
            if a >= raw.size || b >= raw.size {
                return Err(D::Error::custom(format!(
                    "membership pair ({a},{b}) out of range for size {}",
                    raw.size
                )));
            }
            m.insert(a, b);
        }
        for (name, e) in raw.names {
            if e >= raw.size {
                return Err(D::Error::custom(format!(
                    "constant {name} -> {e} out of range"
                )));
            }
            m.constants.insert(name, e);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip() {
        let mut m = FiniteModel::from_pairs(3, &[(0, 1), (2, 2)]);
        m.constants.insert("A".into(), 2);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"size":3,"in":[[0,1],[2,2]],"names":{"A":2}}"#);
        let back: FiniteModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn bitmap_order_puts_late_pairs_first() {
        // {} < {(1,1)} < ... < {(0,0)} for size 2.
        let empty = FiniteModel::new(2);
        let late = FiniteModel::from_pairs(2, &[(1, 1)]);
        let early = FiniteModel::from_pairs(2, &[(0, 0)]);
        assert!(empty.bitmap() < late.bitmap());
        assert!(late.bitmap() < early.bitmap());
        assert_eq!(FiniteModel::from_bitmap(2, late.bitmap()), late);
    }
}
