//! Exact finite distributions as weighted atom tables.
//!
//! Atoms are canonical byte encodings and weights are nonnegative integers,
//! so equality of distributions and total variation distance are computed
//! exactly in integer arithmetic even when two tables use different totals.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DistError {
    #[error("table has no atoms with positive weight")]
    Empty,
    #[error("atom hex string {0:?} is malformed")]
    BadHex(String),
    #[error("weight product overflows u64")]
    WeightOverflow,
    #[error("tables describe different universes: {0:?} vs {1:?}")]
    ShapeMismatch(String, String),
}

/// A finite distribution: sorted unique atoms, positive integer weights.
/// `shape` names the atom universe so mismatched tables can be detected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistTable {
    shape: Option<String>,
    atoms: Vec<(Vec<u8>, u64)>,
    total: u128,
}

impl DistTable {
    /// Builds a table, merging duplicate atoms by summing their weights and
    /// dropping zero-weight entries.
    pub fn from_weighted<I>(shape: Option<&str>, entries: I) -> Result<Self, DistError>
    where
        I: IntoIterator<Item = (Vec<u8>, u64)>,
    {
        let mut merged: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for (atom, w) in entries {
            if w > 0 {
                *merged.entry(atom).or_insert(0) += w;
            }
        }
        if merged.is_empty() {
            return Err(DistError::Empty);
        }
        let total = merged.values().map(|&w| w as u128).sum();
        Ok(DistTable {
            shape: shape.map(str::to_owned),
            atoms: merged.into_iter().collect(),
            total,
        })
    }

    pub fn from_uniform<I>(shape: Option<&str>, atoms: I) -> Result<Self, DistError>
    where
        I: IntoIterator<Item = Vec<u8>>,
    {
        Self::from_weighted(shape, atoms.into_iter().map(|a| (a, 1)))
    }

    /// Convenience for numeric fixtures: atom k is the single byte k.
    pub fn from_weights(weights: &[u64]) -> Result<Self, DistError> {
        assert!(weights.len() <= 256);
        Self::from_weighted(
            None,
            weights.iter().enumerate().map(|(k, &w)| (vec![k as u8], w)),
        )
    }

    pub fn shape(&self) -> Option<&str> {
        self.shape.as_deref()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> {
        self.atoms.iter().map(|(a, w)| (a.as_slice(), *w))
    }

    pub fn weight_of(&self, atom: &[u8]) -> u64 {
        match self.atoms.binary_search_by(|(a, _)| a.as_slice().cmp(atom)) {
            Ok(k) => self.atoms[k].1,
            Err(_) => 0,
        }
    }

    pub fn prob(&self, atom: &[u8]) -> f64 {
        self.weight_of(atom) as f64 / self.total as f64
    }

    /// Exact TV numerator and denominator: TV = num / den with
    /// num = sum_x |p(x) T_q - q(x) T_p| and den = 2 T_p T_q.
    pub fn tv_exact(&self, other: &DistTable) -> (u128, u128) {
        let mut num: u128 = 0;
        let (mut i, mut j) = (0, 0);
        while i < self.atoms.len() || j < other.atoms.len() {
            let ord = match (self.atoms.get(i), other.atoms.get(j)) {
                (Some((a, _)), Some((b, _))) => a.cmp(b),
                (Some(_), None) => std::cmp::Ordering::Less,
                (None, Some(_)) => std::cmp::Ordering::Greater,
                (None, None) => unreachable!(),
            };
            let (w, v) = match ord {
                std::cmp::Ordering::Less => {
                    let w = self.atoms[i].1;
                    i += 1;
                    (w as u128, 0u128)
                }
                std::cmp::Ordering::Greater => {
                    let v = other.atoms[j].1;
                    j += 1;
                    (0u128, v as u128)
                }
                std::cmp::Ordering::Equal => {
                    let w = self.atoms[i].1;
                    let v = other.atoms[j].1;
                    i += 1;
                    j += 1;
                    (w as u128, v as u128)
                }
            };
            let lhs = w * other.total;
            let rhs = v * self.total;
            num += lhs.abs_diff(rhs);
        }
        (num, 2 * self.total * other.total)
    }

    pub fn tv(&self, other: &DistTable) -> f64 {
        let (num, den) = self.tv_exact(other);
        num as f64 / den as f64
    }

    /// Exact distribution equality (independent of the two totals).
    pub fn same_distribution(&self, other: &DistTable) -> bool {
        self.tv_exact(other).0 == 0
    }

    /// Pushes every atom through `f` and merges collisions.
    pub fn project<F: Fn(&[u8]) -> Vec<u8>>(&self, shape: Option<&str>, f: F) -> DistTable {
        DistTable::from_weighted(shape, self.atoms.iter().map(|(a, w)| (f(a), *w)))
            .expect("projection of a nonempty table is nonempty")
    }

    /// Keeps atoms satisfying `pred`; errors if nothing survives.
    pub fn restrict<F: Fn(&[u8]) -> bool>(&self, pred: F) -> Result<DistTable, DistError> {
        DistTable::from_weighted(
            self.shape(),
            self.atoms.iter().filter(|(a, _)| pred(a)).map(|(a, w)| (a.clone(), *w)),
        )
    }

    /// Independent product; atoms concatenate, weights multiply.
    pub fn product(&self, other: &DistTable, shape: Option<&str>) -> Result<DistTable, DistError> {
        let mut entries = Vec::with_capacity(self.len() * other.len());
        for (a, w) in self.iter() {
            for (b, v) in other.iter() {
                let mut atom = Vec::with_capacity(a.len() + b.len());
                atom.extend_from_slice(a);
                atom.extend_from_slice(b);
                entries.push((atom, w.checked_mul(v).ok_or(DistError::WeightOverflow)?));
            }
        }
        DistTable::from_weighted(shape, entries)
    }

    pub fn power(&self, t: usize, shape: Option<&str>) -> Result<DistTable, DistError> {
        assert!(t >= 1);
        let mut out = self.clone();
        for _ in 1..t {
            out = out.product(self, shape)?;
        }
        out.shape = shape.map(str::to_owned);
        Ok(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "shape": self.shape,
            "total": self.total.to_string(),
            "atoms": self
                .atoms
                .iter()
                .map(|(a, w)| serde_json::json!({ "atom": hex(a), "weight": w }))
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, DistError> {
        #[derive(Deserialize)]
        struct AtomRow {
            atom: String,
            weight: u64,
        }
        #[derive(Deserialize)]
        struct Raw {
            shape: Option<String>,
            atoms: Vec<AtomRow>,
        }
        let raw: Raw = serde_json::from_value(value.clone())
            .map_err(|e| DistError::BadHex(e.to_string()))?;
        let mut entries = Vec::with_capacity(raw.atoms.len());
        for row in raw.atoms {
            entries.push((unhex(&row.atom)?, row.weight));
        }
        Self::from_weighted(raw.shape.as_deref(), entries)
    }
}

/// Serializable summary row used by the command-line tools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSummary {
    pub shape: Option<String>,
    pub atoms: usize,
    pub total: String,
}

impl From<&DistTable> for TableSummary {
    fn from(t: &DistTable) -> Self {
        TableSummary {
            shape: t.shape().map(str::to_owned),
            atoms: t.len(),
            total: t.total().to_string(),
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn unhex(text: &str) -> Result<Vec<u8>, DistError> {
    if !text.len().is_multiple_of(2) {
        return Err(DistError::BadHex(text.to_owned()));
    }
    (0..text.len() / 2)
        .map(|k| {
            u8::from_str_radix(&text[2 * k..2 * k + 2], 16)
                .map_err(|_| DistError::BadHex(text.to_owned()))
        })
        .collect()
}
