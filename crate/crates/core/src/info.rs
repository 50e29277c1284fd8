//! Information measures over exact weight tables, plus the closed-form
//! bounds used to sanity-check them: Pinsker's inequality, the entropy
//! difference bound in terms of statistical distance, and the Fano-style
//! bound on conditional entropy given an error rate.
//!
//! Everything here takes probabilities as f64 but derives them from integer
//! weights wherever a caller has them, so the only float error is the final
//! log arithmetic.

use crate::dist::DistTable;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

fn xlog2x(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Shannon entropy in bits. Weights need not be normalized.
pub fn entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "entropy of an empty distribution");
    -weights.iter().map(|&w| xlog2x(w / total)).sum::<f64>()
}

/// Min-entropy in bits: -log2 of the largest probability.
pub fn min_entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    assert!(total > 0.0, "min-entropy of an empty distribution");
    let max = weights.iter().cloned().fold(0.0f64, f64::max);
    -(max / total).log2()
}

/// Binary entropy h(p) in bits.
pub fn binary_entropy(p: f64) -> f64 {
    assert!((0.0..=1.0).contains(&p), "p out of range: {p}");
    -xlog2x(p) - xlog2x(1.0 - p)
}

/// KL divergence D(P || Q) in bits over a common index set. Infinite when P
/// puts mass where Q does not.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "mismatched supports");
    let tp: f64 = p.iter().sum();
    let tq: f64 = q.iter().sum();
    assert!(tp > 0.0 && tq > 0.0);
    let mut out = 0.0;
    for (&wp, &wq) in p.iter().zip(q) {
        let pp = wp / tp;
        let qq = wq / tq;
        if pp > 0.0 {
            if qq <= 0.0 {
                return f64::INFINITY;
            }
            out += pp * (pp / qq).log2();
        }
    }
    out
}

/// Total variation distance between two aligned weight vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "mismatched supports");
    let tp: f64 = p.iter().sum();
    let tq: f64 = q.iter().sum();
    assert!(tp > 0.0 && tq > 0.0);
    0.5 * p.iter().zip(q).map(|(&a, &b)| (a / tp - b / tq).abs()).sum::<f64>()
}

/// Pinsker's bound: TV <= sqrt(KL / 2) with KL measured in nats.
/// Returns (tv, bound, holds).
pub fn pinsker_check(p: &[f64], q: &[f64]) -> (f64, f64, bool) {
    let tv = tv_distance(p, q);
    let kl_bits = kl_divergence(p, q);
    let bound = (kl_bits * std::f64::consts::LN_2 / 2.0).sqrt();
    (tv, bound, tv <= bound + 1e-12)
}

/// Bound on |H(P) - H(Q)| for distributions over M outcomes at statistical
/// distance eps: h(eps) + eps * log2(M - 1) while eps <= (M-1)/M, and the
/// trivial log2 M beyond that point. Continuous at the crossover.
pub fn ho_bound(m: usize, eps: f64) -> f64 {
    assert!(m >= 2, "need at least two outcomes");
    assert!((0.0..=1.0).contains(&eps), "eps out of range: {eps}");
    if eps == 0.0 {
        return 0.0;
    }
    let cutoff = (m - 1) as f64 / m as f64;
    if eps >= cutoff {
        return (m as f64).log2();
    }
    (binary_entropy(eps) + eps * ((m - 1) as f64).log2()).min((m as f64).log2())
}

/// Entropy difference bound: two distributions over M outcomes whose L1
/// distance is eps <= 1/2 have entropies within eps * log2(M / eps); zero
/// when eps = 0. The precondition is on the L1 distance, twice the
/// statistical distance; the bound is vacuously loose but false beyond it.
pub fn cover_bound(m: usize, eps: f64) -> f64 {
    assert!(m >= 1);
    assert!((0.0..=0.5).contains(&eps), "eps out of range: {eps}");
    if eps == 0.0 {
        return 0.0;
    }
    eps * (m as f64 / eps).log2()
}

// ---------------------------------------------------------------------------
// Joint tables

/// Exact joint distribution over named integer coordinates, with integer
/// weights. Supports marginal and conditional entropies, mutual information,
/// and exact factorization checks by integer cross-multiplication.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointTable {
    names: Vec<String>,
    rows: Vec<(Vec<u64>, u64)>,
    total: u128,
}

impl JointTable {
    pub fn from_rows(names: &[&str], rows: Vec<(Vec<u64>, u64)>) -> Self {
        assert!(!names.is_empty());
        let mut merged: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
        for (coords, w) in rows {
            assert_eq!(coords.len(), names.len(), "row arity mismatch");
            if w > 0 {
                *merged.entry(coords).or_insert(0) += w;
            }
        }
        assert!(!merged.is_empty(), "empty joint table");
        let total = merged.values().map(|&w| w as u128).sum();
        JointTable {
            names: names.iter().map(|s| s.to_string()).collect(),
            rows: merged.into_iter().collect(),
            total,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[u64], u64)> {
        self.rows.iter().map(|(c, w)| (c.as_slice(), *w))
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn col(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no column named {name}"))
    }

    fn grouped(&self, cols: &[usize]) -> BTreeMap<Vec<u64>, u128> {
        let mut out: BTreeMap<Vec<u64>, u128> = BTreeMap::new();
        for (coords, w) in &self.rows {
            let key: Vec<u64> = cols.iter().map(|&c| coords[c]).collect();
            *out.entry(key).or_insert(0) += *w as u128;
        }
        out
    }

    fn entropy_of_cols(&self, cols: &[usize]) -> f64 {
        let groups = self.grouped(cols);
        let total = self.total as f64;
        -groups.values().map(|&w| xlog2x(w as f64 / total)).sum::<f64>()
    }

    /// Joint entropy of the named columns.
    pub fn entropy_of(&self, names: &[&str]) -> f64 {
        let cols: Vec<usize> = names.iter().map(|n| self.col(n)).collect();
        self.entropy_of_cols(&cols)
    }

    /// H(targets | given) = H(targets, given) - H(given).
    pub fn cond_entropy(&self, targets: &[&str], given: &[&str]) -> f64 {
        if given.is_empty() {
            return self.entropy_of(targets);
        }
        let mut all: Vec<&str> = targets.to_vec();
        all.extend_from_slice(given);
        self.entropy_of(&all) - self.entropy_of(given)
    }

    /// I(xs ; ys) = H(xs) + H(ys) - H(xs, ys).
    pub fn mutual_information(&self, xs: &[&str], ys: &[&str]) -> f64 {
        let mut all: Vec<&str> = xs.to_vec();
        all.extend_from_slice(ys);
        self.entropy_of(xs) + self.entropy_of(ys) - self.entropy_of(&all)
    }

    /// I(xs ; ys | zs), by the chain rule over the conditioning set.
    pub fn cond_mutual_information(&self, xs: &[&str], ys: &[&str], zs: &[&str]) -> f64 {
        if zs.is_empty() {
            return self.mutual_information(xs, ys);
        }
        let mut xz: Vec<&str> = xs.to_vec();
        xz.extend_from_slice(zs);
        let mut yz: Vec<&str> = ys.to_vec();
        yz.extend_from_slice(zs);
        let mut all: Vec<&str> = xs.to_vec();
        all.extend_from_slice(ys);
        all.extend_from_slice(zs);
        self.entropy_of_cols(&xz.iter().map(|n| self.col(n)).collect::<Vec<_>>())
            + self.entropy_of_cols(&yz.iter().map(|n| self.col(n)).collect::<Vec<_>>())
            - self.entropy_of_cols(&all.iter().map(|n| self.col(n)).collect::<Vec<_>>())
            - self.entropy_of_cols(&zs.iter().map(|n| self.col(n)).collect::<Vec<_>>())
    }

    /// Restriction to rows satisfying the predicate. None if nothing matches.
    pub fn restrict(&self, pred: impl Fn(&[u64]) -> bool) -> Option<JointTable> {
        let rows: Vec<(Vec<u64>, u64)> =
            self.rows.iter().filter(|(c, _)| pred(c)).cloned().collect();
        if rows.is_empty() {
            return None;
        }
        let names: Vec<&str> = self.names.iter().map(|s| s.as_str()).collect();
        Some(JointTable::from_rows(&names, rows))
    }

    /// Exact independence check of two column groups: every cell of the
    /// product of observed supports must satisfy w(x,y) * W == w(x) * w(y)
    /// in integers. Cells off both marginal supports cannot fail.
    pub fn factorizes(&self, xs: &[&str], ys: &[&str]) -> bool {
        let xc: Vec<usize> = xs.iter().map(|n| self.col(n)).collect();
        let yc: Vec<usize> = ys.iter().map(|n| self.col(n)).collect();
        let wx = self.grouped(&xc);
        let wy = self.grouped(&yc);
        let mut all = xc.clone();
        all.extend_from_slice(&yc);
        let wxy = self.grouped(&all);
        for (x, &wxv) in &wx {
            for (y, &wyv) in &wy {
                let mut key = x.clone();
                key.extend_from_slice(y);
                let joint = wxy.get(&key).copied().unwrap_or(0);
                if joint * self.total != wxv * wyv {
                    return false;
                }
            }
        }
        true
    }

    /// Marginal of the named columns as a plain distribution table, with
    /// coordinates serialized big-endian so atom order matches value order.
    pub fn marginal_table(&self, names: &[&str]) -> DistTable {
        let cols: Vec<usize> = names.iter().map(|n| self.col(n)).collect();
        let entries: Vec<(Vec<u8>, u64)> = self
            .rows
            .iter()
            .map(|(coords, w)| {
                let mut atom = Vec::with_capacity(8 * cols.len());
                for &c in &cols {
                    atom.extend_from_slice(&coords[c].to_be_bytes());
                }
                (atom, *w)
            })
            .collect();
        DistTable::from_weighted(None, entries).expect("nonempty table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn frozen_scalar_values() {
        // Entropy of (5/8, 3/8).
        assert!((entropy(&[5.0, 3.0]) - 0.9544340029249649).abs() < TOL);
        assert!((entropy(&[1.0, 1.0, 1.0, 1.0]) - 2.0).abs() < TOL);
        // Min-entropy of (3/4, 1/4) is log2(4/3).
        assert!((min_entropy(&[3.0, 1.0]) - (4.0f64 / 3.0).log2()).abs() < TOL);
        // KL((3/4,1/4) || uniform) = 2 - h(1/4).
        let kl = kl_divergence(&[3.0, 1.0], &[1.0, 1.0]);
        assert!((kl - (1.0 - binary_entropy(0.25))).abs() < TOL);
        assert!((kl - 0.18872187554086717).abs() < TOL);
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.0, 1.0]), f64::INFINITY);
        assert!((binary_entropy(0.5) - 1.0).abs() < TOL);
        assert_eq!(binary_entropy(0.0), 0.0);
    }

    #[test]
    fn pinsker_on_a_known_pair() {
        // TV((3/4,1/4), uniform) = 1/4; bound = sqrt(KL_nats / 2) ~ 0.2557.
        let (tv, bound, ok) = pinsker_check(&[3.0, 1.0], &[1.0, 1.0]);
        assert!((tv - 0.25).abs() < TOL);
        let expected = (0.18872187554086717f64 * std::f64::consts::LN_2 / 2.0).sqrt();
        assert!((bound - expected).abs() < TOL);
        assert!(ok);
    }

    #[test]
    fn entropy_difference_bound_values() {
        // M = 4, eps = 0.1: h(0.1) + 0.1 * log2(3).
        let expected = binary_entropy(0.1) + 0.1 * 3.0f64.log2();
        assert!((ho_bound(4, 0.1) - expected).abs() < TOL);
        assert!((ho_bound(4, 0.1) - 0.6274918436613969).abs() < 1e-12);
        // At and beyond the crossover the bound is log2 M, continuously.
        let cutoff = 0.75;
        assert!((ho_bound(4, cutoff) - 2.0).abs() < 1e-9);
        assert!((ho_bound(4, 0.9) - 2.0).abs() < TOL);
        assert_eq!(ho_bound(4, 0.0), 0.0);
    }

    #[test]
    fn conditional_entropy_bound_values() {
        assert!((cover_bound(4, 0.5) - 1.5).abs() < TOL);
        assert!((cover_bound(16, 0.25) - 1.5).abs() < TOL);
        assert_eq!(cover_bound(7, 0.0), 0.0);
    }

    fn xor_triple() -> JointTable {
        // Z = X xor Y with X, Y fair and independent.
        let rows = vec![
            (vec![0, 0, 0], 1),
            (vec![0, 1, 1], 1),
            (vec![1, 0, 1], 1),
            (vec![1, 1, 0], 1),
        ];
        JointTable::from_rows(&["x", "y", "z"], rows)
    }

    #[test]
    fn joint_table_entropies() {
        let t = xor_triple();
        assert!((t.entropy_of(&["x"]) - 1.0).abs() < TOL);
        assert!((t.entropy_of(&["x", "y"]) - 2.0).abs() < TOL);
        assert!((t.entropy_of(&["x", "y", "z"]) - 2.0).abs() < TOL);
        assert!((t.cond_entropy(&["z"], &["x", "y"]) - 0.0).abs() < TOL);
        assert!((t.cond_entropy(&["z"], &["x"]) - 1.0).abs() < TOL);
        assert!(t.mutual_information(&["x"], &["z"]).abs() < TOL);
        // Conditioned on Y, X determines Z.
        assert!((t.cond_mutual_information(&["x"], &["z"], &["y"]) - 1.0).abs() < TOL);
    }

    #[test]
    fn factorization_is_exact() {
        let t = xor_triple();
        assert!(t.factorizes(&["x"], &["y"]));
        assert!(t.factorizes(&["x"], &["z"]));
        assert!(!t.factorizes(&["x", "y"], &["z"]));
        // A 1/3-biased pair that is genuinely independent must pass even
        // though its probabilities have no finite binary expansion.
        let biased = JointTable::from_rows(
            &["a", "b"],
            vec![(vec![0, 0], 2), (vec![0, 1], 4), (vec![1, 0], 1), (vec![1, 1], 2)],
        );
        assert!(biased.factorizes(&["a"], &["b"]));
        let dep = JointTable::from_rows(
            &["a", "b"],
            vec![(vec![0, 0], 2), (vec![0, 1], 4), (vec![1, 0], 1), (vec![1, 1], 3)],
        );
        assert!(!dep.factorizes(&["a"], &["b"]));
    }

    #[test]
    fn restrict_and_marginal() {
        let t = xor_triple();
        let even = t.restrict(|c| c[2] == 0).unwrap();
        assert_eq!(even.len(), 2);
        assert!((even.cond_entropy(&["y"], &["x"]) - 0.0).abs() < TOL);
        assert!(t.restrict(|c| c[0] == 9).is_none());
        let m = t.marginal_table(&["z"]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.total(), 4);
    }

    proptest! {
        #[test]
        fn chain_rule_holds(rows in proptest::collection::vec((0u64..3, 0u64..3, 1u64..5), 1..12)) {
            let rows: Vec<(Vec<u64>, u64)> =
                rows.into_iter().map(|(a, b, w)| (vec![a, b], w)).collect();
            let t = JointTable::from_rows(&["x", "y"], rows);
            let lhs = t.entropy_of(&["x", "y"]);
            let rhs = t.entropy_of(&["x"]) + t.cond_entropy(&["y"], &["x"]);
            prop_assert!((lhs - rhs).abs() < 1e-9);
            let mi = t.mutual_information(&["x"], &["y"]);
            prop_assert!(mi >= -1e-9);
            let alt = t.entropy_of(&["y"]) - t.cond_entropy(&["y"], &["x"]);
            prop_assert!((mi - alt).abs() < 1e-9);
        }

        #[test]
        fn zero_mutual_information_iff_factorizes(
            rows in proptest::collection::vec((0u64..2, 0u64..2, 1u64..8), 1..8)
        ) {
            let rows: Vec<(Vec<u64>, u64)> =
                rows.into_iter().map(|(a, b, w)| (vec![a, b], w)).collect();
            let t = JointTable::from_rows(&["x", "y"], rows);
            // Totals stay below 512 here, so a failed factorization forces a
            // TV gap of at least 1/(2*512^2) in some cell and Pinsker pushes
            // the mutual information above (2/ln 2)*TV^2, far over 1e-9.
            prop_assert!(t.total() <= 512);
            let mi = t.mutual_information(&["x"], &["y"]);
            prop_assert_eq!(mi.abs() < 1e-9, t.factorizes(&["x"], &["y"]));
        }

        #[test]
        fn pinsker_holds_generally(
            p in proptest::collection::vec(1u32..50, 2..6),
            q in proptest::collection::vec(1u32..50, 2..6),
        ) {
            let len = p.len().min(q.len());
            let p: Vec<f64> = p[..len].iter().map(|&w| w as f64).collect();
            let q: Vec<f64> = q[..len].iter().map(|&w| w as f64).collect();
            let (tv, bound, ok) = pinsker_check(&p, &q);
            prop_assert!(ok, "tv = {tv}, bound = {bound}");
        }

        #[test]
        fn entropy_bound_dominates_reality(
            p in proptest::collection::vec(1u32..20, 2..5),
            q in proptest::collection::vec(1u32..20, 2..5),
        ) {
            let len = p.len().min(q.len());
            let p: Vec<f64> = p[..len].iter().map(|&w| w as f64).collect();
            let q: Vec<f64> = q[..len].iter().map(|&w| w as f64).collect();
            let eps = tv_distance(&p, &q);
            let gap = (entropy(&p) - entropy(&q)).abs();
            prop_assert!(gap <= ho_bound(len, eps) + 1e-9);
        }
    }
}
