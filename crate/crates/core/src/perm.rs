//! Permutations of `[n] = {0, .., n-1}` stored as explicit image vectors,
//! plus the pointer chase that drives every source in this crate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PermError {
    #[error("image vector {0:?} is not a bijection")]
    NotABijection(Vec<usize>),
    #[error("rank/unrank supports n <= 20, got {0}")]
    TooLargeForRank(usize),
    #[error("rank {rank} out of range for S_{n}")]
    RankOutOfRange { rank: u64, n: usize },
}

/// A permutation; `apply(i)` is the stored image of `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    image: Vec<usize>,
}

impl std::fmt::Debug for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Perm{:?}", self.image)
    }
}

impl Permutation {
    pub fn new(image: Vec<usize>) -> Result<Self, PermError> {
        let n = image.len();
        let mut seen = vec![false; n];
        for &v in &image {
            if v >= n || seen[v] {
                return Err(PermError::NotABijection(image));
            }
            seen[v] = true;
        }
        Ok(Permutation { image })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { image: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.image.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    pub fn invert(&self) -> Permutation {
        let mut inv = vec![0; self.image.len()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { image: inv }
    }

    /// Diagrammatic composition: `a.then(b)` maps `x` to `b(a(x))`.
    pub fn then(&self, b: &Permutation) -> Permutation {
        assert_eq!(self.n(), b.n(), "composing permutations of different sizes");
        Permutation { image: self.image.iter().map(|&v| b.apply(v)).collect() }
    }

    /// Lexicographic rank of the image vector (Lehmer code). n <= 20.
    pub fn rank(&self) -> Result<u64, PermError> {
        let n = self.n();
        if n > 20 {
            return Err(PermError::TooLargeForRank(n));
        }
        let mut rank: u64 = 0;
        for i in 0..n {
            let smaller = self.image[i + 1..].iter().filter(|&&v| v < self.image[i]).count();
            rank += smaller as u64 * factorial(n - 1 - i);
        }
        Ok(rank)
    }

    pub fn unrank(n: usize, rank: u64) -> Result<Permutation, PermError> {
        if n > 20 {
            return Err(PermError::TooLargeForRank(n));
        }
        if rank >= factorial(n) {
            return Err(PermError::RankOutOfRange { rank, n });
        }
        let mut pool: Vec<usize> = (0..n).collect();
        let mut rest = rank;
        let mut image = Vec::with_capacity(n);
        for i in 0..n {
            let f = factorial(n - 1 - i);
            let idx = (rest / f) as usize;
            rest %= f;
            image.push(pool.remove(idx));
        }
        Ok(Permutation { image })
    }
}

pub fn factorial(n: usize) -> u64 {
    assert!(n <= 20, "factorial overflows u64 beyond 20");
    (1..=n as u64).product()
}

/// Uniform draw via Fisher-Yates (rand's shuffle).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut image: Vec<usize> = (0..n).collect();
    image.shuffle(rng);
    Permutation { image }
}

/// All of S_n in lexicographic order of the image vector.
pub fn all_permutations(n: usize) -> impl Iterator<Item = Permutation> {
    (0..factorial(n)).map(move |k| Permutation::unrank(n, k).expect("rank in range"))
}

/// Applies `perms` in sequence order: `chase([p1, p2], i) = p2(p1(i))`.
/// An empty sequence is the identity.
pub fn chase(perms: &[&Permutation], i0: usize) -> usize {
    let mut i = i0;
    for p in perms {
        assert!(i < p.n(), "pointer {i} out of range for S_{}", p.n());
        i = p.apply(i);
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 2]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![]).is_ok());
    }

    #[test]
    fn chase_matches_hand_composition() {
        // n = 3, p1 = (1,2,0), p2 = (2,0,1): p1(0) = 1, p2(1) = 0.
        let p1 = Permutation::new(vec![1, 2, 0]).unwrap();
        let p2 = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(chase(&[&p1, &p2], 0), 0);
        assert_eq!(chase(&[], 2), 2);
    }

    #[test]
    fn inverse_round_trips() {
        let p = Permutation::new(vec![3, 0, 2, 1]).unwrap();
        let inv = p.invert();
        for i in 0..4 {
            assert_eq!(inv.apply(p.apply(i)), i);
            assert_eq!(p.apply(inv.apply(i)), i);
        }
        assert_eq!(p.invert().invert(), p);
    }

    #[test]
    fn rank_unrank_round_trip_lex_order() {
        assert_eq!(Permutation::identity(4).rank().unwrap(), 0);
        let mut previous: Option<Vec<usize>> = None;
        for k in 0..factorial(4) {
            let p = Permutation::unrank(4, k).unwrap();
            assert_eq!(p.rank().unwrap(), k);
            if let Some(prev) = previous {
                assert!(prev < p.image().to_vec(), "unrank not lexicographic");
            }
            previous = Some(p.image().to_vec());
        }
    }

    #[test]
    fn all_permutations_counts() {
        assert_eq!(all_permutations(1).count(), 1);
        assert_eq!(all_permutations(4).count(), 24);
    }

    #[test]
    fn uniform_draws_chi_square_n5() {
        // 1e5 draws over the 120 cells of S_5; exact-table chi-square.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000usize;
        let mut counts = vec![0u64; 120];
        for _ in 0..trials {
            let p = random_permutation(5, &mut rng);
            counts[p.rank().unwrap() as usize] += 1;
        }
        let expected = trials as f64 / 120.0;
        let p_value = crate::stats::chi_square_uniform_p(&counts, expected);
        assert!(p_value > 0.001, "chi-square p = {p_value}");
    }

    proptest! {
        #[test]
        fn chase_split_consistency(seed in 0u64.., split in 0usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1usize..6);
            let perms: Vec<Permutation> = (0..5).map(|_| random_permutation(n, &mut rng)).collect();
            let refs: Vec<&Permutation> = perms.iter().collect();
            let i0 = rng.gen_range(0..n);
            let mid = chase(&refs[..split.min(5)], i0);
            prop_assert_eq!(chase(&refs, i0), chase(&refs[split.min(5)..], mid));
        }

        #[test]
        fn compose_then_matches_pointwise(seed in 0u64..) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1usize..7);
            let a = random_permutation(n, &mut rng);
            let b = random_permutation(n, &mut rng);
            let c = a.then(&b);
            for i in 0..n {
                prop_assert_eq!(c.apply(i), b.apply(a.apply(i)));
            }
        }
    }
}
