//! Instance transformations: splitting one wide correlated pair into several
//! independent narrow ones, planting sparse-set and pointer-verification
//! instances into the correlated source, and conditioning a
//! pointer-verification table on a first message.
//!
//! Every map consumes randomness only through an explicit [`SharedRandomness`]
//! or a caller-supplied generator, never ambient RNG. Each one comes with an
//! exhaustive checker that walks the full input x randomness product space at
//! tiny parameters and compares the produced table with its target family.

use crate::bits::BitString;
use crate::dist::{DistError, DistTable};
use crate::engine::RandStream;
use crate::perm::{random_permutation, Permutation};
use crate::sources::{
    decode_pv, encode_pcs, encode_pv, enumerate_disj_with, enumerate_pcs_with,
    enumerate_product_with, enumerate_pv_with, enumerate_source, for_each_assignment,
    for_each_perm_tuple, pcs_shape, pv_shape, random_block, DisjInstance, PcsAlice, PcsBob,
    PcsParams, PcsSample, PvAlice, PvBob, PvInstance, PvParams, PvWhich, SourceError,
    SourceFamily, DEFAULT_ENUMERATION_CAP,
};
use rand::Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("shared randomness does not fit the instance: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("conditioning event has zero weight")]
    EmptyEvent,
    #[error("peeling the outer hops needs at least three, got r={0}")]
    NoInnerInstance(usize),
}

fn dim_err<T>(msg: impl Into<String>) -> Result<T, ReductionError> {
    Err(ReductionError::DimensionMismatch(msg.into()))
}

/// Randomness visible to both parties: a relabeling grid `sigma[pos][copy]`
/// with positions 0..=r, and a pool of n blocks. The grid drives the instance
/// split; the pool drives the planting reductions. Unused halves stay empty.
#[derive(Clone, Debug)]
pub struct SharedRandomness {
    pub sigma: Vec<Vec<Permutation>>,
    pub pool: Vec<BitString>,
}

impl SharedRandomness {
    /// Uniform relabeling grid for splitting an (r, n, l*t) pair into t
    /// narrow ones.
    pub fn sigma_grid(r: usize, n: usize, t: usize, stream: &mut RandStream) -> Self {
        let sigma = (0..=r).map(|_| (0..t).map(|_| stream.gen_perm(n)).collect()).collect();
        SharedRandomness { sigma, pool: Vec::new() }
    }

    pub fn identity_grid(r: usize, n: usize, t: usize) -> Self {
        let sigma =
            (0..=r).map(|_| (0..t).map(|_| Permutation::identity(n)).collect()).collect();
        SharedRandomness { sigma, pool: Vec::new() }
    }

    /// Uniform pool of n blocks, l bits each.
    pub fn block_pool(n: usize, l: usize, stream: &mut RandStream) -> Self {
        SharedRandomness { sigma: Vec::new(), pool: (0..n).map(|_| stream.gen_bits(l)).collect() }
    }

    fn grid_dims(&self) -> Result<(usize, usize, usize), ReductionError> {
        if self.sigma.len() < 2 {
            return dim_err("relabeling grid needs rows for positions 0..=r with r >= 1");
        }
        let r = self.sigma.len() - 1;
        let t = self.sigma[0].len();
        if t == 0 || self.sigma.iter().any(|row| row.len() != t) {
            return dim_err("relabeling grid rows must share one positive column count");
        }
        let n = self.sigma[0][0].n();
        if self.sigma.iter().flatten().any(|p| p.n() != n) {
            return dim_err("relabeling grid entries must act on one index set");
        }
        Ok((r, t, n))
    }

    fn pool_dims(&self) -> Result<(usize, usize), ReductionError> {
        let n = self.pool.len();
        if n == 0 {
            return dim_err("block pool is empty");
        }
        let l = self.pool[0].len();
        if l == 0 || self.pool.iter().any(|w| w.len() != l) {
            return dim_err("pool blocks must share one positive width");
        }
        Ok((n, l))
    }
}

// ---------------------------------------------------------------------------
// Wide-instance split

/// after o p o before^{-1}, the relabeled hop between two renamed layers.
fn conjugate(p: &Permutation, before: &Permutation, after: &Permutation) -> Permutation {
    before.invert().then(p).then(after)
}

fn slice_width(blocks: &[BitString], n: usize, t: usize) -> Result<usize, ReductionError> {
    if blocks.len() != n {
        return dim_err(format!("expected {n} blocks, got {}", blocks.len()));
    }
    let wide = blocks[0].len();
    if blocks.iter().any(|b| b.len() != wide) {
        return dim_err("blocks must share one width");
    }
    if wide == 0 || !wide.is_multiple_of(t) {
        return dim_err(format!("block width {wide} does not split into {t} slices"));
    }
    Ok(wide / t)
}

/// Relabeled tau-th slice of every block: out[k] = blocks[last^{-1}(k)][tau].
/// The inverse keeps the slot the chase lands on aligned with the relabeled
/// endpoint.
fn relabel_slices(
    blocks: &[BitString],
    last: &Permutation,
    tau: usize,
    l: usize,
) -> Vec<BitString> {
    let inv = last.invert();
    (0..blocks.len()).map(|k| blocks[inv.apply(k)].slice(tau * l, (tau + 1) * l)).collect()
}

/// First party's half of the split: conjugated odd-position permutations and
/// relabeled block slices, one output per grid column. Depends only on her
/// half and the shared grid.
pub fn t_removal_alice(
    x: &PcsAlice,
    shared: &SharedRandomness,
) -> Result<Vec<PcsAlice>, ReductionError> {
    let (r, t, n) = shared.grid_dims()?;
    let l = slice_width(&x.blocks, n, t)?;
    if x.odd_perms.len() != r.div_ceil(2) || x.odd_perms.iter().any(|p| p.n() != n) {
        return dim_err("odd-position permutations do not match the grid");
    }
    Ok((0..t)
        .map(|tau| PcsAlice {
            odd_perms: (1..=r)
                .step_by(2)
                .map(|pos| {
                    conjugate(
                        &x.odd_perms[(pos - 1) / 2],
                        &shared.sigma[pos - 1][tau],
                        &shared.sigma[pos][tau],
                    )
                })
                .collect(),
            blocks: relabel_slices(&x.blocks, &shared.sigma[r][tau], tau, l),
        })
        .collect())
}

/// Second party's half: renamed start pointer, conjugated even-position
/// permutations, relabeled block slices.
pub fn t_removal_bob(
    y: &PcsBob,
    shared: &SharedRandomness,
) -> Result<Vec<PcsBob>, ReductionError> {
    let (r, t, n) = shared.grid_dims()?;
    let l = slice_width(&y.blocks, n, t)?;
    if y.even_perms.len() != r / 2 || y.even_perms.iter().any(|p| p.n() != n) || y.start >= n {
        return dim_err("pointer or even-position permutations do not match the grid");
    }
    Ok((0..t)
        .map(|tau| PcsBob {
            start: shared.sigma[0][tau].apply(y.start),
            even_perms: (2..=r)
                .step_by(2)
                .map(|pos| {
                    conjugate(
                        &y.even_perms[pos / 2 - 1],
                        &shared.sigma[pos - 1][tau],
                        &shared.sigma[pos][tau],
                    )
                })
                .collect(),
            blocks: relabel_slices(&y.blocks, &shared.sigma[r][tau], tau, l),
        })
        .collect())
}

/// Splits one (r, n, l*t) pair into t independent (r, n, l) pairs. Just the
/// zip of the two per-party maps, so each output half is a function of that
/// party's input and the grid alone.
pub fn t_removal(
    s: &PcsSample,
    shared: &SharedRandomness,
) -> Result<Vec<PcsSample>, ReductionError> {
    let (r, t, n) = shared.grid_dims()?;
    if s.params.r != r || s.params.n != n {
        return dim_err("sample parameters do not match the grid");
    }
    if !s.params.l.is_multiple_of(t) {
        return dim_err(format!("block width {} does not split into {t} slices", s.params.l));
    }
    let params = PcsParams::new(r, n, s.params.l / t)?;
    let alices = t_removal_alice(&s.alice, shared)?;
    let bobs = t_removal_bob(&s.bob, shared)?;
    Ok(alices
        .into_iter()
        .zip(bobs)
        .map(|(alice, bob)| PcsSample { params, alice, bob })
        .collect())
}

// ---------------------------------------------------------------------------
// Planting a sparse-set instance

/// Private draws the first party adds to her planted half: odd-position
/// permutations and blocks for the indices outside her set, ascending.
#[derive(Clone, Debug)]
pub struct DisjAliceFresh {
    pub odd_perms: Vec<Permutation>,
    pub free_blocks: Vec<BitString>,
}

/// Private draws for the second party: start pointer, even-position
/// permutations, blocks outside his set, ascending.
#[derive(Clone, Debug)]
pub struct DisjBobFresh {
    pub start: usize,
    pub even_perms: Vec<Permutation>,
    pub free_blocks: Vec<BitString>,
}

fn planted_blocks(
    set: &[usize],
    pool: &[BitString],
    free: &[BitString],
    l: usize,
) -> Result<Vec<BitString>, ReductionError> {
    let n = pool.len();
    if set.iter().any(|&k| k >= n) || set.windows(2).any(|w| w[0] >= w[1]) {
        return dim_err("index set must be sorted and within range");
    }
    if free.len() != n - set.len() || free.iter().any(|b| b.len() != l) {
        return dim_err("fresh blocks must cover exactly the indices outside the set");
    }
    let mut out = Vec::with_capacity(n);
    let mut it = free.iter();
    for (k, kept) in pool.iter().enumerate() {
        if set.binary_search(&k).is_ok() {
            out.push(kept.clone());
        } else {
            out.push(it.next().expect("free block per outside index").clone());
        }
    }
    Ok(out)
}

/// Deterministic core of the first party's planting: pool blocks on her set,
/// supplied fresh values elsewhere.
pub fn disj_to_crg_alice_with(
    u: &[usize],
    shared: &SharedRandomness,
    fresh: &DisjAliceFresh,
) -> Result<PcsAlice, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    if fresh.odd_perms.iter().any(|p| p.n() != n) {
        return dim_err("odd-position permutations must act on the pool's index set");
    }
    Ok(PcsAlice {
        odd_perms: fresh.odd_perms.clone(),
        blocks: planted_blocks(u, &shared.pool, &fresh.free_blocks, l)?,
    })
}

pub fn disj_to_crg_alice<R: Rng + ?Sized>(
    u: &[usize],
    r: usize,
    shared: &SharedRandomness,
    rng: &mut R,
) -> Result<PcsAlice, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    let fresh = DisjAliceFresh {
        odd_perms: (0..r.div_ceil(2)).map(|_| random_permutation(n, rng)).collect(),
        free_blocks: (0..n - u.len()).map(|_| random_block(l, rng)).collect(),
    };
    disj_to_crg_alice_with(u, shared, &fresh)
}

pub fn disj_to_crg_bob_with(
    v: &[usize],
    shared: &SharedRandomness,
    fresh: &DisjBobFresh,
) -> Result<PcsBob, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    if fresh.start >= n || fresh.even_perms.iter().any(|p| p.n() != n) {
        return dim_err("pointer or even-position permutations out of range");
    }
    Ok(PcsBob {
        start: fresh.start,
        even_perms: fresh.even_perms.clone(),
        blocks: planted_blocks(v, &shared.pool, &fresh.free_blocks, l)?,
    })
}

pub fn disj_to_crg_bob<R: Rng + ?Sized>(
    v: &[usize],
    r: usize,
    shared: &SharedRandomness,
    rng: &mut R,
) -> Result<PcsBob, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    let fresh = DisjBobFresh {
        start: rng.gen_range(0..n),
        even_perms: (0..r / 2).map(|_| random_permutation(n, rng)).collect(),
        free_blocks: (0..n - v.len()).map(|_| random_block(l, rng)).collect(),
    };
    disj_to_crg_bob_with(v, shared, &fresh)
}

/// Plants a sparse-set instance into the correlated source. Sets intersecting
/// in one index reproduce the forced-index hybrid; disjoint sets reproduce
/// the product of marginals. Draw order: first party's fresh values, then the
/// second party's.
pub fn disj_to_crg<R: Rng + ?Sized>(
    inst: &DisjInstance,
    r: usize,
    shared: &SharedRandomness,
    rng: &mut R,
) -> Result<PcsSample, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    if inst.n != n {
        return dim_err(format!("instance over {} indices, pool over {n}", inst.n));
    }
    let alice = disj_to_crg_alice(&inst.u, r, shared, rng)?;
    let bob = disj_to_crg_bob(&inst.v, r, shared, rng)?;
    Ok(PcsSample { params: PcsParams::new(r, n, l)?, alice, bob })
}

// ---------------------------------------------------------------------------
// Planting a pointer-verification instance

/// First party's planting: her permutations ride along unchanged and every
/// block comes from the pool. Uses no private randomness.
pub fn pv_to_crg_alice(
    alice: &PvAlice,
    shared: &SharedRandomness,
) -> Result<PcsAlice, ReductionError> {
    let (n, _) = shared.pool_dims()?;
    if alice.odd_perms.iter().any(|p| p.n() != n) {
        return dim_err("permutations must act on the pool's index set");
    }
    Ok(PcsAlice { odd_perms: alice.odd_perms.clone(), blocks: shared.pool.clone() })
}

/// Second party's fresh block values for the indices other than his claimed
/// endpoint, ascending.
#[derive(Clone, Debug)]
pub struct PvBobFresh {
    pub free_blocks: Vec<BitString>,
}

pub fn pv_to_crg_bob_with(
    bob: &PvBob,
    shared: &SharedRandomness,
    fresh: &PvBobFresh,
) -> Result<PcsBob, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    if bob.i0 >= n || bob.j0 >= n || bob.even_perms.iter().any(|p| p.n() != n) {
        return dim_err("pointers or permutations out of range for the pool");
    }
    Ok(PcsBob {
        start: bob.i0,
        even_perms: bob.even_perms.clone(),
        blocks: planted_blocks(&[bob.j0], &shared.pool, &fresh.free_blocks, l)?,
    })
}

pub fn pv_to_crg_bob<R: Rng + ?Sized>(
    bob: &PvBob,
    shared: &SharedRandomness,
    rng: &mut R,
) -> Result<PcsBob, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    let fresh = PvBobFresh { free_blocks: (0..n - 1).map(|_| random_block(l, rng)).collect() };
    pv_to_crg_bob_with(bob, shared, &fresh)
}

/// Plants a pointer-verification instance: the claimed endpoint's block is
/// shared, so a truthful claim lands the chase on a common block (the
/// correlated source) and a false one forces agreement at an endpoint
/// independent of the chase (the hybrid).
pub fn pv_to_crg<R: Rng + ?Sized>(
    inst: &PvInstance,
    shared: &SharedRandomness,
    rng: &mut R,
) -> Result<PcsSample, ReductionError> {
    let (n, l) = shared.pool_dims()?;
    if inst.params.n != n {
        return dim_err(format!("instance over {} indices, pool over {n}", inst.params.n));
    }
    let alice = pv_to_crg_alice(&inst.alice, shared)?;
    let bob = pv_to_crg_bob(&inst.bob, shared, rng)?;
    Ok(PcsSample { params: PcsParams::new(inst.params.r, n, l)?, alice, bob })
}

// ---------------------------------------------------------------------------
// Conditioning on a first message

/// The instance left after peeling the outermost hops: both pointers advance
/// one step toward the middle and the end permutations drop.
pub fn inner_instance(inst: &PvInstance) -> Result<PvInstance, ReductionError> {
    let r = inst.params.r;
    if r < 3 {
        return Err(ReductionError::NoInnerInstance(r));
    }
    let perms = inst.perms_in_order();
    let i1 = perms[0].apply(inst.bob.i0);
    let j1 = perms[r - 1].invert().apply(inst.bob.j0);
    let mut odd = Vec::new();
    let mut even = Vec::new();
    // Inner position k is outer position k + 1, so parity flips.
    for (k, p) in perms.iter().copied().enumerate().take(r - 1).skip(1) {
        if k % 2 == 1 {
            odd.push(p.clone());
        } else {
            even.push(p.clone());
        }
    }
    Ok(PvInstance {
        params: PvParams::new(r - 2, inst.params.n)?,
        alice: PvAlice { odd_perms: odd },
        bob: PvBob { i0: i1, j0: j1, even_perms: even },
        label: inst.label,
    })
}

/// Restricts a pointer-verification table to the atoms where the first
/// party's message equals `m1_val` and the pointers equal (i0, j0), keeping
/// integer weights (the restricted total renormalizes the probabilities).
/// With `project_inner` the surviving atoms are re-encoded as the peeled
/// instances two hops shorter.
pub fn condition_on_message(
    d: &DistTable,
    m1: &dyn Fn(&PvAlice) -> u64,
    m1_val: u64,
    i0: usize,
    j0: usize,
    project_inner: bool,
) -> Result<DistTable, ReductionError> {
    let mut entries: Vec<(Vec<u8>, u64)> = Vec::new();
    let mut inner_params: Option<PvParams> = None;
    for (atom, w) in d.iter() {
        let inst = decode_pv(atom)?;
        if inst.bob.i0 != i0 || inst.bob.j0 != j0 || m1(&inst.alice) != m1_val {
            continue;
        }
        if project_inner {
            let inner = inner_instance(&inst)?;
            inner_params = Some(inner.params);
            entries.push((encode_pv(&inner), w));
        } else {
            entries.push((atom.to_vec(), w));
        }
    }
    if entries.is_empty() {
        return Err(ReductionError::EmptyEvent);
    }
    let shape = match inner_params {
        Some(p) => Some(pv_shape(&p)),
        None => d.shape().map(str::to_owned),
    };
    Ok(DistTable::from_weighted(shape.as_deref(), entries)?)
}

// ---------------------------------------------------------------------------
// Exhaustive exactness checkers

/// A reduction's enumerated output table next to the family it must match.
#[derive(Clone, Debug)]
pub struct ReductionCheck {
    pub produced: DistTable,
    pub target: DistTable,
    /// Input x randomness configurations walked.
    pub configs: u64,
}

impl ReductionCheck {
    pub fn tv(&self) -> f64 {
        self.produced.tv(&self.target)
    }

    pub fn exact(&self) -> bool {
        self.produced.same_distribution(&self.target)
    }
}

fn table_from_counts(
    shape: &str,
    acc: BTreeMap<Vec<u8>, u64>,
) -> Result<DistTable, ReductionError> {
    Ok(DistTable::from_weighted(Some(shape), acc)?)
}

/// Walks every input of the wide source (correlated or product form) against
/// every relabeling grid and compares the split's joint output with the
/// t-fold power of the narrow family.
pub fn check_t_removal(
    r: usize,
    n: usize,
    l: usize,
    t: usize,
    correlated: bool,
) -> Result<ReductionCheck, ReductionError> {
    let params_in = PcsParams::new(r, n, l * t)?;
    let params_out = PcsParams::new(r, n, l)?;
    let shape = format!("{}^{}", pcs_shape(&params_out), t);
    let mut acc: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut configs = 0u64;
    for_each_perm_tuple((r + 1) * t, n, |flat| {
        let shared = SharedRandomness {
            sigma: (0..=r).map(|row| flat[row * t..(row + 1) * t].to_vec()).collect(),
            pool: Vec::new(),
        };
        let mut visit = |s: &PcsSample| {
            let outs = t_removal(s, &shared).expect("dimensions fixed by construction");
            let mut atom = Vec::new();
            for o in &outs {
                atom.extend_from_slice(&encode_pcs(o));
            }
            *acc.entry(atom).or_insert(0) += 1;
            configs += 1;
        };
        if correlated {
            enumerate_pcs_with(&params_in, &mut visit).expect("params validated");
        } else {
            enumerate_product_with(&params_in, &mut visit).expect("params validated");
        }
    });
    let family = if correlated {
        SourceFamily::Pcs { params: params_out }
    } else {
        SourceFamily::PcsProduct { params: params_out }
    };
    let base = enumerate_source(&family, DEFAULT_ENUMERATION_CAP)?;
    let target = base.power(t, Some(&shape))?;
    Ok(ReductionCheck { produced: table_from_counts(&shape, acc)?, target, configs })
}

/// Walks every sparse-set instance with the requested intersection size,
/// every pool value, and every private draw of both parties, then compares
/// with the hybrid (intersecting) or the product of marginals (disjoint).
pub fn check_disj_to_crg(
    n: usize,
    r: usize,
    l: usize,
    intersecting: bool,
) -> Result<ReductionCheck, ReductionError> {
    let params_out = PcsParams::new(r, n, l)?;
    let shape = pcs_shape(&params_out);
    let k = n / 4;
    let mut acc: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut configs = 0u64;
    enumerate_disj_with(n, intersecting, |inst| {
        for_each_assignment(n, l, |pool_vals| {
            let shared = SharedRandomness {
                sigma: Vec::new(),
                pool: pool_vals.iter().map(|&v| BitString::from_u64(v, l)).collect(),
            };
            for_each_perm_tuple(r.div_ceil(2), n, |odd| {
                for_each_assignment(n - k, l, |free_a| {
                    let fresh_a = DisjAliceFresh {
                        odd_perms: odd.to_vec(),
                        free_blocks: free_a.iter().map(|&v| BitString::from_u64(v, l)).collect(),
                    };
                    let alice = disj_to_crg_alice_with(&inst.u, &shared, &fresh_a)
                        .expect("dimensions fixed");
                    for start in 0..n {
                        for_each_perm_tuple(r / 2, n, |even| {
                            for_each_assignment(n - k, l, |free_b| {
                                let fresh_b = DisjBobFresh {
                                    start,
                                    even_perms: even.to_vec(),
                                    free_blocks: free_b
                                        .iter()
                                        .map(|&v| BitString::from_u64(v, l))
                                        .collect(),
                                };
                                let bob = disj_to_crg_bob_with(&inst.v, &shared, &fresh_b)
                                    .expect("dimensions fixed");
                                let sample = PcsSample {
                                    params: params_out,
                                    alice: alice.clone(),
                                    bob,
                                };
                                *acc.entry(encode_pcs(&sample)).or_insert(0) += 1;
                                configs += 1;
                            });
                        });
                    }
                });
            });
        });
    })?;
    let family = if intersecting {
        SourceFamily::Mid { params: params_out }
    } else {
        SourceFamily::PcsProduct { params: params_out }
    };
    let target = enumerate_source(&family, DEFAULT_ENUMERATION_CAP)?;
    Ok(ReductionCheck { produced: table_from_counts(&shape, acc)?, target, configs })
}

/// Walks every instance of one verification branch, every pool value, and
/// every fresh draw of the second party, then compares with the correlated
/// source (truthful branch) or the forced-index hybrid (uniform branch).
pub fn check_pv_to_crg(
    r: usize,
    n: usize,
    l: usize,
    truthful: bool,
) -> Result<ReductionCheck, ReductionError> {
    let params_pv = PvParams::new(r, n)?;
    let params_out = PcsParams::new(r, n, l)?;
    let shape = pcs_shape(&params_out);
    let which = if truthful { PvWhich::Yes } else { PvWhich::No };
    let mut acc: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    let mut configs = 0u64;
    enumerate_pv_with(&params_pv, which, |inst, w| {
        for_each_assignment(n, l, |pool_vals| {
            let shared = SharedRandomness {
                sigma: Vec::new(),
                pool: pool_vals.iter().map(|&v| BitString::from_u64(v, l)).collect(),
            };
            let alice = pv_to_crg_alice(&inst.alice, &shared).expect("dimensions fixed");
            for_each_assignment(n - 1, l, |free_b| {
                let fresh = PvBobFresh {
                    free_blocks: free_b.iter().map(|&v| BitString::from_u64(v, l)).collect(),
                };
                let bob =
                    pv_to_crg_bob_with(&inst.bob, &shared, &fresh).expect("dimensions fixed");
                let sample = PcsSample { params: params_out, alice: alice.clone(), bob };
                *acc.entry(encode_pcs(&sample)).or_insert(0) += w;
                configs += 1;
            });
        });
    })?;
    let family = if truthful {
        SourceFamily::Pcs { params: params_out }
    } else {
        SourceFamily::Mid { params: params_out }
    };
    let target = enumerate_source(&family, DEFAULT_ENUMERATION_CAP)?;
    Ok(ReductionCheck { produced: table_from_counts(&shape, acc)?, target, configs })
}
