//! Correlated sources: pointer-chasing pairs, the fully independent product,
//! the single-forced-block hybrid, pointer-verification inputs, and sparse
//! set-disjointness inputs. Each family has a sampler and, at tiny sizes, an
//! exact enumerator producing a `DistTable` over canonical atom encodings.
//!
//! Atom layout is fixed: params header, permutations as image sequences in
//! position order, pointers, then block bits. Samplers and enumerators share
//! the encoders, so empirical histograms align with exact tables bit for bit.

use crate::bits::BitString;
use crate::dist::{DistError, DistTable};
use crate::perm::{all_permutations, chase, factorial, random_permutation, PermError, Permutation};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("support size {support} exceeds enumeration cap {cap}")]
    SupportExceedsCap { support: u128, cap: u64 },
    #[error("malformed atom: {0}")]
    Decode(String),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Pointer-chasing samples

/// Parameters of a pointer-chasing pair: `r` permutations over `[n]`,
/// blocks of `l` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcsParams {
    pub r: usize,
    pub n: usize,
    pub l: usize,
}

impl PcsParams {
    pub fn new(r: usize, n: usize, l: usize) -> Result<Self, SourceError> {
        let p = PcsParams { r, n, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.r < 1 || self.n < 1 || self.l < 1 {
            return Err(SourceError::BadParams(format!(
                "need r, n, l >= 1, got r={} n={} l={}",
                self.r, self.n, self.l
            )));
        }
        if self.r > 255 || self.n > 255 || self.l > 255 {
            return Err(SourceError::BadParams("r, n, l must fit in a byte".into()));
        }
        Ok(())
    }

    /// Number of permutations held by the first party (odd positions).
    pub fn odd_count(&self) -> usize {
        self.r.div_ceil(2)
    }

    pub fn even_count(&self) -> usize {
        self.r / 2
    }
}

/// First party's half: odd-position permutations and blocks A_0..A_{n-1}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcsAlice {
    pub odd_perms: Vec<Permutation>,
    pub blocks: Vec<BitString>,
}

/// Second party's half: start pointer, even-position permutations, blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcsBob {
    pub start: usize,
    pub even_perms: Vec<Permutation>,
    pub blocks: Vec<BitString>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcsSample {
    pub params: PcsParams,
    pub alice: PcsAlice,
    pub bob: PcsBob,
}

impl PcsSample {
    /// Permutations in position order 1..=r (odd from Alice, even from Bob).
    pub fn perms_in_order(&self) -> Vec<&Permutation> {
        (1..=self.params.r)
            .map(|k| {
                if k % 2 == 1 {
                    &self.alice.odd_perms[(k - 1) / 2]
                } else {
                    &self.bob.even_perms[k / 2 - 1]
                }
            })
            .collect()
    }

    /// The chased endpoint: position of the mutually known block under the
    /// correlated source.
    pub fn target(&self) -> usize {
        chase(&self.perms_in_order(), self.bob.start)
    }
}

pub(crate) fn random_block<R: Rng + ?Sized>(l: usize, rng: &mut R) -> BitString {
    BitString::from_bits((0..l).map(|_| rng.gen::<bool>()).collect())
}

fn draw_perms<R: Rng + ?Sized>(r: usize, n: usize, rng: &mut R) -> Vec<Permutation> {
    (0..r).map(|_| random_permutation(n, rng)).collect()
}

fn split_perms(perms: Vec<Permutation>) -> (Vec<Permutation>, Vec<Permutation>) {
    let mut odd = Vec::new();
    let mut even = Vec::new();
    for (k, p) in perms.into_iter().enumerate() {
        if k % 2 == 0 {
            odd.push(p); // position k+1 is odd
        } else {
            even.push(p);
        }
    }
    (odd, even)
}

/// Correlated pair: blocks agree at the chased index, all else independent.
/// Draw order: permutations, start pointer, shared block, free blocks of the
/// first party by ascending index, then of the second party.
pub fn sample_pcs<R: Rng + ?Sized>(params: &PcsParams, rng: &mut R) -> Result<PcsSample, SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    let perms = draw_perms(r, n, rng);
    let start = rng.gen_range(0..n);
    let j = chase(&perms.iter().collect::<Vec<_>>(), start);
    let shared = random_block(l, rng);
    let mut blocks_a = vec![BitString::new(); n];
    let mut blocks_b = vec![BitString::new(); n];
    blocks_a[j] = shared.clone();
    blocks_b[j] = shared;
    for k in (0..n).filter(|&k| k != j) {
        blocks_a[k] = random_block(l, rng);
    }
    for k in (0..n).filter(|&k| k != j) {
        blocks_b[k] = random_block(l, rng);
    }
    let (odd, even) = split_perms(perms);
    Ok(PcsSample {
        params: *params,
        alice: PcsAlice { odd_perms: odd, blocks: blocks_a },
        bob: PcsBob { start, even_perms: even, blocks: blocks_b },
    })
}

/// Product of the two marginals: every coordinate independent and uniform.
pub fn sample_pcs_product<R: Rng + ?Sized>(
    params: &PcsParams,
    rng: &mut R,
) -> Result<PcsSample, SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    let perms = draw_perms(r, n, rng);
    let start = rng.gen_range(0..n);
    let blocks_a = (0..n).map(|_| random_block(l, rng)).collect();
    let blocks_b = (0..n).map(|_| random_block(l, rng)).collect();
    let (odd, even) = split_perms(perms);
    Ok(PcsSample {
        params: *params,
        alice: PcsAlice { odd_perms: odd, blocks: blocks_a },
        bob: PcsBob { start, even_perms: even, blocks: blocks_b },
    })
}

/// One draw of the hybrid plus the index it forced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MidDraw {
    pub sample: PcsSample,
    pub forced: usize,
}

/// Hybrid source: blocks agree at a uniform index drawn independently of the
/// permutations, so the chase usually does not land on the shared block.
pub fn sample_mid<R: Rng + ?Sized>(params: &PcsParams, rng: &mut R) -> Result<MidDraw, SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    let perms = draw_perms(r, n, rng);
    let start = rng.gen_range(0..n);
    let forced = rng.gen_range(0..n);
    let shared = random_block(l, rng);
    let mut blocks_a = vec![BitString::new(); n];
    let mut blocks_b = vec![BitString::new(); n];
    blocks_a[forced] = shared.clone();
    blocks_b[forced] = shared;
    for k in (0..n).filter(|&k| k != forced) {
        blocks_a[k] = random_block(l, rng);
    }
    for k in (0..n).filter(|&k| k != forced) {
        blocks_b[k] = random_block(l, rng);
    }
    let (odd, even) = split_perms(perms);
    Ok(MidDraw {
        sample: PcsSample {
            params: *params,
            alice: PcsAlice { odd_perms: odd, blocks: blocks_a },
            bob: PcsBob { start, even_perms: even, blocks: blocks_b },
        },
        forced,
    })
}

// ---------------------------------------------------------------------------
// Pointer-verification instances

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvParams {
    pub r: usize,
    pub n: usize,
}

impl PvParams {
    pub fn new(r: usize, n: usize) -> Result<Self, SourceError> {
        let p = PvParams { r, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if self.r < 1 || self.r.is_multiple_of(2) {
            return Err(SourceError::BadParams(format!("r must be odd, got {}", self.r)));
        }
        if self.n < 1 || self.n > 255 || self.r > 255 {
            return Err(SourceError::BadParams(format!(
                "need 1 <= n <= 255 and r <= 255, got r={} n={}",
                self.r, self.n
            )));
        }
        Ok(())
    }

    pub fn odd_count(&self) -> usize {
        self.r.div_ceil(2)
    }

    pub fn even_count(&self) -> usize {
        self.r / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PvLabel {
    Yes,
    No,
}

/// Which pointer-verification distribution to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PvWhich {
    Yes,
    No,
    Mix,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvAlice {
    pub odd_perms: Vec<Permutation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvBob {
    pub i0: usize,
    pub j0: usize,
    pub even_perms: Vec<Permutation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PvInstance {
    pub params: PvParams,
    pub alice: PvAlice,
    pub bob: PvBob,
    /// Branch the instance was drawn from, when known. Not part of the atom.
    pub label: Option<PvLabel>,
}

impl PvInstance {
    pub fn perms_in_order(&self) -> Vec<&Permutation> {
        (1..=self.params.r)
            .map(|k| {
                if k % 2 == 1 {
                    &self.alice.odd_perms[(k - 1) / 2]
                } else {
                    &self.bob.even_perms[k / 2 - 1]
                }
            })
            .collect()
    }

    /// Whether the chase from i0 ends at j0.
    pub fn truth(&self) -> bool {
        chase(&self.perms_in_order(), self.bob.i0) == self.bob.j0
    }
}

/// Draws from the yes branch (j0 forced to the chase endpoint), the no branch
/// (j0 uniform and independent), or the fair mixture of the two.
pub fn sample_pv<R: Rng + ?Sized>(
    params: &PvParams,
    which: PvWhich,
    rng: &mut R,
) -> Result<PvInstance, SourceError> {
    params.validate()?;
    let branch = match which {
        PvWhich::Yes => PvLabel::Yes,
        PvWhich::No => PvLabel::No,
        PvWhich::Mix => {
            if rng.gen::<bool>() {
                PvLabel::Yes
            } else {
                PvLabel::No
            }
        }
    };
    let (r, n) = (params.r, params.n);
    let perms = draw_perms(r, n, rng);
    let i0 = rng.gen_range(0..n);
    let j0 = match branch {
        PvLabel::Yes => chase(&perms.iter().collect::<Vec<_>>(), i0),
        PvLabel::No => rng.gen_range(0..n),
    };
    let (odd, even) = split_perms(perms);
    Ok(PvInstance {
        params: *params,
        alice: PvAlice { odd_perms: odd },
        bob: PvBob { i0, j0, even_perms: even },
        label: Some(branch),
    })
}

// ---------------------------------------------------------------------------
// Sparse set-disjointness instances

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjInstance {
    pub n: usize,
    /// Sorted subset of size n/4 held by the first party.
    pub u: Vec<usize>,
    /// Sorted subset of size n/4 held by the second party.
    pub v: Vec<usize>,
}

impl DisjInstance {
    pub fn intersection(&self) -> Vec<usize> {
        self.u.iter().copied().filter(|k| self.v.contains(k)).collect()
    }
}

fn validate_disj_n(n: usize) -> Result<usize, SourceError> {
    if n < 4 || !n.is_multiple_of(4) || n > 255 {
        return Err(SourceError::BadParams(format!(
            "disjointness needs n divisible by 4, 4 <= n <= 255, got {n}"
        )));
    }
    Ok(n / 4)
}

/// Uniform pair of size-n/4 subsets conditioned on intersection size 1
/// (intersecting) or 0 (disjoint). Rejection sampling keeps it uniform.
pub fn sample_disj<R: Rng + ?Sized>(
    n: usize,
    intersecting: bool,
    rng: &mut R,
) -> Result<DisjInstance, SourceError> {
    let k = validate_disj_n(n)?;
    let want = usize::from(intersecting);
    loop {
        let mut u = rand::seq::index::sample(rng, n, k).into_vec();
        let mut v = rand::seq::index::sample(rng, n, k).into_vec();
        u.sort_unstable();
        v.sort_unstable();
        let inst = DisjInstance { n, u, v };
        if inst.intersection().len() == want {
            return Ok(inst);
        }
    }
}

// ---------------------------------------------------------------------------
// Canonical atom encodings

const TAG_PCS: u8 = 0x01;
const TAG_PV: u8 = 0x02;
const TAG_DISJ: u8 = 0x03;

pub fn pcs_shape(params: &PcsParams) -> String {
    format!("pcs:r={},n={},l={}", params.r, params.n, params.l)
}

pub fn pv_shape(params: &PvParams) -> String {
    format!("pv:r={},n={}", params.r, params.n)
}

pub fn disj_shape(n: usize) -> String {
    format!("disj:n={n}")
}

fn push_perm(out: &mut Vec<u8>, p: &Permutation) {
    out.extend(p.image().iter().map(|&v| v as u8));
}

fn push_block(out: &mut Vec<u8>, b: &BitString) {
    out.extend(b.to_packed_bytes());
}

pub fn encode_pcs(s: &PcsSample) -> Vec<u8> {
    let (r, n, l) = (s.params.r, s.params.n, s.params.l);
    let mut out = vec![TAG_PCS, r as u8, n as u8, l as u8];
    for p in s.perms_in_order() {
        push_perm(&mut out, p);
    }
    out.push(s.bob.start as u8);
    for b in &s.alice.blocks {
        push_block(&mut out, b);
    }
    for b in &s.bob.blocks {
        push_block(&mut out, b);
    }
    out
}

/// Projection of a full atom onto the first party's view (its permutations
/// and blocks). Used for exact marginal comparisons.
pub fn encode_pcs_alice(s: &PcsSample) -> Vec<u8> {
    let (r, n, l) = (s.params.r, s.params.n, s.params.l);
    let mut out = vec![TAG_PCS, r as u8, n as u8, l as u8];
    for p in &s.alice.odd_perms {
        push_perm(&mut out, p);
    }
    for b in &s.alice.blocks {
        push_block(&mut out, b);
    }
    out
}

pub fn encode_pcs_bob(s: &PcsSample) -> Vec<u8> {
    let (r, n, l) = (s.params.r, s.params.n, s.params.l);
    let mut out = vec![TAG_PCS, r as u8, n as u8, l as u8];
    for p in &s.bob.even_perms {
        push_perm(&mut out, p);
    }
    out.push(s.bob.start as u8);
    for b in &s.bob.blocks {
        push_block(&mut out, b);
    }
    out
}

pub fn decode_pcs(atom: &[u8]) -> Result<PcsSample, SourceError> {
    let err = |m: &str| SourceError::Decode(m.to_owned());
    if atom.len() < 4 || atom[0] != TAG_PCS {
        return Err(err("not a pointer-chasing atom"));
    }
    let params = PcsParams::new(atom[1] as usize, atom[2] as usize, atom[3] as usize)?;
    let (r, n, l) = (params.r, params.n, params.l);
    let block_bytes = l.div_ceil(8);
    let expect = 4 + r * n + 1 + 2 * n * block_bytes;
    if atom.len() != expect {
        return Err(err(&format!("atom length {} != {}", atom.len(), expect)));
    }
    let mut pos = 4;
    let mut perms = Vec::with_capacity(r);
    for _ in 0..r {
        let image = atom[pos..pos + n].iter().map(|&b| b as usize).collect();
        perms.push(Permutation::new(image)?);
        pos += n;
    }
    let start = atom[pos] as usize;
    pos += 1;
    if start >= n {
        return Err(err("start pointer out of range"));
    }
    let read_blocks = |pos: &mut usize| -> Vec<BitString> {
        (0..n)
            .map(|_| {
                let b = BitString::from_packed_bytes(&atom[*pos..*pos + block_bytes], l);
                *pos += block_bytes;
                b
            })
            .collect()
    };
    let blocks_a = read_blocks(&mut pos);
    let blocks_b = read_blocks(&mut pos);
    let (odd, even) = split_perms(perms);
    Ok(PcsSample {
        params,
        alice: PcsAlice { odd_perms: odd, blocks: blocks_a },
        bob: PcsBob { start, even_perms: even, blocks: blocks_b },
    })
}

pub fn encode_pv(inst: &PvInstance) -> Vec<u8> {
    let (r, n) = (inst.params.r, inst.params.n);
    let mut out = vec![TAG_PV, r as u8, n as u8];
    for p in inst.perms_in_order() {
        push_perm(&mut out, p);
    }
    out.push(inst.bob.i0 as u8);
    out.push(inst.bob.j0 as u8);
    out
}

/// The first party's view of a pointer-verification atom, used as a search
/// and conditioning key.
pub fn encode_pv_alice(inst: &PvInstance) -> Vec<u8> {
    let (r, n) = (inst.params.r, inst.params.n);
    let mut out = vec![TAG_PV, r as u8, n as u8];
    for p in &inst.alice.odd_perms {
        push_perm(&mut out, p);
    }
    out
}

pub fn encode_pv_bob(inst: &PvInstance) -> Vec<u8> {
    let (r, n) = (inst.params.r, inst.params.n);
    let mut out = vec![TAG_PV, r as u8, n as u8];
    for p in &inst.bob.even_perms {
        push_perm(&mut out, p);
    }
    out.push(inst.bob.i0 as u8);
    out.push(inst.bob.j0 as u8);
    out
}

pub fn decode_pv(atom: &[u8]) -> Result<PvInstance, SourceError> {
    let err = |m: &str| SourceError::Decode(m.to_owned());
    if atom.len() < 3 || atom[0] != TAG_PV {
        return Err(err("not a pointer-verification atom"));
    }
    let params = PvParams::new(atom[1] as usize, atom[2] as usize)?;
    let (r, n) = (params.r, params.n);
    let expect = 3 + r * n + 2;
    if atom.len() != expect {
        return Err(err(&format!("atom length {} != {}", atom.len(), expect)));
    }
    let mut pos = 3;
    let mut perms = Vec::with_capacity(r);
    for _ in 0..r {
        let image = atom[pos..pos + n].iter().map(|&b| b as usize).collect();
        perms.push(Permutation::new(image)?);
        pos += n;
    }
    let i0 = atom[pos] as usize;
    let j0 = atom[pos + 1] as usize;
    if i0 >= n || j0 >= n {
        return Err(err("pointer out of range"));
    }
    let (odd, even) = split_perms(perms);
    Ok(PvInstance {
        params,
        alice: PvAlice { odd_perms: odd },
        bob: PvBob { i0, j0, even_perms: even },
        label: None,
    })
}

fn subset_mask(n: usize, set: &[usize]) -> Vec<u8> {
    let mut mask = vec![0u8; n.div_ceil(8)];
    for &k in set {
        mask[k / 8] |= 0x80 >> (k % 8);
    }
    mask
}

pub fn encode_disj(inst: &DisjInstance) -> Vec<u8> {
    let mut out = vec![TAG_DISJ, inst.n as u8];
    out.extend(subset_mask(inst.n, &inst.u));
    out.extend(subset_mask(inst.n, &inst.v));
    out
}

pub fn decode_disj(atom: &[u8]) -> Result<DisjInstance, SourceError> {
    let err = |m: &str| SourceError::Decode(m.to_owned());
    if atom.len() < 2 || atom[0] != TAG_DISJ {
        return Err(err("not a disjointness atom"));
    }
    let n = atom[1] as usize;
    validate_disj_n(n)?;
    let mask_bytes = n.div_ceil(8);
    if atom.len() != 2 + 2 * mask_bytes {
        return Err(err("atom length mismatch"));
    }
    let read = |mask: &[u8]| -> Vec<usize> {
        (0..n).filter(|&k| mask[k / 8] & (0x80 >> (k % 8)) != 0).collect()
    };
    Ok(DisjInstance {
        n,
        u: read(&atom[2..2 + mask_bytes]),
        v: read(&atom[2 + mask_bytes..]),
    })
}

// ---------------------------------------------------------------------------
// Exact enumeration

/// A source family with fixed parameters, as enumerated or named on the
/// command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SourceFamily {
    Pcs { params: PcsParams },
    PcsProduct { params: PcsParams },
    Mid { params: PcsParams },
    Pv { params: PvParams, which: PvWhich },
    Disj { n: usize, intersecting: bool },
}

fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    let mut out: u128 = 1;
    for _ in 0..exp {
        out = out.checked_mul(base)?;
    }
    Some(out)
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Number of draws a full enumeration visits, or None if it overflows u128
/// (then it certainly exceeds any practical cap). Equals the number of
/// distinct atoms except for the mid hybrid, where draws agreeing at both the
/// forced and another index collapse; there it is an upper bound.
pub fn support_size(family: &SourceFamily) -> Option<u128> {
    match family {
        SourceFamily::Pcs { params } | SourceFamily::Mid { params } => {
            let (r, n, l) = (params.r, params.n, params.l);
            let perms = checked_pow(factorial(n) as u128, r)?;
            let pointers = if matches!(family, SourceFamily::Mid { .. }) {
                (n as u128).checked_mul(n as u128)?
            } else {
                n as u128
            };
            let shared = checked_pow(2, l)?;
            let free = checked_pow(2, 2 * l * (n - 1))?;
            perms.checked_mul(pointers)?.checked_mul(shared)?.checked_mul(free)
        }
        SourceFamily::PcsProduct { params } => {
            let (r, n, l) = (params.r, params.n, params.l);
            let perms = checked_pow(factorial(n) as u128, r)?;
            let blocks = checked_pow(2, 2 * l * n)?;
            perms.checked_mul(n as u128)?.checked_mul(blocks)
        }
        SourceFamily::Pv { params, which } => {
            let (r, n) = (params.r, params.n);
            let perms = checked_pow(factorial(n) as u128, r)?;
            let pointers = match which {
                PvWhich::Yes => n as u128,
                // The mixture's support is the no-branch support.
                PvWhich::No | PvWhich::Mix => (n as u128) * (n as u128),
            };
            perms.checked_mul(pointers)
        }
        SourceFamily::Disj { n, intersecting } => {
            let k = n / 4;
            if *intersecting {
                Some(*n as u128 * binomial(n - 1, k - 1) * binomial(n - k, k - 1))
            } else {
                Some(binomial(*n, k) * binomial(n - k, k))
            }
        }
    }
}

pub(crate) fn for_each_perm_tuple(r: usize, n: usize, mut f: impl FnMut(&[Permutation])) {
    let all: Vec<Permutation> = all_permutations(n).collect();
    let mut idx = vec![0usize; r];
    let mut cur: Vec<Permutation> = vec![all[0].clone(); r];
    loop {
        f(&cur);
        let mut k = 0;
        loop {
            if k == r {
                return;
            }
            idx[k] += 1;
            if idx[k] < all.len() {
                cur[k] = all[idx[k]].clone();
                break;
            }
            idx[k] = 0;
            cur[k] = all[0].clone();
            k += 1;
        }
    }
}

pub(crate) fn for_each_assignment(count: usize, l: usize, mut f: impl FnMut(&[u64])) {
    assert!(l < 64);
    let m = 1u64 << l;
    let mut cur = vec![0u64; count];
    loop {
        f(&cur);
        let mut k = 0;
        loop {
            if k == count {
                return;
            }
            cur[k] += 1;
            if cur[k] < m {
                break;
            }
            cur[k] = 0;
            k += 1;
        }
    }
}

fn blocks_from(n: usize, l: usize, forced: usize, shared: u64, free: &[u64]) -> Vec<BitString> {
    let mut out = Vec::with_capacity(n);
    let mut it = free.iter();
    for k in 0..n {
        if k == forced {
            out.push(BitString::from_u64(shared, l));
        } else {
            out.push(BitString::from_u64(*it.next().expect("free block"), l));
        }
    }
    out
}

/// Streams every atom of the correlated source. The callback borrows a
/// scratch sample that is overwritten between calls.
pub fn enumerate_pcs_with(
    params: &PcsParams,
    mut f: impl FnMut(&PcsSample),
) -> Result<(), SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    if l * (n - 1) >= 64 || l >= 64 {
        return Err(SourceError::BadParams("blocks too wide to enumerate".into()));
    }
    for_each_perm_tuple(r, n, |perms| {
        let refs: Vec<&Permutation> = perms.iter().collect();
        for start in 0..n {
            let j = chase(&refs, start);
            for shared in 0..(1u64 << l) {
                for_each_assignment(n - 1, l, |free_a| {
                    let blocks_a = blocks_from(n, l, j, shared, free_a);
                    for_each_assignment(n - 1, l, |free_b| {
                        let blocks_b = blocks_from(n, l, j, shared, free_b);
                        let (odd, even) = split_perms(perms.to_vec());
                        f(&PcsSample {
                            params: *params,
                            alice: PcsAlice { odd_perms: odd, blocks: blocks_a.clone() },
                            bob: PcsBob { start, even_perms: even, blocks: blocks_b },
                        });
                    });
                });
            }
        }
    });
    Ok(())
}

pub fn enumerate_product_with(
    params: &PcsParams,
    mut f: impl FnMut(&PcsSample),
) -> Result<(), SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    if l * n >= 64 {
        return Err(SourceError::BadParams("blocks too wide to enumerate".into()));
    }
    for_each_perm_tuple(r, n, |perms| {
        for start in 0..n {
            for_each_assignment(n, l, |vals_a| {
                let blocks_a: Vec<BitString> =
                    vals_a.iter().map(|&v| BitString::from_u64(v, l)).collect();
                for_each_assignment(n, l, |vals_b| {
                    let blocks_b = vals_b.iter().map(|&v| BitString::from_u64(v, l)).collect();
                    let (odd, even) = split_perms(perms.to_vec());
                    f(&PcsSample {
                        params: *params,
                        alice: PcsAlice { odd_perms: odd, blocks: blocks_a.clone() },
                        bob: PcsBob { start, even_perms: even, blocks: blocks_b },
                    });
                });
            });
        }
    });
    Ok(())
}

pub fn enumerate_mid_with(
    params: &PcsParams,
    mut f: impl FnMut(&PcsSample),
) -> Result<(), SourceError> {
    params.validate()?;
    let (r, n, l) = (params.r, params.n, params.l);
    if l * (n - 1) >= 64 || l >= 64 {
        return Err(SourceError::BadParams("blocks too wide to enumerate".into()));
    }
    for_each_perm_tuple(r, n, |perms| {
        for start in 0..n {
            for forced in 0..n {
                for shared in 0..(1u64 << l) {
                    for_each_assignment(n - 1, l, |free_a| {
                        let blocks_a = blocks_from(n, l, forced, shared, free_a);
                        for_each_assignment(n - 1, l, |free_b| {
                            let blocks_b = blocks_from(n, l, forced, shared, free_b);
                            let (odd, even) = split_perms(perms.to_vec());
                            f(&PcsSample {
                                params: *params,
                                alice: PcsAlice { odd_perms: odd, blocks: blocks_a.clone() },
                                bob: PcsBob { start, even_perms: even, blocks: blocks_b },
                            });
                        });
                    });
                }
            }
        }
    });
    Ok(())
}

/// Streams pointer-verification atoms with their mixture weights:
/// yes branch only, no branch only, or the merged fair mixture in which a
/// chase-consistent atom carries weight n + 1 and the rest carry weight 1
/// (common denominator 2 x no-branch support).
pub fn enumerate_pv_with(
    params: &PvParams,
    which: PvWhich,
    mut f: impl FnMut(&PvInstance, u64),
) -> Result<(), SourceError> {
    params.validate()?;
    let (r, n) = (params.r, params.n);
    for_each_perm_tuple(r, n, |perms| {
        let refs: Vec<&Permutation> = perms.iter().collect();
        for i0 in 0..n {
            let end = chase(&refs, i0);
            for j0 in 0..n {
                let weight = match which {
                    PvWhich::Yes => u64::from(j0 == end),
                    PvWhich::No => 1,
                    PvWhich::Mix => 1 + n as u64 * u64::from(j0 == end),
                };
                if weight == 0 {
                    continue;
                }
                let (odd, even) = split_perms(perms.to_vec());
                f(
                    &PvInstance {
                        params: *params,
                        alice: PvAlice { odd_perms: odd },
                        bob: PvBob { i0, j0, even_perms: even },
                        label: None,
                    },
                    weight,
                );
            }
        }
    });
    Ok(())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(v + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

pub fn enumerate_disj_with(
    n: usize,
    intersecting: bool,
    mut f: impl FnMut(&DisjInstance),
) -> Result<(), SourceError> {
    let k = validate_disj_n(n)?;
    let want = usize::from(intersecting);
    let sets = subsets(n, k);
    for u in &sets {
        for v in &sets {
            let inst = DisjInstance { n, u: u.clone(), v: v.clone() };
            if inst.intersection().len() == want {
                f(&inst);
            }
        }
    }
    Ok(())
}

/// Materializes a family as an exact table, refusing when the support
/// exceeds `cap`.
pub fn enumerate_source(family: &SourceFamily, cap: u64) -> Result<DistTable, SourceError> {
    let support =
        support_size(family).ok_or(SourceError::SupportExceedsCap { support: u128::MAX, cap })?;
    if support > cap as u128 {
        return Err(SourceError::SupportExceedsCap { support, cap });
    }
    let mut entries: Vec<(Vec<u8>, u64)> = Vec::new();
    let shape;
    match family {
        SourceFamily::Pcs { params } => {
            shape = pcs_shape(params);
            enumerate_pcs_with(params, |s| entries.push((encode_pcs(s), 1)))?;
        }
        SourceFamily::PcsProduct { params } => {
            shape = pcs_shape(params);
            enumerate_product_with(params, |s| entries.push((encode_pcs(s), 1)))?;
        }
        SourceFamily::Mid { params } => {
            shape = pcs_shape(params);
            enumerate_mid_with(params, |s| entries.push((encode_pcs(s), 1)))?;
        }
        SourceFamily::Pv { params, which } => {
            shape = pv_shape(params);
            enumerate_pv_with(params, *which, |inst, w| entries.push((encode_pv(inst), w)))?;
        }
        SourceFamily::Disj { n, intersecting } => {
            shape = disj_shape(*n);
            enumerate_disj_with(*n, *intersecting, |inst| {
                entries.push((encode_disj(inst), 1))
            })?;
        }
    }
    Ok(DistTable::from_weighted(Some(&shape), entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn pcs(r: usize, n: usize, l: usize) -> PcsParams {
        PcsParams::new(r, n, l).unwrap()
    }

    fn enumerate(family: SourceFamily) -> DistTable {
        enumerate_source(&family, DEFAULT_ENUMERATION_CAP).unwrap()
    }

    #[test]
    fn tiny_support_counts() {
        // 2 starts x 2 perms x 2 shared x 4 free blocks.
        let mu = enumerate(SourceFamily::Pcs { params: pcs(1, 2, 1) });
        assert_eq!(mu.len(), 32);
        let prod = enumerate(SourceFamily::PcsProduct { params: pcs(1, 2, 1) });
        assert_eq!(prod.len(), 64);
        // 2 starts x 2 forced targets x 2 perms x 2 shared x 4 free = 64 draws,
        // but draws that agree at both indices collapse to one atom of weight 2.
        let mid = enumerate(SourceFamily::Mid { params: pcs(1, 2, 1) });
        assert_eq!(mid.len(), 48);
        assert_eq!(mid.total(), 64);
        assert_eq!(mid.iter().filter(|&(_, w)| w == 2).count(), 16);
        let no = enumerate(SourceFamily::Pv { params: PvParams::new(1, 2).unwrap(), which: PvWhich::No });
        assert_eq!(no.len(), 8);
        assert_eq!(
            support_size(&SourceFamily::Pcs { params: pcs(3, 4, 1) }),
            Some(4 * 13824 * 2 * 64)
        );
    }

    #[test]
    fn pcs_sample_agrees_at_target_only_in_expectation() {
        let params = pcs(3, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let s = sample_pcs(&params, &mut rng).unwrap();
            let j = s.target();
            assert_eq!(s.alice.blocks[j], s.bob.blocks[j]);
        }
        // Off-target blocks disagree for at least one draw (they are
        // independent 2-bit strings, so all-equal over 200 draws is absurd).
        let mut saw_disagreement = false;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let s = sample_pcs(&params, &mut rng).unwrap();
            let j = s.target();
            for k in (0..4).filter(|&k| k != j) {
                if s.alice.blocks[k] != s.bob.blocks[k] {
                    saw_disagreement = true;
                }
            }
        }
        assert!(saw_disagreement);
    }

    #[test]
    fn mix_weights_use_common_denominator() {
        let params = PvParams::new(1, 2).unwrap();
        let mix = enumerate(SourceFamily::Pv { params, which: PvWhich::Mix });
        let no = enumerate(SourceFamily::Pv { params, which: PvWhich::No });
        assert_eq!(mix.total(), 2 * no.total());
        // Chase-consistent atoms carry weight n + 1 = 3.
        let weights: Vec<u64> = mix.iter().map(|(_, w)| w).collect();
        assert_eq!(weights.iter().filter(|&&w| w == 3).count(), 4);
        assert_eq!(weights.iter().filter(|&&w| w == 1).count(), 4);
    }

    #[test]
    fn mix_truth_mass_at_n3_is_two_thirds() {
        let params = PvParams::new(1, 3).unwrap();
        let mix = enumerate(SourceFamily::Pv { params, which: PvWhich::Mix });
        let mut truth_mass: u128 = 0;
        for (atom, w) in mix.iter() {
            if decode_pv(atom).unwrap().truth() {
                truth_mass += w as u128;
            }
        }
        // 18 consistent atoms of weight 4 over total 108: exactly 2/3.
        assert_eq!(truth_mass * 3, mix.total() * 2);
    }

    #[test]
    fn yes_branch_forces_the_chase() {
        let params = PvParams::new(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let inst = sample_pv(&params, PvWhich::Yes, &mut rng).unwrap();
            assert!(inst.truth());
            assert_eq!(inst.label, Some(PvLabel::Yes));
        }
    }

    #[test]
    fn mid_forced_index_hits_chase_about_one_in_n() {
        let params = pcs(1, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 40_000;
        let mut hits = 0u32;
        for _ in 0..trials {
            let draw = sample_mid(&params, &mut rng).unwrap();
            if draw.forced == draw.sample.target() {
                hits += 1;
            }
        }
        let rate = hits as f64 / trials as f64;
        // Binomial(4e4, 1/4): three sigma is about 0.0065.
        assert!((rate - 0.25).abs() < 0.0065, "rate = {rate}");
    }

    #[test]
    fn mid_marginals_match_correlated_source() {
        let params = pcs(1, 2, 1);
        let mid = enumerate(SourceFamily::Mid { params });
        let mu = enumerate(SourceFamily::Pcs { params });
        let alice = |t: &DistTable| {
            t.project(None, |a| encode_pcs_alice(&decode_pcs(a).unwrap()))
        };
        let bob = |t: &DistTable| t.project(None, |a| encode_pcs_bob(&decode_pcs(a).unwrap()));
        assert!(alice(&mid).same_distribution(&alice(&mu)));
        assert!(bob(&mid).same_distribution(&bob(&mu)));
    }

    #[test]
    fn product_marginals_match_correlated_source() {
        let params = pcs(1, 2, 1);
        let prod = enumerate(SourceFamily::PcsProduct { params });
        let mu = enumerate(SourceFamily::Pcs { params });
        let alice = |t: &DistTable| {
            t.project(None, |a| encode_pcs_alice(&decode_pcs(a).unwrap()))
        };
        let bob = |t: &DistTable| t.project(None, |a| encode_pcs_bob(&decode_pcs(a).unwrap()));
        assert!(alice(&prod).same_distribution(&alice(&mu)));
        assert!(bob(&prod).same_distribution(&bob(&mu)));
    }

    #[test]
    fn disjointness_counts_and_validation() {
        let inter = enumerate(SourceFamily::Disj { n: 4, intersecting: true });
        assert_eq!(inter.len(), 4);
        let disj = enumerate(SourceFamily::Disj { n: 4, intersecting: false });
        assert_eq!(disj.len(), 12);
        assert!(matches!(
            sample_disj(6, true, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(SourceError::BadParams(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = sample_disj(8, true, &mut rng).unwrap();
        assert_eq!(inst.u.len(), 2);
        assert_eq!(inst.intersection().len(), 1);
    }

    #[test]
    fn codec_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = sample_pcs(&pcs(3, 5, 3), &mut rng).unwrap();
        assert_eq!(decode_pcs(&encode_pcs(&s)).unwrap(), s);
        let mut inst = sample_pv(&PvParams::new(3, 4).unwrap(), PvWhich::Mix, &mut rng).unwrap();
        inst.label = None; // labels are not part of the atom
        assert_eq!(decode_pv(&encode_pv(&inst)).unwrap(), inst);
        let d = sample_disj(8, false, &mut rng).unwrap();
        assert_eq!(decode_disj(&encode_disj(&d)).unwrap(), d);
    }

    fn chi_square_vs_table<F>(table: &DistTable, trials: usize, mut draw: F) -> f64
    where
        F: FnMut(&mut ChaCha8Rng) -> Vec<u8>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for _ in 0..trials {
            let atom = draw(&mut rng);
            assert!(table.weight_of(&atom) > 0, "sampler produced an off-support atom");
            *counts.entry(atom).or_insert(0) += 1;
        }
        let mut observed = Vec::with_capacity(table.len());
        let mut expected = Vec::with_capacity(table.len());
        for (atom, w) in table.iter() {
            observed.push(counts.get(atom).copied().unwrap_or(0));
            expected.push(trials as f64 * w as f64 / table.total() as f64);
        }
        crate::stats::chi_square_gof_p(&observed, &expected)
    }

    #[test]
    fn samplers_match_enumeration_chi_square() {
        let trials = 100_000;
        let params = pcs(1, 2, 1);
        let mu = enumerate(SourceFamily::Pcs { params });
        let p = chi_square_vs_table(&mu, trials, |rng| {
            encode_pcs(&sample_pcs(&params, rng).unwrap())
        });
        assert!(p > 0.001, "pcs sampler p = {p}");

        let prod = enumerate(SourceFamily::PcsProduct { params });
        let p = chi_square_vs_table(&prod, trials, |rng| {
            encode_pcs(&sample_pcs_product(&params, rng).unwrap())
        });
        assert!(p > 0.001, "product sampler p = {p}");

        let mid = enumerate(SourceFamily::Mid { params });
        let p = chi_square_vs_table(&mid, trials, |rng| {
            encode_pcs(&sample_mid(&params, rng).unwrap().sample)
        });
        assert!(p > 0.001, "mid sampler p = {p}");

        let pv = PvParams::new(1, 3).unwrap();
        for which in [PvWhich::Yes, PvWhich::No, PvWhich::Mix] {
            let table = enumerate(SourceFamily::Pv { params: pv, which });
            let p = chi_square_vs_table(&table, trials, |rng| {
                encode_pv(&sample_pv(&pv, which, rng).unwrap())
            });
            assert!(p > 0.001, "pv {which:?} sampler p = {p}");
        }

        for intersecting in [true, false] {
            let table = enumerate(SourceFamily::Disj { n: 8, intersecting });
            let p = chi_square_vs_table(&table, trials, |rng| {
                encode_disj(&sample_disj(8, intersecting, rng).unwrap())
            });
            assert!(p > 0.001, "disj({intersecting}) sampler p = {p}");
        }
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let family = SourceFamily::Pcs { params: pcs(3, 4, 1) };
        match enumerate_source(&family, 1000) {
            Err(SourceError::SupportExceedsCap { support, cap: 1000 }) => {
                assert_eq!(support, 4 * 13824 * 2 * 64);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }
}
