//! Two-party protocol execution: strict alternation, round and bit budgets,
//! and three domain-separated randomness streams per run (each party's
//! private stream plus label-addressed public coins both parties can read).

use crate::bits::{pointer_width, BitString};
use crate::perm::Permutation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Party::Alice => write!(f, "alice"),
            Party::Bob => write!(f, "bob"),
        }
    }
}

/// Ordered speaker-tagged messages.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transcript {
    messages: Vec<(Party, BitString)>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, speaker: Party, message: BitString) {
        self.messages.push((speaker, message));
    }

    pub fn messages(&self) -> &[(Party, BitString)] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn bits_used(&self) -> usize {
        self.messages.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn last_message(&self) -> Option<&(Party, BitString)> {
        self.messages.last()
    }

    /// Final bit of the final message, the decision bit of a protocol that
    /// announces its verdict last.
    pub fn last_bit(&self) -> Option<bool> {
        self.messages.last().and_then(|(_, m)| m.last())
    }

    /// Copy with the last message shortened by `drop` bits. Used to recover
    /// a base transcript from one whose tail was extended in place.
    pub fn with_last_truncated(&self, drop: usize) -> Transcript {
        let mut out = self.clone();
        let (_, m) = out.messages.last_mut().expect("nonempty transcript");
        assert!(drop <= m.len(), "cannot drop {} bits from {}", drop, m.len());
        *m = m.truncated(m.len() - drop);
        out
    }

    pub fn without_last(&self) -> Transcript {
        let mut out = self.clone();
        out.messages.pop().expect("nonempty transcript");
        out
    }

    /// Injective byte encoding: per message a speaker byte, a 16-bit length,
    /// and the packed bits. Stable across runs, usable as a table atom.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (speaker, m) in &self.messages {
            out.push(match speaker {
                Party::Alice => 0u8,
                Party::Bob => 1u8,
            });
            let len = u16::try_from(m.len()).expect("message fits u16");
            out.extend_from_slice(&len.to_be_bytes());
            out.extend(m.to_packed_bytes());
        }
        out
    }
}

fn seed_bytes(master: u64, domain: u8, extra: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[..8].copy_from_slice(&master.to_le_bytes());
    out[8] = domain;
    out[9..17].copy_from_slice(&extra.to_le_bytes());
    out
}

/// A party's private randomness: a seeded stream with a drawn-bits counter
/// so the engine can verify that declared-deterministic protocols stay dry.
pub struct RandStream {
    rng: ChaCha8Rng,
    bits_drawn: u64,
}

impl RandStream {
    pub fn new(master_seed: u64, domain: u8) -> Self {
        RandStream {
            rng: ChaCha8Rng::from_seed(seed_bytes(master_seed, domain, 0)),
            bits_drawn: 0,
        }
    }

    fn from_seed(seed: [u8; 32]) -> Self {
        RandStream { rng: ChaCha8Rng::from_seed(seed), bits_drawn: 0 }
    }

    pub fn gen_bit(&mut self) -> bool {
        self.bits_drawn += 1;
        self.rng.gen()
    }

    pub fn gen_bits(&mut self, len: usize) -> BitString {
        BitString::from_bits((0..len).map(|_| self.gen_bit()).collect())
    }

    pub fn gen_range(&mut self, n: usize) -> usize {
        assert!(n > 0);
        self.bits_drawn += pointer_width(n) as u64;
        self.rng.gen_range(0..n)
    }

    /// Uniform permutation by Fisher-Yates over this stream.
    pub fn gen_perm(&mut self, n: usize) -> Permutation {
        let mut image: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.gen_range(i + 1);
            image.swap(i, j);
        }
        Permutation::new(image).expect("shuffle yields a bijection")
    }

    pub fn bits_drawn(&self) -> u64 {
        self.bits_drawn
    }
}

/// Label-addressed public randomness. Every call with the same label under
/// the same master seed yields an identical stream, so both parties read the
/// same shared values without any channel traffic.
pub struct PublicCoins {
    master_seed: u64,
    reads: u64,
}

impl PublicCoins {
    pub fn new(master_seed: u64) -> Self {
        PublicCoins { master_seed, reads: 0 }
    }

    pub fn stream(&mut self, label: &str) -> RandStream {
        self.reads += 1;
        RandStream::from_seed(seed_bytes(self.master_seed, 2, fnv1a64(label.as_bytes())))
    }

    pub fn reads(&self) -> u64 {
        self.reads
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub type MessageFn<T> =
    Arc<dyn Fn(&T, &Transcript, &mut RandStream, &mut PublicCoins) -> BitString + Send + Sync>;
pub type OutputFn<T> = Arc<dyn Fn(&T, &Transcript, &mut PublicCoins) -> BitString + Send + Sync>;

pub enum MessageRound<A, B> {
    Alice(MessageFn<A>),
    Bob(MessageFn<B>),
}

impl<A, B> MessageRound<A, B> {
    pub fn speaker(&self) -> Party {
        match self {
            MessageRound::Alice(_) => Party::Alice,
            MessageRound::Bob(_) => Party::Bob,
        }
    }
}

impl<A, B> Clone for MessageRound<A, B> {
    fn clone(&self) -> Self {
        match self {
            MessageRound::Alice(f) => MessageRound::Alice(f.clone()),
            MessageRound::Bob(f) => MessageRound::Bob(f.clone()),
        }
    }
}

/// An executable two-party protocol: a fixed alternating message schedule
/// plus per-party output maps. A round is one message by one party.
pub struct ProtocolSpec<A, B> {
    pub name: String,
    pub first_speaker: Party,
    pub rounds: Vec<MessageRound<A, B>>,
    pub output_a: OutputFn<A>,
    pub output_b: OutputFn<B>,
    pub round_budget: usize,
    pub bit_budget: usize,
    pub key_len: usize,
    /// When set, the engine asserts that no run touches any randomness.
    pub deterministic: bool,
}

impl<A, B> Clone for ProtocolSpec<A, B> {
    fn clone(&self) -> Self {
        ProtocolSpec {
            name: self.name.clone(),
            first_speaker: self.first_speaker,
            rounds: self.rounds.clone(),
            output_a: self.output_a.clone(),
            output_b: self.output_b.clone(),
            round_budget: self.round_budget,
            bit_budget: self.bit_budget,
            key_len: self.key_len,
            deterministic: self.deterministic,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub transcript: Transcript,
    pub k_a: BitString,
    pub k_b: BitString,
    pub rounds_used: usize,
    pub bits_used: usize,
    pub alice_bits_drawn: u64,
    pub bob_bits_drawn: u64,
    pub public_reads: u64,
}

impl RunRecord {
    pub fn keys_agree(&self) -> bool {
        self.k_a == self.k_b
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("schedule declares {declared} rounds but the budget is {budget}")]
    TooManyRounds { declared: usize, budget: usize },
    #[error("round {round}: expected {expected} to speak")]
    AlternationViolation { round: usize, expected: Party },
    #[error("round {round}: empty message")]
    EmptyMessage { round: usize },
    #[error("round {round}: {used} bits sent, budget {budget}")]
    BitBudgetExceeded { round: usize, used: usize, budget: usize },
    #[error("{party} produced a {got}-bit key, declared {want}")]
    KeyLength { party: Party, got: usize, want: usize },
    #[error("declared deterministic but {0}")]
    DeterminismViolated(String),
}

/// Executes a protocol. Deterministic given (inputs, seed).
pub fn run_protocol<A, B>(
    spec: &ProtocolSpec<A, B>,
    alice_in: &A,
    bob_in: &B,
    seed: u64,
) -> Result<RunRecord, EngineError> {
    if spec.rounds.len() > spec.round_budget {
        return Err(EngineError::TooManyRounds {
            declared: spec.rounds.len(),
            budget: spec.round_budget,
        });
    }
    let mut alice_rand = RandStream::new(seed, 0);
    let mut bob_rand = RandStream::new(seed, 1);
    let mut coins = PublicCoins::new(seed);
    let mut transcript = Transcript::new();
    let mut expected = spec.first_speaker;
    let mut bits_used = 0usize;
    for (idx, round) in spec.rounds.iter().enumerate() {
        let round_no = idx + 1;
        if round.speaker() != expected {
            return Err(EngineError::AlternationViolation { round: round_no, expected });
        }
        let message = match round {
            MessageRound::Alice(f) => f(alice_in, &transcript, &mut alice_rand, &mut coins),
            MessageRound::Bob(f) => f(bob_in, &transcript, &mut bob_rand, &mut coins),
        };
        if message.is_empty() {
            return Err(EngineError::EmptyMessage { round: round_no });
        }
        bits_used += message.len();
        if bits_used > spec.bit_budget {
            return Err(EngineError::BitBudgetExceeded {
                round: round_no,
                used: bits_used,
                budget: spec.bit_budget,
            });
        }
        transcript.push(round.speaker(), message);
        expected = expected.other();
    }
    let k_a = (spec.output_a)(alice_in, &transcript, &mut coins);
    let k_b = (spec.output_b)(bob_in, &transcript, &mut coins);
    for (party, k) in [(Party::Alice, &k_a), (Party::Bob, &k_b)] {
        if k.len() != spec.key_len {
            return Err(EngineError::KeyLength { party, got: k.len(), want: spec.key_len });
        }
    }
    if spec.deterministic {
        if alice_rand.bits_drawn() > 0 || bob_rand.bits_drawn() > 0 {
            return Err(EngineError::DeterminismViolated(format!(
                "private streams drew {} + {} bits",
                alice_rand.bits_drawn(),
                bob_rand.bits_drawn()
            )));
        }
        if coins.reads() > 0 {
            return Err(EngineError::DeterminismViolated(format!(
                "public coins read {} times",
                coins.reads()
            )));
        }
    }
    Ok(RunRecord {
        rounds_used: transcript.len(),
        bits_used,
        transcript,
        k_a,
        k_b,
        alice_bits_drawn: alice_rand.bits_drawn(),
        bob_bits_drawn: bob_rand.bits_drawn(),
        public_reads: coins.reads(),
    })
}

/// Static lint of a schedule. Report-only: each finding is one line.
pub fn validate<A, B>(spec: &ProtocolSpec<A, B>) -> Vec<String> {
    let mut report = Vec::new();
    if spec.rounds.len() > spec.round_budget {
        report.push(format!(
            "schedule has {} rounds, budget {}",
            spec.rounds.len(),
            spec.round_budget
        ));
    }
    let mut expected = spec.first_speaker;
    for (idx, round) in spec.rounds.iter().enumerate() {
        if round.speaker() != expected {
            report.push(format!(
                "round {}: {} speaks, expected {}",
                idx + 1,
                round.speaker(),
                expected
            ));
            expected = round.speaker();
        }
        expected = expected.other();
    }
    if spec.bit_budget == 0 && !spec.rounds.is_empty() {
        report.push("bit budget 0 with a nonempty schedule".into());
    }
    if spec.bit_budget < spec.rounds.len() {
        report.push(format!(
            "bit budget {} cannot carry {} nonempty messages",
            spec.bit_budget,
            spec.rounds.len()
        ));
    }
    report
}
