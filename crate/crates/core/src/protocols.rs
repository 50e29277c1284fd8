//! Concrete protocols: key agreement by chasing the shared pointer, the
//! two-frontier pointer-verification solver, and the hash-equality tail that
//! turns any key protocol into one whose transcript ends with an equality
//! indicator and a distinguisher vote.

use crate::bits::{pointer_width, BitString, PointerCode};
use crate::dist::{DistError, DistTable};
use crate::engine::{
    MessageRound, Party, ProtocolSpec, PublicCoins, RandStream, Transcript,
};
use crate::perm::Permutation;
use crate::sources::{PcsAlice, PcsBob, PcsParams, PvAlice, PvBob, PvParams, SourceError};
use std::collections::BTreeSet;
use std::sync::Arc;

fn odd_position_perm(odd_perms: &[Permutation], pos: usize) -> &Permutation {
    assert!(pos % 2 == 1, "position {pos} is not an odd position");
    &odd_perms[(pos - 1) / 2]
}

fn even_position_perm(even_perms: &[Permutation], pos: usize) -> &Permutation {
    assert!(pos.is_multiple_of(2) && pos >= 2, "position {pos} is not an even position");
    &even_perms[pos / 2 - 1]
}

fn decode_pointer(code: &PointerCode, msg: &BitString) -> usize {
    code.decode(msg).expect("well-formed pointer message")
}

/// Key agreement over the correlated pointer-chasing source: Bob opens with
/// his pointer, each later message applies the speaker's next permutation,
/// and after r+1 messages both parties output the block at the endpoint.
/// Every message is exactly ceil(log2 n) bits; at n = 1 no communication is
/// needed and the schedule is empty.
pub fn pointer_chasing_skg(
    r: usize,
    n: usize,
    l: usize,
) -> Result<ProtocolSpec<PcsAlice, PcsBob>, SourceError> {
    let params = PcsParams::new(r, n, l)?;
    let width = pointer_width(n);
    let mut rounds: Vec<MessageRound<PcsAlice, PcsBob>> = Vec::new();
    if n > 1 {
        let code = PointerCode::new(n);
        rounds.push(MessageRound::Bob(Arc::new(move |bob: &PcsBob, _, _, _| {
            code.encode(bob.start).expect("start pointer in range")
        })));
        for t in 2..=r + 1 {
            let code = PointerCode::new(n);
            let step = move |perm: &Permutation, transcript: &Transcript| {
                let (_, last) = transcript.last_message().expect("previous pointer");
                code.encode(perm.apply(decode_pointer(&code, last))).expect("pointer in range")
            };
            let round = if t % 2 == 0 {
                MessageRound::Alice(Arc::new(move |alice: &PcsAlice, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
                    step(odd_position_perm(&alice.odd_perms, t - 1), tr)
                }))
            } else {
                MessageRound::Bob(Arc::new(move |bob: &PcsBob, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
                    step(even_position_perm(&bob.even_perms, t - 1), tr)
                }))
            };
            rounds.push(round);
        }
    }
    let endpoint = move |transcript: &Transcript| -> usize {
        if n == 1 {
            return 0;
        }
        let code = PointerCode::new(n);
        let (_, last) = transcript.last_message().expect("final pointer");
        decode_pointer(&code, last)
    };
    let output_a = Arc::new(move |alice: &PcsAlice, tr: &Transcript, _: &mut PublicCoins| {
        alice.blocks[endpoint(tr)].clone()
    });
    let output_b = Arc::new(move |bob: &PcsBob, tr: &Transcript, _: &mut PublicCoins| {
        bob.blocks[endpoint(tr)].clone()
    });
    Ok(ProtocolSpec {
        name: format!("pointer-chasing-skg(r={r},n={n},l={l})"),
        first_speaker: Party::Bob,
        rounds,
        output_a,
        output_b,
        round_budget: if n > 1 { r + 1 } else { 0 },
        bit_budget: (r + 1) * width,
        key_len: params.l,
        deterministic: true,
    })
}

/// Pointer verification by advancing both frontiers at once: Bob opens with
/// (i0, j0); each following message carries the forward pointer pushed
/// through the speaker's next permutation and the backward pointer pulled
/// through the speaker's last unused one. The middle-permutation holder
/// closes with the 1-bit verdict. ceil(r/2)+1 messages, (r+1)*width+1 bits.
pub fn meet_in_middle_pv(r: usize, n: usize) -> Result<ProtocolSpec<PvAlice, PvBob>, SourceError> {
    let params = PvParams::new(r, n)?;
    if n < 2 {
        return Err(SourceError::BadParams("pointer verification needs n >= 2".into()));
    }
    let width = pointer_width(n);
    let total_msgs = (r + 3) / 2;
    let code = PointerCode::new(n);
    let encode_pair = move |i: usize, j: usize| {
        let mut m = code.encode(i).expect("pointer in range");
        m.extend(&code.encode(j).expect("pointer in range"));
        m
    };
    let decode_pair = move |msg: &BitString| {
        (
            decode_pointer(&code, &msg.slice(0, width)),
            decode_pointer(&code, &msg.slice(width, 2 * width)),
        )
    };

    let mut rounds: Vec<MessageRound<PvAlice, PvBob>> = Vec::new();
    rounds.push(MessageRound::Bob(Arc::new(move |bob: &PvBob, _, _, _| {
        encode_pair(bob.i0, bob.j0)
    })));
    for k in 2..total_msgs {
        let fwd_pos = k - 1;
        let bwd_pos = r - k + 2;
        let advance = move |fwd: &Permutation, bwd: &Permutation, tr: &Transcript| {
            let (_, last) = tr.last_message().expect("previous frontier");
            let (i, j) = decode_pair(last);
            encode_pair(fwd.apply(i), bwd.invert().apply(j))
        };
        let round = if k % 2 == 0 {
            MessageRound::Alice(Arc::new(move |alice: &PvAlice, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
                advance(
                    odd_position_perm(&alice.odd_perms, fwd_pos),
                    odd_position_perm(&alice.odd_perms, bwd_pos),
                    tr,
                )
            }))
        } else {
            MessageRound::Bob(Arc::new(move |bob: &PvBob, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
                advance(
                    even_position_perm(&bob.even_perms, fwd_pos),
                    even_position_perm(&bob.even_perms, bwd_pos),
                    tr,
                )
            }))
        };
        rounds.push(round);
    }
    let mid_pos = r.div_ceil(2);
    let verdict = move |mid: &Permutation, tr: &Transcript| {
        let (_, last) = tr.last_message().expect("frontier message");
        let (i, j) = decode_pair(last);
        BitString::from_bits(vec![mid.apply(i) == j])
    };
    let final_round = if total_msgs.is_multiple_of(2) {
        MessageRound::Alice(Arc::new(move |alice: &PvAlice, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
            verdict(odd_position_perm(&alice.odd_perms, mid_pos), tr)
        }))
    } else {
        MessageRound::Bob(Arc::new(move |bob: &PvBob, tr: &Transcript, _: &mut RandStream, _: &mut PublicCoins| {
            verdict(even_position_perm(&bob.even_perms, mid_pos), tr)
        }))
    };
    rounds.push(final_round);

    let last_bit = |tr: &Transcript| {
        BitString::from_bits(vec![tr.last_bit().expect("verdict bit")])
    };
    Ok(ProtocolSpec {
        name: format!("meet-in-middle-pv(r={r},n={n})"),
        first_speaker: Party::Bob,
        rounds,
        output_a: Arc::new(move |_: &PvAlice, tr: &Transcript, _: &mut PublicCoins| last_bit(tr)),
        output_b: Arc::new(move |_: &PvBob, tr: &Transcript, _: &mut PublicCoins| last_bit(tr)),
        round_budget: total_msgs,
        bit_budget: (params.r + 1) * width + 1,
        key_len: 1,
        deterministic: true,
    })
}

// ---------------------------------------------------------------------------
// GF(2) hashing and the equality tail

const HASH_LABEL: &str = "gf2-hash";

/// Random GF(2) matrix hash. For fixed x != y each output bit of h(x) and
/// h(y) differs with probability 1/2 independently, so the collision
/// probability is exactly 2^-rows.
pub struct Gf2Hash {
    input_len: usize,
    rows: Vec<BitString>,
}

impl Gf2Hash {
    /// Smallest m with 2^-m <= gamma/20.
    pub fn rows_for_gamma(gamma: f64) -> usize {
        assert!(gamma > 0.0 && gamma < 1.0, "gamma out of range: {gamma}");
        let x = 20.0 / gamma;
        let mut m = x.log2().ceil().max(1.0) as usize;
        while m > 1 && (2f64).powi(m as i32 - 1) >= x {
            m -= 1;
        }
        while (2f64).powi(m as i32) < x {
            m += 1;
        }
        m
    }

    pub fn from_stream(input_len: usize, rows: usize, stream: &mut RandStream) -> Self {
        assert!(rows > 0);
        Gf2Hash { input_len, rows: (0..rows).map(|_| stream.gen_bits(input_len)).collect() }
    }

    /// Both parties draw the same matrix from the shared public stream.
    pub fn from_coins(input_len: usize, rows: usize, coins: &mut PublicCoins) -> Self {
        Self::from_stream(input_len, rows, &mut coins.stream(HASH_LABEL))
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn hash(&self, x: &BitString) -> BitString {
        assert_eq!(x.len(), self.input_len, "hash input length");
        BitString::from_bits(self.rows.iter().map(|row| row.dot(x)).collect())
    }
}

/// A 0/1 test over (key, indicator) pairs, the shape of distinguisher the
/// equality tail transmits a vote for.
pub type KeyTest = Arc<dyn Fn(&BitString, bool) -> bool + Send + Sync>;

/// An augmented protocol plus the geometry needed to read the equality
/// indicator and the vote back out of a finished transcript.
pub struct AugmentedProtocol<A, B> {
    pub spec: ProtocolSpec<A, B>,
    pub hash_bits: usize,
    pub base_last_speaker: Party,
}

impl<A, B> AugmentedProtocol<A, B> {
    /// The equality indicator I': always the first bit of the final message.
    pub fn indicator(&self, tr: &Transcript) -> bool {
        let (_, last) = tr.last_message().expect("augmented transcript");
        last.get(0)
    }

    /// The transmitted vote b_{I'}. When Alice closed the base protocol the
    /// vote pair rides in her extended message and the indicator selects one.
    pub fn vote(&self, tr: &Transcript) -> bool {
        let (_, last) = tr.last_message().expect("augmented transcript");
        match self.base_last_speaker {
            Party::Bob => last.get(1),
            Party::Alice => {
                let msgs = tr.messages();
                let (_, ext) = &msgs[msgs.len() - 2];
                let pair_at = ext.len() - 2;
                if self.indicator(tr) {
                    ext.get(pair_at + 1)
                } else {
                    ext.get(pair_at)
                }
            }
        }
    }
}

/// Appends the equality tail: the base's closing speaker also sends a public
/// hash of their key (plus, when that speaker is Alice, the two possible
/// votes), and the other party answers with one extra round carrying the
/// equality indicator (plus the selected vote when Bob closed the base).
/// Adds one round and hash_bits+2 or hash_bits+3 bits; keys are unchanged.
pub fn hash_equality_augment<A: 'static, B: 'static>(
    base: &ProtocolSpec<A, B>,
    gamma: f64,
    test: KeyTest,
) -> Result<AugmentedProtocol<A, B>, SourceError> {
    if base.rounds.is_empty() {
        return Err(SourceError::BadParams("base protocol never speaks".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SourceError::BadParams(format!("gamma out of range: {gamma}")));
    }
    let m = Gf2Hash::rows_for_gamma(gamma);
    let key_len = base.key_len;
    let base_last_speaker = base.rounds.last().expect("nonempty").speaker();
    let mut rounds = base.rounds.clone();
    let last = rounds.pop().expect("nonempty");

    let added_bits;
    match (last, base_last_speaker) {
        (MessageRound::Bob(f), Party::Bob) => {
            added_bits = m + 2;
            let out_b = base.output_b.clone();
            rounds.push(MessageRound::Bob(Arc::new(
                move |input: &B, tr: &Transcript, rand: &mut RandStream, coins: &mut PublicCoins| {
                    let mut bits = f(input, tr, rand, coins);
                    let mut with_msg = tr.clone();
                    with_msg.push(Party::Bob, bits.clone());
                    let key = out_b(input, &with_msg, coins);
                    bits.extend(&Gf2Hash::from_coins(key_len, m, coins).hash(&key));
                    bits
                },
            )));
            let out_a = base.output_a.clone();
            let t = test.clone();
            rounds.push(MessageRound::Alice(Arc::new(
                move |input: &A, tr: &Transcript, _: &mut RandStream, coins: &mut PublicCoins| {
                    let key = out_a(input, &tr.with_last_truncated(m), coins);
                    let (_, ext) = tr.last_message().expect("extended message");
                    let h_b = ext.slice(ext.len() - m, ext.len());
                    let ind = Gf2Hash::from_coins(key_len, m, coins).hash(&key) == h_b;
                    BitString::from_bits(vec![ind, t(&key, ind)])
                },
            )));
        }
        (MessageRound::Alice(f), Party::Alice) => {
            added_bits = m + 3;
            let out_a = base.output_a.clone();
            let t = test.clone();
            rounds.push(MessageRound::Alice(Arc::new(
                move |input: &A, tr: &Transcript, rand: &mut RandStream, coins: &mut PublicCoins| {
                    let mut bits = f(input, tr, rand, coins);
                    let mut with_msg = tr.clone();
                    with_msg.push(Party::Alice, bits.clone());
                    let key = out_a(input, &with_msg, coins);
                    bits.extend(&Gf2Hash::from_coins(key_len, m, coins).hash(&key));
                    bits.push(t(&key, false));
                    bits.push(t(&key, true));
                    bits
                },
            )));
            let out_b = base.output_b.clone();
            rounds.push(MessageRound::Bob(Arc::new(
                move |input: &B, tr: &Transcript, _: &mut RandStream, coins: &mut PublicCoins| {
                    let key = out_b(input, &tr.with_last_truncated(m + 2), coins);
                    let (_, ext) = tr.last_message().expect("extended message");
                    let h_a = ext.slice(ext.len() - m - 2, ext.len() - 2);
                    let ind = Gf2Hash::from_coins(key_len, m, coins).hash(&key) == h_a;
                    BitString::from_bits(vec![ind])
                },
            )));
        }
        _ => unreachable!("speaker matches the popped round"),
    }

    let ext_bits = match base_last_speaker {
        Party::Bob => m,
        Party::Alice => m + 2,
    };
    let inner_a = base.output_a.clone();
    let output_a: crate::engine::OutputFn<A> = Arc::new(move |input: &A, tr: &Transcript, coins: &mut PublicCoins| {
        inner_a(input, &tr.without_last().with_last_truncated(ext_bits), coins)
    });
    let inner_b = base.output_b.clone();
    let output_b: crate::engine::OutputFn<B> = Arc::new(move |input: &B, tr: &Transcript, coins: &mut PublicCoins| {
        inner_b(input, &tr.without_last().with_last_truncated(ext_bits), coins)
    });

    Ok(AugmentedProtocol {
        spec: ProtocolSpec {
            name: format!("{}+hash-eq", base.name),
            first_speaker: base.first_speaker,
            rounds,
            output_a,
            output_b,
            round_budget: base.round_budget + 1,
            bit_budget: base.bit_budget + added_bits,
            key_len,
            deterministic: false,
        },
        hash_bits: m,
        base_last_speaker,
    })
}

// ---------------------------------------------------------------------------
// Optimal distinguishing

/// The likelihood test T(x) = 1 iff P(x) >= Q(x), which attains advantage
/// E_P[T] - E_Q[T] = TV(P, Q) exactly. Atoms outside both supports are ties
/// and map to 1.
pub struct OptimalDistinguisher {
    zeros: BTreeSet<Vec<u8>>,
    advantage_num: u128,
    advantage_den: u128,
}

impl OptimalDistinguisher {
    pub fn classify(&self, atom: &[u8]) -> bool {
        !self.zeros.contains(atom)
    }

    pub fn advantage(&self) -> f64 {
        self.advantage_num as f64 / self.advantage_den as f64
    }

    pub fn advantage_exact(&self) -> (u128, u128) {
        (self.advantage_num, self.advantage_den)
    }

    /// Adapter to the (key, indicator) shape the equality tail expects,
    /// classifying the standard key-plus-indicator atom encoding.
    pub fn into_key_test(self) -> KeyTest {
        Arc::new(move |key: &BitString, ind: bool| self.classify(&key_ind_atom(key, ind)))
    }
}

/// Canonical atom for a (key, indicator) pair.
pub fn key_ind_atom(key: &BitString, ind: bool) -> Vec<u8> {
    let mut atom = key.to_packed_bytes();
    atom.push(u8::from(ind));
    atom
}

pub fn optimal_distinguisher(
    p: &DistTable,
    q: &DistTable,
) -> Result<OptimalDistinguisher, DistError> {
    if let (Some(sp), Some(sq)) = (p.shape(), q.shape()) {
        if sp != sq {
            return Err(DistError::ShapeMismatch(sp.to_owned(), sq.to_owned()));
        }
    }
    let mut zeros = BTreeSet::new();
    let mut num: u128 = 0;
    for (atom, wq) in q.iter() {
        let wp = p.weight_of(atom);
        // P(x) < Q(x) in integers: wp * total_q < wq * total_p.
        if (wp as u128) * q.total() < (wq as u128) * p.total() {
            zeros.insert(atom.to_vec());
        }
    }
    for (atom, wp) in p.iter() {
        let wq = q.weight_of(atom);
        let lhs = (wp as u128) * q.total();
        let rhs = (wq as u128) * p.total();
        if lhs > rhs {
            num += lhs - rhs;
        }
    }
    let den = p.total() * q.total();
    let g = gcd(num.max(1), den);
    Ok(OptimalDistinguisher {
        zeros,
        advantage_num: if num == 0 { 0 } else { num / g },
        advantage_den: if num == 0 { 1 } else { den / g },
    })
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_protocol;
    use crate::sources::{sample_pcs, sample_pv, PvWhich};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn skg_agrees_and_transcript_is_the_pointer_walk() {
        let spec = pointer_chasing_skg(3, 4, 2).unwrap();
        let params = PcsParams::new(3, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let code = PointerCode::new(4);
        for seed in 0..100 {
            let s = sample_pcs(&params, &mut rng).unwrap();
            let rec = run_protocol(&spec, &s.alice, &s.bob, seed).unwrap();
            assert!(rec.keys_agree());
            assert_eq!(rec.k_a, s.alice.blocks[s.target()]);
            assert_eq!(rec.rounds_used, 4);
            assert_eq!(rec.bits_used, 8);
            // Messages are exactly the chased prefix i_0, i_1, i_2, i_3.
            let perms = s.perms_in_order();
            let mut ptr = s.bob.start;
            for (idx, (_, msg)) in rec.transcript.messages().iter().enumerate() {
                if idx > 0 {
                    ptr = perms[idx - 1].apply(ptr);
                }
                assert_eq!(code.decode(msg).unwrap(), ptr);
            }
        }
    }

    #[test]
    fn skg_degenerate_single_cell() {
        let spec = pointer_chasing_skg(2, 1, 3).unwrap();
        let params = PcsParams::new(2, 1, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = sample_pcs(&params, &mut rng).unwrap();
        let rec = run_protocol(&spec, &s.alice, &s.bob, 0).unwrap();
        assert!(rec.transcript.is_empty());
        assert!(rec.keys_agree());
    }

    #[test]
    fn meet_in_middle_is_always_correct() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for (r, n) in [(1, 2), (1, 4), (3, 4), (5, 3)] {
            let spec = meet_in_middle_pv(r, n).unwrap();
            let params = PvParams::new(r, n).unwrap();
            for seed in 0..250 {
                let inst = sample_pv(&params, PvWhich::Mix, &mut rng).unwrap();
                let rec = run_protocol(&spec, &inst.alice, &inst.bob, seed).unwrap();
                assert_eq!(rec.transcript.last_bit(), Some(inst.truth()));
                assert_eq!(rec.rounds_used, (r + 3) / 2);
                assert_eq!(rec.bits_used, (r + 1) * pointer_width(n) + 1);
                assert!(rec.bits_used <= (r + 3) * pointer_width(n));
            }
        }
    }

    #[test]
    fn meet_in_middle_no_instances_rarely_pass() {
        let spec = meet_in_middle_pv(3, 4).unwrap();
        let params = PvParams::new(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let trials = 10_000;
        let mut ones = 0u32;
        for seed in 0..trials {
            let inst = sample_pv(&params, PvWhich::No, &mut rng).unwrap();
            let rec = run_protocol(&spec, &inst.alice, &inst.bob, seed).unwrap();
            if rec.transcript.last_bit() == Some(true) {
                ones += 1;
            }
        }
        // Chase endpoint is uniform, so a no-instance passes w.p. 1/4.
        let rate = ones as f64 / trials as f64;
        let sigma = (0.25 * 0.75 / trials as f64).sqrt();
        assert!((rate - 0.25).abs() < 3.0 * sigma, "rate = {rate}");
    }

    #[test]
    fn even_r_is_rejected() {
        assert!(meet_in_middle_pv(2, 4).is_err());
        assert!(meet_in_middle_pv(3, 1).is_err());
    }

    #[test]
    fn hash_row_count() {
        assert_eq!(Gf2Hash::rows_for_gamma(0.1), 8); // 20/0.1 = 200, 2^8 = 256
        assert_eq!(Gf2Hash::rows_for_gamma(0.05), 9); // 400
        assert_eq!(Gf2Hash::rows_for_gamma(20.0 / 256.0), 8); // exactly 256
        assert_eq!(Gf2Hash::rows_for_gamma(0.9), 5); // 22.2, 2^5 = 32
    }

    #[test]
    fn hash_collisions_at_expected_rate() {
        let x = BitString::from_u64(0xA5, 8);
        let y = BitString::from_u64(0x5A, 8);
        let mut collisions = 0u32;
        let trials = 20_000;
        for seed in 0..trials {
            let mut stream = RandStream::new(seed as u64, 7);
            let h = Gf2Hash::from_stream(8, 8, &mut stream);
            assert_eq!(h.hash(&x), h.hash(&x));
            if h.hash(&x) == h.hash(&y) {
                collisions += 1;
            }
        }
        let rate = collisions as f64 / trials as f64;
        let p = 1.0 / 256.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() < 4.0 * sigma, "rate = {rate}");
    }

    /// Base protocol where Bob ships a constant bit and each party outputs
    /// its own input as the key; last speaker Bob.
    fn keys_only_base_bob_last() -> ProtocolSpec<BitString, BitString> {
        ProtocolSpec {
            name: "keys-only".into(),
            first_speaker: Party::Bob,
            rounds: vec![MessageRound::Bob(Arc::new(|_, _, _, _| {
                BitString::from_bits(vec![true])
            }))],
            output_a: Arc::new(|k: &BitString, _, _| k.clone()),
            output_b: Arc::new(|k: &BitString, _, _| k.clone()),
            round_budget: 1,
            bit_budget: 1,
            key_len: 8,
            deterministic: true,
        }
    }

    /// Two-round variant whose last speaker is Alice.
    fn keys_only_base_alice_last() -> ProtocolSpec<BitString, BitString> {
        let mut spec = keys_only_base_bob_last();
        spec.rounds.push(MessageRound::Alice(Arc::new(|_, _, _, _| {
            BitString::from_bits(vec![true])
        })));
        spec.round_budget = 2;
        spec.bit_budget = 2;
        spec
    }

    fn const_test(value: bool) -> KeyTest {
        Arc::new(move |_, _| value)
    }

    #[test]
    fn equal_keys_always_accept() {
        let k = BitString::from_u64(0x3C, 8);
        for base in [keys_only_base_bob_last(), keys_only_base_alice_last()] {
            let aug = hash_equality_augment(&base, 0.1, const_test(true)).unwrap();
            for seed in 0..200 {
                let rec = run_protocol(&aug.spec, &k, &k, seed).unwrap();
                assert!(aug.indicator(&rec.transcript));
                assert!(aug.vote(&rec.transcript));
                assert_eq!(rec.k_a, k);
                assert_eq!(rec.k_b, k);
            }
        }
    }

    #[test]
    fn unequal_keys_rarely_collide() {
        let ka = BitString::from_u64(0x11, 8);
        let kb = BitString::from_u64(0xEE, 8);
        for base in [keys_only_base_bob_last(), keys_only_base_alice_last()] {
            let aug = hash_equality_augment(&base, 0.1, const_test(true)).unwrap();
            assert_eq!(aug.hash_bits, 8);
            let trials = 10_000;
            let mut accepts = 0u32;
            for seed in 0..trials {
                let rec = run_protocol(&aug.spec, &ka, &kb, seed as u64).unwrap();
                if aug.indicator(&rec.transcript) {
                    accepts += 1;
                }
            }
            let rate = accepts as f64 / trials as f64;
            let sigma = ((1.0 / 256.0) * (255.0 / 256.0) / trials as f64).sqrt();
            assert!(rate <= 1.0 / 200.0 + 3.0 * sigma, "rate = {rate}");
        }
    }

    #[test]
    fn augment_budgets_and_prefix_preservation() {
        let ka = BitString::from_u64(0x11, 8);
        let kb = BitString::from_u64(0xEE, 8);
        for (base, extra) in
            [(keys_only_base_bob_last(), 10), (keys_only_base_alice_last(), 11)]
        {
            let base_rec = run_protocol(&base, &ka, &kb, 5).unwrap();
            let aug = hash_equality_augment(&base, 0.1, const_test(true)).unwrap();
            let rec = run_protocol(&aug.spec, &ka, &kb, 5).unwrap();
            assert_eq!(rec.rounds_used, base_rec.rounds_used + 1);
            assert_eq!(rec.bits_used, base_rec.bits_used + extra);
            assert!(extra <= aug.hash_bits + 3);
            // The base transcript is the augmented one minus the tail.
            let ext = match aug.base_last_speaker {
                Party::Bob => aug.hash_bits,
                Party::Alice => aug.hash_bits + 2,
            };
            let recovered = rec.transcript.without_last().with_last_truncated(ext);
            assert_eq!(recovered, base_rec.transcript);
            // Keys pass through unchanged.
            assert_eq!(rec.k_a, base_rec.k_a);
            assert_eq!(rec.k_b, base_rec.k_b);
        }
    }

    #[test]
    fn vote_readout_tracks_the_test() {
        // A test that votes the indicator itself: vote must equal indicator.
        let echo: KeyTest = Arc::new(|_, ind| ind);
        let ka = BitString::from_u64(0x11, 8);
        let kb = BitString::from_u64(0xEE, 8);
        for base in [keys_only_base_bob_last(), keys_only_base_alice_last()] {
            let aug = hash_equality_augment(&base, 0.1, echo.clone()).unwrap();
            for seed in 0..300 {
                let rec = run_protocol(&aug.spec, &ka, &kb, seed).unwrap();
                assert_eq!(aug.vote(&rec.transcript), aug.indicator(&rec.transcript));
                let rec_eq = run_protocol(&aug.spec, &ka, &ka, seed).unwrap();
                assert!(aug.vote(&rec_eq.transcript));
            }
        }
    }

    #[test]
    fn distinguisher_is_the_likelihood_test() {
        let p = DistTable::from_weights(&[3, 1]).unwrap();
        let q = DistTable::from_weights(&[2, 2]).unwrap();
        let t = optimal_distinguisher(&p, &q).unwrap();
        assert!(t.classify(&[0]));
        assert!(!t.classify(&[1]));
        assert!((t.advantage() - 0.25).abs() < 1e-15);
        assert_eq!(t.advantage_exact(), (1, 4));
        // Unseen atoms are ties and map to 1.
        assert!(t.classify(&[9]));

        let same = optimal_distinguisher(&p, &p).unwrap();
        assert_eq!(same.advantage_exact(), (0, 1));

        let a = DistTable::from_weights(&[1, 0]).unwrap();
        let b = DistTable::from_weights(&[0, 1]).unwrap();
        let point = optimal_distinguisher(&a, &b).unwrap();
        assert_eq!(point.advantage_exact(), (1, 1));

        let shaped_p = DistTable::from_weighted(Some("u"), vec![(vec![0], 1)]).unwrap();
        let shaped_q = DistTable::from_weighted(Some("v"), vec![(vec![0], 1)]).unwrap();
        assert!(matches!(
            optimal_distinguisher(&shaped_p, &shaped_q),
            Err(DistError::ShapeMismatch(_, _))
        ));
    }

    #[test]
    fn distinguisher_advantage_equals_tv_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        use rand::Rng;
        for _ in 0..500 {
            let len = rng.gen_range(2..9);
            let wp: Vec<u64> = (0..len).map(|_| rng.gen_range(0..6)).collect();
            let wq: Vec<u64> = (0..len).map(|_| rng.gen_range(0..6)).collect();
            if wp.iter().all(|&w| w == 0) || wq.iter().all(|&w| w == 0) {
                continue;
            }
            let p = DistTable::from_weights(&wp).unwrap();
            let q = DistTable::from_weights(&wq).unwrap();
            let t = optimal_distinguisher(&p, &q).unwrap();
            let (num, den) = t.advantage_exact();
            let (tn, td) = p.tv_exact(&q);
            // Equal as rationals (neither side need be reduced the same way).
            assert_eq!(num * td, tn * den, "advantage != tv");
        }
    }
}
