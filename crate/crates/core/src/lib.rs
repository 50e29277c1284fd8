//! Laboratory for two-party protocols over correlated pointer-chasing
//! sources: exact enumeration of tiny instances, seeded sampling of larger
//! ones, information measures, instance reductions, and exhaustive search
//! over low-communication protocols.

pub mod bits;
pub mod dist;
pub mod engine;
pub mod info;
pub mod lab;
pub mod perm;
pub mod protocols;
pub mod reductions;
pub mod sources;
pub mod stats;

pub use bits::{pointer_width, BitString, PointerCode};
pub use dist::{DistError, DistTable};
pub use engine::{
    run_protocol, validate, EngineError, MessageRound, Party, ProtocolSpec, PublicCoins,
    RandStream, RunRecord, Transcript,
};
pub use info::JointTable;
pub use lab::{
    agreement_probability_exact, empirical_agreement, exact_run_joint,
    exact_transcript_distribution, exhaustive_protocol_search, final_bit_advantage,
    key_min_entropy, mc_tv_estimate, noisy_class_check, pcs_pair, protocol_tv, pv_joint_table,
    pv_mix_noisy_report, pv_pair, pv_pair_with_truth, success_probability, transcript_key_mi,
    ExactFraction, ExactRun, LabError, McTvEstimate, NoisyClassParams, NoisyClassReport,
    ProfileDesc, SearchObjective, SearchOptions, SearchOutcome,
};
pub use perm::{chase, Permutation};
pub use protocols::{
    hash_equality_augment, meet_in_middle_pv, optimal_distinguisher, pointer_chasing_skg,
    AugmentedProtocol, Gf2Hash, OptimalDistinguisher,
};
pub use reductions::{
    check_disj_to_crg, check_pv_to_crg, check_t_removal, condition_on_message, disj_to_crg,
    pv_to_crg, t_removal, ReductionCheck, ReductionError, SharedRandomness,
};
pub use sources::{
    enumerate_source, sample_disj, sample_mid, sample_pcs, sample_pcs_product, sample_pv,
    DisjInstance, PcsParams, PcsSample, PvInstance, PvParams, PvWhich, SourceError, SourceFamily,
};
