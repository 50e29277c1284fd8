//! Subcommand bodies: validate the config, call the library, format output.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crglab_core::engine::{run_protocol, Party};
use crglab_core::lab::{
    agreement_probability_exact, exact_run_joint, exhaustive_protocol_search,
    final_bit_advantage, key_min_entropy, mc_tv_estimate, noisy_class_check, pcs_pair,
    protocol_tv, pv_joint_table, pv_mix_noisy_report, pv_pair, pv_pair_with_truth,
    success_probability, transcript_key_mi, ExactFraction, NoisyClassParams, SearchObjective,
    SearchOptions,
};
use crglab_core::protocols::{hash_equality_augment, meet_in_middle_pv, pointer_chasing_skg, KeyTest};
use crglab_core::sources::{
    enumerate_source, sample_disj, sample_mid, sample_pcs, sample_pcs_product, sample_pv,
    support_size, PcsParams, PvParams, PvWhich, SourceFamily,
};

use crate::{
    fmt_sig, json_line, resolve_cap, Branch, CheckCfg, CliError, Family, Format, Objective,
    ProtocolKind, ReduceCfg, ReduceKind, RunCfg, SampleCfg, SearchCfg, TvCfg, Which,
};

fn pick_format(
    requested: Option<Format>,
    default: Format,
    allowed: &[Format],
) -> Result<Format, CliError> {
    let format = requested.unwrap_or(default);
    if allowed.contains(&format) {
        Ok(format)
    } else {
        Err(CliError::Validation(format!(
            "format {format:?} does not fit this command; allowed: {allowed:?}"
        )))
    }
}

fn to_pv(which: Which) -> PvWhich {
    match which {
        Which::Yes => PvWhich::Yes,
        Which::No => PvWhich::No,
        Which::Mix => PvWhich::Mix,
    }
}

fn which_name(which: Which) -> &'static str {
    match which {
        Which::Yes => "yes",
        Which::No => "no",
        Which::Mix => "mix",
    }
}

fn frac_json(f: &ExactFraction) -> serde_json::Value {
    json!({ "num": f.num.to_string(), "den": f.den.to_string(), "value": f.value() })
}

/// Joins JSON values per the chosen format: one per line, or a single
/// document (bare when there is exactly one value, an array otherwise).
fn emit_values(mut values: Vec<serde_json::Value>, format: Format) -> String {
    match format {
        Format::Jsonl => {
            values.into_iter().map(json_line).collect::<Vec<_>>().join("\n")
        }
        _ if values.len() == 1 => json_line(values.pop().expect("one value")),
        _ => json_line(serde_json::Value::Array(values)),
    }
}

// ---------------------------------------------------------------------------

pub fn cmd_sample(cfg: &SampleCfg) -> Result<String, CliError> {
    let format = pick_format(cfg.output.format, Format::Jsonl, &[Format::Jsonl, Format::Json])?;
    if cfg.count == 0 {
        return Err(CliError::Validation("--count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = Vec::with_capacity(cfg.count);
    for index in 0..cfg.count {
        let record = match cfg.family {
            Family::Pcs => {
                let params = PcsParams::new(cfg.r, cfg.n, cfg.l)?;
                json!({ "family": "pcs", "index": index, "draw": sample_pcs(&params, &mut rng)? })
            }
            Family::PcsProduct => {
                let params = PcsParams::new(cfg.r, cfg.n, cfg.l)?;
                json!({
                    "family": "pcs-product",
                    "index": index,
                    "draw": sample_pcs_product(&params, &mut rng)?,
                })
            }
            Family::Mid => {
                let params = PcsParams::new(cfg.r, cfg.n, cfg.l)?;
                json!({ "family": "mid", "index": index, "draw": sample_mid(&params, &mut rng)? })
            }
            Family::Pv => {
                let params = PvParams::new(cfg.r, cfg.n)?;
                let which = cfg.which.unwrap_or(Which::Mix);
                json!({
                    "family": "pv",
                    "which": which_name(which),
                    "index": index,
                    "draw": sample_pv(&params, to_pv(which), &mut rng)?,
                })
            }
            Family::Disj => {
                json!({
                    "family": "disj",
                    "index": index,
                    "draw": sample_disj(cfg.n, cfg.intersecting, &mut rng)?,
                })
            }
        };
        values.push(record);
    }
    Ok(emit_values(values, format))
}

// ---------------------------------------------------------------------------

pub fn cmd_run(cfg: &RunCfg) -> Result<String, CliError> {
    let default_format = if cfg.records { Format::Jsonl } else { Format::Json };
    let allowed: &[Format] =
        if cfg.records { &[Format::Jsonl] } else { &[Format::Json, Format::Jsonl] };
    let format = pick_format(cfg.output.format, default_format, allowed)?;
    if cfg.records && cfg.exact {
        return Err(CliError::Validation("--records only applies to sampled runs".into()));
    }
    if cfg.gamma.is_some() && cfg.protocol == ProtocolKind::Meet {
        return Err(CliError::Validation(
            "the equality tail augments the key-generation protocol".into(),
        ));
    }
    match cfg.protocol {
        ProtocolKind::Chasing => run_chasing(cfg, format),
        ProtocolKind::Meet => run_meet(cfg, format),
    }
}

fn run_chasing(cfg: &RunCfg, format: Format) -> Result<String, CliError> {
    let spec = pointer_chasing_skg(cfg.r, cfg.n, cfg.l)?;
    let params = PcsParams::new(cfg.r, cfg.n, cfg.l)?;
    if cfg.exact {
        if cfg.gamma.is_some() {
            return Err(CliError::Validation(
                "the equality tail draws public coins; use a sampled run".into(),
            ));
        }
        let cap = resolve_cap(cfg.cap)?;
        let d = enumerate_source(&SourceFamily::Pcs { params }, cap)?;
        let run = exact_run_joint(&spec, &d, pcs_pair)?;
        let agreement = agreement_probability_exact(&spec, &d, pcs_pair)?;
        let (a, b) = pcs_pair(d.iter().next().expect("nonempty table").0)?;
        let probe = run_protocol(&spec, &a, &b, 0)?;
        let summary = json!({
            "protocol": "chasing",
            "mode": "exact",
            "r": cfg.r, "n": cfg.n, "l": cfg.l,
            "atoms": d.len(),
            "agreement": frac_json(&agreement),
            "transcript_key_mi_bits": transcript_key_mi(&run, Party::Alice),
            "key_min_entropy_bits": key_min_entropy(&run, Party::Alice),
            "bits_used": probe.bits_used,
            "rounds_used": probe.rounds_used,
        });
        return Ok(emit_values(vec![summary], format));
    }

    if cfg.trials == 0 {
        return Err(CliError::Validation("--trials must be positive".into()));
    }
    let tail = match cfg.gamma {
        None => None,
        Some(gamma) => {
            let verdict_is_match: KeyTest = Arc::new(|_, matched| matched);
            Some(hash_equality_augment(&spec, gamma, verdict_is_match)?)
        }
    };
    let run_spec = tail.as_ref().map_or(&spec, |aug| &aug.spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = Vec::new();
    let mut agree = 0usize;
    let mut equal_votes = 0usize;
    let mut probe_budget = None;
    for index in 0..cfg.trials {
        let s = sample_pcs(&params, &mut rng)?;
        let rec = run_protocol(run_spec, &s.alice, &s.bob, rng.gen())?;
        if rec.keys_agree() {
            agree += 1;
        }
        let indicator = tail.as_ref().map(|aug| aug.indicator(&rec.transcript));
        if indicator == Some(true) {
            equal_votes += 1;
        }
        probe_budget.get_or_insert((rec.bits_used, rec.rounds_used));
        if cfg.records {
            let mut line =
                json!({ "index": index, "keys_agree": rec.keys_agree(), "record": rec });
            if let Some(flag) = indicator {
                line["equality_indicator"] = json!(flag);
            }
            values.push(line);
        }
    }
    let (bits_used, rounds_used) = probe_budget.expect("at least one trial");
    let mut summary = json!({
        "protocol": "chasing",
        "mode": "sampled",
        "r": cfg.r, "n": cfg.n, "l": cfg.l,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "agreement_rate": agree as f64 / cfg.trials as f64,
        "bits_used": bits_used,
        "rounds_used": rounds_used,
    });
    if let Some(aug) = &tail {
        summary["gamma"] = json!(cfg.gamma.expect("tail present"));
        summary["hash_bits"] = json!(aug.hash_bits);
        summary["equality_rate"] = json!(equal_votes as f64 / cfg.trials as f64);
    }
    values.push(summary);
    Ok(emit_values(values, format))
}

fn run_meet(cfg: &RunCfg, format: Format) -> Result<String, CliError> {
    let spec = meet_in_middle_pv(cfg.r, cfg.n)?;
    let params = PvParams::new(cfg.r, cfg.n)?;
    if cfg.exact {
        let cap = resolve_cap(cfg.cap)?;
        let family = SourceFamily::Pv { params, which: to_pv(cfg.which) };
        let d = enumerate_source(&family, cap)?;
        let accuracy = success_probability(&spec, &d, pv_pair_with_truth)?;
        let (a, b) = pv_pair(d.iter().next().expect("nonempty table").0)?;
        let probe = run_protocol(&spec, &a, &b, 0)?;
        let summary = json!({
            "protocol": "meet",
            "mode": "exact",
            "r": cfg.r, "n": cfg.n,
            "which": which_name(cfg.which),
            "atoms": d.len(),
            "accuracy": frac_json(&accuracy),
            "bits_used": probe.bits_used,
            "rounds_used": probe.rounds_used,
        });
        return Ok(emit_values(vec![summary], format));
    }

    if cfg.trials == 0 {
        return Err(CliError::Validation("--trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = Vec::new();
    let mut correct = 0usize;
    let mut probe_budget = None;
    for index in 0..cfg.trials {
        let inst = sample_pv(&params, to_pv(cfg.which), &mut rng)?;
        let truth = inst.truth();
        let rec = run_protocol(&spec, &inst.alice, &inst.bob, rng.gen())?;
        let verdict = rec.transcript.last_bit().expect("verdict bit");
        if verdict == truth {
            correct += 1;
        }
        probe_budget.get_or_insert((rec.bits_used, rec.rounds_used));
        if cfg.records {
            values.push(json!({
                "index": index,
                "truth": truth,
                "verdict": verdict,
                "record": rec,
            }));
        }
    }
    let (bits_used, rounds_used) = probe_budget.expect("at least one trial");
    values.push(json!({
        "protocol": "meet",
        "mode": "sampled",
        "r": cfg.r, "n": cfg.n,
        "which": which_name(cfg.which),
        "trials": cfg.trials,
        "seed": cfg.seed,
        "accuracy_rate": correct as f64 / cfg.trials as f64,
        "bits_used": bits_used,
        "rounds_used": rounds_used,
    }));
    Ok(emit_values(values, format))
}

// ---------------------------------------------------------------------------

pub fn cmd_tv(cfg: &TvCfg) -> Result<String, CliError> {
    let format = pick_format(cfg.output.format, Format::Json, &[Format::Json])?;
    let spec = meet_in_middle_pv(cfg.r, cfg.n)?;
    let params = PvParams::new(cfg.r, cfg.n)?;
    let cap = resolve_cap(cfg.cap)?;
    let d1 = enumerate_source(&SourceFamily::Pv { params, which: to_pv(cfg.first) }, cap)?;
    let d2 = enumerate_source(&SourceFamily::Pv { params, which: to_pv(cfg.second) }, cap)?;
    let exact = protocol_tv(&spec, &d1, &d2, pv_pair)?;
    let advantage = final_bit_advantage(&spec, &d1, &d2, pv_pair)?;
    let mc = match cfg.trials {
        None => serde_json::Value::Null,
        Some(trials) => {
            let est = mc_tv_estimate(
                &spec,
                |rng| {
                    let inst = sample_pv(&params, to_pv(cfg.first), rng)?;
                    Ok((inst.alice, inst.bob))
                },
                |rng| {
                    let inst = sample_pv(&params, to_pv(cfg.second), rng)?;
                    Ok((inst.alice, inst.bob))
                },
                trials,
                cfg.seed,
            )?;
            serde_json::to_value(est).expect("estimate serializes")
        }
    };
    let report = json!({
        "r": cfg.r, "n": cfg.n,
        "first": which_name(cfg.first),
        "second": which_name(cfg.second),
        "exact": frac_json(&exact),
        "verdict_advantage": frac_json(&advantage),
        "mc": mc,
        "seed": cfg.seed,
    });
    Ok(emit_values(vec![report], format))
}

// ---------------------------------------------------------------------------

pub fn cmd_search(cfg: &SearchCfg) -> Result<String, CliError> {
    let format = pick_format(cfg.output.format, Format::Csv, &[Format::Csv, Format::Json])?;
    if cfg.rounds.is_empty() || cfg.bits.is_empty() {
        return Err(CliError::Validation("--rounds and --bits must be nonempty".into()));
    }
    let cap = resolve_cap(cfg.cap)?;
    let params = PvParams::new(cfg.r, cfg.n)?;
    let enum_cap = cap.max(10_000_000);
    let mix;
    let pair;
    let objective = match cfg.objective {
        Objective::Success => {
            mix = enumerate_source(&SourceFamily::Pv { params, which: PvWhich::Mix }, enum_cap)?;
            SearchObjective::Success { mix: &mix }
        }
        Objective::Distinguish => {
            pair = (
                enumerate_source(&SourceFamily::Pv { params, which: PvWhich::Yes }, enum_cap)?,
                enumerate_source(&SourceFamily::Pv { params, which: PvWhich::No }, enum_cap)?,
            );
            SearchObjective::Distinguish { d1: &pair.0, d2: &pair.1 }
        }
    };
    let opts = SearchOptions { cap, symmetry_prune: cfg.prune, ..SearchOptions::default() };

    let mut grid: Vec<(usize, usize)> = Vec::new();
    let mut rounds = cfg.rounds.clone();
    let mut bits = cfg.bits.clone();
    rounds.sort_unstable();
    rounds.dedup();
    bits.sort_unstable();
    bits.dedup();
    for &rr in &rounds {
        for &cc in &bits {
            grid.push((rr, cc));
        }
    }

    let mut rows = Vec::with_capacity(grid.len());
    for (rounds, bits) in grid {
        let start = Instant::now();
        let out = exhaustive_protocol_search(&objective, rounds, bits, &opts)?;
        let wall_ms = start.elapsed().as_millis() as u64;
        rows.push((rounds, bits, out, wall_ms));
    }

    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["r", "c", "n", "optimum", "enumeration_size", "wall_time_ms"])
                .map_err(|e| CliError::Io(e.to_string()))?;
            for (rounds, bits, out, wall_ms) in &rows {
                w.write_record([
                    rounds.to_string(),
                    bits.to_string(),
                    cfg.n.to_string(),
                    fmt_sig(out.optimum.value()),
                    out.enumeration_size.to_string(),
                    wall_ms.to_string(),
                ])
                .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv is utf-8"))
        }
        _ => {
            let values = rows
                .iter()
                .map(|(rounds, bits, out, wall_ms)| {
                    json!({
                        "r": rounds, "c": bits, "n": cfg.n,
                        "objective": out.objective,
                        "optimum": frac_json(&out.optimum),
                        "enumeration_size": out.enumeration_size,
                        "evaluated": out.evaluated,
                        "profile": out.profile,
                        "wall_time_ms": wall_ms,
                    })
                })
                .collect();
            Ok(emit_values(values, Format::Json))
        }
    }
}

// ---------------------------------------------------------------------------

pub fn cmd_check(cfg: &CheckCfg) -> Result<String, CliError> {
    let format = pick_format(cfg.output.format, Format::Json, &[Format::Json])?;
    let delta = cfg.delta.unwrap_or(2.0 / cfg.n as f64);
    let mut params = NoisyClassParams::new(cfg.n, cfg.r, delta, cfg.big_c);
    if let Some(pair_cap) = cfg.pair_cap {
        params.independence_pair_cap = pair_cap;
    }
    let cap = resolve_cap(cfg.cap)?;
    let pv = PvParams::new(cfg.r, cfg.n)?;
    let family = SourceFamily::Pv { params: pv, which: PvWhich::Mix };
    let enumerable = support_size(&family).is_some_and(|s| s <= cap as u128);

    let (path, report) = if cfg.reduced || !enumerable {
        ("reduced", pv_mix_noisy_report(&params)?)
    } else {
        let d = enumerate_source(&family, cap)?;
        let table = pv_joint_table(&d)?;
        ("generic", noisy_class_check(&table, &params)?)
    };
    let value = json!({
        "path": path,
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    Ok(emit_values(vec![value], format))
}

// ---------------------------------------------------------------------------

pub fn cmd_reduce(cfg: &ReduceCfg) -> Result<String, CliError> {
    let format = pick_format(cfg.output.format, Format::Jsonl, &[Format::Jsonl, Format::Json])?;
    use crglab_core::reductions::{check_disj_to_crg, check_pv_to_crg, check_t_removal};

    let branches: Vec<(&str, bool)> = match (cfg.kind, cfg.branch) {
        (ReduceKind::TRemoval, Branch::Both) => vec![("correlated", true), ("product", false)],
        (ReduceKind::TRemoval, Branch::Correlated) => vec![("correlated", true)],
        (ReduceKind::TRemoval, Branch::Product) => vec![("product", false)],
        (ReduceKind::Sparse, Branch::Both) => vec![("intersecting", true), ("disjoint", false)],
        (ReduceKind::Sparse, Branch::Intersecting) => vec![("intersecting", true)],
        (ReduceKind::Sparse, Branch::Disjoint) => vec![("disjoint", false)],
        (ReduceKind::Verification, Branch::Both) => vec![("truthful", true), ("uniform", false)],
        (ReduceKind::Verification, Branch::Truthful) => vec![("truthful", true)],
        (ReduceKind::Verification, Branch::Uniform) => vec![("uniform", false)],
        (kind, branch) => {
            return Err(CliError::Validation(format!(
                "branch {branch:?} does not belong to {kind:?}"
            )))
        }
    };

    let mut values = Vec::new();
    for (name, flag) in branches {
        let check = match cfg.kind {
            ReduceKind::TRemoval => check_t_removal(cfg.r, cfg.n, cfg.l, cfg.t, flag)?,
            ReduceKind::Sparse => check_disj_to_crg(cfg.n, cfg.r, cfg.l, flag)?,
            ReduceKind::Verification => check_pv_to_crg(cfg.r, cfg.n, cfg.l, flag)?,
        };
        let mut line = json!({
            "kind": match cfg.kind {
                ReduceKind::TRemoval => "t-removal",
                ReduceKind::Sparse => "sparse",
                ReduceKind::Verification => "verification",
            },
            "branch": name,
            "r": cfg.r, "n": cfg.n, "l": cfg.l,
            "configs": check.configs,
            "produced_atoms": check.produced.len(),
            "target_atoms": check.target.len(),
            "tv": check.tv(),
            "exact": check.exact(),
        });
        if cfg.kind == ReduceKind::TRemoval {
            line["t"] = json!(cfg.t);
        }
        values.push(line);
    }
    Ok(emit_values(values, format))
}
