//! Subcommand implementations. Each writes human-readable output to `out`
//! and CSV files where requested.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use aoi_core::assignment::{assignment_per, recursive_assign, uniform_blind_assign};
use aoi_core::cluster_opt::{exhaustive_cluster_search, optimal_cluster_size, rr_average_aoi};
use aoi_core::dominance::verify_rr_optimality;
use aoi_core::sim::run_experiment;
use aoi_core::{
    AutoOr, ChannelConfig, ChannelModel, ChannelState, ClusterOptInput, ExperimentSummary, LinkTable, Policy,
    SimConfig, SummaryStat,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::{AssignArgs, AssignMode, ClusterSizeArgs, ConfigError, DominanceArgs, SimulateArgs, Verdict};

fn load(path: Option<&Path>) -> anyhow::Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Writes a `#` comment line followed by CSV records.
fn write_csv(path: &Path, comment: &str, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut buf = BufWriter::new(file);
    if !comment.is_empty() {
        writeln!(buf, "# {comment}").with_context(|| format!("writing {}", path.display()))?;
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.write_record(r).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------- cluster-size

/// Input swept by `cluster-size --sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    Carriers,
    PayloadBits,
    Blocklength,
}

/// Parses `KEY=LO..HI[:STEP]`. Keys: `M`, `tau`, `n`. The default step is 100
/// for `M` and `tau`, 1 for `n`.
pub fn parse_sweep(spec: &str) -> Result<(SweepKey, Vec<u32>), ConfigError> {
    let bad = || ConfigError(format!("malformed sweep {spec:?}; expected KEY=LO..HI[:STEP] with KEY one of M, tau, n"));
    let (key, range) = spec.split_once('=').ok_or_else(bad)?;
    let key = match key.trim() {
        "M" | "carriers" => SweepKey::Carriers,
        "tau" | "payload_bits" => SweepKey::PayloadBits,
        "n" | "blocklength" => SweepKey::Blocklength,
        _ => return Err(bad()),
    };
    let (range, step) = match range.split_once(':') {
        Some((r, s)) => (r, Some(s.trim().parse::<u32>().map_err(|_| bad())?)),
        None => (range, None),
    };
    let (lo, hi) = range.split_once("..").ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    let step = step.unwrap_or(if key == SweepKey::Blocklength { 1 } else { 100 });
    if lo == 0 || hi < lo || step == 0 {
        return Err(ConfigError(format!("sweep {spec:?} needs 0 < LO <= HI and STEP > 0")));
    }
    Ok((key, (lo..=hi).step_by(step as usize).collect()))
}

fn predicted_aoi(per: f64, n: u32, ues: u32, l: u32) -> f64 {
    rr_average_aoi(per, n, ues as f64 / l as f64, 1.0).unwrap_or(f64::INFINITY)
}

pub fn cluster_size(args: &ClusterSizeArgs, out: &mut impl Write) -> anyhow::Result<Verdict> {
    let cfg = load(args.config.as_deref())?.base();
    let snr_db = cfg.channel.reference_snr_db;
    let ues = cfg.system.ues;
    let Some(spec) = &args.sweep else {
        let input = cfg.cluster_opt_input()?;
        let r = optimal_cluster_size(&input)?;
        let per = input.uniform_per(r.l_int as f64);
        writeln!(
            out,
            "M = {}, n = {}, tau = {} bits, gamma = {snr_db} dB, I = {ues}",
            input.carriers, input.blocklength, input.payload_bits
        )?;
        writeln!(out, "l_real          {:.6}", r.l_real)?;
        writeln!(out, "l_int           {}", r.l_int)?;
        writeln!(out, "delta           {:.6e}", r.delta)?;
        writeln!(out, "w               {:.6}", r.w)?;
        writeln!(out, "beta            {:.6}", r.beta_opt)?;
        writeln!(out, "predicted_per   {:.6e}", per)?;
        writeln!(out, "predicted_aoi   {:.6} symbols", predicted_aoi(per, input.blocklength, ues, r.l_int))?;
        if r.high_per_warning {
            writeln!(out, "warning: predicted error rate above the small-error regime")?;
        }
        if args.oracle {
            let search = exhaustive_cluster_search(&input, ues)?;
            let agree = r.l_int.abs_diff(search) <= 1;
            writeln!(out, "search_l_int    {search}")?;
            writeln!(out, "agreement       {}", if agree { "PASS" } else { "FAIL" })?;
            return Ok(if agree { Verdict::Pass } else { Verdict::Fail });
        }
        return Ok(Verdict::Pass);
    };

    let (key, values) = parse_sweep(spec)?;
    let mut header = vec![
        "carriers",
        "payload_bits",
        "blocklength",
        "snr_db",
        "l_real",
        "l_int",
        "predicted_per",
        "predicted_aoi_symbols",
    ];
    if args.oracle {
        header.extend(["search_l_int", "agree"]);
    }
    header.push("status");
    let mut rows = Vec::new();
    let mut verdict = Verdict::Pass;
    for v in values {
        let (mut m, mut tau, mut n) = (cfg.system.carriers, cfg.system.payload_bits, cfg.system.blocklength);
        match key {
            SweepKey::Carriers => m = v,
            SweepKey::PayloadBits => tau = v,
            SweepKey::Blocklength => n = v,
        }
        let mut row = vec![m.to_string(), tau.to_string(), n.to_string(), fmt_f64(snr_db)];
        let result =
            ClusterOptInput::from_snr_db(m, n, snr_db, tau).and_then(|i| optimal_cluster_size(&i).map(|r| (i, r)));
        match result {
            Ok((input, r)) => {
                let per = input.uniform_per(r.l_int as f64);
                row.extend([
                    fmt_f64(r.l_real),
                    r.l_int.to_string(),
                    fmt_f64(per),
                    fmt_f64(predicted_aoi(per, n, ues, r.l_int)),
                ]);
                if args.oracle {
                    let search = exhaustive_cluster_search(&input, ues)?;
                    let agree = r.l_int.abs_diff(search) <= 1;
                    if !agree {
                        verdict = Verdict::Fail;
                    }
                    row.extend([search.to_string(), agree.to_string()]);
                }
                row.push(if r.high_per_warning { "high_per" } else { "ok" }.into());
            }
            Err(e) => {
                let blanks = if args.oracle { 6 } else { 4 };
                row.extend(std::iter::repeat_n(String::new(), blanks));
                row.push(e.to_string());
            }
        }
        rows.push(row);
    }
    match &args.out {
        Some(path) => {
            write_csv(path, "", &header, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
        }
        None => {
            let mut w = csv::Writer::from_writer(&mut *out);
            w.write_record(&header)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
    }
    Ok(verdict)
}

// ---------------------------------------------------------------- simulate

fn with_overrides(mut cfg: ExperimentConfig, args: &SimulateArgs) -> ExperimentConfig {
    if let Some(r) = args.replications {
        cfg.run.replications = r;
    }
    if let Some(s) = args.slots {
        cfg.run.slots = s;
    }
    if let Some(s) = args.seed {
        cfg.run.master_seed = s;
    }
    cfg
}

fn provenance(cfg: &ExperimentConfig) -> String {
    format!("config_sha256={} master_seed={}", cfg.sha256(), cfg.run.master_seed)
}

fn stat_fields(s: &SummaryStat) -> [String; 4] {
    [fmt_f64(s.mean), fmt_f64(s.std), fmt_f64(s.ci_low), fmt_f64(s.ci_high)]
}

fn experiment(cfg: &SimConfig) -> anyhow::Result<ExperimentSummary> {
    Ok(run_experiment(cfg, cfg.run.replications as u64, cfg.run.parallelism)?)
}

pub fn simulate(args: &SimulateArgs, out: &mut impl Write) -> anyhow::Result<Verdict> {
    let cfg = with_overrides(load(args.config.as_deref())?, args);
    let runs = cfg.expand()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let sweep_col = cfg.sweep.as_ref().filter(|s| !s.values.is_empty()).map(|s| s.parameter.name());

    let mut rep_header: Vec<&str> = sweep_col.into_iter().collect();
    rep_header.extend(["replication", "seed", "avg_aoi_symbols", "avg_per", "slots"]);
    let mut sum_header: Vec<&str> = sweep_col.into_iter().collect();
    sum_header.extend(["policy", "cluster_size", "replications", "metric", "mean", "std", "ci_low", "ci_high"]);

    let (mut rep_rows, mut sum_rows) = (Vec::new(), Vec::new());
    for (value, sim) in &runs {
        let summary = experiment(sim)?;
        let lead: Vec<String> = value.map(fmt_f64).into_iter().collect();
        for r in &summary.records {
            let mut row = lead.clone();
            row.extend([
                r.replication.to_string(),
                r.replication_seed.to_string(),
                fmt_f64(r.avg_aoi),
                fmt_f64(r.avg_per),
                r.slots.to_string(),
            ]);
            rep_rows.push(row);
        }
        let l = summary.records[0].cluster_size;
        for (metric, stat) in [("avg_aoi_symbols", &summary.aoi), ("avg_per", &summary.per)] {
            let mut row = lead.clone();
            row.extend([
                sim.scheduler.policy.name().to_string(),
                l.to_string(),
                summary.records.len().to_string(),
                metric.to_string(),
            ]);
            row.extend(stat_fields(stat));
            sum_rows.push(row);
        }
        let label = value.map(|v| format!("{} = {v}: ", sweep_col.unwrap_or(""))).unwrap_or_default();
        writeln!(
            out,
            "{label}{} l={l}: avg AoI {:.4} [{:.4}, {:.4}] symbols, PER {:.6} [{:.6}, {:.6}]",
            sim.scheduler.policy.name(),
            summary.aoi.mean,
            summary.aoi.ci_low,
            summary.aoi.ci_high,
            summary.per.mean,
            summary.per.ci_low,
            summary.per.ci_high
        )?;
    }
    let comment = provenance(&cfg);
    write_csv(&args.out.join("replications.csv"), &comment, &rep_header, &rep_rows)?;
    write_csv(&args.out.join("summary.csv"), &comment, &sum_header, &sum_rows)?;
    Ok(Verdict::Pass)
}

// ---------------------------------------------------------------- benchmark

pub fn benchmark(args: &SimulateArgs, out: &mut impl Write) -> anyhow::Result<Verdict> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig { channel: ChannelConfig::flat(5.0), ..Default::default() },
    };
    let cfg = with_overrides(cfg, args);
    if cfg.sweep.is_some() {
        return Err(ConfigError("benchmark does not take a [sweep] section".into()).into());
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let base = cfg.base();
    let mut results = Vec::new();
    for policy in [Policy::ClusteredRr, Policy::NoClustering, Policy::UrllcBaseline] {
        let mut sim = base;
        sim.scheduler.policy = policy;
        if policy != Policy::ClusteredRr {
            sim.scheduler.cluster_size = AutoOr::Auto;
        }
        sim.validate()?;
        results.push((policy, experiment(&sim)?));
    }
    let header = [
        "policy",
        "cluster_size",
        "replications",
        "aoi_mean_symbols",
        "aoi_std",
        "aoi_ci_low",
        "aoi_ci_high",
        "per_mean",
        "per_std",
        "per_ci_low",
        "per_ci_high",
    ];
    let mut rows = Vec::new();
    for (policy, s) in &results {
        let l = s.records[0].cluster_size;
        let mut row = vec![policy.name().to_string(), l.to_string(), s.records.len().to_string()];
        row.extend(stat_fields(&s.aoi));
        row.extend(stat_fields(&s.per));
        rows.push(row);
        writeln!(out, "{:<14} l={:<4} avg AoI {:>10.4} symbols  PER {:.3e}", policy.name(), l, s.aoi.mean, s.per.mean)?;
    }
    write_csv(&args.out.join("benchmark.csv"), &provenance(&cfg), &header, &rows)?;

    let (clustered, single, urllc) = (&results[0].1, &results[1].1, &results[2].1);
    let ordered = clustered.aoi.mean < single.aoi.mean && clustered.aoi.mean < urllc.aoi.mean;
    let reliable = single.per.mean < 1e-4;
    writeln!(out, "ordering (clustered below both baselines): {}", if ordered { "PASS" } else { "FAIL" })?;
    writeln!(out, "l = 1 PER below 1e-4: {}", if reliable { "PASS" } else { "FAIL" })?;
    Ok(if ordered && reliable { Verdict::Pass } else { Verdict::Fail })
}

// ---------------------------------------------------------------- dominance-check

pub fn dominance_check(args: &DominanceArgs, out: &mut impl Write) -> anyhow::Result<Verdict> {
    let r = verify_rr_optimality(args.ues, args.cluster_size, args.slots, &args.eps, false)?;
    writeln!(out, "I = {}, l = {}, T = {}: {} schedules", r.ue_count, r.cluster_size, r.slots, r.schedules)?;
    for (k, eps) in r.eps_grid.iter().enumerate() {
        writeln!(
            out,
            "eps {eps:<5} round-robin {:.6}  minimum {:.6}  {}",
            r.rr_objective[k],
            r.min_objective[k],
            if r.rr_minimal[k] { "minimal" } else { "NOT minimal" }
        )?;
    }
    writeln!(out, "second-order dominance violations: {}", r.dominance_violations)?;
    let verdict = if r.passed() { Verdict::Pass } else { Verdict::Fail };
    writeln!(out, "{}", if verdict == Verdict::Pass { "PASS" } else { "FAIL" })?;
    Ok(verdict)
}

// ---------------------------------------------------------------- assign

pub fn assign(args: &AssignArgs, out: &mut impl Write) -> anyhow::Result<Verdict> {
    let cfg = load(args.config.as_deref())?.base();
    if cfg.channel.model == ChannelModel::FixedPer {
        return Err(ConfigError("assign needs an SNR-based channel model, not fixed_per".into()).into());
    }
    let (m, n, tau) = (cfg.system.carriers as usize, cfg.system.blocklength, cfg.system.payload_bits);
    let l = match args.cluster_size {
        Some(l) => l,
        None => cfg.resolve_cluster_size()?.cluster_size as usize,
    };
    if l == 0 || l > m {
        return Err(ConfigError(format!("cluster size {l} must lie in [1, M = {m}]")).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let channel = ChannelState::new(&cfg.channel, m, l, n, &mut rng)?;
    let table = LinkTable::from_snr(m, l, &channel.realization().snr)?;
    let blind = uniform_blind_assign(m, l, &mut rng)?;
    let blind_per = assignment_per(&table, &blind, n, tau)?;

    writeln!(out, "M = {m}, l = {l}, n = {n}, tau = {tau} bits, seed = {}", args.seed)?;
    let show_blind = args.mode != AssignMode::Recursive;
    let recursive =
        if args.mode == AssignMode::Blind { None } else { Some(recursive_assign(&table, n, tau, blind.clone())?) };
    write!(out, "{:>4} {:>10}", "ue", "snr_db")?;
    if show_blind {
        write!(out, " {:>8} {:>12}", "blind_b", "blind_per")?;
    }
    if recursive.is_some() {
        write!(out, " {:>8} {:>12}", "rec_b", "rec_per")?;
    }
    writeln!(out)?;
    for (i, per) in blind_per.iter().enumerate() {
        write!(out, "{i:>4} {:>10.3}", 10.0 * channel.wideband_snr(i).log10())?;
        if show_blind {
            write!(out, " {:>8} {:>12.4e}", blind.counts()[i], per)?;
        }
        if let Some(r) = &recursive {
            write!(out, " {:>8} {:>12.4e}", r.assignment.counts()[i], r.per[i])?;
        }
        writeln!(out)?;
    }
    if show_blind {
        writeln!(out, "blind summed PER      {:.6e}", blind_per.iter().sum::<f64>())?;
    }
    if let Some(r) = &recursive {
        writeln!(out, "recursive summed PER  {:.6e} after {} moves", r.per_sum, r.iterations)?;
    }
    Ok(Verdict::Pass)
}
