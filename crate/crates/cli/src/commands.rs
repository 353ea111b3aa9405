//! Subcommand implementations. Each computes everything first, then writes its outputs.

use std::path::PathBuf;

use ramc_core::bound::{
    pes_bound_classes, pes_bound_finite, pes_bound_single_user, system_exponent, BoundEngine,
    BoundReport,
};
use ramc_core::exponent::{exponent, ExponentQuery};
use ramc_core::region::{c1_check, feasibility_check, maximal_feasible_region, RegionMode};
use ramc_core::sim::{estimate_errors, SimConfig};
use ramc_core::Error;

use crate::config::{self, Model, Target};
use crate::output::{
    csv_table, num, to_json, ExponentRecord, Pending, Record, RecordFile, RegionRecord, SweepRow,
    TraceFile, RECORD_FORMAT,
};
use crate::{CliError, Command, Common};

const DEFAULT_TRIALS: u64 = 1000;
const DEFAULT_SEED: u64 = 0;

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Runs one command and returns the text for stdout.
pub fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Exponent { common } => with_model(&common, false, |m, _| exponent_cmd(m)),
        Command::Bound { common, n } => with_model(&common, false, |m, _| bound_cmd(m, n)),
        Command::ExponentLimit { common } => with_model(&common, false, |m, _| limit_cmd(m)),
        Command::Region { common } => with_model(&common, false, |m, _| region_cmd(m)),
        Command::Partition { common, n } => {
            with_model(&common, false, |m, _| partition_cmd(m, n))
        }
        Command::Simulate {
            common,
            n,
            trials,
            seed,
            trace,
        } => with_model(&common, true, |m, pending| {
            simulate_cmd(m, n, trials, seed, trace, &common, pending)
        }),
        Command::Sweep { common, n } => with_model(&common, true, |m, pending| {
            sweep_cmd(m, &n, &common, pending)
        }),
        Command::Inspect { record } => inspect_cmd(&record),
    }
}

/// What a command produced: its record and a one-line summary.
struct Produced {
    record: Record,
    summary: String,
}

fn with_model(
    common: &Common,
    tables: bool,
    body: impl FnOnce(&Model, &mut Pending) -> Result<Produced, CliError>,
) -> Result<String, CliError> {
    if !tables && common.csv.is_some() {
        return Err(schema("--csv applies to simulate and sweep only"));
    }
    let model = Model::build(config::load(&common.config)?)?;
    let scenario = model.scenario()?;
    let mut pending = Pending::default();
    let produced = body(&model, &mut pending)?;
    let file = RecordFile::new(&model.name, scenario, produced.record);
    let json = file.to_json()?;
    let stdout = match common.record.clone().or_else(|| model.output.record.clone()) {
        Some(path) => {
            pending.add(path, json);
            let written: Vec<String> = pending.paths().map(|p| p.display().to_string()).collect();
            format!("{}\nwrote {}", produced.summary, written.join(", "))
        }
        None => {
            let mut text = json;
            text.pop();
            text
        }
    };
    pending.commit()?;
    Ok(stdout)
}

fn require_n(flag: Option<u64>, model: &Model) -> Result<u64, CliError> {
    flag.or(model.defaults.n)
        .ok_or_else(|| schema("block length missing: pass --N or set [defaults] N"))
}

fn exponent_cmd(model: &Model) -> Result<Produced, CliError> {
    let def = model
        .defaults
        .exponent
        .as_ref()
        .ok_or_else(|| schema("the exponent command needs a [defaults.exponent] section"))?;
    let (truth, tt) = model.member(&def.truth)?;
    let (competing, ct) = model.member(&def.competing)?;
    let agreeing = model.user_set(&def.agreeing)?;
    let kind = Model::exponent_kind(def.kind);
    let cfg = model.optimizer();
    let result = match (tt, ct) {
        (Target::Channel(a), Target::Channel(b)) => exponent(
            kind,
            &ExponentQuery {
                agreeing,
                rates: &model.rates,
                laws: &model.laws,
                true_rates: &truth.rates,
                true_channel: model.compound.channel(a),
                competing_rates: &competing.rates,
                competing_channel: model.compound.channel(b),
            },
            &cfg,
        )?,
        (Target::Class(a), Target::Class(b)) => exponent(
            kind,
            &ExponentQuery {
                agreeing,
                rates: &model.rates,
                laws: &model.laws,
                true_rates: &truth.rates,
                true_channel: &model.envelopes[a],
                competing_rates: &competing.rates,
                competing_channel: &model.envelopes[b],
            },
            &cfg,
        )?,
        _ => return Err(schema("exponent targets must both be channels or both be classes")),
    };
    Ok(Produced {
        summary: format!(
            "{:?} = {} at rho = {}, s = {}",
            result.kind,
            num(result.value),
            num(result.rho_star),
            num(result.s_star)
        ),
        record: Record::Exponent(ExponentRecord {
            agreeing,
            truth,
            competing,
            result,
        }),
    })
}

fn region_bound(model: &Model, n: u64) -> Result<BoundReport, CliError> {
    let cfg = model.optimizer();
    Ok(match model.region.mode {
        RegionMode::Finite => {
            pes_bound_finite(&model.region, &model.compound, &model.laws, &model.rates, n, &cfg)?
        }
        RegionMode::Class => {
            pes_bound_classes(&model.region, &model.envelopes, &model.laws, &model.rates, n, &cfg)?
        }
    })
}

fn bound_cmd(model: &Model, n: Option<u64>) -> Result<Produced, CliError> {
    let report = region_bound(model, require_n(n, model)?)?;
    Ok(Produced {
        summary: format!(
            "N = {}: bound {} (log {}, {:?} branch)",
            report.n,
            num(report.clamped_bound),
            num(report.log_bound),
            report.branch
        ),
        record: Record::Bound(report),
    })
}

fn limit_cmd(model: &Model) -> Result<Produced, CliError> {
    let cfg = model.optimizer();
    let limit = match model.region.mode {
        RegionMode::Finite => {
            system_exponent(&model.region, &model.compound, &model.laws, &model.rates, &cfg)?
        }
        RegionMode::Class => {
            BoundEngine::classes(&model.envelopes, &model.laws, &model.rates, &cfg)?
                .exponent_limit(&model.region)?
        }
    };
    let summary = match &limit.limiting {
        Some(t) => format!(
            "exponent limit {} from {:?} on {:?}",
            num(limit.value),
            t.kind,
            model.user_labels(t.subset)
        ),
        None => format!("exponent limit {}", num(limit.value)),
    };
    Ok(Produced {
        summary,
        record: Record::ExponentLimit(limit),
    })
}

fn region_cmd(model: &Model) -> Result<Produced, CliError> {
    let channel_level = match model.region.mode {
        RegionMode::Finite => model.region.clone(),
        RegionMode::Class => model.region.expand_classes(&model.class_members),
    };
    let feasibility = feasibility_check(&channel_level, &model.compound, &model.laws, &model.rates)?;
    let maximal = maximal_feasible_region(&model.compound, &model.laws, &model.rates)?;
    let classified: usize = model.class_members.iter().map(Vec::len).sum();
    let class_check = (model.region.mode == RegionMode::Finite
        && !model.class_members.is_empty()
        && classified == model.compound.len())
    .then(|| c1_check(&model.region, &model.class_members))
    .transpose()?;
    let mut summary = format!(
        "{} pairs, feasible: {} ({} violations); maximal region has {} pairs",
        model.region.len(),
        feasibility.passed,
        feasibility.violations.len(),
        maximal.len()
    );
    if let Some(c1) = &class_check {
        summary.push_str(&format!("; class conversion: {}", c1.passed));
    }
    Ok(Produced {
        summary,
        record: Record::Region(RegionRecord {
            region: model.region.clone(),
            feasibility,
            maximal,
            class_check,
        }),
    })
}

fn partition_cmd(model: &Model, n: Option<u64>) -> Result<Produced, CliError> {
    let n = require_n(n, model)?;
    if model.region.mode != RegionMode::Finite {
        return Err(schema("the partition command needs a channel-level region"));
    }
    let (user, options, channel) = model.partition_options()?;
    let members: Vec<_> = model
        .region
        .members()
        .iter()
        .filter(|m| m.target == channel)
        .map(|m| m.rates.clone())
        .collect();
    let report = pes_bound_single_user(
        user,
        &members,
        model.compound.channel(channel),
        &model.laws,
        &model.rates,
        n,
        &options,
        &model.optimizer(),
    )?;
    Ok(Produced {
        summary: format!(
            "N = {}: user {} bound {} over {} partitions ({} blocks)",
            n,
            user + 1,
            num(report.clamped_bound),
            report.partitions_evaluated,
            report.blocks.len()
        ),
        record: Record::Partition(report),
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    model: &Model,
    n: Option<u64>,
    trials: Option<u64>,
    seed: Option<u64>,
    trace: Option<PathBuf>,
    common: &Common,
    pending: &mut Pending,
) -> Result<Produced, CliError> {
    let n = require_n(n, model)?;
    let scenario = model.scenario()?;
    // The comparison needs a bound; an infeasible region simply has none.
    let log_bound = match region_bound(model, n) {
        Ok(b) => Some(b.log_bound),
        Err(CliError::Core(Error::InfeasibleRegion { .. })) => None,
        Err(e) => return Err(e),
    };
    let trace_path = trace.or_else(|| model.output.trace.clone());
    let mut cfg = SimConfig::new(
        usize::try_from(n).map_err(|_| schema("N does not fit in memory"))?,
        trials.or(model.defaults.trials).unwrap_or(DEFAULT_TRIALS),
        seed.or(model.defaults.seed).unwrap_or(DEFAULT_SEED),
    );
    cfg.rule = model.threshold_rule()?;
    cfg.optimizer = model.optimizer();
    cfg.trace = trace_path.is_some();
    cfg.log_bound = log_bound;
    let mut report = estimate_errors(&scenario, &cfg)?;

    if let Some(path) = trace_path {
        let file = TraceFile {
            format: RECORD_FORMAT.into(),
            trace: std::mem::take(&mut report.trace),
        };
        pending.add(path, to_json(&file)?);
    }
    if let Some(path) = common.csv.clone().or_else(|| model.output.csv.clone()) {
        let rows: Vec<Vec<String>> = report
            .cases
            .iter()
            .map(|c| {
                vec![
                    rate_label(&c.case.rates.0),
                    model.compound.ids()[c.case.channel].clone(),
                    c.in_region.to_string(),
                    c.correct.to_string(),
                    c.collisions.to_string(),
                    c.wrong.to_string(),
                    num(c.error.rate),
                    num(c.error.std),
                    num(c.error.half_width_99),
                ]
            })
            .collect();
        let header = [
            "rates", "channel", "in_region", "correct", "collisions", "wrong", "error", "std",
            "half_width_99",
        ];
        pending.add(path, csv_table(&header, &rows)?);
    }

    let mut summary = format!(
        "N = {}, {} trials: system error {} +- {}",
        report.n,
        report.trials,
        num(report.system_error.rate),
        num(report.system_error.half_width_99)
    );
    if let Some(c) = &report.comparison {
        summary.push_str(&format!(
            "; bound {} {}",
            num(c.bound),
            if c.holds { "holds" } else { "VIOLATED" }
        ));
    }
    Ok(Produced {
        summary,
        record: Record::Simulation(report),
    })
}

/// 1-based rate indices joined by `-`.
fn rate_label(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|i| (i + 1).to_string())
        .collect::<Vec<_>>()
        .join("-")
}

/// Parses `start:step:end` (inclusive), a comma list or a single value.
pub fn parse_lengths(list: &str) -> Result<Vec<u64>, CliError> {
    let bad = || schema(format!("bad block-length list `{list}`"));
    let parse = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let parts: Vec<&str> = list.split(':').collect();
    let out = match parts.as_slice() {
        [start, step, end] => {
            let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
            if step == 0 || start > end {
                return Err(bad());
            }
            (start..=end).step_by(step as usize).collect()
        }
        [list] => list.split(',').map(parse).collect::<Result<Vec<_>, _>>()?,
        _ => return Err(bad()),
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

fn sweep_cmd(
    model: &Model,
    list: &str,
    common: &Common,
    pending: &mut Pending,
) -> Result<Produced, CliError> {
    let lengths = parse_lengths(list)?;
    let cfg = model.optimizer();
    let mut engine = match model.region.mode {
        RegionMode::Finite => {
            let report =
                feasibility_check(&model.region, &model.compound, &model.laws, &model.rates)?;
            if !report.passed {
                return Err(Error::InfeasibleRegion {
                    violations: report.violations.len(),
                }
                .into());
            }
            BoundEngine::finite(&model.compound, &model.laws, &model.rates, &cfg)?
        }
        RegionMode::Class => {
            BoundEngine::classes(&model.envelopes, &model.laws, &model.rates, &cfg)?
        }
    };
    let rows = lengths
        .iter()
        .map(|&n| {
            let b = engine.bound(&model.region, n)?;
            Ok(SweepRow {
                n,
                log_bound: b.log_bound,
                clamped_bound: b.clamped_bound,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(path) = common.csv.clone().or_else(|| model.output.csv.clone()) {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.n.to_string(), num(r.log_bound), num(r.clamped_bound)])
            .collect();
        pending.add(path, csv_table(&["N", "log_bound", "clamped_bound"], &table)?);
    }
    let last = rows.last().expect("lengths are nonempty");
    Ok(Produced {
        summary: format!(
            "{} block lengths; at N = {} the bound is {}",
            rows.len(),
            last.n,
            num(last.clamped_bound)
        ),
        record: Record::Sweep(rows),
    })
}

fn inspect_cmd(path: &std::path::Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file = RecordFile::parse(&text)?;
    if file.to_json()? != text {
        return Err(schema(format!(
            "{} does not re-serialize identically",
            path.display()
        )));
    }
    let kind = match &file.record {
        Record::Exponent(_) => "exponent",
        Record::Bound(_) => "bound",
        Record::ExponentLimit(_) => "exponent-limit",
        Record::Region(_) => "region",
        Record::Partition(_) => "partition",
        Record::Simulation(_) => "simulation",
        Record::Sweep(_) => "sweep",
    };
    Ok(format!(
        "{}: {kind} record for `{}`, round trip ok",
        path.display(),
        file.name
    ))
}

#[cfg(test)]
mod tests {
    use super::parse_lengths;

    #[test]
    fn length_lists() {
        assert_eq!(parse_lengths("10:10:40").unwrap(), vec![10, 20, 30, 40]);
        assert_eq!(parse_lengths("5:4:14").unwrap(), vec![5, 9, 13]);
        assert_eq!(parse_lengths("7").unwrap(), vec![7]);
        assert_eq!(parse_lengths("3, 9,27").unwrap(), vec![3, 9, 27]);
        for bad in ["", "1:0:5", "9:1:3", "a", "1:2", "1:2:3:4"] {
            assert!(parse_lengths(bad).is_err(), "{bad}");
        }
    }
}
