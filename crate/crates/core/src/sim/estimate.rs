//! Monte Carlo and exact estimation of decoding-error and collision-miss probabilities.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Dmc, UserSet};
use crate::error::{Error, Result};
use crate::exponent::OptimizerConfig;
use crate::sim::codebook::{derive_seed, generate_codebooks, message_counts, stream, CodebookSet};
use crate::sim::decoder::{
    Decision, Estimate, Outcome, Receiver, SubsetDiagnostics, SubsetEvents, ThresholdRule, Truth,
};
use crate::sim::{Case, Scenario};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_9;

/// Largest number of output sequences the exact oracle enumerates.
pub const ENUMERATION_LIMIT: u128 = 1 << 20;

const TAG_TRIAL: u64 = 2;
const TAG_BOOKS: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub rule: ThresholdRule,
    /// Cases to simulate; all `(rate vector, channel)` pairs when absent.
    pub cases: Option<Vec<Case>>,
    /// Reuse these codebooks in every trial instead of drawing fresh ones.
    pub frozen: Option<CodebookSet>,
    pub optimizer: OptimizerConfig,
    /// Keep one record per trial.
    pub trace: bool,
    /// Analytic log bound to compare the system error against.
    pub log_bound: Option<f64>,
}

impl SimConfig {
    pub fn new(n: usize, trials: u64, seed: u64) -> Self {
        Self {
            n,
            trials,
            seed,
            rule: ThresholdRule::FromEiArgmax,
            cases: None,
            frozen: None,
            optimizer: OptimizerConfig::default(),
            trace: false,
            log_bound: None,
        }
    }
}

/// An empirical event frequency with its binomial spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub events: u64,
    pub trials: u64,
    pub rate: f64,
    /// Plug-in binomial standard deviation of `rate`.
    pub std: f64,
    pub half_width_99: f64,
}

impl RateEstimate {
    pub fn new(events: u64, trials: u64) -> Self {
        let rate = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
        let std = if trials == 0 {
            0.0
        } else {
            (rate * (1.0 - rate) / trials as f64).sqrt()
        };
        Self {
            events,
            trials,
            rate,
            std,
            half_width_99: Z_99 * std,
        }
    }
}

/// Per-subset event counts over the trials of one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCounters {
    pub subset: UserSet,
    /// The sent hypothesis fell below its threshold.
    pub threshold_misses: u64,
    /// A competitor matched or beat the sent hypothesis.
    pub overtaken: u64,
    /// An out-of-region transmission produced a consistent candidate.
    pub intrusions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStats {
    pub case: Case,
    pub in_region: bool,
    pub correct: u64,
    pub collisions: u64,
    pub wrong: u64,
    /// Decoding error inside the region, collision miss outside it.
    pub error: RateEstimate,
    pub subsets: Vec<SubsetCounters>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    #[serde(with = "crate::serde_float")]
    pub log_bound: f64,
    pub bound: f64,
    pub empirical: f64,
    pub std: f64,
    /// Whether `empirical <= bound + 3 std`.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub trial: u64,
    pub case: usize,
    pub outcome: Outcome,
    pub subsets: Vec<SubsetDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub cases: Vec<CaseStats>,
    /// Worst in-region case.
    pub decoding_error: Option<RateEstimate>,
    /// Worst out-of-region case.
    pub collision_miss: Option<RateEstimate>,
    pub system_error: RateEstimate,
    /// Index into `cases` of the case attaining `system_error`.
    pub system_case: usize,
    pub comparison: Option<BoundComparison>,
    pub trace: Vec<TraceRecord>,
}

struct TrialResult {
    kind: Kind,
    events: Vec<SubsetEvents>,
    trace: Option<Decision>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Correct,
    Collision,
    Wrong,
}

fn classify(outcome: &Outcome, messages: &[usize], case: &Case) -> Kind {
    match outcome {
        Outcome::Collision => Kind::Collision,
        Outcome::Decoded(Estimate {
            messages: m, rates, ..
        }) if m == messages && *rates == case.rates => Kind::Correct,
        Outcome::Decoded(_) => Kind::Wrong,
    }
}

fn resolve_cases(scenario: &Scenario, cfg: &SimConfig) -> Result<Vec<Case>> {
    let cases = cfg.cases.clone().unwrap_or_else(|| scenario.all_cases());
    for c in &cases {
        scenario.rates.check(&c.rates)?;
        if c.channel >= scenario.compound.len() {
            return Err(Error::UnknownId(format!("channel #{}", c.channel)));
        }
    }
    Ok(cases)
}

fn sample_output<R: Rng>(
    rng: &mut R,
    channel: &Dmc,
    rows: &[WeightedIndex<f64>],
    books: &CodebookSet,
    case: &Case,
    messages: &[usize],
    n: usize,
) -> Vec<usize> {
    let shape = channel.shape();
    let mut xs = vec![0usize; shape.users];
    (0..n)
        .map(|j| {
            for (u, x) in xs.iter_mut().enumerate() {
                *x = books.codeword(u, case.rates.get(u), messages[u])[j] as usize;
            }
            rows[shape.encode(&xs)].sample(rng)
        })
        .collect()
}

#[cfg(feature = "parallel")]
fn map_indices<T: Send, F: Fn(u64) -> T + Sync + Send>(count: u64, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indices<T, F: Fn(u64) -> T>(count: u64, f: F) -> Vec<T> {
    (0..count).map(f).collect()
}

/// Runs `cfg.trials` independent slots for every case.
///
/// Each trial draws fresh codebooks (unless frozen), uniform messages and channel noise from
/// streams keyed by `(case, trial)`, so reports are reproducible and independent of threading.
pub fn estimate_errors(scenario: &Scenario, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.trials == 0 {
        return Err(Error::ConstraintViolation("trials must be at least 1".into()));
    }
    let receiver = Receiver::new(scenario, cfg.n, cfg.rule, &cfg.optimizer)?;
    let counts = message_counts(&scenario.rates, cfg.n)?;
    if let Some(books) = &cfg.frozen {
        books.check(&scenario.rates, cfg.n)?;
    }
    let cases = resolve_cases(scenario, cfg)?;
    let subsets = UserSet::full(scenario.rates.users()).proper_subsets();

    let mut stats = Vec::with_capacity(cases.len());
    let mut trace = Vec::new();
    for (ci, case) in cases.iter().enumerate() {
        let channel = scenario.compound.channel(case.channel);
        let rows = row_samplers(channel)?;
        let in_region = scenario.in_region(case);
        let target = scenario.target_of(case.channel);
        let results: Vec<Result<TrialResult>> = map_indices(cfg.trials, |t| {
            let fresh;
            let books = match &cfg.frozen {
                Some(b) => b,
                None => {
                    let seed = derive_seed(cfg.seed, &[TAG_BOOKS, ci as u64, t]);
                    fresh = generate_codebooks(seed, &scenario.rates, &scenario.laws, cfg.n)?;
                    &fresh
                }
            };
            let mut rng = stream(cfg.seed, &[TAG_TRIAL, ci as u64, t]);
            let messages: Vec<usize> = (0..counts.len())
                .map(|u| rng.gen_range(0..counts[u][case.rates.get(u)]))
                .collect();
            let y = sample_output(&mut rng, channel, &rows, books, case, &messages, cfg.n);
            let truth = Truth {
                messages: &messages,
                rates: &case.rates,
                target,
                in_region,
            };
            let (decision, events) = receiver.decode_traced(&y, books, Some(&truth));
            Ok(TrialResult {
                kind: classify(&decision.outcome, &messages, case),
                events,
                trace: cfg.trace.then_some(decision),
            })
        });

        let mut cs = CaseStats {
            case: case.clone(),
            in_region,
            correct: 0,
            collisions: 0,
            wrong: 0,
            error: RateEstimate::new(0, 0),
            subsets: subsets
                .iter()
                .map(|&s| SubsetCounters {
                    subset: s,
                    threshold_misses: 0,
                    overtaken: 0,
                    intrusions: 0,
                })
                .collect(),
        };
        for (t, r) in results.into_iter().enumerate() {
            let r = r?;
            match r.kind {
                Kind::Correct => cs.correct += 1,
                Kind::Collision => cs.collisions += 1,
                Kind::Wrong => cs.wrong += 1,
            }
            for (c, e) in cs.subsets.iter_mut().zip(&r.events) {
                c.threshold_misses += e.threshold_miss as u64;
                c.overtaken += e.overtaken as u64;
                c.intrusions += e.intrusion as u64;
            }
            if let Some(d) = r.trace {
                trace.push(TraceRecord {
                    trial: t as u64,
                    case: ci,
                    outcome: d.outcome,
                    subsets: d.subsets,
                });
            }
        }
        let events = if in_region { cfg.trials - cs.correct } else { cs.wrong };
        cs.error = RateEstimate::new(events, cfg.trials);
        stats.push(cs);
    }

    let worst = |in_region: bool| {
        stats
            .iter()
            .enumerate()
            .filter(|(_, c)| c.in_region == in_region)
            .fold(None::<(usize, RateEstimate)>, |acc, (i, c)| match acc {
                Some((_, b)) if b.rate >= c.error.rate => acc,
                _ => Some((i, c.error)),
            })
    };
    let dec = worst(true);
    let miss = worst(false);
    let (system_case, system_error) = match (dec, miss) {
        (Some(d), Some(m)) if m.1.rate > d.1.rate => m,
        (Some(d), _) => d,
        (None, Some(m)) => m,
        (None, None) => return Err(Error::ConstraintViolation("no cases to simulate".into())),
    };
    let comparison = cfg.log_bound.map(|lb| {
        let bound = lb.exp().min(1.0);
        BoundComparison {
            log_bound: lb,
            bound,
            empirical: system_error.rate,
            std: system_error.std,
            holds: system_error.rate <= bound + 3.0 * system_error.std,
        }
    });
    Ok(SimReport {
        n: cfg.n,
        trials: cfg.trials,
        seed: cfg.seed,
        cases: stats,
        decoding_error: dec.map(|d| d.1),
        collision_miss: miss.map(|m| m.1),
        system_error,
        system_case,
        comparison,
        trace,
    })
}

fn row_samplers(channel: &Dmc) -> Result<Vec<WeightedIndex<f64>>> {
    (0..channel.shape().input_tuples())
        .map(|row| {
            WeightedIndex::new(channel.row(row))
                .map_err(|e| Error::ConstraintViolation(format!("channel row {row}: {e}")))
        })
        .collect()
}

/// Exact probabilities of one case given fixed codebooks, averaged over message tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactCase {
    pub case: Case,
    pub in_region: bool,
    pub correct: f64,
    pub collision: f64,
    pub wrong: f64,
    /// Decoding error inside the region, collision miss outside it.
    pub error: f64,
}

/// Enumerates every output sequence under the frozen codebooks of `cfg`.
pub fn exact_conditional_errors(scenario: &Scenario, cfg: &SimConfig) -> Result<Vec<ExactCase>> {
    let books = cfg.frozen.as_ref().ok_or_else(|| {
        Error::ConstraintViolation("exact enumeration needs frozen codebooks".into())
    })?;
    books.check(&scenario.rates, cfg.n)?;
    let outputs = scenario.compound.shape().outputs;
    let size = (outputs as u128)
        .checked_pow(cfg.n as u32)
        .unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let receiver = Receiver::new(scenario, cfg.n, cfg.rule, &cfg.optimizer)?;
    let counts = message_counts(&scenario.rates, cfg.n)?;
    let cases = resolve_cases(scenario, cfg)?;
    // Decisions depend only on y, so decode each output once.
    let decisions: Vec<Outcome> = map_indices(size as u64, |idx| {
        let y = output_sequence(idx, outputs, cfg.n);
        receiver.decode_slot(&y, books).outcome
    });

    let k = scenario.rates.users();
    let mut out = Vec::with_capacity(cases.len());
    for case in &cases {
        let channel = scenario.compound.channel(case.channel);
        let shape = channel.shape();
        let radix: Vec<usize> = (0..k).map(|u| counts[u][case.rates.get(u)]).collect();
        let tuples: usize = radix.iter().product();
        let mut sums = [0.0f64; 3];
        let mut messages = vec![0usize; k];
        let mut xs = vec![0usize; k];
        let mut rows = vec![0usize; cfg.n];
        loop {
            for (j, row) in rows.iter_mut().enumerate() {
                for (u, x) in xs.iter_mut().enumerate() {
                    *x = books.codeword(u, case.rates.get(u), messages[u])[j] as usize;
                }
                *row = shape.encode(&xs);
            }
            let mut tuple = [0.0f64; 3];
            for (idx, outcome) in decisions.iter().enumerate() {
                let y = output_sequence(idx as u64, outputs, cfg.n);
                let p: f64 = rows.iter().zip(&y).map(|(&r, &s)| channel.prob(r, s)).product();
                if p == 0.0 {
                    continue;
                }
                let slot = match classify(outcome, &messages, case) {
                    Kind::Correct => 0,
                    Kind::Collision => 1,
                    Kind::Wrong => 2,
                };
                tuple[slot] += p;
            }
            for (s, t) in sums.iter_mut().zip(tuple) {
                *s += t / tuples as f64;
            }
            if !next_tuple(&mut messages, &radix) {
                break;
            }
        }
        let in_region = scenario.in_region(case);
        let [correct, collision, wrong] = sums;
        out.push(ExactCase {
            case: case.clone(),
            in_region,
            correct,
            collision,
            wrong,
            error: if in_region {
                (collision + wrong).min(1.0)
            } else {
                wrong
            },
        });
    }
    Ok(out)
}

/// Output sequence number `idx` in lexicographic order, first symbol most significant.
fn output_sequence(mut idx: u64, outputs: usize, n: usize) -> Vec<usize> {
    let mut y = vec![0usize; n];
    for s in y.iter_mut().rev() {
        *s = (idx % outputs as u64) as usize;
        idx /= outputs as u64;
    }
    y
}

fn next_tuple(digits: &mut [usize], radix: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radix).rev() {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{CompoundSet, InputLaws, RateTable, RateVectorIndex};
    use crate::region::{OperationRegion, RegionMember, RegionMode};

    fn noiseless_scenario() -> Scenario {
        let compound = CompoundSet::new(vec![("id".into(), Dmc::noiseless(2).unwrap())]).unwrap();
        let rates = RateTable::single(vec![0.0]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let region = OperationRegion::new(
            RegionMode::Finite,
            vec![RegionMember::new(RateVectorIndex(vec![0]), 0)],
        );
        Scenario::new(compound, None, rates, laws, region).unwrap()
    }

    #[test]
    fn noiseless_single_codeword_never_errs() {
        let sc = noiseless_scenario();
        let report = estimate_errors(&sc, &SimConfig::new(6, 1000, 7)).unwrap();
        assert_eq!(report.system_error.events, 0);
        assert_eq!(report.cases[0].correct, 1000);
    }

    #[test]
    fn exact_noiseless_is_zero() {
        let sc = noiseless_scenario();
        let mut cfg = SimConfig::new(5, 1, 0);
        cfg.frozen = Some(CodebookSet::from_codewords(5, 2, vec![vec![vec![vec![0, 1, 1, 0, 1]]]]).unwrap());
        let exact = exact_conditional_errors(&sc, &cfg).unwrap();
        assert_eq!(exact[0].error, 0.0);
        assert!((exact[0].correct - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_guard() {
        let sc = noiseless_scenario();
        let mut cfg = SimConfig::new(21, 1, 0);
        cfg.frozen = Some(CodebookSet::from_codewords(21, 2, vec![vec![vec![vec![0; 21]]]]).unwrap());
        assert!(matches!(
            exact_conditional_errors(&sc, &cfg),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn output_sequence_order() {
        assert_eq!(output_sequence(5, 2, 4), vec![0, 1, 0, 1]);
    }
}
