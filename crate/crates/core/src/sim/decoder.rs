//! The slot decoder.
//!
//! For every proper subset `S` of users the decoder keeps the in-region hypotheses
//! `(w, r, P)` whose likelihood beats their threshold, then looks for one that strictly
//! beats every candidate agreeing with it on `S` and differing from it on all other users.
//! It decodes only when all subsets pick the same hypothesis.

use serde::{Deserialize, Serialize};

use crate::bound::BoundEngine;
use crate::channel::{ChannelClassEnvelope, Dmc, RateVectorIndex, Shape, UserSet};
use crate::error::{Error, Result};
use crate::exponent::{ChannelArg, ExponentKind, OptimizerConfig};
use crate::logmath::ln0;
use crate::region::{RegionMember, RegionMode};
use crate::sim::codebook::{message_counts, CodebookSet};
use crate::sim::threshold::{typicality_threshold, ThresholdParams, ThresholdSetup};
use crate::sim::Scenario;

/// How threshold parameters are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Operate at the maximizer of the `Ei` exponent of the most dangerous intruder.
    FromEiArgmax,
    /// The same parameters for every threshold.
    Manual(ThresholdParams),
}

/// A decoded message and rate for every user, with the channel or class estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimate {
    pub messages: Vec<usize>,
    pub rates: RateVectorIndex,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Decoded(Estimate),
    Collision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetDiagnostics {
    pub subset: UserSet,
    /// Size of the candidate set.
    pub candidates: usize,
    pub winner: Option<Estimate>,
    /// Whether this subset's winner equals the first subset's winner.
    pub agrees: bool,
    /// Thresholds left inactive because an expectation vanished at some symbol.
    pub degenerate_thresholds: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub subsets: Vec<SubsetDiagnostics>,
}

/// How each threshold of the plan was set up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPlanEntry {
    pub member: RegionMember,
    pub subset: UserSet,
    /// Out-of-region pair with the smallest `Ei`; none means the threshold is inactive.
    pub out_pair: Option<RegionMember>,
    pub params: Option<ThresholdParams>,
    #[serde(with = "crate::serde_float")]
    pub ei: f64,
}

struct Hypothesis {
    rates: RateVectorIndex,
    /// `(target, region position)` of each in-region pair with these rates.
    targets: Vec<(usize, usize)>,
}

/// What was actually sent, for the per-subset event counters.
pub(crate) struct Truth<'a> {
    pub messages: &'a [usize],
    pub rates: &'a RateVectorIndex,
    pub target: usize,
    pub in_region: bool,
}

/// Per-subset events seen during one decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct SubsetEvents {
    /// The sent hypothesis fell below its threshold.
    pub threshold_miss: bool,
    /// A competitor matched or beat the sent hypothesis.
    pub overtaken: bool,
    /// A candidate consistent with the sent messages on `S` only passed its threshold.
    pub intrusion: bool,
}

struct Candidate {
    messages: Vec<usize>,
    hyp: usize,
    target: usize,
    member: usize,
    test: f64,
    comp: f64,
}

/// Decoder state that depends on the scenario and length but not on the output.
pub struct Receiver {
    n: usize,
    shape: Shape,
    subsets: Vec<UserSet>,
    hypotheses: Vec<Hypothesis>,
    ln_test: Vec<Vec<f64>>,
    ln_comp: Vec<Vec<f64>>,
    class: bool,
    counts: Vec<Vec<usize>>,
    thresholds: Vec<Vec<Option<ThresholdSetup>>>,
    plan: Vec<ThresholdPlanEntry>,
}

impl Receiver {
    pub fn new(
        scenario: &Scenario,
        n: usize,
        rule: ThresholdRule,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::ConstraintViolation("codeword length must be at least 1".into()));
        }
        let shape = scenario.compound.shape();
        let k = shape.users;
        let subsets = UserSet::full(k).proper_subsets();
        let region = &scenario.region;
        let class = region.mode == RegionMode::Class;

        let (ln_test, ln_comp, targets) = match &scenario.classes {
            Some(model) => (
                model.envelopes.iter().map(|e| logs(e.pmin())).collect(),
                model.envelopes.iter().map(|e| logs(e.pmax())).collect(),
                model.envelopes.len(),
            ),
            None => {
                let t: Vec<Vec<f64>> =
                    scenario.compound.channels().iter().map(|c| logs(c.probs())).collect();
                (t.clone(), t, scenario.compound.len())
            }
        };

        let mut hypotheses: Vec<Hypothesis> = Vec::new();
        for (pos, m) in region.members().iter().enumerate() {
            match hypotheses.last_mut() {
                Some(h) if h.rates == m.rates => h.targets.push((m.target, pos)),
                _ => hypotheses.push(Hypothesis {
                    rates: m.rates.clone(),
                    targets: vec![(m.target, pos)],
                }),
            }
        }

        let outside = region.complement(&scenario.rates, targets);
        let mut engine = match &scenario.classes {
            Some(model) => {
                BoundEngine::classes(&model.envelopes, &scenario.laws, &scenario.rates, cfg)?
            }
            None => BoundEngine::finite(&scenario.compound, &scenario.laws, &scenario.rates, cfg)?,
        };
        let full = UserSet::full(k);
        let mut thresholds = Vec::with_capacity(region.len());
        let mut plan = Vec::new();
        for m in region.members() {
            let mut row = Vec::with_capacity(subsets.len());
            for &s in &subsets {
                let mut worst: Option<(&RegionMember, f64, f64, f64)> = None;
                for o in outside.iter().filter(|o| o.rates.agrees_on(&m.rates, s)) {
                    let e = engine.exponent(ExponentKind::Ei, full, s, m, o)?;
                    if worst.is_none_or(|(_, v, _, _)| e.value < v) {
                        worst = Some((o, e.value, e.rho_star, e.s_star));
                    }
                }
                let Some((o, ei, rho, s_star)) = worst else {
                    plan.push(ThresholdPlanEntry {
                        member: m.clone(),
                        subset: s,
                        out_pair: None,
                        params: None,
                        ei: f64::INFINITY,
                    });
                    row.push(None);
                    continue;
                };
                let params = match rule {
                    ThresholdRule::FromEiArgmax => ThresholdParams::from_ei_argmax(rho, s_star)?,
                    ThresholdRule::Manual(p) => p,
                };
                let setup = match &scenario.classes {
                    Some(model) => setup_for::<ChannelClassEnvelope>(
                        scenario,
                        s,
                        m,
                        o,
                        &model.envelopes[m.target],
                        &model.envelopes[o.target],
                        params,
                    )?,
                    None => setup_for::<Dmc>(
                        scenario,
                        s,
                        m,
                        o,
                        scenario.compound.channel(m.target),
                        scenario.compound.channel(o.target),
                        params,
                    )?,
                };
                plan.push(ThresholdPlanEntry {
                    member: m.clone(),
                    subset: s,
                    out_pair: Some(o.clone()),
                    params: Some(params),
                    ei,
                });
                row.push(Some(setup));
            }
            thresholds.push(row);
        }

        Ok(Self {
            n,
            shape,
            subsets,
            hypotheses,
            ln_test,
            ln_comp,
            class,
            counts: message_counts(&scenario.rates, n)?,
            thresholds,
            plan,
        })
    }

    pub fn plan(&self) -> &[ThresholdPlanEntry] {
        &self.plan
    }

    pub fn len_n(&self) -> usize {
        self.n
    }

    /// Decodes one output sequence.
    pub fn decode_slot(&self, y: &[usize], books: &CodebookSet) -> Decision {
        self.decode_traced(y, books, None).0
    }

    pub(crate) fn decode_traced(
        &self,
        y: &[usize],
        books: &CodebookSet,
        truth: Option<&Truth>,
    ) -> (Decision, Vec<SubsetEvents>) {
        let nf = self.n as f64;
        let candidates = self.candidates(y, books);
        let mut subsets = Vec::with_capacity(self.subsets.len());
        let mut events = Vec::with_capacity(self.subsets.len());
        let mut winners: Vec<Option<usize>> = Vec::with_capacity(self.subsets.len());
        for (si, &s) in self.subsets.iter().enumerate() {
            let mut degenerate = 0;
            let mut floor = vec![f64::NEG_INFINITY; self.thresholds.len()];
            for (pos, row) in self.thresholds.iter().enumerate() {
                if let Some(setup) = &row[si] {
                    match typicality_threshold(y, setup) {
                        Ok(tau) => floor[pos] = -nf * tau,
                        Err(_) => degenerate += 1,
                    }
                }
            }
            let passed: Vec<usize> = (0..candidates.len())
                .filter(|&i| candidates[i].test > floor[candidates[i].member])
                .collect();
            let winner = self.winner(&candidates, &passed, s);
            if let Some(t) = truth {
                events.push(self.events(&candidates, &passed, s, t));
            }
            winners.push(winner);
            subsets.push(SubsetDiagnostics {
                subset: s,
                candidates: passed.len(),
                winner: winner.map(|i| self.estimate(&candidates[i])),
                agrees: false,
                degenerate_thresholds: degenerate,
            });
        }
        let first = subsets.first().and_then(|d| d.winner.clone());
        for d in &mut subsets {
            d.agrees = d.winner.is_some() && d.winner == first;
        }
        let outcome = match first {
            Some(est) if subsets.iter().all(|d| d.agrees) => Outcome::Decoded(est),
            _ => Outcome::Collision,
        };
        (Decision { outcome, subsets }, events)
    }

    fn estimate(&self, c: &Candidate) -> Estimate {
        Estimate {
            messages: c.messages.clone(),
            rates: self.hypotheses[c.hyp].rates.clone(),
            target: c.target,
        }
    }

    /// Every in-region hypothesis with its likelihoods.
    fn candidates(&self, y: &[usize], books: &CodebookSet) -> Vec<Candidate> {
        let k = self.shape.users;
        let outputs = self.shape.outputs;
        let mut out = Vec::new();
        let mut counts = vec![0u32; self.shape.len()];
        let mut used: Vec<usize> = Vec::with_capacity(self.n);
        let mut xs = vec![0usize; k];
        for (hi, h) in self.hypotheses.iter().enumerate() {
            let radix: Vec<usize> = (0..k).map(|u| self.counts[u][h.rates.get(u)]).collect();
            let mut msgs = vec![0usize; k];
            loop {
                // Likelihoods are summed over the joint type in entry order, so hypotheses
                // with the same type get bit-identical sums and exact ties stay ties.
                for (j, &yj) in y.iter().enumerate().take(self.n) {
                    for (u, x) in xs.iter_mut().enumerate() {
                        *x = books.codeword(u, h.rates.get(u), msgs[u])[j] as usize;
                    }
                    let e = self.shape.encode(&xs) * outputs + yj;
                    if counts[e] == 0 {
                        used.push(e);
                    }
                    counts[e] += 1;
                }
                used.sort_unstable();
                for &(target, member) in &h.targets {
                    let test = type_sum(&used, &counts, &self.ln_test[target]);
                    let comp = if self.class {
                        type_sum(&used, &counts, &self.ln_comp[target])
                    } else {
                        test
                    };
                    out.push(Candidate {
                        messages: msgs.clone(),
                        hyp: hi,
                        target,
                        member,
                        test,
                        comp,
                    });
                }
                for &e in &used {
                    counts[e] = 0;
                }
                used.clear();
                if !advance(&mut msgs, &radix) {
                    break;
                }
            }
        }
        out
    }

    /// Strict winner among `passed`, or `None` when absent or tied.
    fn winner(&self, cands: &[Candidate], passed: &[usize], s: UserSet) -> Option<usize> {
        let k = self.shape.users;
        let mut best: Option<usize> = None;
        let mut tied = false;
        for &t in passed {
            let ct = &cands[t];
            let beats_all = passed.iter().all(|&c| {
                let cc = &cands[c];
                !self.rival(ct, cc, s, k) || ct.test > cc.comp
            });
            if !beats_all {
                continue;
            }
            match best {
                None => best = Some(t),
                Some(b) => {
                    let cb = &cands[b];
                    if ct.test > cb.test {
                        best = Some(t);
                        tied = false;
                    } else if ct.test == cb.test && !self.same_pair(cb, ct) {
                        tied = true;
                    }
                }
            }
        }
        if tied {
            None
        } else {
            best
        }
    }

    fn same_pair(&self, a: &Candidate, b: &Candidate) -> bool {
        a.messages == b.messages && self.hypotheses[a.hyp].rates == self.hypotheses[b.hyp].rates
    }

    /// Whether `c` competes with `t` for subset `s`: equal on `s`, different on every other user.
    fn rival(&self, t: &Candidate, c: &Candidate, s: UserSet, k: usize) -> bool {
        let (rt, rc) = (&self.hypotheses[t.hyp].rates, &self.hypotheses[c.hyp].rates);
        related(&t.messages, rt, &c.messages, rc, s, k)
    }

    fn events(&self, cands: &[Candidate], passed: &[usize], s: UserSet, truth: &Truth) -> SubsetEvents {
        let k = self.shape.users;
        let related_to_truth = |c: &Candidate| {
            related(truth.messages, truth.rates, &c.messages, &self.hypotheses[c.hyp].rates, s, k)
        };
        if truth.in_region {
            let sent = cands.iter().position(|c| {
                c.target == truth.target
                    && c.messages == truth.messages
                    && self.hypotheses[c.hyp].rates == *truth.rates
            });
            let Some(sent) = sent else {
                return SubsetEvents::default();
            };
            SubsetEvents {
                threshold_miss: !passed.contains(&sent),
                overtaken: passed
                    .iter()
                    .any(|&c| related_to_truth(&cands[c]) && cands[c].comp >= cands[sent].test),
                intrusion: false,
            }
        } else {
            SubsetEvents {
                threshold_miss: false,
                overtaken: false,
                intrusion: passed.iter().any(|&c| related_to_truth(&cands[c])),
            }
        }
    }
}

/// Equal `(message, rate)` on `s` and different on every user outside `s`.
fn related(
    ma: &[usize],
    ra: &RateVectorIndex,
    mb: &[usize],
    rb: &RateVectorIndex,
    s: UserSet,
    k: usize,
) -> bool {
    (0..k).all(|u| {
        let same = ma[u] == mb[u] && ra.get(u) == rb.get(u);
        if s.contains(u) {
            same
        } else {
            !same
        }
    })
}

fn advance(digits: &mut [usize], radix: &[usize]) -> bool {
    for (d, &r) in digits.iter_mut().zip(radix).rev() {
        *d += 1;
        if *d < r {
            return true;
        }
        *d = 0;
    }
    false
}

fn type_sum(used: &[usize], counts: &[u32], logs: &[f64]) -> f64 {
    used.iter().map(|&e| counts[e] as f64 * logs[e]).sum()
}

fn logs(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| ln0(v)).collect()
}

fn setup_for<C: ChannelArg>(
    scenario: &Scenario,
    s: UserSet,
    m: &RegionMember,
    o: &RegionMember,
    tested: &C,
    out: &C,
    params: ThresholdParams,
) -> Result<ThresholdSetup> {
    ThresholdSetup::new(
        &scenario.rates,
        &scenario.laws,
        s,
        &m.rates,
        tested,
        &o.rates,
        out,
        params,
    )
}

/// Free-function form of [`Receiver::decode_slot`].
pub fn decode_slot(receiver: &Receiver, y: &[usize], books: &CodebookSet) -> Decision {
    receiver.decode_slot(y, books)
}
