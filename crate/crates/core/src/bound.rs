//! Finite-length bounds on the system error probability and its exponent.
//!
//! A bound is the larger of two branches. The decode branch takes the worst in-region
//! pair `(r, P)` and sums, over agreeing user sets `S`, every in-region competitor through
//! `exp(-N Em)` plus the most dangerous out-of-region competitor through `exp(-N Ei)`.
//! The collision branch takes the worst out-of-region pair and sums the `Ei` terms of the
//! in-region pairs that share its rates on `S`. Everything is accumulated in log domain.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::channel::{
    ChannelClassEnvelope, CompoundSet, Dmc, InputLaws, RateTable, RateVectorIndex, UserSet,
};
use crate::error::{Error, Result};
use crate::exponent::{
    exponent, subset_exponent, ExponentKind, ExponentQuery, ExponentResult, OptimizerConfig,
    SubsetQuery,
};
use crate::logmath::log_sum_exp;
use crate::region::{
    decoder_sets, enumerate_partitions, feasibility_check, OperationRegion, Partition,
    RegionMember, RegionMode, PARTITION_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Decode,
    Collision,
}

/// One exponential term of a bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerTerm {
    pub branch: Branch,
    /// The pair attaining the outer maximum of the branch.
    pub outer: RegionMember,
    pub subset: UserSet,
    pub kind: ExponentKind,
    pub true_pair: RegionMember,
    pub competing: RegionMember,
    #[serde(with = "crate::serde_float")]
    pub exponent: f64,
    /// `-N * exponent`.
    #[serde(with = "crate::serde_float")]
    pub log_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: u64,
    /// The union bound itself, possibly above one.
    #[serde(with = "crate::serde_float")]
    pub raw_bound: f64,
    pub clamped_bound: f64,
    #[serde(with = "crate::serde_float")]
    pub log_bound: f64,
    pub branch: Branch,
    #[serde(with = "crate::serde_float")]
    pub decode_log: f64,
    #[serde(with = "crate::serde_float")]
    pub collision_log: f64,
    /// Terms of the maximizing pair of each branch.
    pub ledger: Vec<LedgerTerm>,
}

impl BoundReport {
    fn from_branches(n: u64, decode: BranchTotal, collision: BranchTotal) -> Self {
        let (log_bound, branch) = if collision.log > decode.log {
            (collision.log, Branch::Collision)
        } else {
            (decode.log, Branch::Decode)
        };
        let raw_bound = log_bound.exp();
        let mut ledger = decode.terms;
        ledger.extend(collision.terms);
        Self {
            n,
            raw_bound,
            clamped_bound: raw_bound.min(1.0),
            log_bound,
            branch,
            decode_log: decode.log,
            collision_log: collision.log,
            ledger,
        }
    }
}

/// The smallest exponent among all terms and the term attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentLimit {
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    pub limiting: Option<LimitingTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitingTerm {
    pub kind: ExponentKind,
    pub subset: UserSet,
    pub true_pair: RegionMember,
    pub competing: RegionMember,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TermKey {
    kind: ExponentKind,
    decoder: UserSet,
    subset: UserSet,
    truth: RegionMember,
    rival: RegionMember,
}

enum Context<'a> {
    Finite(&'a CompoundSet),
    Class(&'a [ChannelClassEnvelope]),
    Single(&'a Dmc),
}

/// Evaluates bounds while memoizing every exponent it computes, so repeated bounds over
/// the same channels (different `N`, regions or decoder sets) reuse earlier work.
pub struct BoundEngine<'a> {
    context: Context<'a>,
    laws: &'a InputLaws,
    rates: &'a RateTable,
    cfg: OptimizerConfig,
    cache: HashMap<TermKey, ExponentResult>,
}

struct BranchTotal {
    log: f64,
    terms: Vec<LedgerTerm>,
}

impl<'a> BoundEngine<'a> {
    /// Engine over a compound set; region targets index its channels.
    pub fn finite(
        compound: &'a CompoundSet,
        laws: &'a InputLaws,
        rates: &'a RateTable,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        Self::build(Context::Finite(compound), compound.shape(), laws, rates, cfg)
    }

    /// Engine over class envelopes; region targets index the envelopes.
    pub fn classes(
        envelopes: &'a [ChannelClassEnvelope],
        laws: &'a InputLaws,
        rates: &'a RateTable,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        let first = envelopes.first().ok_or(Error::EmptyClass)?;
        if envelopes.iter().any(|e| e.shape() != first.shape()) {
            return Err(Error::DimensionMismatch("envelopes differ in shape".into()));
        }
        Self::build(Context::Class(envelopes), first.shape(), laws, rates, cfg)
    }

    /// Engine over one known channel for decoders of user subsets.
    pub fn single_channel(
        channel: &'a Dmc,
        laws: &'a InputLaws,
        rates: &'a RateTable,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        Self::build(Context::Single(channel), channel.shape(), laws, rates, cfg)
    }

    fn build(
        context: Context<'a>,
        shape: crate::channel::Shape,
        laws: &'a InputLaws,
        rates: &'a RateTable,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if rates.users() != shape.users {
            return Err(Error::DimensionMismatch(
                "rate table and channels disagree on the number of users".into(),
            ));
        }
        laws.check(rates, shape)?;
        Ok(Self {
            context,
            laws,
            rates,
            cfg: *cfg,
            cache: HashMap::new(),
        })
    }

    fn users(&self) -> usize {
        self.rates.users()
    }

    fn targets(&self) -> usize {
        match self.context {
            Context::Finite(c) => c.len(),
            Context::Class(e) => e.len(),
            Context::Single(_) => 1,
        }
    }

    /// Number of distinct exponents computed so far.
    pub fn cached_exponents(&self) -> usize {
        self.cache.len()
    }

    /// Memoized exponent of `kind` for agreeing users `subset` within decoder set `decoder`.
    pub fn exponent(
        &mut self,
        kind: ExponentKind,
        decoder: UserSet,
        subset: UserSet,
        truth: &RegionMember,
        rival: &RegionMember,
    ) -> Result<ExponentResult> {
        let key = TermKey {
            kind,
            decoder,
            subset,
            truth: truth.clone(),
            rival: rival.clone(),
        };
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let full = UserSet::full(self.users());
        let result = match self.context {
            Context::Finite(compound) if decoder == full => exponent(
                kind,
                &ExponentQuery {
                    agreeing: subset,
                    rates: self.rates,
                    laws: self.laws,
                    true_rates: &truth.rates,
                    true_channel: compound.channel(truth.target),
                    competing_rates: &rival.rates,
                    competing_channel: compound.channel(rival.target),
                },
                &self.cfg,
            )?,
            Context::Class(envelopes) if decoder == full => exponent(
                kind,
                &ExponentQuery {
                    agreeing: subset,
                    rates: self.rates,
                    laws: self.laws,
                    true_rates: &truth.rates,
                    true_channel: &envelopes[truth.target],
                    competing_rates: &rival.rates,
                    competing_channel: &envelopes[rival.target],
                },
                &self.cfg,
            )?,
            Context::Single(channel) => subset_exponent(
                &SubsetQuery {
                    kind,
                    decoder,
                    agreeing: subset,
                    rates: self.rates,
                    laws: self.laws,
                    true_rates: &truth.rates,
                    competing_rates: &rival.rates,
                    channel,
                },
                &self.cfg,
            )?,
            _ => {
                return Err(Error::ConstraintViolation(
                    "decoder subsets need a single known channel".into(),
                ))
            }
        };
        self.cache.insert(key, result);
        Ok(result)
    }

    fn check_region(&self, region: &OperationRegion, mode: RegionMode) -> Result<()> {
        if region.mode != mode {
            return Err(Error::ConstraintViolation(format!(
                "expected a {mode:?} region, got {:?}",
                region.mode
            )));
        }
        region.check(self.rates, self.targets())
    }

    /// The bound for a full decoder over `region`.
    pub fn bound(&mut self, region: &OperationRegion, n: u64) -> Result<BoundReport> {
        let mode = match self.context {
            Context::Class(_) => RegionMode::Class,
            _ => RegionMode::Finite,
        };
        self.check_region(region, mode)?;
        self.assemble(UserSet::full(self.users()), region, n)
    }

    /// The bound for a decoder of the users in `decoder` that treats the others as noise.
    pub fn ddecoder_bound(
        &mut self,
        decoder: UserSet,
        members: &[RateVectorIndex],
        n: u64,
    ) -> Result<BoundReport> {
        if !matches!(self.context, Context::Single(_)) {
            return Err(Error::ConstraintViolation(
                "decoder subsets need a single known channel".into(),
            ));
        }
        if decoder.is_empty() || !decoder.is_subset_of(UserSet::full(self.users())) {
            return Err(Error::ConstraintViolation("decoder set out of range".into()));
        }
        let region = single_channel_region(members);
        region.check(self.rates, 1)?;
        self.assemble(decoder, &region, n)
    }

    fn assemble(&mut self, decoder: UserSet, region: &OperationRegion, n: u64) -> Result<BoundReport> {
        if n == 0 {
            return Err(Error::ConstraintViolation("codeword length must be at least 1".into()));
        }
        let nf = n as f64;
        let subsets = decoder.proper_subsets();
        let outside = region.complement(self.rates, self.targets());

        let mut decode: Option<BranchTotal> = None;
        for anchor in region.members() {
            let mut terms = Vec::new();
            for &s in &subsets {
                for rival in region.members() {
                    if !rival.rates.agrees_on(&anchor.rates, s) {
                        continue;
                    }
                    let e = self.exponent(ExponentKind::Em, decoder, s, anchor, rival)?.value;
                    terms.push(term(Branch::Decode, anchor, s, ExponentKind::Em, anchor, rival, e, nf));
                }
                if let Some((rival, e)) = self.worst_intruder(decoder, s, anchor, &outside)? {
                    terms.push(term(Branch::Decode, anchor, s, ExponentKind::Ei, anchor, &rival, e, nf));
                }
            }
            let total = branch_total(terms);
            if decode.as_ref().is_none_or(|b| total.log > b.log) {
                decode = Some(total);
            }
        }

        let mut collision: Option<BranchTotal> = None;
        for outer in &outside {
            let mut terms = Vec::new();
            for &s in &subsets {
                for m in region.members() {
                    if !m.rates.agrees_on(&outer.rates, s) {
                        continue;
                    }
                    if let Some((rival, e)) = self.worst_intruder(decoder, s, m, &outside)? {
                        terms.push(term(Branch::Collision, outer, s, ExponentKind::Ei, m, &rival, e, nf));
                    }
                }
            }
            let total = branch_total(terms);
            if collision.as_ref().is_none_or(|b| total.log > b.log) {
                collision = Some(total);
            }
        }
        let empty = || BranchTotal {
            log: f64::NEG_INFINITY,
            terms: Vec::new(),
        };
        Ok(BoundReport::from_branches(
            n,
            decode.unwrap_or_else(empty),
            collision.unwrap_or_else(empty),
        ))
    }

    /// Out-of-region pair agreeing with `m` on `s` with the smallest `Ei`.
    fn worst_intruder(
        &mut self,
        decoder: UserSet,
        s: UserSet,
        m: &RegionMember,
        outside: &[RegionMember],
    ) -> Result<Option<(RegionMember, f64)>> {
        let mut best: Option<(RegionMember, f64)> = None;
        for rival in outside {
            if !rival.rates.agrees_on(&m.rates, s) {
                continue;
            }
            let e = self.exponent(ExponentKind::Ei, decoder, s, m, rival)?.value;
            if best.as_ref().is_none_or(|(_, b)| e < *b) {
                best = Some((rival.clone(), e));
            }
        }
        Ok(best)
    }

    /// Smallest exponent over every term the bound can contain; the decay rate of the
    /// bound as `N` grows.
    pub fn exponent_limit(&mut self, region: &OperationRegion) -> Result<ExponentLimit> {
        let mode = match self.context {
            Context::Class(_) => RegionMode::Class,
            _ => RegionMode::Finite,
        };
        self.check_region(region, mode)?;
        let decoder = UserSet::full(self.users());
        let outside = region.complement(self.rates, self.targets());
        let mut best = ExponentLimit {
            value: f64::INFINITY,
            limiting: None,
        };
        for anchor in region.members() {
            for s in decoder.proper_subsets() {
                let rivals = region
                    .members()
                    .iter()
                    .map(|r| (ExponentKind::Em, r))
                    .chain(outside.iter().map(|r| (ExponentKind::Ei, r)));
                for (kind, rival) in rivals {
                    if !rival.rates.agrees_on(&anchor.rates, s) {
                        continue;
                    }
                    let e = self.exponent(kind, decoder, s, anchor, rival)?.value;
                    if best.limiting.is_none() || e < best.value {
                        best = ExponentLimit {
                            value: e,
                            limiting: Some(LimitingTerm {
                                kind,
                                subset: s,
                                true_pair: anchor.clone(),
                                competing: rival.clone(),
                            }),
                        };
                    }
                }
            }
        }
        Ok(best)
    }
}

#[allow(clippy::too_many_arguments)]
fn term(
    branch: Branch,
    outer: &RegionMember,
    subset: UserSet,
    kind: ExponentKind,
    true_pair: &RegionMember,
    competing: &RegionMember,
    exponent: f64,
    n: f64,
) -> LedgerTerm {
    LedgerTerm {
        branch,
        outer: outer.clone(),
        subset,
        kind,
        true_pair: true_pair.clone(),
        competing: competing.clone(),
        exponent,
        log_term: -n * exponent,
    }
}

fn branch_total(terms: Vec<LedgerTerm>) -> BranchTotal {
    let logs: Vec<f64> = terms.iter().map(|t| t.log_term).collect();
    BranchTotal {
        log: log_sum_exp(&logs),
        terms,
    }
}

fn single_channel_region(members: &[RateVectorIndex]) -> OperationRegion {
    OperationRegion::new(
        RegionMode::Finite,
        members.iter().map(|r| RegionMember::new(r.clone(), 0)).collect(),
    )
}

/// Bound for a finite compound set; the region must satisfy every rate constraint.
pub fn pes_bound_finite(
    region: &OperationRegion,
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
    n: u64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    require_feasible(region, compound, laws, rates)?;
    BoundEngine::finite(compound, laws, rates, cfg)?.bound(region, n)
}

/// Smallest exponent of [`pes_bound_finite`].
pub fn system_exponent(
    region: &OperationRegion,
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
    cfg: &OptimizerConfig,
) -> Result<ExponentLimit> {
    require_feasible(region, compound, laws, rates)?;
    BoundEngine::finite(compound, laws, rates, cfg)?.exponent_limit(region)
}

fn require_feasible(
    region: &OperationRegion,
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
) -> Result<()> {
    let report = feasibility_check(region, compound, laws, rates)?;
    if !report.passed {
        return Err(Error::InfeasibleRegion {
            violations: report.violations.len(),
        });
    }
    Ok(())
}

/// Bound for channel classes over a class-level region.
pub fn pes_bound_classes(
    region: &OperationRegion,
    envelopes: &[ChannelClassEnvelope],
    laws: &InputLaws,
    rates: &RateTable,
    n: u64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    BoundEngine::classes(envelopes, laws, rates, cfg)?.bound(region, n)
}

/// Bound for a decoder of the users in `decoder` over a single known channel.
pub fn pes_bound_ddecoder(
    decoder: UserSet,
    members: &[RateVectorIndex],
    channel: &Dmc,
    laws: &InputLaws,
    rates: &RateTable,
    n: u64,
    cfg: &OptimizerConfig,
) -> Result<BoundReport> {
    BoundEngine::single_channel(channel, laws, rates, cfg)?.ddecoder_bound(decoder, members, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartitionSearch {
    Exhaustive,
    /// Assigns each member to its individually best decoder set; an upper bound only.
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOptions {
    pub search: PartitionSearch,
    /// Also lets a member go to a block that always reports a collision, which counts as
    /// probability one.
    pub allow_collision_block: bool,
    pub limit: u128,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            search: PartitionSearch::Exhaustive,
            allow_collision_block: false,
            limit: PARTITION_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBound {
    pub decoder: UserSet,
    pub members: Vec<RateVectorIndex>,
    pub report: BoundReport,
}

/// Bound for a receiver interested in one user, with the partition attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleUserBound {
    pub n: u64,
    #[serde(with = "crate::serde_float")]
    pub raw_bound: f64,
    pub clamped_bound: f64,
    #[serde(with = "crate::serde_float")]
    pub log_bound: f64,
    pub search: PartitionSearch,
    pub heuristic: bool,
    pub partitions_evaluated: u64,
    pub members: Vec<RateVectorIndex>,
    pub partition: Partition,
    pub blocks: Vec<BlockBound>,
    pub collision_members: Vec<RateVectorIndex>,
}

/// Minimizes the sum of subset-decoder bounds over partitions of the region.
#[allow(clippy::too_many_arguments)]
pub fn pes_bound_single_user(
    user: usize,
    members: &[RateVectorIndex],
    channel: &Dmc,
    laws: &InputLaws,
    rates: &RateTable,
    n: u64,
    options: &PartitionOptions,
    cfg: &OptimizerConfig,
) -> Result<SingleUserBound> {
    let region = single_channel_region(members);
    let compound = CompoundSet::new(vec![("channel".into(), channel.clone())])?;
    require_feasible(&region, &compound, laws, rates)?;
    let members: Vec<RateVectorIndex> = region.members().iter().map(|m| m.rates.clone()).collect();
    let mut engine = BoundEngine::single_channel(channel, laws, rates, cfg)?;
    let k = rates.users();
    if user >= k {
        return Err(Error::ConstraintViolation(format!("user {user} out of range")));
    }
    if n == 0 {
        return Err(Error::ConstraintViolation("codeword length must be at least 1".into()));
    }
    let mut blocks_memo: HashMap<(UserSet, Vec<usize>), f64> = HashMap::new();
    let mut evaluate = |engine: &mut BoundEngine, p: &Partition| -> Result<f64> {
        let mut logs = Vec::new();
        for (d, idx) in p.blocks() {
            let key = (d, idx.clone());
            let log = match blocks_memo.get(&key) {
                Some(&v) => v,
                None => {
                    let rs: Vec<RateVectorIndex> = idx.iter().map(|&i| members[i].clone()).collect();
                    let v = engine.ddecoder_bound(d, &rs, n)?.log_bound;
                    blocks_memo.insert(key, v);
                    v
                }
            };
            logs.push(log);
        }
        if !p.collision_block().is_empty() {
            logs.push(0.0);
        }
        Ok(log_sum_exp(&logs))
    };

    let (partition, log_bound, evaluated) = match options.search {
        PartitionSearch::Exhaustive => {
            let mut best: Option<(Partition, f64)> = None;
            let mut evaluated = 0u64;
            for p in enumerate_partitions(
                members.len(),
                k,
                user,
                options.allow_collision_block,
                options.limit,
            )? {
                let v = evaluate(&mut engine, &p)?;
                evaluated += 1;
                if best.as_ref().is_none_or(|(_, b)| v < *b) {
                    best = Some((p, v));
                }
            }
            let (p, v) = best.expect("at least one partition is enumerated");
            (p, v, evaluated)
        }
        PartitionSearch::Greedy => {
            let sets = decoder_sets(k, user);
            let mut assignment = Vec::with_capacity(members.len());
            for r in &members {
                let mut best: Option<(UserSet, f64)> = None;
                for &d in &sets {
                    let v = engine.ddecoder_bound(d, std::slice::from_ref(r), n)?.log_bound;
                    if best.is_none_or(|(_, b)| v < b) {
                        best = Some((d, v));
                    }
                }
                assignment.push(best.map(|(d, _)| d));
            }
            let p = Partition { user, assignment };
            let v = evaluate(&mut engine, &p)?;
            (p, v, 1)
        }
    };

    let mut blocks = Vec::new();
    for (d, idx) in partition.blocks() {
        let rs: Vec<RateVectorIndex> = idx.iter().map(|&i| members[i].clone()).collect();
        let report = engine.ddecoder_bound(d, &rs, n)?;
        blocks.push(BlockBound {
            decoder: d,
            members: rs,
            report,
        });
    }
    let collision_members = partition
        .collision_block()
        .into_iter()
        .map(|i| members[i].clone())
        .collect();
    let raw_bound = log_bound.exp();
    Ok(SingleUserBound {
        n,
        raw_bound,
        clamped_bound: raw_bound.min(1.0),
        log_bound,
        search: options.search,
        heuristic: options.search == PartitionSearch::Greedy,
        partitions_evaluated: evaluated,
        members,
        partition,
        blocks,
        collision_members,
    })
}

/// Groups ledger terms by branch; handy for checking that they reproduce branch totals.
pub fn ledger_totals(report: &BoundReport) -> BTreeMap<&'static str, f64> {
    let mut out = BTreeMap::new();
    for (name, branch) in [("decode", Branch::Decode), ("collision", Branch::Collision)] {
        let logs: Vec<f64> = report
            .ledger
            .iter()
            .filter(|t| t.branch == branch)
            .map(|t| t.log_term)
            .collect();
        out.insert(name, log_sum_exp(&logs));
    }
    out
}
