//! Operation regions, their feasibility and class-consistency checks, and the partitions
//! used by single-user decoding.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{CompoundSet, InputLaws, RateTable, RateVectorIndex, UserSet};
use crate::error::{Error, Result};
use crate::info::{conditional_mi, MiQuery};

/// Default cap on the number of partitions an exhaustive search may visit.
pub const PARTITION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionMode {
    /// Members name individual channels of a compound set.
    Finite,
    /// Members name channel classes.
    Class,
}

/// A `(rate vector, channel or class)` pair; `target` indexes the compound set or the
/// class list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionMember {
    pub rates: RateVectorIndex,
    pub target: usize,
}

impl RegionMember {
    pub fn new(rates: RateVectorIndex, target: usize) -> Self {
        Self { rates, target }
    }
}

/// The set of pairs in which the receiver intends to decode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationRegion {
    pub mode: RegionMode,
    members: Vec<RegionMember>,
}

impl OperationRegion {
    /// Sorts and deduplicates `members`.
    pub fn new(mode: RegionMode, mut members: Vec<RegionMember>) -> Self {
        members.sort();
        members.dedup();
        Self { mode, members }
    }

    pub fn members(&self) -> &[RegionMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, m: &RegionMember) -> bool {
        self.members.binary_search(m).is_ok()
    }

    /// Checks that every member fits the rate table and the number of targets.
    pub fn check(&self, rates: &RateTable, targets: usize) -> Result<()> {
        for m in &self.members {
            rates.check(&m.rates)?;
            if m.target >= targets {
                return Err(Error::UnknownId(format!("target #{}", m.target)));
            }
        }
        Ok(())
    }

    /// Every pair over all rate vectors and `targets` targets, in order.
    pub fn universe(rates: &RateTable, targets: usize) -> Vec<RegionMember> {
        rates
            .all_vectors()
            .into_iter()
            .flat_map(|r| (0..targets).map(move |t| RegionMember::new(r.clone(), t)))
            .collect()
    }

    /// Pairs of the universe outside the region, in order.
    pub fn complement(&self, rates: &RateTable, targets: usize) -> Vec<RegionMember> {
        Self::universe(rates, targets)
            .into_iter()
            .filter(|m| !self.contains(m))
            .collect()
    }

    /// Expands a class-level region to the channel-level pairs it stands for.
    pub fn expand_classes(&self, classes: &[Vec<usize>]) -> OperationRegion {
        let members = self
            .members
            .iter()
            .flat_map(|m| {
                classes[m.target]
                    .iter()
                    .map(move |&c| RegionMember::new(m.rates.clone(), c))
            })
            .collect();
        OperationRegion::new(RegionMode::Finite, members)
    }
}

/// One failed rate constraint `sum_{k not in S} r_k <= I(X_{S^c}; Y | X_S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub member: RegionMember,
    pub given: UserSet,
    pub rate_sum: f64,
    pub mutual_information: f64,
    /// `rate_sum - mutual_information`, positive for a violation.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
}

/// Slack allowed when comparing a rate sum against mutual information.
const FEASIBILITY_SLACK: f64 = 1e-12;

fn member_violations(
    m: &RegionMember,
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
) -> Result<Vec<Violation>> {
    let k = rates.users();
    let mut out = Vec::new();
    for s in UserSet::full(k).proper_subsets() {
        let rate_sum = rates.sum(&m.rates, s.complement(k));
        let mi = conditional_mi(&MiQuery {
            channel: compound.channel(m.target),
            laws,
            rates: &m.rates,
            given: s,
        })?;
        if rate_sum - mi > FEASIBILITY_SLACK {
            out.push(Violation {
                member: m.clone(),
                given: s,
                rate_sum,
                mutual_information: mi,
                margin: rate_sum - mi,
            });
        }
    }
    Ok(out)
}

/// Lists every `(member, S)` whose rate sum exceeds the conditional mutual information.
pub fn feasibility_check(
    region: &OperationRegion,
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
) -> Result<FeasibilityReport> {
    if region.mode != RegionMode::Finite {
        return Err(Error::ConstraintViolation(
            "feasibility is defined for channel-level regions".into(),
        ));
    }
    region.check(rates, compound.len())?;
    laws.check(rates, compound.shape())?;
    let mut violations = Vec::new();
    for m in region.members() {
        violations.extend(member_violations(m, compound, laws, rates)?);
    }
    Ok(FeasibilityReport {
        passed: violations.is_empty(),
        violations,
    })
}

/// All pairs that satisfy every rate constraint on their own.
pub fn maximal_feasible_region(
    compound: &CompoundSet,
    laws: &InputLaws,
    rates: &RateTable,
) -> Result<OperationRegion> {
    laws.check(rates, compound.shape())?;
    let mut members = Vec::new();
    for m in OperationRegion::universe(rates, compound.len()) {
        if member_violations(&m, compound, laws, rates)?.is_empty() {
            members.push(m);
        }
    }
    Ok(OperationRegion::new(RegionMode::Finite, members))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C1Report {
    pub passed: bool,
    /// `(rate vector, class)` pairs that are only partly in the region.
    pub violators: Vec<RegionMember>,
    /// The class-level region when the check passes.
    pub class_region: Option<OperationRegion>,
}

/// Checks that each class is wholly inside or wholly outside a channel-level region for
/// every rate vector, and converts the region to class level when it is.
///
/// `classes[f]` lists the channel indices of class `f`; every channel must belong to
/// exactly one class.
pub fn c1_check(region: &OperationRegion, classes: &[Vec<usize>]) -> Result<C1Report> {
    if region.mode != RegionMode::Finite {
        return Err(Error::ConstraintViolation(
            "class check expects a channel-level region".into(),
        ));
    }
    let channels: usize = classes.iter().map(Vec::len).sum();
    let mut owner = vec![None; channels];
    for (f, members) in classes.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::EmptyClass);
        }
        for &c in members {
            match owner.get_mut(c) {
                Some(slot @ None) => *slot = Some(f),
                _ => {
                    return Err(Error::ConstraintViolation(format!(
                        "channel #{c} is not in exactly one class"
                    )))
                }
            }
        }
    }
    let mut by_pair: BTreeMap<RegionMember, usize> = BTreeMap::new();
    for m in region.members() {
        let f = owner
            .get(m.target)
            .copied()
            .flatten()
            .ok_or_else(|| Error::UnknownId(format!("channel #{}", m.target)))?;
        *by_pair.entry(RegionMember::new(m.rates.clone(), f)).or_default() += 1;
    }
    let violators: Vec<RegionMember> = by_pair
        .iter()
        .filter(|(m, &n)| n != classes[m.target].len())
        .map(|(m, _)| m.clone())
        .collect();
    let passed = violators.is_empty();
    Ok(C1Report {
        passed,
        class_region: passed
            .then(|| OperationRegion::new(RegionMode::Class, by_pair.into_keys().collect())),
        violators,
    })
}

/// Assignment of each region member to a decoder user set containing the user of
/// interest. `None` marks the optional report-collision block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub user: usize,
    pub assignment: Vec<Option<UserSet>>,
}

impl Partition {
    /// Nonempty blocks keyed by decoder set, members listed by region position.
    pub fn blocks(&self) -> BTreeMap<UserSet, Vec<usize>> {
        let mut out: BTreeMap<UserSet, Vec<usize>> = BTreeMap::new();
        for (i, d) in self.assignment.iter().enumerate() {
            if let Some(d) = d {
                out.entry(*d).or_default().push(i);
            }
        }
        out
    }

    /// Region positions sent to the report-collision block.
    pub fn collision_block(&self) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i].is_none())
            .collect()
    }
}

/// Decoder sets containing `user`, in increasing bitmask order.
pub fn decoder_sets(users: usize, user: usize) -> Vec<UserSet> {
    (0..1u32 << users)
        .map(UserSet)
        .filter(|d| d.contains(user))
        .collect()
}

/// Iterator over every assignment of region members to decoder sets.
#[derive(Debug, Clone)]
pub struct Partitions {
    user: usize,
    choices: Vec<Option<UserSet>>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let out = Partition {
            user: self.user,
            assignment: self.digits.iter().map(|&d| self.choices[d]).collect(),
        };
        // Mixed-radix increment, last member fastest.
        self.done = true;
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.choices.len() {
                self.done = false;
                break;
            }
            *d = 0;
        }
        Some(out)
    }
}

/// Enumerates all `(2^(K-1))^|R|` assignments, or `(2^(K-1) + 1)^|R|` with the
/// report-collision block, failing when that count exceeds `limit`.
pub fn enumerate_partitions(
    region_size: usize,
    users: usize,
    user: usize,
    allow_collision_block: bool,
    limit: u128,
) -> Result<Partitions> {
    if user >= users {
        return Err(Error::ConstraintViolation(format!("user {user} out of range")));
    }
    let mut choices: Vec<Option<UserSet>> =
        decoder_sets(users, user).into_iter().map(Some).collect();
    if allow_collision_block {
        choices.push(None);
    }
    let size = (choices.len() as u128)
        .checked_pow(region_size as u32)
        .unwrap_or(u128::MAX);
    if size > limit {
        return Err(Error::SearchSpaceTooLarge { size, limit });
    }
    Ok(Partitions {
        user,
        choices,
        digits: vec![0; region_size],
        done: false,
    })
}
