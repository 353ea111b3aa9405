//! Monte Carlo simulation of the random-coding scheme with a typicality-threshold decoder.

mod codebook;
mod decoder;
mod estimate;
mod threshold;

pub use codebook::{
    derive_seed, generate_codebooks, message_count, message_counts, stream, CodebookSet,
    CODEWORD_LIMIT,
};
pub use decoder::{
    decode_slot, Decision, Estimate, Outcome, Receiver, SubsetDiagnostics, ThresholdPlanEntry,
    ThresholdRule,
};
pub use estimate::{
    estimate_errors, exact_conditional_errors, BoundComparison, CaseStats, ExactCase,
    RateEstimate, SimConfig, SimReport, SubsetCounters, TraceRecord, ENUMERATION_LIMIT, Z_99,
};
pub use threshold::{
    threshold_residual_spread, typicality_threshold, typicality_threshold_bisection,
    ParamSource, ThresholdParams, ThresholdSetup,
};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelClassEnvelope, CompoundSet, InputLaws, RateTable, RateVectorIndex};
use crate::error::{Error, Result};
use crate::region::{OperationRegion, RegionMember, RegionMode};

/// Class envelopes and the class of each compound-set channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub envelopes: Vec<ChannelClassEnvelope>,
    pub class_of: Vec<usize>,
}

/// Channels, rates, laws and region of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub compound: CompoundSet,
    pub classes: Option<ClassModel>,
    pub rates: RateTable,
    pub laws: InputLaws,
    pub region: OperationRegion,
}

/// A transmitted rate vector and the channel realization of the slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Case {
    pub rates: RateVectorIndex,
    pub channel: usize,
}

impl Scenario {
    pub fn new(
        compound: CompoundSet,
        classes: Option<ClassModel>,
        rates: RateTable,
        laws: InputLaws,
        region: OperationRegion,
    ) -> Result<Self> {
        let shape = compound.shape();
        if rates.users() != shape.users {
            return Err(Error::DimensionMismatch(
                "rate table and channels disagree on the number of users".into(),
            ));
        }
        laws.check(&rates, shape)?;
        match (&classes, region.mode) {
            (None, RegionMode::Finite) => region.check(&rates, compound.len())?,
            (Some(model), RegionMode::Class) => {
                if model.class_of.len() != compound.len() {
                    return Err(Error::DimensionMismatch("class map length".into()));
                }
                for (c, &f) in model.class_of.iter().enumerate() {
                    let env = model
                        .envelopes
                        .get(f)
                        .ok_or_else(|| Error::UnknownId(format!("class #{f}")))?;
                    if !env.covers(compound.channel(c)) {
                        return Err(Error::ConstraintViolation(format!(
                            "class `{}` does not cover channel `{}`",
                            env.class_id,
                            compound.ids()[c]
                        )));
                    }
                }
                region.check(&rates, model.envelopes.len())?;
            }
            _ => {
                return Err(Error::ConstraintViolation(
                    "region mode does not match the class model".into(),
                ))
            }
        }
        Ok(Self {
            compound,
            classes,
            rates,
            laws,
            region,
        })
    }

    /// Region target standing for `channel`: the channel itself or its class.
    pub fn target_of(&self, channel: usize) -> usize {
        match &self.classes {
            Some(model) => model.class_of[channel],
            None => channel,
        }
    }

    pub fn in_region(&self, case: &Case) -> bool {
        self.region
            .contains(&RegionMember::new(case.rates.clone(), self.target_of(case.channel)))
    }

    /// Every `(rate vector, channel)` case in order.
    pub fn all_cases(&self) -> Vec<Case> {
        self.rates
            .all_vectors()
            .into_iter()
            .flat_map(|r| {
                (0..self.compound.len()).map(move |c| Case {
                    rates: r.clone(),
                    channel: c,
                })
            })
            .collect()
    }
}
