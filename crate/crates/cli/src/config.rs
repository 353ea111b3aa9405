//! Run configuration: a TOML file with channels, classes, rates, laws, region and defaults.
//!
//! Probabilities and rates are written as decimal strings. User and rate indices are 1-based.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer};

use ramc_core::bound::{PartitionOptions, PartitionSearch};
use ramc_core::channel::{
    build_envelope, validate_dmc, ChannelClassEnvelope, CompoundSet, Dmc, InputLaws, RateTable,
    RateVectorIndex, Shape, UserSet,
};
use ramc_core::exponent::{ExponentKind, OptimizerConfig};
use ramc_core::region::{maximal_feasible_region, OperationRegion, RegionMember, RegionMode};
use ramc_core::sim::{ClassModel, Scenario, ThresholdParams, ThresholdRule};

use crate::CliError;

/// Environment variable naming the directory searched for relative config paths.
pub const CONFIG_DIR_VAR: &str = "RAMC_CONFIG_DIR";

/// A real number given as a decimal string (numbers are accepted too).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
            Float(f64),
        }
        let v = match Repr::deserialize(d)? {
            Repr::Text(t) => t
                .trim()
                .parse::<f64>()
                .map_err(|_| serde::de::Error::custom(format!("`{t}` is not a decimal number")))?,
            Repr::Int(i) => i as f64,
            Repr::Float(f) => f,
        };
        if !v.is_finite() {
            return Err(serde::de::Error::custom("numbers must be finite"));
        }
        Ok(Decimal(v))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub channels: Vec<ChannelDef>,
    #[serde(default)]
    pub classes: Vec<ClassDef>,
    /// `rates[k]` lists the rates of user `k + 1` in nats, strictly increasing.
    pub rates: Vec<Vec<Decimal>>,
    /// Input laws; any `(user, rate)` left out is uniform.
    #[serde(default)]
    pub laws: Vec<LawDef>,
    #[serde(default)]
    pub region: RegionDef,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub output: OutputDef,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDef {
    pub id: String,
    #[serde(default = "one")]
    pub users: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `P(y | x_1..x_K)`, user 1 most significant.
    pub probs: Vec<Decimal>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDef {
    pub id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawDef {
    pub user: usize,
    pub rate: usize,
    pub probs: Vec<Decimal>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionSelect {
    #[default]
    Explicit,
    /// Every feasible `(rate vector, channel)` pair.
    Maximal,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionDef {
    #[serde(default)]
    pub select: RegionSelect,
    #[serde(default)]
    pub pairs: Vec<PairDef>,
}

/// A rate vector (1-based rate indices, one per user) and a channel or class id.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDef {
    pub rates: Vec<usize>,
    pub target: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub optimizer: Option<OptimizerConfig>,
    pub threshold: Option<ThresholdDef>,
    pub partition: Option<PartitionDef>,
    pub exponent: Option<ExponentDef>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDef {
    pub rho_tilde: Decimal,
    pub s2: Decimal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchDef {
    #[default]
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionDef {
    pub user: usize,
    #[serde(default)]
    pub search: SearchDef,
    #[serde(default)]
    pub allow_collision_block: bool,
    /// The known channel; defaults to the only channel of the config.
    pub channel: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindDef {
    Em,
    Ei,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentDef {
    pub kind: KindDef,
    /// Users (1-based) on which the two hypotheses agree.
    #[serde(default)]
    pub agreeing: Vec<usize>,
    pub truth: PairDef,
    pub competing: PairDef,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDef {
    pub csv: Option<PathBuf>,
    pub record: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

/// Reads a config, resolving relative paths against the working directory first and
/// then against `$RAMC_CONFIG_DIR`.
pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let resolved = resolve_path(path);
    let text = std::fs::read_to_string(&resolved)
        .map_err(|e| CliError::ConfigParse(format!("{}: {e}", resolved.display())))?;
    toml::from_str(&text).map_err(|e| CliError::ConfigParse(format!("{}: {e}", resolved.display())))
}

fn resolve_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

/// A target of a region pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Channel(usize),
    Class(usize),
}

/// Library objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Model {
    pub name: String,
    pub compound: CompoundSet,
    pub envelopes: Vec<ChannelClassEnvelope>,
    /// Channel indices of each class.
    pub class_members: Vec<Vec<usize>>,
    pub rates: RateTable,
    pub laws: InputLaws,
    pub region: OperationRegion,
    pub defaults: Defaults,
    pub output: OutputDef,
    targets: HashMap<String, Target>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

impl Model {
    pub fn build(cfg: RunConfig) -> Result<Self, CliError> {
        if cfg.channels.is_empty() {
            return Err(schema("at least one channel is required"));
        }
        let mut targets = HashMap::new();
        let mut members = Vec::with_capacity(cfg.channels.len());
        for (i, c) in cfg.channels.iter().enumerate() {
            if targets.insert(c.id.clone(), Target::Channel(i)).is_some() {
                return Err(schema(format!("duplicate id `{}`", c.id)));
            }
            let shape = Shape::new(c.users, c.inputs, c.outputs)?;
            let dmc = validate_dmc(c.probs.iter().map(|d| d.0).collect(), shape)
                .map_err(|e| schema(format!("channel `{}`: {e}", c.id)))?;
            members.push((c.id.clone(), dmc));
        }
        let compound = CompoundSet::new(members)?;
        let shape = compound.shape();

        let mut envelopes = Vec::with_capacity(cfg.classes.len());
        let mut class_members = Vec::with_capacity(cfg.classes.len());
        let mut owner: Vec<Option<usize>> = vec![None; compound.len()];
        for (f, class) in cfg.classes.iter().enumerate() {
            if targets.insert(class.id.clone(), Target::Class(f)).is_some() {
                return Err(schema(format!("duplicate id `{}`", class.id)));
            }
            let mut idx = Vec::with_capacity(class.members.len());
            for m in &class.members {
                let i = compound
                    .index_of(m)
                    .map_err(|_| schema(format!("class `{}` names undefined channel `{m}`", class.id)))?;
                if owner[i].replace(f).is_some() {
                    return Err(schema(format!("channel `{m}` belongs to two classes")));
                }
                idx.push(i);
            }
            let refs: Vec<(&str, &Dmc)> = idx
                .iter()
                .map(|&i| (compound.ids()[i].as_str(), compound.channel(i)))
                .collect();
            envelopes.push(build_envelope(&class.id, &refs)?);
            class_members.push(idx);
        }

        if cfg.rates.len() != shape.users {
            return Err(schema(format!(
                "rates list {} users but the channels have {}",
                cfg.rates.len(),
                shape.users
            )));
        }
        let rates = RateTable::new(
            cfg.rates
                .iter()
                .map(|r| r.iter().map(|d| d.0).collect())
                .collect(),
        )?;
        let mut laws: Vec<Vec<Vec<f64>>> =
            vec![vec![vec![1.0 / shape.inputs as f64; shape.inputs]; rates.size()]; shape.users];
        for law in &cfg.laws {
            if law.user == 0 || law.user > shape.users || law.rate == 0 || law.rate > rates.size() {
                return Err(schema(format!(
                    "law for user {} rate {} is out of range (indices are 1-based)",
                    law.user, law.rate
                )));
            }
            laws[law.user - 1][law.rate - 1] = law.probs.iter().map(|d| d.0).collect();
        }
        let laws = InputLaws::new(laws, shape.inputs)?;

        let mut model = Self {
            name: cfg.name,
            compound,
            envelopes,
            class_members,
            rates,
            laws,
            region: OperationRegion::new(RegionMode::Finite, Vec::new()),
            defaults: cfg.defaults,
            output: cfg.output,
            targets,
        };
        model.region = match cfg.region.select {
            RegionSelect::Maximal => {
                if !cfg.region.pairs.is_empty() {
                    return Err(schema("a maximal region takes no explicit pairs"));
                }
                maximal_feasible_region(&model.compound, &model.laws, &model.rates)?
            }
            RegionSelect::Explicit => model.explicit_region(&cfg.region.pairs)?,
        };
        Ok(model)
    }

    fn explicit_region(&self, pairs: &[PairDef]) -> Result<OperationRegion, CliError> {
        let mut mode = None;
        let mut members = Vec::with_capacity(pairs.len());
        for p in pairs {
            let (m, t) = self.member(p)?;
            let this = match t {
                Target::Channel(_) => RegionMode::Finite,
                Target::Class(_) => RegionMode::Class,
            };
            if mode.is_some_and(|m| m != this) {
                return Err(schema("region mixes channel and class targets"));
            }
            mode = Some(this);
            members.push(m);
        }
        Ok(OperationRegion::new(mode.unwrap_or(RegionMode::Finite), members))
    }

    pub fn rate_vector(&self, one_based: &[usize]) -> Result<RateVectorIndex, CliError> {
        if one_based.len() != self.rates.users() {
            return Err(schema(format!(
                "rate vector {one_based:?} needs {} entries",
                self.rates.users()
            )));
        }
        if one_based.iter().any(|&i| i == 0 || i > self.rates.size()) {
            return Err(schema(format!(
                "rate vector {one_based:?} is out of range (indices are 1-based, up to {})",
                self.rates.size()
            )));
        }
        Ok(RateVectorIndex(one_based.iter().map(|i| i - 1).collect()))
    }

    pub fn target(&self, id: &str) -> Result<Target, CliError> {
        self.targets
            .get(id)
            .copied()
            .ok_or_else(|| schema(format!("undefined channel or class id `{id}`")))
    }

    pub fn member(&self, p: &PairDef) -> Result<(RegionMember, Target), CliError> {
        let rates = self.rate_vector(&p.rates)?;
        let t = self.target(&p.target)?;
        let index = match t {
            Target::Channel(i) | Target::Class(i) => i,
        };
        Ok((RegionMember::new(rates, index), t))
    }

    pub fn user_set(&self, one_based: &[usize]) -> Result<UserSet, CliError> {
        let k = self.rates.users();
        if one_based.iter().any(|&u| u == 0 || u > k) {
            return Err(schema(format!("user list {one_based:?} is out of range (1..={k})")));
        }
        Ok(UserSet::from_users(
            &one_based.iter().map(|u| u - 1).collect::<Vec<_>>(),
        ))
    }

    /// 1-based users of `set`.
    pub fn user_labels(&self, set: UserSet) -> Vec<usize> {
        set.iter().map(|u| u + 1).collect()
    }

    /// Label of region target `index` under `mode`.
    pub fn target_label(&self, mode: RegionMode, index: usize) -> &str {
        match mode {
            RegionMode::Finite => &self.compound.ids()[index],
            RegionMode::Class => &self.envelopes[index].class_id,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        self.defaults.optimizer.unwrap_or_default()
    }

    pub fn threshold_rule(&self) -> Result<ThresholdRule, CliError> {
        Ok(match &self.defaults.threshold {
            Some(t) => ThresholdRule::Manual(ThresholdParams::new(t.rho_tilde.0, t.s2.0)?),
            None => ThresholdRule::FromEiArgmax,
        })
    }

    pub fn partition_options(&self) -> Result<(usize, PartitionOptions, usize), CliError> {
        let p = self
            .defaults
            .partition
            .as_ref()
            .ok_or_else(|| schema("the partition command needs a [defaults.partition] section"))?;
        if p.user == 0 || p.user > self.rates.users() {
            return Err(schema(format!("partition user {} is out of range", p.user)));
        }
        let channel = match &p.channel {
            Some(id) => match self.target(id)? {
                Target::Channel(i) => i,
                Target::Class(_) => return Err(schema(format!("`{id}` is a class, not a channel"))),
            },
            None if self.compound.len() == 1 => 0,
            None => return Err(schema("name the known channel in [defaults.partition]")),
        };
        let options = PartitionOptions {
            search: match p.search {
                SearchDef::Exhaustive => PartitionSearch::Exhaustive,
                SearchDef::Greedy => PartitionSearch::Greedy,
            },
            allow_collision_block: p.allow_collision_block,
            ..PartitionOptions::default()
        };
        Ok((p.user - 1, options, channel))
    }

    pub fn exponent_kind(kind: KindDef) -> ExponentKind {
        match kind {
            KindDef::Em => ExponentKind::Em,
            KindDef::Ei => ExponentKind::Ei,
        }
    }

    /// The simulation scenario for the configured region.
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let classes = match self.region.mode {
            RegionMode::Finite => None,
            RegionMode::Class => {
                let mut class_of = vec![usize::MAX; self.compound.len()];
                for (f, idx) in self.class_members.iter().enumerate() {
                    for &i in idx {
                        class_of[i] = f;
                    }
                }
                if let Some(c) = class_of.iter().position(|&f| f == usize::MAX) {
                    return Err(schema(format!(
                        "channel `{}` belongs to no class",
                        self.compound.ids()[c]
                    )));
                }
                Some(ClassModel {
                    envelopes: self.envelopes.clone(),
                    class_of,
                })
            }
        };
        Ok(Scenario::new(
            self.compound.clone(),
            classes,
            self.rates.clone(),
            self.laws.clone(),
            self.region.clone(),
        )?)
    }
}
