//! The `Em` and `Ei` exponent objectives and their maximization over `(rho, s)`.
//!
//! For agreeing users `S`, true rates `r`, competing rates `r~` and channels `P`, `P~`,
//!
//! ```text
//! Em = max  -rho * sum_{k not in S} r~_k - ln sum_y sum_{x_S} q_S(x_S) A^1   B^rho
//! Ei = max  -rho * sum_{k not in S} r_k  - ln sum_y sum_{x_S} q_S(x_S) A^(s+rho) B^(1-s)
//! ```
//!
//! where `A` averages a power of the true channel over the inputs of the users outside
//! `S` under their laws at `r`, and `B` averages a power of the competing channel under
//! the laws at the competing rates. `Em` searches `rho, s in (0, 1]`; `Ei` searches
//! `rho in (0, 1)`, `s in (0, 1 - rho]`. The class variants replace the channel powers by
//! envelope expressions. Zero-probability entries are dropped from the inner sums.

use serde::{Deserialize, Serialize};

use crate::channel::{
    effective_channel, ChannelClassEnvelope, Dmc, InputLaws, RateTable, RateVectorIndex, Shape,
    UserSet,
};
use crate::error::{Error, Result};
use crate::logmath::ln0;
use crate::optimize::{maximize_1d, maximize_2d, Domain};

pub use crate::optimize::OptimizerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExponentKind {
    Em,
    Ei,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Finite,
    Class,
    Subset,
}

/// An optimized exponent and where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentResult {
    #[serde(with = "crate::serde_float")]
    pub value: f64,
    pub rho_star: f64,
    pub s_star: f64,
    pub evaluations: u64,
    pub variant: Variant,
    pub kind: ExponentKind,
}

/// A channel argument of an exponent: an exact channel or a class envelope.
pub trait ChannelArg: Sync {
    const VARIANT: Variant;
    fn shape(&self) -> Shape;
    /// Upper values: the channel itself, or `pmax`.
    fn upper(&self) -> &[f64];
    /// Lower values: the channel itself, or `pmin`.
    fn lower(&self) -> &[f64];
}

impl ChannelArg for Dmc {
    const VARIANT: Variant = Variant::Finite;
    fn shape(&self) -> Shape {
        Dmc::shape(self)
    }
    fn upper(&self) -> &[f64] {
        self.probs()
    }
    fn lower(&self) -> &[f64] {
        self.probs()
    }
}

impl ChannelArg for ChannelClassEnvelope {
    const VARIANT: Variant = Variant::Class;
    fn shape(&self) -> Shape {
        ChannelClassEnvelope::shape(self)
    }
    fn upper(&self) -> &[f64] {
        self.pmax()
    }
    fn lower(&self) -> &[f64] {
        self.pmin()
    }
}

/// Arguments of one exponent evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ExponentQuery<'a, C> {
    /// The users `S` on which the two hypotheses agree.
    pub agreeing: UserSet,
    pub rates: &'a RateTable,
    pub laws: &'a InputLaws,
    pub true_rates: &'a RateVectorIndex,
    pub true_channel: &'a C,
    pub competing_rates: &'a RateVectorIndex,
    pub competing_channel: &'a C,
}

impl<C: ChannelArg> ExponentQuery<'_, C> {
    fn validate(&self) -> Result<()> {
        let shape = self.true_channel.shape();
        let k = shape.users;
        if self.competing_channel.shape() != shape || self.rates.users() != k {
            return Err(Error::DimensionMismatch(
                "channels and rate table disagree on dimensions".into(),
            ));
        }
        self.rates.check(self.true_rates)?;
        self.rates.check(self.competing_rates)?;
        if !self.agreeing.is_subset_of(UserSet::full(k)) || self.agreeing == UserSet::full(k) {
            return Err(Error::ConstraintViolation(
                "agreeing users must form a proper subset".into(),
            ));
        }
        if !self.true_rates.agrees_on(self.competing_rates, self.agreeing) {
            return Err(Error::ConstraintViolation(
                "competing rates differ from the true rates on the agreeing users".into(),
            ));
        }
        if self.laws.inputs() != shape.inputs {
            return Err(Error::DimensionMismatch("law alphabet differs from channel".into()));
        }
        for u in 0..k {
            self.laws.get(u, self.true_rates.get(u))?;
            self.laws.get(u, self.competing_rates.get(u))?;
        }
        Ok(())
    }
}

/// One `(y, x_S)` block of the objective.
struct Group {
    ln_weight: f64,
    /// `(ln q, ln upper, ln lower)` over the inputs of the non-agreeing users.
    truth: Vec<(f64, f64, f64)>,
    /// `(ln q~, ln upper)` over the same inputs.
    rival: Vec<(f64, f64)>,
}

/// Precomputed log tables for a query.
struct Kernel {
    groups: Vec<Group>,
    rate_sum_true: f64,
    rate_sum_rival: f64,
    class: bool,
    size: usize,
}

impl Kernel {
    fn new<C: ChannelArg>(q: &ExponentQuery<C>) -> Result<Self> {
        q.validate()?;
        let shape = q.true_channel.shape();
        let k = shape.users;
        let s = q.agreeing;
        let free = s.complement(k);
        let s_inputs = shape.inputs.pow(s.len() as u32);
        let mut groups: Vec<Group> = (0..s_inputs * shape.outputs)
            .map(|_| Group {
                ln_weight: f64::NEG_INFINITY,
                truth: Vec::new(),
                rival: Vec::new(),
            })
            .collect();
        let mut xs = vec![0; k];
        let (tu, tl) = (q.true_channel.upper(), q.true_channel.lower());
        let ru = q.competing_channel.upper();
        let mut size = 0;
        for row in 0..shape.input_tuples() {
            shape.decode(row, &mut xs);
            let ws = q.laws.product(q.true_rates, s, &xs)?;
            if ws == 0.0 {
                continue;
            }
            let key = s.iter().fold(0, |acc, u| acc * shape.inputs + xs[u]);
            let qt = ln0(q.laws.product(q.true_rates, free, &xs)?);
            let qr = ln0(q.laws.product(q.competing_rates, free, &xs)?);
            for y in 0..shape.outputs {
                let g = &mut groups[key * shape.outputs + y];
                g.ln_weight = ws.ln();
                let e = row * shape.outputs + y;
                if qt > f64::NEG_INFINITY && tu[e] > 0.0 {
                    g.truth.push((qt, tu[e].ln(), tl[e].ln()));
                    size += 1;
                }
                if qr > f64::NEG_INFINITY && ru[e] > 0.0 {
                    g.rival.push((qr, ru[e].ln()));
                    size += 1;
                }
            }
        }
        groups.retain(|g| !g.truth.is_empty() && !g.rival.is_empty());
        Ok(Self {
            groups,
            rate_sum_true: q.rates.sum(q.true_rates, free),
            rate_sum_rival: q.rates.sum(q.competing_rates, free),
            class: C::VARIANT == Variant::Class,
            size,
        })
    }

    /// `ln Phi_m(rho, s)`.
    fn ln_phi_m(&self, rho: f64, s: f64) -> f64 {
        let b = s / rho;
        let sum = self.groups.iter().map(|g| {
            let a = if self.class {
                lse(g.truth.iter().map(|&(lq, hi, lo)| lq + hi - s * lo))
            } else {
                lse(g.truth.iter().map(|&(lq, p, _)| lq + (1.0 - s) * p))
            };
            let c = lse(g.rival.iter().map(|&(lq, p)| lq + b * p));
            g.ln_weight + a + rho * c
        });
        lse(sum)
    }

    /// `ln Phi_i(rho, s)`.
    fn ln_phi_i(&self, rho: f64, s: f64) -> f64 {
        let sr = s + rho;
        let sum = self.groups.iter().map(|g| {
            let a = if self.class {
                let t = rho / sr;
                lse(g.truth.iter().map(|&(lq, hi, lo)| lq + hi - t * lo))
            } else {
                let t = s / sr;
                lse(g.truth.iter().map(|&(lq, p, _)| lq + t * p))
            };
            let c = lse(g.rival.iter().map(|&(lq, p)| lq + p));
            g.ln_weight + sr * a + (1.0 - s) * c
        });
        lse(sum)
    }

    fn em(&self, rho: f64, s: f64) -> f64 {
        -rho * self.rate_sum_rival - self.ln_phi_m(rho, s)
    }

    fn ei(&self, rho: f64, s: f64) -> f64 {
        -rho * self.rate_sum_true - self.ln_phi_i(rho, s)
    }
}

/// Log-sum-exp over an iterator, two passes without allocation.
fn lse<I: Iterator<Item = f64> + Clone>(it: I) -> f64 {
    let max = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + it.map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn optimize<C: ChannelArg>(
    q: &ExponentQuery<C>,
    cfg: &OptimizerConfig,
    kind: ExponentKind,
    variant: Variant,
) -> Result<ExponentResult> {
    cfg.validate()?;
    let kernel = Kernel::new(q)?;
    let eps = cfg.epsilon;
    let parallel = kernel.size > 512;
    let best = match kind {
        ExponentKind::Em => {
            let top = |_: f64| 1.0;
            let gallager = |rho: f64| rho / (1.0 + rho);
            let domain = Domain {
                rho_lo: eps,
                rho_hi: 1.0,
                s_lo: eps,
                s_hi: &top,
                anchor: if cfg.include_gallager_point {
                    Some(&gallager)
                } else {
                    None
                },
            };
            maximize_2d(cfg, &domain, &|r, s| kernel.em(r, s), parallel)
        }
        ExponentKind::Ei => {
            let top = |rho: f64| 1.0 - rho;
            let domain = Domain {
                rho_lo: eps,
                rho_hi: 1.0 - eps,
                s_lo: eps,
                s_hi: &top,
                anchor: None,
            };
            maximize_2d(cfg, &domain, &|r, s| kernel.ei(r, s), parallel)
        }
    };
    Ok(ExponentResult {
        value: best.value,
        rho_star: best.rho,
        s_star: best.s,
        evaluations: best.evaluations,
        variant,
        kind,
    })
}

/// `Em` for exact channels.
pub fn em_exponent(q: &ExponentQuery<Dmc>, cfg: &OptimizerConfig) -> Result<ExponentResult> {
    optimize(q, cfg, ExponentKind::Em, Variant::Finite)
}

/// `Ei` for exact channels; the competing pair lies outside the operation region.
pub fn ei_exponent(q: &ExponentQuery<Dmc>, cfg: &OptimizerConfig) -> Result<ExponentResult> {
    optimize(q, cfg, ExponentKind::Ei, Variant::Finite)
}

/// `Em` for class envelopes: the true factor uses `pmax * pmin^(-s)`, the competing
/// factor `pmax^(s/rho)`.
pub fn em_class_exponent(
    q: &ExponentQuery<ChannelClassEnvelope>,
    cfg: &OptimizerConfig,
) -> Result<ExponentResult> {
    optimize(q, cfg, ExponentKind::Em, Variant::Class)
}

/// `Ei` for class envelopes: the true factor uses `pmax * pmin^(-rho/(s+rho))`, the
/// competing factor `pmax`.
pub fn ei_class_exponent(
    q: &ExponentQuery<ChannelClassEnvelope>,
    cfg: &OptimizerConfig,
) -> Result<ExponentResult> {
    optimize(q, cfg, ExponentKind::Ei, Variant::Class)
}

/// Dispatches on `kind` for any channel argument.
pub fn exponent<C: ChannelArg>(
    kind: ExponentKind,
    q: &ExponentQuery<C>,
    cfg: &OptimizerConfig,
) -> Result<ExponentResult> {
    optimize(q, cfg, kind, C::VARIANT)
}

/// The objective of `kind` at a single point, without optimization.
pub fn exponent_objective<C: ChannelArg>(
    kind: ExponentKind,
    q: &ExponentQuery<C>,
    rho: f64,
    s: f64,
) -> Result<f64> {
    let kernel = Kernel::new(q)?;
    Ok(match kind {
        ExponentKind::Em => kernel.em(rho, s),
        ExponentKind::Ei => kernel.ei(rho, s),
    })
}

/// Arguments of an exponent seen by a receiver that decodes only the users in `decoder`.
#[derive(Debug, Clone, Copy)]
pub struct SubsetQuery<'a> {
    pub kind: ExponentKind,
    pub decoder: UserSet,
    /// Agreeing users, a proper subset of `decoder`.
    pub agreeing: UserSet,
    pub rates: &'a RateTable,
    pub laws: &'a InputLaws,
    pub true_rates: &'a RateVectorIndex,
    pub competing_rates: &'a RateVectorIndex,
    pub channel: &'a Dmc,
}

/// Exponent of the reduced `|D|`-user system whose channels are `P` averaged over the
/// users outside `D` at the true and competing rates respectively.
pub fn subset_exponent(q: &SubsetQuery, cfg: &OptimizerConfig) -> Result<ExponentResult> {
    let k = q.channel.shape().users;
    if q.decoder.is_empty()
        || !q.decoder.is_subset_of(UserSet::full(k))
        || !q.agreeing.is_subset_of(q.decoder)
        || q.agreeing == q.decoder
    {
        return Err(Error::ConstraintViolation(
            "agreeing users must be a proper subset of the decoder users".into(),
        ));
    }
    q.rates.check(q.true_rates)?;
    q.rates.check(q.competing_rates)?;
    let p_true = effective_channel(q.channel, q.decoder, q.true_rates, q.laws)?;
    let p_rival = effective_channel(q.channel, q.decoder, q.competing_rates, q.laws)?;
    let rates = q.rates.restrict(q.decoder)?;
    let laws = q.laws.restrict(q.decoder);
    let r = q.true_rates.restrict(q.decoder);
    let r_rival = q.competing_rates.restrict(q.decoder);
    let reduced = ExponentQuery {
        agreeing: q.agreeing.relative_to(q.decoder),
        rates: &rates,
        laws: &laws,
        true_rates: &r,
        true_channel: &p_true,
        competing_rates: &r_rival,
        competing_channel: &p_rival,
    };
    let mut out = optimize(&reduced, cfg, q.kind, Variant::Subset)?;
    out.variant = Variant::Subset;
    Ok(out)
}

/// `max_rho E0(rho) - rho r` for a single-user channel, with
/// `E0(rho) = -ln sum_y (sum_x q(x) P(y|x)^(1/(1+rho)))^(1+rho)`.
pub fn gallager_reference_exponent(
    channel: &Dmc,
    law: &[f64],
    rate: f64,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    cfg.validate()?;
    let shape = channel.shape();
    if shape.users != 1 || law.len() != shape.inputs {
        return Err(Error::DimensionMismatch(
            "reference exponent needs a single-user channel and matching law".into(),
        ));
    }
    let e0 = |rho: f64| {
        let t = 1.0 / (1.0 + rho);
        let mut total = 0.0;
        for y in 0..shape.outputs {
            let inner: f64 = (0..shape.inputs)
                .map(|x| law[x] * channel.prob(x, y).powf(t))
                .sum();
            total += inner.powf(1.0 + rho);
        }
        -total.ln()
    };
    let (value, _) = maximize_1d(cfg, cfg.epsilon, 1.0, &|rho| e0(rho) - rho * rate);
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: &Dmc, r: f64) -> (RateTable, InputLaws, RateVectorIndex) {
        let rates = RateTable::single(vec![r]).unwrap();
        let laws = InputLaws::uniform(&rates, p.shape().inputs);
        (rates, laws, RateVectorIndex::new(vec![0]))
    }

    fn query<'a, C>(
        rates: &'a RateTable,
        laws: &'a InputLaws,
        r: &'a RateVectorIndex,
        a: &'a C,
        b: &'a C,
    ) -> ExponentQuery<'a, C> {
        ExponentQuery {
            agreeing: UserSet::EMPTY,
            rates,
            laws,
            true_rates: r,
            true_channel: a,
            competing_rates: r,
            competing_channel: b,
        }
    }

    #[test]
    fn noiseless_em_is_ln2() {
        let p = Dmc::noiseless(2).unwrap();
        let (rates, laws, r) = single(&p, 0.0);
        let res = em_exponent(&query(&rates, &laws, &r, &p, &p), &OptimizerConfig::default()).unwrap();
        assert!((res.value - 2f64.ln()).abs() < 1e-9);
        assert_eq!(res.rho_star, 1.0);
    }

    #[test]
    fn useless_channel_ei_is_zero() {
        let p = Dmc::bsc(0.5).unwrap();
        let (rates, laws, r) = single(&p, 0.0);
        let res = ei_exponent(&query(&rates, &laws, &r, &p, &p), &OptimizerConfig::default()).unwrap();
        assert!(res.value.abs() < 1e-8);
        assert!(res.s_star <= 1.0 - res.rho_star);
    }

    #[test]
    fn noiseless_ei_approaches_ln2() {
        let p = Dmc::noiseless(2).unwrap();
        let (rates, laws, r) = single(&p, 0.0);
        let res = ei_exponent(&query(&rates, &laws, &r, &p, &p), &OptimizerConfig::default()).unwrap();
        assert!((res.value - 2f64.ln()).abs() < 5e-3);
    }

    #[test]
    fn large_rate_gives_negative_ei() {
        let p = Dmc::bsc(0.1).unwrap();
        let (rates, laws, r) = single(&p, 5.0);
        let res = ei_exponent(&query(&rates, &laws, &r, &p, &p), &OptimizerConfig::default()).unwrap();
        assert!(res.value < 0.0);
    }

    #[test]
    fn competing_rates_must_agree_on_s() {
        let p = Dmc::from_fn(Shape::new(2, 2, 2).unwrap(), |xs, y| {
            f64::from(u8::from((xs[0] ^ xs[1]) == y))
        })
        .unwrap();
        let rates = RateTable::new(vec![vec![0.1, 0.2], vec![0.1, 0.2]]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let r = RateVectorIndex::new(vec![0, 0]);
        let rt = RateVectorIndex::new(vec![1, 0]);
        let q = ExponentQuery {
            agreeing: UserSet::from_users(&[0]),
            rates: &rates,
            laws: &laws,
            true_rates: &r,
            true_channel: &p,
            competing_rates: &rt,
            competing_channel: &p,
        };
        assert!(matches!(
            em_exponent(&q, &OptimizerConfig::default()),
            Err(Error::ConstraintViolation(_))
        ));
        let full = ExponentQuery {
            agreeing: UserSet::full(2),
            competing_rates: &r,
            ..q
        };
        assert!(matches!(
            em_exponent(&full, &OptimizerConfig::default()),
            Err(Error::ConstraintViolation(_))
        ));
    }

    #[test]
    fn gallager_reference_endpoints() {
        let cfg = OptimizerConfig::default();
        let u = [0.5, 0.5];
        let v = gallager_reference_exponent(&Dmc::noiseless(2).unwrap(), &u, 0.0, &cfg).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-12);
        let z = gallager_reference_exponent(&Dmc::bsc(0.5).unwrap(), &u, 0.0, &cfg).unwrap();
        assert!(z.abs() < 1e-12);
    }

    #[test]
    fn disjoint_supports_give_infinite_exponent() {
        let a = Dmc::from_fn(Shape::new(1, 2, 4).unwrap(), |xs, y| {
            if y == xs[0] { 1.0 } else { 0.0 }
        })
        .unwrap();
        let b = Dmc::from_fn(Shape::new(1, 2, 4).unwrap(), |xs, y| {
            if y == xs[0] + 2 { 1.0 } else { 0.0 }
        })
        .unwrap();
        let (rates, laws, r) = single(&a, 0.1);
        let res = em_exponent(&query(&rates, &laws, &r, &a, &b), &OptimizerConfig::default()).unwrap();
        assert_eq!(res.value, f64::INFINITY);
    }
}
