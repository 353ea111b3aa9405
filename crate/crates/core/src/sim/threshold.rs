//! Typicality thresholds `tau(y)`.
//!
//! For a tested pair `(r, P)`, agreeing users `S` and the dangerous out-of-region pair
//! `(r*, P*)`, the threshold solves
//!
//! ```text
//! ln A(y) - N s1 tau = ln C(y) + rho~ ln B(y) + N s2 tau + N rho~ sum_{k not in S} r_k
//! ```
//!
//! with `A = prod_j E[P(y_j|x)^(1-s1)]`, `B = prod_j E[P(y_j|x)^(s2/rho~)]` under the laws at
//! `r`, and `C = prod_j E[P*(y_j|x)]` under the laws at `r*`. Every user's symbol is averaged,
//! so `tau` depends on `y` alone. In class mode `A` uses `pmax * pmin^(-s1)`, `B` uses
//! `pmin^(s2/rho~)` and `C` the `pmax` of the out-of-region class.

use serde::{Deserialize, Serialize};

use crate::channel::{InputLaws, RateTable, RateVectorIndex, UserSet};
use crate::error::{Error, Result};
use crate::exponent::{ChannelArg, Variant};
use crate::logmath::{ln0, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamSource {
    Manual,
    FromEiArgmax,
}

/// Auxiliary parameters of a threshold; `s1 = 1 - s2 / rho_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub rho_tilde: f64,
    pub s2: f64,
    pub source: ParamSource,
}

impl ThresholdParams {
    pub fn new(rho_tilde: f64, s2: f64) -> Result<Self> {
        if !(rho_tilde > 0.0 && rho_tilde <= 1.0) || !(s2 > 0.0 && s2 < rho_tilde) {
            return Err(Error::ConstraintViolation(format!(
                "threshold parameters need 0 < s2 < rho_tilde <= 1, got rho_tilde={rho_tilde} s2={s2}"
            )));
        }
        Ok(Self {
            rho_tilde,
            s2,
            source: ParamSource::Manual,
        })
    }

    /// Inverts the change of variables that maps `(rho_tilde, s2)` to the `Ei` parameters,
    /// so the threshold operates at the point where `Ei` was maximized.
    pub fn from_ei_argmax(rho: f64, s: f64) -> Result<Self> {
        let rho_tilde = (rho / (1.0 - s)).min(1.0);
        let s2 = s * rho_tilde / (1.0 - (1.0 - s) * (1.0 - rho_tilde));
        let mut p = Self::new(rho_tilde, s2)?;
        p.source = ParamSource::FromEiArgmax;
        Ok(p)
    }

    pub fn s1(&self) -> f64 {
        1.0 - self.s2 / self.rho_tilde
    }

    /// The `(rho, s)` of `Ei` that these parameters correspond to.
    pub fn exponent_point(&self) -> (f64, f64) {
        let (rt, s2) = (self.rho_tilde, self.s2);
        let d = rt - (1.0 - rt) * s2;
        (rt * (rt - s2) / d, 1.0 - (rt - s2) / d)
    }
}

/// Everything needed to evaluate one threshold for any `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSetup {
    pub params: ThresholdParams,
    /// `sum_{k not in S} r_k` at the tested rates.
    pub rate_sum: f64,
    class: bool,
    outputs: usize,
    /// Product-law weights per input tuple at the tested and out-of-region rates.
    q_true: Vec<f64>,
    q_out: Vec<f64>,
    true_upper: Vec<f64>,
    true_lower: Vec<f64>,
    out_upper: Vec<f64>,
    agreeing: UserSet,
    inputs: usize,
    users: usize,
    /// Per output symbol: `ln E[..]` factors of `A`, `B`, `C`.
    ln_a: Vec<f64>,
    ln_b: Vec<f64>,
    ln_c: Vec<f64>,
}

impl ThresholdSetup {
    /// Precomputes per-symbol factors. `C` must be of the same kind as the tested channel.
    #[allow(clippy::too_many_arguments)]
    pub fn new<C: ChannelArg>(
        rates: &RateTable,
        laws: &InputLaws,
        agreeing: UserSet,
        true_rates: &RateVectorIndex,
        true_channel: &C,
        out_rates: &RateVectorIndex,
        out_channel: &C,
        params: ThresholdParams,
    ) -> Result<Self> {
        let shape = true_channel.shape();
        if out_channel.shape() != shape || rates.users() != shape.users {
            return Err(Error::DimensionMismatch("threshold inputs disagree".into()));
        }
        rates.check(true_rates)?;
        rates.check(out_rates)?;
        let k = shape.users;
        if !agreeing.is_subset_of(UserSet::full(k)) || agreeing == UserSet::full(k) {
            return Err(Error::ConstraintViolation(
                "agreeing users must form a proper subset".into(),
            ));
        }
        let all = UserSet::full(k);
        let mut xs = vec![0; k];
        let mut q_true = Vec::with_capacity(shape.input_tuples());
        let mut q_out = Vec::with_capacity(shape.input_tuples());
        for row in 0..shape.input_tuples() {
            shape.decode(row, &mut xs);
            q_true.push(laws.product(true_rates, all, &xs)?);
            q_out.push(laws.product(out_rates, all, &xs)?);
        }
        let class = C::VARIANT == Variant::Class;
        let mut setup = Self {
            params,
            rate_sum: rates.sum(true_rates, agreeing.complement(k)),
            class,
            outputs: shape.outputs,
            q_true,
            q_out,
            true_upper: true_channel.upper().to_vec(),
            true_lower: true_channel.lower().to_vec(),
            out_upper: out_channel.upper().to_vec(),
            agreeing,
            inputs: shape.inputs,
            users: k,
            ln_a: Vec::new(),
            ln_b: Vec::new(),
            ln_c: Vec::new(),
        };
        setup.log_symbol_factors();
        Ok(setup)
    }

    /// Fills the per-symbol log tables by log-sum-exp over input tuples.
    fn log_symbol_factors(&mut self) {
        let p = self.params;
        let s1 = p.s1();
        let t = p.s2 / p.rho_tilde;
        let rows = self.q_true.len();
        let mut terms_a = Vec::with_capacity(rows);
        let mut terms_b = Vec::with_capacity(rows);
        let mut terms_c = Vec::with_capacity(rows);
        for y in 0..self.outputs {
            terms_a.clear();
            terms_b.clear();
            terms_c.clear();
            for row in 0..rows {
                let e = row * self.outputs + y;
                let lq = ln0(self.q_true[row]);
                let (hi, lo) = (ln0(self.true_upper[e]), ln0(self.true_lower[e]));
                if lq > f64::NEG_INFINITY && hi > f64::NEG_INFINITY {
                    if self.class {
                        terms_a.push(lq + hi - s1 * lo);
                        terms_b.push(lq + t * lo);
                    } else {
                        terms_a.push(lq + (1.0 - s1) * hi);
                        terms_b.push(lq + t * hi);
                    }
                }
                terms_c.push(ln0(self.q_out[row]) + ln0(self.out_upper[e]));
            }
            self.ln_a.push(log_sum_exp(&terms_a));
            self.ln_b.push(log_sum_exp(&terms_b));
            self.ln_c.push(log_sum_exp(&terms_c));
        }
    }

    /// Per-symbol expectations for every output. With `fixed` set to the agreeing users'
    /// symbols, only matching input tuples are averaged, under the laws of the other users.
    fn symbol_factors(&self, fixed: Option<&[usize]>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let p = self.params;
        let s1 = p.s1();
        let t = p.s2 / p.rho_tilde;
        let mut a = vec![0.0; self.outputs];
        let mut b = vec![0.0; self.outputs];
        let mut c = vec![0.0; self.outputs];
        let mut xs = vec![0; self.users];
        for row in 0..self.q_true.len() {
            let (mut qt, mut qo) = (self.q_true[row], self.q_out[row]);
            if let Some(target) = fixed {
                decode_row(row, self.inputs, &mut xs);
                if self.agreeing.iter().zip(target).any(|(u, &v)| xs[u] != v) {
                    continue;
                }
                let (pt, po) = self.agreeing_weights(&xs);
                qt = if pt > 0.0 { qt / pt } else { 0.0 };
                qo = if po > 0.0 { qo / po } else { 0.0 };
            }
            for y in 0..self.outputs {
                let e = row * self.outputs + y;
                let (hi, lo) = (self.true_upper[e], self.true_lower[e]);
                if qt > 0.0 && hi > 0.0 {
                    if self.class {
                        a[y] += qt * hi * lo.powf(-s1);
                        b[y] += qt * lo.powf(t);
                    } else {
                        a[y] += qt * hi.powf(1.0 - s1);
                        b[y] += qt * hi.powf(t);
                    }
                }
                if qo > 0.0 {
                    c[y] += qo * self.out_upper[e];
                }
            }
        }
        (a, b, c)
    }

    /// Law weights of the agreeing users' symbols at the tested and out-of-region rates,
    /// recovered from the product weights of a row.
    fn agreeing_weights(&self, xs: &[usize]) -> (f64, f64) {
        let mut pt = 0.0;
        let mut po = 0.0;
        let mut other = vec![0; self.users];
        for r2 in 0..self.q_true.len() {
            decode_row(r2, self.inputs, &mut other);
            if self.agreeing.iter().all(|u| other[u] == xs[u]) {
                pt += self.q_true[r2];
                po += self.q_out[r2];
            }
        }
        (pt, po)
    }

    fn check_symbols(&self, y: &[usize]) -> Result<()> {
        for (position, &symbol) in y.iter().enumerate() {
            if symbol >= self.outputs {
                return Err(Error::DimensionMismatch(format!(
                    "output symbol {symbol} out of range"
                )));
            }
            if self.ln_a[symbol] == f64::NEG_INFINITY
                || self.ln_b[symbol] == f64::NEG_INFINITY
                || self.ln_c[symbol] == f64::NEG_INFINITY
            {
                return Err(Error::DegenerateLikelihood { position, symbol });
            }
        }
        Ok(())
    }
}

fn decode_row(mut row: usize, inputs: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = row % inputs;
        row /= inputs;
    }
}

/// Closed-form threshold in nats per symbol.
pub fn typicality_threshold(y: &[usize], setup: &ThresholdSetup) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::ConstraintViolation("empty output sequence".into()));
    }
    setup.check_symbols(y)?;
    let n = y.len() as f64;
    let p = setup.params;
    let (mut sa, mut sb, mut sc) = (0.0, 0.0, 0.0);
    for &symbol in y {
        sa += setup.ln_a[symbol];
        sb += setup.ln_b[symbol];
        sc += setup.ln_c[symbol];
    }
    let neg_n_tau = (sc + p.rho_tilde * sb - sa + n * p.rho_tilde * setup.rate_sum)
        / (p.s1() + p.s2);
    Ok(-neg_n_tau / n)
}

/// The same threshold found by bisection on the defining equality, with the expectations
/// recomputed directly from the channel data.
pub fn typicality_threshold_bisection(y: &[usize], setup: &ThresholdSetup) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::ConstraintViolation("empty output sequence".into()));
    }
    let (a, b, c) = setup.symbol_factors(None);
    let (mut la, mut lb, mut lc) = (0.0, 0.0, 0.0);
    for (position, &symbol) in y.iter().enumerate() {
        if symbol >= setup.outputs {
            return Err(Error::DimensionMismatch(format!(
                "output symbol {symbol} out of range"
            )));
        }
        if a[symbol] == 0.0 || b[symbol] == 0.0 || c[symbol] == 0.0 {
            return Err(Error::DegenerateLikelihood { position, symbol });
        }
        la += a[symbol].ln();
        lb += b[symbol].ln();
        lc += c[symbol].ln();
    }
    let n = y.len() as f64;
    let p = setup.params;
    let s1 = p.s1();
    // Left side falls and right side rises in tau.
    let gap = |tau: f64| {
        (la - n * s1 * tau) - (lc + p.rho_tilde * lb + n * p.s2 * tau + n * p.rho_tilde * setup.rate_sum)
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while gap(lo) < 0.0 {
        lo *= 2.0;
    }
    while gap(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Spread of the defining equality's residual across the agreeing users' symbol
/// sequences: how far `tau(y)` is from what conditioning on those symbols would give.
/// Zero when no user agrees.
pub fn threshold_residual_spread(y: &[usize], setup: &ThresholdSetup) -> Result<f64> {
    typicality_threshold(y, setup)?;
    if setup.agreeing.is_empty() {
        return Ok(0.0);
    }
    let s_len = setup.agreeing.len();
    let combos = setup.inputs.pow(s_len as u32);
    let rho = setup.params.rho_tilde;
    let mut per_symbol: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); setup.outputs];
    let mut fixed = vec![0; s_len];
    for code in 0..combos {
        decode_row(code, setup.inputs, &mut fixed);
        let (a, b, c) = setup.symbol_factors(Some(&fixed));
        for y_sym in 0..setup.outputs {
            if a[y_sym] == 0.0 || b[y_sym] == 0.0 || c[y_sym] == 0.0 {
                continue;
            }
            let d = a[y_sym].ln() - c[y_sym].ln() - rho * b[y_sym].ln();
            let e = &mut per_symbol[y_sym];
            e.0 = e.0.min(d);
            e.1 = e.1.max(d);
        }
    }
    Ok(y
        .iter()
        .map(|&s| {
            let (lo, hi) = per_symbol[s];
            if hi >= lo {
                hi - lo
            } else {
                0.0
            }
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Dmc;

    fn setup(p: &Dmc, r: f64, params: ThresholdParams) -> ThresholdSetup {
        let rates = RateTable::single(vec![r]).unwrap();
        let laws = InputLaws::uniform(&rates, 2);
        let idx = RateVectorIndex::new(vec![0]);
        ThresholdSetup::new(&rates, &laws, UserSet::EMPTY, &idx, p, &idx, p, params).unwrap()
    }

    #[test]
    fn parameter_ranges() {
        assert!(ThresholdParams::new(0.5, 0.5).is_err());
        assert!(ThresholdParams::new(1.2, 0.5).is_err());
        assert!(ThresholdParams::new(0.5, 0.25).is_ok());
    }

    #[test]
    fn change_of_variables_round_trip() {
        let p = ThresholdParams::from_ei_argmax(0.3, 0.45).unwrap();
        let (rho, s) = p.exponent_point();
        assert!((rho - 0.3).abs() < 1e-14);
        assert!((s - 0.45).abs() < 1e-14);
    }

    #[test]
    fn noiseless_threshold_by_hand() {
        // Every expectation is 1/2 per symbol, so tau = -rho~ ln(1/2) / (s1 + s2).
        let params = ThresholdParams::new(0.5, 0.25).unwrap();
        let s = setup(&Dmc::noiseless(2).unwrap(), 0.0, params);
        let y = [0, 1, 1, 0, 1];
        let tau = typicality_threshold(&y, &s).unwrap();
        let half = 0.5f64.ln();
        let expected = -(half + 0.5 * half - half) / (0.5 + 0.25);
        assert!((tau - expected).abs() < 1e-15);
        assert!((typicality_threshold_bisection(&y, &s).unwrap() - tau).abs() < 1e-14);
    }

    #[test]
    fn degenerate_symbol_reported() {
        let p = Dmc::from_fn(crate::channel::Shape::new(1, 2, 3).unwrap(), |xs, y| {
            if y == xs[0] { 1.0 } else { 0.0 }
        })
        .unwrap();
        let s = setup(&p, 0.0, ThresholdParams::new(0.5, 0.25).unwrap());
        assert_eq!(
            typicality_threshold(&[0, 2], &s),
            Err(Error::DegenerateLikelihood { position: 1, symbol: 2 })
        );
        assert!(matches!(
            typicality_threshold_bisection(&[0, 2], &s),
            Err(Error::DegenerateLikelihood { .. })
        ));
    }
}
