//! Browser bindings: exponent curves, a bound-versus-N curve and a two-user feasibility map.
//!
//! Each exported function returns a JSON string. The `*_data` functions hold the logic and
//! also run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use ramc_core::bound::BoundEngine;
use ramc_core::channel::{CompoundSet, Dmc, InputLaws, RateTable, RateVectorIndex, Shape, UserSet};
use ramc_core::exponent::{em_exponent, gallager_reference_exponent, ExponentQuery, OptimizerConfig};
use ramc_core::info::{conditional_mi, MiQuery};
use ramc_core::region::{
    feasibility_check, maximal_feasible_region, OperationRegion, RegionMember, RegionMode,
};

const MAX_POINTS: usize = 200;
const MAX_GRID: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCurves {
    pub rates: Vec<f64>,
    /// `Em` with the same channel on both sides.
    pub em_same: Vec<f64>,
    /// `Em` with the competing hypothesis on the second channel.
    pub em_cross: Vec<f64>,
    /// Single-channel random-coding exponent.
    pub reference: Vec<f64>,
    /// `ln 2 - h(p)`, where the same-channel curve reaches zero.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub n: Vec<u64>,
    pub log_bound: Vec<f64>,
    pub clamped_bound: Vec<f64>,
    pub exponent_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityMap {
    pub rates: Vec<f64>,
    /// Row-major over `(r1, r2)`: `feasible[i * rates.len() + j]` is for `(rates[i], rates[j])`.
    pub feasible: Vec<bool>,
    pub mi_user1: f64,
    pub mi_user2: f64,
    pub mi_sum: f64,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_crossover(name: &str, p: f64) -> Result<(), String> {
    if p > 0.0 && p <= 0.5 {
        Ok(())
    } else {
        Err(format!("{name} must lie in (0, 0.5]"))
    }
}

fn single_user(rate: f64) -> Result<(RateTable, InputLaws), String> {
    let rates = RateTable::single(vec![rate]).map_err(err)?;
    let laws = InputLaws::uniform(&rates, 2);
    Ok((rates, laws))
}

/// Exponents of binary symmetric channels against rate, uniform inputs.
pub fn exponent_curves_data(p: f64, q: f64, max_rate: f64, points: usize) -> Result<ExponentCurves, String> {
    check_crossover("p", p)?;
    check_crossover("q", q)?;
    if !(max_rate > 0.0 && max_rate <= 2f64.ln()) || !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("rate range must lie in (0, ln 2] with 2..={MAX_POINTS} points"));
    }
    let (own, other) = (Dmc::bsc(p).map_err(err)?, Dmc::bsc(q).map_err(err)?);
    let cfg = OptimizerConfig::default();
    let r = RateVectorIndex(vec![0]);
    let mut out = ExponentCurves {
        rates: Vec::with_capacity(points),
        em_same: Vec::with_capacity(points),
        em_cross: Vec::with_capacity(points),
        reference: Vec::with_capacity(points),
        capacity: 2f64.ln() + p * p.ln() + (1.0 - p) * (1.0 - p).ln(),
    };
    for i in 0..points {
        let rate = max_rate * i as f64 / (points - 1) as f64;
        let (rates, laws) = single_user(rate)?;
        let em = |rival: &Dmc| {
            em_exponent(
                &ExponentQuery {
                    agreeing: UserSet::EMPTY,
                    rates: &rates,
                    laws: &laws,
                    true_rates: &r,
                    true_channel: &own,
                    competing_rates: &r,
                    competing_channel: rival,
                },
                &cfg,
            )
            .map(|e| e.value)
            .map_err(err)
        };
        out.rates.push(rate);
        out.em_same.push(em(&own)?);
        out.em_cross.push(em(&other)?);
        out.reference
            .push(gallager_reference_exponent(&own, &[0.5, 0.5], rate, &cfg).map_err(err)?);
    }
    Ok(out)
}

/// Bound for two rates over a good and a bad BSC: both rates on the good channel and the
/// low rate on the bad one.
pub fn bound_curve_data(
    p_good: f64,
    p_bad: f64,
    low: f64,
    high: f64,
    n_step: u64,
    n_max: u64,
) -> Result<BoundCurve, String> {
    check_crossover("p_good", p_good)?;
    check_crossover("p_bad", p_bad)?;
    if n_step == 0 || n_max < n_step || n_max / n_step > MAX_POINTS as u64 {
        return Err(format!("need 0 < step <= N max and at most {MAX_POINTS} points"));
    }
    let compound = CompoundSet::new(vec![
        ("good".into(), Dmc::bsc(p_good).map_err(err)?),
        ("bad".into(), Dmc::bsc(p_bad).map_err(err)?),
    ])
    .map_err(err)?;
    let rates = RateTable::single(vec![low, high]).map_err(err)?;
    let laws = InputLaws::uniform(&rates, 2);
    let member = |r: usize, c: usize| RegionMember::new(RateVectorIndex(vec![r]), c);
    let region = OperationRegion::new(RegionMode::Finite, vec![member(0, 0), member(1, 0), member(0, 1)]);
    let report = feasibility_check(&region, &compound, &laws, &rates).map_err(err)?;
    if !report.passed {
        return Err("the rates exceed the mutual information of a region channel".into());
    }
    let cfg = OptimizerConfig::default();
    let mut engine = BoundEngine::finite(&compound, &laws, &rates, &cfg).map_err(err)?;
    let mut out = BoundCurve {
        n: Vec::new(),
        log_bound: Vec::new(),
        clamped_bound: Vec::new(),
        exponent_limit: engine.exponent_limit(&region).map_err(err)?.value,
    };
    for n in (n_step..=n_max).step_by(n_step as usize) {
        let b = engine.bound(&region, n).map_err(err)?;
        out.n.push(n);
        out.log_bound.push(b.log_bound);
        out.clamped_bound.push(b.clamped_bound);
    }
    Ok(out)
}

/// Noisy binary adder: `y = x1 + x2` with probability `1 - eps`, each other output `eps / 2`.
pub fn noisy_adder(eps: f64) -> Result<Dmc, String> {
    if !(0.0..1.0).contains(&eps) {
        return Err("eps must lie in [0, 1)".into());
    }
    let shape = Shape::new(2, 2, 3).map_err(err)?;
    Dmc::from_fn(shape, |xs, y| {
        if y == xs[0] + xs[1] {
            1.0 - eps
        } else {
            eps / 2.0
        }
    })
    .map_err(err)
}

/// Feasible rate pairs of the noisy adder with uniform inputs on a `grid x grid` lattice.
pub fn feasibility_map_data(eps: f64, grid: usize) -> Result<FeasibilityMap, String> {
    if !(2..=MAX_GRID).contains(&grid) {
        return Err(format!("grid must be 2..={MAX_GRID}"));
    }
    let channel = noisy_adder(eps)?;
    let axis: Vec<f64> = (0..grid).map(|i| 2f64.ln() * i as f64 / (grid - 1) as f64).collect();
    let rates = RateTable::new(vec![axis.clone(), axis.clone()]).map_err(err)?;
    let laws = InputLaws::uniform(&rates, 2);
    let compound = CompoundSet::new(vec![("adder".into(), channel.clone())]).map_err(err)?;
    let region = maximal_feasible_region(&compound, &laws, &rates).map_err(err)?;
    let mut feasible = vec![false; grid * grid];
    for m in region.members() {
        feasible[m.rates.get(0) * grid + m.rates.get(1)] = true;
    }
    let origin = RateVectorIndex(vec![0, 0]);
    let mi = |given: &[usize]| {
        conditional_mi(&MiQuery {
            channel: &channel,
            laws: &laws,
            rates: &origin,
            given: UserSet::from_users(given),
        })
        .map_err(err)
    };
    Ok(FeasibilityMap {
        rates: axis,
        feasible,
        mi_user1: mi(&[1])?,
        mi_user2: mi(&[0])?,
        mi_sum: mi(&[])?,
    })
}

fn to_js<T: Serialize>(v: Result<T, String>) -> Result<String, JsValue> {
    v.and_then(|v| serde_json::to_string(&v).map_err(err))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn exponent_curves(p: f64, q: f64, max_rate: f64, points: usize) -> Result<String, JsValue> {
    to_js(exponent_curves_data(p, q, max_rate, points))
}

#[wasm_bindgen]
pub fn bound_curve(
    p_good: f64,
    p_bad: f64,
    low: f64,
    high: f64,
    n_step: u32,
    n_max: u32,
) -> Result<String, JsValue> {
    to_js(bound_curve_data(p_good, p_bad, low, high, n_step as u64, n_max as u64))
}

#[wasm_bindgen]
pub fn feasibility_map(eps: f64, grid: usize) -> Result<String, JsValue> {
    to_js(feasibility_map_data(eps, grid))
}
