//! Grid search with local refinement over `(rho, s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logmath::linspace;

/// Grid and refinement settings for the exponent maximizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub rho_grid_size: usize,
    pub s_grid_size: usize,
    pub refinement_rounds: usize,
    pub refinement_shrink: f64,
    /// Clamp used for the open ends of the parameter intervals.
    pub epsilon: f64,
    pub objective_tolerance: f64,
    /// Adds `s = rho / (1 + rho)` to every `Em` s-grid.
    pub include_gallager_point: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rho_grid_size: 64,
            s_grid_size: 64,
            refinement_rounds: 3,
            refinement_shrink: 0.2,
            epsilon: 1e-6,
            objective_tolerance: 1e-8,
            include_gallager_point: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_grid_size < 2 || self.s_grid_size < 2 {
            return Err(Error::ConstraintViolation("grid sizes must be at least 2".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::ConstraintViolation("epsilon must lie in (0, 0.5)".into()));
        }
        if !(self.refinement_shrink > 0.0 && self.refinement_shrink < 1.0) {
            return Err(Error::ConstraintViolation("shrink must lie in (0, 1)".into()));
        }
        if self.objective_tolerance.is_nan() || self.objective_tolerance < 0.0 {
            return Err(Error::ConstraintViolation("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Feasible set `rho in [rho_lo, rho_hi]`, `s in [s_lo, s_hi(rho)]`.
pub(crate) struct Domain<'a> {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub s_lo: f64,
    pub s_hi: &'a (dyn Fn(f64) -> f64 + Sync),
    /// Extra s value probed for every rho when it is feasible.
    pub anchor: Option<&'a (dyn Fn(f64) -> f64 + Sync)>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Best {
    pub value: f64,
    pub rho: f64,
    pub s: f64,
    pub evaluations: u64,
}

fn window(lo: f64, hi: f64, center: f64, full: f64, shrink: f64, round: usize) -> (f64, f64) {
    if round == 0 {
        return (lo, hi);
    }
    let half = 0.5 * full * shrink.powi(round as i32);
    ((center - half).max(lo), (center + half).min(hi))
}

/// Maximizes `f` over the domain. Ties keep the earliest probed point.
pub(crate) fn maximize_2d(
    cfg: &OptimizerConfig,
    domain: &Domain,
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    parallel: bool,
) -> Best {
    let mut best = Best {
        value: f64::NEG_INFINITY,
        rho: domain.rho_lo,
        s: domain.s_lo,
        evaluations: 0,
    };
    let rho_full = domain.rho_hi - domain.rho_lo;
    let s_full = (domain.s_hi)(domain.rho_lo) - domain.s_lo;
    for round in 0..=cfg.refinement_rounds {
        let (rlo, rhi) = window(
            domain.rho_lo,
            domain.rho_hi,
            best.rho,
            rho_full,
            cfg.refinement_shrink,
            round,
        );
        let mut points = Vec::new();
        for rho in linspace(rlo, rhi, cfg.rho_grid_size) {
            let top = (domain.s_hi)(rho);
            let (mut slo, mut shi) =
                window(domain.s_lo, top, best.s, s_full, cfg.refinement_shrink, round);
            if slo > shi {
                slo = top.min(slo);
                shi = slo;
            }
            for s in linspace(slo, shi, cfg.s_grid_size) {
                points.push((rho, s));
            }
            if let Some(anchor) = domain.anchor {
                let s = anchor(rho);
                if s >= domain.s_lo && s <= top {
                    points.push((rho, s));
                }
            }
        }
        let values = evaluate(&points, f, parallel);
        best.evaluations += points.len() as u64;
        for (&(rho, s), &v) in points.iter().zip(&values) {
            if v > best.value {
                best = Best {
                    value: v,
                    rho,
                    s,
                    evaluations: best.evaluations,
                };
            }
        }
        if best.value == f64::INFINITY {
            break;
        }
    }
    best
}

/// Scalar version of [`maximize_2d`] using the same rho windows.
pub(crate) fn maximize_1d(
    cfg: &OptimizerConfig,
    lo: f64,
    hi: f64,
    f: &dyn Fn(f64) -> f64,
) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, lo);
    for round in 0..=cfg.refinement_rounds {
        let (wlo, whi) = window(lo, hi, best.1, hi - lo, cfg.refinement_shrink, round);
        for rho in linspace(wlo, whi, cfg.rho_grid_size) {
            let v = f(rho);
            if v > best.0 {
                best = (v, rho);
            }
        }
    }
    best
}

fn evaluate(
    points: &[(f64, f64)],
    f: &(dyn Fn(f64, f64) -> f64 + Sync),
    parallel: bool,
) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return points.par_iter().map(|&(r, s)| f(r, s)).collect();
    }
    let _ = parallel;
    points.iter().map(|&(r, s)| f(r, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = OptimizerConfig {
            rho_grid_size: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn finds_interior_maximum() {
        let cfg = OptimizerConfig::default();
        let hi = |_: f64| 1.0;
        let d = Domain {
            rho_lo: 1e-6,
            rho_hi: 1.0,
            s_lo: 1e-6,
            s_hi: &hi,
            anchor: None,
        };
        let f = |r: f64, s: f64| -(r - 0.3137).powi(2) - (s - 0.7171).powi(2);
        let best = maximize_2d(&cfg, &d, &f, false);
        assert!(best.value > -1e-8);
        assert!((best.rho - 0.3137).abs() < 1e-4);
    }

    #[test]
    fn respects_triangle_constraint() {
        let cfg = OptimizerConfig::default();
        let eps = 1e-6;
        let hi = move |r: f64| 1.0 - r;
        let d = Domain {
            rho_lo: eps,
            rho_hi: 1.0 - eps,
            s_lo: eps,
            s_hi: &hi,
            anchor: None,
        };
        let f = |r: f64, s: f64| r + s;
        let best = maximize_2d(&cfg, &d, &f, false);
        assert!(best.s <= 1.0 - best.rho + 1e-15);
        assert!((best.value - 1.0).abs() < 1e-12);
    }
}
