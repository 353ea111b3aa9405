//! Library values checked against independent implementations written here, plus frozen
//! values those implementations produced.

use ramc_core::bound::{pes_bound_finite, system_exponent};
use ramc_core::channel::{CompoundSet, Dmc, InputLaws, RateTable, RateVectorIndex, UserSet};
use ramc_core::exponent::{
    ei_exponent, em_exponent, gallager_reference_exponent, ExponentQuery, OptimizerConfig,
};
use ramc_core::info::{conditional_mi, MiQuery};
use ramc_core::region::{OperationRegion, RegionMember, RegionMode};
use ramc_core::sim::{generate_codebooks, message_count};

/// Brute-force maximizer: dense grid, then three zooms around the incumbent.
fn brute_max(f: impl Fn(f64, f64) -> f64, rho: (f64, f64), s_top: impl Fn(f64) -> f64) -> f64 {
    let (mut rlo, mut rhi) = rho;
    let mut best: (f64, f64, f64) = (f64::NEG_INFINITY, rlo, 0.0);
    let mut span_s: f64 = 1.0;
    for _ in 0..4 {
        for i in 0..=200 {
            let r = rlo + (rhi - rlo) * i as f64 / 200.0;
            let top = s_top(r);
            let (slo, shi) = if best.0.is_finite() {
                ((best.2 - span_s).max(1e-9), (best.2 + span_s).min(top))
            } else {
                (1e-9, top)
            };
            if slo > shi {
                continue;
            }
            for j in 0..=200 {
                let s = slo + (shi - slo) * j as f64 / 200.0;
                let v = f(r, s);
                if v > best.0 {
                    best = (v, r, s);
                }
            }
        }
        let half = (rhi - rlo) / 20.0;
        rlo = (best.1 - half).max(rho.0);
        rhi = (best.1 + half).min(rho.1);
        span_s /= 10.0;
    }
    best.0
}

fn bsc(p: f64) -> [[f64; 2]; 2] {
    [[1.0 - p, p], [p, 1.0 - p]]
}

/// Single-user Em with uniform binary input.
fn em_oracle(p: [[f64; 2]; 2], pt: [[f64; 2]; 2], rate_tilde: f64) -> f64 {
    brute_max(
        |rho, s| {
            let phi: f64 = (0..2)
                .map(|y| {
                    let a: f64 = (0..2).map(|x| 0.5 * p[x][y].powf(1.0 - s)).sum();
                    // b^rho in logs: the inner powers underflow for small rho.
                    let logs: Vec<f64> = (0..2).map(|x| 0.5f64.ln() + s / rho * pt[x][y].ln()).collect();
                    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let ln_b = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
                    a * (rho * ln_b).exp()
                })
                .sum();
            -rho * rate_tilde - phi.ln()
        },
        (1e-6, 1.0),
        |_| 1.0,
    )
}

/// Single-user Ei with uniform binary input.
fn ei_oracle(p: [[f64; 2]; 2], pp: [[f64; 2]; 2], rate: f64) -> f64 {
    brute_max(
        |rho, s| {
            let phi: f64 = (0..2)
                .map(|y| {
                    let a: f64 = (0..2).map(|x| 0.5 * p[x][y].powf(s / (s + rho))).sum();
                    let b: f64 = (0..2).map(|x| 0.5 * pp[x][y]).sum();
                    a.powf(s + rho) * b.powf(1.0 - s)
                })
                .sum();
            -rho * rate - phi.ln()
        },
        (1e-6, 1.0 - 1e-6),
        |rho| 1.0 - rho,
    )
}

fn binary_entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

fn one_user(rates: Vec<f64>) -> (RateTable, InputLaws) {
    let rates = RateTable::single(rates).unwrap();
    let laws = InputLaws::uniform(&rates, 2);
    (rates, laws)
}

#[test]
fn bsc_mutual_information_matches_closed_form() {
    for p in [0.0, 0.05, 0.11, 0.3, 0.5] {
        let ch = Dmc::bsc(p).unwrap();
        let (_, laws) = one_user(vec![0.0]);
        let r = RateVectorIndex(vec![0]);
        let mi = conditional_mi(&MiQuery {
            channel: &ch,
            laws: &laws,
            rates: &r,
            given: UserSet::EMPTY,
        })
        .unwrap();
        let expect = if p == 0.0 { 2f64.ln() } else { 2f64.ln() - binary_entropy(p) };
        assert!((mi - expect).abs() < 1e-14, "p={p}: {mi} vs {expect}");
    }
}

const EM_BSC_01_AT_01: f64 = 0.123_143_551_3;

#[test]
fn em_matches_brute_force_and_frozen_value() {
    let ch = Dmc::bsc(0.1).unwrap();
    let (rates, laws) = one_user(vec![0.1]);
    let r = RateVectorIndex(vec![0]);
    let em = em_exponent(
        &ExponentQuery {
            agreeing: UserSet::EMPTY,
            rates: &rates,
            laws: &laws,
            true_rates: &r,
            true_channel: &ch,
            competing_rates: &r,
            competing_channel: &ch,
        },
        &OptimizerConfig::default(),
    )
    .unwrap()
    .value;
    let oracle = em_oracle(bsc(0.1), bsc(0.1), 0.1);
    assert!((em - oracle).abs() < 1e-7, "{em} vs {oracle}");
    assert!((em - EM_BSC_01_AT_01).abs() < 1e-6, "{em}");
}

#[test]
fn reference_exponent_matches_brute_force() {
    let ch = Dmc::bsc(0.1).unwrap();
    for r in [0.0, 0.05, 0.2] {
        let g = gallager_reference_exponent(&ch, &[0.5, 0.5], r, &OptimizerConfig::default())
            .unwrap();
        let oracle = brute_max(
            |rho, _| {
                let e0: f64 = -(0..2)
                    .map(|y| {
                        let t: f64 = (0..2)
                            .map(|x| 0.5 * bsc(0.1)[x][y].powf(1.0 / (1.0 + rho)))
                            .sum();
                        t.powf(1.0 + rho)
                    })
                    .sum::<f64>()
                    .ln();
                e0 - rho * r
            },
            (1e-6, 1.0),
            |_| 1.0,
        );
        assert!((g - oracle).abs() < 1e-7, "r={r}: {g} vs {oracle}");
    }
}

const EI_BSC_01_VS_03: f64 = 0.086_645_418_4;

#[test]
fn ei_matches_brute_force_and_frozen_value() {
    let p = Dmc::bsc(0.1).unwrap();
    let q = Dmc::bsc(0.3).unwrap();
    let (rates, laws) = one_user(vec![0.05, 0.1]);
    let (a, b) = (RateVectorIndex(vec![0]), RateVectorIndex(vec![1]));
    let ei = ei_exponent(
        &ExponentQuery {
            agreeing: UserSet::EMPTY,
            rates: &rates,
            laws: &laws,
            true_rates: &a,
            true_channel: &p,
            competing_rates: &b,
            competing_channel: &q,
        },
        &OptimizerConfig::default(),
    )
    .unwrap()
    .value;
    let oracle = ei_oracle(bsc(0.1), bsc(0.3), 0.05);
    assert!((ei - oracle).abs() < 1e-7, "{ei} vs {oracle}");
    assert!((ei - EI_BSC_01_VS_03).abs() < 1e-6, "{ei}");
}

#[test]
fn two_channel_region_exponent_is_smallest_em() {
    let compound = CompoundSet::new(vec![
        ("a".into(), Dmc::bsc(0.05).unwrap()),
        ("b".into(), Dmc::bsc(0.15).unwrap()),
    ])
    .unwrap();
    let (rates, laws) = one_user(vec![0.1]);
    let region = OperationRegion::new(
        RegionMode::Finite,
        vec![
            RegionMember::new(RateVectorIndex(vec![0]), 0),
            RegionMember::new(RateVectorIndex(vec![0]), 1),
        ],
    );
    let cfg = OptimizerConfig::default();
    let limit = system_exponent(&region, &compound, &laws, &rates, &cfg).unwrap();
    let channels = [bsc(0.05), bsc(0.15)];
    let oracle = (0..2)
        .flat_map(|t| (0..2).map(move |c| (t, c)))
        .map(|(t, c)| em_oracle(channels[t], channels[c], 0.1))
        .fold(f64::INFINITY, f64::min);
    assert!((limit.value - oracle).abs() < 1e-7, "{} vs {oracle}", limit.value);

    // With only decode terms the bound is the largest per-anchor sum of exp(-N Em).
    let n = 16u64;
    let report = pes_bound_finite(&region, &compound, &laws, &rates, n, &cfg).unwrap();
    let per_anchor = (0..2)
        .map(|t| {
            (0..2)
                .map(|c| (-(n as f64) * em_oracle(channels[t], channels[c], 0.1)).exp())
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    assert!((report.raw_bound - per_anchor).abs() < 1e-6 * per_anchor);
}

#[test]
fn message_counts_by_hand() {
    assert_eq!(message_count(0.0, 7), 1);
    assert_eq!(message_count(2f64.ln(), 4), 16);
    assert_eq!(message_count(2.5f64.ln() / 10.0, 10), 2);
    assert_eq!(message_count(0.01, 10), 1);
    assert_eq!(message_count(3f64.ln(), 5), 243);
}

#[test]
fn codebook_symbols_follow_the_law() {
    let rates = RateTable::single(vec![2f64.ln()]).unwrap();
    let laws = InputLaws::new(vec![vec![vec![0.2, 0.8]]], 2).unwrap();
    let books = generate_codebooks(99, &rates, &laws, 12).unwrap();
    let count = books.count(0, 0);
    assert_eq!(count, 4096);
    let ones: usize = (0..count)
        .map(|w| books.codeword(0, 0, w).iter().filter(|&&x| x == 1).count())
        .sum();
    let total = (count * 12) as f64;
    let freq = ones as f64 / total;
    let sigma = (0.8 * 0.2 / total).sqrt();
    assert!((freq - 0.8).abs() < 5.0 * sigma, "{freq}");
}
