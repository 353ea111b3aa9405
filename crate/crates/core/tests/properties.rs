use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ramc_core::bound::BoundEngine;
use ramc_core::channel::{
    build_envelope, effective_channel, ChannelClassEnvelope, CompoundSet, Dmc, InputLaws,
    RateTable, RateVectorIndex, Shape, UserSet,
};
use ramc_core::exponent::{
    exponent, exponent_objective, ExponentKind, ExponentQuery, OptimizerConfig,
};
use ramc_core::info::{conditional_mi, conditional_mi_chain, MiQuery};
use ramc_core::logmath::linspace;
use ramc_core::region::{enumerate_partitions, OperationRegion, RegionMember, RegionMode};
use ramc_core::sim::{
    generate_codebooks, typicality_threshold, typicality_threshold_bisection, ClassModel,
    CodebookSet, Outcome, Receiver, Scenario, ThresholdParams, ThresholdRule, ThresholdSetup,
};

fn normalized(raw: Vec<f64>, width: usize) -> Vec<f64> {
    let mut out = raw;
    for row in out.chunks_mut(width) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

fn dmc(shape: Shape, raw: Vec<f64>) -> Dmc {
    let p = normalized(raw, shape.outputs);
    Dmc::from_fn(shape, |xs, y| p[shape.encode(xs) * shape.outputs + y]).unwrap()
}

prop_compose! {
    fn shape()(users in 1usize..=2, inputs in 2usize..=3, outputs in 2usize..=3) -> Shape {
        Shape::new(users, inputs, outputs).unwrap()
    }
}

prop_compose! {
    fn channel_pair()(s in shape())(
        a in prop::collection::vec(0.01f64..1.0, s.len()),
        b in prop::collection::vec(0.01f64..1.0, s.len()),
        s in Just(s),
    ) -> (Dmc, Dmc) {
        (dmc(s, a), dmc(s, b))
    }
}

prop_compose! {
    fn setup()((p, q) in channel_pair())(
        lo in prop::collection::vec(0.0f64..0.3, p.shape().users),
        gap in prop::collection::vec(0.001f64..0.3, p.shape().users),
        laws in prop::collection::vec(0.05f64..1.0, 2 * p.shape().users * p.shape().inputs),
        p in Just(p),
        q in Just(q),
    ) -> (Dmc, Dmc, RateTable, InputLaws) {
        let k = p.shape().users;
        let x = p.shape().inputs;
        let rates = RateTable::new((0..k).map(|u| vec![lo[u], lo[u] + gap[u]]).collect()).unwrap();
        let laws = normalized(laws, x);
        let laws = InputLaws::new(
            (0..k).map(|u| (0..2).map(|i| laws[(2 * u + i) * x..(2 * u + i + 1) * x].to_vec()).collect()).collect(),
            x,
        ).unwrap();
        (p, q, rates, laws)
    }
}

fn coarse() -> OptimizerConfig {
    OptimizerConfig {
        rho_grid_size: 16,
        s_grid_size: 16,
        refinement_rounds: 1,
        ..OptimizerConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn envelope_sandwiches_members((p, q) in channel_pair()) {
        let env = build_envelope("c", &[("p", &p), ("q", &q)]).unwrap();
        for ch in [&p, &q] {
            prop_assert!(env.covers(ch));
            for (i, &v) in ch.probs().iter().enumerate() {
                prop_assert!(env.pmin()[i] <= v && v <= env.pmax()[i]);
            }
        }
    }

    #[test]
    fn effective_channel_is_a_channel((p, _, _, laws) in setup(), pick in 0usize..4) {
        let k = p.shape().users;
        let r = RateVectorIndex(vec![pick % 2; k]);
        let kept = if k == 2 { UserSet::from_users(&[pick % 2]) } else { UserSet::full(1) };
        let e = effective_channel(&p, kept, &r, &laws).unwrap();
        prop_assert_eq!(e.shape().users, kept.len());
        for row in 0..e.shape().input_tuples() {
            let s: f64 = e.row(row).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_channel_composes((p, _, _, laws) in setup(), pick in 0usize..2) {
        prop_assume!(p.shape().users == 2);
        let r = RateVectorIndex(vec![pick, 1 - pick]);
        let full = effective_channel(&p, UserSet::full(2), &r, &laws).unwrap();
        prop_assert_eq!(&full, &p);
        let direct = effective_channel(&p, UserSet::from_users(&[0]), &r, &laws).unwrap();
        let via = effective_channel(&full, UserSet::from_users(&[0]), &r, &laws).unwrap();
        for (a, b) in direct.probs().iter().zip(via.probs()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mutual_information_bounds_and_routes((p, _, _, laws) in setup(), pick in 0usize..2, g in 0u32..2) {
        let k = p.shape().users;
        let r = RateVectorIndex(vec![pick; k]);
        let given = if k == 2 { UserSet(g) } else { UserSet::EMPTY };
        let q = MiQuery { channel: &p, laws: &laws, rates: &r, given };
        let direct = conditional_mi(&q).unwrap();
        let chain = conditional_mi_chain(&q).unwrap();
        let cap = (p.shape().outputs as f64).ln()
            .min((p.shape().inputs as f64).ln() * (k - given.len()) as f64);
        prop_assert!(direct >= -1e-12 && direct <= cap + 1e-12);
        prop_assert!((direct - chain).abs() < 1e-10);
    }

    #[test]
    fn optimum_dominates_the_first_grid(
        (p, q, rates, laws) in setup(),
        kind in prop_oneof![Just(ExponentKind::Em), Just(ExponentKind::Ei)],
        i in 0usize..16,
        j in 0usize..16,
    ) {
        let cfg = coarse();
        let k = p.shape().users;
        let truth = RateVectorIndex(vec![0; k]);
        let rival = RateVectorIndex(vec![1; k]);
        let query = ExponentQuery {
            agreeing: UserSet::EMPTY, rates: &rates, laws: &laws,
            true_rates: &truth, true_channel: &p,
            competing_rates: &rival, competing_channel: &q,
        };
        let best = exponent(kind, &query, &cfg).unwrap();
        let at_star = exponent_objective(kind, &query, best.rho_star, best.s_star).unwrap();
        prop_assert_eq!(at_star, best.value);
        let eps = cfg.epsilon;
        let (rho, top) = match kind {
            ExponentKind::Em => (linspace(eps, 1.0, 16)[i], 1.0),
            ExponentKind::Ei => {
                let rho = linspace(eps, 1.0 - eps, 16)[i];
                (rho, 1.0 - rho)
            }
        };
        let s = linspace(eps, top, 16)[j];
        prop_assert!(best.value >= exponent_objective(kind, &query, rho, s).unwrap());
    }

    #[test]
    fn singleton_classes_collapse((p, q, rates, laws) in setup(), agree in 0u32..2) {
        let cfg = coarse();
        let k = p.shape().users;
        let agreeing = if k == 2 { UserSet(agree) } else { UserSet::EMPTY };
        let truth = RateVectorIndex(vec![0; k]);
        let rival: RateVectorIndex = RateVectorIndex((0..k).map(|u| if agreeing.contains(u) { 0 } else { 1 }).collect());
        let ep = ChannelClassEnvelope::singleton("p", &p).unwrap();
        let eq = ChannelClassEnvelope::singleton("q", &q).unwrap();
        for kind in [ExponentKind::Em, ExponentKind::Ei] {
            let f = exponent(kind, &ExponentQuery {
                agreeing, rates: &rates, laws: &laws,
                true_rates: &truth, true_channel: &p,
                competing_rates: &rival, competing_channel: &q,
            }, &cfg).unwrap();
            let c = exponent(kind, &ExponentQuery {
                agreeing, rates: &rates, laws: &laws,
                true_rates: &truth, true_channel: &ep,
                competing_rates: &rival, competing_channel: &eq,
            }, &cfg).unwrap();
            prop_assert!((f.value - c.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn partition_count(region in 1usize..5, users in 1usize..4, collision in any::<bool>()) {
        let n = enumerate_partitions(region, users, 0, collision, u128::MAX).unwrap().count();
        let per = (1usize << (users - 1)) + collision as usize;
        prop_assert_eq!(n, per.pow(region as u32));
    }

    #[test]
    fn partitions_cover_the_region(region in 1usize..4, users in 1usize..4) {
        for p in enumerate_partitions(region, users, 0, false, u128::MAX).unwrap() {
            let blocks = p.blocks();
            let mut seen: Vec<usize> = blocks.values().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..region).collect::<Vec<_>>());
            prop_assert!(blocks.keys().all(|d| d.contains(0)));
        }
    }

    #[test]
    fn threshold_routes_agree(
        (p, q, rates, laws) in setup(),
        rho_tilde in 0.05f64..=1.0,
        frac in 0.05f64..0.95,
        y in prop::collection::vec(0usize..3, 1..30),
    ) {
        let k = p.shape().users;
        let outputs = p.shape().outputs;
        let y: Vec<usize> = y.into_iter().map(|v| v % outputs).collect();
        let params = ThresholdParams::new(rho_tilde, rho_tilde * frac).unwrap();
        let setup = ThresholdSetup::new(
            &rates, &laws, UserSet::EMPTY,
            &RateVectorIndex(vec![0; k]), &p,
            &RateVectorIndex(vec![1; k]), &q, params,
        ).unwrap();
        let a = typicality_threshold(&y, &setup).unwrap();
        let b = typicality_threshold_bisection(&y, &setup).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn ties_become_decodes_when_perturbed(
        p in 0.02f64..0.45,
        eps in 1e-4f64..0.01,
        sign in prop_oneof![Just(1.0), Just(-1.0)],
        half in 1usize..6,
    ) {
        let n = 2 * half;
        let y: Vec<usize> = (0..n).map(|j| usize::from(j < half)).collect();
        let books = CodebookSet::from_codewords(n, 2, vec![vec![vec![vec![0; n], vec![1; n]]]]).unwrap();
        let decide = |ch: Dmc| {
            let compound = CompoundSet::new(vec![("c".into(), ch)]).unwrap();
            let rates = RateTable::single(vec![2.5f64.ln() / n as f64]).unwrap();
            let laws = InputLaws::uniform(&rates, 2);
            let region = OperationRegion::new(RegionMode::Finite, vec![RegionMember::new(RateVectorIndex(vec![0]), 0)]);
            let sc = Scenario::new(compound, None, rates, laws, region).unwrap();
            Receiver::new(&sc, n, ThresholdRule::FromEiArgmax, &OptimizerConfig::default())
                .unwrap()
                .decode_slot(&y, &books)
                .outcome
        };
        prop_assert_eq!(decide(Dmc::bsc(p).unwrap()), Outcome::Collision);
        let skewed = Dmc::from_fn(Shape::new(1, 2, 2).unwrap(), |xs, out| {
            let flip = if xs[0] == 0 { p } else { p + sign * eps };
            if out == xs[0] { 1.0 - flip } else { flip }
        }).unwrap();
        prop_assert!(matches!(decide(skewed), Outcome::Decoded(_)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn class_mode_with_singletons_matches_finite_mode(
        (a, b) in channel_pair(),
        seed in any::<u64>(),
        n in 3usize..8,
        in_a in any::<bool>(),
        in_b in any::<bool>(),
    ) {
        prop_assume!(a.shape().users == 1);
        let cfg = coarse();
        let compound = CompoundSet::new(vec![("a".into(), a.clone()), ("b".into(), b.clone())]).unwrap();
        let rates = RateTable::single(vec![0.05, 0.2]).unwrap();
        let laws = InputLaws::uniform(&rates, a.shape().inputs);
        let mut members = vec![RegionMember::new(RateVectorIndex(vec![0]), 0)];
        if in_a { members.push(RegionMember::new(RateVectorIndex(vec![1]), 0)); }
        if in_b { members.push(RegionMember::new(RateVectorIndex(vec![0]), 1)); }
        let finite = Scenario::new(
            compound.clone(), None, rates.clone(), laws.clone(),
            OperationRegion::new(RegionMode::Finite, members.clone()),
        ).unwrap();
        let classes = ClassModel {
            envelopes: vec![
                ChannelClassEnvelope::singleton("a", &a).unwrap(),
                ChannelClassEnvelope::singleton("b", &b).unwrap(),
            ],
            class_of: vec![0, 1],
        };
        let class = Scenario::new(
            compound, Some(classes), rates.clone(), laws.clone(),
            OperationRegion::new(RegionMode::Class, members),
        ).unwrap();
        let params = ThresholdParams::new(0.6, 0.3).unwrap();
        let rf = Receiver::new(&finite, n, ThresholdRule::Manual(params), &cfg).unwrap();
        let rc = Receiver::new(&class, n, ThresholdRule::Manual(params), &cfg).unwrap();
        let books = generate_codebooks(seed, &rates, &laws, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let y: Vec<usize> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, 0..a.shape().outputs)).collect();
            prop_assert_eq!(rf.decode_slot(&y, &books).outcome, rc.decode_slot(&y, &books).outcome);
        }
    }

    #[test]
    fn cached_exponents_match_fresh_ones((p, q, rates, laws) in setup()) {
        let cfg = coarse();
        let k = p.shape().users;
        let compound = CompoundSet::new(vec![("p".into(), p), ("q".into(), q)]).unwrap();
        let truth = RegionMember::new(RateVectorIndex(vec![0; k]), 0);
        let rival = RegionMember::new(RateVectorIndex(vec![1; k]), 1);
        let mut engine = BoundEngine::finite(&compound, &laws, &rates, &cfg).unwrap();
        let full = UserSet::full(k);
        let first = engine.exponent(ExponentKind::Ei, full, UserSet::EMPTY, &truth, &rival).unwrap();
        let again = engine.exponent(ExponentKind::Ei, full, UserSet::EMPTY, &truth, &rival).unwrap();
        prop_assert_eq!(first, again);
        prop_assert_eq!(engine.cached_exponents(), 1);
    }
}
