//! Invariants checked over random economies, shocks and samples.

mod common;

use chainstress::debtrank::{DebtRankConfig, InterbankLeverage};
use chainstress::metrics::{firm_risk, ols_fit, risk_measures, summarize};
use chainstress::{Engine, PipelineConfig, PropagationConfig, Regimes, ShockVector};
use proptest::prelude::*;

fn economy() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2usize..=10, 1usize..=4)
}

proptest! {
    // A fixed generator seed keeps runs reproducible.
    #![proptest_config(ProptestConfig {
        cases: 64,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed_cafe),
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn production_stays_below_the_shock((seed, n, m) in economy(), sigma in 0.0f64..=1.0) {
        let g = common::random_economy(seed, n, m);
        let psi = common::random_shock(seed, n);
        let engine = Engine::new(g).unwrap();
        let cfg = PropagationConfig { substitutability: sigma, ..Default::default() };
        let p = engine.propagate(&ShockVector::new(psi.clone()).unwrap(), &cfg).unwrap();
        for (h, s) in p.h.iter().zip(&psi) {
            prop_assert!((0.0..=1.0).contains(h));
            prop_assert!(h <= s);
        }
        prop_assert!(p.iterations <= cfg.max_iter);
    }

    #[test]
    fn contagion_never_reduces_losses((seed, n, m) in economy()) {
        let g = common::random_economy(seed, n, m);
        let psi = common::random_shock(seed, n);
        let engine = Engine::new(g).unwrap();
        let out = engine
            .run_scenario(&ShockVector::new(psi).unwrap(), &PipelineConfig::default())
            .unwrap();
        let l = &out.ledger;
        for k in 0..m {
            prop_assert!(l.di[k] >= 0.0 && l.sc[k] >= 0.0 && l.ib_wo[k] >= 0.0);
            prop_assert!(l.ib_w[k] >= l.ib_wo[k], "bank {k}: {} < {}", l.ib_w[k], l.ib_wo[k]);
            prop_assert!(l.total_w(k) >= l.total_wo(k));
        }
    }

    #[test]
    fn fsri_plus_dominates_fsri((seed, n, m) in economy()) {
        let engine = Engine::new(common::random_economy(seed, n, m)).unwrap();
        for i in 0..n {
            let r = firm_risk(&engine, i, &PipelineConfig::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.fsri));
            prop_assert!((0.0..=1.0).contains(&r.fsri_plus));
            prop_assert!(r.fsri_plus >= r.fsri);
            if engine.economy().interbank.edges.is_empty() {
                prop_assert_eq!(r.fsri_plus, r.fsri);
            }
        }
    }

    #[test]
    fn common_equity_rescaling_keeps_the_ranking((seed, n, m) in economy(), c in 1.0f64..10.0) {
        let mut g = common::random_economy(seed, n, m);
        // Large equities keep every loss fraction below one.
        for b in &mut g.banks {
            b.tier1_equity *= 100.0;
        }
        let mut scaled = g.clone();
        for b in &mut scaled.banks {
            b.tier1_equity *= c;
        }
        let cfg = PipelineConfig::default();
        let a = Engine::new(g).unwrap();
        let b = Engine::new(scaled).unwrap();
        let fa: Vec<f64> = (0..n).map(|i| firm_risk(&a, i, &cfg).unwrap().fsri).collect();
        let fb: Vec<f64> = (0..n).map(|i| firm_risk(&b, i, &cfg).unwrap().fsri).collect();
        for i in 0..n {
            for j in 0..n {
                if fa[i] > fa[j] * (1.0 + 1e-9) {
                    prop_assert!(fb[i] > fb[j]);
                }
            }
        }
    }

    #[test]
    fn debtrank_is_linear_without_clamps((seed, _n, m) in economy(), alpha in prop::sample::select(vec![0.1, 0.5])) {
        let g = common::random_economy(seed, 2, m);
        let lev = InterbankLeverage::new(&g);
        let s: Vec<f64> = (0..m).map(|k| 1e-3 * (k as f64 + 1.0)).collect();
        let cfg = DebtRankConfig { epsilon: 0.0, max_iter: 30, ..Default::default() };
        let full = lev.run(&s, &cfg).unwrap();
        prop_assume!(full.final_loss.iter().all(|&v| v < 1.0));
        let scaled: Vec<f64> = s.iter().map(|v| alpha * v).collect();
        let part = lev.run(&scaled, &cfg).unwrap();
        for (a, b) in part.final_loss.iter().zip(&full.final_loss) {
            prop_assert!((a - alpha * b).abs() < 1e-9);
        }
    }

    #[test]
    fn debtrank_is_monotone((seed, _n, m) in economy(), lo in prop::collection::vec(0.0f64..0.5, 4), extra in prop::collection::vec(0.0f64..0.5, 4)) {
        let g = common::random_economy(seed, 2, m);
        let lev = InterbankLeverage::new(&g);
        let a: Vec<f64> = lo[..m].to_vec();
        let b: Vec<f64> = a.iter().zip(&extra).map(|(x, y)| x + y).collect();
        let cfg = DebtRankConfig { epsilon: 0.0, max_iter: 50, ..Default::default() };
        let ra = lev.run(&a, &cfg).unwrap();
        let rb = lev.run(&b, &cfg).unwrap();
        for (x, y) in ra.final_loss.iter().zip(&rb.final_loss) {
            prop_assert!(x <= y);
        }
    }

    #[test]
    fn shortfall_bounds(samples in prop::collection::vec(0.0f64..1.0, 1..300)) {
        let r = risk_measures(&samples).unwrap();
        prop_assert!(r.es95 >= r.var95);
        prop_assert!(r.el <= r.es95 + 1e-15);
        prop_assert!(r.var95 >= 0.0);
    }

    #[test]
    fn summaries_ignore_scenario_order((seed, n, m) in economy(), rot in 0usize..8) {
        let engine = Engine::new(common::random_economy(seed, n, m)).unwrap();
        let outcomes: Vec<_> = (0..8u64)
            .map(|s| {
                let psi = ShockVector::new(common::random_shock(seed ^ s, n)).unwrap();
                engine.run_scenario(&psi, &PipelineConfig::default()).unwrap()
            })
            .collect();
        let mut ledgers: Vec<_> = outcomes.iter().map(|o| &o.ledger).collect();
        let w = engine.equity_weights();
        let a = summarize(&ledgers, &w, Regimes::Both).unwrap();
        ledgers.rotate_left(rot);
        ledgers.reverse();
        let b = summarize(&ledgers, &w, Regimes::Both).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.summary.el - y.summary.el).abs() < 1e-9);
            prop_assert!((x.summary.var95 - y.summary.var95).abs() < 1e-9);
            prop_assert!((x.summary.es95 - y.summary.es95).abs() < 1e-9);
        }
    }

    #[test]
    fn ols_recovers_the_slope(beta in -5.0f64..5.0, sigma in 0.01f64..2.0, seed in any::<u64>()) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 20.0).collect();
        let y: Vec<f64> = x.iter().map(|v| beta * v + noise.sample(&mut rng)).collect();
        let f = ols_fit(&x, &y, false).unwrap();
        prop_assert!((f.slope - beta).abs() <= 3.0 * f.slope_se, "{} vs {beta} (se {})", f.slope, f.slope_se);
        prop_assert!((0.0..=1.0).contains(&f.r_squared));
    }
}
