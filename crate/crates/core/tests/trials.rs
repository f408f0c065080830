use std::collections::HashMap;

use dosefind::designs::{Design, DesignConfig, DesignKind};
use dosefind::sim::{
    evaluate, random_scenario, random_scenario_with_position, scenario_rng, trial_rng, MtdPosition,
    MtdRule, MtdSupport, Scenario, SimSettings,
};
use dosefind::trial::{run_trial, Decision, StopReason, TrialOutcome, TrialSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rule() -> MtdRule {
    MtdRule::new(0.3, 0.05, 0.05).unwrap()
}

/// Exclusion never shrinks, no cohort lands on an excluded dose, no upward
/// skips, no escalation after a cohort above the target, sample size adds up.
fn check_invariants(out: &TrialOutcome, spec: &TrialSpec) {
    let log = &out.state.cohort_log;
    let mut excluded_from = spec.doses;
    for (i, c) in log.iter().enumerate() {
        assert!(c.dose < excluded_from, "cohort {i} on excluded dose");
        if c.decision == Decision::DeEscalateExclude || c.decision == Decision::Stop {
            excluded_from = excluded_from.min(c.dose);
        }
        if let Some(next) = c.next {
            assert!(next <= c.dose + 1, "skip at cohort {i}");
            if f64::from(c.dlts) > spec.design.target * f64::from(c.size) {
                assert!(next <= c.dose, "incoherent escalation at cohort {i}");
            }
        }
    }
    let total: u32 = log.iter().map(|c| c.size).sum();
    assert_eq!(total, out.state.total_n());
    assert_eq!(total, spec.cohort_size * log.len() as u32);
    assert!(total <= spec.max_n);
    let first_excluded = out
        .state
        .excluded
        .iter()
        .position(|&e| e)
        .unwrap_or(spec.doses);
    assert!(out.state.excluded[first_excluded..].iter().all(|&e| e));
}

#[test]
fn all_toxic_truth_stops_early() {
    for kind in DesignKind::ALL {
        let spec = TrialSpec::new(DesignConfig::new(kind), 4);
        let design = Design::build(&spec.design, 4).unwrap();
        let mut stops = 0;
        let mut small = 0;
        for r in 0..1000 {
            let out = run_trial(&spec, &design, &[0.99; 4], &mut trial_rng(11, 0, r)).unwrap();
            check_invariants(&out, &spec);
            if out.state.stopped == Some(StopReason::SafetyStop) {
                stops += 1;
                assert_eq!(out.mtd, None);
            }
            small += u32::from(out.state.total_n() <= 2 * spec.cohort_size);
        }
        assert!(stops > 950, "{kind}: {stops}");
        assert!(small > 950, "{kind}: {small}");
    }
}

#[test]
fn invariants_hold_on_random_scenarios() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in DesignKind::ALL {
        for i in 0..40 {
            let s = random_scenario("x", 4 + i % 3, &rule(), MtdSupport::DosesAndNone, &mut rng)
                .unwrap();
            let spec = TrialSpec::new(DesignConfig::new(kind), s.doses());
            let design = Design::build(&spec.design, s.doses()).unwrap();
            for r in 0..10 {
                let out = run_trial(&spec, &design, &s.probs, &mut trial_rng(5, i, r)).unwrap();
                check_invariants(&out, &spec);
                assert_eq!(
                    out,
                    run_trial(&spec, &design, &s.probs, &mut trial_rng(5, i, r)).unwrap()
                );
            }
        }
    }
}

#[test]
fn generator_positions_are_uniform() {
    for support in [MtdSupport::Doses, MtdSupport::DosesAndNone] {
        let cats = support.categories(5);
        let mut counts: HashMap<MtdPosition, usize> = HashMap::new();
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..draws {
            let (s, pos) =
                random_scenario_with_position("x", 5, &rule(), support, &mut rng).unwrap();
            assert!(s.probs.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(s.mtd, rule().mtd(&s.probs));
            *counts.entry(pos).or_default() += 1;
        }
        for c in cats.iter() {
            let f = counts[c] as f64 / draws as f64;
            assert!(
                (f - 1.0 / cats.len() as f64).abs() < 0.02,
                "{support:?} {c:?}: {f}"
            );
        }
    }
}

#[test]
fn pseudo_uniform_places_mtd_closest() {
    for i in 0..2000 {
        let (s, pos) = random_scenario_with_position(
            "x",
            6,
            &rule(),
            MtdSupport::PseudoUniform,
            &mut scenario_rng(3, i),
        )
        .unwrap();
        let MtdPosition::Dose(k) = pos else {
            panic!("no-MTD category drawn")
        };
        let gap = |d: usize| (s.probs[d] - 0.3).abs();
        assert!((0..6).all(|d| gap(k) <= gap(d)));
        assert!(s.probs.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn scenario_draws_are_reproducible() {
    let a = random_scenario("a", 5, &rule(), MtdSupport::Doses, &mut scenario_rng(1, 2)).unwrap();
    let b = random_scenario("a", 5, &rule(), MtdSupport::Doses, &mut scenario_rng(1, 2)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn metrics_are_bounded_and_reproducible() {
    let scenarios: Vec<Scenario> = (0..6)
        .map(|i| {
            random_scenario(
                format!("s{i}"),
                4 + i % 3,
                &rule(),
                MtdSupport::Doses,
                &mut scenario_rng(9, i),
            )
            .unwrap()
        })
        .collect();
    let cfgs: Vec<DesignConfig> = DesignKind::ALL
        .iter()
        .map(|&k| DesignConfig::new(k))
        .collect();
    let settings = SimSettings::new(30, 17);
    let e = evaluate(&cfgs, &scenarios, &settings).unwrap();
    for d in &e.designs {
        for m in &d.per_scenario {
            assert!(m.to_array().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(m.pat_at_mtd + m.pat_over <= 1.0 + 1e-12);
        }
        assert!(d.sd.to_array().iter().all(|v| *v >= 0.0));
    }
    assert_eq!(e, evaluate(&cfgs, &scenarios, &settings).unwrap());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    assert_eq!(
        e,
        pool.install(|| evaluate(&cfgs, &scenarios, &settings))
            .unwrap()
    );
}

#[test]
fn more_replicates_stay_within_monte_carlo_error() {
    let s = vec![Scenario::new("s", vec![0.05, 0.12, 0.3, 0.48], &rule()).unwrap()];
    let cfg = [DesignConfig::new(DesignKind::Boin)];
    let a = evaluate(&cfg, &s, &SimSettings::new(1000, 1))
        .unwrap()
        .designs[0]
        .mean
        .correct_sel;
    let b = evaluate(&cfg, &s, &SimSettings::new(4000, 2))
        .unwrap()
        .designs[0]
        .mean
        .correct_sel;
    // binomial standard error of the difference is below 0.018
    assert!((a - b).abs() < 4.0 * 0.018, "{a} vs {b}");
}

#[test]
fn boin_and_ccd_trajectories_coincide() {
    let scenarios: Vec<Scenario> = (0..20)
        .map(|i| {
            random_scenario(
                format!("s{i}"),
                5,
                &rule(),
                MtdSupport::Doses,
                &mut scenario_rng(6, i),
            )
            .unwrap()
        })
        .collect();
    let cfgs = [
        DesignConfig::new(DesignKind::Boin),
        DesignConfig::new(DesignKind::Ccd),
    ];
    let e = evaluate(&cfgs, &scenarios, &SimSettings::new(50, 6)).unwrap();
    assert_eq!(e.agreement[0].identical, e.agreement[0].total);
}
