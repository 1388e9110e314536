use semibandit_bic::model::{AtomPrior, BetaParams};
use semibandit_bic::registry::{BuildContext, StrategyRegistry};
use semibandit_bic::strategy::ThompsonSampling;
use semibandit_bic::verify::exact::bic_margin_exact;
use semibandit_bic::verify::mc::bic_margin_mc;
use semibandit_bic::verify::quadrature::discretize_prior;
use semibandit_bic::verify::BicMarginTable;
use semibandit_bic::{Arm, ArmFamily, Problem, ProductPrior};
use serde_json::json;

type Support = Vec<(f64, f64)>;

/// Pr[X > Y] for independent discrete X, Y without common support points.
fn pr_greater(x: &Support, y: &Support) -> f64 {
    let mut p = 0.0;
    for &(a, pa) in x {
        for &(b, pb) in y {
            if a > b {
                p += pa * pb;
            }
        }
    }
    p
}

fn bayes(prior: &Support, reward: bool) -> Support {
    let w: Vec<f64> = prior
        .iter()
        .map(|&(x, p)| p * if reward { x } else { 1.0 - x })
        .collect();
    let z: f64 = w.iter().sum();
    prior.iter().zip(w).map(|(&(x, _), w)| (x, w / z)).collect()
}

/// Two-armed Thompson Sampling margins at rounds 1 and 2 by direct
/// enumeration: `[round][arm] = (Pr[arm], E[θ_arm − θ_other | arm])`.
fn brute_force_ts(p1: &Support, p2: &Support) -> [[(f64, f64); 2]; 2] {
    let priors = [p1.clone(), p2.clone()];
    let mut joint = [[(0.0, 0.0); 2]; 2];
    let q1 = pr_greater(p1, p2);
    for &(t1, w1) in p1 {
        for &(t2, w2) in p2 {
            let w = w1 * w2;
            let theta = [t1, t2];
            let diff = [t1 - t2, t2 - t1];
            for (a, qa) in [(0, q1), (1, 1.0 - q1)] {
                joint[0][a].0 += w * qa;
                joint[0][a].1 += w * qa * diff[a];
                for (r, pr) in [(true, theta[a]), (false, 1.0 - theta[a])] {
                    let mut post = priors.clone();
                    post[a] = bayes(&priors[a], r);
                    let q = pr_greater(&post[0], &post[1]);
                    for (b, qb) in [(0, q), (1, 1.0 - q)] {
                        let m = w * qa * pr * qb;
                        joint[1][b].0 += m;
                        joint[1][b].1 += m * diff[b];
                    }
                }
            }
        }
    }
    joint.map(|round| round.map(|(p, e)| (p, e / p)))
}

fn margin(t: &BicMarginTable, arm: usize) -> f64 {
    t.row(Arm::singleton(arm)).unwrap().cells[0].margin
}

#[test]
fn exact_oracle_matches_enumeration_for_two_rounds() {
    let cases: Vec<(Support, Support)> = vec![
        (vec![(0.2, 0.5), (0.8, 0.5)], vec![(0.3, 0.5), (0.6, 0.5)]),
        (vec![(0.1, 0.3), (0.9, 0.7)], vec![(0.45, 0.4), (0.55, 0.6)]),
        (vec![(0.15, 0.2), (0.5, 0.3), (0.95, 0.5)], vec![(0.35, 0.9), (0.85, 0.1)]),
    ];
    for (p1, p2) in cases {
        let prior = ProductPrior::new(vec![
            AtomPrior::discrete(p1.clone()).unwrap(),
            AtomPrior::discrete(p2.clone()).unwrap(),
        ])
        .unwrap();
        let problem = Problem::product(prior, ArmFamily::singletons(2).unwrap()).unwrap();
        assert!(problem.order().is_identity(), "cases list the larger mean first");
        let out = bic_margin_exact(&problem, &ThompsonSampling::new(&problem), &[1, 2], 1_000_000).unwrap();
        let oracle = brute_force_ts(&p1, &p2);
        for (t, table) in out.tables.iter().enumerate() {
            for arm in 0..2 {
                let row = table.row(Arm::singleton(arm)).unwrap();
                assert!((row.pr_recommend - oracle[t][arm].0).abs() < 1e-12);
                assert!(
                    (margin(table, arm) - oracle[t][arm].1).abs() < 1e-12,
                    "round {} arm {arm}: {} vs {}",
                    t + 1,
                    margin(table, arm),
                    oracle[t][arm].1
                );
            }
        }
    }
}

#[test]
fn round_one_margins_are_prior_mean_gaps() {
    // with no data the recommendation is independent of the means, so the
    // conditional margin is the unconditional prior-mean difference
    let prior = ProductPrior::beta(&[(1.0, 1.0), (1.0, 3.0)]).unwrap();
    let problem = Problem::product(prior.clone(), ArmFamily::singletons(2).unwrap()).unwrap();
    let ts = ThompsonSampling::new(&problem);
    let mc = bic_margin_mc(&problem, &ts, &[1], 200_000, 3, 100).unwrap();
    for (arm, expect) in [(0, 0.25), (1, -0.25)] {
        let cell = &mc[0].row(Arm::singleton(arm)).unwrap().cells[0];
        assert!((cell.margin - expect).abs() <= cell.ci_radius, "{cell:?}");
    }
    let pr0 = mc[0].row(Arm::singleton(0)).unwrap().pr_recommend;
    assert!((pr0 - 0.75).abs() < 0.005, "Pr[θ₁ > θ₂] = 3/4, got {pr0}");

    // Gauss rules keep the prior means, so the exact margins are the same
    let discrete = Problem::product(discretize_prior(&prior, 5).unwrap(), ArmFamily::singletons(2).unwrap()).unwrap();
    let exact = bic_margin_exact(&discrete, &ThompsonSampling::new(&discrete), &[1], 1_000_000).unwrap();
    assert!((margin(&exact.tables[0], 0) - 0.25).abs() < 1e-12);
    assert!((margin(&exact.tables[0], 1) + 0.25).abs() < 1e-12);
}

#[test]
fn quadrature_converges_on_round_two() {
    // exact margins on finer Gauss rules approach the Beta-prior Monte Carlo value
    let prior = ProductPrior::beta(&[(2.0, 1.0), (1.0, 2.0)]).unwrap();
    let family = ArmFamily::singletons(2).unwrap();
    let problem = Problem::product(prior.clone(), family.clone()).unwrap();
    let mc = bic_margin_mc(&problem, &ThompsonSampling::new(&problem), &[2], 400_000, 8, 100).unwrap();
    let cell = &mc[0].row(Arm::singleton(1)).unwrap().cells[0];
    let discrete = Problem::product(discretize_prior(&prior, 12).unwrap(), family).unwrap();
    let exact = bic_margin_exact(&discrete, &ThompsonSampling::new(&discrete), &[2], 10_000_000).unwrap();
    let e = margin(&exact.tables[0], 1);
    assert!((e - cell.margin).abs() <= cell.ci_radius + 1e-3, "exact {e} vs mc {cell:?}");
}

#[test]
fn exogenous_composite_is_plain_exogenous_ts() {
    let prior = ProductPrior::beta(&[(1.0, 1.0), (1.0, 3.0)]).unwrap();
    let problem = Problem::product(prior, ArmFamily::singletons(2).unwrap()).unwrap();
    let registry = StrategyRegistry::with_builtins();
    let ctx = BuildContext {
        problem: &problem,
        registry: &registry,
        horizon: 10,
        seed: 1,
        budget: 1000,
    };
    let composite = registry
        .build(&ctx, &json!({"name": "composite", "bootstrap": {"name": "exogenous", "n": 7}}))
        .unwrap();
    let direct = ThompsonSampling::with_exogenous(&problem, 7);
    assert_eq!(composite.bootstrap_rounds(), 0);
    let a = bic_margin_mc(&problem, composite.as_ref(), &[1, 5], 5000, 2, 100).unwrap();
    let b = bic_margin_mc(&problem, &direct, &[1, 5], 5000, 2, 100).unwrap();
    assert_eq!(a, b);
}

#[test]
fn beta_params_reject_nonpositive() {
    assert!(BetaParams::new(0.0, 1.0).is_err());
    assert!(BetaParams::new(1.0, f64::NAN).is_err());
}
