use proptest::prelude::*;
use qbayes::decision::{bayes_risk, bayes_solution_enumerate, composite_labels, dominates, enumerate_rules, posterior_risk};
use qbayes::inference::{credible_interval, hqpd_set, point_estimate};
use qbayes::instrument::statistically_equivalent;
use qbayes::matcore::{c, trace_distance};
use qbayes::measure::{induced_measure, rn_derivative};
use qbayes::posterior::{outcome_distribution, posterior_family, posterior_state, sample_trajectory};
use qbayes::random::{ginibre, random_density, random_instrument, random_povm, random_unitary};
use qbayes::rng::substream;
use qbayes::{
    compose, dilate, Action, CMatrix, DensityMatrix, EstimatorSpec, KrausInstrument, LossSpec, OutcomeSpace,
    ParamModel, PosteriorDist, Povm, RiskMode,
};
use rand::Rng;

fn hermitian(rng: &mut impl Rng, d: usize) -> CMatrix {
    let g = ginibre(rng, d, d);
    (g.clone() + g.adjoint()).scale_real(0.5)
}

fn random_dist(seed: u64, n: usize) -> PosteriorDist {
    let mut rng = substream(seed, 0);
    let grid: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1).max(1) as f64 + rng.random::<f64>() * 0.01).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
    let total: f64 = raw.iter().sum();
    PosteriorDist::new(grid, raw.iter().map(|m| m / total).collect()).unwrap()
}

/// Diagonal model on `C^n`: `theta_i` is prepared as `|i><i|` and read out
/// through a diagonal instrument with random likelihoods.
fn diagonal_model(seed: u64, n: usize, outcomes: usize) -> (ParamModel, KrausInstrument, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = substream(seed, 1);
    let grid: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let raw: Vec<f64> = (0..n).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let lik: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let r: Vec<f64> = (0..outcomes).map(|_| 0.05 + rng.random::<f64>()).collect();
            let s: f64 = r.iter().sum();
            r.into_iter().map(|p| p / s).collect()
        })
        .collect();
    let povm = Povm::new(
        OutcomeSpace::indexed(n).unwrap().with_embedding(grid.clone()).unwrap(),
        (0..n).map(|i| CMatrix::unit(n, i, i)).collect(),
    )
    .unwrap();
    let prior = DensityMatrix::new(CMatrix::diag_real(&weights)).unwrap();
    let states = (0..n).map(|i| DensityMatrix::basis(n, i).unwrap()).collect();
    let model = ParamModel::new(grid, povm, prior, Some(states), Some(weights.clone())).unwrap();
    let kraus = (0..outcomes)
        .map(|x| vec![CMatrix::diag_real(&(0..n).map(|i| lik[i][x].sqrt()).collect::<Vec<_>>())])
        .collect();
    let inst = KrausInstrument::new(OutcomeSpace::indexed(outcomes).unwrap(), kraus).unwrap();
    (model, inst, lik, weights)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disintegration_reproduces_event_action(seed in any::<u64>(), d in 1usize..=4, m in 1usize..=4, k in 1usize..=3, mask in any::<u8>()) {
        let mut rng = substream(seed, 0);
        let inst = random_instrument(&mut rng, d, m, k);
        let rho = random_density(&mut rng, d, d);
        let a = hermitian(&mut rng, d);
        let event: Vec<String> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| i.to_string()).collect();
        let family = posterior_family(&inst, &rho).unwrap();
        let mut lhs = 0.0;
        for x in &event {
            if let Some(f) = family.state(x) {
                lhs += f.matrix().trace_product(&a).re * family.dist().prob(x).unwrap();
            }
        }
        let rhs = inst.apply_on_event(&event, &rho).unwrap().trace_product(&a).re;
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn unitary_mixing_of_kraus_operators_is_invisible(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = substream(seed, 0);
        let inst = random_instrument(&mut rng, d, 2, 2);
        let mixed: Vec<Vec<CMatrix>> = inst
            .kraus()
            .iter()
            .map(|ops| {
                let w = random_unitary(&mut rng, ops.len());
                (0..ops.len())
                    .map(|j| ops.iter().enumerate().fold(CMatrix::zeros(d, d), |acc, (l, k)| acc + k.scale(w.get(j, l))))
                    .collect()
            })
            .collect();
        let other = KrausInstrument::new(inst.space().clone(), mixed).unwrap();
        let rho = random_density(&mut rng, d, d);
        for i in 0..2 {
            prop_assert!(inst.apply_outcome(i, rho.matrix()).max_abs_diff(&other.apply_outcome(i, rho.matrix())) < 1e-12);
        }
    }

    #[test]
    fn stepwise_posterior_matches_composite(seed in any::<u64>(), d in 1usize..=3, m1 in 1usize..=3, m2 in 1usize..=3) {
        let mut rng = substream(seed, 0);
        let a = random_instrument(&mut rng, d, m1, 2);
        let b = random_instrument(&mut rng, d, m2, 1);
        let rho = random_density(&mut rng, d, d);
        let ab = compose(&[a.clone(), b.clone()]).unwrap();
        let joint = outcome_distribution(&ab, &rho).unwrap();
        let first = outcome_distribution(&a, &rho).unwrap();
        for x in 0..m1 {
            let mid = posterior_state(&a, &rho, &x.to_string()).unwrap();
            let second = outcome_distribution(&b, &mid).unwrap();
            for y in 0..m2 {
                let label = format!("{x}|{y}");
                let chained = first.probs()[x] * second.probs()[y];
                prop_assert!((joint.prob(&label).unwrap() - chained).abs() <= 1e-10);
                let step = posterior_state(&b, &mid, &y.to_string()).unwrap();
                let direct = posterior_state(&ab, &rho, &label).unwrap();
                prop_assert!(trace_distance(step.matrix(), direct.matrix()) <= 1e-9);
            }
        }
    }

    #[test]
    fn composition_is_associative(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = substream(seed, 0);
        let insts: Vec<KrausInstrument> = (0..3).map(|_| random_instrument(&mut rng, d, 2, 1)).collect();
        let flat = compose(&insts).unwrap();
        let left = compose(&[compose(&insts[..2]).unwrap(), insts[2].clone()]).unwrap();
        let right = compose(&[insts[0].clone(), compose(&insts[1..]).unwrap()]).unwrap();
        prop_assert_eq!(flat.space().labels(), left.space().labels());
        prop_assert_eq!(flat.space().labels(), right.space().labels());
        let rho = random_density(&mut rng, d, d);
        for i in 0..flat.space().len() {
            let f = flat.apply_outcome(i, rho.matrix());
            prop_assert!(f.max_abs_diff(&left.apply_outcome(i, rho.matrix())) < 1e-12);
            prop_assert!(f.max_abs_diff(&right.apply_outcome(i, rho.matrix())) < 1e-12);
        }
    }

    #[test]
    fn dilation_recovers_the_instrument(seed in any::<u64>(), d in 1usize..=3, m in 1usize..=3, k in 1usize..=2) {
        let mut rng = substream(seed, 0);
        let inst = random_instrument(&mut rng, d, m, k);
        let im = dilate(&inst).unwrap();
        let back = im.corresponding_instrument().unwrap();
        for e in CMatrix::units(d) {
            for i in 0..m {
                prop_assert!(im.reconstructed_dual(i, &e).unwrap().max_abs_diff(&inst.dual_outcome(i, &e)) <= 1e-8);
                prop_assert!(back.dual_outcome(i, &e).max_abs_diff(&inst.dual_outcome(i, &e)) <= 1e-8);
            }
        }
        prop_assert!(statistically_equivalent(&im, &dilate(&back).unwrap()).unwrap());
    }

    #[test]
    fn rn_derivative_integrates_back_to_the_observable(seed in any::<u64>(), d in 1usize..=4, m in 1usize..=5) {
        let mut rng = substream(seed, 0);
        let nu = random_povm(&mut rng, d, m);
        let rho = random_density(&mut rng, d, d);
        let dist = induced_measure(&nu, &rho).unwrap();
        let deriv = rn_derivative(&nu, &rho).unwrap();
        for ((_, f), (e, p)) in deriv.iter().zip(nu.effects().iter().zip(dist.probs())) {
            prop_assert!(f.scale_real(*p).max_abs_diff(e) < 1e-9);
            prop_assert!((rho.matrix().trace_product(f).re - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn estimators_minimize_posterior_risk(seed in any::<u64>(), n in 2usize..=12, k0 in 0.1f64..5.0, k1 in 0.1f64..5.0) {
        let dist = random_dist(seed, n);
        let (lo, hi) = (dist.grid()[0] - 0.1, dist.grid()[n - 1] + 0.1);
        let actions: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).chain(dist.grid().iter().copied()).collect();
        let cases = [
            (EstimatorSpec::WeightedMean { weights: None }, LossSpec::WeightedQuadratic { weights: None }),
            (EstimatorSpec::linear(k0, k1).unwrap(), LossSpec::Linear { k0, k1 }),
            (EstimatorSpec::Mode, LossSpec::ZeroOne { eps: 1e-6 }),
        ];
        for (est, loss) in cases {
            let y = point_estimate(&dist, &est).unwrap();
            let at = posterior_risk(&dist, &loss, &Action::Real(y)).unwrap();
            for &a in &actions {
                let r = posterior_risk(&dist, &loss, &Action::Real(a)).unwrap();
                prop_assert!(r - at >= -1e-9, "{} at {y}: {at} > {r} at {a}", est.name());
            }
        }
    }

    #[test]
    fn credible_sets_cover_and_hqpd_is_a_level_set(seed in any::<u64>(), n in 2usize..=20, alpha in 0.01f64..0.6) {
        let dist = random_dist(seed, n);
        let ci = credible_interval(&dist, alpha).unwrap();
        let inside: f64 = dist.grid().iter().zip(dist.mass()).filter(|(t, _)| **t >= ci.lo && **t <= ci.hi).map(|(_, m)| m).sum();
        prop_assert!(inside >= 1.0 - alpha - 1e-12);
        let h = hqpd_set(&dist, alpha).unwrap();
        prop_assert!(h.mass >= 1.0 - alpha - 1e-12);
        for (t, m) in dist.grid().iter().zip(dist.mass()) {
            if !h.values.contains(t) {
                prop_assert!(*m <= h.threshold);
            }
        }
    }

    #[test]
    fn bayes_solution_beats_every_rule(seed in any::<u64>(), n in 2usize..=3, outcomes in 2usize..=3) {
        let (model, inst, _, _) = diagonal_model(seed, n, outcomes);
        let insts = [inst];
        let actions: Vec<Action> = (0..n).map(|i| Action::Real(i as f64)).chain([Action::Real(0.5)]).collect();
        let loss = LossSpec::WeightedQuadratic { weights: None };
        let best = bayes_solution_enumerate(&model, &insts, &loss, &actions).unwrap();
        let best_risk = bayes_risk(&model, &insts, &best, &loss, RiskMode::Exact).unwrap().bayes;
        let labels = composite_labels(&insts).unwrap();
        for rule in enumerate_rules(&labels, &actions).unwrap() {
            prop_assert!(best_risk <= bayes_risk(&model, &insts, &rule, &loss, RiskMode::Exact).unwrap().bayes + 1e-12);
        }
    }

    #[test]
    fn bayes_risk_splits_over_outcomes_on_diagonal_models(seed in any::<u64>(), n in 2usize..=4, outcomes in 2usize..=4) {
        let (model, inst, lik, weights) = diagonal_model(seed, n, outcomes);
        let loss = LossSpec::Linear { k0: 1.0, k1: 2.0 };
        let mut rng = substream(seed, 2);
        let labels: Vec<String> = (0..outcomes).map(|x| x.to_string()).collect();
        let acts: Vec<(String, Action)> = labels.iter().map(|l| (l.clone(), Action::Real(rng.random::<f64>() * n as f64))).collect();
        let rule = qbayes::DecisionRule::new(acts.clone());
        let total = bayes_risk(&model, &[inst.clone()], &rule, &loss, RiskMode::Exact).unwrap().bayes;
        let mut split = 0.0;
        for (x, (_, a)) in acts.iter().enumerate() {
            let marginal: f64 = (0..n).map(|i| weights[i] * lik[i][x]).sum();
            let post = posterior_state(&inst, model.prior_state(), &x.to_string()).unwrap();
            let dist = qbayes::inference::posterior_parameter_distribution(&model, &post).unwrap();
            split += marginal * posterior_risk(&dist, &loss, a).unwrap();
        }
        prop_assert!((total - split).abs() < 1e-12, "{total} vs {split}");
    }

    #[test]
    fn dominance_is_strict_and_shift_invariant(a in prop::collection::vec(0.0f64..1.0, 1..6), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| if i == 0 { x + 0.5 } else { *x }).collect();
        prop_assert!(dominates(&a, &b));
        prop_assert!(!dominates(&b, &a));
        prop_assert!(!dominates(&a, &a));
        let (sa, sb): (Vec<f64>, Vec<f64>) = a.iter().zip(&b).map(|(x, y)| (x + shift, y + shift)).unzip();
        prop_assert!(dominates(&sa, &sb));
    }

    #[test]
    fn single_outcome_chain_is_deterministic(seed in any::<u64>(), d in 1usize..=3, steps in 1usize..=20) {
        let mut rng = substream(seed, 0);
        let ch = random_instrument(&mut rng, d, 1, 2);
        let rho = random_density(&mut rng, d, d);
        let run = qbayes::asymptotics::run_chain(&ch, &rho, steps, seed, &[]).unwrap();
        let mut s = rho.matrix().clone();
        for state in &run.trajectory.states {
            s = ch.apply_channel(&s).unwrap();
            prop_assert!(state.matrix().max_abs_diff(&s) < 1e-10);
        }
        prop_assert!(run.trajectory.logprob.abs() < 1e-12);
    }
}

#[test]
fn averaged_trajectories_follow_the_unconditional_channel() {
    let reps = 10_000u64;
    let steps = 10;
    let mut rng = substream(99, 0);
    let inst = random_instrument(&mut rng, 2, 2, 1);
    let rho = random_density(&mut rng, 2, 2);
    let insts = vec![inst.clone(); steps];
    let mut sums = vec![CMatrix::zeros(2, 2); steps];
    for r in 0..reps {
        let t = sample_trajectory(&insts, &rho, r).unwrap();
        for (acc, s) in sums.iter_mut().zip(&t.states) {
            *acc = acc.clone() + s.matrix().clone();
        }
    }
    let mut exact = rho.matrix().clone();
    let bound = 5.0 / (reps as f64).sqrt();
    for sum in &sums {
        exact = inst.apply_channel(&exact).unwrap();
        let mean = sum.scale_real(1.0 / reps as f64);
        assert!(mean.max_abs_diff(&exact) <= bound, "{} > {bound}", mean.max_abs_diff(&exact));
    }
}

#[test]
fn two_point_model_recovers_classical_posterior() {
    let lik = [[0.6, 0.4], [0.2, 0.8]];
    let kraus = (0..2).map(|x| vec![CMatrix::diag_real(&[f64::sqrt(lik[0][x]), f64::sqrt(lik[1][x])])]).collect();
    let inst = KrausInstrument::new(OutcomeSpace::indexed(2).unwrap(), kraus).unwrap();
    let prior = DensityMatrix::maximally_mixed(2).unwrap();
    let post = posterior_state(&inst, &prior, "1").unwrap();
    assert!((post.matrix().get(0, 0).re - 1.0 / 3.0).abs() < 1e-12);
    assert!((post.matrix().get(1, 1).re - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(post.matrix().get(0, 1), c(0.0, 0.0));
}
