mod common;

use carta_core::generator::{generate_candidates, CandidateSet};
use carta_core::planner::{plan_from_candidates, run_suite};
use carta_core::{plan, DlsTracker, LatentSampler, PlannerParams, TickClock};
use common::{planar_arc, toy_params, toy_problems, traced_problem};

#[test]
fn toy_suite_succeeds_every_repeat() {
    let problems = toy_problems();
    let metrics = run_suite(&problems, &toy_params(0), 10, 2.5, || TickClock::new(1e-4)).unwrap();
    for m in &metrics {
        assert_eq!(m.runs, 10);
        assert_eq!(m.success_rate_budget, 1.0, "{}", m.name);
        assert!(m.median_time_to_valid.is_finite());
    }
}

#[test]
fn results_are_valid_and_histories_monotone() {
    for problem in toy_problems() {
        let result = plan(&problem, &toy_params(3), &TickClock::new(1e-4)).unwrap();
        assert!(result.success, "{}", problem.name);
        let traj = result.trajectory.as_ref().unwrap();
        let report = carta_core::optimizer::validate(
            traj,
            problem.path.poses(),
            &problem.chain,
            &problem.obstacles,
            &PlannerParams::default().optimizer,
        )
        .unwrap();
        assert!(report.valid());
        let scores: Vec<f64> = result
            .best_length_history()
            .iter()
            .flatten()
            .map(|l| carta_core::optimizer::length_score(*l))
            .collect();
        assert!(scores.windows(2).all(|w| w[1] <= w[0]), "{}", problem.name);
        assert_eq!(result.time_to_valid, result.emissions.iter().find(|e| e.valid).map(|e| e.time));
        assert_eq!(result.stats.penalty_evaluations, result.stats.cached_nodes);
    }
}

#[test]
fn same_seed_same_result() {
    let problem = &toy_problems()[2];
    let a = plan(problem, &toy_params(7), &TickClock::new(1e-4)).unwrap();
    let b = plan(problem, &toy_params(7), &TickClock::new(1e-4)).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.emissions, b.emissions);
    assert_eq!(a.stats, b.stats);
}

// Two copies of the reference arc with odd waypoints shifted by 0.4 and
// 0.5 rad: every interleaving jumps, so the search must densify first.
#[test]
fn rough_candidates_trigger_densification() {
    let reference = planar_arc(20);
    let problem = traced_problem("arc", common::planar3(), &reference, vec![]);
    let jumpy: Vec<Vec<_>> = (0..2)
        .map(|k| {
            reference
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let mut q = q.clone();
                    if i % 2 == 1 {
                        q[0] += 0.4 + 0.1 * k as f64;
                    }
                    q
                })
                .collect()
        })
        .collect();
    let latents = carta_core::generator::sample_latents(3, 2, 0).unwrap();
    let set = CandidateSet::from_plans(jumpy, latents).unwrap();
    let gen = DlsTracker::new(&problem.chain, Default::default());
    let params = PlannerParams {
        k: 2,
        densification_increment: 8,
        ..toy_params(0)
    };
    let mut sampler = LatentSampler::new(3, 11);
    let result = plan_from_candidates(&problem, &params, &gen, set, &mut sampler, &TickClock::new(1e-4)).unwrap();
    assert!(result.stats.densify_rounds >= 1);
    assert!(result.success);
    assert_eq!(result.stats.candidates, 2 + 8 * result.stats.densify_rounds);
    assert_eq!(result.stats.penalty_evaluations, result.stats.cached_nodes);
    assert!(result.stats.penalty_evaluations <= result.stats.candidates * 20);
}

#[test]
fn invalid_parameters_are_rejected() {
    let problem = &toy_problems()[0];
    let clock = TickClock::new(1e-4);
    for params in [
        PlannerParams { k: 0, ..toy_params(0) },
        PlannerParams { budget_s: 0.0, ..toy_params(0) },
        PlannerParams { retry_mjac_revolute: -1.0, ..toy_params(0) },
    ] {
        assert!(plan(problem, &params, &clock).is_err());
    }
    assert!(run_suite(&toy_problems(), &toy_params(0), 0, 2.5, || TickClock::new(1e-4)).is_err());
}

#[test]
fn stored_plans_reproduce_the_generated_run() {
    let problem = &toy_problems()[0];
    let params = toy_params(5);
    let gen = DlsTracker::new(&problem.chain, params.generator);
    let mut sampler = LatentSampler::new(3, params.seed);
    let set = generate_candidates(&gen, &problem.path, sampler.take(params.k).unwrap()).unwrap();
    let stored = carta_core::generator::StoredPlans::from_candidates(&set);
    let direct = plan(problem, &PlannerParams { max_densify_rounds: 0, ..params }, &TickClock::new(1e-4)).unwrap();
    let replayed = carta_core::planner::plan_with_generator(
        problem,
        &PlannerParams { max_densify_rounds: 0, ..params },
        &stored,
        &TickClock::new(1e-4),
    )
    .unwrap();
    assert_eq!(direct.trajectory, replayed.trajectory);
}
