mod common;

use bpiree::baselines::MomentumClock;
use bpiree::linalg::{dist2, norm2};
use bpiree::lp;
use bpiree::model::Penalty;
use bpiree::prox::prox_weighted_abs;
use bpiree::solver::{self, choose_block, extrapolation_bound, Bpiree, MomentumSchedule, Schedule, SolverConfig};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn prox_cost(x: f64, v: f64, tau: f64) -> f64 {
    tau * x.abs() + 0.5 * (x - v) * (x - v)
}

proptest! {
    #[test]
    fn prox_is_nonexpansive(u in -50.0..50.0f64, v in -50.0..50.0f64, tau in 0.0..10.0f64) {
        let pu = prox_weighted_abs(u, tau).unwrap();
        let pv = prox_weighted_abs(v, tau).unwrap();
        prop_assert!((pu - pv).abs() <= (u - v).abs() + 1e-12);
    }

    #[test]
    fn prox_beats_perturbations(v in -50.0..50.0f64, tau in 0.0..10.0f64, d in -1.0..1.0f64) {
        let p = prox_weighted_abs(v, tau).unwrap();
        prop_assert!(prox_cost(p, v, tau) <= prox_cost(p + d, v, tau) + 1e-12);
        prop_assert!(prox_cost(p, v, tau) <= prox_cost(p + 1e-6 * d, v, tau) + 1e-12);
    }

    #[test]
    fn log_derivative_is_lipschitz(s in 0.0..100.0f64, t in 0.0..100.0f64, eps_bar in 0.01..2.0f64) {
        let pen = Penalty::log(1.0, eps_bar).unwrap();
        let gap = (pen.outer_derivative(s, 0.0) - pen.outer_derivative(t, 0.0)).abs();
        prop_assert!(gap <= (s - t).abs() / (eps_bar * eps_bar) * (1.0 + 1e-12));
    }

    #[test]
    fn block_gradient_is_block_lipschitz(seed in 0u64..1000, lp_case in any::<bool>()) {
        let problem = if lp_case {
            random_lp_problem(seed, 6, 5, 3, 4, 0.1)
        } else {
            random_log_problem(seed, 8, 10, 3, 0.1)
        };
        let mut r = rng(seed ^ 0x5eed);
        let m = problem.partition().num_blocks();
        for _ in 0..100 {
            let b = r.random_range(0..m);
            let block = problem.partition().block(b).unwrap();
            let x = vector(problem.dim(), 2.0, &mut r);
            let mut y = x.clone();
            for &i in block {
                y[i] += r.random_range(-3.0..3.0);
            }
            let gx = problem.block_gradient(&x, b).unwrap();
            let gy = problem.block_gradient(&y, b).unwrap();
            let dx: Vec<f64> = block.iter().map(|&i| x[i] - y[i]).collect();
            let l = problem.block_lipschitz(b).unwrap();
            prop_assert!(dist2(&gx, &gy) <= l * norm2(&dx) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn extrapolation_bound_is_admissible(lp in 1e-6..1e6f64, lc in 1e-6..1e6f64, gamma in 1.0001..10.0f64, delta in 0.01..0.99f64) {
        let b = extrapolation_bound(lp, lc, gamma, delta);
        prop_assert!(b >= 0.0);
        prop_assert!((b - delta * (gamma - 1.0) / (2.0 * (gamma + 1.0)) * (lp / lc).sqrt()).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn fista_beta_stays_in_unit_interval(restart in 1usize..50, calls in 1usize..200) {
        let mut clock = MomentumClock::new(restart);
        let mut prev = -1.0;
        for i in 0..calls {
            let beta = clock.next_beta();
            prop_assert!((0.0..1.0).contains(&beta));
            if i % restart != 0 {
                prop_assert!(beta >= prev);
            } else {
                prop_assert_eq!(beta, 0.0);
            }
            prev = beta;
        }
    }

    #[test]
    fn epsilon_update_is_branch_correct(
        xs in prop::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], 1..40),
        mu in 0.01..0.99f64,
        scale in 1e-3..10.0f64,
    ) {
        let eps: Vec<f64> = (0..xs.len()).map(|i| scale * (1.0 + i as f64)).collect();
        let next = lp::update_epsilon(&xs, &eps, mu);
        for ((x, e), n) in xs.iter().zip(&eps).zip(&next) {
            if *x == 0.0 {
                prop_assert_eq!(n, e);
            } else {
                prop_assert_eq!(*n, mu.sqrt() * e);
                prop_assert!(n < e);
            }
        }
    }

    #[test]
    fn schedules_are_essentially_cyclic(m in 1usize..12, seed in any::<u64>()) {
        for schedule in [Schedule::Cyclic, Schedule::ShuffledCycles { seed }] {
            let t = schedule.guaranteed_window(m);
            let picks: Vec<usize> = (1..=2000).map(|k| choose_block(&schedule, k, m)).collect();
            for w in picks.windows(t) {
                let mut seen = vec![false; m];
                for &b in w {
                    seen[b] = true;
                }
                prop_assert!(seen.iter().all(|&s| s));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steps_descend_and_keep_books(seed in 0u64..10_000, m in 1usize..5, shuffled in any::<bool>(), uncapped in any::<bool>()) {
        let problem = random_log_problem(seed, 12, 16, m, 0.05);
        let schedule = if shuffled { Schedule::ShuffledCycles { seed } } else { Schedule::Cyclic };
        let cfg = SolverConfig { schedule, cap_extrapolation: !uncapped, ..Default::default() };
        let mut run = Bpiree::new(&problem, cfg, &[0.0; 16]).unwrap();
        for k in 1..=150 {
            let before = run.state().x.clone();
            let rep = run.step().unwrap();
            prop_assert!(rep.f_next <= rep.f_prev + 1e-12 * (1.0 + rep.f_prev.abs()));
            if !uncapped {
                prop_assert!(rep.certificate.holds, "k={} slack={}", k, rep.certificate.slack);
            }
            let st = run.state();
            prop_assert_eq!(st.update_counts.iter().sum::<usize>(), k);
            let block = problem.partition().block(rep.block).unwrap();
            for (i, (x, b)) in st.x.iter().zip(&before).enumerate() {
                if !block.contains(&i) {
                    prop_assert_eq!(x, b);
                }
            }
        }
    }

    #[test]
    fn lp_epsilon_never_grows(seed in 0u64..10_000, mu in 0.05..0.95f64) {
        let problem = random_lp_problem(seed, 6, 8, 2, 3, 0.05);
        let cfg = SolverConfig { mu, max_iter: 200, ..Default::default() };
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut ok = true;
        let x0 = vec![0.0; problem.dim()];
        solver_lp_observed(&problem, &cfg, &x0, &mut |x, eps| {
            if let Some((px, pe)) = &prev {
                for i in 0..x.len() {
                    let changed = x[i] != px[i];
                    let decayed = eps[i] != pe[i];
                    ok &= eps[i] > 0.0 && eps[i] <= pe[i];
                    // A changed coordinate that is nonzero must have decayed.
                    ok &= !(changed && x[i] != 0.0) || decayed;
                    ok &= !decayed || x[i] != 0.0;
                }
            }
            prev = Some((x.to_vec(), eps.to_vec()));
        });
        prop_assert!(ok);
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..10_000, lp_case in any::<bool>()) {
        let cfg = SolverConfig { record_trace: true, max_iter: 300, schedule: Schedule::ShuffledCycles { seed }, ..Default::default() };
        let run = || {
            if lp_case {
                let problem = random_lp_problem(seed, 5, 6, 2, 3, 0.05);
                lp::solve_lp(&problem, &cfg, &[0.0; 12]).unwrap()
            } else {
                let problem = random_log_problem(seed, 8, 10, 3, 0.05);
                solver::solve(&problem, &cfg, &[0.0; 10]).unwrap()
            }
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(a.x, b.x);
        let strip = |t: Vec<bpiree::trace::TraceRecord>| {
            t.into_iter().map(|mut r| { r.wall_ns = 0; r }).collect::<Vec<_>>()
        };
        prop_assert_eq!(strip(a.trace), strip(b.trace));
    }

    #[test]
    fn momentum_off_matches_zero_momentum_first_steps(seed in 0u64..10_000) {
        // The first two updates of any block carry no momentum, whatever the schedule.
        let problem = random_log_problem(seed, 6, 9, 3, 0.05);
        let zero = SolverConfig { momentum: MomentumSchedule::Zero, ..Default::default() };
        let mut a = Bpiree::new(&problem, SolverConfig::default(), &[0.0; 9]).unwrap();
        let mut b = Bpiree::new(&problem, zero, &[0.0; 9]).unwrap();
        for _ in 0..6 {
            a.step().unwrap();
            b.step().unwrap();
        }
        prop_assert_eq!(&a.state().x, &b.state().x);
    }
}

fn solver_lp_observed(problem: &bpiree::Problem, cfg: &SolverConfig, x0: &[f64], f: &mut dyn FnMut(&[f64], &[f64])) {
    lp::solve_lp_observed(problem, cfg, x0, &mut |view| f(view.x, view.eps.unwrap())).unwrap();
}
