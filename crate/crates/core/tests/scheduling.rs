use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsenet_core::numerics::{LtiSystem, TimeGrid};
use sparsenet_core::scheduling::*;

fn reference_instance() -> ScheduleInstance {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/node_schedule_4x4.json"
    ))
    .unwrap();
    let file: ScheduleInstanceFile = serde_json::from_str(&text).unwrap();
    file.to_instance().unwrap()
}

/// Scaled Taylor series, independent of the production exponential.
fn taylor_expm(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut s = 0;
    let norm = a.abs().row_sum().max() * t.abs();
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let x = a * (t / 2f64.powi(s));
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn diag2() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])),
        DMatrix::identity(2, 2),
        1.0,
    )
    .unwrap()
}

/// Best objective over all binary K x m grids honoring cell budgets and beta.
fn brute_force(scores: &ScoreTable, cells: &[usize], beta: usize) -> f64 {
    let (k, m) = scores.scores.shape();
    let dt = scores.grid.dt();
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << (k * m)) {
        let on = |s: usize, j: usize| mask >> (s * m + j) & 1 == 1;
        if (0..k).any(|s| (0..m).filter(|&j| on(s, j)).count() > beta) {
            continue;
        }
        if (0..m).any(|j| (0..k).filter(|&s| on(s, j)).count() > cells[j]) {
            continue;
        }
        let mut val = 0.0;
        for s in 0..k {
            for j in 0..m {
                if on(s, j) {
                    val += dt * scores.scores[(s, j)];
                }
            }
        }
        best = best.max(val);
    }
    best
}

fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, horizon: f64) -> LtiSystem {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    LtiSystem::new(a, b, horizon).unwrap()
}

#[test]
fn scores_match_series_oracle() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let s = controllability_scores(inst.system(), &grid).unwrap();
    for k in 0..40 {
        let e = taylor_expm(inst.system().a(), grid.midpoint(k));
        for j in 0..4 {
            let f = e.column(j).norm_squared();
            assert!((s.scores[(k, j)] - f).abs() < 1e-9);
        }
    }
    assert!(s.scores.iter().all(|v| *v >= 0.0));
    assert!(check_regularity(&s, 1e-9).passed());
}

#[test]
fn objective_matches_fine_quadrature() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 20).unwrap();
    let s = controllability_scores(inst.system(), &grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = DMatrix::from_fn(20, 4, |_, _| rng.random_range(0.0..1.0));
    let sched = Schedule::from_values(&v, &s);
    let midpoint = objective_value(&sched, &s).unwrap();
    // Simpson on each cell with 16 panels.
    let mut exact = 0.0;
    let mut lipschitz: f64 = 0.0;
    for k in 0..20 {
        let (t0, dt) = (grid.knot(k), grid.dt());
        let panels = 16;
        let h = dt / panels as f64;
        for j in 0..4 {
            let f = |t: f64| {
                let e = taylor_expm(inst.system().a(), t);
                e.column(j).norm_squared()
            };
            let mut acc = f(t0) + f(t0 + dt);
            for p in 1..panels {
                acc += if p % 2 == 1 { 4.0 } else { 2.0 } * f(t0 + p as f64 * h);
            }
            exact += v[(k, j)] * acc * h / 3.0;
            lipschitz = lipschitz.max(((f(t0 + dt) - f(t0)) / dt).abs());
        }
    }
    assert!((midpoint - exact).abs() <= 2.0 * grid.dt() * lipschitz * 4.0);
}

#[test]
fn reproduces_reference_objective() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 400).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let relaxed = solve_relaxed_schedule(&inst, &scores).unwrap();
    assert!((relaxed.objective - 1.8957).abs() < 0.01, "{}", relaxed.objective);
    assert!(relaxed.discreteness < 1e-4);
    assert!(relaxed.max_violation(inst.alpha(), inst.beta()) <= 1e-8);

    let snapped = recover_binary_schedule(&relaxed, &scores, 1e-6).unwrap();
    assert!((snapped.objective - relaxed.objective).abs() < 1e-6);

    let slice = top_slice_schedule(&scores, 1.6).unwrap();
    assert!((slice.schedule.objective - 2.1287).abs() < 0.01);
    assert!(slice.schedule.objective > relaxed.objective);

    // Channel 4 runs up to the horizon while it is outside the top two scores there.
    let last = grid.steps() - 1;
    assert!(snapped.is_active(last, 3));
    assert!(!scores.ranking(last)[..2].contains(&3));
}

#[test]
fn dominant_channel_takes_everything() {
    let grid = TimeGrid::new(1.0, 50).unwrap();
    let inst = ScheduleInstance::new(diag2(), vec![1.0, 1.0], 1).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let sched = solve_relaxed_schedule(&inst, &scores).unwrap();
    for k in 0..50 {
        assert_eq!(sched.v[k], vec![1.0, 0.0]);
    }
    // Midpoint rule of (1 - e^{-2})/2.
    let exact = (1.0 - (-2.0f64).exp()) / 2.0;
    assert!((sched.objective - exact).abs() < 1e-4);
}

#[test]
fn relaxation_matches_enumeration_small() {
    let grid = TimeGrid::new(1.0, 4).unwrap();
    let dt = grid.dt();
    let inst = ScheduleInstance::new(diag2(), vec![2.0 * dt, dt], 1).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let sched = solve_relaxed_schedule(&inst, &scores).unwrap();
    assert!((sched.objective - brute_force(&scores, &[2, 1], 1)).abs() < 1e-9);
}

#[test]
fn relaxation_matches_enumeration_random() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..15 {
        let m = rng.random_range(2..=3);
        let k = rng.random_range(2..=6usize.min(18 / m));
        let n = rng.random_range(2..=4);
        let sys = random_system(&mut rng, n, m, 1.0);
        let grid = TimeGrid::new(1.0, k).unwrap();
        let cells: Vec<usize> = (0..m).map(|_| rng.random_range(1..=k)).collect();
        let alpha: Vec<f64> = cells.iter().map(|&c| c as f64 * grid.dt()).collect();
        let beta = rng.random_range(1..=m);
        let inst = ScheduleInstance::new(sys, alpha, beta).unwrap();
        let scores = controllability_scores(inst.system(), &grid).unwrap();
        let lp = solve_relaxed_schedule(&inst, &scores).unwrap();
        let bf = brute_force(&scores, &cells, beta);
        assert!((lp.objective - bf).abs() < 1e-9, "case {case}: {} vs {bf}", lp.objective);
    }
}

#[test]
fn dual_with_slack_budgets_has_zero_multipliers() {
    let grid = TimeGrid::new(1.0, 20).unwrap();
    let inst = ScheduleInstance::new(diag2(), vec![1.0, 1.0], 2).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let (sched, rep) = solve_schedule_dual(&inst, &scores, &DualOptions::default()).unwrap();
    assert_eq!(rep.gamma, vec![0.0, 0.0]);
    assert!(sched.v.iter().all(|r| r == &vec![1.0, 1.0]));
}

#[test]
fn scalar_dual_threshold_matches_bisection() {
    let horizon = 1.0;
    let sys = LtiSystem::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
        horizon,
    )
    .unwrap();
    let grid = TimeGrid::new(horizon, 2000).unwrap();
    let inst = ScheduleInstance::new(sys, vec![horizon / 2.0], 1).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let (_, rep) = solve_schedule_dual(&inst, &scores, &DualOptions::default()).unwrap();

    // Bisection for t* with measure{t : e^{-2t} > e^{-2t*}} = T/2.
    let f = |t: f64| (-2.0 * t).exp();
    let (mut lo, mut hi) = (0.0, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid < horizon / 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expected = -f(0.5 * (lo + hi));
    assert!((rep.gamma[0] - expected).abs() < 1e-6, "{} vs {expected}", rep.gamma[0]);
}

#[test]
fn dual_agrees_with_lp_on_reference_instance() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 400).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let lp = solve_relaxed_schedule(&inst, &scores).unwrap();
    let (dual, rep) = solve_schedule_dual(&inst, &scores, &DualOptions::default()).unwrap();
    let agree = (0..400)
        .flat_map(|k| (0..4).map(move |j| (k, j)))
        .filter(|&(k, j)| lp.is_active(k, j) == dual.is_active(k, j))
        .count();
    assert!(agree as f64 / 1600.0 >= 0.99);
    assert!(rep.gamma.iter().all(|g| *g <= 0.0));
    assert!(rep.slackness_residual < 1e-4);
    let bound = 2.0 * grid.dt() * scores.scores.max() * 4.0;
    assert!((dual.objective - lp.objective).abs() <= bound);
}

#[test]
fn top_slice_matches_enumeration_and_full_budget() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sys = random_system(&mut rng, 3, 2, 1.0);
    let grid = TimeGrid::new(1.0, 8).unwrap();
    let scores = controllability_scores(&sys, &grid).unwrap();
    for cells in 1..16 {
        let slice = top_slice_schedule(&scores, cells as f64 * grid.dt()).unwrap();
        let bf = brute_force(&scores, &[8, 8], 2);
        let mut best = 0.0f64;
        // All schedules with exactly `cells` active cells.
        for mask in 0u32..(1 << 16) {
            if mask.count_ones() as usize == cells {
                let v: f64 = (0..16)
                    .filter(|b| mask >> b & 1 == 1)
                    .map(|b| grid.dt() * scores.scores[(b / 2, b % 2)])
                    .sum();
                best = best.max(v);
            }
        }
        assert!((slice.schedule.objective - best).abs() < 1e-12);
        assert!(slice.schedule.objective <= bf + 1e-12);
    }
    let full = top_slice_schedule(&scores, 2.0).unwrap();
    assert!(full.schedule.v.iter().flatten().all(|x| *x == 1.0));
    assert!((full.schedule.objective - grid.dt() * scores.scores.sum()).abs() < 1e-12);
}

#[test]
fn larger_budgets_never_hurt() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for beta in 1..=4 {
        let mut prev_alpha = f64::NEG_INFINITY;
        for a in [0.1, 0.2, 0.4, 0.7, 1.0] {
            let i = ScheduleInstance::new(inst.system().clone(), vec![a; 4], beta).unwrap();
            let s = solve_relaxed_schedule(&i, &scores).unwrap();
            assert!(s.max_violation(i.alpha(), beta) <= 1e-8);
            assert!(s.objective >= prev_alpha - 1e-12);
            prev_alpha = s.objective;
            if a == 0.4 {
                assert!(s.objective >= prev - 1e-12);
                prev = s.objective;
            }
        }
    }
}

#[test]
fn outputs_round_trip() {
    let inst = reference_instance();
    let grid = TimeGrid::new(1.0, 40).unwrap();
    let scores = controllability_scores(inst.system(), &grid).unwrap();
    let sched = solve_relaxed_schedule(&inst, &scores).unwrap();
    let mut buf = Vec::new();
    write_schedule_csv(&sched, &mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rdr.headers().unwrap().len(), 5);
    assert_eq!(rdr.records().count(), 40);

    let chart = gantt_chart(&sched);
    let total: f64 = chart.channels[0]
        .intervals
        .iter()
        .map(|[a, b]| b - a)
        .sum();
    assert!((total - sched.usage[0]).abs() < 1e-12);
    let json = serde_json::to_string(&chart).unwrap();
    let back: GanttChart = serde_json::from_str(&json).unwrap();
    assert_eq!(back, chart);

    let file = ScheduleInstanceFile::from_instance(&inst);
    assert_eq!(file.to_instance().unwrap(), inst);
}

#[test]
fn zero_channel_instance_is_rejected() {
    let file = ScheduleInstanceFile {
        a: vec![vec![0.0]],
        b: vec![vec![]],
        horizon: 1.0,
        alpha: vec![],
        beta: 1,
    };
    assert!(file.to_instance().is_err());
}
