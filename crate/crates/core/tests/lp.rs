use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsenet_core::lp::{
    check_kkt, solve_lp, write_fixed_column, LinearProgram, LpBuilder, LpStatus,
};

/// Brute-force optimum over all basic solutions of
/// `min cᵀx, Ax <= b, l <= x <= u` with finite bounds.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let m = lp.num_ineq();
    let total = n + m;
    // [A I] z = b, structurals boxed, slacks in [0, inf).
    let mut full = DMatrix::zeros(m, total);
    full.view_mut((0, 0), (m, n)).copy_from(&lp.ineq_matrix);
    for i in 0..m {
        full[(i, n + i)] = 1.0;
    }
    let mut best: Option<f64> = None;
    let combos = combinations(total, m);
    for basis in &combos {
        let nonbasic: Vec<usize> = (0..total).filter(|j| !basis.contains(j)).collect();
        let bmat = DMatrix::from_fn(m, m, |i, k| full[(i, basis[k])]);
        let Some(binv) = bmat.clone().try_inverse() else {
            continue;
        };
        if bmat.determinant().abs() < 1e-10 {
            continue;
        }
        // Slacks that are nonbasic sit at zero; structurals at either bound.
        let free: Vec<usize> = nonbasic.iter().copied().filter(|&j| j < n).collect();
        for mask in 0..(1u32 << free.len()) {
            let mut z = DVector::zeros(total);
            for (bit, &j) in free.iter().enumerate() {
                z[j] = if mask >> bit & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
            }
            let rhs = &lp.ineq_rhs - &full * &z;
            let zb = &binv * rhs;
            for (k, &j) in basis.iter().enumerate() {
                z[j] = zb[k];
            }
            let ok = (0..total).all(|j| {
                if j < n {
                    z[j] >= lp.lower[j] - 1e-9 && z[j] <= lp.upper[j] + 1e-9
                } else {
                    z[j] >= -1e-9
                }
            });
            if ok {
                let x = z.rows(0, n).into_owned();
                let v = lp.objective.dot(&x);
                if best.is_none_or(|b| v < b) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn random_box_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let mut b = LpBuilder::new(n);
    for j in 0..n {
        let l = rng.random_range(-2.0..0.0);
        let u = rng.random_range(0.5..3.0);
        b.set_bounds(j, l, u).set_cost(j, rng.random_range(-1.0..1.0));
    }
    for _ in 0..m {
        let row: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-1.0..1.0))).collect();
        // Origin is feasible for every row.
        b.add_le(row, rng.random_range(0.1..2.0));
    }
    b.build()
}

#[test]
fn tiny_two_variable_problem() {
    // max x + y  s.t. x + 2y <= 4, 3x + y <= 6
    let mut b = LpBuilder::new(2);
    b.set_cost(0, -1.0).set_cost(1, -1.0);
    b.add_le(vec![(0, 1.0), (1, 2.0)], 4.0);
    b.add_le(vec![(0, 3.0), (1, 1.0)], 6.0);
    let lp = b.build();
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.x[0] - 1.6).abs() < 1e-9);
    assert!((sol.x[1] - 1.2).abs() < 1e-9);
    assert!((sol.objective + 2.8).abs() < 1e-9);
    assert!(check_kkt(&lp, &sol).within(1e-9));
    assert!(sol.ineq_duals.iter().all(|y| *y <= 1e-12));
}

#[test]
fn equality_rows_and_free_variables() {
    // min |x - 3| style: x free, t >= x - 3, t >= 3 - x
    let mut b = LpBuilder::new(3);
    b.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
    b.set_cost(1, 1.0);
    b.add_le(vec![(0, 1.0), (1, -1.0)], 3.0);
    b.add_le(vec![(0, -1.0), (1, -1.0)], -3.0);
    b.add_eq(vec![(0, 1.0), (2, 1.0)], 5.0);
    let lp = b.build();
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    assert!(sol.objective.abs() < 1e-9);
    assert!((sol.x[0] - 3.0).abs() < 1e-9);
    assert!((sol.x[2] - 2.0).abs() < 1e-9);
    assert!(check_kkt(&lp, &sol).within(1e-9));
}

#[test]
fn detects_infeasible_and_unbounded() {
    let mut b = LpBuilder::new(2);
    b.add_le(vec![(0, 1.0), (1, 1.0)], 1.0);
    b.add_le(vec![(0, -1.0), (1, -1.0)], -2.0);
    assert_eq!(solve_lp(&b.build()).unwrap().status, LpStatus::Infeasible);

    let mut b = LpBuilder::new(2);
    b.set_cost(0, -1.0);
    b.add_le(vec![(0, -1.0), (1, 1.0)], 1.0);
    assert_eq!(solve_lp(&b.build()).unwrap().status, LpStatus::Unbounded);
}

#[test]
fn matches_vertex_enumeration_on_random_box_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let lp = random_box_lp(&mut rng, 5, 3);
        let sol = solve_lp(&lp).unwrap();
        assert!(sol.is_optimal(), "case {case}");
        let oracle = vertex_oracle(&lp).expect("origin is feasible");
        assert!(
            (sol.objective - oracle).abs() < 1e-8,
            "case {case}: simplex {} vs enumeration {oracle}",
            sol.objective
        );
        let kkt = check_kkt(&lp, &sol);
        assert!(kkt.within(1e-8), "case {case}: {kkt:?}");
    }
}

#[test]
fn solutions_are_basic() {
    // At most (#rows) variables strictly between their bounds.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let lp = random_box_lp(&mut rng, 8, 4);
        let sol = solve_lp(&lp).unwrap();
        let interior = (0..lp.num_vars())
            .filter(|&j| sol.x[j] > lp.lower[j] + 1e-9 && sol.x[j] < lp.upper[j] - 1e-9)
            .count();
        assert!(interior <= lp.num_ineq());
    }
}

#[test]
fn kkt_check_flags_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let lp = random_box_lp(&mut rng, 5, 3);
    let sol = solve_lp(&lp).unwrap();
    assert!(check_kkt(&lp, &sol).within(1e-8));

    let mut moved = sol.clone();
    moved.x[0] += 0.5;
    assert!(!check_kkt(&lp, &moved).within(1e-6));

    let mut zeroed = sol.clone();
    if zeroed.ineq_duals.amax() > 1e-6 {
        zeroed.ineq_duals.fill(0.0);
        assert!(!check_kkt(&lp, &zeroed).within(1e-8));
    }
}

#[test]
fn contradictory_rows_make_problem_infeasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let lp = random_box_lp(&mut rng, 5, 3);
    let mut b = LpBuilder::new(5);
    for j in 0..5 {
        b.set_bounds(j, lp.lower[j], lp.upper[j]);
    }
    b.add_le(vec![(0, 1.0)], -10.0);
    assert_eq!(solve_lp(&b.build()).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn deterministic_across_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lp = random_box_lp(&mut rng, 12, 6);
    let a = solve_lp(&lp).unwrap();
    let b = solve_lp(&lp).unwrap();
    assert_eq!(a, b);
}

#[test]
fn degenerate_transportation_problem() {
    // 3x3 balanced transportation: heavily degenerate equality system.
    let supply = [5.0, 5.0, 5.0];
    let demand = [5.0, 5.0, 5.0];
    let cost = [[1.0, 2.0, 3.0], [2.0, 1.0, 2.0], [3.0, 2.0, 1.0]];
    let mut b = LpBuilder::new(9);
    for i in 0..3 {
        for j in 0..3 {
            b.set_cost(3 * i + j, cost[i][j]);
        }
        b.add_eq((0..3).map(|j| (3 * i + j, 1.0)).collect(), supply[i]);
    }
    for j in 0..3 {
        b.add_eq((0..3).map(|i| (3 * i + j, 1.0)).collect(), demand[j]);
    }
    let lp = b.build();
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    assert!((sol.objective - 15.0).abs() < 1e-9);
    assert!(check_kkt(&lp, &sol).within(1e-9));
}

#[test]
fn dump_lists_every_section() {
    let mut b = LpBuilder::new(2);
    b.set_cost(0, 1.0).set_bounds(1, -1.0, 1.0);
    b.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
    b.add_le(vec![(0, 2.0)], 3.0);
    let mut out = Vec::new();
    write_fixed_column(&b.build(), &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    for section in ["OBJ", "EQ", "LE", "BOUNDS", "RHS"] {
        assert!(text.contains(section), "{section} missing");
    }
}
