use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsenet_core::mobility::{generate_random_scenario, GeneratorConfig, IndexMap};
use sparsenet_core::stochastic::*;

fn fixture() -> MonteCarloProblem {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/mean_field_s3.json");
    let file: ExplicitRatesFile = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    file.to_problem().unwrap()
}

#[test]
fn zero_rates_leave_state_unchanged() {
    let index = IndexMap::new(3).unwrap();
    let mut state = StochasticState {
        parked: vec![5, 0, 7],
        transit: vec![0; 6],
    };
    let before = state.clone();
    let zeros = vec![0.0; 6];
    let mut carry = vec![0.0; 6];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..100 {
        let rates = Rates { demand: &zeros, rebalance: &zeros, gamma: &[3.0; 6] };
        let tally = step(&index, &mut state, &mut carry, rates, 0.01, &mut rng);
        assert_eq!(tally, StepTally::default());
    }
    assert_eq!(state, before);
}

#[test]
fn total_count_is_conserved_even_when_truncating() {
    let index = IndexMap::new(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut state = StochasticState {
        parked: vec![3, 1, 0, 2],
        transit: vec![1; 12],
    };
    let total = state.total();
    let mut carry = vec![0.0; 12];
    let mut truncated = 0;
    for _ in 0..2000 {
        let demand: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..20.0)).collect();
        let rebalance: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..30.0)).collect();
        let gamma: Vec<f64> = (0..12).map(|_| rng.random_range(0.5..4.0)).collect();
        let rates = Rates { demand: &demand, rebalance: &rebalance, gamma: &gamma };
        truncated += step(&index, &mut state, &mut carry, rates, 0.1, &mut rng).truncated;
        assert_eq!(state.total(), total);
        assert!(carry.iter().all(|c| (0.0..1.0).contains(c)));
    }
    assert!(truncated > 0);
}

#[test]
fn rebalancing_accumulator_emits_whole_departures() {
    let index = IndexMap::new(2).unwrap();
    let mut state = StochasticState { parked: vec![0, 100], transit: vec![0, 0] };
    let mut carry = vec![0.0; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // Pair 0 is (1 <- 2); u = 2.5/h for 4 h moves exactly 10 vehicles.
    for _ in 0..400 {
        let rates = Rates { demand: &[0.0, 0.0], rebalance: &[2.5, 0.0], gamma: &[0.0, 0.0] };
        step(&index, &mut state, &mut carry, rates, 0.01, &mut rng);
    }
    assert_eq!(state.parked[1], 90);
    assert_eq!(state.transit[0], 10);
}

#[test]
fn poisson_mean_matches_rate() {
    let (g, delta, draws) = (3.7, 0.05, 100_000);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sum: u64 = (0..draws).map(|_| poisson_draw(g * delta, &mut rng)).sum();
    let mean = sum as f64 / draws as f64;
    let se = (g * delta / draws as f64).sqrt();
    assert!((mean - g * delta).abs() <= 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn single_route_time_average_matches_stationary_mean() {
    // Demand only on (1 <- 2): in-transit count settles at g / γ.
    let (g, gamma, delta) = (5.0, 1.0, 0.01);
    let index = IndexMap::new(2).unwrap();
    let mut state = StochasticState { parked: vec![0, 1_000_000], transit: vec![0, 0] };
    let mut carry = vec![0.0; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rates = Rates { demand: &[g, 0.0], rebalance: &[0.0, 0.0], gamma: &[gamma, gamma] };
    let burn_in = (20.0 / delta) as usize;
    let steps = (5000.0 / delta) as usize;
    let mut sum = 0u64;
    for k in 0..burn_in + steps {
        step(&index, &mut state, &mut carry, rates, delta, &mut rng);
        if k >= burn_in {
            sum += state.transit[0];
        }
    }
    let average = sum as f64 / steps as f64;
    assert!((average / (g / gamma) - 1.0).abs() < 0.02, "average {average}");
}

#[test]
fn summaries_are_reproducible() {
    let p = fixture();
    let cfg = SimulationConfig { record_every: 50, ..SimulationConfig::new(0.01, 64, 5) };
    let a = run_monte_carlo(&p, &cfg).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = single.install(|| run_monte_carlo(&p, &cfg).unwrap());
    assert_eq!(a, b);
    let c = run_monte_carlo(&p, &SimulationConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.mean, c.mean);
    assert_eq!(a.times.len(), 9);
    assert!(a.variance.iter().flatten().all(|v| *v >= 0.0));
}

#[test]
fn zero_demand_summary_is_constant() {
    let file = ExplicitRatesFile {
        parked: vec![4, 5],
        transit: Some(vec![0, 0]),
        demand: vec![0.0, 0.0],
        gamma: vec![1.0, 1.0],
        horizon: 1.0,
    };
    let s = run_monte_carlo(&file.to_problem().unwrap(), &SimulationConfig::new(0.1, 10, 0)).unwrap();
    assert_eq!(s.max_abs_z, 0.0);
    assert!(s.mean.iter().all(|row| row == &vec![4.0, 5.0, 0.0, 0.0]));
    assert!(s.clamping_inactive());
}

#[test]
fn config_must_divide_horizon() {
    let p = fixture();
    assert!(run_monte_carlo(&p, &SimulationConfig::new(0.3, 10, 0)).is_err());
    assert!(run_monte_carlo(&p, &SimulationConfig::new(0.1, 0, 0)).is_err());
}

#[test]
fn three_station_mean_field_agreement() {
    let p = fixture();
    let cfg = SimulationConfig::new(4.0 / 2000.0, 2000, 0);
    let s = run_monte_carlo(&p, &cfg).unwrap();
    assert!(s.clamping_inactive());
    assert!(s.passes(5.0), "max |z| = {}", s.max_abs_z);

    let mut buf = Vec::new();
    write_summary_csv(&s, &mut buf).unwrap();
    let rows = csv::Reader::from_reader(buf.as_slice()).records().count();
    assert_eq!(rows, 2001 * 9);
}

#[test]
fn error_shrinks_like_inverse_root_n() {
    let p = fixture();
    let cfg = SimulationConfig { record_every: 10, ..SimulationConfig::new(4.0 / 2000.0, 2000, 0) };
    let r = deviation_scaling(&p, &cfg, 4).unwrap();
    assert!((1.2..=1.7).contains(&r.ratio), "ratio {}", r.ratio);
}

#[test]
fn scenario_rates_are_clamped_and_reported() {
    let sc = generate_random_scenario(3, 4, &GeneratorConfig::default()).unwrap();
    let p = MonteCarloProblem::from_scenario(&sc, None, 48).unwrap();
    assert!(p.rates().clamped_mass() > 0.0);
    let s = run_monte_carlo(&p, &SimulationConfig::new(4.0 / 480.0, 400, 3)).unwrap();
    assert!(!s.clamping_inactive());
    assert!(s.passes(5.0), "max |z| = {}", s.max_abs_z);
}
