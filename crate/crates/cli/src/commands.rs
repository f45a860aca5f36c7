use std::path::Path;

use serde::Serialize;
use sparsenet_core::lp::LpStatus;
use sparsenet_core::mobility::{generate_random_scenario, GeneratorConfig, MobilityScenario};
use sparsenet_core::numerics::TimeGrid;
use sparsenet_core::rebalance::{
    check_assumption, discretize_reachability, extract_sparse_control, min_energy_baseline,
    write_state_csv, AssumptionOptions, AssumptionReport, BoundsMode, CostCensus,
    RebalanceError, RebalanceInstance, RebalanceResults, RebalancerRegistry, TerminalTarget,
};
use sparsenet_core::scheduling::{
    check_regularity, controllability_scores, gantt_chart, recover_binary_schedule,
    top_slice_schedule, write_schedule_csv, DualReport, RegularityReport, ScheduleError,
    ScheduleInstanceFile, SchedulerRegistry, DEFAULT_BINARY_TOL,
};
use sparsenet_core::stochastic::{
    run_monte_carlo, write_summary_csv, ExplicitRatesFile, MonteCarloProblem, SimulationConfig,
};

use crate::manifest::Run;
use crate::{Failure, GenScenarioArgs, RebalanceArgs, ScheduleArgs, SimulateArgs, VerifyArgs};

/// Tolerance for snapping near-binary rebalancing controls.
const SNAP_TOL: f64 = 1e-6;

fn schedule_failure(e: ScheduleError) -> Failure {
    match e {
        ScheduleError::NonBinary { .. } => Failure::non_binary(e.to_string()),
        ScheduleError::InvalidInstance(_) | ScheduleError::GridMismatch { .. } => {
            Failure::input(e.to_string())
        }
        _ => Failure::internal(e.to_string()),
    }
}

fn rebalance_failure(e: RebalanceError) -> Failure {
    match e {
        RebalanceError::NonBinary { .. } => Failure::non_binary(e.to_string()),
        RebalanceError::InvalidInstance(_) | RebalanceError::Mobility(_) => {
            Failure::input(e.to_string())
        }
        _ => Failure::internal(e.to_string()),
    }
}

fn grid(horizon: f64, steps: usize) -> Result<TimeGrid, Failure> {
    TimeGrid::new(horizon, steps).map_err(|e| Failure::input(e.to_string()))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::internal(e.to_string()))?;
    Ok(buf)
}

#[derive(Serialize)]
struct BaselineReport {
    alpha_total: f64,
    objective: f64,
    threshold: f64,
    cells: usize,
}

#[derive(Serialize)]
struct ScheduleReport<'a> {
    method: &'a str,
    steps: usize,
    objective: f64,
    discreteness: f64,
    usage: &'a [f64],
    constraint_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual: Option<&'a DualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineReport>,
}

pub fn schedule(args: &ScheduleArgs, out: &Path) -> Result<(), Failure> {
    let registry = SchedulerRegistry::default();
    if args.list_methods {
        for name in registry.names() {
            println!("{name}\t{}", registry.get(name).unwrap().describe());
        }
        return Ok(());
    }
    let method = registry.get(&args.method).ok_or_else(|| {
        Failure::input(format!(
            "unknown method '{}'; available: {}",
            args.method,
            registry.names().join(", ")
        ))
    })?;
    let mut run = Run::new("schedule", out)?;
    let text = run.read_input(&args.instance)?;
    let file: ScheduleInstanceFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("malformed instance: {e}")))?;
    let instance = file.to_instance().map_err(|e| Failure::input(e.to_string()))?;
    let grid = grid(instance.horizon(), args.grid)?;
    run.set_grid(args.grid);
    let scores = controllability_scores(instance.system(), &grid).map_err(schedule_failure)?;
    let outcome = method.solve(&instance, &scores).map_err(schedule_failure)?;

    let raw = outcome.schedule;
    let recovered = recover_binary_schedule(&raw, &scores, DEFAULT_BINARY_TOL);
    let schedule = match &recovered {
        Ok(s) => s,
        Err(_) => &raw,
    };
    let baseline = match args.baseline {
        None => None,
        Some(total) => {
            let total = total.unwrap_or_else(|| instance.alpha().iter().sum());
            let top = top_slice_schedule(&scores, total).map_err(schedule_failure)?;
            Some(BaselineReport {
                alpha_total: total,
                objective: top.schedule.objective,
                threshold: top.threshold,
                cells: top.cells,
            })
        }
    };
    let report = ScheduleReport {
        method: outcome.method,
        steps: grid.steps(),
        objective: schedule.objective,
        discreteness: raw.discreteness,
        usage: &schedule.usage,
        constraint_violation: schedule.max_violation(instance.alpha(), instance.beta()),
        dual: outcome.dual.as_ref(),
        baseline,
    };
    run.write("schedule.csv", &csv_bytes(|b| write_schedule_csv(schedule, b))?)?;
    run.write_json("gantt.json", &gantt_chart(schedule))?;
    run.write_json("report.json", &report)?;
    run.finish()?;

    println!("method       {}", report.method);
    println!("objective    {:.6}", report.objective);
    println!("discreteness {:.3e}", report.discreteness);
    if let Some(b) = &report.baseline {
        println!("top slice    {:.6} (alpha_total {})", b.objective, b.alpha_total);
    }
    recovered.map(|_| ()).map_err(schedule_failure)
}

#[derive(Serialize)]
struct CensusReport<'a> {
    #[serde(flatten)]
    census: &'a CostCensus,
    support_fraction: f64,
    interior_mass: f64,
    interior_cells: usize,
}

#[derive(Serialize)]
struct RebalanceBaseline {
    l0_sparse: f64,
    l0_baseline: f64,
    ratio: f64,
    baseline_residual: f64,
    clipped_residual: f64,
    clipped_cells: usize,
    rank: usize,
}

pub fn rebalance(args: &RebalanceArgs, out: &Path) -> Result<(), Failure> {
    let registry = RebalancerRegistry::default();
    if args.list_methods {
        for name in registry.names() {
            println!("{name}\t{}", registry.get(name).unwrap().describe());
        }
        return Ok(());
    }
    let method = registry.get(&args.method).ok_or_else(|| {
        Failure::input(format!(
            "unknown method '{}'; available: {}",
            args.method,
            registry.names().join(", ")
        ))
    })?;
    let mut run = Run::new("rebalance", out)?;
    let text = run.read_input(&args.scenario)?;
    let scenario = MobilityScenario::from_json(&text).map_err(|e| Failure::input(e.to_string()))?;
    let mode = if args.signed { BoundsMode::Signed } else { BoundsMode::NonNegative };
    let (instance, model) =
        RebalanceInstance::from_scenario(&scenario, mode).map_err(rebalance_failure)?;
    let grid = grid(instance.horizon(), args.grid)?;
    run.set_grid(args.grid);
    run.set_seed(args.seed);
    let disc = discretize_reachability(&instance.system, &grid).map_err(rebalance_failure)?;
    let outcome = method.solve(&instance, &disc).map_err(rebalance_failure)?;

    let control = match (outcome.status, outcome.control) {
        (LpStatus::Optimal, Some(c)) => c,
        (status, _) => {
            run.write_json(
                "results.json",
                &RebalanceResults::new(outcome.method, status, None, None, None),
            )?;
            run.finish()?;
            if status == LpStatus::Infeasible {
                let detail = match &instance.target {
                    TerminalTarget::Exact(_) if outcome.mass_gap != 0.0 => format!(
                        "target mass differs from the fleet by {:+} vehicles",
                        outcome.mass_gap
                    ),
                    _ => "no control within the per-step capacity reaches the target".into(),
                };
                return Err(Failure::infeasible(format!("infeasible: {detail}")));
            }
            return Err(Failure::internal(format!("solver finished with status {status:?}")));
        }
    };

    let (control, residual, interior_mass, interior_cells) = if outcome.method == "sparse-l1" {
        let ex = extract_sparse_control(&instance, &disc, &control, SNAP_TOL)
            .map_err(rebalance_failure)?;
        (ex.control, ex.terminal_residual, ex.interior_mass, ex.interior_cells)
    } else {
        let mass = control.interior_mass(mode, SNAP_TOL);
        let cells = control.interior_cells(mode, SNAP_TOL);
        let r = outcome.terminal_residual.unwrap_or(f64::NAN);
        (control, r, mass, cells)
    };
    let states = disc.trajectory(&instance.x0, &control.u);
    let results = RebalanceResults::new(
        outcome.method,
        outcome.status,
        Some(&control),
        Some(residual),
        Some(model.index()),
    );
    let assumption: AssumptionReport = check_assumption(
        &instance.system,
        &disc,
        &AssumptionOptions { seed: args.seed, ..AssumptionOptions::default() },
    )
    .map_err(rebalance_failure)?;

    run.write_json("results.json", &results)?;
    run.write("states.csv", &csv_bytes(|b| write_state_csv(&grid, &states, b))?)?;
    run.write_json(
        "census.json",
        &CensusReport {
            census: &control.census,
            support_fraction: control.support_fraction(),
            interior_mass,
            interior_cells,
        },
    )?;
    run.write_json("assumption.json", &assumption)?;
    if args.baseline {
        let base = min_energy_baseline(&instance, &disc).map_err(rebalance_failure)?;
        let l0_baseline = base.unclipped.census.l0_total;
        let report = RebalanceBaseline {
            l0_sparse: control.census.l0_total,
            l0_baseline,
            ratio: control.census.l0_total / l0_baseline,
            baseline_residual: base.unclipped_residual,
            clipped_residual: base.clipped_residual,
            clipped_cells: base.clipped_cells,
            rank: base.rank,
        };
        println!("baseline L0  {:.4} (ratio {:.3})", report.l0_baseline, report.ratio);
        run.write_json("baseline.json", &report)?;
    }
    run.finish()?;

    println!("method       {}", outcome.method);
    println!("status       {:?}", outcome.status);
    println!("L0           {:.4}", control.census.l0_total);
    println!("L1           {:.4}", control.census.l1_total);
    println!("max routes   {}", control.census.l0_max_step);
    println!("residual     {residual:.3e}");
    println!("interior     {interior_mass:.3e} ({interior_cells} cells)");
    if !assumption.passed() {
        log::warn!("assumption check raised {} flags", assumption.flags.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct Verdict {
    runs: usize,
    delta: f64,
    max_abs_z: f64,
    z_limit: f64,
    pass: bool,
    truncated: u64,
    clamped_mass: f64,
    clamping_inactive: bool,
}

pub fn simulate(args: &SimulateArgs, out: &Path) -> Result<(), Failure> {
    let mut run = Run::new("simulate", out)?;
    let text = run.read_input(&args.input)?;
    let problem = if let Ok(file) = serde_json::from_str::<ExplicitRatesFile>(&text) {
        if args.controls.is_some() {
            return Err(Failure::input("--controls needs a scenario input"));
        }
        file.to_problem().map_err(|e| Failure::input(e.to_string()))?
    } else {
        let scenario =
            MobilityScenario::from_json(&text).map_err(|e| Failure::input(e.to_string()))?;
        let control = match &args.controls {
            None => None,
            Some(path) => {
                let text = run.read_input(path)?;
                let results: RebalanceResults = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("malformed controls: {e}")))?;
                let index = scenario.index();
                Some(results.control_matrix(&index).ok_or_else(|| {
                    Failure::input("controls do not match the scenario or carry no grid")
                })?)
            }
        };
        MonteCarloProblem::from_scenario(&scenario, control, args.grid)
            .map_err(|e| Failure::input(e.to_string()))?
    };
    let horizon = problem.rates().grid().horizon();
    let config = SimulationConfig {
        delta: args.delta.unwrap_or(horizon / 2000.0),
        runs: args.runs,
        seed: args.seed,
        record_every: args.record_every,
    };
    run.set_seed(args.seed);
    let summary = run_monte_carlo(&problem, &config).map_err(|e| Failure::input(e.to_string()))?;
    let verdict = Verdict {
        runs: summary.runs,
        delta: summary.delta,
        max_abs_z: summary.max_abs_z,
        z_limit: args.z_limit,
        pass: summary.passes(args.z_limit),
        truncated: summary.truncated,
        clamped_mass: summary.clamped_mass,
        clamping_inactive: summary.clamping_inactive(),
    };
    run.write("summary.csv", &csv_bytes(|b| write_summary_csv(&summary, b))?)?;
    run.write_json("verdict.json", &verdict)?;
    run.finish()?;
    println!(
        "max |z| {:.3} (limit {}) -> {}",
        verdict.max_abs_z,
        verdict.z_limit,
        if verdict.pass { "PASS" } else { "FAIL" }
    );
    if !verdict.clamping_inactive {
        println!(
            "clamping active: {} dropped departures, {:.4} clamped rate mass",
            verdict.truncated, verdict.clamped_mass
        );
    }
    Ok(())
}

pub fn gen_scenario(args: &GenScenarioArgs, out: &Path) -> Result<(), Failure> {
    let mut run = Run::new("gen-scenario", out)?;
    let mut cfg = GeneratorConfig { total_vehicles: args.total, ..GeneratorConfig::default() };
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(h) = args.horizon {
        cfg.horizon_hours = h;
    }
    run.set_seed(args.seed);
    let scenario = generate_random_scenario(args.stations, args.seed, &cfg)
        .map_err(|e| Failure::input(e.to_string()))?;
    let text = scenario.to_json().map_err(|e| Failure::internal(e.to_string()))? + "\n";
    run.write("scenario.json", text.as_bytes())?;
    run.finish()?;
    println!("{}", out.join("scenario.json").display());
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum VerifyReport<'a> {
    Regularity {
        passed: bool,
        #[serde(flatten)]
        report: &'a RegularityReport,
    },
    Assumption {
        passed: bool,
        #[serde(flatten)]
        report: &'a AssumptionReport,
    },
}

pub fn verify(args: &VerifyArgs, out: &Path) -> Result<(), Failure> {
    let mut run = Run::new("verify", out)?;
    let text = run.read_input(&args.input)?;
    let passed = if let Ok(file) = serde_json::from_str::<ScheduleInstanceFile>(&text) {
        let instance = file.to_instance().map_err(|e| Failure::input(e.to_string()))?;
        let steps = args.grid.unwrap_or(400);
        run.set_grid(steps);
        let grid = grid(instance.horizon(), steps)?;
        let scores = controllability_scores(instance.system(), &grid).map_err(schedule_failure)?;
        let report = check_regularity(&scores, args.tol);
        let passed = report.passed();
        run.write_json("verify.json", &VerifyReport::Regularity { passed, report: &report })?;
        println!(
            "regularity: {} constant channels, {} constant pairs",
            report.constant_channels.len(),
            report.constant_pairs.len()
        );
        passed
    } else {
        let scenario =
            MobilityScenario::from_json(&text).map_err(|e| Failure::input(e.to_string()))?;
        let (instance, _) = RebalanceInstance::from_scenario(&scenario, BoundsMode::NonNegative)
            .map_err(rebalance_failure)?;
        let steps = args.grid.unwrap_or(96);
        run.set_grid(steps);
        run.set_seed(args.seed);
        let grid = grid(instance.horizon(), steps)?;
        let disc = discretize_reachability(&instance.system, &grid).map_err(rebalance_failure)?;
        let opts = AssumptionOptions {
            trials: args.trials,
            seed: args.seed,
            ..AssumptionOptions::default()
        };
        let report = check_assumption(&instance.system, &disc, &opts).map_err(rebalance_failure)?;
        let passed = report.passed();
        run.write_json("verify.json", &VerifyReport::Assumption { passed, report: &report })?;
        println!("assumption: {} flags over {} directions", report.flags.len(), report.trials);
        passed
    };
    run.finish()?;
    if passed {
        println!("PASS");
        Ok(())
    } else {
        Err(Failure::flagged("verification raised flags"))
    }
}
