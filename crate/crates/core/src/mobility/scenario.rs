use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{IndexMap, MobilityError, PairCoefficients};
use crate::numerics::DenseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Station {
    /// 1-based.
    pub id: usize,
    pub x_km: f64,
    pub y_km: f64,
    /// Parked vehicles at time 0.
    pub initial: f64,
}

/// Terminal condition of the rebalancing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Full terminal state.
    Exact { state: Vec<f64> },
    /// Every station holds `total / s`, nothing in transit.
    Uniform,
    /// All stations hold the same count; in-transit vehicles are free.
    BalancedStations,
}

/// Fully specified scenario with coefficients in pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityScenario {
    pub stations: Vec<Station>,
    pub gamma: Vec<f64>,
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub gbar: Vec<f64>,
    pub horizon_hours: f64,
    pub beta: usize,
    pub target: TargetSpec,
}

impl MobilityScenario {
    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn index(&self) -> IndexMap {
        IndexMap::new(self.stations.len()).expect("validated scenario has two or more stations")
    }

    pub fn coefficients(&self) -> PairCoefficients {
        PairCoefficients {
            gamma: self.gamma.clone(),
            theta: self.theta.clone(),
            lambda: self.lambda.clone(),
        }
    }

    pub fn total_vehicles(&self) -> f64 {
        self.stations.iter().map(|s| s.initial).sum()
    }

    /// Initial state: parked counts, nothing in transit.
    pub fn x0(&self) -> DenseVector {
        let s = self.stations.len();
        let mut x = DenseVector::zeros(s * s);
        for (i, st) in self.stations.iter().enumerate() {
            x[i] = st.initial;
        }
        x
    }

    /// Equal split over stations, nothing in transit.
    pub fn uniform_target(&self) -> DenseVector {
        let s = self.stations.len();
        let share = self.total_vehicles() / s as f64;
        let mut x = DenseVector::zeros(s * s);
        x.rows_mut(0, s).fill(share);
        x
    }

    pub fn validate(&self) -> Result<(), MobilityError> {
        let s = self.stations.len();
        if s < 2 {
            return Err(MobilityError::TooFewStations(s));
        }
        let m = s * s - s;
        let bad = |msg: String| Err(MobilityError::InvalidScenario(msg));
        for (what, v) in [
            ("gamma", &self.gamma),
            ("theta", &self.theta),
            ("lambda", &self.lambda),
            ("gbar", &self.gbar),
        ] {
            if v.len() != m {
                return bad(format!("{what} has {} entries, expected {m}", v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{what} has a non-finite entry"));
            }
        }
        if self.gamma.iter().any(|g| *g <= 0.0) {
            return bad("travel rates must be positive".into());
        }
        if self.theta.iter().any(|t| *t <= 0.0) {
            return bad("price elasticities must be positive".into());
        }
        if self.lambda.iter().any(|l| *l < 0.0) || self.gbar.iter().any(|g| *g < 0.0) {
            return bad("lambda and base demand must be nonnegative".into());
        }
        for (k, st) in self.stations.iter().enumerate() {
            if st.id != k + 1 {
                return bad(format!("station ids must be 1..={s} in order"));
            }
            if !(st.initial.is_finite() && st.initial >= 0.0) {
                return bad(format!("station {} has invalid initial count", st.id));
            }
        }
        if !(self.horizon_hours.is_finite() && self.horizon_hours > 0.0) {
            return bad("horizon must be positive".into());
        }
        if self.beta == 0 || self.beta >= m {
            return bad(format!("team count {} outside 1..{m}", self.beta));
        }
        if let TargetSpec::Exact { state } = &self.target {
            if state.len() != s * s {
                return bad(format!("target has {} entries, expected {}", state.len(), s * s));
            }
        }
        Ok(())
    }

    pub fn to_file(&self) -> ExplicitScenario {
        let index = self.index();
        let map = |v: &[f64]| -> BTreeMap<String, f64> {
            (0..index.pair_count())
                .map(|p| (index.pair_key(p), v[p]))
                .collect()
        };
        ExplicitScenario {
            stations: self.stations.clone(),
            gamma: map(&self.gamma),
            theta: map(&self.theta),
            lambda: map(&self.lambda),
            gbar: map(&self.gbar),
            horizon_hours: self.horizon_hours,
            beta: self.beta,
            target: self.target.clone(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&ScenarioFile::Explicit(self.to_file()))
    }

    pub fn from_json(text: &str) -> Result<Self, MobilityError> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| MobilityError::InvalidScenario(e.to_string()))?;
        file.resolve()
    }
}

/// Scenario file with explicit pair-keyed coefficient maps. Keys are
/// `"i,j"` (destination, origin) with 1-based station ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitScenario {
    pub stations: Vec<Station>,
    pub gamma: BTreeMap<String, f64>,
    pub theta: BTreeMap<String, f64>,
    pub lambda: BTreeMap<String, f64>,
    pub gbar: BTreeMap<String, f64>,
    pub horizon_hours: f64,
    pub beta: usize,
    pub target: TargetSpec,
}

/// Scenario file that names a generator instead of listing coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedScenario {
    pub stations: usize,
    pub seed: u64,
    #[serde(default)]
    pub config: GeneratorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioFile {
    Explicit(ExplicitScenario),
    Generated { generator: GeneratedScenario },
}

impl ScenarioFile {
    pub fn resolve(&self) -> Result<MobilityScenario, MobilityError> {
        match self {
            ScenarioFile::Explicit(e) => e.resolve(),
            ScenarioFile::Generated { generator } => {
                generate_random_scenario(generator.stations, generator.seed, &generator.config)
            }
        }
    }
}

impl ExplicitScenario {
    pub fn resolve(&self) -> Result<MobilityScenario, MobilityError> {
        let index = IndexMap::new(self.stations.len())?;
        let pick = |what: &'static str, map: &BTreeMap<String, f64>| {
            if map.len() != index.pair_count() {
                return Err(MobilityError::InvalidScenario(format!(
                    "{what} lists {} pairs, expected {}",
                    map.len(),
                    index.pair_count()
                )));
            }
            (0..index.pair_count())
                .map(|p| {
                    let (i, j) = index.pair(p);
                    map.get(&index.pair_key(p))
                        .copied()
                        .ok_or(MobilityError::MissingCoefficient {
                            what,
                            i: i + 1,
                            j: j + 1,
                        })
                })
                .collect::<Result<Vec<f64>, _>>()
        };
        let scenario = MobilityScenario {
            stations: self.stations.clone(),
            gamma: pick("gamma", &self.gamma)?,
            theta: pick("theta", &self.theta)?,
            lambda: pick("lambda", &self.lambda)?,
            gbar: pick("gbar", &self.gbar)?,
            horizon_hours: self.horizon_hours,
            beta: self.beta,
            target: self.target.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Gaussian bump of the congestion field `1 + Σ peak·exp(−r²/(2σ²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongestionBump {
    pub x_km: f64,
    pub y_km: f64,
    pub sigma_km: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub radius_km: f64,
    pub total_vehicles: u64,
    /// Range of the uniform draws for θ and λ.
    pub coeff_range: [f64; 2],
    /// θ draws below this are raised to it.
    pub theta_min: f64,
    pub gbar_range: [f64; 2],
    pub speed_kmh: f64,
    pub min_separation_km: f64,
    pub congestion: Vec<CongestionBump>,
    pub horizon_hours: f64,
    pub beta: usize,
    /// Draw `λ_ij = λ_ji`.
    pub lambda_symmetric: bool,
    pub target: TargetSpec,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            radius_km: 20.0,
            total_vehicles: 200,
            coeff_range: [0.0, 0.3],
            theta_min: 0.01,
            gbar_range: [0.5, 2.0],
            speed_kmh: 30.0,
            min_separation_km: 2.0,
            congestion: vec![CongestionBump {
                x_km: 0.0,
                y_km: 0.0,
                sigma_km: 8.0,
                peak: 1.0,
            }],
            horizon_hours: 4.0,
            beta: 10,
            lambda_symmetric: true,
            target: TargetSpec::BalancedStations,
        }
    }
}

impl GeneratorConfig {
    pub fn congestion_at(&self, x: f64, y: f64) -> f64 {
        1.0 + self
            .congestion
            .iter()
            .map(|b| {
                let r2 = (x - b.x_km).powi(2) + (y - b.y_km).powi(2);
                b.peak * (-r2 / (2.0 * b.sigma_km * b.sigma_km)).exp()
            })
            .sum::<f64>()
    }
}

/// `speed / (distance · congestion at the segment midpoint)`.
pub fn travel_rate(config: &GeneratorConfig, from: (f64, f64), to: (f64, f64)) -> f64 {
    let d = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
    let c = config.congestion_at(0.5 * (from.0 + to.0), 0.5 * (from.1 + to.1));
    config.speed_kmh / (d * c)
}

/// Stations uniform in a disk (rejection-sampled for separation), vehicles
/// split by random weights with largest-remainder rounding, θ, λ and ḡ drawn
/// uniformly, travel rates from distance and congestion.
pub fn generate_random_scenario(
    s: usize,
    seed: u64,
    config: &GeneratorConfig,
) -> Result<MobilityScenario, MobilityError> {
    let index = IndexMap::new(s)?;
    let [lo, hi] = config.coeff_range;
    if !(lo >= 0.0 && hi >= lo && config.radius_km > 0.0 && config.speed_kmh > 0.0) {
        return Err(MobilityError::InvalidScenario(
            "generator ranges must be nonnegative and ordered".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pos: Vec<(f64, f64)> = Vec::with_capacity(s);
    let mut sep = config.min_separation_km;
    let mut attempts = 0;
    while pos.len() < s {
        let r = config.radius_km * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        let p = (r * phi.cos(), r * phi.sin());
        let ok = pos
            .iter()
            .all(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt() >= sep);
        attempts += 1;
        if ok {
            pos.push(p);
        } else if attempts % 1000 == 0 {
            // Too crowded for the requested separation.
            sep *= 0.8;
        }
    }
    // Coincident stations would give an infinite rate.
    let floor = 1e-3;

    let weights: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 1e-12).collect();
    let total = config.total_vehicles;
    let wsum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut counts: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let assigned: u64 = counts.iter().sum();
    for &i in order.iter().take((total - assigned) as usize) {
        counts[i] += 1;
    }

    let m = index.pair_count();
    let mut theta = vec![0.0; m];
    let mut lambda = vec![0.0; m];
    let mut gbar = vec![0.0; m];
    let mut gamma = vec![0.0; m];
    let draw = |rng: &mut ChaCha8Rng| lo + (hi - lo) * rng.random::<f64>();
    for p in 0..m {
        let (i, j) = index.pair(p);
        theta[p] = draw(&mut rng).max(config.theta_min);
        if !config.lambda_symmetric || i < j {
            lambda[p] = draw(&mut rng);
        }
        let [glo, ghi] = config.gbar_range;
        gbar[p] = glo + (ghi - glo) * rng.random::<f64>();
        let (a, b) = (pos[j], pos[i]);
        let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().max(floor);
        let c = config.congestion_at(0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        gamma[p] = config.speed_kmh / (d * c);
    }
    if config.lambda_symmetric {
        for p in 0..m {
            let (i, j) = index.pair(p);
            if i > j {
                lambda[p] = lambda[index.index(j, i).unwrap()];
            }
        }
    }

    let stations = pos
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(k, (&(x, y), &c))| Station {
            id: k + 1,
            x_km: x,
            y_km: y,
            initial: c as f64,
        })
        .collect();
    let scenario = MobilityScenario {
        stations,
        gamma,
        theta,
        lambda,
        gbar,
        horizon_hours: config.horizon_hours,
        beta: config.beta.min(m - 1),
        target: config.target.clone(),
    };
    scenario.validate()?;
    Ok(scenario)
}
