//! Price-response scenarios sampled from the regression posterior, and the
//! per-hour exogenous terms of the offering problem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::regression::{FeatureSpec, PosteriorSummary};

/// Blocks at the top of the ladder whose price is never flexible.
pub const RIGID_TOP_BLOCKS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario count must be positive")]
    NoScenarios,
    #[error("posterior has no coefficient `{0}`")]
    MissingCoefficient(String),
    #[error("joint sampling needs the posterior draw matrix")]
    NoDraws,
    #[error("missing covariates for hour {0}")]
    MissingHour(usize),
    #[error("hour {hour}: {what}")]
    Invalid { hour: usize, what: &'static str },
    #[error("flexibility fraction must be finite and non-negative")]
    Fraction,
}

/// How block coefficients vary inside one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// One independent draw per block, shared by all hours.
    #[default]
    PerDay,
    /// Independent draws per block and hour.
    PerHour,
    /// A whole posterior draw per scenario, keeping cross-correlations.
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: usize,
    pub hours: usize,
    pub blocks: usize,
    /// Flattened `[scenario][hour][block]`, natural units.
    pub coefficients: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn beta(&self, scenario: usize, hour: usize, block: usize) -> f64 {
        self.coefficients[(scenario * self.hours + hour) * self.blocks + block]
    }

    /// Keeps hours `range` only.
    pub fn restrict_hours(&self, range: std::ops::Range<usize>) -> Self {
        let hours = range.len();
        let mut coefficients = Vec::with_capacity(self.scenarios * hours * self.blocks);
        for w in 0..self.scenarios {
            for t in range.clone() {
                coefficients.extend((0..self.blocks).map(|i| self.beta(w, t, i)));
            }
        }
        Self {
            hours,
            coefficients,
            ..self.clone()
        }
    }
}

fn block_moments(posterior: &PosteriorSummary, blocks: usize) -> Result<Vec<(f64, f64, usize)>, ScenarioError> {
    (1..=blocks)
        .map(|i| {
            let name = format!("block_{i}");
            let j = posterior
                .names
                .iter()
                .position(|n| *n == name)
                .ok_or(ScenarioError::MissingCoefficient(name))?;
            Ok((posterior.mean[j + 1], posterior.sd[j + 1], j + 1))
        })
        .collect()
}

/// Samples `scenarios` equiprobable scenarios of the block-price
/// coefficients for `hours` hours.
pub fn generate(
    posterior: &PosteriorSummary,
    blocks: usize,
    hours: usize,
    scenarios: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<ScenarioSet, ScenarioError> {
    if scenarios == 0 {
        return Err(ScenarioError::NoScenarios);
    }
    let moments = block_moments(posterior, blocks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = Vec::with_capacity(scenarios * hours * blocks);
    for _ in 0..scenarios {
        match mode {
            SamplingMode::PerDay => {
                let day: Vec<f64> = moments
                    .iter()
                    .map(|&(m, s, _)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect();
                for _ in 0..hours {
                    coefficients.extend_from_slice(&day);
                }
            }
            SamplingMode::PerHour => {
                for _ in 0..hours * blocks {
                    let (m, s, _) = moments[coefficients.len() % blocks];
                    let z: f64 = StandardNormal.sample(&mut rng);
                    coefficients.push(m + s * z);
                }
            }
            SamplingMode::Joint => {
                let draws = posterior.draw_matrix.as_ref().ok_or(ScenarioError::NoDraws)?;
                let r = rng.gen_range(0..draws.nrows());
                for _ in 0..hours {
                    coefficients.extend(moments.iter().map(|&(_, _, j)| draws[(r, j)]));
                }
            }
        }
    }
    Ok(ScenarioSet {
        scenarios,
        hours,
        blocks,
        coefficients,
        probabilities: vec![1.0 / scenarios as f64; scenarios],
        seed,
    })
}

/// Known-at-decision-time terms of the price response for each hour.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousForecast {
    pub intercept: f64,
    pub renewable_coef: f64,
    /// Covariate contribution D_t, EUR/MWh.
    pub d: Vec<f64>,
    pub renewable: Vec<f64>,
    /// `[hour][block]` capacities, MWh.
    pub q_max: Vec<Vec<f64>>,
    /// `[hour][block]` true costs, EUR/MWh.
    pub cost: Vec<Vec<f64>>,
    /// `[hour][block]` allowed deviation from cost, EUR/MWh.
    pub sigma: Vec<Vec<f64>>,
}

impl ExogenousForecast {
    pub fn hours(&self) -> usize {
        self.d.len()
    }

    pub fn blocks(&self) -> usize {
        self.cost.first().map_or(0, Vec::len)
    }

    pub fn restrict_hours(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            intercept: self.intercept,
            renewable_coef: self.renewable_coef,
            d: self.d[range.clone()].to_vec(),
            renewable: self.renewable[range.clone()].to_vec(),
            q_max: self.q_max[range.clone()].to_vec(),
            cost: self.cost[range.clone()].to_vec(),
            sigma: self.sigma[range].to_vec(),
        }
    }

    /// Same instance with flexibility `fraction` of cost on every block
    /// except the top [`RIGID_TOP_BLOCKS`].
    pub fn with_flexibility(&self, fraction: f64) -> Result<Self, ScenarioError> {
        if !(fraction.is_finite() && fraction >= 0.0) {
            return Err(ScenarioError::Fraction);
        }
        Ok(Self {
            sigma: self.cost.iter().map(|c| flexibility(c, fraction)).collect(),
            ..self.clone()
        })
    }
}

fn flexibility(cost: &[f64], fraction: f64) -> Vec<f64> {
    let flexible = cost.len().saturating_sub(RIGID_TOP_BLOCKS);
    cost.iter()
        .enumerate()
        .map(|(i, &c)| if i < flexible { fraction * c } else { 0.0 })
        .collect()
}

/// Assembles the exogenous terms for each target hour. `covariates[t]` is
/// the full feature row of hour `t`; its decision columns are ignored.
pub fn compute_exogenous(
    posterior: &PosteriorSummary,
    spec: &FeatureSpec,
    covariates: &[Vec<f64>],
    renewable: &[f64],
    q_max: &[Vec<f64>],
    cost: &[Vec<f64>],
    fraction: f64,
) -> Result<ExogenousForecast, ScenarioError> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(ScenarioError::Fraction);
    }
    let hours = renewable.len();
    let decision = spec.decision_columns();
    let mut d = Vec::with_capacity(hours);
    for t in 0..hours {
        let row = covariates.get(t).ok_or(ScenarioError::MissingHour(t))?;
        if row.len() != spec.len() || row.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::MissingHour(t));
        }
        let q = q_max.get(t).ok_or(ScenarioError::MissingHour(t))?;
        let c = cost.get(t).ok_or(ScenarioError::MissingHour(t))?;
        if q.len() != spec.blocks || c.len() != spec.blocks {
            return Err(ScenarioError::Invalid {
                hour: t,
                what: "block count differs from the feature layout",
            });
        }
        if renewable[t] < 0.0 || q.iter().any(|&v| v < 0.0) {
            return Err(ScenarioError::Invalid {
                hour: t,
                what: "negative quantity",
            });
        }
        if c.windows(2).any(|w| w[0] > w[1]) {
            return Err(ScenarioError::Invalid {
                hour: t,
                what: "block costs decrease",
            });
        }
        let dt = (0..spec.len())
            .filter(|j| !decision.contains(j))
            .map(|j| posterior.mean[j + 1] * row[j])
            .sum();
        d.push(dt);
    }
    Ok(ExogenousForecast {
        intercept: posterior.mean[0],
        renewable_coef: posterior.mean[1 + decision.start],
        d,
        renewable: renewable.to_vec(),
        q_max: q_max[..hours].to_vec(),
        cost: cost[..hours].to_vec(),
        sigma: cost[..hours].iter().map(|c| flexibility(c, fraction)).collect(),
    })
}
