//! Price-response regression: feature construction and a conjugate
//! normal / inverse-gamma Gibbs sampler.
//!
//! Predictors are standardized on the fitting data before sampling. The
//! prior is isotropic on that scale, so the Gram matrix is diagonalized
//! once and every coefficient draw costs O(p^2).

use chrono::{Datelike, NaiveDateTime};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

/// Hourly lags used for every lagged series.
pub const LAGS: [usize; 7] = [24, 48, 72, 96, 120, 144, 168];
/// Hours of history needed before the first usable row.
pub const MAX_LAG: usize = 168;
const ROLLING: usize = 24;
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("need at least {needed} hourly rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("timestamps not hourly consecutive at row {0}")]
    Misaligned(usize),
    #[error("series `{0}` length does not match the timestamps")]
    LengthMismatch(&'static str),
    #[error("hour {0} has {1} block prices, expected {2}")]
    BlockCount(usize, usize, usize),
    #[error("non-finite value in series `{0}` at row {1}")]
    NonFinite(&'static str, usize),
    #[error("predictor `{0}` is constant")]
    ConstantColumn(String),
    #[error("predictor `{0}` is collinear with earlier predictors")]
    Collinear(String),
    #[error("need more rows ({rows}) than coefficients ({coefs})")]
    TooFewRows { rows: usize, coefs: usize },
    #[error("invalid sampler configuration: {0}")]
    Config(&'static str),
    #[error("feature row has {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("total absolute coefficient mass is zero")]
    ZeroMass,
    #[error("fold {0} has no rows")]
    EmptyFold(usize),
}

/// Aligned hourly inputs. `price` is the realized marginal price; it may be
/// NaN for hours that are only predicted.
#[derive(Debug, Clone, Default)]
pub struct HourlyInputs {
    pub timestamps: Vec<NaiveDateTime>,
    pub demand: Vec<f64>,
    pub wind: Vec<f64>,
    pub solar: Vec<f64>,
    pub price: Vec<f64>,
    pub holiday: Vec<bool>,
    /// Genco zero-price quantity.
    pub renewable: Vec<f64>,
    /// Genco priced-block prices, one vector per hour.
    pub block_prices: Vec<Vec<f64>>,
}

impl HourlyInputs {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn blocks(&self) -> usize {
        self.block_prices.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<(), RegressionError> {
        let n = self.len();
        let series: [(&'static str, usize); 7] = [
            ("demand", self.demand.len()),
            ("wind", self.wind.len()),
            ("solar", self.solar.len()),
            ("price", self.price.len()),
            ("holiday", self.holiday.len()),
            ("renewable", self.renewable.len()),
            ("block_prices", self.block_prices.len()),
        ];
        for (name, len) in series {
            if len != n {
                return Err(RegressionError::LengthMismatch(name));
            }
        }
        for i in 1..n {
            if self.timestamps[i] - self.timestamps[i - 1] != chrono::Duration::hours(1) {
                return Err(RegressionError::Misaligned(i));
            }
        }
        let k = self.blocks();
        for (i, b) in self.block_prices.iter().enumerate() {
            if b.len() != k {
                return Err(RegressionError::BlockCount(i, b.len(), k));
            }
        }
        for (name, s) in [("demand", &self.demand), ("wind", &self.wind), ("solar", &self.solar), ("renewable", &self.renewable)] {
            if let Some(i) = s.iter().position(|v| !v.is_finite()) {
                return Err(RegressionError::NonFinite(name, i));
            }
        }
        Ok(())
    }
}

/// Column layout of the design matrix (intercept excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub blocks: usize,
    pub names: Vec<String>,
}

impl FeatureSpec {
    pub fn new(blocks: usize) -> Self {
        let mut names = vec!["renewable".to_string()];
        names.extend((1..=blocks).map(|i| format!("block_{i}")));
        for s in ["demand", "wind", "solar"] {
            names.push(s.to_string());
            names.extend(LAGS.iter().map(|l| format!("{s}_lag{l}")));
            for stat in ["mean", "max", "min"] {
                names.push(format!("{s}_{stat}{ROLLING}"));
            }
        }
        names.extend(LAGS.iter().map(|l| format!("price_lag{l}")));
        // Monday and January are the reference levels.
        names.extend(["tue", "wed", "thu", "fri", "sat", "sun"].iter().map(|d| format!("dow_{d}")));
        names.extend((2..=12).map(|m| format!("month_{m}")));
        names.push("holiday".into());
        Self { blocks, names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Columns that the genco controls: renewable quantity and block prices.
    pub fn decision_columns(&self) -> std::ops::Range<usize> {
        0..1 + self.blocks
    }

    pub fn block_column(&self, i: usize) -> usize {
        1 + i
    }
}

#[derive(Debug, Clone)]
pub struct RegressionDataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub timestamps: Vec<NaiveDateTime>,
}

impl RegressionDataset {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let rows: Vec<usize> = range.collect();
        self.select(&rows)
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            x: self.x.select_rows(rows),
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            timestamps: rows.iter().map(|&r| self.timestamps[r]).collect(),
        }
    }
}

fn push_series(row: &mut Vec<f64>, s: &[f64], t: usize) {
    row.push(s[t]);
    row.extend(LAGS.iter().map(|&l| s[t - l]));
    let window = &s[t - ROLLING..t];
    row.push(window.iter().sum::<f64>() / ROLLING as f64);
    row.push(window.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    row.push(window.iter().copied().fold(f64::INFINITY, f64::min));
}

/// Feature row for hour `t` (requires `t >= MAX_LAG`). Uses only forecasts
/// up to `t` and realized prices up to `t - 24`.
pub fn feature_row(inputs: &HourlyInputs, t: usize) -> Vec<f64> {
    let spec_len = FeatureSpec::new(inputs.blocks()).len();
    let mut row = Vec::with_capacity(spec_len);
    row.push(inputs.renewable[t]);
    row.extend_from_slice(&inputs.block_prices[t]);
    for s in [&inputs.demand, &inputs.wind, &inputs.solar] {
        push_series(&mut row, s, t);
    }
    row.extend(LAGS.iter().map(|&l| inputs.price[t - l]));
    let ts = inputs.timestamps[t];
    let dow = ts.weekday().num_days_from_monday() as usize;
    row.extend((1..7).map(|d| f64::from(u8::from(dow == d))));
    let month = ts.month() as usize;
    row.extend((2..=12).map(|m| f64::from(u8::from(month == m))));
    row.push(f64::from(u8::from(inputs.holiday[t])));
    debug_assert_eq!(row.len(), spec_len);
    row
}

/// Design matrix over every hour with full lag history and a known price.
pub fn build_features(inputs: &HourlyInputs) -> Result<RegressionDataset, RegressionError> {
    inputs.validate()?;
    let n = inputs.len();
    if n <= MAX_LAG {
        return Err(RegressionError::InsufficientHistory {
            needed: MAX_LAG + 1,
            got: n,
        });
    }
    let spec = FeatureSpec::new(inputs.blocks());
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut timestamps = Vec::new();
    for t in MAX_LAG..n {
        if !inputs.price[t].is_finite() {
            continue;
        }
        let row = feature_row(inputs, t);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(RegressionError::NonFinite("features", t));
        }
        rows.push(row);
        y.push(inputs.price[t]);
        timestamps.push(inputs.timestamps[t]);
    }
    let p = spec.len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    Ok(RegressionDataset {
        names: spec.names,
        x,
        y: DVector::from_vec(y),
        timestamps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    /// Retained draws after burn-in.
    pub draws: usize,
    pub burn_in: usize,
    /// Prior variance of each standardized coefficient.
    pub prior_variance: f64,
    pub noise_shape: f64,
    pub noise_scale: f64,
    pub seed: u64,
    /// Keep the natural-unit draw matrix in the summary.
    pub keep_draws: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            draws: 5000,
            burn_in: 1000,
            prior_variance: 1e4,
            noise_shape: 2.0,
            noise_scale: 1.0,
            seed: 0,
            keep_draws: false,
        }
    }
}

/// Posterior of the coefficients. Index 0 is the intercept; index `j + 1`
/// is predictor `names[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    /// Natural units.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Standardized scale.
    pub std_mean: Vec<f64>,
    pub std_sd: Vec<f64>,
    /// Posterior mean of the residual standard deviation.
    pub noise_sd: f64,
    pub draws: usize,
    pub burn_in: usize,
    /// Natural-unit draws, one row per draw, when requested.
    pub draw_matrix: Option<DMatrix<f64>>,
}

impl PosteriorSummary {
    pub fn intercept(&self) -> f64 {
        self.mean[0]
    }

    /// Posterior mean and sd of predictor `name`.
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((self.mean[j + 1], self.sd[j + 1]))
    }
}

fn column_stats(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let m = col.sum() / n;
        let v = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        means.push(m);
        sds.push(v.sqrt());
    }
    (means, sds)
}

/// Incremental Cholesky on the Gram matrix; the first column whose pivot
/// collapses is a linear combination of the earlier ones.
fn check_rank(gram: &DMatrix<f64>, names: &[String]) -> Result<(), RegressionError> {
    let p = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        for i in 0..j {
            let s: f64 = (0..i).map(|k| l[(j, k)] * l[(i, k)]).sum();
            l[(j, i)] = (gram[(j, i)] - s) / l[(i, i)];
        }
        let d = gram[(j, j)] - (0..j).map(|k| l[(j, k)].powi(2)).sum::<f64>();
        if d <= COLLINEAR_TOL * gram[(j, j)] {
            // Column 0 is the intercept.
            return Err(RegressionError::Collinear(names[j - 1].clone()));
        }
        l[(j, j)] = d.sqrt();
    }
    Ok(())
}

/// Runs the Gibbs chain on `data` and summarizes the retained draws.
pub fn fit_gibbs(data: &RegressionDataset, cfg: &GibbsConfig) -> Result<PosteriorSummary, RegressionError> {
    if cfg.draws == 0 {
        return Err(RegressionError::Config("draws must be positive"));
    }
    if !(cfg.prior_variance > 0.0 && cfg.noise_shape > 0.0 && cfg.noise_scale > 0.0) {
        return Err(RegressionError::Config("prior parameters must be positive"));
    }
    let n = data.rows();
    let p = data.x.ncols();
    if n <= p + 1 {
        return Err(RegressionError::TooFewRows { rows: n, coefs: p + 1 });
    }
    let (means, sds) = column_stats(&data.x);
    for (j, &s) in sds.iter().enumerate() {
        if is_constant(means[j], s) {
            return Err(RegressionError::ConstantColumn(data.names[j].clone()));
        }
    }
    let z = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (data.x[(i, j - 1)] - means[j - 1]) / sds[j - 1]
        }
    });
    let gram = z.tr_mul(&z);
    check_rank(&gram, &data.names)?;
    let zty = z.tr_mul(&data.y);

    let eig = SymmetricEigen::new(gram);
    let q = eig.eigenvectors;
    let lambda = eig.eigenvalues;
    // Least-squares fit and its residual sum of squares, so that
    // |y - Z b|^2 = ssr_ols + (b - b_ols)' G (b - b_ols).
    let qty = q.tr_mul(&zty);
    let b_ols_rot = DVector::from_fn(p + 1, |k, _| qty[k] / lambda[k].max(f64::MIN_POSITIVE));
    let b_ols = &q * &b_ols_rot;
    let ssr_ols = (&data.y - &z * &b_ols).norm_squared();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tau2_inv = 1.0 / cfg.prior_variance;
    let shape = cfg.noise_shape + n as f64 / 2.0;
    let mut sigma2 = ssr_ols / (n - p - 1) as f64;
    if sigma2 <= 0.0 {
        sigma2 = cfg.noise_scale / shape;
    }
    let total = cfg.burn_in + cfg.draws;
    let mut kept = DMatrix::<f64>::zeros(cfg.draws, p + 1);
    let mut noise_sum = 0.0;
    let mut rot = DVector::<f64>::zeros(p + 1);
    let mut cond_mean = DVector::<f64>::zeros(p + 1);
    let mut cond_sum = DVector::<f64>::zeros(p + 1);
    for it in 0..total {
        // beta | sigma2 in the eigenbasis: independent normals.
        for k in 0..=p {
            let d = lambda[k] / sigma2 + tau2_inv;
            let e: f64 = StandardNormal.sample(&mut rng);
            cond_mean[k] = qty[k] / sigma2 / d;
            rot[k] = cond_mean[k] + e / d.sqrt();
        }
        // sigma2 | beta
        let diff = &rot - &b_ols_rot;
        let quad: f64 = (0..=p).map(|k| lambda[k] * diff[k] * diff[k]).sum();
        let rate = cfg.noise_scale + 0.5 * (ssr_ols + quad.max(0.0));
        let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
        sigma2 = 1.0 / g.sample(&mut rng);
        if it >= cfg.burn_in {
            let beta = &q * &rot;
            kept.row_mut(it - cfg.burn_in).copy_from(&beta.transpose());
            noise_sum += sigma2.sqrt();
            cond_sum += &cond_mean;
        }
    }

    // Natural units: b_j = s_j' / sd_j, b_0 = s_0' - sum_j s_j' mean_j / sd_j.
    let natural = DMatrix::from_fn(cfg.draws, p + 1, |r, j| {
        if j == 0 {
            kept[(r, 0)] - (1..=p).map(|c| kept[(r, c)] * means[c - 1] / sds[c - 1]).sum::<f64>()
        } else {
            kept[(r, j)] / sds[j - 1]
        }
    });
    let (_, std_sd) = mean_sd(&kept);
    let (_, sd) = mean_sd(&natural);
    // Means average the conditional means E[beta | sigma2] over the chain,
    // which has far less Monte Carlo noise than averaging the draws.
    let std_mean: Vec<f64> = (&q * (cond_sum / cfg.draws as f64)).iter().copied().collect();
    let mut mean: Vec<f64> = (0..=p).map(|j| if j == 0 { std_mean[0] } else { std_mean[j] / sds[j - 1] }).collect();
    mean[0] -= (1..=p).map(|c| std_mean[c] * means[c - 1] / sds[c - 1]).sum::<f64>();
    Ok(PosteriorSummary {
        names: data.names.clone(),
        mean,
        sd,
        std_mean,
        std_sd,
        noise_sd: noise_sum / cfg.draws as f64,
        draws: cfg.draws,
        burn_in: cfg.burn_in,
        draw_matrix: cfg.keep_draws.then_some(natural),
    })
}

fn is_constant(mean: f64, sd: f64) -> bool {
    sd <= 1e-12 * (1.0 + mean.abs())
}

/// Fits after dropping predictors that are constant on `data`, then any
/// that are linear combinations of earlier ones (for example a full set of
/// month dummies when the reference month is absent). The returned summary
/// covers every original column; dropped ones get zero mean, sd and draws.
/// Also returns the dropped names.
pub fn fit_gibbs_pruned(
    data: &RegressionDataset,
    cfg: &GibbsConfig,
) -> Result<(PosteriorSummary, Vec<String>), RegressionError> {
    let (means, sds) = column_stats(&data.x);
    let mut keep: Vec<usize> = (0..data.x.ncols()).filter(|&j| !is_constant(means[j], sds[j])).collect();
    let fit = loop {
        let reduced = RegressionDataset {
            names: keep.iter().map(|&j| data.names[j].clone()).collect(),
            x: data.x.select_columns(&keep),
            ..data.clone()
        };
        match fit_gibbs(&reduced, cfg) {
            Ok(fit) => break fit,
            Err(RegressionError::Collinear(name)) => {
                let j = data.names.iter().position(|n| *n == name).expect("column of data");
                keep.retain(|&k| k != j);
            }
            Err(e) => return Err(e),
        }
    };
    let dropped: Vec<String> = (0..data.x.ncols())
        .filter(|j| !keep.contains(j))
        .map(|j| data.names[j].clone())
        .collect();
    if dropped.is_empty() {
        return Ok((fit, dropped));
    }
    let p = data.x.ncols();
    // Position of each original column in the reduced fit, shifted past
    // the intercept.
    let slot = |j: usize| keep.iter().position(|&k| k == j).map(|c| c + 1);
    let expand = |v: &[f64]| -> Vec<f64> {
        (0..=p)
            .map(|j| if j == 0 { v[0] } else { slot(j - 1).map_or(0.0, |c| v[c]) })
            .collect()
    };
    let draw_matrix = fit.draw_matrix.as_ref().map(|m| {
        DMatrix::from_fn(m.nrows(), p + 1, |r, j| {
            if j == 0 {
                m[(r, 0)]
            } else {
                slot(j - 1).map_or(0.0, |c| m[(r, c)])
            }
        })
    });
    Ok((
        PosteriorSummary {
            names: data.names.clone(),
            mean: expand(&fit.mean),
            sd: expand(&fit.sd),
            std_mean: expand(&fit.std_mean),
            std_sd: expand(&fit.std_sd),
            draw_matrix,
            ..fit
        },
        dropped,
    ))
}

fn mean_sd(m: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = m.nrows() as f64;
    m.column_iter()
        .map(|c| {
            let mu = c.sum() / n;
            let var = if m.nrows() > 1 {
                c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (mu, var.sqrt())
        })
        .unzip()
}

/// Linear predictor at the posterior means.
pub fn predict_mean(summary: &PosteriorSummary, row: &[f64]) -> Result<f64, RegressionError> {
    if row.len() != summary.names.len() {
        return Err(RegressionError::DimensionMismatch {
            expected: summary.names.len(),
            got: row.len(),
        });
    }
    Ok(summary.mean[0] + summary.mean[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPair {
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// Per-fold out-of-sample errors when produced by cross-validation.
    pub folds: Vec<ErrorPair>,
}

fn error_pair(pred: &[f64], y: &[f64]) -> ErrorPair {
    let n = y.len() as f64;
    let (abs, sq) = pred
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(a, s), (p, t)| (a + (p - t).abs(), s + (p - t).powi(2)));
    ErrorPair {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    }
}

/// In-sample MAE and RMSE of the posterior-mean predictor.
pub fn evaluate(summary: &PosteriorSummary, data: &RegressionDataset) -> Result<FitMetrics, RegressionError> {
    if data.rows() == 0 {
        return Err(RegressionError::EmptyFold(0));
    }
    let pred = predictions(summary, data)?;
    let e = error_pair(&pred, data.y.as_slice());
    Ok(FitMetrics {
        mae: e.mae,
        rmse: e.rmse,
        folds: Vec::new(),
    })
}

fn predictions(summary: &PosteriorSummary, data: &RegressionDataset) -> Result<Vec<f64>, RegressionError> {
    (0..data.rows())
        .map(|i| {
            let row: Vec<f64> = data.x.row(i).iter().copied().collect();
            predict_mean(summary, &row)
        })
        .collect()
}

/// Contiguous folds in time order. Each fold is predicted by a model fitted
/// on the remaining rows; predictors constant on those rows are dropped for
/// that fit. Reported errors are fold averages.
pub fn cross_validate(data: &RegressionDataset, folds: usize, cfg: &GibbsConfig) -> Result<FitMetrics, RegressionError> {
    if folds < 2 {
        return Err(RegressionError::Config("need at least two folds"));
    }
    let n = data.rows();
    let mut results = Vec::with_capacity(folds);
    for f in 0..folds {
        let (a, b) = (f * n / folds, (f + 1) * n / folds);
        if a == b {
            return Err(RegressionError::EmptyFold(f));
        }
        let train_rows: Vec<usize> = (0..a).chain(b..n).collect();
        let train = data.select(&train_rows);
        let (fit, _) = fit_gibbs_pruned(&train, cfg)?;
        let test = data.slice(a..b);
        let pred: Vec<f64> = (0..test.rows())
            .map(|i| fit.mean[0] + (0..test.x.ncols()).map(|j| fit.mean[j + 1] * test.x[(i, j)]).sum::<f64>())
            .collect();
        results.push(error_pair(&pred, test.y.as_slice()));
    }
    let k = results.len() as f64;
    Ok(FitMetrics {
        mae: results.iter().map(|e| e.mae).sum::<f64>() / k,
        rmse: results.iter().map(|e| e.rmse).sum::<f64>() / k,
        folds: results,
    })
}

/// Percentage of absolute standardized coefficient mass held by the
/// decision predictors (renewable quantity and block prices).
pub fn decision_share(summary: &PosteriorSummary, spec: &FeatureSpec) -> Result<f64, RegressionError> {
    let coefs = &summary.std_mean[1..];
    let total: f64 = coefs.iter().map(|b| b.abs()).sum();
    if total <= 0.0 {
        return Err(RegressionError::ZeroMass);
    }
    let decision: f64 = spec.decision_columns().map(|j| coefs[j].abs()).sum();
    Ok(100.0 * decision / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::Rng;

    fn hours(n: usize) -> Vec<NaiveDateTime> {
        let start = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        (0..n).map(|i| start + chrono::Duration::hours(i as i64)).collect()
    }

    fn inputs(n: usize, seed: u64) -> HourlyInputs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(lo..hi)).collect() };
        let demand = r(20000.0, 35000.0);
        let wind = r(0.0, 8000.0);
        let solar = r(0.0, 4000.0);
        let price = r(20.0, 70.0);
        let renewable = r(1000.0, 3000.0);
        let b1 = r(30.0, 40.0);
        let b2 = r(45.0, 60.0);
        HourlyInputs {
            timestamps: hours(n),
            demand,
            wind,
            solar,
            price,
            holiday: vec![false; n],
            renewable,
            block_prices: b1.into_iter().zip(b2).map(|(a, b)| vec![a, b]).collect(),
        }
    }

    #[test]
    fn spec_layout() {
        let spec = FeatureSpec::new(6);
        assert_eq!(spec.len(), 65);
        assert_eq!(spec.decision_columns(), 0..7);
        assert_eq!(spec.names[spec.block_column(1)], "block_2");
        let mut sorted = spec.names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), spec.len());
    }

    #[test]
    fn minimal_history_gives_one_row() {
        let d = build_features(&inputs(169, 1)).unwrap();
        assert_eq!(d.rows(), 1);
        assert_eq!(d.x.ncols(), FeatureSpec::new(2).len());
        assert!(matches!(
            build_features(&inputs(168, 1)),
            Err(RegressionError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn lag_columns_are_shifted_copies() {
        let inp = inputs(400, 2);
        let d = build_features(&inp).unwrap();
        let col = |name: &str| d.names.iter().position(|n| n == name).unwrap();
        for i in 0..d.rows() {
            let t = i + MAX_LAG;
            assert_eq!(d.x[(i, col("demand_lag48"))], inp.demand[t - 48]);
            assert_eq!(d.x[(i, col("price_lag168"))], inp.price[t - 168]);
            assert_eq!(d.x[(i, col("wind"))], inp.wind[t]);
            let w = &inp.solar[t - 24..t];
            assert_eq!(d.x[(i, col("solar_max24"))], w.iter().copied().fold(f64::MIN, f64::max));
        }
    }

    #[test]
    fn constant_series_statistics() {
        let mut inp = inputs(200, 3);
        inp.demand = vec![25000.0; 200];
        let d = build_features(&inp).unwrap();
        let col = |name: &str| d.names.iter().position(|n| n == name).unwrap();
        for i in 0..d.rows() {
            assert_eq!(d.x[(i, col("demand_lag24"))], 25000.0);
            assert_eq!(d.x[(i, col("demand_max24"))], d.x[(i, col("demand_min24"))]);
        }
    }

    #[test]
    fn misaligned_timestamps_rejected() {
        let mut inp = inputs(200, 4);
        inp.timestamps[50] = inp.timestamps[49];
        assert_eq!(build_features(&inp).unwrap_err(), RegressionError::Misaligned(50));
    }

    fn summary_with(std_mean: Vec<f64>, names: Vec<String>) -> PosteriorSummary {
        let k = std_mean.len();
        PosteriorSummary {
            names,
            mean: std_mean.clone(),
            sd: vec![1.0; k],
            std_mean,
            std_sd: vec![1.0; k],
            noise_sd: 1.0,
            draws: 1,
            burn_in: 0,
            draw_matrix: None,
        }
    }

    #[test]
    fn decision_share_extremes() {
        let spec = FeatureSpec::new(2);
        let mut coefs = vec![0.0; spec.len() + 1];
        coefs[1] = 2.0;
        coefs[2] = -1.0;
        let s = summary_with(coefs.clone(), spec.names.clone());
        assert_eq!(decision_share(&s, &spec).unwrap(), 100.0);
        let mut other = vec![0.0; spec.len() + 1];
        other[10] = 3.0;
        assert_eq!(decision_share(&summary_with(other, spec.names.clone()), &spec).unwrap(), 0.0);
        let zero = summary_with(vec![0.0; spec.len() + 1], spec.names.clone());
        assert_eq!(decision_share(&zero, &spec), Err(RegressionError::ZeroMass));
    }

    #[test]
    fn prediction_is_linear_form() {
        let names: Vec<String> = (0..3).map(|i| format!("x{i}")).collect();
        let s = summary_with(vec![5.0, 1.0, -2.0, 0.5], names);
        assert_eq!(predict_mean(&s, &[0.0, 0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(predict_mean(&s, &[0.0, 1.0, 0.0]).unwrap(), 3.0);
        assert_eq!(predict_mean(&s, &[1.0, 2.0, 4.0]).unwrap(), 5.0 + 1.0 - 4.0 + 2.0);
        assert!(predict_mean(&s, &[1.0]).is_err());
    }

    #[test]
    fn metrics_on_known_residuals() {
        let e = error_pair(&[3.0, 1.0], &[1.0, 3.0]);
        assert_eq!(e.mae, 2.0);
        assert_eq!(e.rmse, 2.0);
        let e = error_pair(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!((e.mae, e.rmse), (0.0, 0.0));
    }

    fn dataset(x: DMatrix<f64>, y: DVector<f64>) -> RegressionDataset {
        let n = x.nrows();
        RegressionDataset {
            names: (0..x.ncols()).map(|j| format!("x{j}")).collect(),
            x,
            y,
            timestamps: hours(n),
        }
    }

    #[test]
    fn collinear_column_is_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(50, 3, |_, _| rng.gen_range(0.0..1.0));
        let mut x = x.insert_column(3, 0.0);
        for i in 0..50 {
            x[(i, 3)] = 2.0 * x[(i, 0)] - x[(i, 2)];
        }
        let y = DVector::from_fn(50, |i, _| x[(i, 0)]);
        let err = fit_gibbs(&dataset(x, y), &GibbsConfig::default()).unwrap_err();
        assert_eq!(err, RegressionError::Collinear("x3".into()));
    }

    #[test]
    fn constant_column_is_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = DMatrix::from_fn(50, 2, |_, _| rng.gen_range(0.0..1.0));
        x.column_mut(1).fill(4.0);
        let y = DVector::from_fn(50, |i, _| x[(i, 0)]);
        let err = fit_gibbs(&dataset(x, y), &GibbsConfig::default()).unwrap_err();
        assert_eq!(err, RegressionError::ConstantColumn("x1".into()));
    }

    #[test]
    fn pruned_fit_restores_layout() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut x = DMatrix::from_fn(80, 3, |_, _| rng.gen_range(0.0..1.0));
        x.column_mut(1).fill(0.0);
        let y = DVector::from_fn(80, |i, _| 1.0 + 2.0 * x[(i, 0)] - x[(i, 2)]);
        let cfg = GibbsConfig { draws: 200, burn_in: 50, keep_draws: true, ..Default::default() };
        let (s, dropped) = fit_gibbs_pruned(&dataset(x, y), &cfg).unwrap();
        assert_eq!(dropped, vec!["x1".to_string()]);
        assert_eq!(s.mean.len(), 4);
        assert_eq!((s.mean[2], s.sd[2]), (0.0, 0.0));
        assert!((s.mean[1] - 2.0).abs() < 1e-3 && (s.mean[3] + 1.0).abs() < 1e-3);
        let m = s.draw_matrix.unwrap();
        assert_eq!(m.ncols(), 4);
        assert!(m.column(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pruning_drops_collinear_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        // Two dummies that always sum to one duplicate the intercept.
        let x = DMatrix::from_fn(60, 3, |i, j| match j {
            0 => rng.gen_range(0.0..1.0),
            1 => f64::from(u8::from(i % 2 == 0)),
            _ => f64::from(u8::from(i % 2 == 1)),
        });
        let y = DVector::from_fn(60, |i, _| 1.0 + 3.0 * x[(i, 0)]);
        let cfg = GibbsConfig { draws: 200, burn_in: 50, ..Default::default() };
        let (s, dropped) = fit_gibbs_pruned(&dataset(x, y), &cfg).unwrap();
        assert_eq!(dropped, vec!["x2".to_string()]);
        assert!((s.mean[1] - 3.0).abs() < 1e-3);
        assert!(s.mean[2].abs() < 1e-3);
    }

    #[test]
    fn noiseless_data_identified() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = [3.0, -1.5, 0.25, 10.0];
        let x = DMatrix::from_fn(300, 3, |_, j| rng.gen_range(0.0..(j + 1) as f64 * 10.0));
        let y = DVector::from_fn(300, |i, _| truth[0] + (0..3).map(|j| truth[j + 1] * x[(i, j)]).sum::<f64>());
        let s = fit_gibbs(&dataset(x, y), &GibbsConfig { draws: 1000, burn_in: 200, ..Default::default() }).unwrap();
        for (m, t) in s.mean.iter().zip(truth) {
            assert!((m - t).abs() < 1e-3, "{m} vs {t}");
        }
    }
}
