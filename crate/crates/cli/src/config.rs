//! Pipeline configuration: a TOML file whose keys mirror the command-line
//! flags. Flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use genco_core::curves::DEFAULT_PRICE_CAP;
use genco_core::scenarios::SamplingMode;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    PerDay,
    PerHour,
    Joint,
}

impl From<Sampling> for SamplingMode {
    fn from(s: Sampling) -> Self {
        match s {
            Sampling::PerDay => SamplingMode::PerDay,
            Sampling::PerHour => SamplingMode::PerHour,
            Sampling::Joint => SamplingMode::Joint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub curves: PathBuf,
    pub covariates: PathBuf,
    pub output: PathBuf,
    /// Genco blocks including the zero-price renewable block.
    pub blocks: usize,
    pub competitor_blocks: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub chi: f64,
    pub alpha: f64,
    pub flexibility: f64,
    pub window_days: u32,
    pub price_cap: f64,
    pub train_start: Option<NaiveDate>,
    pub train_end: Option<NaiveDate>,
    pub test_start: Option<NaiveDate>,
    pub test_end: Option<NaiveDate>,
    /// Test length when no test range is given: the last days of the data.
    pub test_days: usize,
    pub draws: usize,
    pub burn_in: usize,
    pub sampling: Sampling,
    pub gap: f64,
    /// Per optimization, seconds.
    pub time_limit: f64,
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            curves: "curves.csv".into(),
            covariates: "covariates.csv".into(),
            output: "out".into(),
            blocks: 7,
            competitor_blocks: 7,
            scenarios: 200,
            seed: 0,
            chi: 0.0,
            alpha: 0.1,
            flexibility: 0.1,
            window_days: 60,
            price_cap: DEFAULT_PRICE_CAP,
            train_start: None,
            train_end: None,
            test_start: None,
            test_end: None,
            test_days: 30,
            draws: 5000,
            burn_in: 1000,
            sampling: Sampling::PerDay,
            gap: 1e-6,
            time_limit: 300.0,
            threads: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads `path`; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if let Some(dir) = path.parent() {
            for p in [&mut cfg.curves, &mut cfg.covariates, &mut cfg.output] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            bail!("blocks must be at least 2 (renewable plus one priced block)");
        }
        if self.competitor_blocks == 0 {
            bail!("competitor_blocks must be positive");
        }
        if self.scenarios == 0 {
            bail!("scenarios must be positive");
        }
        if !(0.0..=1.0).contains(&self.chi) {
            bail!("chi must lie in [0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bail!("alpha must lie in (0, 1]");
        }
        if !(self.flexibility.is_finite() && self.flexibility >= 0.0) {
            bail!("flexibility must be non-negative");
        }
        if self.window_days == 0 {
            bail!("window_days must be positive");
        }
        if !(self.price_cap.is_finite() && self.price_cap > 0.0) {
            bail!("price_cap must be positive");
        }
        if self.draws == 0 {
            bail!("draws must be positive");
        }
        if !(self.gap.is_finite() && self.gap >= 0.0) {
            bail!("gap must be non-negative");
        }
        if !(self.time_limit.is_finite() && self.time_limit > 0.0) {
            bail!("time_limit must be positive");
        }
        for (a, b, what) in [
            (self.train_start, self.train_end, "train"),
            (self.test_start, self.test_end, "test"),
        ] {
            if let (Some(a), Some(b)) = (a, b) {
                if a > b {
                    bail!("{what} range starts after it ends");
                }
            }
        }
        Ok(())
    }
}

/// Inclusive train and test day ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Periods {
    pub train: (NaiveDate, NaiveDate),
    pub test: (NaiveDate, NaiveDate),
}

impl Periods {
    pub fn test_days(&self) -> Vec<NaiveDate> {
        self.test.0.iter_days().take_while(|d| *d <= self.test.1).collect()
    }
}

/// Fills unset dates from the data span `[first, last]`: the test period
/// defaults to the last `test_days` days and training to everything before.
pub fn resolve_periods(cfg: &PipelineConfig, first: NaiveDate, last: NaiveDate) -> Result<Periods> {
    let test_end = cfg.test_end.unwrap_or(last);
    let test_start = match cfg.test_start {
        Some(d) => d,
        None => {
            if cfg.test_days == 0 {
                bail!("test_days must be positive");
            }
            test_end - chrono::Duration::days(cfg.test_days as i64 - 1)
        }
    };
    let train_start = cfg.train_start.unwrap_or(first);
    let train_end = cfg.train_end.unwrap_or(test_start - chrono::Duration::days(1));
    let p = Periods {
        train: (train_start, train_end),
        test: (test_start, test_end),
    };
    if train_start > train_end || test_start > test_end {
        bail!("empty train or test range");
    }
    if train_end >= test_start {
        bail!("training ({train_start}..={train_end}) must end before testing starts ({test_start})");
    }
    if train_start < first || test_end > last {
        bail!("date ranges exceed the data ({first}..={last})");
    }
    Ok(p)
}

/// Parses `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("bad grid `{s}`"))?;
        let (a, b, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            bail!("grid `{s}` needs start <= end and a positive step");
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Rounded so that 0:1:0.1 yields 0.3 rather than 0.30000000000000004.
        return Ok((0..=n).map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad grid value `{p}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn default_periods_hold_out_the_tail() {
        let cfg = PipelineConfig::default();
        let p = resolve_periods(&cfg, date(2018, 6, 1), date(2019, 6, 30)).unwrap();
        assert_eq!(p.test, (date(2019, 6, 1), date(2019, 6, 30)));
        assert_eq!(p.train, (date(2018, 6, 1), date(2019, 5, 31)));
        assert_eq!(p.test_days().len(), 30);
    }

    #[test]
    fn overlapping_periods_rejected() {
        let cfg = PipelineConfig {
            train_end: Some(date(2019, 6, 5)),
            ..Default::default()
        };
        assert!(resolve_periods(&cfg, date(2018, 6, 1), date(2019, 6, 30)).is_err());
    }

    #[test]
    fn grid_forms() {
        let g = parse_grid("0:1:0.1").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[10], 1.0);
        assert_eq!(parse_grid("0, 0.5,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("1:0:0.1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig {
            chi: 0.5,
            test_start: Some(date(2019, 6, 1)),
            ..Default::default()
        };
        let back: PipelineConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(toml::from_str::<PipelineConfig>("nonsense = 1").is_err());
    }
}
