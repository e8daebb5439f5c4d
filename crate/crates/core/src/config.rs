//! Run configuration and the default microgrid used with the bundled data.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispatch::SolverConfig;
use crate::error::{Error, Result};
use crate::model::{
    MicrogridSpec, StorageSpec, UnitCosts, UserSpec, DEFAULT_DAYS, DEFAULT_DISCOMFORT, DEFAULT_OPERATOR_COST,
};
use crate::renewables::TurbineCurve;
use crate::scenarios::{ScenarioMetric, DEFAULT_KEEP};
use crate::synthetic::DEFAULT_SEED;

/// Which bundled wind station to pair with the solar series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Site {
    /// Night-peaking wind.
    #[default]
    Tc,
    /// Afternoon-peaking wind.
    Skg,
}

impl std::str::FromStr for Site {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tc" => Ok(Site::Tc),
            "skg" => Ok(Site::Skg),
            other => Err(Error::invalid(format!("unknown site `{other}` (expected tc or skg)"))),
        }
    }
}

const RESIDENTIAL: [f64; 24] = [
    30.0, 26.0, 24.0, 22.0, 22.0, 24.0, 30.0, 38.0, 36.0, 30.0, 28.0, 28.0, 30.0, 30.0, 30.0, 32.0, 38.0, 48.0, 60.0,
    66.0, 64.0, 56.0, 46.0, 36.0,
];
const COMMERCIAL: [f64; 24] = [
    10.0, 10.0, 10.0, 10.0, 10.0, 12.0, 20.0, 40.0, 60.0, 70.0, 72.0, 70.0, 62.0, 70.0, 72.0, 70.0, 64.0, 50.0, 34.0,
    24.0, 18.0, 14.0, 12.0, 10.0,
];
const INDUSTRIAL: [f64; 24] = [
    36.0, 36.0, 36.0, 36.0, 36.0, 38.0, 42.0, 46.0, 48.0, 48.0, 48.0, 46.0, 42.0, 46.0, 48.0, 48.0, 46.0, 42.0, 40.0,
    38.0, 38.0, 36.0, 36.0, 36.0,
];

fn elastic_user(preferred: &[f64]) -> UserSpec<f64> {
    UserSpec {
        min_load: preferred.iter().map(|y| 0.3 * y).collect(),
        max_load: preferred.iter().map(|y| 2.0 * y).collect(),
        total: preferred.iter().sum(),
        preferred: preferred.to_vec(),
        discomfort: DEFAULT_DISCOMFORT,
    }
}

/// Three aggregated user groups (residential, commercial, industrial) on an
/// inelastic base load, with default storage and cost coefficients.
pub fn default_spec() -> MicrogridSpec<f64> {
    let inelastic_load = (0..24)
        .map(|t| {
            let angle = 2.0 * std::f64::consts::PI * (t as f64 - 15.0) / 24.0;
            120.0 + 30.0 * angle.cos()
        })
        .map(|v: f64| (v * 100.0).round() / 100.0)
        .collect();
    MicrogridSpec {
        users: [&RESIDENTIAL[..], &COMMERCIAL[..], &INDUSTRIAL[..]]
            .iter()
            .map(|y| elastic_user(y))
            .collect(),
        inelastic_load,
        operator_cost: DEFAULT_OPERATOR_COST,
        days: DEFAULT_DAYS,
        storage: StorageSpec::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Radiation CSV; the bundled synthetic series when absent.
    pub solar_csv: Option<PathBuf>,
    /// Wind-speed CSV; the bundled series of `site` when absent.
    pub wind_csv: Option<PathBuf>,
    pub site: Site,
    pub keep: usize,
    pub metric: ScenarioMetric<f64>,
    pub turbine: TurbineCurve<f64>,
    pub spec: MicrogridSpec<f64>,
    pub costs: UnitCosts<f64>,
    /// Investment budget in HKD; unlimited when absent.
    pub budget: Option<f64>,
    pub budget_sweep: Vec<f64>,
    /// Symmetric relative forecast errors in percent.
    pub error_pcts: Vec<f64>,
    pub solver: SolverConfig<f64>,
    /// Seed of the synthetic data generator and of every randomized helper.
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solar_csv: None,
            wind_csv: None,
            site: Site::Tc,
            keep: DEFAULT_KEEP,
            metric: ScenarioMetric::default(),
            turbine: TurbineCurve::default(),
            spec: default_spec(),
            costs: UnitCosts::default(),
            budget: None,
            budget_sweep: vec![0.0, 2.0e6, 4.0e6, 6.0e6, 8.0e6, 1.0e7, 1.2e7, 1.4e7],
            error_pcts: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            solver: SolverConfig::default(),
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn budget_value(&self) -> f64 {
        self.budget.unwrap_or(f64::INFINITY)
    }

    /// Checks files and parameters before any solve starts.
    pub fn validate(&self) -> Result<()> {
        for p in self.solar_csv.iter().chain(self.wind_csv.iter()) {
            if !p.is_file() {
                return Err(Error::invalid(format!("input file {} does not exist", p.display())));
            }
        }
        if self.keep == 0 {
            return Err(Error::invalid("at least one scenario must be kept"));
        }
        self.turbine.validate()?;
        self.spec.validate()?;
        self.costs.validate()?;
        if let Some(b) = self.budget {
            if !(b >= 0.0) {
                return Err(Error::infeasible("budget", format!("budget {b} is negative")));
            }
        }
        if self.budget_sweep.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::infeasible("budget", "sweep budgets must be non-negative"));
        }
        if self.error_pcts.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("error percentages must be finite and non-negative"));
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0) || s.max_iterations == 0 || !(s.step_decay > 0.0) || s.step_size.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::invalid("solver step, tolerance and iteration limit must be positive"));
        }
        Ok(())
    }
}
