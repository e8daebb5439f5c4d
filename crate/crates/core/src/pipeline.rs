//! End-to-end run: weather series to profiles, scenarios, investment,
//! dispatch and sweeps, written as a versioned report bundle.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Site};
use crate::error::{Error, Result};
use crate::model::{check_dispatch, check_investment, DispatchSolution, MicrogridSpec};
use crate::portfolio::{
    budget_sweep, solve_ep1, solve_ep1_without_demand_response, write_budget_sweep_csv, BudgetPoint,
    DemandResponse, InvestmentSolution,
};
use crate::renewables::{all_profiles, correlation, MeteoSeries, SeriesKind};
use crate::robust::{error_sweep, write_error_sweep_csv, ErrorPoint};
use crate::scenarios::{build_scenarios, reduce_with, ScenarioSet};
use crate::synthetic::{bundled_dataset, generate, SyntheticConfig, SyntheticDataset, DEFAULT_SEED};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub schema_version: u32,
    pub config: RunConfig,
    /// Correlation of the hourly solar and wind profiles over all days.
    pub correlation: f64,
    pub days: usize,
    pub scenarios: ScenarioSet<f64>,
    pub kept: Vec<usize>,
    pub reduction_distance: f64,
    pub investment: InvestmentSolution<f64>,
    pub without_demand_response: InvestmentSolution<f64>,
    pub budget_sweep: Vec<BudgetPoint<f64>>,
    pub error_sweep: Vec<ErrorPoint<f64>>,
    /// Constraint violations found by re-checking every emitted schedule.
    pub violations: Vec<String>,
}

impl ReportBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a bundle, rejecting any schema version other than the current one.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            schema_version: u32,
        }
        let h: Header = serde_json::from_str(text)?;
        if h.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: h.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Weather inputs named in the config, falling back to the bundled data.
pub fn load_series(cfg: &RunConfig) -> Result<(MeteoSeries<f64>, MeteoSeries<f64>)> {
    let bundled = || -> Result<SyntheticDataset<f64>> {
        if cfg.seed == DEFAULT_SEED {
            bundled_dataset()
        } else {
            generate(&SyntheticConfig {
                seed: cfg.seed,
                ..Default::default()
            })
        }
    };
    let mut data = None;
    let mut fallback = || -> Result<SyntheticDataset<f64>> {
        if data.is_none() {
            data = Some(bundled()?);
        }
        Ok(data.clone().expect("just filled"))
    };
    let solar = match &cfg.solar_csv {
        Some(p) => MeteoSeries::from_csv(File::open(p)?, station_name(p), SeriesKind::Solar)?,
        None => fallback()?.solar,
    };
    let wind = match &cfg.wind_csv {
        Some(p) => MeteoSeries::from_csv(File::open(p)?, station_name(p), SeriesKind::Wind)?,
        None => {
            let d = fallback()?;
            match cfg.site {
                Site::Tc => d.night_wind,
                Site::Skg => d.day_wind,
            }
        }
    };
    Ok((solar, wind))
}

pub fn station_name(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "station".into())
}

/// Re-checks schedules and the portfolio; returns readable violations.
pub fn audit_investment(
    spec: &MicrogridSpec<f64>,
    set: &ScenarioSet<f64>,
    inv: &InvestmentSolution<f64>,
    tol: f64,
) -> Vec<String> {
    let mut out: Vec<String> = check_investment(&inv.capacity, &inv.costs, inv.budget, tol)
        .into_iter()
        .map(|v| v.to_string())
        .collect();
    for (k, (sc, d)) in set.scenarios().iter().zip(&inv.dispatch).enumerate() {
        out.extend(
            check_dispatch(spec, &inv.capacity, sc, d, tol, 1e-9)
                .into_iter()
                .map(|v| format!("scenario {k}: {v}")),
        );
    }
    out
}

/// Writes one row per scenario and hour with the schedule and prices.
pub fn write_dispatch_csv<W: Write>(dispatch: &[DispatchSolution<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let users = dispatch.first().map_or(0, |d| d.loads.len());
    let mut header: Vec<String> = [
        "scenario", "hour", "supply", "renewable", "grid", "charge", "discharge", "soc", "price",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..users).map(|i| format!("load_{i}")));
    w.write_record(&header)?;
    for (k, d) in dispatch.iter().enumerate() {
        for t in 0..d.supply.len() {
            let mut row = vec![
                k.to_string(),
                t.to_string(),
                d.supply[t].to_string(),
                d.renewable[t].to_string(),
                d.grid[t].to_string(),
                d.charge[t].to_string(),
                d.discharge[t].to_string(),
                d.soc[t].to_string(),
                d.prices[t].to_string(),
            ];
            row.extend(d.loads.iter().map(|l| l[t].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs every stage in order and writes the bundle into `cfg.output_dir`.
/// Outputs of finished stages stay on disk when a later stage fails.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::from(e).in_stage("output"))?;

    let (solar, wind) = load_series(cfg).map_err(|e| e.in_stage("ingest"))?;
    let profiles = (|| -> Result<_> {
        let s = all_profiles(&solar, &cfg.turbine)?;
        let w = all_profiles(&wind, &cfg.turbine)?;
        let flat = |p: &[crate::renewables::RenewableProfile<f64>]| -> Vec<f64> {
            p.iter().flat_map(|d| d.values().iter().copied()).collect()
        };
        let rho = correlation(&flat(&s), &flat(&w))?;
        Ok((s, w, rho))
    })();
    let (solar_days, wind_days, rho) = profiles.map_err(|e| e.in_stage("profiles"))?;
    info!("{} days of profiles, solar/wind correlation {rho:.3}", solar_days.len());

    let reduction = (|| -> Result<_> {
        let full = build_scenarios(&solar_days, &wind_days)?;
        let keep = cfg.keep.min(full.len());
        let r = reduce_with(&full, keep, &cfg.metric)?;
        write_file(dir, "scenarios.json", |w| Ok(w.write_all(r.set.to_json()?.as_bytes())?))?;
        Ok(r)
    })()
    .map_err(|e| e.in_stage("scenarios"))?;
    let set = &reduction.set;

    let spec = &cfg.spec;
    let budget = cfg.budget_value();
    let investment = (|| -> Result<_> {
        let inv = solve_ep1(spec, set, &cfg.costs, budget, &cfg.solver)?;
        write_file(dir, "investment.json", |w| Ok(serde_json::to_writer_pretty(&mut *w, &inv)?))?;
        write_file(dir, "dispatch.csv", |w| write_dispatch_csv(&inv.dispatch, w))?;
        Ok(inv)
    })()
    .map_err(|e| e.in_stage("invest"))?;

    let baseline = (|| -> Result<_> {
        let inv = solve_ep1_without_demand_response(spec, set, &cfg.costs, budget, &cfg.solver)?;
        write_file(dir, "investment_no_dr.json", |w| Ok(serde_json::to_writer_pretty(&mut *w, &inv)?))?;
        Ok(inv)
    })()
    .map_err(|e| e.in_stage("baseline"))?;

    let sweep = (|| -> Result<_> {
        let pts = budget_sweep(spec, set, &cfg.costs, &cfg.budget_sweep, DemandResponse::Enabled, &cfg.solver)?;
        write_file(dir, "budget_sweep.csv", |w| write_budget_sweep_csv(&pts, w))?;
        Ok(pts)
    })()
    .map_err(|e| e.in_stage("budget-sweep"))?;

    let robust = (|| -> Result<_> {
        let pts = error_sweep(spec, set, &cfg.costs, budget, &cfg.error_pcts, &cfg.solver)?;
        write_file(dir, "error_sweep.csv", |w| write_error_sweep_csv(&pts, w))?;
        Ok(pts)
    })()
    .map_err(|e| e.in_stage("robust"))?;

    let mut violations = audit_investment(spec, set, &investment, 1e-6);
    violations.extend(
        audit_investment(spec, set, &baseline, 1e-6)
            .into_iter()
            .map(|v| format!("without demand response: {v}")),
    );

    let bundle = ReportBundle {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        correlation: rho,
        days: solar_days.len(),
        scenarios: set.clone(),
        kept: reduction.kept.clone(),
        reduction_distance: reduction.distance,
        investment,
        without_demand_response: baseline,
        budget_sweep: sweep,
        error_sweep: robust,
        violations,
    };
    write_file(dir, "report.json", |w| Ok(w.write_all(bundle.to_json()?.as_bytes())?))
        .map_err(|e| e.in_stage("report"))?;
    Ok(bundle)
}

/// Human-readable summary of a bundle.
pub fn summarize(bundle: &ReportBundle) -> String {
    let inv = &bundle.investment;
    let base = &bundle.without_demand_response;
    let mut s = String::new();
    let mut line = |l: String| {
        s.push_str(&l);
        s.push('\n');
    };
    line(format!("schema version      {}", bundle.schema_version));
    line(format!("days of data        {}", bundle.days));
    line(format!("solar/wind corr.    {:.4}", bundle.correlation));
    line(format!(
        "scenarios kept      {} (distance {:.4})",
        bundle.scenarios.len(),
        bundle.reduction_distance
    ));
    line(format!(
        "capacity            solar {:.2} kW, wind {:.2} kW, storage {:.2} kWh",
        inv.capacity.solar, inv.capacity.wind, inv.capacity.storage
    ));
    line(format!("investment expense  {:.0} HKD", inv.capital_cost));
    line(format!("daily operation     {:.2} HKD", inv.expected_operating_cost));
    line(format!("overall cost        {:.0} HKD", inv.overall_cost));
    line(format!(
        "without response    {:.0} HKD overall, {:.0} HKD invested",
        base.overall_cost, base.capital_cost
    ));
    for p in &bundle.error_sweep {
        line(format!(
            "error {:>5.1}%        {:.0} HKD invested, {:.0} HKD overall",
            p.pct, p.investment_expense, p.overall_cost
        ));
    }
    line(format!("violations          {}", bundle.violations.len()));
    s
}
