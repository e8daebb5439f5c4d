use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use log::info;
use microgrid_core::config::RunConfig;
use microgrid_core::dispatch::{
    run_decentralized, solve_central, solve_without_demand_response, write_trace_csv,
};
use microgrid_core::pipeline::{run_pipeline, summarize, ReportBundle};
use microgrid_core::portfolio::{budget_sweep, solve_investment, write_budget_sweep_csv, DemandResponse};
use microgrid_core::renewables::{all_profiles, read_profiles_csv, write_profiles_csv, SeriesKind};
use microgrid_core::robust::{error_sweep, solve_rp1, write_error_sweep_csv};
use microgrid_core::scenarios::{build_scenarios, reduce_with};
use microgrid_core::{
    Capacity, Error, MeteoSeries, MicrogridSpec, Result, Scenario, ScenarioSet, UncertaintySet, UnitCosts,
};
use serde_json::Value;

use crate::{Cli, Command, DispatchArgs, DispatchMode, IngestArgs, InvestArgs, ReportArgs, RobustArgs, ScenariosCommand, SeriesType};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Scenarios(c) => scenarios(&cfg, c),
        Command::Dispatch(a) => dispatch(&cfg, a),
        Command::Invest(a) => invest(&cfg, a),
        Command::RobustInvest(a) => robust_invest(&cfg, a),
        Command::Report(a) => report(cfg, a),
    }
}

/// Writes to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            info!("wrote {}", p.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    emit(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn load_spec(cfg: &RunConfig, path: Option<&Path>) -> Result<MicrogridSpec> {
    let spec: MicrogridSpec = match path {
        Some(p) => read_json(p)?,
        None => cfg.spec.clone(),
    };
    spec.validate()?;
    Ok(spec)
}

fn load_costs(cfg: &RunConfig, path: Option<&Path>) -> Result<UnitCosts> {
    let costs: UnitCosts = match path {
        Some(p) => read_json(p)?,
        None => cfg.costs.clone(),
    };
    costs.validate()?;
    Ok(costs)
}

fn load_set(path: &Path) -> Result<ScenarioSet> {
    ScenarioSet::from_json(&fs::read_to_string(path)?)
}

fn budget(cfg: &RunConfig, arg: Option<f64>) -> Result<f64> {
    let b = arg.unwrap_or_else(|| cfg.budget_value());
    if !(b >= 0.0) {
        return Err(Error::Infeasible {
            constraint: "budget",
            detail: format!("budget {b} is negative"),
        });
    }
    Ok(b)
}

fn ingest(cfg: &RunConfig, a: IngestArgs) -> Result<()> {
    let kind = match a.kind {
        SeriesType::Solar => SeriesKind::Solar,
        SeriesType::Wind => SeriesKind::Wind,
    };
    let station = microgrid_core::pipeline::station_name(&a.input);
    let series: MeteoSeries = MeteoSeries::from_csv(File::open(&a.input)?, station, kind)?;
    let profiles = all_profiles(&series, &cfg.turbine)?;
    info!("{} days from {}", profiles.len(), a.input.display());
    emit(a.output.as_deref(), |w| write_profiles_csv(&profiles, w))
}

fn scenarios(cfg: &RunConfig, c: ScenariosCommand) -> Result<()> {
    match c {
        ScenariosCommand::Build { solar, wind, output } => {
            let s = read_profiles_csv(File::open(&solar)?)?;
            let w = read_profiles_csv(File::open(&wind)?)?;
            let set: ScenarioSet = build_scenarios(&s, &w)?;
            emit(output.as_deref(), |out| Ok(writeln!(out, "{}", set.to_json()?)?))
        }
        ScenariosCommand::Reduce { input, keep, output } => {
            let set = load_set(&input)?;
            let r = reduce_with(&set, keep, &cfg.metric)?;
            info!("kept scenarios {:?}, distance {:.6}", r.kept, r.distance);
            emit(output.as_deref(), |out| Ok(writeln!(out, "{}", r.set.to_json()?)?))
        }
    }
}

/// Accepts a scenario object or a scenario set.
fn load_scenario(path: &Path, index: usize) -> Result<Scenario> {
    let value: Value = read_json(path)?;
    if value.get("scenarios").is_some() {
        let set = ScenarioSet::from_json(&value.to_string())?;
        return set.scenarios().get(index).cloned().ok_or_else(|| {
            Error::Invalid(format!("scenario index {index} out of range (set has {})", set.len()))
        });
    }
    let sc: Scenario = serde_json::from_value(value)?;
    sc.validate()?;
    Ok(sc)
}

fn load_capacity(a: &DispatchArgs) -> Result<Capacity> {
    let mut cap = match &a.capacity {
        Some(p) => {
            let value: Value = read_json(p)?;
            let inner = value.get("capacity").cloned().unwrap_or(value);
            serde_json::from_value(inner)?
        }
        None => Capacity::zero(),
    };
    if let Some(v) = a.solar_kw {
        cap.solar = v;
    }
    if let Some(v) = a.wind_kw {
        cap.wind = v;
    }
    if let Some(v) = a.storage_kwh {
        cap.storage = v;
    }
    cap.validate()?;
    Ok(cap)
}

fn dispatch(cfg: &RunConfig, a: DispatchArgs) -> Result<()> {
    let spec = load_spec(cfg, a.spec.as_deref())?;
    let scenario = load_scenario(&a.scenario, a.index)?;
    let cap = load_capacity(&a)?;
    let solution = match (a.mode, a.no_demand_response) {
        (_, true) => solve_without_demand_response(&spec, &cap, &scenario, &cfg.solver)?,
        (DispatchMode::Central, false) => solve_central(&spec, &cap, &scenario, &cfg.solver)?,
        (DispatchMode::Decentralized, false) => {
            let run = run_decentralized(&spec, &cap, &scenario, &cfg.solver)?;
            emit(Some(&a.trace), |w| write_trace_csv(&run.trace, w))?;
            run.solution
        }
    };
    emit_json(a.output.as_deref(), &solution)?;
    if !solution.converged {
        return Err(Error::NotConverged {
            iterations: solution.iterations,
            detail: "price iteration stopped at the iteration limit; best iterate written".into(),
        });
    }
    Ok(())
}

fn invest(cfg: &RunConfig, a: InvestArgs) -> Result<()> {
    let spec = load_spec(cfg, a.spec.as_deref())?;
    let costs = load_costs(cfg, a.costs.as_deref())?;
    let set = load_set(&a.scenarios)?;
    let b = budget(cfg, a.budget)?;
    let mode = if a.no_demand_response {
        DemandResponse::Disabled
    } else {
        DemandResponse::Enabled
    };
    let inv = solve_investment(&spec, &set, &costs, b, mode, &cfg.solver)?;
    emit_json(a.output.as_deref(), &inv)?;
    if !a.no_sweep {
        let budgets = a.sweep.unwrap_or_else(|| cfg.budget_sweep.clone());
        let pts = budget_sweep(&spec, &set, &costs, &budgets, mode, &cfg.solver)?;
        emit(Some(&a.sweep_csv), |w| write_budget_sweep_csv(&pts, w))?;
    }
    Ok(())
}

fn robust_invest(cfg: &RunConfig, a: RobustArgs) -> Result<()> {
    if !(a.error_pct >= 0.0) || !a.error_pct.is_finite() {
        return Err(Error::Invalid(format!("error percentage {} must be finite and non-negative", a.error_pct)));
    }
    let spec = load_spec(cfg, a.spec.as_deref())?;
    let costs = load_costs(cfg, a.costs.as_deref())?;
    let set = load_set(&a.scenarios)?;
    let b = budget(cfg, a.budget)?;
    let uncertainty: UncertaintySet = UncertaintySet::relative(&set, a.error_pct / 100.0)?;
    let inv = solve_rp1(&spec, &set, &uncertainty, &costs, b, &cfg.solver)?;
    emit_json(a.output.as_deref(), &inv)?;
    if !a.no_sweep {
        let pcts = a.sweep.unwrap_or_else(|| cfg.error_pcts.clone());
        let pts = error_sweep(&spec, &set, &costs, b, &pcts, &cfg.solver)?;
        emit(Some(&a.sweep_csv), |w| write_error_sweep_csv(&pts, w))?;
    }
    Ok(())
}

fn report(mut cfg: RunConfig, a: ReportArgs) -> Result<()> {
    let bundle = match a.from {
        Some(p) => ReportBundle::load(&p)?,
        None => {
            if let Some(dir) = a.out {
                cfg.output_dir = dir;
            }
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            let bundle = run_pipeline(&cfg)?;
            info!("report written to {}", cfg.output_dir.join("report.json").display());
            bundle
        }
    };
    print!("{}", summarize(&bundle));
    if !bundle.violations.is_empty() {
        for v in &bundle.violations {
            eprintln!("violation: {v}");
        }
        return Err(Error::Invalid(format!("{} constraint violations in the report", bundle.violations.len())));
    }
    Ok(())
}
