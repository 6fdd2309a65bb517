use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pdm_core::analysis::{self, SweepSetup};
use pdm_core::econ::{self, affine_coefficients, AffineCost, CostLine};
use pdm_core::forest::{ForestModel, ForestParams};
use pdm_core::io;
use pdm_core::metrics::{self, ConfusionCounts};
use pdm_core::simfleet::{self, DeviceProfile, EventLog, SimConfig};
use pdm_core::tuner::{self, Objective};
use pdm_core::windowing::{self, WindowedDataset};

use crate::config::{usage, RunConfig};
use crate::manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Everything a command needs from the command line besides its own flags.
pub struct RunContext {
    pub config: RunConfig,
    pub config_bytes: Vec<u8>,
    pub out: PathBuf,
    pub format: Format,
}

impl RunContext {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn record(&self, command: &str, inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
        manifest::record(
            &self.out,
            &self.config_bytes,
            self.config.seed,
            self.config.sim.seed,
            command,
            inputs,
            outputs,
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("writing {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("reading {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_fleet(path: &Path) -> Result<Vec<DeviceProfile>> {
    io::read_fleet(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_events(path: &Path) -> Result<Vec<EventLog>> {
    io::read_events(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_dataset(path: &Path) -> Result<WindowedDataset> {
    io::read_dataset(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_model(path: &Path) -> Result<ForestModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ForestModel::from_json(&text).with_context(|| format!("reading {}", path.display()))
}

/// `simulation.json`: the simulator settings actually used, after
/// calibration.
#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub sim: SimConfig,
    pub positive_rate: Option<f64>,
}

pub fn simulate(ctx: &RunContext) -> Result<()> {
    let mut sim = ctx.config.sim.clone();
    let mut positive_rate = None;
    if sim.target_positive_rate.is_some() && sim.n_devices > 0 && sim.n_weeks > 0 {
        sim = simfleet::calibrate_hazard(&sim)?;
        positive_rate = Some(simfleet::pilot_positive_rate(&sim)?);
    }
    let (profiles, logs) = simfleet::generate_fleet(&sim)?;

    let fleet = ctx.path("fleet.csv");
    let events = ctx.path("events.csv");
    let summary = ctx.path("simulation.json");
    io::write_fleet(create(&fleet)?, &profiles)?;
    io::write_events(create(&events)?, &logs)?;
    write_json(&summary, &SimulationSummary { sim: sim.clone(), positive_rate })?;
    ctx.record("simulate", &[], &[&fleet, &events, &summary])?;

    let failures: usize = logs.iter().map(|l| l.failures().count()).sum();
    println!(
        "simulated {} devices over {} weeks: {} failures, hazard range ({:.4}, {:.4})",
        sim.n_devices, sim.n_weeks, failures, sim.hazard_range.0, sim.hazard_range.1
    );
    Ok(())
}

pub fn features(ctx: &RunContext, fleet: Option<&PathBuf>, events: Option<&PathBuf>) -> Result<()> {
    let fleet = fleet.cloned().unwrap_or_else(|| ctx.path("fleet.csv"));
    let events = events.cloned().unwrap_or_else(|| ctx.path("events.csv"));
    let profiles = read_fleet(&fleet)?;
    let logs = read_events(&events)?;
    let w = &ctx.config.window;
    let spec = w.spec()?;
    let train = windowing::training_dataset(&logs, &profiles, &spec, w.horizon_hours())?;
    let test = windowing::test_dataset(&logs, &profiles, &spec, w.horizon_hours())?;

    let train_path = ctx.path("dataset.csv");
    let test_path = ctx.path("test_dataset.csv");
    io::write_dataset(create(&train_path)?, &train)?;
    io::write_dataset(create(&test_path)?, &test)?;
    ctx.record("features", &[&fleet, &events], &[&train_path, &test_path])?;
    println!(
        "training rows {} (P={}, N={}), test rows {} (P={}, N={})",
        train.len(),
        train.positives(),
        train.negatives(),
        test.len(),
        test.positives(),
        test.negatives()
    );
    Ok(())
}

/// `tuning.json`: the selected cell and the coefficients it was scored with.
#[derive(Debug, Serialize, Deserialize)]
pub struct TuningSummary {
    pub objective: Objective,
    pub objective_value: f64,
    pub cutoff: f64,
    pub params: ForestParams,
    pub counts: ConfusionCounts,
    pub f1: f64,
    pub savings: f64,
    pub coefficients: AffineCost,
    pub cells: usize,
}

fn cost_coefficients(config: &RunConfig) -> AffineCost {
    affine_coefficients(&config.cost, config.window.gap_hours(), config.window.prediction_hours())
}

pub fn tune(ctx: &RunContext, dataset: Option<&PathBuf>, objective: Option<Objective>) -> Result<()> {
    let data_path = dataset.cloned().unwrap_or_else(|| ctx.path("dataset.csv"));
    let train = read_dataset(&data_path)?;
    let objective = objective.unwrap_or(ctx.config.objective);
    let grid = tuner::expand_grid(
        train.schema.len(),
        train.positives(),
        train.negatives(),
        &ctx.config.grid,
        objective,
    )?;
    let ac = cost_coefficients(&ctx.config);
    let result = tuner::tune(&train, &grid, &ac, ctx.config.seed)?;
    let model = result.fit_best(&train)?;
    let best = result.best();

    let model_path = ctx.path("model.json");
    let trace_path = ctx.path("tune_trace.csv");
    let summary_path = ctx.path("tuning.json");
    fs::write(&model_path, model.to_json()?).with_context(|| format!("writing {}", model_path.display()))?;
    io::write_trace(create(&trace_path)?, &result.trace)?;
    let summary = TuningSummary {
        objective,
        objective_value: result.objective_value,
        cutoff: result.best_cutoff,
        params: result.best_params,
        counts: best.counts,
        f1: best.f1,
        savings: best.savings,
        coefficients: ac,
        cells: grid.cells(),
    };
    write_json(&summary_path, &summary)?;
    ctx.record(
        &format!("tune.{objective}"),
        &[&data_path],
        &[&model_path, &trace_path, &summary_path],
    )?;
    println!(
        "best by {objective}: ntree={} mtry={} samp={} cutoff={:.2} f1={:.4} savings={}",
        summary.params.ntree, summary.params.mtry, summary.params.samp, summary.cutoff, summary.f1, summary.savings
    );
    Ok(())
}

fn tuned_cutoff(ctx: &RunContext, flag: Option<f64>) -> Result<f64> {
    if let Some(c) = flag {
        if !(0.0..=1.0).contains(&c) {
            return Err(usage(format!("--cutoff must lie in [0, 1], got {c}")));
        }
        return Ok(c);
    }
    let path = ctx.path("tuning.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading {} (run `tune` first or pass --cutoff)", path.display()))?;
    let summary: TuningSummary =
        serde_json::from_str(&text).with_context(|| format!("reading {}", path.display()))?;
    Ok(summary.cutoff)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Report {
    pub rows: usize,
    pub cutoff: f64,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub coefficients: AffineCost,
    pub savings: f64,
    pub reactive_cost: f64,
    pub pdm_cost: f64,
    pub cost_pct: f64,
    pub costs: Vec<CostLine>,
}

fn render_report(r: &Report) -> String {
    let c = &r.counts;
    let mut s = String::new();
    let _ = writeln!(s, "rows              {}", r.rows);
    let _ = writeln!(s, "cutoff            {}", r.cutoff);
    let _ = writeln!(s, "TP {}  FP {}  TN {}  FN {}", c.tp, c.fp, c.tn, c.fn_);
    let _ = writeln!(s, "precision         {:.4}", r.precision);
    let _ = writeln!(s, "recall            {:.4}", r.recall);
    let _ = writeln!(s, "F1                {:.4}", r.f1);
    match r.auc {
        Some(a) => {
            let _ = writeln!(s, "AUC               {a:.4}");
        }
        None => {
            let _ = writeln!(s, "AUC               n/a (single class)");
        }
    }
    let _ = writeln!(
        s,
        "S = {} TP - {} FP = {:.2}",
        r.coefficients.a, r.coefficients.b, r.savings
    );
    let _ = writeln!(s, "reactive cost     {:.2}", r.reactive_cost);
    let _ = writeln!(s, "predictive cost   {:.2}", r.pdm_cost);
    let _ = writeln!(s, "cost pct          {:.2}%", r.cost_pct);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<22}{:>14}{:>14}{:>14}", "component", "current", "future", "delta");
    for l in &r.costs {
        let _ = writeln!(s, "{:<22}{:>14.2}{:>14.2}{:>14.2}", l.component, l.current, l.future, l.delta);
    }
    s
}

pub fn evaluate(
    ctx: &RunContext,
    model: Option<&PathBuf>,
    dataset: Option<&PathBuf>,
    cutoff: Option<f64>,
) -> Result<()> {
    let model_path = model.cloned().unwrap_or_else(|| ctx.path("model.json"));
    let data_path = dataset.cloned().unwrap_or_else(|| ctx.path("test_dataset.csv"));
    let model = read_model(&model_path)?;
    let ds = read_dataset(&data_path)?;
    let cutoff = tuned_cutoff(ctx, cutoff)?;

    let labels = ds.labels();
    let scores = model.score_dataset(&ds)?;
    let counts = metrics::confusion_at(&scores, &labels, cutoff)?;
    let cm = &ctx.config.cost;
    let (gap, pred) = (ctx.config.window.gap_hours(), ctx.config.window.prediction_hours());
    let ac = affine_coefficients(cm, gap, pred);
    let reactive = econ::reactive_cost(counts.p(), cm);
    let pdm = econ::pdm_cost(&counts, cm, gap, pred);
    let report = Report {
        rows: ds.len(),
        cutoff,
        counts,
        precision: metrics::precision(&counts).value,
        recall: metrics::recall(&counts).value,
        f1: metrics::f1(&counts).value,
        auc: metrics::roc(&scores, &labels).ok().map(|r| r.auc),
        coefficients: ac,
        savings: econ::savings(&counts, &ac),
        reactive_cost: reactive,
        pdm_cost: pdm,
        cost_pct: econ::cost_pct(pdm, reactive),
        costs: econ::itemize(&counts, cm, gap, pred),
    };

    let costs_path = ctx.path("costs.csv");
    io::write_costs(create(&costs_path)?, &report.costs)?;
    let report_path = match ctx.format {
        Format::Csv => {
            let p = ctx.path("report.txt");
            fs::write(&p, render_report(&report)).with_context(|| format!("writing {}", p.display()))?;
            p
        }
        Format::Json => {
            let p = ctx.path("report.json");
            write_json(&p, &report)?;
            p
        }
    };
    ctx.record("evaluate", &[&model_path, &data_path], &[&report_path, &costs_path])?;
    print!("{}", render_report(&report));
    Ok(())
}

#[derive(Debug, Serialize)]
struct BoundsJson {
    line: String,
    savings: f64,
    slope: f64,
    intercept: f64,
    points: Vec<(f64, f64)>,
}

pub fn roc(
    ctx: &RunContext,
    model: Option<&PathBuf>,
    dataset: Option<&PathBuf>,
    cutoff: Option<f64>,
    samples: usize,
) -> Result<()> {
    let model_path = model.cloned().unwrap_or_else(|| ctx.path("model.json"));
    let data_path = dataset.cloned().unwrap_or_else(|| ctx.path("test_dataset.csv"));
    let model = read_model(&model_path)?;
    let ds = read_dataset(&data_path)?;
    let labels = ds.labels();
    let scores = model.score_dataset(&ds)?;
    let curve = metrics::roc(&scores, &labels)?;
    let ac = cost_coefficients(&ctx.config);
    let (p, n) = (ds.positives() as u64, ds.negatives() as u64);

    // The break-even line, plus the line through the tuned operating point.
    let mut lines = vec![("break_even".to_string(), tuner::iso_savings_line(0.0, &ac, p, n)?)];
    let cutoff = match cutoff {
        Some(c) => Some(c),
        None => tuned_cutoff(ctx, None).ok(),
    };
    if let Some(c) = cutoff {
        let counts = metrics::confusion_at(&scores, &labels, c)?;
        let s = econ::savings(&counts, &ac);
        lines.push((format!("cutoff_{c}"), tuner::iso_savings_line(s, &ac, p, n)?));
    }

    let (roc_path, bounds_path) = match ctx.format {
        Format::Csv => {
            let roc_path = ctx.path("roc.csv");
            let bounds_path = ctx.path("bounds.csv");
            io::write_roc(create(&roc_path)?, &curve)?;
            let named: Vec<(&str, tuner::IsoLine)> = lines.iter().map(|(k, l)| (k.as_str(), *l)).collect();
            io::write_bounds(create(&bounds_path)?, &named, samples)?;
            (roc_path, bounds_path)
        }
        Format::Json => {
            let roc_path = ctx.path("roc.json");
            let bounds_path = ctx.path("bounds.json");
            write_json(&roc_path, &curve)?;
            let bounds: Vec<BoundsJson> = lines
                .iter()
                .map(|(name, l)| BoundsJson {
                    line: name.clone(),
                    savings: l.savings,
                    slope: l.slope,
                    intercept: l.intercept,
                    points: l.points(samples),
                })
                .collect();
            write_json(&bounds_path, &bounds)?;
            (roc_path, bounds_path)
        }
    };
    ctx.record("roc", &[&model_path, &data_path], &[&roc_path, &bounds_path])?;
    println!("AUC {:.4} over {} points", curve.auc, curve.points.len());
    Ok(())
}

pub struct SurfaceArgs {
    pub p: Option<u64>,
    pub n: Option<u64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub dataset: Option<PathBuf>,
}

pub fn surface(ctx: &RunContext, args: &SurfaceArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let (p, n) = match (args.p, args.n) {
        (Some(p), Some(n)) => (p, n),
        (None, None) => {
            let path = args.dataset.clone().unwrap_or_else(|| ctx.path("test_dataset.csv"));
            let ds = read_dataset(&path)?;
            inputs.push(path);
            (ds.positives() as u64, ds.negatives() as u64)
        }
        _ => return Err(usage("--p and --n must be given together")),
    };
    let mut ac = cost_coefficients(&ctx.config);
    if let Some(a) = args.a {
        ac.a = a;
    }
    if let Some(b) = args.b {
        ac.b = b;
    }
    let strides = (ctx.config.surface.tp_stride, ctx.config.surface.fp_stride);
    let grid = analysis::surface(p, n, strides, &ac)?;
    let path = match ctx.format {
        Format::Csv => {
            let path = ctx.path("surface.csv");
            io::write_surface(create(&path)?, &grid)?;
            path
        }
        Format::Json => {
            let path = ctx.path("surface.json");
            write_json(&path, &grid)?;
            path
        }
    };
    let inputs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    ctx.record("surface", &inputs, &[&path])?;
    let best = grid.max_savings();
    println!(
        "{}x{} cells, max savings {} at TP={} FP={}",
        grid.tp_levels.len(),
        grid.fp_levels.len(),
        best.s,
        best.tp,
        best.fp
    );
    Ok(())
}

pub fn sweep(ctx: &RunContext) -> Result<()> {
    let fleet = ctx.path("fleet.csv");
    let events = ctx.path("events.csv");
    let profiles = read_fleet(&fleet)?;
    let logs = read_events(&events)?;
    let c = &ctx.config;
    let horizon_days = c.sweep.horizon_days.unwrap_or(c.window.horizon_days);
    let setup = SweepSetup {
        logs: &logs,
        profiles: &profiles,
        observation_days: c.window.observation_days,
        step_days: c.window.step_days,
        k_periods: c.window.k_periods,
        horizon: horizon_days * pdm_core::HOURS_PER_DAY,
        grid: &c.grid,
        cost: &c.cost,
        seed: c.seed,
    };
    let geometries: Vec<(u64, u64)> = c
        .sweep
        .gap_days
        .iter()
        .flat_map(|&g| c.sweep.prediction_days.iter().map(move |&p| (g, p)))
        .collect();
    let outcomes = analysis::sweep(&setup, &geometries);

    let path = match ctx.format {
        Format::Csv => {
            let path = ctx.path("sweep.csv");
            io::write_sweep(create(&path)?, &outcomes)?;
            path
        }
        Format::Json => {
            let path = ctx.path("sweep.json");
            write_json(&path, &outcomes)?;
            path
        }
    };
    ctx.record("sweep", &[&fleet, &events], &[&path])?;
    let mut failed = 0;
    for o in &outcomes {
        match &o.row {
            Ok(r) => println!(
                "({:>2},{:>2})  F1 {:>7.2}%  S {:>7.2}%  delta {:>6.2}",
                o.gap_days, o.pred_days, r.f1_pct, r.s_pct, r.delta_pct
            ),
            Err(e) => {
                failed += 1;
                eprintln!("({:>2},{:>2})  failed: {e}", o.gap_days, o.pred_days);
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} sweep rows failed", outcomes.len());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Projection {
    weekly: f64,
    weeks: f64,
    scale: f64,
    savings: f64,
}

pub fn project(weekly: f64, weeks: f64, scale: f64, format: Format) -> Result<()> {
    let savings = analysis::project_savings(weekly, weeks, scale).map_err(|e| usage(e.to_string()))?;
    match format {
        Format::Csv => println!("{savings}"),
        Format::Json => println!(
            "{}",
            serde_json::to_string(&Projection {
                weekly,
                weeks,
                scale,
                savings
            })?
        ),
    }
    Ok(())
}
