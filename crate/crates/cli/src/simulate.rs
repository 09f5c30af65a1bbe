use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use mwdp::io::{write_jsonl, OutcomeRecord};
use mwdp::metrics::MetricReport;
use mwdp::simulation::{
    answer_with_dependencies, expected_eps_predictors, generate_votes, run_experiment, Correlation, EpsPredictors,
    ExperimentResult, LabeledQuery, SimulationConfig,
};
use mwdp::{DpGuarantee, MechanismConfig, MechanismKind, OrderGrid, PrivacyBudget};
use serde::Serialize;

use crate::manifest::{ensure_dir, RunManifest};
use crate::{BudgetArgs, BudgetRecord, MechanismFlag, NoiseArgs, OutputArgs, EXIT_OK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 50 teachers, 11 labels, fair-coin votes, sigma 7, epsilon 20, delta 1e-6.
    RegimeA,
    /// As regime-a but every vote is 0 and epsilon is 2.
    RegimeB,
}

struct PresetValues {
    teachers: usize,
    labels: usize,
    p: f64,
    queries: usize,
    sigma: f64,
    epsilon: f64,
    delta: f64,
}

impl Preset {
    fn values(self) -> PresetValues {
        match self {
            Preset::RegimeA => {
                PresetValues { teachers: 50, labels: 11, p: 0.5, queries: 400, sigma: 7.0, epsilon: 20.0, delta: 1e-6 }
            }
            Preset::RegimeB => {
                PresetValues { teachers: 50, labels: 11, p: 0.0, queries: 1000, sigma: 7.0, epsilon: 2.0, delta: 1e-6 }
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Repeat to compare mechanisms. Defaults to binary and powerset with a
    /// preset, binary otherwise.
    #[arg(long, value_enum)]
    pub mechanism: Vec<MechanismFlag>,
    #[arg(long)]
    pub teachers: Option<usize>,
    #[arg(long)]
    pub labels: Option<usize>,
    /// Probability of a positive vote, shared by every label.
    #[arg(long)]
    pub probability: Option<f64>,
    /// Per-label probabilities, comma separated. Overrides --probability.
    #[arg(long)]
    pub probabilities: Option<String>,
    /// Labels 1..d copy label 0.
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long)]
    pub queries: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Also run every mechanism at epsilon = 1..=20 and write sweep.csv.
    #[arg(long)]
    pub epsilon_sweep: bool,
    /// Also run the dependency planner with this pivot label.
    #[arg(long)]
    pub pivot: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct SimulateConfig<'a> {
    simulation: &'a SimulationConfig,
    mechanisms: &'a [MechanismConfig],
    budget: Option<BudgetRecord>,
    delta: f64,
    epsilon_sweep: bool,
    pivot: Option<usize>,
}

#[derive(Serialize)]
struct RunSummary {
    mechanism: MechanismConfig,
    planner: bool,
    answered: usize,
    charged: usize,
    exhausted: bool,
    final_guarantee: DpGuarantee,
    metrics: Option<MetricReport>,
}

impl RunSummary {
    fn new(mechanism: MechanismConfig, planner: bool, r: &ExperimentResult) -> Self {
        RunSummary {
            mechanism,
            planner,
            answered: r.answered,
            charged: r.records.len(),
            exhausted: r.exhausted,
            final_guarantee: r.final_guarantee,
            metrics: r.metrics.clone(),
        }
    }
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    simulation: &'a SimulationConfig,
    predictors: Option<EpsPredictors>,
    runs: Vec<RunSummary>,
}

fn simulation_config(args: &SimulateArgs, preset: Option<&PresetValues>) -> Result<SimulationConfig> {
    let labels = args.labels.or(preset.map(|p| p.labels)).context("--labels is required")?;
    let probabilities = match &args.probabilities {
        Some(list) => list
            .split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad probability {t:?}")))
            .collect::<Result<Vec<_>>>()?,
        None => vec![args.probability.or(preset.map(|p| p.p)).context("--probability is required")?; labels],
    };
    let cfg = SimulationConfig {
        teachers: args.teachers.or(preset.map(|p| p.teachers)).context("--teachers is required")?,
        labels,
        probabilities,
        correlation: args.block.map_or(Correlation::Independent, Correlation::Block),
        queries: args.queries.or(preset.map(|p| p.queries)).context("--queries is required")?,
        seed: args.output.seed,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn predictors(sim: &SimulationConfig, mechanisms: &[MechanismConfig]) -> Option<EpsPredictors> {
    let p = sim.probabilities[0];
    let uniform = sim.probabilities.iter().all(|&x| x == p) && p > 0.0 && p < 1.0;
    let sigma = mechanisms.first()?.sigma_g;
    if !uniform || sigma == 0.0 {
        return None;
    }
    expected_eps_predictors(p, sim.teachers as u64, sim.labels, sigma, sim.correlation).ok()
}

fn records_jsonl(r: &ExperimentResult) -> Result<Vec<u8>> {
    let lines: Vec<OutcomeRecord> =
        r.records.iter().map(|q| OutcomeRecord::new(q.query_id, &q.outcome, q.eps_dp_so_far)).collect();
    let mut out = Vec::new();
    write_jsonl(&mut out, &lines)?;
    Ok(out)
}

fn sweep_csv(
    stream: &[LabeledQuery],
    mechanisms: &[MechanismConfig],
    delta: f64,
    grid: &OrderGrid,
    seed: u64,
) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epsilon".to_owned()];
    header.extend(mechanisms.iter().map(|m| m.kind.to_string()));
    wtr.write_record(&header)?;
    for eps in 1..=20u32 {
        let budget = PrivacyBudget::new(f64::from(eps), delta)?;
        let mut row = vec![eps.to_string()];
        for m in mechanisms {
            row.push(run_experiment(stream, m, budget, grid, seed)?.answered.to_string());
        }
        wtr.write_record(&row)?;
    }
    Ok(wtr.into_inner().map_err(|e| e.into_error())?)
}

pub fn run(args: &SimulateArgs) -> Result<i32> {
    let preset = args.preset.map(Preset::values);
    let sim = simulation_config(args, preset.as_ref())?;
    let flags = if !args.mechanism.is_empty() {
        args.mechanism.clone()
    } else if preset.is_some() {
        vec![MechanismFlag::Binary, MechanismFlag::Powerset]
    } else {
        vec![MechanismFlag::Binary]
    };
    let mechanisms = flags
        .iter()
        .map(|&f| args.noise.config(f.into(), preset.as_ref().map(|p| p.sigma)))
        .collect::<Result<Vec<_>>>()?;
    if mechanisms.iter().any(MechanismConfig::oracle_mode) {
        bail!("simulate needs a finite privacy cost; oracle mode is only available in aggregate");
    }
    let grid = args.budget.grid()?;
    let delta = args.budget.delta(preset.as_ref().map(|p| p.delta))?;
    // a budget is optional when only sweeping
    let budget = match args.budget.budget(preset.as_ref().map(|p| (p.epsilon, p.delta))) {
        Ok(b) => Some(b),
        Err(_) if args.epsilon_sweep && args.budget.epsilon.is_none() => None,
        Err(e) => return Err(e),
    };
    if budget.is_none() && args.pivot.is_some() {
        bail!("--pivot needs --epsilon");
    }
    if let Some(pivot) = args.pivot {
        if pivot >= sim.labels {
            bail!("--pivot {pivot} out of range for {} labels", sim.labels);
        }
    }

    let out_dir = &args.output.out_dir;
    ensure_dir(out_dir)?;
    let seed = args.output.seed;
    let mut manifest = RunManifest::new(
        "simulate",
        SimulateConfig {
            simulation: &sim,
            mechanisms: &mechanisms,
            budget: budget.map(|b| BudgetRecord { epsilon: b.epsilon, delta: b.delta, orders: grid.orders().to_vec() }),
            delta,
            epsilon_sweep: args.epsilon_sweep,
            pivot: args.pivot,
        },
        seed,
    )?;

    let stream = generate_votes(&sim)?;
    let mut runs = Vec::new();
    if let Some(budget) = budget {
        for m in &mechanisms {
            let r = run_experiment(&stream, m, budget, &grid, seed)?;
            manifest.output(out_dir, &format!("outcomes-{}.jsonl", m.kind), &records_jsonl(&r)?)?;
            runs.push(RunSummary::new(*m, false, &r));
            if let (Some(pivot), false) = (args.pivot, m.kind == MechanismKind::Powerset) {
                let r = answer_with_dependencies(&stream, m, budget, &grid, seed, pivot)?;
                manifest.output(out_dir, &format!("outcomes-{}-planner.jsonl", m.kind), &records_jsonl(&r)?)?;
                runs.push(RunSummary::new(*m, true, &r));
            }
        }
    }
    if args.epsilon_sweep {
        manifest.output(out_dir, "sweep.csv", &sweep_csv(&stream, &mechanisms, delta, &grid, seed)?)?;
    }

    let report = SimulationReport { simulation: &sim, predictors: predictors(&sim, &mechanisms), runs };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    manifest.output(out_dir, "result.json", text.as_bytes())?;
    manifest.finish(out_dir)?;
    Ok(EXIT_OK)
}
