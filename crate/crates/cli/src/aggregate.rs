use std::fs::{self, File};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use mwdp::io::{read_ballots_csv, write_jsonl, OutcomeRecord};
use mwdp::{aggregate, BudgetLedger, MechanismConfig, NoiseStream};
use serde::Serialize;

use crate::manifest::{ensure_dir, RunManifest};
use crate::{BudgetArgs, BudgetRecord, MechanismFlag, NoiseArgs, OutputArgs, EXIT_EXHAUSTED, EXIT_OK};

#[derive(Args, Debug)]
pub struct AggregateArgs {
    /// Ballot CSV: query_id,teacher_id,l0,...,l{k-1}
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "binary")]
    pub mechanism: MechanismFlag,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Ledger JSON to resume from and update. Defaults to a fresh ledger
    /// written to <out-dir>/ledger.json.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct AggregateConfig<'a> {
    mechanism: &'a MechanismConfig,
    budget: BudgetRecord,
    input: String,
    ledger: Option<String>,
    resumed: bool,
}

pub fn run(args: &AggregateArgs) -> Result<i32> {
    let cfg = args.noise.config(args.mechanism.into(), None)?;
    let budget = args.budget.budget(None)?;
    let grid = args.budget.grid()?;
    let file = read_ballots_csv(File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?)
        .with_context(|| format!("reading {}", args.input.display()))?;

    let resume = args.ledger.as_ref().filter(|p| p.exists());
    let mut ledger = match resume {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let ledger =
                BudgetLedger::from_json(&text).with_context(|| format!("refusing ledger {}", path.display()))?;
            if ledger.budget() != budget || *ledger.grid() != grid {
                bail!("ledger {} was created with a different budget or order grid", path.display());
            }
            ledger
        }
        None => BudgetLedger::new(&grid, budget)?,
    };

    let out_dir = &args.output.out_dir;
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::new(
        "aggregate",
        AggregateConfig {
            mechanism: &cfg,
            budget: BudgetRecord { epsilon: budget.epsilon, delta: budget.delta, orders: grid.orders().to_vec() },
            input: args.input.display().to_string(),
            ledger: args.ledger.as_ref().map(|p| p.display().to_string()),
            resumed: resume.is_some(),
        },
        args.output.seed,
    )?;
    manifest.input(&args.input)?;
    if let Some(path) = resume {
        manifest.input(path)?;
    }

    let mut records = Vec::with_capacity(file.queries.len());
    let mut refused_first = false;
    for (i, q) in file.queries.iter().enumerate() {
        let out = aggregate(&q.ballots, &cfg, &NoiseStream::new(args.output.seed, q.query_id), &grid)?;
        if cfg.oracle_mode() {
            // nothing is charged; the release is not private
            records.push(OutcomeRecord::new(q.query_id, &out, f64::INFINITY));
            continue;
        }
        if ledger.would_exceed(&out.cost)? {
            refused_first = i == 0;
            eprintln!("budget exhausted at query {} ({} of {} answered)", q.query_id, i, file.queries.len());
            break;
        }
        ledger.charge(&out.cost)?;
        records.push(OutcomeRecord::new(q.query_id, &out, ledger.spent().epsilon));
    }

    let mut jsonl = Vec::new();
    write_jsonl(&mut jsonl, &records)?;
    manifest.output(out_dir, "outcomes.jsonl", &jsonl)?;
    let ledger_path = args.ledger.clone().unwrap_or_else(|| out_dir.join("ledger.json"));
    manifest.output_at(&ledger_path, ledger.to_json()?.as_bytes())?;
    manifest.finish(out_dir)?;

    Ok(if refused_first { EXIT_EXHAUSTED } else { EXIT_OK })
}
