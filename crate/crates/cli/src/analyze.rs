use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use mwdp::analysis::{gap_bound_q, select_cost, sensitivity_oracle, Adjacency, GnmaxScale, SearchLimits};
use mwdp::io::read_ballots_csv;
use mwdp::mechanisms::{clip, LabelHistogram};
use mwdp::simulation::{dependency_matrix, empirical_cdf, gap_cdf, DependencyMatrix, DependencyMode};
use mwdp::{BallotMatrix, ClipNorm, MechanismKind, OrderGrid};
use serde::{Deserialize, Serialize};

use crate::manifest::{ensure_dir, RunManifest};
use crate::{NormFlag, OutputArgs, EXIT_OK};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Ballot CSV to summarise.
    #[arg(long)]
    pub ballots: Option<PathBuf>,
    /// JSON file {"histograms": [[count, ...], ...]}.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
    /// Noise std used to score histograms.
    #[arg(long)]
    pub sigma_gnmax: Option<f64>,
    /// Run the exhaustive sensitivity search with this many voters.
    #[arg(long, requires = "sensitivity_candidates")]
    pub sensitivity_voters: Option<usize>,
    #[arg(long, requires = "sensitivity_voters")]
    pub sensitivity_candidates: Option<usize>,
    /// Clip bound for the clipped sensitivity entries.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, value_enum, default_value = "l2")]
    pub clip_norm: NormFlag,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Deserialize)]
struct HistogramFile {
    histograms: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct HistogramRow {
    gap: f64,
    q: Option<f64>,
    data_dependent: Option<bool>,
}

#[derive(Serialize)]
struct SensitivityRow {
    function: &'static str,
    adjacency: Adjacency,
    p: f64,
    value: f64,
    row: usize,
    before: Vec<Vec<u8>>,
    after: Vec<Vec<u8>>,
}

#[derive(Serialize)]
struct AnalyzeConfig<'a> {
    ballots: Option<String>,
    histograms: Option<String>,
    sigma_gnmax: Option<f64>,
    sensitivity: Option<(usize, usize)>,
    tau: Option<f64>,
    clip_norm: &'a str,
}

fn cdf_csv(points: &[(f64, f64)]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["x", "y"])?;
    for (x, y) in points {
        wtr.write_record([x.to_string(), y.to_string()])?;
    }
    Ok(wtr.into_inner().map_err(|e| e.into_error())?)
}

fn matrix_csv(m: &DependencyMatrix, names: &[String]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label".to_owned()];
    header.extend(names.iter().cloned());
    wtr.write_record(&header)?;
    for (name, row) in names.iter().zip(&m.entries) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())));
        wtr.write_record(&rec)?;
    }
    Ok(wtr.into_inner().map_err(|e| e.into_error())?)
}

fn pretty(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn analyze_ballots(path: &Path, manifest: &mut RunManifest, out_dir: &Path) -> Result<()> {
    let file = read_ballots_csv(File::open(path).with_context(|| format!("opening {}", path.display()))?)
        .with_context(|| format!("reading {}", path.display()))?;
    let stream: Vec<BallotMatrix> = file.queries.iter().map(|q| q.ballots.clone()).collect();
    manifest.output(out_dir, "gap_cdf_binary.csv", &cdf_csv(&gap_cdf(&stream, MechanismKind::Binary))?)?;
    manifest.output(out_dir, "gap_cdf_powerset.csv", &cdf_csv(&gap_cdf(&stream, MechanismKind::Powerset))?)?;

    // every ballot row is one observed label vector
    let rows: Vec<Vec<bool>> = stream
        .iter()
        .flat_map(|b| b.rows().map(|r| r.iter().map(|&x| x == 1).collect::<Vec<_>>()).collect::<Vec<_>>())
        .collect();
    if rows.is_empty() {
        return Ok(());
    }
    for (mode, name) in [(DependencyMode::Positive, "positive"), (DependencyMode::Negative, "negative")] {
        let m = dependency_matrix(&rows, mode)?;
        manifest.output(out_dir, &format!("dependency_{name}.csv"), &matrix_csv(&m, &file.label_names)?)?;
    }
    Ok(())
}

fn analyze_histograms(path: &Path, sigma: Option<f64>, manifest: &mut RunManifest, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: HistogramFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let grid = OrderGrid::default();
    let mut rows = Vec::with_capacity(file.histograms.len());
    for (i, h) in file.histograms.iter().enumerate() {
        if h.len() < 2 || h.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            bail!("histogram {i} needs at least two non-negative counts");
        }
        let mut sorted = h.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let gap = sorted[0] - sorted[1];
        let row = match sigma {
            Some(s) => {
                let report = gap_bound_q(h, s)?;
                let sel = select_cost(report.log_q, GnmaxScale::unit_votes(s), &grid)?;
                HistogramRow { gap, q: Some(report.q), data_dependent: Some(!sel.fell_back_everywhere()) }
            }
            None => HistogramRow { gap, q: None, data_dependent: None },
        };
        rows.push(row);
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    manifest.output(out_dir, "gap_cdf_histograms.csv", &cdf_csv(&empirical_cdf(&gaps))?)?;
    manifest.output(out_dir, "histogram_report.json", &pretty(&rows)?)?;
    Ok(())
}

fn stacked(hist: LabelHistogram) -> Vec<f64> {
    hist.negative.into_iter().chain(hist.positive).collect()
}

fn sensitivity_report(n: usize, k: usize, tau: Option<f64>, norm: ClipNorm) -> Result<Vec<SensitivityRow>> {
    let limits = SearchLimits::default();
    let counts = |b: &BallotMatrix| b.positive_counts().into_iter().map(|c| c as f64).collect::<Vec<_>>();
    let unclipped = |b: &BallotMatrix| stacked(LabelHistogram::from_ballots(b));
    let mut rows = Vec::new();
    let mut push = |function, adjacency, p, r: mwdp::analysis::SensitivityReport| {
        rows.push(SensitivityRow {
            function,
            adjacency,
            p,
            value: r.value,
            row: r.row,
            before: r.witness.0.rows().map(<[u8]>::to_vec).collect(),
            after: r.witness.1.rows().map(<[u8]>::to_vec).collect(),
        });
    };
    push(
        "positive_counts",
        Adjacency::Substitute,
        1.0,
        sensitivity_oracle(counts, n, k, 1.0, Adjacency::Substitute, limits)?,
    );
    push(
        "stacked_histogram",
        Adjacency::Substitute,
        2.0,
        sensitivity_oracle(unclipped, n, k, 2.0, Adjacency::Substitute, limits)?,
    );
    if let Some(tau) = tau {
        let clipped =
            |b: &BallotMatrix| stacked(LabelHistogram::from_clipped(&clip(b, tau, norm).expect("tau validated")));
        for adjacency in [Adjacency::Substitute, Adjacency::NullSwap] {
            push(
                "clipped_stacked_histogram",
                adjacency,
                2.0,
                sensitivity_oracle(clipped, n, k, 2.0, adjacency, limits)?,
            );
        }
    }
    Ok(rows)
}

pub fn run(args: &AnalyzeArgs) -> Result<i32> {
    let sensitivity = args.sensitivity_voters.zip(args.sensitivity_candidates);
    if args.ballots.is_none() && args.histograms.is_none() && sensitivity.is_none() {
        bail!("nothing to analyze: pass --ballots, --histograms or --sensitivity-voters/--sensitivity-candidates");
    }
    if let Some(tau) = args.tau {
        if !(tau.is_finite() && tau > 0.0) {
            bail!("--tau {tau} must be finite and > 0");
        }
    }
    if let Some(s) = args.sigma_gnmax {
        if !(s.is_finite() && s > 0.0) {
            bail!("--sigma-gnmax {s} must be finite and > 0 for analysis");
        }
    }
    let out_dir = &args.output.out_dir;
    ensure_dir(out_dir)?;
    let norm: ClipNorm = args.clip_norm.into();
    let mut manifest = RunManifest::new(
        "analyze",
        AnalyzeConfig {
            ballots: args.ballots.as_ref().map(|p| p.display().to_string()),
            histograms: args.histograms.as_ref().map(|p| p.display().to_string()),
            sigma_gnmax: args.sigma_gnmax,
            sensitivity,
            tau: args.tau,
            clip_norm: match norm {
                ClipNorm::L1 => "l1",
                ClipNorm::L2 => "l2",
            },
        },
        args.output.seed,
    )?;

    if let Some(path) = &args.ballots {
        manifest.input(path)?;
        analyze_ballots(path, &mut manifest, out_dir)?;
    }
    if let Some(path) = &args.histograms {
        manifest.input(path)?;
        analyze_histograms(path, args.sigma_gnmax, &mut manifest, out_dir)?;
    }
    if let Some((n, k)) = sensitivity {
        let rows = sensitivity_report(n, k, args.tau, norm)?;
        manifest.output(out_dir, "sensitivity.json", &pretty(&rows)?)?;
    }
    manifest.finish(out_dir)?;
    Ok(EXIT_OK)
}
