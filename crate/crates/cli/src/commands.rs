use std::fs;
use std::io::Write;
use std::path::Path;

use musiclab_core::lfap::{performance_ranking_lfap, solve_performance_parametric};
use musiclab_core::metrics::ZeroDownloadWorlds;
use musiclab_core::model::{attraction, expected_downloads_for};
use musiclab_core::scenarios::ScenarioSpec;
use musiclab_core::simulator::{run_experiment, run_experiment_with_threads};
use musiclab_core::{Condition, InfluenceTransform, Market, MarketState, Ranking, WorldTrace};
use serde::Deserialize;

use crate::args::{GenScenarioArgs, KindArg, MetricsArgs, RankArgs, SimulateArgs, SolverArg};
use crate::config::{Experiment, ExperimentConfig, ScenarioFile};
use crate::error::{CliError, Result};
use crate::io::{self, MetricsReport, RunSummary};

pub fn gen_scenario(args: &GenScenarioArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut spec = match args.kind {
        KindArg::Gaussian => {
            if args.jitter.is_some() {
                return Err(CliError::Usage(
                    "--jitter only applies to --kind negative-correlation".into(),
                ));
            }
            ScenarioSpec::gaussian(args.n, args.seed)
        }
        KindArg::NegativeCorrelation => {
            let mut spec = ScenarioSpec::negative_correlation(args.n, args.seed);
            if let (Some(j), musiclab_core::scenarios::ScenarioKind::NegativeCorrelation { jitter, .. }) =
                (args.jitter, &mut spec.songs)
            {
                *jitter = j;
            }
            spec
        }
    };
    spec.alpha = args.alpha;
    let file = ScenarioFile::generated(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
    spec.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let text = file.to_toml();
    match &args.out {
        Some(path) => {
            if path.exists() && !args.force {
                return Err(CliError::Exists(path.clone()));
            }
            io::write_atomic(path, text.as_bytes())
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// Loads the config at `args.config` and applies the command-line overrides.
pub fn load_experiment(args: &SimulateArgs) -> Result<Experiment> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.simulation.master_seed = seed;
    }
    if let Some(w) = args.worlds {
        cfg.simulation.n_worlds = w;
    }
    if let Some(n) = args.iterations {
        cfg.simulation.n_iterations = n;
    }
    if let Some(r) = args.refresh_rate {
        cfg.simulation.refresh_rate = r;
    }
    if let Some(p) = args.policy {
        cfg.policy.kind = p.into();
    }
    if let Some(c) = args.condition {
        cfg.policy.condition = c.into();
    }
    if let Some(q) = args.quality {
        cfg.policy.quality_source = q.into();
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.clone());
    }
    if args.threads == Some(0) {
        return Err(CliError::Usage("--threads must be positive".into()));
    }
    cfg.resolve(&args.config)
}

/// Runs the experiment and writes its output directory.
pub fn simulate_experiment(exp: &Experiment, threads: Option<usize>, force: bool) -> Result<Vec<WorldTrace>> {
    let dir = exp
        .output
        .dir
        .as_ref()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output.dir".into()))?;
    if exp.output.metrics && exp.simulation.n_worlds < 2 {
        return Err(CliError::Usage("output.metrics needs at least 2 worlds".into()));
    }
    if dir.exists() && !force && fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_some() {
        return Err(CliError::Exists(dir.clone()));
    }
    let traces = match threads {
        Some(t) => run_experiment_with_threads(&exp.market, &exp.simulation, t)?,
        None => run_experiment(&exp.market, &exp.simulation)?,
    };
    let summary = RunSummary::new(&exp.scenario, &exp.market, &exp.simulation, &traces, exp.output.traces)?;
    io::write_run(dir, &summary, &traces, force)?;
    if exp.output.metrics {
        io::write_metrics(
            &dir.join(io::METRICS_DIR),
            &exp.market,
            &traces,
            10,
            ZeroDownloadWorlds::Drop,
        )?;
    }
    Ok(traces)
}

pub fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let exp = load_experiment(args)?;
    let traces = simulate_experiment(&exp, args.threads, args.force)?;
    let total: u64 = traces.iter().map(|t| t.final_state.total_downloads()).sum();
    writeln!(
        stdout,
        "{}: {} worlds x {} participants, mean downloads {}",
        exp.simulation.policy,
        traces.len(),
        exp.simulation.n_iterations,
        total as f64 / traces.len() as f64
    )
    .map_err(|e| CliError::io("<stdout>", e))
}

fn default_alpha() -> f64 {
    1.0
}

fn default_condition() -> Condition {
    Condition::SocialInfluence
}

/// Input of the `rank` command.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankInput {
    pub appeal: Vec<f64>,
    pub quality: Vec<f64>,
    pub visibility: Vec<f64>,
    #[serde(default)]
    pub downloads: Option<Vec<u64>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub transform: InfluenceTransform,
    #[serde(default = "default_condition")]
    pub condition: Condition,
}

/// Performance ranking and its expected downloads.
pub fn rank_input(input: &RankInput, solver: SolverArg) -> musiclab_core::Result<(Ranking, f64)> {
    let market = Market::new(
        input.appeal.clone(),
        input.quality.clone(),
        input.visibility.clone(),
        input.alpha,
        input.transform,
    )?;
    let downloads = input.downloads.clone().unwrap_or_else(|| vec![0; market.n()]);
    let samples = downloads.clone();
    let state = MarketState::from_counts(downloads, samples, 0)?;
    let a = attraction(&market, &state, input.condition)?;
    let ranking = match solver {
        SolverArg::Lfap => performance_ranking_lfap(&market, &a, market.quality())?.0,
        SolverArg::Parametric => solve_performance_parametric(&a, market.quality(), market.visibility())?.ranking,
    };
    let objective = expected_downloads_for(market.visibility(), &a, market.quality(), &ranking)?;
    Ok((ranking, objective))
}

pub fn rank(args: &RankArgs, stdout: &mut dyn Write) -> Result<()> {
    let path = &args.input;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let input: RankInput = toml::from_str(&text).map_err(|e| CliError::data(path, e))?;
    let (ranking, objective) = rank_input(&input, args.solver).map_err(|e| CliError::data(path, e))?;
    let mut out = format!("objective {objective}\nposition,song\n");
    for (p, &song) in ranking.playlist().iter().enumerate() {
        out.push_str(&format!("{},{}\n", p + 1, song + 1));
    }
    stdout
        .write_all(out.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

/// Pools the worlds of several runs of the same market and writes reports.
pub fn metrics_from_dirs(
    dirs: &[impl AsRef<Path>],
    out: &Path,
    force: bool,
    top_k: usize,
    zero: ZeroDownloadWorlds,
) -> Result<MetricsReport> {
    let mut runs = dirs.iter().map(|d| io::load_run(d.as_ref()));
    let first = runs
        .next()
        .ok_or_else(|| CliError::Usage("at least one --traces directory is required".into()))??;
    let market = first.market.clone();
    let steps = first.summary.snapshot_steps.clone();
    let mut traces = first.traces;
    for run in runs {
        let run = run?;
        if run.market != market {
            return Err(CliError::data(
                &run.dir,
                "market differs from the first trace directory",
            ));
        }
        if run.summary.snapshot_steps != steps {
            return Err(CliError::data(
                &run.dir,
                "snapshot schedule differs from the first trace directory",
            ));
        }
        traces.extend(run.traces);
    }
    io::prepare_dir(out, force)?;
    io::write_metrics(out, &market, &traces, top_k, zero)
}

pub fn metrics(args: &MetricsArgs, stdout: &mut dyn Write) -> Result<()> {
    let zero = if args.drop_empty_worlds {
        ZeroDownloadWorlds::Drop
    } else {
        ZeroDownloadWorlds::Error
    };
    let report = metrics_from_dirs(&args.traces, &args.out, args.force, args.top_k, zero)?;
    writeln!(
        stdout,
        "{} worlds, U = {}, mean final downloads {}",
        report.n_worlds, report.unpredictability, report.final_downloads.mean
    )
    .map_err(|e| CliError::io("<stdout>", e))
}
