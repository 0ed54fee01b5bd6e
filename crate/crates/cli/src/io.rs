//! Run directories: per-world trace CSVs, the run summary and metric reports.
//!
//! Layout of a run directory:
//!
//! ```text
//! summary.json            config echo, market vectors, mean downloads, per-world finals
//! scenario.toml           the scenario as literal vectors
//! traces/world_NNNNNN.csv step,song,position,samples,downloads,ranking_hash
//! metrics/*.csv           optional metric reports
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use musiclab_core::metrics::{
    estimation_error_curve, market_shares_with, mean_download_trajectory, quality_download_distribution,
    unpredictability, MeanCi, TrajectoryPoint, ZeroDownloadWorlds,
};
use musiclab_core::quality::QualityEstimate;
use musiclab_core::scenarios::ScenarioSpec;
use musiclab_core::simulator::Snapshot;
use musiclab_core::{InfluenceTransform, Market, MarketState, Ranking, SimulationConfig, WorldTrace};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ScenarioFile;
use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SCENARIO_FILE: &str = "scenario.toml";
pub const TRACE_DIR: &str = "traces";
pub const METRICS_DIR: &str = "metrics";
pub const FORMAT_VERSION: u32 = 1;

/// First 16 hex digits of the SHA-256 of the position vector (u32 LE).
pub fn ranking_hash(ranking: &Ranking) -> String {
    let mut hasher = Sha256::new();
    for &p in ranking.positions() {
        hasher.update((p as u32).to_le_bytes());
    }
    hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn trace_file_name(world_id: u64) -> String {
    format!("world_{world_id:06}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketEcho {
    pub appeal: Vec<f64>,
    pub quality: Vec<f64>,
    pub visibility: Vec<f64>,
    pub alpha: f64,
    pub transform: InfluenceTransform,
}

impl From<&Market> for MarketEcho {
    fn from(m: &Market) -> Self {
        Self {
            appeal: m.appeal().to_vec(),
            quality: m.quality().to_vec(),
            visibility: m.visibility().to_vec(),
            alpha: m.alpha(),
            transform: m.transform(),
        }
    }
}

impl MarketEcho {
    pub fn market(&self) -> musiclab_core::Result<Market> {
        Market::new(
            self.appeal.clone(),
            self.quality.clone(),
            self.visibility.clone(),
            self.alpha,
            self.transform,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSummary {
    pub world_id: u64,
    pub trace_file: Option<String>,
    pub presampling_successes: Vec<u32>,
    pub final_downloads: Vec<u64>,
    pub final_samples: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub policy: String,
    pub scenario: ScenarioSpec,
    pub simulation: SimulationConfig,
    pub market: MarketEcho,
    pub snapshot_steps: Vec<u64>,
    pub mean_downloads: Vec<TrajectoryPoint>,
    pub final_downloads: MeanCi,
    pub worlds: Vec<WorldSummary>,
}

impl RunSummary {
    pub fn new(
        scenario: &ScenarioSpec,
        market: &Market,
        simulation: &SimulationConfig,
        traces: &[WorldTrace],
        with_traces: bool,
    ) -> musiclab_core::Result<Self> {
        let totals: Vec<f64> = traces.iter().map(|t| t.final_state.total_downloads() as f64).collect();
        Ok(Self {
            format_version: FORMAT_VERSION,
            policy: simulation.policy.to_string(),
            scenario: scenario.clone(),
            simulation: *simulation,
            market: market.into(),
            snapshot_steps: simulation.snapshot_steps(),
            mean_downloads: mean_download_trajectory(traces)?,
            final_downloads: MeanCi::from_samples(&totals),
            worlds: traces
                .iter()
                .map(|t| WorldSummary {
                    world_id: t.world_id,
                    trace_file: with_traces.then(|| format!("{TRACE_DIR}/{}", trace_file_name(t.world_id))),
                    presampling_successes: t.estimate.successes().to_vec(),
                    final_downloads: t.final_state.downloads.clone(),
                    final_samples: t.final_state.samples.clone(),
                })
                .collect(),
        })
    }
}

/// Creates `dir`, refusing a non-empty existing directory unless `force`.
pub fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?.next().is_some();
        if occupied && !force {
            return Err(CliError::Exists(dir.to_path_buf()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    step: u64,
    song: usize,
    position: usize,
    samples: u64,
    downloads: u64,
    ranking_hash: String,
}

pub fn trace_to_csv(trace: &WorldTrace) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in &trace.snapshots {
        let hash = ranking_hash(&s.ranking);
        for song in 0..s.downloads.len() {
            w.serialize(TraceRow {
                step: s.step,
                song,
                position: s.ranking.position_of(song),
                samples: s.samples[song],
                downloads: s.downloads[song],
                ranking_hash: hash.clone(),
            })
            .expect("in-memory csv write");
        }
    }
    w.into_inner().expect("in-memory csv flush")
}

fn read_snapshots(path: &Path, n: usize) -> Result<Vec<Snapshot>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e))?;
    let mut snapshots = Vec::new();
    let mut rows: Vec<TraceRow> = Vec::with_capacity(n);
    let finish = |rows: &mut Vec<TraceRow>| -> Result<Snapshot> {
        let step = rows[0].step;
        if rows.len() != n {
            return Err(CliError::data(
                path,
                format!("step {step} lists {} of {n} songs", rows.len()),
            ));
        }
        let mut positions = vec![0; n];
        let mut downloads = vec![0; n];
        let mut samples = vec![0; n];
        for (i, row) in rows.iter().enumerate() {
            if row.song != i {
                return Err(CliError::data(path, format!("step {step}: rows out of song order")));
            }
            positions[i] = row.position;
            downloads[i] = row.downloads;
            samples[i] = row.samples;
        }
        let ranking = Ranking::from_positions(positions).map_err(|e| CliError::data(path, e))?;
        if ranking_hash(&ranking) != rows[0].ranking_hash || rows.iter().any(|r| r.ranking_hash != rows[0].ranking_hash)
        {
            return Err(CliError::data(path, format!("step {step}: ranking hash mismatch")));
        }
        rows.clear();
        Ok(Snapshot {
            step,
            ranking,
            downloads,
            samples,
        })
    };
    for row in reader.deserialize::<TraceRow>() {
        let row = row.map_err(|e| CliError::data(path, e))?;
        if rows.first().is_some_and(|r| r.step != row.step) {
            snapshots.push(finish(&mut rows)?);
        }
        rows.push(row);
    }
    if !rows.is_empty() {
        snapshots.push(finish(&mut rows)?);
    }
    Ok(snapshots)
}

/// Writes a complete run. The summary goes last, so a directory with a
/// summary always has all of its traces.
pub fn write_run(dir: &Path, summary: &RunSummary, traces: &[WorldTrace], force: bool) -> Result<()> {
    prepare_dir(dir, force)?;
    let scenario = ScenarioFile {
        metadata: None,
        scenario: summary.scenario.clone(),
    };
    write_atomic(&dir.join(SCENARIO_FILE), scenario.to_toml().as_bytes())?;
    if summary.worlds.iter().any(|w| w.trace_file.is_some()) {
        let trace_dir = dir.join(TRACE_DIR);
        fs::create_dir_all(&trace_dir).map_err(|e| CliError::io(&trace_dir, e))?;
        for t in traces {
            write_atomic(&trace_dir.join(trace_file_name(t.world_id)), &trace_to_csv(t))?;
        }
    }
    let json = serde_json::to_string_pretty(summary).expect("summary serializes");
    write_atomic(&dir.join(SUMMARY_FILE), json.as_bytes())
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub market: Market,
    pub traces: Vec<WorldTrace>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let summary_path = dir.join(SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(CliError::data(dir, "no summary.json; the run is missing or incomplete"));
    }
    let text = fs::read_to_string(&summary_path).map_err(|e| CliError::io(&summary_path, e))?;
    let summary: RunSummary = serde_json::from_str(&text).map_err(|e| CliError::data(&summary_path, e))?;
    let market = summary.market.market().map_err(|e| CliError::data(&summary_path, e))?;
    let n = market.n();
    let expected = summary.simulation.n_worlds as usize;
    if summary.worlds.len() != expected {
        return Err(CliError::data(
            &summary_path,
            format!("lists {} of {expected} worlds", summary.worlds.len()),
        ));
    }
    let mut traces = Vec::with_capacity(expected);
    for w in &summary.worlds {
        let file = w
            .trace_file
            .as_ref()
            .ok_or_else(|| CliError::data(dir, format!("world {} was run without traces", w.world_id)))?;
        let path = dir.join(file);
        if !path.exists() {
            return Err(CliError::data(
                &path,
                format!("trace of world {} is missing", w.world_id),
            ));
        }
        let snapshots = read_snapshots(&path, n)?;
        let steps: Vec<u64> = snapshots.iter().map(|s| s.step).collect();
        if steps != summary.snapshot_steps {
            return Err(CliError::data(
                &path,
                format!(
                    "trace of world {} is partial: {} of {} snapshots",
                    w.world_id,
                    steps.len(),
                    summary.snapshot_steps.len()
                ),
            ));
        }
        let last = snapshots.last().expect("snapshot steps are never empty");
        if last.downloads != w.final_downloads || last.samples != w.final_samples {
            return Err(CliError::data(
                &path,
                format!("world {} disagrees with the summary", w.world_id),
            ));
        }
        let estimate =
            QualityEstimate::from_successes(w.presampling_successes.clone(), summary.simulation.initial_sample_size)
                .map_err(|e| CliError::data(&summary_path, e))?;
        traces.push(WorldTrace {
            world_id: w.world_id,
            final_state: MarketState {
                downloads: last.downloads.clone(),
                samples: last.samples.clone(),
                step: last.step,
            },
            snapshots,
            estimate,
        });
    }
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        summary,
        market,
        traces,
    })
}

/// Headline numbers written next to the metric CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_worlds: usize,
    pub dropped_worlds: Vec<u64>,
    pub unpredictability: f64,
    pub final_downloads: MeanCi,
    pub top_k: usize,
    pub final_estimation_error: f64,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Writes the metric files into `dir`:
///
/// - `unpredictability.csv`: `song,quality,u` (per-song `u_i`);
/// - `market_shares.csv`: `world,song,share`;
/// - `quality_downloads.csv`: `quality_rank,song,quality,world,downloads`, songs by increasing quality;
/// - `quality_download_summary.csv`: `quality_rank,song,quality,p5,median,p95`;
/// - `estimation_error.csv`: `step,mse` over the `top_k` best songs;
/// - `download_trajectory.csv`: `step,mean,ci_low,ci_high`;
/// - `metrics.json`: [`MetricsReport`].
pub fn write_metrics(
    dir: &Path,
    market: &Market,
    traces: &[WorldTrace],
    top_k: usize,
    zero: ZeroDownloadWorlds,
) -> Result<MetricsReport> {
    let shares = market_shares_with(traces, zero)?;
    let u = unpredictability(&shares)?;
    let dist = quality_download_distribution(traces, market)?;
    let error = estimation_error_curve(traces, market, top_k)?;
    let trajectory = mean_download_trajectory(traces)?;
    let totals: Vec<f64> = traces.iter().map(|t| t.final_state.total_downloads() as f64).collect();

    #[derive(Serialize)]
    struct URow {
        song: usize,
        quality: f64,
        u: f64,
    }
    #[derive(Serialize)]
    struct ShareRow {
        world: u64,
        song: usize,
        share: f64,
    }
    #[derive(Serialize)]
    struct DotRow {
        quality_rank: usize,
        song: usize,
        quality: f64,
        world: u64,
        downloads: u64,
    }
    #[derive(Serialize)]
    struct SpreadRow {
        quality_rank: usize,
        song: usize,
        quality: f64,
        p5: f64,
        median: f64,
        p95: f64,
    }
    #[derive(Serialize)]
    struct ErrorRow {
        step: u64,
        mse: f64,
    }
    #[derive(Serialize)]
    struct TrajectoryRow {
        step: u64,
        mean: f64,
        ci_low: f64,
        ci_high: f64,
    }

    let files: Vec<(&str, Vec<u8>)> = vec![
        (
            "unpredictability.csv",
            csv_bytes(u.per_song.iter().enumerate().map(|(song, &u)| URow {
                song,
                quality: market.quality()[song],
                u,
            })),
        ),
        (
            "market_shares.csv",
            csv_bytes(shares.world_ids.iter().zip(&shares.shares).flat_map(|(&world, s)| {
                s.iter()
                    .enumerate()
                    .map(move |(song, &share)| ShareRow { world, song, share })
            })),
        ),
        (
            "quality_downloads.csv",
            csv_bytes(dist.iter().enumerate().flat_map(|(rank, s)| {
                traces.iter().map(move |t| DotRow {
                    quality_rank: rank + 1,
                    song: s.song,
                    quality: s.quality,
                    world: t.world_id,
                    downloads: t.final_state.downloads[s.song],
                })
            })),
        ),
        (
            "quality_download_summary.csv",
            csv_bytes(dist.iter().enumerate().map(|(rank, s)| SpreadRow {
                quality_rank: rank + 1,
                song: s.song,
                quality: s.quality,
                p5: s.percentile(0.05),
                median: s.median(),
                p95: s.percentile(0.95),
            })),
        ),
        (
            "estimation_error.csv",
            csv_bytes(error.iter().map(|p| ErrorRow {
                step: p.step,
                mse: p.value,
            })),
        ),
        (
            "download_trajectory.csv",
            csv_bytes(trajectory.iter().map(|p| TrajectoryRow {
                step: p.step,
                mean: p.downloads.mean,
                ci_low: p.downloads.lower(),
                ci_high: p.downloads.upper(),
            })),
        ),
    ];

    let report = MetricsReport {
        n_worlds: shares.n_worlds(),
        dropped_worlds: traces
            .iter()
            .map(|t| t.world_id)
            .filter(|id| !shares.world_ids.contains(id))
            .collect(),
        unpredictability: u.overall,
        final_downloads: MeanCi::from_samples(&totals),
        top_k,
        final_estimation_error: error.last().map_or(f64::NAN, |p| p.value),
    };

    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_atomic(&dir.join("metrics.json"), json.as_bytes())?;
    Ok(report)
}
