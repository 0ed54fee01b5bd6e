//! Cross-world statistics: market shares, unpredictability, download
//! distributions, quality-estimation error and download trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, MarketError, Result};
use crate::model::Market;
use crate::quality::{estimation_error, top_quality_songs};
use crate::simulator::WorldTrace;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Per-world market shares, `shares[w][i] = D_i / Σ_j D_j` at the final step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShares {
    pub world_ids: Vec<u64>,
    pub shares: Vec<Vec<f64>>,
}

impl MarketShares {
    pub fn n_worlds(&self) -> usize {
        self.shares.len()
    }

    pub fn n_songs(&self) -> usize {
        self.shares.first().map_or(0, Vec::len)
    }
}

/// What to do with worlds in which nothing was downloaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroDownloadWorlds {
    #[default]
    Error,
    Drop,
}

pub fn market_shares(traces: &[WorldTrace]) -> Result<MarketShares> {
    market_shares_with(traces, ZeroDownloadWorlds::Error)
}

pub fn market_shares_with(traces: &[WorldTrace], zero: ZeroDownloadWorlds) -> Result<MarketShares> {
    let n = traces.first().map_or(0, |t| t.final_state.n());
    let mut world_ids = Vec::with_capacity(traces.len());
    let mut shares = Vec::with_capacity(traces.len());
    for trace in traces {
        let downloads = &trace.final_state.downloads;
        check_len("songs in world", n, downloads.len())?;
        let total: u64 = downloads.iter().sum();
        if total == 0 {
            match zero {
                ZeroDownloadWorlds::Error => return Err(MarketError::UndefinedShare(trace.world_id as usize)),
                ZeroDownloadWorlds::Drop => continue,
            }
        }
        world_ids.push(trace.world_id);
        shares.push(downloads.iter().map(|&d| d as f64 / total as f64).collect());
    }
    Ok(MarketShares { world_ids, shares })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnpredictabilityReport {
    pub per_song: Vec<f64>,
    pub overall: f64,
}

/// `u_i` is the mean absolute difference of song `i`'s share over all pairs
/// of worlds; `U` is the mean of `u_i` over songs.
pub fn unpredictability(shares: &MarketShares) -> Result<UnpredictabilityReport> {
    let w = shares.n_worlds();
    if w < 2 {
        return Err(invalid("unpredictability", format!("needs at least 2 worlds, got {w}")));
    }
    let n = shares.n_songs();
    let pairs = (w * (w - 1) / 2) as f64;
    let mut per_song = vec![0.0; n];
    for (i, u) in per_song.iter_mut().enumerate() {
        let mut sum = 0.0;
        for a in 0..w {
            for b in a + 1..w {
                sum += (shares.shares[a][i] - shares.shares[b][i]).abs();
            }
        }
        *u = sum / pairs;
    }
    let overall = per_song.iter().sum::<f64>() / n as f64;
    Ok(UnpredictabilityReport { per_song, overall })
}

/// Final downloads of one song across worlds, sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongDownloads {
    pub song: usize,
    pub quality: f64,
    pub downloads: Vec<u64>,
}

impl SongDownloads {
    pub fn median(&self) -> f64 {
        percentile(&self.as_f64(), 0.5)
    }

    pub fn percentile(&self, p: f64) -> f64 {
        percentile(&self.as_f64(), p)
    }

    fn as_f64(&self) -> Vec<f64> {
        self.downloads.iter().map(|&d| d as f64).collect()
    }
}

/// Per-song download samples, songs ordered by increasing true quality
/// (ties by index).
pub fn quality_download_distribution(traces: &[WorldTrace], market: &Market) -> Result<Vec<SongDownloads>> {
    let mut songs: Vec<usize> = (0..market.n()).collect();
    let q = market.quality();
    songs.sort_by(|&x, &y| q[x].total_cmp(&q[y]).then(x.cmp(&y)));
    for t in traces {
        check_len("songs in world", market.n(), t.final_state.n())?;
    }
    Ok(songs
        .into_iter()
        .map(|song| {
            let mut downloads: Vec<u64> = traces.iter().map(|t| t.final_state.downloads[song]).collect();
            downloads.sort_unstable();
            SongDownloads {
                song,
                quality: q[song],
                downloads,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub value: f64,
}

fn common_steps(traces: &[WorldTrace]) -> Result<Vec<u64>> {
    let first = traces
        .first()
        .ok_or_else(|| MarketError::MissingData("no worlds".into()))?;
    let steps: Vec<u64> = first.snapshots.iter().map(|s| s.step).collect();
    if steps.is_empty() {
        return Err(MarketError::MissingData(format!(
            "world {} has no snapshots",
            first.world_id
        )));
    }
    for t in traces {
        if t.snapshots.len() != steps.len() || t.snapshots.iter().zip(&steps).any(|(s, &k)| s.step != k) {
            return Err(MarketError::MissingData(format!(
                "world {} snapshots differ from world {}",
                t.world_id, first.world_id
            )));
        }
    }
    Ok(steps)
}

/// Mean over worlds of the squared estimation error of the `top_k`
/// highest-quality songs, at every snapshot.
pub fn estimation_error_curve(traces: &[WorldTrace], market: &Market, top_k: usize) -> Result<Vec<CurvePoint>> {
    let steps = common_steps(traces)?;
    let subset = top_quality_songs(market.quality(), top_k);
    let mut sums = vec![0.0; steps.len()];
    for t in traces {
        if t.estimate.len() != market.n() {
            return Err(MarketError::MissingData(format!(
                "world {} carries no quality estimate",
                t.world_id
            )));
        }
        for (sum, (_, q_hat)) in sums.iter_mut().zip(t.estimate_trajectory()?) {
            *sum += estimation_error(&q_hat, market.quality(), &subset)?;
        }
    }
    let w = traces.len() as f64;
    Ok(steps
        .into_iter()
        .zip(sums)
        .map(|(step, sum)| CurvePoint { step, value: sum / w })
        .collect())
}

/// Sample mean with a normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
}

impl MeanCi {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { mean, half_width: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            half_width: Z_95 * (var / n).sqrt(),
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Whether this interval lies entirely above `other`.
    pub fn separated_above(&self, other: &MeanCi) -> bool {
        self.lower() > other.upper()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub downloads: MeanCi,
}

/// Mean total downloads across worlds at every snapshot.
pub fn mean_download_trajectory(traces: &[WorldTrace]) -> Result<Vec<TrajectoryPoint>> {
    let steps = common_steps(traces)?;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(k, &step)| {
            let totals: Vec<f64> = traces.iter().map(|t| t.snapshots[k].total_downloads() as f64).collect();
            TrajectoryPoint {
                step,
                downloads: MeanCi::from_samples(&totals),
            }
        })
        .collect())
}

/// Total downloads per world at the final step.
pub fn final_downloads(traces: &[WorldTrace]) -> Vec<f64> {
    traces.iter().map(|t| t.final_state.total_downloads() as f64).collect()
}

/// Final download rate per participant, per world.
pub fn download_rates(traces: &[WorldTrace]) -> Vec<f64> {
    traces
        .iter()
        .map(|t| t.final_state.total_downloads() as f64 / t.final_state.step.max(1) as f64)
        .collect()
}

/// Linear-interpolation percentile (`p` in `[0, 1]`) of a sample.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}
