//! Agent-based simulation of independent market worlds.
//!
//! One iteration is one participant: a song is drawn from the sampling
//! probabilities under the ranking in force, and downloaded with probability
//! equal to its quality. Every `refresh_rate` iterations (starting before the
//! first participant) the policy recomputes the ranking.
//!
//! Each world draws from three ChaCha8 streams keyed by
//! `(master_seed, world_id)`: one for participants, one for the quality
//! pre-sampling and one for policy randomness. A world's trace therefore
//! depends only on its id, never on how worlds are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, MarketError, Result};
use crate::model::{Condition, Market, MarketState, Ranking};
use crate::policies::{PolicyKind, PolicyRunner, PolicySpec, QualitySource};
use crate::quality::{initial_estimate, QualityEstimate, DEFAULT_SAMPLE_SIZE};

/// Upper bound on snapshots kept per world.
pub const MAX_SNAPSHOTS_PER_WORLD: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_iterations: u64,
    #[serde(default = "default_refresh_rate")]
    pub refresh_rate: u64,
    pub policy: PolicySpec,
    pub n_worlds: u64,
    pub master_seed: u64,
    #[serde(default = "default_record_stride")]
    pub record_stride: u64,
    #[serde(default = "default_sample_size")]
    pub initial_sample_size: u32,
}

fn default_refresh_rate() -> u64 {
    1
}

fn default_record_stride() -> u64 {
    100
}

fn default_sample_size() -> u32 {
    DEFAULT_SAMPLE_SIZE
}

impl SimulationConfig {
    /// 20,000 participants, 400 worlds, re-ranking after every participant,
    /// snapshots every 100 participants.
    pub fn full_scale(policy: PolicySpec, master_seed: u64) -> Self {
        Self {
            n_iterations: 20_000,
            refresh_rate: default_refresh_rate(),
            policy,
            n_worlds: 400,
            master_seed,
            record_stride: default_record_stride(),
            initial_sample_size: DEFAULT_SAMPLE_SIZE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(invalid("iterations", "must be positive"));
        }
        if self.refresh_rate == 0 || self.refresh_rate > self.n_iterations {
            return Err(invalid("refresh rate", "must lie in 1..=iterations"));
        }
        if self.n_worlds == 0 {
            return Err(invalid("worlds", "must be positive"));
        }
        if self.record_stride == 0 {
            return Err(invalid("record stride", "must be positive"));
        }
        if self.initial_sample_size == 0 {
            return Err(invalid("initial sample size", "must be positive"));
        }
        if self.n_iterations / self.record_stride + 2 > MAX_SNAPSHOTS_PER_WORLD {
            return Err(invalid(
                "record stride",
                format!("more than {MAX_SNAPSHOTS_PER_WORLD} snapshots per world"),
            ));
        }
        Ok(())
    }

    /// Steps at which snapshots are taken: 0, every stride, and the last step.
    pub fn snapshot_steps(&self) -> Vec<u64> {
        let mut steps: Vec<u64> = (0..=self.n_iterations).step_by(self.record_stride as usize).collect();
        if steps.last() != Some(&self.n_iterations) {
            steps.push(self.n_iterations);
        }
        steps
    }
}

/// Market state and ranking after `step` participants. The ranking is the one
/// shown to the most recent participant (the initial ranking at step 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub ranking: Ranking,
    pub downloads: Vec<u64>,
    pub samples: Vec<u64>,
}

impl Snapshot {
    fn capture(state: &MarketState, ranking: &Ranking) -> Self {
        Self {
            step: state.step,
            ranking: ranking.clone(),
            downloads: state.downloads.clone(),
            samples: state.samples.clone(),
        }
    }

    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }

    pub fn total_samples(&self) -> u64 {
        self.samples.iter().sum()
    }

    pub fn state(&self) -> MarketState {
        MarketState {
            downloads: self.downloads.clone(),
            samples: self.samples.clone(),
            step: self.step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldTrace {
    pub world_id: u64,
    pub snapshots: Vec<Snapshot>,
    pub final_state: MarketState,
    /// Pre-sampling outcomes; with the snapshots they determine the quality
    /// estimate at every recorded step.
    pub estimate: QualityEstimate,
}

impl WorldTrace {
    /// `(step, q̂)` at every snapshot.
    pub fn estimate_trajectory(&self) -> Result<Vec<(u64, Vec<f64>)>> {
        self.snapshots
            .iter()
            .map(|s| Ok((s.step, self.estimate.update(&s.state())?)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stream {
    Participants = 0,
    Presampling = 1,
    Policy = 2,
}

const STREAMS: u64 = 3;

fn world_rng(master_seed: u64, world_id: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(world_id.wrapping_mul(STREAMS).wrapping_add(stream as u64));
    rng
}

/// Simulates one world.
pub fn run_world(market: &Market, config: &SimulationConfig, world_id: u64) -> Result<WorldTrace> {
    config.validate()?;
    let n = market.n();
    let mut participants = world_rng(config.master_seed, world_id, Stream::Participants);
    let mut presampling = world_rng(config.master_seed, world_id, Stream::Presampling);
    let mut policy_rng = world_rng(config.master_seed, world_id, Stream::Policy);

    let estimate = initial_estimate(market.quality(), config.initial_sample_size, &mut presampling)?;
    let mut q_hat = estimate.initial();
    let uses_estimates = config.policy.kind == PolicyKind::PerformanceRank
        && config.policy.quality_source == QualitySource::EstimatedQuality;
    let social = config.policy.condition == Condition::SocialInfluence;
    let transform = market.transform();
    let visibility = market.visibility();
    let quality = market.quality();

    let mut runner = PolicyRunner::new(config.policy, market);
    let mut state = MarketState::zeros(n);
    let mut attraction: Vec<f64> = market
        .appeal()
        .iter()
        .map(|&a| market.alpha() * a + if social { transform.apply(0) } else { 0.0 })
        .collect();
    let mut ranking = runner.rank(market, &state, &q_hat, &mut policy_rng)?;

    let mut snapshots = Vec::with_capacity(config.snapshot_steps().len());
    snapshots.push(Snapshot::capture(&state, &ranking));
    let mut weights = vec![0.0; n];

    for k in 0..config.n_iterations {
        if k > 0 && k % config.refresh_rate == 0 {
            if uses_estimates {
                estimate.update_into(&state, &mut q_hat)?;
            }
            ranking = runner.rank(market, &state, &q_hat, &mut policy_rng)?;
        }

        let mut total = 0.0;
        for (song, w) in weights.iter_mut().enumerate() {
            *w = visibility[ranking.position_of(song)] * attraction[song];
            total += *w;
        }
        if total <= 0.0 {
            return Err(MarketError::DegenerateMarket("sampling weights sum to zero"));
        }
        let target = participants.random::<f64>() * total;
        let mut acc = 0.0;
        let mut song = n;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                song = i;
                break;
            }
        }
        if song == n {
            // Rounding pushed the target past the accumulated total.
            song = weights
                .iter()
                .rposition(|&w| w > 0.0)
                .expect("total weight is positive");
        }

        state.samples[song] += 1;
        if participants.random::<f64>() < quality[song] {
            state.downloads[song] += 1;
            if social {
                attraction[song] = market.alpha() * market.appeal()[song] + transform.apply(state.downloads[song]);
            }
        }
        state.step += 1;

        if state.step % config.record_stride == 0 || state.step == config.n_iterations {
            snapshots.push(Snapshot::capture(&state, &ranking));
        }
    }

    Ok(WorldTrace {
        world_id,
        snapshots,
        final_state: state,
        estimate,
    })
}

/// Simulates worlds `0..n_worlds` on the current rayon pool. The output is
/// ordered by world id and does not depend on the schedule.
pub fn run_experiment(market: &Market, config: &SimulationConfig) -> Result<Vec<WorldTrace>> {
    config.validate()?;
    (0..config.n_worlds)
        .into_par_iter()
        .map(|w| run_world(market, config, w))
        .collect()
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    market: &Market,
    config: &SimulationConfig,
    threads: usize,
) -> Result<Vec<WorldTrace>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("thread pool", e.to_string()))?;
    pool.install(|| run_experiment(market, config))
}
