//! Song quality recovery.
//!
//! Each song is first tried by `m` simulated participants (Bernoulli trials
//! with success probability `q_i`), giving `q̂_{i,0} = k_i / m`. Afterwards the
//! running estimate folds in the downloads and samplings observed in the
//! market: `q̂_{i,k} = (k_i + D_{i,k}) / (m + S_{i,k})`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, MarketError, Result};
use crate::model::MarketState;

/// Default number of pre-sampling trials per song.
pub const DEFAULT_SAMPLE_SIZE: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityEstimate {
    successes: Vec<u32>,
    sample_size: u32,
}

impl QualityEstimate {
    /// Builds an estimate from known pre-sampling outcomes.
    pub fn from_successes(successes: Vec<u32>, sample_size: u32) -> Result<Self> {
        if sample_size == 0 {
            return Err(invalid("sample size", "must be at least 1"));
        }
        if let Some(i) = successes.iter().position(|&k| k > sample_size) {
            return Err(invalid(
                "successes",
                format!("song {i} has {} successes out of {sample_size}", successes[i]),
            ));
        }
        Ok(Self { successes, sample_size })
    }

    pub fn sample_size(&self) -> u32 {
        self.sample_size
    }

    pub fn successes(&self) -> &[u32] {
        &self.successes
    }

    pub fn len(&self) -> usize {
        self.successes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successes.is_empty()
    }

    /// `q̂_{i,0} = k_i / m`.
    pub fn initial(&self) -> Vec<f64> {
        let m = self.sample_size as f64;
        self.successes.iter().map(|&k| k as f64 / m).collect()
    }

    /// `q̂_{i,k} = (q̂_{i,0} m + D_{i,k}) / (m + S_{i,k})`, with the numerator
    /// and denominator formed in integers.
    pub fn update(&self, state: &MarketState) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.update_into(state, &mut out)?;
        Ok(out)
    }

    /// Allocation-free form of [`QualityEstimate::update`].
    pub fn update_into(&self, state: &MarketState, out: &mut [f64]) -> Result<()> {
        check_len("state", self.len(), state.n())?;
        check_len("output", self.len(), out.len())?;
        let m = u64::from(self.sample_size);
        for (song, ((&k, (&d, &s)), slot)) in self
            .successes
            .iter()
            .zip(state.downloads.iter().zip(&state.samples))
            .zip(out.iter_mut())
            .enumerate()
        {
            if d > s {
                return Err(MarketError::StateCorruption {
                    song,
                    downloads: d,
                    samples: s,
                });
            }
            *slot = (u64::from(k) + d) as f64 / (m + s) as f64;
        }
        Ok(())
    }
}

/// Runs `m` Bernoulli(`q_i`) trials per song, songs in index order.
pub fn initial_estimate<R: Rng + ?Sized>(q_true: &[f64], m: u32, rng: &mut R) -> Result<QualityEstimate> {
    if m == 0 {
        return Err(invalid("sample size", "must be at least 1"));
    }
    if let Some(i) = q_true.iter().position(|q| !(0.0..=1.0).contains(q)) {
        return Err(invalid("quality", format!("q[{i}] = {} is outside [0, 1]", q_true[i])));
    }
    let successes = q_true
        .iter()
        .map(|&q| (0..m).filter(|_| rng.random_bool(q)).count() as u32)
        .collect();
    QualityEstimate::from_successes(successes, m)
}

/// `q̂_{i,k}` for a state; see [`QualityEstimate::update`].
pub fn update_estimate(est: &QualityEstimate, state: &MarketState) -> Result<Vec<f64>> {
    est.update(state)
}

/// Mean squared error of `q_est` against `q_true` over the songs in `subset`.
pub fn estimation_error(q_est: &[f64], q_true: &[f64], subset: &[usize]) -> Result<f64> {
    check_len("quality estimate", q_true.len(), q_est.len())?;
    if subset.is_empty() {
        return Err(invalid("song subset", "must not be empty"));
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= q_true.len()) {
        return Err(invalid("song subset", format!("song {i} does not exist")));
    }
    let sum: f64 = subset.iter().map(|&i| (q_est[i] - q_true[i]).powi(2)).sum();
    Ok(sum / subset.len() as f64)
}

/// Indices of the `k` highest-quality songs, ties by lower index.
pub fn top_quality_songs(q_true: &[f64], k: usize) -> Vec<usize> {
    let mut songs: Vec<usize> = (0..q_true.len()).collect();
    songs.sort_by(|&x, &y| q_true[y].total_cmp(&q_true[x]).then(x.cmp(&y)));
    songs.truncate(k);
    songs
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn sure_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = initial_estimate(&[1.0, 0.0], 25, &mut rng).unwrap();
        assert_eq!(est.initial(), vec![1.0, 0.0]);
    }

    #[test]
    fn zero_sample_size_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            initial_estimate(&[0.5], 0, &mut rng),
            Err(MarketError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn update_examples() {
        let est = QualityEstimate::from_successes(vec![5, 2], 10).unwrap();
        let idle = MarketState::zeros(2);
        assert_eq!(est.update(&idle).unwrap(), est.initial());

        let state = MarketState::from_counts(vec![5, 90], vec![10, 90], 100).unwrap();
        let q = est.update(&state).unwrap();
        assert_abs_diff_eq!(q[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q[1], 0.92, epsilon = 1e-15);
    }

    #[test]
    fn update_rejects_corrupt_state() {
        let est = QualityEstimate::from_successes(vec![5], 10).unwrap();
        let state = MarketState::from_counts(vec![3], vec![2], 2).unwrap();
        assert!(matches!(
            est.update(&state),
            Err(MarketError::StateCorruption { song: 0, .. })
        ));
    }

    #[test]
    fn error_examples() {
        let q = [0.1, 0.5, 0.8];
        assert_eq!(estimation_error(&q, &q, &[0, 1, 2]).unwrap(), 0.0);
        let shifted = [0.2, 0.6, 0.9];
        assert_abs_diff_eq!(
            estimation_error(&shifted, &q, &[0, 1, 2]).unwrap(),
            0.01,
            epsilon = 1e-15
        );
        // (0.3-0.1)^2 = 0.04 and (0.8-0.8)^2 = 0 over songs {0, 2}.
        assert_abs_diff_eq!(
            estimation_error(&[0.3, 0.0, 0.8], &q, &[0, 2]).unwrap(),
            0.02,
            epsilon = 1e-15
        );
        assert!(estimation_error(&q, &q, &[]).is_err());
    }

    #[test]
    fn top_songs_break_ties_by_index() {
        assert_eq!(top_quality_songs(&[0.5, 0.9, 0.5, 0.1], 3), vec![1, 0, 2]);
    }
}
