//! Ranking policies evaluated at every refresh point.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::lfap::ParametricSolver;
use crate::model::{attraction, Condition, Market, MarketState, Ranking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    #[serde(alias = "d-rank")]
    DownloadRank,
    #[serde(alias = "p-rank")]
    PerformanceRank,
    #[serde(alias = "rand-rank")]
    RandomRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QualitySource {
    #[serde(alias = "true")]
    TrueQuality,
    #[default]
    #[serde(alias = "estimated")]
    EstimatedQuality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub condition: Condition,
    /// Only consulted by the performance ranking.
    #[serde(default)]
    pub quality_source: QualitySource,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, condition: Condition, quality_source: QualitySource) -> Self {
        Self {
            kind,
            condition,
            quality_source,
        }
    }

    pub fn download(condition: Condition) -> Self {
        Self::new(PolicyKind::DownloadRank, condition, QualitySource::default())
    }

    pub fn random(condition: Condition) -> Self {
        Self::new(PolicyKind::RandomRank, condition, QualitySource::default())
    }

    pub fn performance(condition: Condition, quality_source: QualitySource) -> Self {
        Self::new(PolicyKind::PerformanceRank, condition, quality_source)
    }

    /// Whether the policy's output can change between refreshes of one run.
    pub fn is_stationary(&self) -> bool {
        self.kind == PolicyKind::PerformanceRank
            && self.condition == Condition::Independent
            && self.quality_source == QualitySource::TrueQuality
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            PolicyKind::DownloadRank => "D-rank",
            PolicyKind::PerformanceRank => "P-rank",
            PolicyKind::RandomRank => "rand-rank",
        };
        write!(f, "{kind}({})", self.condition)?;
        if self.kind == PolicyKind::PerformanceRank && self.quality_source == QualitySource::TrueQuality {
            f.write_str("[true-q]")?;
        }
        Ok(())
    }
}

/// Songs by downloads, most downloaded first, ties by song index.
pub fn download_ranking(state: &MarketState) -> Ranking {
    let mut playlist: Vec<usize> = (0..state.n()).collect();
    playlist.sort_by(|&x, &y| state.downloads[y].cmp(&state.downloads[x]).then(x.cmp(&y)));
    Ranking::from_playlist(playlist).expect("sorted indices form a permutation")
}

/// Uniform random playlist by Fisher-Yates.
///
/// Consumes exactly `n - 1` `u64` draws (none for `n <= 1`). Step `i`
/// (from `n - 1` down to `1`) maps its draw `x` to `⌊x (i + 1) / 2^64⌋`; the
/// deviation from uniform is at most `(i + 1) / 2^64` per step.
pub fn random_ranking<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Ranking {
    let mut playlist: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let x = rng.next_u64();
        let j = ((u128::from(x) * (i as u128 + 1)) >> 64) as usize;
        playlist.swap(i, j);
    }
    Ranking::from_playlist(playlist).expect("shuffled indices form a permutation")
}

/// Evaluates one policy at one refresh point.
///
/// `q_est` is the current quality estimate; it is only read by the
/// performance ranking with [`QualitySource::EstimatedQuality`]. The
/// performance ranking uses the sort-based solver; under the independent
/// condition its attraction ignores downloads.
pub fn apply_policy<R: RngCore + ?Sized>(
    spec: &PolicySpec,
    market: &Market,
    state: &MarketState,
    q_est: &[f64],
    rng: &mut R,
) -> Result<Ranking> {
    check_len("state", market.n(), state.n())?;
    match spec.kind {
        PolicyKind::DownloadRank => Ok(download_ranking(state)),
        PolicyKind::RandomRank => Ok(random_ranking(market.n(), rng)),
        PolicyKind::PerformanceRank => {
            let q = match spec.quality_source {
                QualitySource::TrueQuality => market.quality(),
                QualitySource::EstimatedQuality => {
                    check_len("quality estimate", market.n(), q_est.len())?;
                    q_est
                }
            };
            let a = attraction(market, state, spec.condition)?;
            Ok(ParametricSolver::new(market.visibility()).solve(&a, q)?.ranking)
        }
    }
}

/// Per-world policy evaluator that keeps solver buffers between refreshes
/// and caches the stationary P-rank(IN) ranking under true quality.
#[derive(Debug, Clone)]
pub struct PolicyRunner {
    spec: PolicySpec,
    solver: ParametricSolver,
    cached: Option<Ranking>,
}

impl PolicyRunner {
    pub fn new(spec: PolicySpec, market: &Market) -> Self {
        Self {
            spec,
            solver: ParametricSolver::new(market.visibility()),
            cached: None,
        }
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// Same result as [`apply_policy`] with identical inputs and rng state.
    pub fn rank<R: RngCore + ?Sized>(
        &mut self,
        market: &Market,
        state: &MarketState,
        q_est: &[f64],
        rng: &mut R,
    ) -> Result<Ranking> {
        match self.spec.kind {
            PolicyKind::DownloadRank => Ok(download_ranking(state)),
            PolicyKind::RandomRank => Ok(random_ranking(market.n(), rng)),
            PolicyKind::PerformanceRank => {
                if let Some(r) = &self.cached {
                    return Ok(r.clone());
                }
                let q = match self.spec.quality_source {
                    QualitySource::TrueQuality => market.quality(),
                    QualitySource::EstimatedQuality => q_est,
                };
                check_len("quality estimate", market.n(), q.len())?;
                let a = attraction(market, state, self.spec.condition)?;
                let ranking = self.solver.solve(&a, q)?.ranking;
                if self.spec.is_stationary() {
                    self.cached = Some(ranking.clone());
                }
                Ok(ranking)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::lfap::brute_force_performance;

    fn state(downloads: Vec<u64>) -> MarketState {
        let samples = downloads.clone();
        let step = samples.iter().sum();
        MarketState::from_counts(downloads, samples, step).unwrap()
    }

    #[test]
    fn download_ranking_examples() {
        assert_eq!(download_ranking(&state(vec![0, 0, 0])), Ranking::identity(3));
        assert_eq!(download_ranking(&state(vec![2, 5, 1])).playlist(), &[1, 0, 2]);
        assert_eq!(download_ranking(&state(vec![3, 3, 7])).playlist(), &[2, 0, 1]);
    }

    #[test]
    fn random_ranking_single_song() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(random_ranking(1, &mut rng), Ranking::identity(1));
        assert_eq!(random_ranking(0, &mut rng), Ranking::identity(0));
    }

    #[test]
    fn random_ranking_golden() {
        // Recorded from ChaCha8 seeded with 2024.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let r = random_ranking(8, &mut rng);
        assert_eq!(r.playlist(), GOLDEN_SHUFFLE);
    }

    const GOLDEN_SHUFFLE: &[usize] = &[3, 0, 7, 2, 5, 4, 6, 1];

    #[test]
    fn random_ranking_draw_count() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = a.clone();
        random_ranking(7, &mut a);
        for _ in 0..6 {
            b.next_u64();
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn download_policy_ignores_estimates_and_rng() {
        let market = Market::with_defaults(vec![0.5; 3], vec![0.2, 0.5, 0.9], vec![3.0, 2.0, 1.0]).unwrap();
        let s = state(vec![1, 4, 2]);
        let spec = PolicySpec::download(Condition::SocialInfluence);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = apply_policy(&spec, &market, &s, &[0.0; 3], &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let second = apply_policy(&spec, &market, &s, &[1.0; 3], &mut rng).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn performance_policy_matches_brute_force() {
        let market = Market::with_defaults(
            vec![0.3, 0.8, 0.1, 0.6, 0.45],
            vec![0.9, 0.2, 0.7, 0.4, 0.55],
            vec![1.0, 0.6, 0.45, 0.3, 0.35],
        )
        .unwrap();
        let s = state(vec![3, 9, 0, 2, 4]);
        let spec = PolicySpec::performance(Condition::SocialInfluence, QualitySource::TrueQuality);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = apply_policy(&spec, &market, &s, &[], &mut rng).unwrap();
        let a = attraction(&market, &s, Condition::SocialInfluence).unwrap();
        let (_, best) = brute_force_performance(&a, market.quality(), market.visibility()).unwrap();
        let got = crate::model::expected_downloads(&market, &a, &r).unwrap();
        assert!((got - best).abs() < 1e-12);
    }

    #[test]
    fn independent_performance_ranking_is_stationary() {
        let market = Market::with_defaults(vec![0.3, 0.8, 0.1], vec![0.9, 0.2, 0.7], vec![1.0, 0.6, 0.45]).unwrap();
        let spec = PolicySpec::performance(Condition::Independent, QualitySource::TrueQuality);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let first = apply_policy(&spec, &market, &state(vec![0, 0, 0]), &[], &mut rng).unwrap();
        let later = apply_policy(&spec, &market, &state(vec![40, 1, 12]), &[], &mut rng).unwrap();
        assert_eq!(first, later);
    }
}
