//! Market parameters, Markov state and the sampling model.
//!
//! A participant facing ranking `σ` samples song `i` with probability
//! proportional to `v[σ(i)] * a_i`, where `a_i = α·A_i + f(D_i)` is the
//! song's attraction. Under the independent condition the download term is
//! dropped and `a_i = α·A_i`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, MarketError, Result};

/// Absolute tolerance used when checking that a probability vector sums to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Positive nondecreasing function applied to download counts before they
/// enter the attraction of a song.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceTransform {
    /// `f(d) = d`
    #[default]
    Identity,
    /// `f(d) = ln(1 + d)`
    Logarithmic,
    /// `f(d) = sqrt(d)`
    SquareRoot,
}

impl InfluenceTransform {
    pub fn apply(self, downloads: u64) -> f64 {
        let d = downloads as f64;
        match self {
            InfluenceTransform::Identity => d,
            InfluenceTransform::Logarithmic => d.ln_1p(),
            InfluenceTransform::SquareRoot => d.sqrt(),
        }
    }
}

impl fmt::Display for InfluenceTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            InfluenceTransform::Identity => "identity",
            InfluenceTransform::Logarithmic => "logarithmic",
            InfluenceTransform::SquareRoot => "square-root",
        };
        f.write_str(name)
    }
}

/// Whether download counts feed back into the sampling probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    #[serde(alias = "si")]
    SocialInfluence,
    #[serde(alias = "in")]
    Independent,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::SocialInfluence => "SI",
            Condition::Independent => "IN",
        })
    }
}

/// The fixed data of a market: per-song appeal and quality, per-position
/// visibility, the appeal scaling factor and the influence transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    appeal: Vec<f64>,
    quality: Vec<f64>,
    visibility: Vec<f64>,
    alpha: f64,
    transform: InfluenceTransform,
}

impl Market {
    pub fn new(
        appeal: Vec<f64>,
        quality: Vec<f64>,
        visibility: Vec<f64>,
        alpha: f64,
        transform: InfluenceTransform,
    ) -> Result<Self> {
        let n = appeal.len();
        if n == 0 {
            return Err(invalid("market", "at least one song is required"));
        }
        check_len("quality", n, quality.len())?;
        check_len("visibility", n, visibility.len())?;
        if let Some(i) = quality.iter().position(|q| !(q.is_finite() && (0.0..=1.0).contains(q))) {
            return Err(invalid("quality", format!("q[{i}] = {} is outside [0, 1]", quality[i])));
        }
        if let Some(i) = appeal.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid("appeal", format!("A[{i}] = {} is negative", appeal[i])));
        }
        if appeal.iter().all(|&a| a == 0.0) {
            return Err(MarketError::DegenerateMarket("every appeal is zero"));
        }
        if let Some(p) = visibility.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid(
                "visibility",
                format!("v[{p}] = {} is not strictly positive", visibility[p]),
            ));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid("alpha", format!("{alpha} is not strictly positive")));
        }
        Ok(Self {
            appeal,
            quality,
            visibility,
            alpha,
            transform,
        })
    }

    /// Market with `α = 1` and the identity transform.
    pub fn with_defaults(appeal: Vec<f64>, quality: Vec<f64>, visibility: Vec<f64>) -> Result<Self> {
        Self::new(appeal, quality, visibility, 1.0, InfluenceTransform::Identity)
    }

    pub fn n(&self) -> usize {
        self.appeal.len()
    }

    pub fn appeal(&self) -> &[f64] {
        &self.appeal
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    pub fn visibility(&self) -> &[f64] {
        &self.visibility
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn transform(&self) -> InfluenceTransform {
        self.transform
    }
}

/// Download and sampling counts after `step` participants.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarketState {
    pub downloads: Vec<u64>,
    pub samples: Vec<u64>,
    pub step: u64,
}

impl MarketState {
    pub fn zeros(n: usize) -> Self {
        Self {
            downloads: vec![0; n],
            samples: vec![0; n],
            step: 0,
        }
    }

    /// Builds a state from raw counts. Only the lengths are checked here;
    /// use [`MarketState::validate`] for the download/sample invariant.
    pub fn from_counts(downloads: Vec<u64>, samples: Vec<u64>, step: u64) -> Result<Self> {
        check_len("samples", downloads.len(), samples.len())?;
        Ok(Self {
            downloads,
            samples,
            step,
        })
    }

    pub fn n(&self) -> usize {
        self.downloads.len()
    }

    /// Checks `D_i <= S_i` for every song.
    pub fn validate(&self) -> Result<()> {
        for (song, (&d, &s)) in self.downloads.iter().zip(&self.samples).enumerate() {
            if d > s {
                return Err(MarketError::StateCorruption {
                    song,
                    downloads: d,
                    samples: s,
                });
            }
        }
        Ok(())
    }

    pub fn total_downloads(&self) -> u64 {
        self.downloads.iter().sum()
    }

    pub fn total_samples(&self) -> u64 {
        self.samples.iter().sum()
    }
}

/// A bijection between songs and playlist positions, stored in both
/// directions. Songs and positions are 0-based; position 0 is the top of the
/// playlist.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking {
    position_of: Vec<usize>,
    song_at: Vec<usize>,
}

impl Ranking {
    pub fn identity(n: usize) -> Self {
        Self {
            position_of: (0..n).collect(),
            song_at: (0..n).collect(),
        }
    }

    /// Builds a ranking from a playlist (`song_at[p]` is the song shown at `p`).
    pub fn from_playlist(song_at: Vec<usize>) -> Result<Self> {
        let position_of = invert(&song_at, "playlist")?;
        Ok(Self { position_of, song_at })
    }

    /// Builds a ranking from song positions (`position_of[i]` is where song `i` sits).
    pub fn from_positions(position_of: Vec<usize>) -> Result<Self> {
        let song_at = invert(&position_of, "ranking")?;
        Ok(Self { position_of, song_at })
    }

    pub fn len(&self) -> usize {
        self.song_at.len()
    }

    pub fn is_empty(&self) -> bool {
        self.song_at.is_empty()
    }

    pub fn position_of(&self, song: usize) -> usize {
        self.position_of[song]
    }

    pub fn song_at(&self, position: usize) -> usize {
        self.song_at[position]
    }

    pub fn positions(&self) -> &[usize] {
        &self.position_of
    }

    pub fn playlist(&self) -> &[usize] {
        &self.song_at
    }

    /// Relabels songs: song `i` of the result sits where song `relabel[i]` sat.
    pub fn relabeled(&self, relabel: &[usize]) -> Result<Self> {
        check_len("relabeling", self.len(), relabel.len())?;
        Self::from_positions(relabel.iter().map(|&s| self.position_of[s]).collect())
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = MarketError;

    fn try_from(playlist: Vec<usize>) -> Result<Self> {
        Self::from_playlist(playlist)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.song_at
    }
}

fn invert(perm: &[usize], what: &'static str) -> Result<Vec<usize>> {
    let n = perm.len();
    let mut inverse = vec![usize::MAX; n];
    for (k, &x) in perm.iter().enumerate() {
        if x >= n || inverse[x] != usize::MAX {
            return Err(invalid(what, format!("{perm:?} is not a permutation of 0..{n}")));
        }
        inverse[x] = k;
    }
    Ok(inverse)
}

/// Per-song attraction `a_i >= 0` with at least one positive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionVector(Vec<f64>);

impl AttractionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(invalid("attraction", format!("a[{i}] = {} is negative", values[i])));
        }
        if values.iter().all(|&a| a == 0.0) {
            return Err(MarketError::DegenerateMarket("every attraction is zero"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|a| a * c).collect())
    }

    /// The attraction after one more download of `song` under the identity transform.
    pub fn bumped(&self, song: usize) -> Self {
        let mut values = self.0.clone();
        values[song] += 1.0;
        Self(values)
    }
}

/// `a_i = α·A_i + f(D_i)` under social influence, `a_i = α·A_i` otherwise.
pub fn attraction(market: &Market, state: &MarketState, condition: Condition) -> Result<AttractionVector> {
    check_len("state", market.n(), state.n())?;
    let values = market
        .appeal
        .iter()
        .zip(&state.downloads)
        .map(|(&appeal, &d)| match condition {
            Condition::SocialInfluence => market.alpha * appeal + market.transform.apply(d),
            Condition::Independent => market.alpha * appeal,
        })
        .collect();
    AttractionVector::new(values)
}

fn check_instance(market: &Market, a: &AttractionVector, ranking: &Ranking) -> Result<()> {
    check_len("attraction", market.n(), a.len())?;
    check_len("ranking", market.n(), ranking.len())
}

/// `p_i = v[σ(i)] a_i / Σ_j v[σ(j)] a_j`.
pub fn sampling_probabilities(market: &Market, a: &AttractionVector, ranking: &Ranking) -> Result<Vec<f64>> {
    check_instance(market, a, ranking)?;
    let weights: Vec<f64> = a
        .values()
        .iter()
        .enumerate()
        .map(|(i, &ai)| market.visibility[ranking.position_of(i)] * ai)
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(MarketError::DegenerateMarket("sampling weights sum to zero"));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Expected downloads of the next participant under `ranking`, for an
/// arbitrary quality vector (true or estimated).
pub fn expected_downloads_for(
    visibility: &[f64],
    a: &AttractionVector,
    quality: &[f64],
    ranking: &Ranking,
) -> Result<f64> {
    let n = visibility.len();
    check_len("attraction", n, a.len())?;
    check_len("quality", n, quality.len())?;
    check_len("ranking", n, ranking.len())?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (&ai, &qi)) in a.values().iter().zip(quality).enumerate() {
        let w = visibility[ranking.position_of(i)] * ai;
        num += w * qi;
        den += w;
    }
    if den <= 0.0 {
        return Err(MarketError::DegenerateMarket("sampling weights sum to zero"));
    }
    Ok(num / den)
}

/// `E[D^σ] = Σ v[σ(i)] a_i q_i / Σ v[σ(i)] a_i` with the market's true quality.
pub fn expected_downloads(market: &Market, a: &AttractionVector, ranking: &Ranking) -> Result<f64> {
    expected_downloads_for(&market.visibility, a, &market.quality, ranking)
}

/// Expected downloads of participant `t+1` given the state at `t`, when
/// `sigma` is shown at `t` and `sigma_next` at `t+1`.
///
/// Each download branch bumps the downloaded song's attraction by one; the
/// no-download branch leaves the state unchanged and is evaluated under
/// `sigma_next`. With `sigma_next == sigma` this is exactly
/// `Σ_j P(j downloaded)·E[D^σ'](a + e_j) + (1 - E[D^σ])·E[D^σ]`.
pub fn one_step_expected_downloads(
    market: &Market,
    a: &AttractionVector,
    sigma: &Ranking,
    sigma_next: &Ranking,
) -> Result<f64> {
    one_step_expected_downloads_with(market, a, sigma, |_, _| Ok(sigma_next.clone()))
}

/// Like [`one_step_expected_downloads`], but the ranking used at `t+1` is
/// chosen per branch: `next(branch_attraction, downloaded_song)` is called
/// once for every download branch and once with `None` for the no-download
/// branch.
pub fn one_step_expected_downloads_with<F>(
    market: &Market,
    a: &AttractionVector,
    sigma: &Ranking,
    mut next: F,
) -> Result<f64>
where
    F: FnMut(&AttractionVector, Option<usize>) -> Result<Ranking>,
{
    if market.transform != InfluenceTransform::Identity {
        return Err(MarketError::UnsupportedTransform(market.transform));
    }
    check_instance(market, a, sigma)?;
    let v = &market.visibility;
    let q = &market.quality;
    let den: f64 = (0..market.n()).map(|i| v[sigma.position_of(i)] * a.values()[i]).sum();
    if den <= 0.0 {
        return Err(MarketError::DegenerateMarket("sampling weights sum to zero"));
    }
    let mut total = 0.0;
    for j in 0..market.n() {
        let p_download = v[sigma.position_of(j)] * a.values()[j] * q[j] / den;
        if p_download == 0.0 {
            continue;
        }
        let bumped = a.bumped(j);
        let sigma_next = next(&bumped, Some(j))?;
        check_len("ranking", market.n(), sigma_next.len())?;
        total += p_download * expected_downloads(market, &bumped, &sigma_next)?;
    }
    let current = expected_downloads(market, a, sigma)?;
    let stay = next(a, None)?;
    check_len("ranking", market.n(), stay.len())?;
    total += (1.0 - current) * expected_downloads(market, a, &stay)?;
    Ok(total)
}
