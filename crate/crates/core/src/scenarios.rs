//! Market generators: the visibility profile and the two appeal/quality
//! settings (independent Gaussian, and appeal negatively correlated with
//! quality), plus literal scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::model::{InfluenceTransform, Market};

/// Power-law visibility with a linear rise over the last few positions.
///
/// `v_p = p^-decay` for `p <= n - uptick_len` (1-based), then rising linearly
/// to `uptick_gain · v_{n - uptick_len}` at the bottom position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VisibilityProfile {
    pub decay: f64,
    pub uptick_len: usize,
    pub uptick_gain: f64,
}

impl Default for VisibilityProfile {
    fn default() -> Self {
        Self {
            decay: 0.8,
            uptick_len: 5,
            uptick_gain: 1.2,
        }
    }
}

impl VisibilityProfile {
    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(invalid("visibility profile", "n must be at least 1"));
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return Err(invalid("visibility profile", "decay must be nonnegative"));
        }
        if !(self.uptick_gain.is_finite() && self.uptick_gain > 0.0) {
            return Err(invalid("visibility profile", "uptick gain must be positive"));
        }
        if n == 1 {
            return Ok(vec![1.0]);
        }
        if n < self.uptick_len + 1 {
            return Err(invalid(
                "visibility profile",
                format!(
                    "n = {n} leaves no room for a bottom uptick of {} positions",
                    self.uptick_len
                ),
            ));
        }
        let head = n - self.uptick_len;
        let mut v: Vec<f64> = (1..=head).map(|p| (p as f64).powf(-self.decay)).collect();
        let base = v[head - 1];
        for k in 1..=self.uptick_len {
            let t = k as f64 / self.uptick_len as f64;
            v.push(base * (1.0 + (self.uptick_gain - 1.0) * t));
        }
        Ok(v)
    }
}

/// Default profile evaluated at `n`.
pub fn visibility_profile(n: usize) -> Result<Vec<f64>> {
    VisibilityProfile::default().values(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongAttributes {
    pub appeal: Vec<f64>,
    pub quality: Vec<f64>,
}

/// Rescales to `[0, 1]` with the minimum at 0 and the maximum at 1.
fn min_max_normalize(x: &mut [f64]) {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    for value in x.iter_mut() {
        *value = if span > 0.0 { (*value - lo) / span } else { 0.5 };
    }
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Independent standard-normal quality and appeal, each min-max normalized.
/// Quality is drawn first.
pub fn gaussian_setting(n: usize, seed: u64) -> Result<SongAttributes> {
    if n < 2 {
        return Err(invalid("gaussian setting", "needs at least 2 songs"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quality = normal_vector(&mut rng, n);
    let mut appeal = normal_vector(&mut rng, n);
    min_max_normalize(&mut quality);
    min_max_normalize(&mut appeal);
    Ok(SongAttributes { appeal, quality })
}

/// Default jitter of the mirrored appeal.
pub const NEGATIVE_CORRELATION_JITTER: f64 = 0.05;

/// Quality as in [`gaussian_setting`]; appeal mirrors it with default jitter.
pub fn negative_correlation_setting(n: usize, seed: u64) -> Result<SongAttributes> {
    negative_correlation_setting_with_jitter(n, seed, NEGATIVE_CORRELATION_JITTER)
}

/// `A_i = clamp(1 - q_i + jitter·z_i, 0, 1)`, then min-max normalized.
pub fn negative_correlation_setting_with_jitter(n: usize, seed: u64, jitter: f64) -> Result<SongAttributes> {
    if n < 2 {
        return Err(invalid("negative-correlation setting", "needs at least 2 songs"));
    }
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(invalid("jitter", "must be nonnegative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quality = normal_vector(&mut rng, n);
    min_max_normalize(&mut quality);
    let noise = normal_vector(&mut rng, n);
    let mut appeal: Vec<f64> = quality
        .iter()
        .zip(&noise)
        .map(|(q, z)| (1.0 - q + jitter * z).clamp(0.0, 1.0))
        .collect();
    min_max_normalize(&mut appeal);
    Ok(SongAttributes { appeal, quality })
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("second sample", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(invalid("correlation", "needs at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn default_alpha() -> f64 {
    1.0
}

fn default_jitter() -> f64 {
    NEGATIVE_CORRELATION_JITTER
}

/// How the songs of a scenario are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioKind {
    #[serde(alias = "gaussian")]
    GaussianIndependent { n: usize, seed: u64 },
    NegativeCorrelation {
        n: usize,
        seed: u64,
        #[serde(default = "default_jitter")]
        jitter: f64,
    },
    Explicit {
        appeal: Vec<f64>,
        quality: Vec<f64>,
        /// Falls back to the scenario's visibility profile when absent.
        #[serde(default)]
        visibility: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub songs: ScenarioKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub transform: InfluenceTransform,
    #[serde(default)]
    pub visibility_profile: VisibilityProfile,
}

impl ScenarioSpec {
    pub fn new(songs: ScenarioKind) -> Self {
        Self {
            songs,
            alpha: default_alpha(),
            transform: InfluenceTransform::Identity,
            visibility_profile: VisibilityProfile::default(),
        }
    }

    pub fn gaussian(n: usize, seed: u64) -> Self {
        Self::new(ScenarioKind::GaussianIndependent { n, seed })
    }

    pub fn negative_correlation(n: usize, seed: u64) -> Self {
        Self::new(ScenarioKind::NegativeCorrelation {
            n,
            seed,
            jitter: NEGATIVE_CORRELATION_JITTER,
        })
    }

    pub fn explicit(appeal: Vec<f64>, quality: Vec<f64>, visibility: Vec<f64>) -> Self {
        Self::new(ScenarioKind::Explicit {
            appeal,
            quality,
            visibility: Some(visibility),
        })
    }

    /// Appeal, quality and visibility vectors.
    pub fn generate(&self) -> Result<(SongAttributes, Vec<f64>)> {
        let songs = match &self.songs {
            ScenarioKind::GaussianIndependent { n, seed } => gaussian_setting(*n, *seed)?,
            ScenarioKind::NegativeCorrelation { n, seed, jitter } => {
                negative_correlation_setting_with_jitter(*n, *seed, *jitter)?
            }
            ScenarioKind::Explicit { appeal, quality, .. } => SongAttributes {
                appeal: appeal.clone(),
                quality: quality.clone(),
            },
        };
        let visibility = match &self.songs {
            ScenarioKind::Explicit {
                visibility: Some(v), ..
            } => v.clone(),
            _ => self.visibility_profile.values(songs.quality.len())?,
        };
        Ok((songs, visibility))
    }

    pub fn build(&self) -> Result<Market> {
        let (songs, visibility) = self.generate()?;
        Market::new(songs.appeal, songs.quality, visibility, self.alpha, self.transform)
    }

    /// The same market written out literally.
    pub fn to_explicit(&self) -> Result<Self> {
        let (songs, visibility) = self.generate()?;
        Ok(Self {
            songs: ScenarioKind::Explicit {
                appeal: songs.appeal,
                quality: songs.quality,
                visibility: Some(visibility),
            },
            ..self.clone()
        })
    }
}
