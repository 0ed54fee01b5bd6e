//! Sort-based solver for the performance ranking.
//!
//! For a fixed `λ`, `f(λ) = max_π Σ_p v_p a_{π_p} (q_{π_p} - λ)` is attained by
//! placing songs in decreasing order of `a_i (q_i - λ)` on positions in
//! decreasing order of visibility. As a maximum of affine functions of `λ`
//! with negative slopes, `f` is convex and strictly decreasing; its unique
//! zero is the optimal expected download value, so Dinkelbach updates
//! `λ ← ratio(π_λ)` reach it in a few sorts.

use crate::error::{check_len, MarketError, Result};
use crate::model::{AttractionVector, Ranking};

/// Relative tolerance on `f(λ)` used as the Dinkelbach stopping rule.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-12;

/// Relative tolerance under which two sort keys count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSolution {
    pub ranking: Ranking,
    /// Expected downloads of `ranking`.
    pub objective: f64,
    /// Dinkelbach iterates, starting from the identity playlist's ratio.
    pub lambdas: Vec<f64>,
}

/// Positions sorted by visibility, most visible first, ties by position index.
pub fn positions_by_visibility(v: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&x, &y| v[y].total_cmp(&v[x]).then(x.cmp(&y)));
    order
}

/// Reusable solver for one visibility profile. Keeps its scratch buffers
/// across calls so the simulator can re-rank at every step cheaply.
#[derive(Debug, Clone)]
pub struct ParametricSolver {
    visibility: Vec<f64>,
    position_order: Vec<usize>,
    keys: Vec<f64>,
    songs: Vec<usize>,
}

impl ParametricSolver {
    pub fn new(visibility: &[f64]) -> Self {
        Self {
            visibility: visibility.to_vec(),
            position_order: positions_by_visibility(visibility),
            keys: vec![0.0; visibility.len()],
            songs: (0..visibility.len()).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.visibility.len()
    }

    fn check(&self, a: &AttractionVector, q: &[f64]) -> Result<()> {
        check_len("attraction", self.n(), a.len())?;
        check_len("quality", self.n(), q.len())
    }

    /// Writes the playlist attaining `f(λ)` into `playlist` and returns `f(λ)`.
    fn sort_at(&mut self, a: &[f64], q: &[f64], lambda: f64, playlist: &mut [usize]) -> f64 {
        let n = self.n();
        let mut a_max = 0.0f64;
        for i in 0..n {
            self.keys[i] = a[i] * (q[i] - lambda);
            a_max = a_max.max(a[i]);
        }
        let keys = &self.keys;
        self.songs.clear();
        self.songs.extend(0..n);
        self.songs
            .sort_unstable_by(|&x, &y| keys[y].total_cmp(&keys[x]).then(x.cmp(&y)));

        // Runs of keys closer than the tie tolerance are ordered by song index.
        let tol = TIE_TOLERANCE * a_max * (1.0 + lambda.abs());
        let mut start = 0;
        for k in 1..=n {
            if k == n || keys[self.songs[k - 1]] - keys[self.songs[k]] > tol {
                if k - start > 1 {
                    self.songs[start..k].sort_unstable();
                }
                start = k;
            }
        }

        let mut value = 0.0;
        for (rank, &song) in self.songs.iter().enumerate() {
            let p = self.position_order[rank];
            playlist[p] = song;
            value += self.visibility[p] * keys[song];
        }
        value
    }

    fn ratio(&self, a: &[f64], q: &[f64], playlist: &[usize]) -> Result<(f64, f64)> {
        let (mut num, mut den) = (0.0, 0.0);
        for (p, &song) in playlist.iter().enumerate() {
            let w = self.visibility[p] * a[song];
            num += w * q[song];
            den += w;
        }
        if den <= 0.0 {
            return Err(MarketError::DegenerateMarket("sampling weights sum to zero"));
        }
        Ok((num / den, den))
    }

    /// `f(λ)` and the playlist attaining it.
    pub fn value(&mut self, a: &AttractionVector, q: &[f64], lambda: f64) -> Result<(f64, Ranking)> {
        self.check(a, q)?;
        let mut playlist = vec![0; self.n()];
        let f = self.sort_at(a.values(), q, lambda, &mut playlist);
        Ok((f, Ranking::from_playlist(playlist)?))
    }

    /// Dinkelbach iteration starting from the identity playlist.
    pub fn solve(&mut self, a: &AttractionVector, q: &[f64]) -> Result<ParametricSolution> {
        self.check(a, q)?;
        let n = self.n();
        let av = a.values();
        let mut current: Vec<usize> = (0..n).collect();
        let (mut lambda, _) = self.ratio(av, q, &current)?;
        let mut lambdas = vec![lambda];
        let mut playlist = vec![0; n];
        let cap = n + 2;
        for _ in 0..cap {
            let f = self.sort_at(av, q, lambda, &mut playlist);
            let (next, den) = self.ratio(av, q, &playlist)?;
            let scale = den * (1.0 + lambda.abs());
            if f <= CONVERGENCE_TOLERANCE * scale {
                return Ok(ParametricSolution {
                    ranking: Ranking::from_playlist(playlist)?,
                    objective: next,
                    lambdas,
                });
            }
            if next <= lambda {
                // f(λ) > 0 guarantees progress in exact arithmetic; keep the
                // better playlist when rounding says otherwise.
                return Ok(ParametricSolution {
                    ranking: Ranking::from_playlist(current)?,
                    objective: lambda,
                    lambdas,
                });
            }
            lambda = next;
            lambdas.push(lambda);
            current.copy_from_slice(&playlist);
        }
        Err(MarketError::IterationLimit(cap))
    }
}

/// `f(λ) = max_π Σ_p v_p a_{π_p} (q_{π_p} - λ)` and an attaining playlist.
pub fn parametric_value(a: &AttractionVector, q: &[f64], v: &[f64], lambda: f64) -> Result<(f64, Ranking)> {
    check_len("visibility", a.len(), v.len())?;
    ParametricSolver::new(v).value(a, q, lambda)
}

/// Performance ranking by Dinkelbach iteration over the sort rule.
pub fn solve_performance_parametric(a: &AttractionVector, q: &[f64], v: &[f64]) -> Result<ParametricSolution> {
    check_len("visibility", a.len(), v.len())?;
    ParametricSolver::new(v).solve(a, q)
}
