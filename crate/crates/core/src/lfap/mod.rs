//! Linear fractional assignment and the performance ranking.
//!
//! The performance ranking maximizes `Σ v[σ(i)] a_i q_i / Σ v[σ(i)] a_i` over
//! all rankings. With songs on one side of a bipartite graph and positions on
//! the other, costs `c_ij = -v_j a_i q_i` and weights `d_ij = v_j a_i`, it is
//! the perfect matching minimizing `Σ c / Σ d`, i.e. an LFAP instance.
//!
//! Two solvers are provided: Dinkelbach's parametric method over a
//! minimum-cost assignment oracle (any LFAP instance), and the sort-based
//! specialization in [`parametric`] that only applies to the ranking instance.
//! [`brute_force_ranking`] enumerates all `n!` rankings and serves as the
//! reference for both.

mod assignment;
pub mod parametric;

use itertools::Itertools;

pub use assignment::{AssignmentSolver, Hungarian};
pub use parametric::{
    parametric_value, positions_by_visibility, solve_performance_parametric, ParametricSolution, ParametricSolver,
};

use crate::error::{check_len, invalid, MarketError, Result};
use crate::model::{expected_downloads_for, AttractionVector, Market, Ranking};

/// Relative tolerance on the optimal reduced cost used to stop Dinkelbach.
pub const DINKELBACH_TOLERANCE: f64 = 1e-12;

/// Largest `n` accepted by the exhaustive oracle.
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// A square LFAP instance with row-major cost and weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LfapInstance {
    n: usize,
    cost: Vec<f64>,
    weight: Vec<f64>,
}

impl LfapInstance {
    /// Weights must be nonnegative and every perfect matching must have
    /// positive total weight, so that every ratio is defined.
    pub fn new(cost: Vec<Vec<f64>>, weight: Vec<Vec<f64>>) -> Result<Self> {
        let n = cost.len();
        if n == 0 {
            return Err(invalid("LFAP instance", "empty matrices"));
        }
        check_len("weight rows", n, weight.len())?;
        for (c, d) in cost.iter().zip(&weight) {
            check_len("cost row", n, c.len())?;
            check_len("weight row", n, d.len())?;
        }
        Self::from_flat(n, cost.concat(), weight.concat())
    }

    pub fn from_flat(n: usize, cost: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        check_len("cost entries", n * n, cost.len())?;
        check_len("weight entries", n * n, weight.len())?;
        if cost.iter().any(|c| !c.is_finite()) {
            return Err(invalid("LFAP costs", "non-finite entry"));
        }
        if weight.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(invalid("LFAP weights", "negative or non-finite entry"));
        }
        let instance = Self { n, cost, weight };
        let lightest = Hungarian.solve(n, &instance.weight);
        if instance.total(&instance.weight, &lightest) <= 0.0 {
            return Err(invalid("LFAP weights", "some perfect matching has zero total weight"));
        }
        Ok(instance)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weight[i * self.n + j]
    }

    fn total(&self, matrix: &[f64], matching: &[usize]) -> f64 {
        matching.iter().enumerate().map(|(i, &j)| matrix[i * self.n + j]).sum()
    }

    /// `Σ c / Σ d` over `matching` (`matching[i]` is the column of row `i`).
    pub fn ratio(&self, matching: &[usize]) -> f64 {
        self.total(&self.cost, matching) / self.total(&self.weight, matching)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LfapSolution {
    /// `matching[i]` is the column (position) assigned to row (song) `i`.
    pub matching: Vec<usize>,
    pub objective: f64,
    /// Dinkelbach iterates; nonincreasing for this minimization.
    pub lambdas: Vec<f64>,
}

/// Dinkelbach's method: repeatedly solve `min_M Σ_{M} (c - λ d)` with the
/// assignment oracle and move `λ` to the ratio of the minimizer, until the
/// optimal reduced cost is zero. Starts from the identity matching.
pub fn solve_lfap_dinkelbach<S: AssignmentSolver + ?Sized>(
    instance: &LfapInstance,
    oracle: &S,
) -> Result<LfapSolution> {
    let n = instance.n;
    let mut matching: Vec<usize> = (0..n).collect();
    let mut lambda = instance.ratio(&matching);
    let mut lambdas = vec![lambda];
    let mut reduced = vec![0.0; n * n];
    let cap = n + 2;
    for _ in 0..cap {
        for (r, (c, d)) in reduced.iter_mut().zip(instance.cost.iter().zip(&instance.weight)) {
            *r = c - lambda * d;
        }
        let candidate = oracle.solve(n, &reduced);
        let value = instance.total(&reduced, &candidate);
        let scale: f64 = candidate
            .iter()
            .enumerate()
            .map(|(i, &j)| instance.cost(i, j).abs() + lambda.abs() * instance.weight(i, j))
            .sum();
        if value >= -DINKELBACH_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            return Ok(LfapSolution {
                matching,
                objective: lambda,
                lambdas,
            });
        }
        let next = instance.ratio(&candidate);
        if next >= lambda {
            return Ok(LfapSolution {
                matching,
                objective: lambda,
                lambdas,
            });
        }
        lambda = next;
        lambdas.push(lambda);
        matching = candidate;
    }
    Err(MarketError::IterationLimit(cap))
}

/// The LFAP instance whose optimum is the performance ranking:
/// `c_ij = -v_j a_i q_i`, `d_ij = v_j a_i`.
pub fn performance_instance(a: &AttractionVector, q: &[f64], v: &[f64]) -> Result<LfapInstance> {
    let n = a.len();
    check_len("quality", n, q.len())?;
    check_len("visibility", n, v.len())?;
    let mut cost = Vec::with_capacity(n * n);
    let mut weight = Vec::with_capacity(n * n);
    for (&ai, &qi) in a.values().iter().zip(q) {
        for &vj in v {
            cost.push(-vj * ai * qi);
            weight.push(vj * ai);
        }
    }
    LfapInstance::from_flat(n, cost, weight)
}

/// Performance ranking through the general LFAP path.
///
/// The ranking is returned in canonical form: among optimal rankings, the
/// one produced by the sort rule at the optimal value, so songs with equal
/// keys place the lower index on the more visible position. The raw LFAP
/// solution is returned alongside.
pub fn performance_ranking_lfap(market: &Market, a: &AttractionVector, q: &[f64]) -> Result<(Ranking, LfapSolution)> {
    let instance = performance_instance(a, q, market.visibility())?;
    let solution = solve_lfap_dinkelbach(&instance, &Hungarian)?;
    let optimum = -solution.objective;
    let (_, canonical) = parametric_value(a, q, market.visibility(), optimum)?;
    let raw = Ranking::from_positions(solution.matching.clone())?;
    let canonical_value = expected_downloads_for(market.visibility(), a, q, &canonical)?;
    let raw_value = expected_downloads_for(market.visibility(), a, q, &raw)?;
    let ranking = if canonical_value >= raw_value - DINKELBACH_TOLERANCE * (1.0 + raw_value.abs()) {
        canonical
    } else {
        raw
    };
    Ok((ranking, solution))
}

/// Ranking maximizing expected downloads for quality vector `q` (true or
/// estimated), computed by Dinkelbach over the Hungarian oracle.
pub fn performance_ranking(market: &Market, a: &AttractionVector, q: &[f64]) -> Result<Ranking> {
    performance_ranking_lfap(market, a, q).map(|(r, _)| r)
}

/// Exhaustive maximization of `objective` over all rankings of `n` songs.
/// Rankings are visited in lexicographic order of their position vectors and
/// the first maximizer wins.
pub fn brute_force_ranking<F>(n: usize, mut objective: F) -> Result<(Ranking, f64)>
where
    F: FnMut(&Ranking) -> Result<f64>,
{
    if n > BRUTE_FORCE_LIMIT {
        return Err(MarketError::SizeGuard {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best: Option<(Ranking, f64)> = None;
    for positions in (0..n).permutations(n) {
        let ranking = Ranking::from_positions(positions)?;
        let value = objective(&ranking)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((ranking, value));
        }
    }
    best.ok_or_else(|| invalid("brute force", "no songs"))
}

/// Exhaustive performance ranking: maximizes expected downloads directly.
pub fn brute_force_performance(a: &AttractionVector, q: &[f64], v: &[f64]) -> Result<(Ranking, f64)> {
    check_len("quality", a.len(), q.len())?;
    check_len("visibility", a.len(), v.len())?;
    brute_force_ranking(a.len(), |r| expected_downloads_for(v, a, q, r))
}
