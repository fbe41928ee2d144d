//! Spherical clustering on the positive unit simplex.
//!
//! Two alternating procedures share the same assignment step and differ in
//! the centroid update:
//!
//! * k-means (linear reward `x^T y`): centroids are normalized cluster
//!   means;
//! * k-principal-components (quadratic reward `(x^T y)^2`): centroids are
//!   nonnegative principal eigenvectors of per-cluster second-moment
//!   matrices.
//!
//! Both updates never decrease the empirical reward, so the alternation
//! converges. An exhaustive partition-space search over the distinct atoms
//! of a sample provides the exact optimum on small instances; by duality
//! the centroid-space and partition-space optima coincide.

use crate::angle::{normalize, AngularSample, UnitAngle};
use crate::eigen::{principal_eigenpair, MomentMatrix};
use crate::error::{Error, Result};
use crate::mat::SquareMatrix;
use crate::rng::{subseed, unit_rng};
use rand::seq::index::sample as index_sample;
use rayon::prelude::*;

/// Which centroid update the alternation uses; also fixes the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KMeans,
    Kpc,
}

impl Method {
    pub fn reward(self) -> Reward {
        match self {
            Method::KMeans => Reward::Linear,
            Method::Kpc => Reward::Quadratic,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Kpc => "kpc",
        }
    }
}

/// Reward exponent: `p = 1` or `p = 2` in `(x^T y)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reward {
    Linear,
    Quadratic,
}

impl Reward {
    #[inline]
    fn apply(self, dot: f64) -> f64 {
        match self {
            Reward::Linear => dot,
            Reward::Quadratic => dot * dot,
        }
    }
}

/// Cluster labels, 0-based, one per sample point. A point's label is the
/// smallest index attaining the maximal dot product with the centroids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Assigns every point to the closest centroid, breaking ties in favour of
/// the smallest centroid index.
pub fn assign(sample: &AngularSample, centroids: &[UnitAngle]) -> Result<Assignment> {
    if centroids.is_empty() {
        return Err(Error::InvalidInput("no centroids".into()));
    }
    for c in centroids {
        if c.dim() != sample.dim() {
            return Err(Error::DimMismatch {
                expected: sample.dim(),
                got: c.dim(),
            });
        }
    }
    let labels = sample
        .angles()
        .iter()
        .map(|p| {
            let mut best = 0usize;
            let mut best_dot = centroids[0].dot(p);
            for (i, c) in centroids.iter().enumerate().skip(1) {
                let d = c.dot(p);
                if d > best_dot {
                    best_dot = d;
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok(Assignment {
        labels,
        k: centroids.len(),
    })
}

/// k-means update: each centroid becomes the normalized mean of its
/// cluster; empty clusters keep their previous centroid.
pub fn kmeans_update(
    sample: &AngularSample,
    assignment: &Assignment,
    old_centroids: &[UnitAngle],
) -> Result<Vec<UnitAngle>> {
    check_consistent(sample, assignment, old_centroids)?;
    let d = sample.dim();
    let k = old_centroids.len();
    let mut sums = vec![vec![0.0f64; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in sample.angles().iter().zip(assignment.labels()) {
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(p.entries()) {
            *s += v;
        }
    }
    (0..k)
        .map(|i| {
            if counts[i] == 0 {
                Ok(old_centroids[i].clone())
            } else {
                normalize(&sums[i])
            }
        })
        .collect()
}

/// k-principal-components update: each centroid becomes the nonnegative
/// principal eigenvector of `Sigma_i = (1/n) sum_u theta_u theta_u^T
/// 1{g_u = i}`; empty clusters keep their previous centroid.
pub fn kpc_update(
    sample: &AngularSample,
    assignment: &Assignment,
    old_centroids: &[UnitAngle],
) -> Result<Vec<UnitAngle>> {
    check_consistent(sample, assignment, old_centroids)?;
    let d = sample.dim();
    let k = old_centroids.len();
    let n = sample.len() as f64;
    let mut sigmas = vec![SquareMatrix::zeros(d); k];
    let mut counts = vec![0usize; k];
    for (p, &l) in sample.angles().iter().zip(assignment.labels()) {
        counts[l] += 1;
        sigmas[l].add_outer(p.entries(), 1.0 / n);
    }
    sigmas
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            if counts[i] == 0 {
                Ok(old_centroids[i].clone())
            } else {
                s.symmetrize();
                let sigma = MomentMatrix::from_gram_unchecked(s);
                let (_, v) = principal_eigenpair(&sigma)?;
                Ok(v)
            }
        })
        .collect()
}

fn check_consistent(
    sample: &AngularSample,
    assignment: &Assignment,
    centroids: &[UnitAngle],
) -> Result<()> {
    if assignment.labels().len() != sample.len() {
        return Err(Error::DimMismatch {
            expected: sample.len(),
            got: assignment.labels().len(),
        });
    }
    if assignment.k() != centroids.len() {
        return Err(Error::DimMismatch {
            expected: centroids.len(),
            got: assignment.k(),
        });
    }
    for c in centroids {
        if c.dim() != sample.dim() {
            return Err(Error::DimMismatch {
                expected: sample.dim(),
                got: c.dim(),
            });
        }
    }
    if assignment.labels().iter().any(|&l| l >= centroids.len()) {
        return Err(Error::InvalidInput("label out of range".into()));
    }
    Ok(())
}

/// Empirical reward `(1/n) sum_u max_i (theta_u^T x_i)^p`. The clustering
/// objective is one minus this value.
pub fn cost(sample: &AngularSample, centroids: &[UnitAngle], reward: Reward) -> Result<f64> {
    if centroids.is_empty() {
        return Err(Error::InvalidInput("no centroids".into()));
    }
    for c in centroids {
        if c.dim() != sample.dim() {
            return Err(Error::DimMismatch {
                expected: sample.dim(),
                got: c.dim(),
            });
        }
    }
    let mut total = 0.0;
    for p in sample.angles() {
        let mut best = 0.0f64;
        for c in centroids {
            let r = reward.apply(c.dot(p));
            if r > best {
                best = r;
            }
        }
        total += best;
    }
    Ok(total / sample.len() as f64)
}

/// Parameters of the restart driver.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub k: usize,
    pub method: Method,
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl FitConfig {
    pub fn new(k: usize, method: Method, restarts: usize, seed: u64) -> Self {
        FitConfig {
            k,
            method,
            restarts,
            seed,
            max_iter: 300,
            tol: 1e-10,
        }
    }
}

/// A fitted clustering: centroids in canonical order, the induced
/// assignment, and the reward value under the model's own centroids.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: Vec<UnitAngle>,
    pub assignment: Assignment,
    pub cost_value: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    /// Reward after the initial centroids and after every update step.
    pub reward_trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart_index: usize,
}

/// Runs `restarts` independent alternations of assignment and centroid
/// update, each seeded from its own deterministic substream of `seed`, and
/// returns the run with the largest final reward (ties to the lowest
/// restart index). Initial centroids are k distinct sample points drawn
/// without replacement.
pub fn fit(sample: &AngularSample, config: &FitConfig) -> Result<ClusterModel> {
    let n = sample.len();
    if config.k < 1 || config.k > n {
        return Err(Error::InvalidInput(format!(
            "k must lie in 1..={n}, got {}",
            config.k
        )));
    }
    if config.restarts < 1 {
        return Err(Error::InvalidInput("restarts must be >= 1".into()));
    }

    let runs: Vec<Result<ClusterModel>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| fit_single(sample, config, r))
        .collect();

    let mut best: Option<ClusterModel> = None;
    for run in runs {
        let run = run?;
        let better = match &best {
            None => true,
            Some(b) => run.cost_value > b.cost_value,
        };
        if better {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn fit_single(sample: &AngularSample, config: &FitConfig, restart: usize) -> Result<ClusterModel> {
    let mut rng = unit_rng(subseed(config.seed, restart as u64));
    let reward_kind = config.method.reward();
    let n = sample.len();

    let chosen = index_sample(&mut rng, n, config.k);
    let mut centroids: Vec<UnitAngle> = chosen
        .iter()
        .map(|i| sample.angles()[i].clone())
        .collect();

    let mut reward = cost(sample, &centroids, reward_kind)?;
    let mut trace = vec![reward];
    let mut iterations = 0usize;
    let mut converged = false;

    for _ in 0..config.max_iter {
        let asg = assign(sample, &centroids)?;
        centroids = match config.method {
            Method::KMeans => kmeans_update(sample, &asg, &centroids)?,
            Method::Kpc => kpc_update(sample, &asg, &centroids)?,
        };
        let new_reward = cost(sample, &centroids, reward_kind)?;
        iterations += 1;
        trace.push(new_reward);
        let improvement = new_reward - reward;
        reward = new_reward;
        if improvement < config.tol {
            converged = true;
            break;
        }
    }

    // Canonical output order: clusters sorted by the index of their
    // smallest assigned point; empty clusters last, keeping relative
    // order. Re-assign afterwards so labels follow the reordered
    // centroids.
    let asg = assign(sample, &centroids)?;
    let mut first_point = vec![usize::MAX; config.k];
    for (u, &l) in asg.labels().iter().enumerate() {
        if first_point[l] == usize::MAX {
            first_point[l] = u;
        }
    }
    let mut order: Vec<usize> = (0..config.k).collect();
    order.sort_by_key(|&i| (first_point[i], i));
    let centroids: Vec<UnitAngle> = order.into_iter().map(|i| centroids[i].clone()).collect();

    let assignment = assign(sample, &centroids)?;
    let cost_value = cost(sample, &centroids, reward_kind)?;

    Ok(ClusterModel {
        centroids,
        assignment,
        cost_value,
        method: config.method,
        iterations,
        converged,
        reward_trace: trace,
        restart_index: restart,
    })
}

/// Exact optimum found by enumerating partitions of the distinct atoms.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub reward: f64,
    pub centroids: Vec<UnitAngle>,
    pub assignment: Assignment,
}

/// Feasibility cap on the number of distinct atoms the oracle enumerates.
pub const ORACLE_MAX_ATOMS: usize = 12;

/// Enumerates every partition of the sample's distinct atoms into at most
/// `k` blocks, evaluates the optimal per-block reward (norm of the block
/// mean for the linear reward, principal eigenvalue of the block
/// second-moment matrix for the quadratic one) and returns the maximum.
/// Atoms are grouped by exact bit equality of their entries.
pub fn exhaustive_oracle(
    sample: &AngularSample,
    k: usize,
    reward: Reward,
) -> Result<OracleSolution> {
    if k < 1 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let n = sample.len();
    let mut atoms: Vec<UnitAngle> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut atom_of_point: Vec<usize> = Vec::with_capacity(n);
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    for p in sample.angles() {
        let key: Vec<u64> = p.entries().iter().map(|v| v.to_bits()).collect();
        let id = *index.entry(key).or_insert_with(|| {
            atoms.push(p.clone());
            counts.push(0);
            atoms.len() - 1
        });
        counts[id] += 1;
        atom_of_point.push(id);
    }
    if atoms.len() > ORACLE_MAX_ATOMS {
        return Err(Error::Infeasible(format!(
            "{} distinct atoms exceed the enumeration cap {ORACLE_MAX_ATOMS}",
            atoms.len()
        )));
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

    let best = oracle_weighted(&atoms, &weights, k, reward)?;

    // Rebuild centroids for the original sample and derive the
    // tie-consistent assignment from them.
    let centroids = best.centroids;
    let assignment = assign(sample, &centroids)?;
    Ok(OracleSolution {
        reward: best.reward,
        centroids,
        assignment,
    })
}

pub(crate) struct WeightedOracle {
    pub reward: f64,
    pub centroids: Vec<UnitAngle>,
}

/// Partition-space search over weighted atoms. Enumerates restricted
/// growth strings with at most `k` blocks (block labels appear in order of
/// first use), which covers every partition into at most `k` nonempty
/// blocks exactly once.
pub(crate) fn oracle_weighted(
    atoms: &[UnitAngle],
    weights: &[f64],
    k: usize,
    reward: Reward,
) -> Result<WeightedOracle> {
    let m = atoms.len();
    if m == 0 || m != weights.len() {
        return Err(Error::InvalidInput(
            "atoms and weights must be nonempty and of equal length".into(),
        ));
    }
    if m > ORACLE_MAX_ATOMS {
        return Err(Error::Infeasible(format!(
            "{m} atoms exceed the enumeration cap {ORACLE_MAX_ATOMS}"
        )));
    }
    let d = atoms[0].dim();

    let mut labels = vec![0usize; m];
    let mut best_reward = f64::NEG_INFINITY;
    let mut best_labels = vec![0usize; m];

    // Depth-first over restricted growth strings.
    fn rec(
        i: usize,
        used: usize,
        labels: &mut Vec<usize>,
        best_reward: &mut f64,
        best_labels: &mut Vec<usize>,
        atoms: &[UnitAngle],
        weights: &[f64],
        k: usize,
        reward: Reward,
        d: usize,
    ) {
        let m = atoms.len();
        if i == m {
            let value = partition_value(labels, used, atoms, weights, reward, d);
            if value > *best_reward {
                *best_reward = value;
                best_labels.clone_from(labels);
            }
            return;
        }
        let cap = (used + 1).min(k);
        for b in 0..cap {
            labels[i] = b;
            let nused = used.max(b + 1);
            rec(
                i + 1,
                nused,
                labels,
                best_reward,
                best_labels,
                atoms,
                weights,
                k,
                reward,
                d,
            );
        }
    }
    rec(
        0,
        0,
        &mut labels,
        &mut best_reward,
        &mut best_labels,
        atoms,
        weights,
        k,
        reward,
        d,
    );

    let used = best_labels.iter().max().copied().unwrap_or(0) + 1;
    let mut centroids: Vec<UnitAngle> = Vec::with_capacity(k);
    for b in 0..used {
        let members: Vec<usize> = (0..m).filter(|&i| best_labels[i] == b).collect();
        let c = block_centroid(&members, atoms, weights, reward, d)?;
        centroids.push(c);
    }
    // Pad to k by repeating the first centroid; a duplicated centroid
    // leaves every point's maximal dot product unchanged.
    while centroids.len() < k {
        centroids.push(centroids[0].clone());
    }

    Ok(WeightedOracle {
        reward: best_reward,
        centroids,
    })
}

fn partition_value(
    labels: &[usize],
    used: usize,
    atoms: &[UnitAngle],
    weights: &[f64],
    reward: Reward,
    d: usize,
) -> f64 {
    let mut total = 0.0;
    match reward {
        Reward::Linear => {
            let mut sums = vec![vec![0.0f64; d]; used];
            for (i, &b) in labels.iter().enumerate() {
                for (s, &v) in sums[b].iter_mut().zip(atoms[i].entries()) {
                    *s += weights[i] * v;
                }
            }
            for s in &sums {
                total += s.iter().map(|x| x * x).sum::<f64>().sqrt();
            }
        }
        Reward::Quadratic => {
            for b in 0..used {
                let mut sigma = SquareMatrix::zeros(d);
                let mut any = false;
                for (i, &l) in labels.iter().enumerate() {
                    if l == b {
                        sigma.add_outer(atoms[i].entries(), weights[i]);
                        any = true;
                    }
                }
                if any {
                    sigma.symmetrize();
                    let mm = MomentMatrix::from_gram_unchecked(sigma);
                    if let Ok((l1, _)) = principal_eigenpair(&mm) {
                        total += l1;
                    }
                }
            }
        }
    }
    total
}

fn block_centroid(
    members: &[usize],
    atoms: &[UnitAngle],
    weights: &[f64],
    reward: Reward,
    d: usize,
) -> Result<UnitAngle> {
    match reward {
        Reward::Linear => {
            let mut s = vec![0.0f64; d];
            for &i in members {
                for (x, &v) in s.iter_mut().zip(atoms[i].entries()) {
                    *x += weights[i] * v;
                }
            }
            normalize(&s)
        }
        Reward::Quadratic => {
            let mut sigma = SquareMatrix::zeros(d);
            for &i in members {
                sigma.add_outer(atoms[i].entries(), weights[i]);
            }
            sigma.symmetrize();
            let mm = MomentMatrix::from_gram_unchecked(sigma);
            let (_, v) = principal_eigenpair(&mm)?;
            Ok(v)
        }
    }
}
