//! Numerical verification of the structural facts the clustering methods
//! rest on: balancedness bounds for the angular mean, block spectra of
//! face-supported laws, the sufficient condition for on-face optima of
//! the quadratic reward, the size-balance condition for the linear
//! reward, and the scalar inequality behind the orthogonal-split argument.

use crate::angle::{face_angle, FacePartition, UnitAngle};
use crate::clustering::{oracle_weighted, Reward};
use crate::eigen::{top_k_eigenvalues, MomentMatrix};
use crate::error::{Error, Result};

/// Tolerance for "this atom lies in that face": entries outside the face
/// must not exceed this in absolute value.
pub const FACE_SUPPORT_TOL: f64 = 1e-12;
/// Tolerance for the balancing condition on coordinate means.
pub const BALANCE_TOL: f64 = 1e-10;
/// Face angle below which an oracle centroid counts as on-face.
pub const ON_FACE_TOL: f64 = 1e-8;

/// A discrete distribution on the positive unit simplex: distinct atoms
/// with positive weights summing to one.
#[derive(Debug, Clone)]
pub struct DiscreteAngularLaw {
    atoms: Vec<UnitAngle>,
    weights: Vec<f64>,
}

impl DiscreteAngularLaw {
    pub fn new(atoms: Vec<UnitAngle>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidInput(
                "atoms and weights must be nonempty and of equal length".into(),
            ));
        }
        let d = atoms[0].dim();
        for a in &atoms {
            if a.dim() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!("weight {w} must be positive")));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for a in &atoms {
            let key: Vec<u64> = a.entries().iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::InvalidInput("atoms must be pairwise distinct".into()));
            }
        }
        Ok(DiscreteAngularLaw { atoms, weights })
    }

    pub fn atoms(&self) -> &[UnitAngle] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }
}

/// Exact first and second moments of a discrete law.
#[derive(Debug, Clone)]
pub struct LawMoments {
    pub mean: Vec<f64>,
    pub sigma: MomentMatrix,
    /// The common coordinate mean when the law is balanced within
    /// [`BALANCE_TOL`], otherwise `None`.
    pub mu: Option<f64>,
}

pub fn law_moments(law: &DiscreteAngularLaw) -> LawMoments {
    let d = law.dim();
    let mut mean = vec![0.0f64; d];
    for (a, &w) in law.atoms().iter().zip(law.weights()) {
        for (m, &v) in mean.iter_mut().zip(a.entries()) {
            *m += w * v;
        }
    }
    let sigma = MomentMatrix::from_weighted_angles(law.atoms(), law.weights())
        .expect("law invariants imply valid moment matrix");
    let lo = mean.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mu = if hi - lo <= BALANCE_TOL {
        Some(mean.iter().sum::<f64>() / d as f64)
    } else {
        None
    };
    LawMoments { mean, sigma, mu }
}

/// Result of checking `1/d <= mu <= 1/sqrt(d)` and the attainment
/// characterizations.
#[derive(Debug, Clone)]
pub struct MuBoundsReport {
    pub mu: f64,
    pub lower: f64,
    pub upper: f64,
    pub bounds_hold: bool,
    pub lower_attained: bool,
    pub upper_attained: bool,
    /// When the lower bound is attained: are all atoms basis vectors?
    pub lower_iff_verified: Option<bool>,
    /// When the upper bound is attained: is the law a single atom?
    pub upper_iff_verified: Option<bool>,
}

pub fn check_mu_bounds(law: &DiscreteAngularLaw) -> Result<MuBoundsReport> {
    let moments = law_moments(law);
    let mu = moments
        .mu
        .ok_or_else(|| Error::Precondition("law is not balanced".into()))?;
    let d = law.dim() as f64;
    let lower = 1.0 / d;
    let upper = 1.0 / d.sqrt();
    let bounds_hold = mu >= lower - 1e-12 && mu <= upper + 1e-12;
    let lower_attained = (mu - lower).abs() <= 1e-10;
    let upper_attained = (mu - upper).abs() <= 1e-10;

    let lower_iff_verified = lower_attained.then(|| {
        law.atoms().iter().all(|a| {
            let big = a.entries().iter().filter(|&&v| v > FACE_SUPPORT_TOL).count();
            big == 1
        })
    });
    let upper_iff_verified = upper_attained.then(|| law.num_atoms() == 1);

    Ok(MuBoundsReport {
        mu,
        lower,
        upper,
        bounds_hold,
        lower_attained,
        upper_attained,
        lower_iff_verified,
        upper_iff_verified,
    })
}

/// Per-face spectral diagnostics of a face-supported law.
#[derive(Debug, Clone)]
pub struct FaceDiagnostics {
    /// Mass of the face.
    pub p: f64,
    /// Largest eigenvalue of the face submodel's second-moment matrix.
    pub lambda1: f64,
    /// Second largest eigenvalue (zero for one-dimensional faces).
    pub lambda2: f64,
    /// Norm of the unnormalized restricted mean `||E(X 1{X in F})||`.
    pub mean_norm: f64,
    /// Atom indices belonging to the face.
    pub members: Vec<usize>,
}

fn face_diagnostics(
    law: &DiscreteAngularLaw,
    partition: &FacePartition,
) -> Result<Vec<FaceDiagnostics>> {
    let d = law.dim();
    if partition.ambient_dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: partition.ambient_dim(),
        });
    }
    let k = partition.num_faces();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (idx, atom) in law.atoms().iter().enumerate() {
        let mut home: Option<usize> = None;
        for (f, face) in partition.faces().iter().enumerate() {
            let outside: f64 = atom
                .entries()
                .iter()
                .enumerate()
                .filter(|(i, _)| !face.contains(i + 1))
                .map(|(_, &v)| v.abs())
                .fold(0.0, f64::max);
            if outside <= FACE_SUPPORT_TOL {
                home = Some(f);
                break;
            }
        }
        match home {
            Some(f) => members[f].push(idx),
            None => {
                return Err(Error::Precondition(format!(
                    "atom {idx} is not supported on any face of the partition"
                )))
            }
        }
    }

    let mut out = Vec::with_capacity(k);
    for (f, face) in partition.faces().iter().enumerate() {
        if members[f].is_empty() {
            return Err(Error::Precondition(format!(
                "face {} carries no atoms",
                f + 1
            )));
        }
        let p: f64 = members[f].iter().map(|&i| law.weights()[i]).sum();
        let coords: Vec<usize> = face.zero_based().collect();
        let restricted: Vec<UnitAngle> = members[f]
            .iter()
            .map(|&i| {
                let v: Vec<f64> = coords.iter().map(|&c| law.atoms()[i].entries()[c]).collect();
                UnitAngle::new(v).expect("restriction of an on-face atom stays a unit angle")
            })
            .collect();
        let w: Vec<f64> = members[f].iter().map(|&i| law.weights()[i] / p).collect();
        let sigma = MomentMatrix::from_weighted_angles(&restricted, &w)?;
        let lambda = top_k_eigenvalues(&sigma, face.len().min(2))?;
        let lambda1 = lambda[0];
        let lambda2 = if lambda.len() > 1 { lambda[1] } else { 0.0 };

        let mut mean = vec![0.0f64; d];
        for &i in &members[f] {
            for (m, &v) in mean.iter_mut().zip(law.atoms()[i].entries()) {
                *m += law.weights()[i] * v;
            }
        }
        let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();

        out.push(FaceDiagnostics {
            p,
            lambda1,
            lambda2,
            mean_norm,
            members: members[f].clone(),
        });
    }
    Ok(out)
}

/// Outcome of the partition-space oracle run against the face partition.
#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub reward: f64,
    /// Largest angle from an oracle centroid to its matched true face
    /// under the best permutation.
    pub max_face_angle: f64,
    /// All oracle centroids within [`ON_FACE_TOL`] of their faces.
    pub centroids_on_faces: bool,
}

/// Report of the sufficient condition `min_I p_I l1(S_I) >= max_I p_I
/// l2(S_I)` for on-face optima of the quadratic reward.
#[derive(Debug, Clone)]
pub struct SufficientConditionReport {
    pub faces: Vec<FaceDiagnostics>,
    pub minmax_holds: bool,
    /// `min_I p_I l1 - max_I p_I l2`; nonnegative when the condition
    /// holds.
    pub minmax_slack: f64,
    /// When the law is balanced: does `l2(S_I) <= mu_I` hold on every
    /// face (the stronger route to the condition)?
    pub lambda2_route: Option<bool>,
    /// On-face quadratic value `sum_I p_I l1(S_I)`.
    pub on_face_reward: f64,
    /// Exhaustive comparison when the instance is small enough.
    pub oracle: Option<OracleComparison>,
}

pub fn check_sufficient_condition(
    law: &DiscreteAngularLaw,
    partition: &FacePartition,
) -> Result<SufficientConditionReport> {
    let faces = face_diagnostics(law, partition)?;
    let min_top = faces
        .iter()
        .map(|f| f.p * f.lambda1)
        .fold(f64::INFINITY, f64::min);
    let max_second = faces
        .iter()
        .map(|f| f.p * f.lambda2)
        .fold(f64::NEG_INFINITY, f64::max);
    let minmax_slack = min_top - max_second;
    let minmax_holds = minmax_slack >= -1e-12;
    let on_face_reward: f64 = faces.iter().map(|f| f.p * f.lambda1).sum();

    let moments = law_moments(law);
    let lambda2_route = moments.mu.map(|mu| {
        faces.iter().all(|f| f.lambda2 <= mu / f.p + 1e-12)
    });

    let oracle = run_oracle_comparison(law, partition, Reward::Quadratic)?;

    Ok(SufficientConditionReport {
        faces,
        minmax_holds,
        minmax_slack,
        lambda2_route,
        on_face_reward,
        oracle,
    })
}

/// Report of the size-balance condition for on-face optima of the linear
/// reward.
#[derive(Debug, Clone)]
pub struct KmeansBalanceReport {
    pub sizes: Vec<usize>,
    /// Does `(|I_1|, ..., |I_k|)` maximize `sum sqrt(d_i)` over
    /// compositions of d into k parts?
    pub sizes_maximal: bool,
    pub sqrt_sum: f64,
    pub max_sqrt_sum: f64,
    /// On-face linear value `sum_I ||E(X 1{X in F_I})||`, which equals
    /// `mu * sum sqrt(d_i)` for balanced laws.
    pub on_face_value: f64,
    pub oracle: Option<OracleComparison>,
    /// Oracle reward strictly above the on-face value: the linear method
    /// provably prefers a different partition on this law.
    pub kmeans_can_fail: Option<bool>,
}

pub fn check_kmeans_balance(
    law: &DiscreteAngularLaw,
    partition: &FacePartition,
) -> Result<KmeansBalanceReport> {
    let moments = law_moments(law);
    if moments.mu.is_none() {
        return Err(Error::Precondition("law is not balanced".into()));
    }
    let faces = face_diagnostics(law, partition)?;
    let sizes: Vec<usize> = partition.faces().iter().map(|f| f.len()).collect();
    let d: usize = sizes.iter().sum();
    let k = sizes.len();
    let sqrt_sum: f64 = sizes.iter().map(|&s| (s as f64).sqrt()).sum();
    let max_sqrt_sum = max_sqrt_composition(d, k);
    let sizes_maximal = (sqrt_sum - max_sqrt_sum).abs() <= 1e-12;
    let on_face_value: f64 = faces.iter().map(|f| f.mean_norm).sum();

    let oracle = run_oracle_comparison(law, partition, Reward::Linear)?;
    let kmeans_can_fail = oracle
        .as_ref()
        .map(|o| o.reward > on_face_value + 1e-12);

    Ok(KmeansBalanceReport {
        sizes,
        sizes_maximal,
        sqrt_sum,
        max_sqrt_sum,
        on_face_value,
        oracle,
        kmeans_can_fail,
    })
}

/// Maximum of `sum_i sqrt(d_i)` over compositions of `d` into `k`
/// nonnegative parts: attained by parts as equal as possible.
fn max_sqrt_composition(d: usize, k: usize) -> f64 {
    let q = d / k;
    let r = d % k;
    (k - r) as f64 * (q as f64).sqrt() + r as f64 * ((q + 1) as f64).sqrt()
}

fn run_oracle_comparison(
    law: &DiscreteAngularLaw,
    partition: &FacePartition,
    reward: Reward,
) -> Result<Option<OracleComparison>> {
    if law.num_atoms() > crate::clustering::ORACLE_MAX_ATOMS {
        return Ok(None);
    }
    let k = partition.num_faces();
    let solution = oracle_weighted(law.atoms(), law.weights(), k, reward)?;
    let max_face_angle = best_permutation_max_angle(&solution.centroids, partition)?;
    Ok(Some(OracleComparison {
        reward: solution.reward,
        max_face_angle,
        centroids_on_faces: max_face_angle < ON_FACE_TOL,
    }))
}

/// Smallest possible value of the largest centroid-to-face angle over all
/// pairings of centroids with faces.
fn best_permutation_max_angle(
    centroids: &[UnitAngle],
    partition: &FacePartition,
) -> Result<f64> {
    let k = centroids.len();
    if k != partition.num_faces() {
        return Err(Error::InvalidInput(format!(
            "{k} centroids but {} faces",
            partition.num_faces()
        )));
    }
    let mut angles = vec![vec![0.0f64; k]; k];
    for (i, c) in centroids.iter().enumerate() {
        for (j, f) in partition.faces().iter().enumerate() {
            angles[i][j] = face_angle(c, f)?;
        }
    }
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    permute_minimax(&mut perm, 0, &angles, &mut best);
    Ok(best)
}

fn permute_minimax(perm: &mut Vec<usize>, i: usize, angles: &[Vec<f64>], best: &mut f64) {
    if i == perm.len() {
        let worst = (0..perm.len())
            .map(|r| angles[r][perm[r]])
            .fold(0.0f64, f64::max);
        if worst < *best {
            *best = worst;
        }
        return;
    }
    for j in i..perm.len() {
        perm.swap(i, j);
        permute_minimax(perm, i + 1, angles, best);
        perm.swap(i, j);
    }
}

/// Spectrum report for laws whose second moments are invariant under
/// coordinate permutations.
#[derive(Debug, Clone)]
pub struct SymmetricModelReport {
    pub cross_moment: f64,
    pub lambda1_predicted: f64,
    pub rest_predicted: f64,
    /// Largest deviation of the computed spectrum from the closed form.
    pub max_spectrum_error: f64,
    /// `lambda_2 <= 1/d <= mu`.
    pub separation_holds: bool,
}

pub fn check_symmetric_model(law: &DiscreteAngularLaw) -> Result<SymmetricModelReport> {
    let d = law.dim();
    if d < 2 {
        return Err(Error::Precondition("symmetric model needs d >= 2".into()));
    }
    let moments = law_moments(law);
    let mu = moments
        .mu
        .ok_or_else(|| Error::Precondition("law is not balanced".into()))?;
    let sigma = &moments.sigma;

    let mut off = Vec::new();
    let mut diag = Vec::new();
    for i in 0..d {
        diag.push(sigma.get(i, i));
        for j in (i + 1)..d {
            off.push(sigma.get(i, j));
        }
    }
    let c = off.iter().sum::<f64>() / off.len() as f64;
    let dd = diag.iter().sum::<f64>() / d as f64;
    if off.iter().any(|&v| (v - c).abs() > 1e-10)
        || diag.iter().any(|&v| (v - dd).abs() > 1e-10)
    {
        return Err(Error::Precondition(
            "second moments are not permutation-exchangeable".into(),
        ));
    }

    let lambda1_predicted = 1.0 / d as f64 + (d - 1) as f64 * c;
    let rest_predicted = 1.0 / d as f64 - c;
    let spectrum = top_k_eigenvalues(sigma, d)?;
    let mut err = (spectrum[0] - lambda1_predicted).abs();
    for &l in &spectrum[1..] {
        err = err.max((l - rest_predicted).abs());
    }
    let lambda2 = if d > 1 { spectrum[1] } else { 0.0 };
    let separation_holds = lambda2 <= 1.0 / d as f64 + 1e-12 && 1.0 / d as f64 <= mu + 1e-12;

    Ok(SymmetricModelReport {
        cross_moment: c,
        lambda1_predicted,
        rest_predicted,
        max_spectrum_error: err,
        separation_holds,
    })
}

/// The scalar inequality behind the orthogonal-split argument: for
/// `a, b > 0`, `c, e >= 0` with `c + e > 0`,
/// `max{ sqrt((a+b)^2 + c^2) + e, c + sqrt((a+b)^2 + e^2) }`
/// strictly exceeds `sqrt(a^2 + c^2) + sqrt(b^2 + e^2)`.
pub fn check_triangle_inequality(a: f64, b: f64, c: f64, e: f64) -> Result<bool> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Precondition(format!(
            "a and b must be positive finite, got {a}, {b}"
        )));
    }
    if !(c >= 0.0 && e >= 0.0) || !c.is_finite() || !e.is_finite() {
        return Err(Error::Precondition(format!(
            "c and e must be nonnegative finite, got {c}, {e}"
        )));
    }
    if !(c + e > 0.0) {
        return Err(Error::Precondition("c + e must be positive".into()));
    }
    let s = a + b;
    let lhs = ((s * s + c * c).sqrt() + e).max(c + (s * s + e * e).sqrt());
    let rhs = (a * a + c * c).sqrt() + (b * b + e * e).sqrt();
    Ok(lhs > rhs)
}

/// Named constructions used across the tests and the check suites.
pub mod fixtures {
    use super::*;
    use crate::rng::unit_rng;
    use rand::Rng;

    /// Mass `1/d` at every standard basis vector (asymptotic
    /// independence).
    pub fn case_independence(d: usize) -> DiscreteAngularLaw {
        let atoms: Vec<UnitAngle> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                UnitAngle::new(v).unwrap()
            })
            .collect();
        DiscreteAngularLaw::new(atoms, vec![1.0 / d as f64; d]).unwrap()
    }

    /// The single deterministic atom `(1,...,1)/sqrt(d)` (complete
    /// dependence).
    pub fn case_complete_dependence(d: usize) -> DiscreteAngularLaw {
        let atom = UnitAngle::new(vec![1.0 / (d as f64).sqrt(); d]).unwrap();
        DiscreteAngularLaw::new(vec![atom], vec![1.0]).unwrap()
    }

    /// Convex mixture of the two boundary cases: basis atoms with total
    /// mass `1 - t` plus the uniform atom with mass `t`. Exchangeable in
    /// second moments for every `t` in (0,1).
    pub fn exchangeable_mixture(d: usize, t: f64) -> DiscreteAngularLaw {
        assert!(t > 0.0 && t < 1.0);
        let mut atoms: Vec<UnitAngle> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                UnitAngle::new(v).unwrap()
            })
            .collect();
        atoms.push(UnitAngle::new(vec![1.0 / (d as f64).sqrt(); d]).unwrap());
        let mut weights = vec![(1.0 - t) / d as f64; d];
        weights.push(t);
        DiscreteAngularLaw::new(atoms, weights).unwrap()
    }

    /// Balanced law supported on three blocks of sizes (1, 2, 2) in d = 5
    /// whose leading block eigenvalues satisfy `l1(D_1) < l1(D_2) =
    /// l1(D_3)`: the singleton carries mass p1 = 1/(1 + 2 sqrt 2) and each
    /// two-dimensional face carries a single fully dependent atom.
    /// Clustered with k = 2 under the grouping ({1}, {2..5}) the
    /// sufficient condition fails, and regrouping as ({1,2,3}, {4,5})
    /// attains a strictly larger quadratic value.
    pub fn three_block_counterexample() -> (DiscreteAngularLaw, FacePartition, FacePartition) {
        let d = 5;
        let p1 = 1.0 / (1.0 + 2.0 * 2f64.sqrt());
        let q = 2f64.sqrt() * p1;
        let e = 1.0 / 2f64.sqrt();
        let atoms = vec![
            UnitAngle::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            UnitAngle::new(vec![0.0, e, e, 0.0, 0.0]).unwrap(),
            UnitAngle::new(vec![0.0, 0.0, 0.0, e, e]).unwrap(),
        ];
        let law = DiscreteAngularLaw::new(atoms, vec![p1, q, q]).unwrap();
        let grouping = FacePartition::from_block_sizes(&[1, 4], None).unwrap();
        let natural = FacePartition::from_block_sizes(&[1, 2, 2], None).unwrap();
        let _ = d;
        (law, grouping, natural)
    }

    /// Perturbation of the asymptotic-independence law in d = 4 towards
    /// the unbalanced partition ({1}, {2,3,4}): mass `epsilon` moves onto
    /// the interior atom `(0,1,1,1)/sqrt(3)` of the larger face, with the
    /// basis weights adjusted to keep the coordinate means equal. The
    /// linear reward then provably prefers a partition cutting through
    /// the big face, while the quadratic reward keeps its optimum on the
    /// true faces.
    pub fn kmeans_tilt(epsilon: f64) -> (DiscreteAngularLaw, FacePartition) {
        assert!(epsilon > 0.0 && epsilon < 0.1);
        let s3 = 3f64.sqrt();
        let mu = (1.0 + epsilon * (s3 - 1.0)) / 4.0;
        let w_face = mu - epsilon / s3;
        let atoms = vec![
            UnitAngle::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            UnitAngle::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
            UnitAngle::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap(),
            UnitAngle::new(vec![0.0, 0.0, 0.0, 1.0]).unwrap(),
            UnitAngle::new(vec![0.0, 1.0 / s3, 1.0 / s3, 1.0 / s3]).unwrap(),
        ];
        let weights = vec![mu, w_face, w_face, w_face, epsilon];
        let law = DiscreteAngularLaw::new(atoms, weights).unwrap();
        let partition = FacePartition::from_block_sizes(&[1, 3], None).unwrap();
        (law, partition)
    }

    /// Random balanced two-face law: each face carries its basis vectors
    /// plus the uniform within-face atom, with weights solved so that all
    /// coordinate means coincide. Every law from this family satisfies
    /// the min-max condition with strictly positive within-face coupling.
    pub fn two_face_balanced(seed: u64) -> (DiscreteAngularLaw, FacePartition) {
        let mut rng = unit_rng(seed);
        let m1 = rng.random_range(1..=3usize);
        let m2 = rng.random_range(1..=3usize);
        let d = m1 + m2;
        let u1: f64 = rng.random_range(0.2..0.8);
        let u2: f64 = rng.random_range(0.2..0.8);

        let sq = |m: usize| (m as f64).sqrt();
        let denom = d as f64
            + u1 * sq(m1) * (1.0 - sq(m1))
            + u2 * sq(m2) * (1.0 - sq(m2));
        let c = 1.0 / denom;

        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut push_face = |lo: usize, m: usize, u: f64| {
            let b = u * c * sq(m);
            let a = c - b / sq(m);
            if m == 1 {
                let mut v = vec![0.0; d];
                v[lo] = 1.0;
                atoms.push(UnitAngle::new(v).unwrap());
                weights.push(a + b);
            } else {
                for i in 0..m {
                    let mut v = vec![0.0; d];
                    v[lo + i] = 1.0;
                    atoms.push(UnitAngle::new(v).unwrap());
                    weights.push(a);
                }
                let mut v = vec![0.0; d];
                for x in v.iter_mut().skip(lo).take(m) {
                    *x = 1.0 / sq(m);
                }
                atoms.push(UnitAngle::new(v).unwrap());
                weights.push(b);
            }
        };
        push_face(0, m1, u1);
        push_face(m1, m2, u2);

        let law = DiscreteAngularLaw::new(atoms, weights).unwrap();
        let partition = FacePartition::from_block_sizes(&[m1, m2], None).unwrap();
        (law, partition)
    }

    /// Balanced law built from cyclic-shift orbits of random atoms:
    /// shifting every atom through all d rotations equalizes the
    /// coordinate means exactly. Duplicated atoms within an orbit (the
    /// uniform direction) are merged.
    pub fn cyclic_balanced(seed: u64, d: usize, orbits: usize) -> DiscreteAngularLaw {
        let mut rng = unit_rng(seed);
        let mut acc: std::collections::BTreeMap<Vec<u64>, (UnitAngle, f64)> =
            std::collections::BTreeMap::new();
        let orbit_mass = 1.0 / orbits as f64;
        for _ in 0..orbits {
            let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let base = crate::angle::normalize(&raw).unwrap();
            for s in 0..d {
                let shifted: Vec<f64> = (0..d).map(|i| base.entries()[(i + s) % d]).collect();
                let atom = UnitAngle::new(shifted).unwrap();
                let key: Vec<u64> = atom.entries().iter().map(|v| v.to_bits()).collect();
                let entry = acc.entry(key).or_insert_with(|| (atom, 0.0));
                entry.1 += orbit_mass / d as f64;
            }
        }
        let (atoms, weights): (Vec<_>, Vec<_>) = acc.into_values().unzip();
        DiscreteAngularLaw::new(atoms, weights).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::Rng;

    #[test]
    fn moments_case_independence() {
        let law = case_independence(3);
        let m = law_moments(&law);
        for &v in &m.mean {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(m.mu, Some(1.0 / 3.0));
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((m.sigma.get(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn moments_case_complete_dependence() {
        let law = case_complete_dependence(4);
        let m = law_moments(&law);
        assert!((m.mu.unwrap() - 0.5).abs() < 1e-15);
        let spec = top_k_eigenvalues(&m.sigma, 4).unwrap();
        assert!((spec[0] - 1.0).abs() < 1e-12);
        assert!(spec[1].abs() < 1e-12);
    }

    #[test]
    fn moments_trace_is_one() {
        let law = cyclic_balanced(5, 6, 3);
        let m = law_moments(&law);
        assert!((m.sigma.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn law_validation() {
        let a = UnitAngle::new(vec![1.0, 0.0]).unwrap();
        let b = UnitAngle::new(vec![0.0, 1.0]).unwrap();
        assert!(DiscreteAngularLaw::new(vec![a.clone(), b.clone()], vec![0.5, 0.4]).is_err());
        assert!(DiscreteAngularLaw::new(vec![a.clone(), a.clone()], vec![0.5, 0.5]).is_err());
        assert!(DiscreteAngularLaw::new(vec![a, b], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn mu_bounds_boundary_cases() {
        let r = check_mu_bounds(&case_independence(4)).unwrap();
        assert!(r.bounds_hold);
        assert!(r.lower_attained && !r.upper_attained);
        assert_eq!(r.lower_iff_verified, Some(true));

        let r = check_mu_bounds(&case_complete_dependence(4)).unwrap();
        assert!(r.bounds_hold);
        assert!(r.upper_attained && !r.lower_attained);
        assert_eq!(r.upper_iff_verified, Some(true));
    }

    #[test]
    fn mu_bounds_strict_interior_mixture() {
        let law = exchangeable_mixture(2, 0.5);
        let r = check_mu_bounds(&law).unwrap();
        assert!(r.bounds_hold);
        assert!(!r.lower_attained && !r.upper_attained);
    }

    #[test]
    fn mu_bounds_requires_balance() {
        let a = UnitAngle::new(vec![1.0, 0.0]).unwrap();
        let b = UnitAngle::new(vec![0.0, 1.0]).unwrap();
        let law = DiscreteAngularLaw::new(vec![a, b], vec![0.7, 0.3]).unwrap();
        assert!(matches!(
            check_mu_bounds(&law),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn lambda1_dominates_mu_on_balanced_laws() {
        for seed in 0..50u64 {
            let law = cyclic_balanced(seed, 2 + (seed % 5) as usize, 1 + (seed % 3) as usize);
            let m = law_moments(&law);
            let mu = m.mu.expect("cyclic laws are balanced");
            let l1 = top_k_eigenvalues(&m.sigma, 1).unwrap()[0];
            assert!(l1 >= mu - 1e-12, "seed {seed}: l1 {l1} < mu {mu}");
        }
        // equality case: asymptotic independence
        let m = law_moments(&case_independence(5));
        let l1 = top_k_eigenvalues(&m.sigma, 1).unwrap()[0];
        assert!((l1 - m.mu.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn sufficient_condition_case_independence() {
        // every 2-partition of the independence law satisfies the
        // condition with equality
        let law = case_independence(4);
        for sizes in [[1usize, 3], [2, 2], [3, 1]] {
            let p = FacePartition::from_block_sizes(&sizes, None).unwrap();
            let r = check_sufficient_condition(&law, &p).unwrap();
            assert!(r.minmax_holds, "sizes {sizes:?}");
            assert!(r.minmax_slack.abs() < 1e-12);
            let o = r.oracle.unwrap();
            assert!((o.reward - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn sufficient_condition_two_face_fixture() {
        // two-dimensional face with positive coupling plus a singleton:
        // the condition holds and the oracle optimum sits on the faces
        let (law, partition) = two_face_balanced(3);
        let r = check_sufficient_condition(&law, &partition).unwrap();
        assert!(r.minmax_holds);
        assert_eq!(r.lambda2_route, Some(true));
        let o = r.oracle.unwrap();
        assert!(o.centroids_on_faces, "max angle {}", o.max_face_angle);
        assert!((o.reward - r.on_face_reward).abs() < 1e-9);
    }

    #[test]
    fn sufficient_condition_three_block_counterexample() {
        let (law, grouping, natural) = three_block_counterexample();
        let r = check_sufficient_condition(&law, &grouping).unwrap();
        assert!(!r.minmax_holds, "slack {}", r.minmax_slack);
        let o = r.oracle.unwrap();
        // the alternative grouping ({1,2,3},{4,5}) wins strictly
        assert!(
            o.reward > r.on_face_reward + 1e-6,
            "oracle {} vs on-face {}",
            o.reward,
            r.on_face_reward
        );
        assert!(!o.centroids_on_faces);

        // under the natural three-face partition with k = 3 everything is
        // consistent again
        let r3 = check_sufficient_condition(&law, &natural).unwrap();
        assert!(r3.minmax_holds);
        assert!(r3.oracle.unwrap().centroids_on_faces);
    }

    #[test]
    fn sufficient_condition_rejects_off_face_atoms() {
        let law = case_complete_dependence(3);
        let p = FacePartition::from_block_sizes(&[1, 2], None).unwrap();
        assert!(matches!(
            check_sufficient_condition(&law, &p),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn kmeans_balance_equal_sizes() {
        let law = case_independence(4);
        let p = FacePartition::from_block_sizes(&[2, 2], None).unwrap();
        let r = check_kmeans_balance(&law, &p).unwrap();
        assert!(r.sizes_maximal);
        let o = r.oracle.unwrap();
        assert!((o.reward - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert!(o.centroids_on_faces);
        assert_eq!(r.kmeans_can_fail, Some(false));
    }

    #[test]
    fn kmeans_balance_unbalanced_sizes_fail() {
        let law = case_independence(4);
        let p = FacePartition::from_block_sizes(&[1, 3], None).unwrap();
        let r = check_kmeans_balance(&law, &p).unwrap();
        assert!(!r.sizes_maximal);
        // on-face value mu (1 + sqrt 3) = (1 + sqrt 3)/4 = 0.68301...
        assert!((r.on_face_value - 0.683012701892219323).abs() < 1e-13);
        let o = r.oracle.unwrap();
        assert!((o.reward - 2f64.sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(r.kmeans_can_fail, Some(true));
    }

    #[test]
    fn kmeans_balance_d3_sizes_1_2() {
        let law = case_independence(3);
        let p = FacePartition::from_block_sizes(&[1, 2], None).unwrap();
        let r = check_kmeans_balance(&law, &p).unwrap();
        assert!(r.sizes_maximal);
        // the splits {1|23} and {12|3} tie, so the oracle's returned
        // centroids may sit on the other face pair; on-face optimality is
        // the value statement
        assert_eq!(r.kmeans_can_fail, Some(false));
        let o = r.oracle.unwrap();
        assert!((o.reward - r.on_face_value).abs() < 1e-12);
    }

    #[test]
    fn proposition_identity_on_face_value() {
        // for balanced laws on faces the on-face linear value equals
        // mu * sum sqrt(|I_i|)
        for seed in [1u64, 2, 3, 4, 5] {
            let (law, partition) = two_face_balanced(seed);
            let m = law_moments(&law);
            let mu = m.mu.unwrap();
            let r = check_kmeans_balance(&law, &partition).unwrap();
            let expect = mu * r.sqrt_sum;
            assert!(
                (r.on_face_value - expect).abs() < 1e-10,
                "seed {seed}: {} vs {expect}",
                r.on_face_value
            );
        }
    }

    #[test]
    fn robustness_contrast_tilted_independence() {
        // moving 1% of mass tilts the linear method away from the true
        // faces while the quadratic method stays on them
        let (law, partition) = kmeans_tilt(0.01);
        let m = law_moments(&law);
        assert!(m.mu.is_some(), "tilt fixture must stay balanced");

        let km = check_kmeans_balance(&law, &partition).unwrap();
        assert_eq!(km.kmeans_can_fail, Some(true));
        assert!(!km.oracle.unwrap().centroids_on_faces);

        let kpc = check_sufficient_condition(&law, &partition).unwrap();
        assert!(kpc.minmax_holds);
        let o = kpc.oracle.unwrap();
        assert!(o.centroids_on_faces, "max angle {}", o.max_face_angle);
    }

    #[test]
    fn symmetric_model_cases() {
        let r = check_symmetric_model(&case_independence(5)).unwrap();
        assert!(r.cross_moment.abs() < 1e-15);
        assert!(r.max_spectrum_error < 1e-10);
        assert!(r.separation_holds);

        let r = check_symmetric_model(&case_complete_dependence(5)).unwrap();
        assert!((r.cross_moment - 0.2).abs() < 1e-12);
        assert!((r.lambda1_predicted - 1.0).abs() < 1e-12);
        assert!(r.rest_predicted.abs() < 1e-12);
        assert!(r.max_spectrum_error < 1e-10);

        let r = check_symmetric_model(&exchangeable_mixture(4, 0.3)).unwrap();
        assert!(r.max_spectrum_error < 1e-10);
        assert!(r.separation_holds);
    }

    #[test]
    fn symmetric_model_rejects_asymmetric() {
        let (law, _) = two_face_balanced(1);
        if law.dim() > 2 {
            assert!(check_symmetric_model(&law).is_err());
        }
    }

    #[test]
    fn triangle_inequality_examples() {
        // a=b=1, c=0, e=1: max{sqrt(4)+1, 0+sqrt(5)} = 3 > 1+sqrt(2)
        assert!(check_triangle_inequality(1.0, 1.0, 0.0, 1.0).unwrap());
        assert!(check_triangle_inequality(1.0, 1.0, 1.0, 1.0).unwrap());
        assert!(check_triangle_inequality(1.0, 1.0, 0.0, 0.0).is_err());
        assert!(check_triangle_inequality(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn triangle_inequality_random_sweep() {
        let mut rng = crate::rng::unit_rng(77);
        for _ in 0..100_000 {
            let a = rng.random::<f64>() * 10.0 + 1e-9;
            let b = rng.random::<f64>() * 10.0 + 1e-9;
            let c = rng.random::<f64>() * 10.0;
            let e = rng.random::<f64>() * 10.0;
            if c + e <= 0.0 {
                continue;
            }
            assert!(check_triangle_inequality(a, b, c, e).unwrap());
        }
    }
}
