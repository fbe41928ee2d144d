//! Spectral routines for symmetric nonnegative matrices: the principal
//! (Perron–Frobenius) eigenpair by deterministic power iteration, top-k
//! eigenvalues, and the eigendecomposition split that attains equality in
//! the eigenvalue-sum inequality.

use crate::angle::UnitAngle;
use crate::error::{Error, Result};
use crate::mat::SquareMatrix;

/// Symmetry tolerance accepted on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// A matrix counts as nonnegative definite when its smallest eigenvalue is
/// at least this (rounding slack).
pub const PSD_TOL: f64 = -1e-10;

/// A second-moment matrix: symmetric, entrywise nonnegative, nonnegative
/// definite.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrix {
    m: SquareMatrix,
}

impl MomentMatrix {
    /// Validates all three invariants; asymmetry within [`SYMMETRY_TOL`] is
    /// repaired by averaging.
    pub fn new(m: SquareMatrix) -> Result<Self> {
        if m.max_asymmetry() > SYMMETRY_TOL {
            return Err(Error::InvalidInput(format!(
                "asymmetry {} beyond tolerance",
                m.max_asymmetry()
            )));
        }
        let mut m = m;
        m.symmetrize();
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                if m.get(i, j) < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "negative entry {} at ({i},{j})",
                        m.get(i, j)
                    )));
                }
            }
        }
        let min_eig = m.min_eigenvalue();
        if min_eig < PSD_TOL {
            return Err(Error::InvalidInput(format!(
                "smallest eigenvalue {min_eig:e} below {PSD_TOL:e}"
            )));
        }
        Ok(MomentMatrix { m })
    }

    /// Weighted sum of outer products `sum_u w_u x_u x_u^T`. All invariants
    /// hold by construction, so no spectral validation is run; this is the
    /// hot path of the clustering updates.
    pub fn from_weighted_angles(angles: &[UnitAngle], weights: &[f64]) -> Result<Self> {
        if angles.is_empty() || angles.len() != weights.len() {
            return Err(Error::InvalidInput(
                "angles and weights must be nonempty and of equal length".into(),
            ));
        }
        let d = angles[0].dim();
        let mut m = SquareMatrix::zeros(d);
        for (a, &w) in angles.iter().zip(weights) {
            if a.dim() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!("bad weight {w}")));
            }
            m.add_outer(a.entries(), w);
        }
        m.symmetrize();
        Ok(MomentMatrix { m })
    }

    pub(crate) fn from_gram_unchecked(m: SquareMatrix) -> Self {
        MomentMatrix { m }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.m
    }

    pub fn is_zero(&self) -> bool {
        self.m.max_abs_entry() == 0.0
    }
}

/// Iteration cap for the power method.
const POWER_MAX_ITER: usize = 100_000;
/// Relative-change stopping tolerance for the power method.
const POWER_TOL: f64 = 1e-12;

/// Principal eigenvalue and a nonnegative unit eigenvector of a symmetric
/// nonnegative matrix.
///
/// The iteration starts from the normalized vector of row sums (uniform if
/// those vanish) and stops once the Rayleigh quotient changes by less than
/// a 1e-12 relative step and the residual is comparably small, capped at
/// 1e5 iterations. Every iterate of a nonnegative matrix applied to a
/// nonnegative vector stays nonnegative, so the returned vector is a
/// Perron vector without any sign fixing. For reducible or tied spectra
/// the deterministic limit of this iteration is the returned vector.
pub fn principal_eigenpair(m: &MomentMatrix) -> Result<(f64, UnitAngle)> {
    if m.is_zero() {
        return Err(Error::DegenerateMatrix("zero matrix".into()));
    }
    let d = m.dim();
    let mat = m.matrix();

    let mut v: Vec<f64> = (0..d).map(|i| mat.row(i).iter().sum::<f64>()).collect();
    let mut norm = norm2(&v);
    if norm == 0.0 {
        v = vec![1.0; d];
        norm = (d as f64).sqrt();
    }
    for x in &mut v {
        *x /= norm;
    }

    let mut w = vec![0.0f64; d];
    let mut lambda_prev = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        mat.matvec(&v, &mut w);
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let resid: f64 = v
            .iter()
            .zip(&w)
            .map(|(vi, wi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let wn = norm2(&w);
        if wn == 0.0 {
            // v ended up in the kernel; cannot happen from the row-sum
            // start of a nonzero PSD matrix, but bail out cleanly.
            return Err(Error::DegenerateMatrix("iteration hit the kernel".into()));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        let settled = lambda_prev.is_finite()
            && (lambda - lambda_prev).abs() <= POWER_TOL * lambda.max(f64::MIN_POSITIVE)
            && resid <= 1e-12 * lambda.max(f64::MIN_POSITIVE);
        lambda_prev = lambda;
        if settled {
            break;
        }
    }

    let angle = UnitAngle::new(v)?;
    Ok((lambda_prev, angle))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The `k` largest eigenvalues in nonincreasing order. Negative values
/// within the PSD rounding slack are clamped to zero.
pub fn top_k_eigenvalues(m: &MomentMatrix, k: usize) -> Result<Vec<f64>> {
    let d = m.dim();
    if k < 1 || k > d {
        return Err(Error::InvalidInput(format!("k {k} out of range 1..={d}")));
    }
    let (vals, _) = m.matrix().sym_eigen();
    Ok(vals[..k].iter().map(|&v| v.max(0.0)).collect())
}

/// Splits `M = Q diag(l) Q^T` into `k` nonnegative-definite parts whose
/// principal eigenvalues sum to `l_1 + ... + l_k`: part `i < k` carries
/// `l_i` alone and the last part carries the remaining spectrum. The parts
/// are symmetric and PSD but may have entries of either sign.
pub fn equality_construction(m: &MomentMatrix, k: usize) -> Result<Vec<SquareMatrix>> {
    let d = m.dim();
    if k < 1 || k > d {
        return Err(Error::InvalidInput(format!("k {k} out of range 1..={d}")));
    }
    let (vals, q) = m.matrix().sym_eigen();
    let col = |c: usize| -> Vec<f64> { (0..d).map(|r| q.get(r, c)).collect() };

    let mut parts = Vec::with_capacity(k);
    for i in 0..k - 1 {
        let mut p = SquareMatrix::zeros(d);
        p.add_outer(&col(i), vals[i].max(0.0));
        parts.push(p);
    }
    let mut last = SquareMatrix::zeros(d);
    for j in k - 1..d {
        last.add_outer(&col(j), vals[j].max(0.0));
    }
    parts.push(last);
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_moment_matrix(rng: &mut ChaCha8Rng, d: usize) -> MomentMatrix {
        // Gram matrix of nonnegative vectors: symmetric, nonnegative
        // entries, PSD by construction.
        let m = d + rng.random_range(0..3);
        let mut g = SquareMatrix::zeros(d);
        for _ in 0..m {
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            g.add_outer(&v, rng.random::<f64>() + 0.1);
        }
        g.symmetrize();
        MomentMatrix::new(g).unwrap()
    }

    #[test]
    fn moment_matrix_rejects_violations() {
        let asym = SquareMatrix::from_rows(&[vec![1.0, 0.5], vec![0.2, 1.0]]).unwrap();
        assert!(MomentMatrix::new(asym).is_err());
        let neg = SquareMatrix::from_rows(&[vec![1.0, -0.1], vec![-0.1, 1.0]]).unwrap();
        assert!(MomentMatrix::new(neg).is_err());
        // indefinite with nonnegative entries: [[0,1],[1,0]]
        let indef = SquareMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(MomentMatrix::new(indef).is_err());
    }

    #[test]
    fn eigenpair_diagonal() {
        let m = MomentMatrix::new(SquareMatrix::diagonal(&[2.0, 1.0])).unwrap();
        let (l, v) = principal_eigenpair(&m).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
        assert!((v.entries()[0] - 1.0).abs() < 1e-10);
        assert!(v.entries()[1].abs() < 1e-10);
    }

    #[test]
    fn eigenpair_rank_one() {
        let m =
            MomentMatrix::new(SquareMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap())
                .unwrap();
        let (l, v) = principal_eigenpair(&m).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        let e = 1.0 / 2f64.sqrt();
        assert!((v.entries()[0] - e).abs() < 1e-10);
        assert!((v.entries()[1] - e).abs() < 1e-10);
    }

    #[test]
    fn eigenpair_zero_matrix_is_degenerate() {
        let m = MomentMatrix::new(SquareMatrix::zeros(3)).unwrap();
        assert!(matches!(
            principal_eigenpair(&m),
            Err(Error::DegenerateMatrix(_))
        ));
    }

    #[test]
    fn eigenpair_matches_full_decomposition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let m = random_moment_matrix(&mut rng, 5);
            let (l, v) = principal_eigenpair(&m).unwrap();

            // independent oracle: nalgebra's dense symmetric solver
            let na = nalgebra::DMatrix::from_fn(5, 5, |i, j| m.get(i, j));
            let eig = na.symmetric_eigen();
            let l_star = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
            assert!(
                (l - l_star).abs() <= 1e-8 * l_star.max(1.0),
                "lambda {l} vs oracle {l_star}"
            );

            // residual postcondition
            let mut w = vec![0.0; 5];
            m.matrix().matvec(v.entries(), &mut w);
            let resid: f64 = w
                .iter()
                .zip(v.entries())
                .map(|(wi, vi)| (wi - l * vi).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-8 * l);
            assert!(v.entries().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn eigenpair_value_dominates_random_quadratic_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = random_moment_matrix(&mut rng, 6);
        let (l, _) = principal_eigenpair(&m).unwrap();
        let mut w = vec![0.0; 6];
        for _ in 0..10_000 {
            let v: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                continue;
            }
            let v: Vec<f64> = v.iter().map(|x| x / n).collect();
            m.matrix().matvec(&v, &mut w);
            let q: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!(l >= q - 1e-10);
        }
    }

    #[test]
    fn top_k_examples() {
        let m = MomentMatrix::new(SquareMatrix::diagonal(&[3.0, 2.0, 1.0])).unwrap();
        assert_eq!(top_k_eigenvalues(&m, 2).unwrap(), vec![3.0, 2.0]);
        let id4 = MomentMatrix::new(SquareMatrix::identity(4).scaled(0.25)).unwrap();
        let v = top_k_eigenvalues(&id4, 4).unwrap();
        assert!(v.iter().all(|&x| (x - 0.25).abs() < 1e-14));
        assert!(top_k_eigenvalues(&m, 0).is_err());
        assert!(top_k_eigenvalues(&m, 4).is_err());
    }

    #[test]
    fn top_k_matches_oracle_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..30 {
            let d = rng.random_range(2..7);
            let m = random_moment_matrix(&mut rng, d);
            let vals = top_k_eigenvalues(&m, d).unwrap();
            let na = nalgebra::DMatrix::from_fn(d, d, |i, j| m.get(i, j));
            let mut oracle: Vec<f64> = na.symmetric_eigen().eigenvalues.iter().cloned().collect();
            oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (a, b) in vals.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
            }
            let tr: f64 = vals.iter().sum();
            assert!((tr - m.trace()).abs() < 1e-10 * m.trace().max(1.0));
        }
    }

    #[test]
    fn equality_construction_diagonal_cases() {
        let m = MomentMatrix::new(SquareMatrix::diagonal(&[3.0, 2.0, 1.0])).unwrap();
        let parts = equality_construction(&m, 2).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(parts[0].max_abs_diff(&SquareMatrix::diagonal(&[3.0, 0.0, 0.0])) < 1e-12);
        assert!(parts[1].max_abs_diff(&SquareMatrix::diagonal(&[0.0, 2.0, 1.0])) < 1e-12);

        let third = MomentMatrix::new(SquareMatrix::identity(3).scaled(1.0 / 3.0)).unwrap();
        let parts = equality_construction(&third, 3).unwrap();
        for p in &parts {
            let (vals, _) = p.sym_eigen();
            assert!((vals[0] - 1.0 / 3.0).abs() < 1e-12);
            assert!(vals[1].abs() < 1e-12);
        }
    }

    #[test]
    fn equality_construction_postconditions_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for _ in 0..25 {
            let m = random_moment_matrix(&mut rng, 4);
            let k = rng.random_range(1..=4);
            let parts = equality_construction(&m, k).unwrap();
            assert_eq!(parts.len(), k);

            let mut sum = SquareMatrix::zeros(4);
            let mut lead = 0.0;
            for p in &parts {
                let (vals, _) = p.sym_eigen();
                assert!(vals[3] > -1e-10, "part not PSD: {}", vals[3]);
                lead += vals[0];
                sum = sum.add(p);
            }
            assert!(sum.max_abs_diff(m.matrix()) < 1e-10 * m.matrix().max_abs_entry().max(1.0));

            let topk: f64 = top_k_eigenvalues(&m, k).unwrap().iter().sum();
            assert!((lead - topk).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalue_sum_inequality_sweep() {
        // For PSD nonnegative-entry parts, the principal eigenvalues sum to
        // at most the sum of the k largest eigenvalues of the total.
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        for _ in 0..1000 {
            let d = rng.random_range(2..=8);
            let k = rng.random_range(1..=d);
            let mut total = SquareMatrix::zeros(d);
            let mut lhs = 0.0;
            for _ in 0..k {
                let part = random_moment_matrix(&mut rng, d);
                let (l, _) = principal_eigenpair(&part).unwrap();
                lhs += l;
                total = total.add(part.matrix());
            }
            let total = MomentMatrix::new(total).unwrap();
            let rhs: f64 = top_k_eigenvalues(&total, k).unwrap().iter().sum();
            assert!(lhs <= rhs + 1e-8, "lhs {lhs} > rhs {rhs} (d={d}, k={k})");
        }
    }
}
