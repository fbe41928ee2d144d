//! From centroids to faces: entrywise and angular thresholding, threshold
//! curves, and error counting against a ground-truth partition.

use crate::angle::{face_angle, nearest_face_of_dim, FacePartition, FaceSet, UnitAngle};
use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Entrywise truncation: the face `{i : x_i > eps}`. May be empty for
/// large thresholds, which the caller has to decide how to treat.
pub fn detect_entrywise(x: &UnitAngle, eps: f64) -> Option<FaceSet> {
    let indices: Vec<usize> = x
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > eps)
        .map(|(i, _)| i + 1)
        .collect();
    if indices.is_empty() {
        None
    } else {
        Some(FaceSet::new(indices, x.dim()).expect("indices within range"))
    }
}

/// The smallest-cardinality face whose angle to `x` is below `eps`, built
/// by adding indices in decreasing entry order (ties towards the smaller
/// index). Nonempty for every `eps > 0` because the full index set has
/// angle zero.
pub fn detect_angular(x: &UnitAngle, eps: f64) -> FaceSet {
    let d = x.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        x.entries()[j]
            .partial_cmp(&x.entries()[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    // suffix sums of the sorted squared entries: the off-face mass of
    // each prefix, accumulated directly so it hits zero exactly
    let mut suffix = vec![0.0f64; d + 1];
    for m in (0..d).rev() {
        suffix[m] = suffix[m + 1] + x.entries()[order[m]].powi(2);
    }
    let mut cum = 0.0f64;
    for (m, &i) in order.iter().enumerate() {
        cum += x.entries()[i].powi(2);
        let angle = crate::angle::angle_from_masses(cum, suffix[m + 1]);
        if angle < eps {
            let indices: Vec<usize> = order[..=m].iter().map(|&i| i + 1).collect();
            return FaceSet::new(indices, d).expect("indices within range");
        }
    }
    FaceSet::new((1..=d).collect(), d).expect("full face")
}

/// `(m, angle_m)` for `m = 1..d`, where `angle_m` is the smallest angle to
/// any face of dimension `m`. Nonincreasing in `m`, and zero at `m = d`.
pub fn threshold_curve(x: &UnitAngle) -> Vec<(usize, f64)> {
    (1..=x.dim())
        .map(|m| {
            let f = nearest_face_of_dim(x, m).expect("m within range");
            (m, face_angle(x, &f).expect("matching dimension"))
        })
        .collect()
}

/// How centroids are paired with the true faces before error counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchRule {
    /// Centroid `i` is compared with face `i`.
    Fixed,
    /// The pairing minimizing the total angle to the true faces
    /// (exhaustive for up to 8 clusters, greedy above).
    BestPermutation,
}

/// Detection outcome of a single detector for one centroid.
#[derive(Debug, Clone)]
pub struct DetectorOutcome {
    pub detected: Option<FaceSet>,
    /// Detected indices outside the true face.
    pub added: Option<usize>,
    /// True-face indices the detector missed.
    pub removed: Option<usize>,
}

/// Per-centroid report produced by [`score`].
#[derive(Debug, Clone)]
pub struct FaceReport {
    pub centroid_index: usize,
    pub true_face: Option<FaceSet>,
    pub angle_to_true: Option<f64>,
    /// Largest centroid entry outside the true face.
    pub max_outside_entry: Option<f64>,
    pub entrywise: DetectorOutcome,
    pub angular: DetectorOutcome,
    /// The joint rule: angle to the true face and maximal outside entry
    /// both exceed the angular threshold.
    pub error_flag: Option<bool>,
}

/// Aggregate of [`score`] over all centroids.
#[derive(Debug, Clone)]
pub struct ScoreSummary {
    pub reports: Vec<FaceReport>,
    /// Face index matched to each centroid.
    pub matching: Vec<usize>,
    pub total_errors: usize,
    pub total_added_entrywise: usize,
    pub total_removed_entrywise: usize,
    pub total_added_angular: usize,
    pub total_removed_angular: usize,
}

/// Pairs each centroid with a true face, evaluates both detectors and the
/// joint error rule (angle to the matched face and maximal outside entry
/// both above `eps_angle`).
pub fn score(
    centroids: &[UnitAngle],
    truth: &FacePartition,
    eps_angle: f64,
    eps_entry: f64,
    rule: MatchRule,
) -> Result<ScoreSummary> {
    let k = centroids.len();
    if k != truth.num_faces() {
        return Err(Error::InvalidInput(format!(
            "{k} centroids but {} true faces",
            truth.num_faces()
        )));
    }
    for c in centroids {
        if c.dim() != truth.ambient_dim() {
            return Err(Error::DimMismatch {
                expected: truth.ambient_dim(),
                got: c.dim(),
            });
        }
    }

    let mut angles = vec![vec![0.0f64; k]; k];
    for (i, c) in centroids.iter().enumerate() {
        for (j, f) in truth.faces().iter().enumerate() {
            angles[i][j] = face_angle(c, f)?;
        }
    }
    let matching = match rule {
        MatchRule::Fixed => (0..k).collect::<Vec<_>>(),
        MatchRule::BestPermutation => best_matching(&angles),
    };

    let mut reports = Vec::with_capacity(k);
    let mut total_errors = 0usize;
    let mut tae = 0usize;
    let mut tre = 0usize;
    let mut taa = 0usize;
    let mut tra = 0usize;
    for (i, c) in centroids.iter().enumerate() {
        let face = &truth.faces()[matching[i]];
        let angle = angles[i][matching[i]];
        let max_outside = c
            .entries()
            .iter()
            .enumerate()
            .filter(|(p, _)| !face.contains(p + 1))
            .map(|(_, &v)| v)
            .fold(0.0f64, f64::max);

        let det_e = detect_entrywise(c, eps_entry);
        let det_a = detect_angular(c, eps_angle);
        let (added_e, removed_e) = added_removed(det_e.as_ref(), face);
        let (added_a, removed_a) = added_removed(Some(&det_a), face);
        let err = angle > eps_angle && max_outside > eps_angle;
        total_errors += err as usize;
        tae += added_e;
        tre += removed_e;
        taa += added_a;
        tra += removed_a;

        reports.push(FaceReport {
            centroid_index: i,
            true_face: Some(face.clone()),
            angle_to_true: Some(angle),
            max_outside_entry: Some(max_outside),
            entrywise: DetectorOutcome {
                detected: det_e,
                added: Some(added_e),
                removed: Some(removed_e),
            },
            angular: DetectorOutcome {
                detected: Some(det_a),
                added: Some(added_a),
                removed: Some(removed_a),
            },
            error_flag: Some(err),
        });
    }

    Ok(ScoreSummary {
        reports,
        matching,
        total_errors,
        total_added_entrywise: tae,
        total_removed_entrywise: tre,
        total_added_angular: taa,
        total_removed_angular: tra,
    })
}

/// Detector outcomes without a ground truth, for reporting only.
pub fn detect_only(centroids: &[UnitAngle], eps_angle: f64, eps_entry: f64) -> Vec<FaceReport> {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| FaceReport {
            centroid_index: i,
            true_face: None,
            angle_to_true: None,
            max_outside_entry: None,
            entrywise: DetectorOutcome {
                detected: detect_entrywise(c, eps_entry),
                added: None,
                removed: None,
            },
            angular: DetectorOutcome {
                detected: Some(detect_angular(c, eps_angle)),
                added: None,
                removed: None,
            },
            error_flag: None,
        })
        .collect()
}

fn added_removed(detected: Option<&FaceSet>, truth: &FaceSet) -> (usize, usize) {
    match detected {
        None => (0, truth.len()),
        Some(d) => (d.count_outside(truth), truth.count_outside(d)),
    }
}

/// Assignment of centroids to faces minimizing the total angle. Exhaustive
/// over permutations for up to 8 clusters; greedy (repeatedly taking the
/// globally smallest remaining angle) above that.
fn best_matching(angles: &[Vec<f64>]) -> Vec<usize> {
    let k = angles.len();
    if k <= 8 {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = perm.clone();
        let mut best_total = f64::INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let total: f64 = (0..k).map(|i| angles[i][p[i]]).sum();
            if total < best_total {
                best_total = total;
                best = p.to_vec();
            }
        });
        best
    } else {
        let mut taken_face = vec![false; k];
        let mut taken_centroid = vec![false; k];
        let mut matching = vec![0usize; k];
        for _ in 0..k {
            let mut arg = (0, 0);
            let mut min = f64::INFINITY;
            for i in 0..k {
                if taken_centroid[i] {
                    continue;
                }
                for j in 0..k {
                    if taken_face[j] {
                        continue;
                    }
                    if angles[i][j] < min {
                        min = angles[i][j];
                        arg = (i, j);
                    }
                }
            }
            matching[arg.0] = arg.1;
            taken_centroid[arg.0] = true;
            taken_face[arg.1] = true;
        }
        matching
    }
}

fn permute(perm: &mut Vec<usize>, i: usize, visit: &mut impl FnMut(&[usize])) {
    if i == perm.len() {
        visit(perm);
        return;
    }
    for j in i..perm.len() {
        perm.swap(i, j);
        permute(perm, i + 1, visit);
        perm.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::normalize;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ua(v: &[f64]) -> UnitAngle {
        normalize(v).unwrap()
    }

    #[test]
    fn entrywise_examples() {
        let e1 = ua(&[1.0, 0.0, 0.0]);
        assert_eq!(detect_entrywise(&e1, 0.5).unwrap().indices(), &[1]);
        let u = ua(&[1.0, 1.0, 1.0]);
        assert!(detect_entrywise(&u, 0.9).is_none());
    }

    #[test]
    fn angular_examples() {
        let e1 = ua(&[1.0, 0.0, 0.0]);
        assert_eq!(detect_angular(&e1, 0.01).indices(), &[1]);
        assert_eq!(detect_angular(&e1, 0.9).indices(), &[1]);

        // (sqrt(.98), sqrt(.01), sqrt(.01)): the one-index face {1} has
        // angle (2/pi) acos(sqrt(.98)) = 0.09033... < 0.1
        let x = UnitAngle::new(vec![0.98f64.sqrt(), 0.01f64.sqrt(), 0.01f64.sqrt()]).unwrap();
        assert_eq!(detect_angular(&x, 0.1).indices(), &[1]);
        let a1 = face_angle(&x, &FaceSet::new(vec![1], 3).unwrap()).unwrap();
        assert!((a1 - 0.090334470601733097).abs() < 1e-14);
        // just below that angle the detector must grow the face
        assert!(detect_angular(&x, 0.09).indices().len() > 1);
    }

    #[test]
    fn angular_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let d = rng.random_range(2..=6);
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
            let x = normalize(&v).unwrap();
            let eps = rng.random::<f64>() * 0.9 + 0.05;
            let got = detect_angular(&x, eps);
            assert!(face_angle(&x, &got).unwrap() < eps);
            // no smaller face reaches an angle below eps
            let best = brute_force_minimal(&x, eps);
            assert_eq!(got.len(), best, "eps={eps}, x={:?}", x.entries());
        }
    }

    fn brute_force_minimal(x: &UnitAngle, eps: f64) -> usize {
        let d = x.dim();
        for m in 1..=d {
            let mut found = false;
            let mut idx: Vec<usize> = (1..=m).collect();
            loop {
                let f = FaceSet::new(idx.clone(), d).unwrap();
                if face_angle(x, &f).unwrap() < eps {
                    found = true;
                    break;
                }
                // next combination
                let mut i = m;
                while i > 0 {
                    if idx[i - 1] < d - (m - i) {
                        idx[i - 1] += 1;
                        for j in i..m {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                    i -= 1;
                }
                if i == 0 {
                    break;
                }
            }
            if found {
                return m;
            }
        }
        d
    }

    #[test]
    fn angular_cardinality_nonincreasing_in_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
            let x = normalize(&v).unwrap();
            let mut prev = usize::MAX;
            for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
                let m = detect_angular(&x, eps).len();
                assert!(m <= prev);
                prev = m;
            }
        }
    }

    #[test]
    fn threshold_curve_examples() {
        let e1 = ua(&[1.0, 0.0, 0.0]);
        let curve = threshold_curve(&e1);
        assert!(curve.iter().all(|&(_, a)| a.abs() < 1e-12));

        // uniform direction in d=4: angles 2/3, 1/2, 1/3, 0
        let u = ua(&[1.0, 1.0, 1.0, 1.0]);
        let curve = threshold_curve(&u);
        let expect = [2.0 / 3.0, 0.5, 1.0 / 3.0, 0.0];
        for ((m, a), e) in curve.iter().zip(expect) {
            assert!((a - e).abs() < 1e-13, "m={m}");
        }
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-15);
        }
    }

    #[test]
    fn score_exact_centroids() {
        let truth = FacePartition::from_block_sizes(&[2, 1], None).unwrap();
        let c1 = ua(&[1.0, 1.0, 0.0]);
        let c2 = ua(&[0.0, 0.0, 1.0]);
        let s = score(&[c1, c2], &truth, 0.1, 0.1, MatchRule::Fixed).unwrap();
        assert_eq!(s.total_errors, 0);
        assert_eq!(s.total_added_angular, 0);
        assert_eq!(s.total_removed_angular, 0);
        assert_eq!(s.total_added_entrywise, 0);
        assert_eq!(s.total_removed_entrywise, 0);
    }

    #[test]
    fn score_flags_wrong_face() {
        // centroid e1 against truth face {2} in d=2: error at any
        // threshold below 1
        let truth = FacePartition::new(
            vec![
                FaceSet::new(vec![1], 2).unwrap(),
                FaceSet::new(vec![2], 2).unwrap(),
            ],
            None,
        )
        .unwrap();
        let c1 = ua(&[0.0, 1.0]);
        let c2 = ua(&[1.0, 0.0]);
        for eps in [0.05, 0.3, 0.9] {
            let s = score(&[c1.clone(), c2.clone()], &truth, eps, eps, MatchRule::Fixed).unwrap();
            assert_eq!(s.total_errors, 2, "eps={eps}");
        }
        // permutation matching repairs the swap
        let s = score(&[c1, c2], &truth, 0.1, 0.1, MatchRule::BestPermutation).unwrap();
        assert_eq!(s.total_errors, 0);
    }

    #[test]
    fn best_permutation_never_worse_than_fixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let d = 6;
            let truth = FacePartition::from_block_sizes(&[2, 2, 2], None).unwrap();
            let centroids: Vec<UnitAngle> = (0..3)
                .map(|_| {
                    let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
                    normalize(&v).unwrap()
                })
                .collect();
            let fixed = score(&centroids, &truth, 0.1, 0.1, MatchRule::Fixed).unwrap();
            let best = score(&centroids, &truth, 0.1, 0.1, MatchRule::BestPermutation).unwrap();
            assert!(best.total_errors <= fixed.total_errors);
        }
    }

    #[test]
    fn score_count_mismatch() {
        let truth = FacePartition::from_block_sizes(&[1, 1], None).unwrap();
        let c = ua(&[1.0, 0.0]);
        assert!(score(&[c], &truth, 0.1, 0.1, MatchRule::Fixed).is_err());
    }

    #[test]
    fn face_angle_below_eps_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..200 {
            let d = rng.random_range(2..=10);
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
            let x = normalize(&v).unwrap();
            let eps = rng.random::<f64>() * 0.98 + 0.01;
            let f = detect_angular(&x, eps);
            assert!(face_angle(&x, &f).unwrap() < eps);
        }
    }
}
