//! Simplex-valued types and the angular geometry they carry: normalization
//! of heavy-tailed observations, dissimilarities on the positive unit
//! simplex, and angles to faces of the positive orthant.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Largest norm deviation fixed silently by renormalizing on construction.
/// Anything worse is rejected; this keeps file-roundtripped angles valid.
pub const NORM_SLACK: f64 = 1e-9;

/// A nonnegative direction of unit Euclidean norm: a point of the positive
/// unit simplex `{x >= 0 : ||x||_2 = 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitAngle {
    entries: Vec<f64>,
}

impl UnitAngle {
    /// Validates nonnegativity and unit norm. Inputs whose norm deviates
    /// from 1 by at most [`NORM_SLACK`] are renormalized; larger deviations
    /// are rejected.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("angle needs at least one entry".into()));
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at {i}")));
            }
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("negative entry {v} at {i}")));
            }
        }
        let norm = euclid_norm(&entries);
        if (norm - 1.0).abs() > NORM_SLACK {
            return Err(Error::InvalidInput(format!(
                "norm {norm} deviates from 1 beyond {NORM_SLACK:e}"
            )));
        }
        let mut entries = entries;
        if norm != 1.0 {
            for v in &mut entries {
                *v /= norm;
            }
        }
        Ok(UnitAngle { entries })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Dot product, clamped to [0, 1].
    pub fn dot(&self, other: &UnitAngle) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        let s: f64 = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum();
        s.clamp(0.0, 1.0)
    }
}

/// Euclidean norm with scaling by the largest entry, so that very large
/// unit-Fréchet observations do not overflow when squared.
pub(crate) fn euclid_norm(v: &[f64]) -> f64 {
    let m = v.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x / m) * (x / m)).sum();
    m * s.sqrt()
}

/// Projects a positive vector onto the unit simplex: `y / ||y||_2`.
pub fn normalize(y: &[f64]) -> Result<UnitAngle> {
    if y.is_empty() {
        return Err(Error::InvalidInput("empty vector".into()));
    }
    for (i, &v) in y.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite entry at {i}")));
        }
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("negative entry {v} at {i}")));
        }
    }
    let norm = euclid_norm(y);
    if norm <= 0.0 {
        return Err(Error::InvalidInput("zero vector".into()));
    }
    let entries: Vec<f64> = y.iter().map(|&v| v / norm).collect();
    Ok(UnitAngle { entries })
}

/// Observations on the unit-Fréchet scale: n rows of d strictly positive
/// reals.
#[derive(Debug, Clone)]
pub struct RawSample {
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl RawSample {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        let dim = rows[0].len();
        if dim < 2 {
            return Err(Error::InvalidInput("raw samples need d >= 2".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for (i, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "row {r}, column {i}: entries must be positive and finite, got {v}"
                    )));
                }
            }
        }
        Ok(RawSample { rows, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Provenance carried along with extracted angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeta {
    /// Fraction of rows retained when the angles were extracted.
    pub retained_fraction: f64,
    /// Smallest Euclidean norm among retained rows, if extracted from raw
    /// data.
    pub threshold_norm: Option<f64>,
    /// Seed of the generator that produced the raw data, when known.
    pub seed: Option<u64>,
}

/// An ordered collection of angles sharing one dimension.
#[derive(Debug, Clone)]
pub struct AngularSample {
    angles: Vec<UnitAngle>,
    dim: usize,
    meta: SampleMeta,
}

impl AngularSample {
    pub fn new(angles: Vec<UnitAngle>, meta: SampleMeta) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidInput("empty angular sample".into()));
        }
        let dim = angles[0].dim();
        for a in &angles {
            if a.dim() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    got: a.dim(),
                });
            }
        }
        Ok(AngularSample { angles, dim, meta })
    }

    pub fn from_angles(angles: Vec<UnitAngle>) -> Result<Self> {
        Self::new(
            angles,
            SampleMeta {
                retained_fraction: 1.0,
                threshold_norm: None,
                seed: None,
            },
        )
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn angles(&self) -> &[UnitAngle] {
        &self.angles
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }
}

/// Keeps the `ceil(fraction * n)` rows of largest Euclidean norm (ties
/// broken in favour of earlier rows), normalizes each retained row and
/// records the smallest retained norm.
///
/// The retained row order is the original row order. The product
/// `fraction * n` is snapped to the nearest integer when within 1e-9 of
/// one before the ceiling is taken, so that decimal fractions such as 0.1
/// select exactly n/10 rows despite binary rounding.
pub fn extract_angles(data: &RawSample, retained_fraction: f64) -> Result<AngularSample> {
    if !(retained_fraction > 0.0 && retained_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "retained fraction must lie in the open interval (0,1), got {retained_fraction}"
        )));
    }
    let n = data.len();
    let t = retained_fraction * n as f64;
    let r = t.round();
    let count = if (t - r).abs() <= 1e-9 * (n as f64).max(1.0) {
        r as usize
    } else {
        t.ceil() as usize
    };
    let count = count.clamp(1, n);

    let norms: Vec<f64> = data.rows().iter().map(|r| euclid_norm(r)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut keep: Vec<usize> = order[..count].to_vec();
    keep.sort_unstable();

    let threshold_norm = keep
        .iter()
        .map(|&i| norms[i])
        .fold(f64::INFINITY, f64::min);
    let angles = keep
        .iter()
        .map(|&i| normalize(&data.rows()[i]))
        .collect::<Result<Vec<_>>>()?;

    AngularSample::new(
        angles,
        SampleMeta {
            retained_fraction,
            threshold_norm: Some(threshold_norm),
            seed: None,
        },
    )
}

/// Dissimilarity functions of the form `1 - r(x^T y)` for a strictly
/// increasing reward `r`, plus the scaled Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dissimilarity {
    /// `sqrt(1 - x^T y)`.
    SqrtEuclid,
    /// `(2/pi) * arccos(x^T y)`: the angle as a fraction of a right angle.
    Angular,
    /// `1 - x^T y` (linear reward).
    C1,
    /// `1 - (x^T y)^2` (quadratic reward).
    C2,
}

/// Dissimilarity between two angles; dot products are clamped to [0, 1]
/// before the sqrt/arccos so floating drift cannot leave the domain.
/// Identical inputs return exactly zero (the arccos would otherwise
/// amplify the rounding of the dot product to ~1e-8).
pub fn dissimilarity(x: &UnitAngle, y: &UnitAngle, kind: Dissimilarity) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if x.entries() == y.entries() {
        return Ok(0.0);
    }
    let dot = x.dot(y);
    Ok(match kind {
        Dissimilarity::SqrtEuclid => (1.0 - dot).max(0.0).sqrt(),
        Dissimilarity::Angular => dot.acos() / FRAC_PI_2,
        Dissimilarity::C1 => 1.0 - dot,
        Dissimilarity::C2 => 1.0 - dot * dot,
    })
}

/// A nonempty set of coordinate indices (1-based) naming a face of the
/// positive orthant: the vectors vanishing outside the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl FaceSet {
    /// Indices are 1-based; they are sorted on construction and must be
    /// distinct and within `1..=ambient_dim`.
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidInput("face needs at least one index".into()));
        }
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidInput(format!("duplicate index {}", w[0])));
            }
        }
        if indices[0] < 1 || *indices.last().unwrap() > ambient_dim {
            return Err(Error::InvalidInput(format!(
                "indices must lie in 1..={ambient_dim}"
            )));
        }
        Ok(FaceSet {
            indices,
            ambient_dim,
        })
    }

    /// Contiguous face `{lo, lo+1, ..., hi}` (1-based, inclusive).
    pub fn contiguous(lo: usize, hi: usize, ambient_dim: usize) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidInput(format!("empty range {lo}..={hi}")));
        }
        Self::new((lo..=hi).collect(), ambient_dim)
    }

    /// Sorted 1-based indices.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index_1based: usize) -> bool {
        self.indices.binary_search(&index_1based).is_ok()
    }

    /// Iterator over 0-based positions, for indexing into entry slices.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().map(|&i| i - 1)
    }

    /// Number of detected indices outside `other` (set difference size).
    pub fn count_outside(&self, other: &FaceSet) -> usize {
        self.indices.iter().filter(|&&i| !other.contains(i)).count()
    }

    /// Semicolon-joined 1-based indices, the CSV convention.
    pub fn join_semicolon(&self) -> String {
        self.indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// An ordered partition of `{1,...,d}` into faces, optionally weighted.
/// Faces follow the convention that all indices of an earlier face are
/// smaller than all indices of a later face, so the blocks are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FacePartition {
    faces: Vec<FaceSet>,
    weights: Option<Vec<f64>>,
}

impl FacePartition {
    pub fn new(faces: Vec<FaceSet>, weights: Option<Vec<f64>>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::InvalidInput("partition needs at least one face".into()));
        }
        let d = faces[0].ambient_dim();
        let mut covered = 0usize;
        for f in &faces {
            if f.ambient_dim() != d {
                return Err(Error::DimMismatch {
                    expected: d,
                    got: f.ambient_dim(),
                });
            }
            covered += f.len();
        }
        if covered != d {
            return Err(Error::InvalidInput(format!(
                "faces cover {covered} indices, ambient dimension is {d}"
            )));
        }
        for w in faces.windows(2) {
            let hi = *w[0].indices().last().unwrap();
            let lo = w[1].indices()[0];
            if hi >= lo {
                return Err(Error::InvalidInput(
                    "face indices must increase from one face to the next".into(),
                ));
            }
        }
        if let Some(ws) = &weights {
            if ws.len() != faces.len() {
                return Err(Error::DimMismatch {
                    expected: faces.len(),
                    got: ws.len(),
                });
            }
            if ws.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidInput("weights must be positive".into()));
            }
            let s: f64 = ws.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("weights sum to {s}, not 1")));
            }
        }
        Ok(FacePartition { faces, weights })
    }

    /// Contiguous blocks of the given sizes, in order.
    pub fn from_block_sizes(sizes: &[usize], weights: Option<Vec<f64>>) -> Result<Self> {
        let d: usize = sizes.iter().sum();
        let mut faces = Vec::with_capacity(sizes.len());
        let mut lo = 1usize;
        for &s in sizes {
            if s == 0 {
                return Err(Error::InvalidInput("zero-size block".into()));
            }
            faces.push(FaceSet::contiguous(lo, lo + s - 1, d)?);
            lo += s;
        }
        Self::new(faces, weights)
    }

    pub fn faces(&self) -> &[FaceSet] {
        &self.faces
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.faces[0].ambient_dim()
    }

    /// Position of the face containing the 1-based coordinate index.
    pub fn face_of(&self, index_1based: usize) -> Option<usize> {
        self.faces.iter().position(|f| f.contains(index_1based))
    }
}

/// Angle between `x` and the face named by `I`, as a fraction of a right
/// angle: `(2/pi) * arccos(sqrt(sum_{i in I} x_i^2))`.
///
/// Evaluated from whichever of the on-face and off-face masses is
/// smaller, so a point lying exactly on the face gets exactly zero
/// instead of the ~1e-8 arccos amplification of the rounding in
/// `1 - sum`.
pub fn face_angle(x: &UnitAngle, face: &FaceSet) -> Result<f64> {
    if face.ambient_dim() != x.dim() {
        return Err(Error::DimMismatch {
            expected: x.dim(),
            got: face.ambient_dim(),
        });
    }
    let s_in: f64 = face.zero_based().map(|i| x.entries()[i].powi(2)).sum();
    let s_out: f64 = x
        .entries()
        .iter()
        .enumerate()
        .filter(|(i, _)| !face.contains(i + 1))
        .map(|(_, &v)| v * v)
        .sum();
    Ok(angle_from_masses(s_in, s_out))
}

/// `(2/pi) * arccos(sqrt(s_in / (s_in + s_out)))` computed through the
/// smaller of the two masses.
pub(crate) fn angle_from_masses(s_in: f64, s_out: f64) -> f64 {
    let total = s_in + s_out;
    if total <= 0.0 {
        return 0.0;
    }
    if s_out <= s_in {
        ((s_out / total).clamp(0.0, 1.0)).sqrt().asin() / FRAC_PI_2
    } else {
        ((s_in / total).clamp(0.0, 1.0)).sqrt().acos() / FRAC_PI_2
    }
}

/// The face of dimension `m` with the smallest angle to `x`: the `m`
/// indices of largest entries, ties broken towards the smaller index.
pub fn nearest_face_of_dim(x: &UnitAngle, m: usize) -> Result<FaceSet> {
    let d = x.dim();
    if m < 1 || m > d {
        return Err(Error::InvalidInput(format!(
            "face dimension {m} out of range 1..={d}"
        )));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        x.entries()[j]
            .partial_cmp(&x.entries()[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let indices: Vec<usize> = order[..m].iter().map(|&i| i + 1).collect();
    FaceSet::new(indices, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ua(v: &[f64]) -> UnitAngle {
        normalize(v).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let a = normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(a.entries(), &[0.6, 0.8]);
    }

    #[test]
    fn normalize_symmetric() {
        let a = normalize(&[1.0, 1.0, 1.0]).unwrap();
        let e = 1.0 / 3f64.sqrt();
        for &v in a.entries() {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_extreme_ratio() {
        // Oracle values from extended-precision evaluation of y/||y||:
        // (1e6, 1) -> (0.9999999999995, 9.999999999995e-7).
        let a = normalize(&[1e6, 1.0]).unwrap();
        assert!((a.entries()[0] - 0.9999999999995).abs() < 1e-15);
        assert!((a.entries()[1] - 9.999999999995e-7).abs() < 1e-21);
        assert!(a.entries()[0] > 0.999999);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(normalize(&[]).is_err());
        assert!(normalize(&[0.0, 0.0]).is_err());
        assert!(normalize(&[1.0, f64::NAN]).is_err());
        assert!(normalize(&[1.0, f64::INFINITY]).is_err());
        assert!(normalize(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn normalize_no_overflow_for_huge_rows() {
        let a = normalize(&[1e300, 1e300]).unwrap();
        let e = 1.0 / 2f64.sqrt();
        assert!((a.entries()[0] - e).abs() < 1e-15);
    }

    #[test]
    fn unit_angle_renormalizes_small_drift_only() {
        let e = 1.0 / 2f64.sqrt();
        let a = UnitAngle::new(vec![e + 1e-10, e]).unwrap();
        let n: f64 = a.entries().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert!(UnitAngle::new(vec![0.5, 0.5]).is_err());
        assert!(UnitAngle::new(vec![-e, e]).is_err());
    }

    #[test]
    fn extract_angles_forced_ranking() {
        let rows = vec![
            vec![1.0, 1e-12],
            vec![2.0, 1e-12],
            vec![3.0, 1e-12],
            vec![4.0, 1e-12],
        ];
        let raw = RawSample::new(rows).unwrap();
        let s = extract_angles(&raw, 0.5).unwrap();
        assert_eq!(s.len(), 2);
        // rows with norms 3 and 4, in original order
        assert!((s.meta().threshold_norm.unwrap() - 3.0).abs() < 1e-9);
        assert!(s.angles()[0].entries()[0] > 0.999);
    }

    #[test]
    fn extract_angles_fraction_boundaries() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![3.0, 1.0]];
        let raw = RawSample::new(rows).unwrap();
        assert!(extract_angles(&raw, 1.0).is_err());
        assert!(extract_angles(&raw, 0.0).is_err());
        let s = extract_angles(&raw, 0.999).unwrap();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn extract_angles_decimal_fraction_is_exact() {
        // 0.1 * 10000 must select exactly 1000 rows despite the binary
        // representation of 0.1.
        let rows: Vec<Vec<f64>> = (1..=10_000).map(|i| vec![i as f64, 1.0]).collect();
        let raw = RawSample::new(rows).unwrap();
        let s = extract_angles(&raw, 0.1).unwrap();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn extract_angles_tie_break_earlier_rows() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 1.0]];
        let raw = RawSample::new(rows).unwrap();
        let s = extract_angles(&raw, 0.4).unwrap(); // ceil(1.2) = 2
        assert_eq!(s.len(), 2);
        // all three norms equal; earliest two rows win
        assert_eq!(s.angles()[0].entries()[1], 2.0 / 5f64.sqrt());
        assert_eq!(s.angles()[1].entries()[0], 2.0 / 5f64.sqrt());
    }

    #[test]
    fn dissimilarity_identity_and_orthogonal() {
        let kinds = [
            Dissimilarity::SqrtEuclid,
            Dissimilarity::Angular,
            Dissimilarity::C1,
            Dissimilarity::C2,
        ];
        let x = ua(&[0.3, 0.7, 0.1]);
        let e1 = ua(&[1.0, 0.0]);
        let e2 = ua(&[0.0, 1.0]);
        for k in kinds {
            assert!(dissimilarity(&x, &x, k).unwrap().abs() < 1e-12);
            assert!((dissimilarity(&e1, &e2, k).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dissimilarity_half_right_angle() {
        let x = ua(&[1.0, 0.0]);
        let y = ua(&[1.0, 1.0]);
        let v = dissimilarity(&x, &y, Dissimilarity::Angular).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dissimilarity_dimension_mismatch() {
        let x = ua(&[1.0, 0.0]);
        let y = ua(&[1.0, 0.0, 0.0]);
        assert!(dissimilarity(&x, &y, Dissimilarity::C1).is_err());
    }

    #[test]
    fn face_angle_examples() {
        let e1 = ua(&[1.0, 0.0, 0.0]);
        let f1 = FaceSet::new(vec![1], 3).unwrap();
        let f23 = FaceSet::new(vec![2, 3], 3).unwrap();
        assert!(face_angle(&e1, &f1).unwrap().abs() < 1e-15);
        assert!((face_angle(&e1, &f23).unwrap() - 1.0).abs() < 1e-15);

        // Oracle: (2/pi) * arccos(sqrt(2/3)) = 0.39182655203060727...
        let u = ua(&[1.0, 1.0, 1.0]);
        let f12 = FaceSet::new(vec![1, 2], 3).unwrap();
        let v = face_angle(&u, &f12).unwrap();
        assert!((v - 0.391826552030607270).abs() < 1e-14);
    }

    #[test]
    fn nearest_face_examples() {
        let x = ua(&[0.8, 0.6, 0.0]);
        assert_eq!(nearest_face_of_dim(&x, 1).unwrap().indices(), &[1]);
        let t = ua(&[1.0, 1.0]);
        assert_eq!(nearest_face_of_dim(&t, 1).unwrap().indices(), &[1]);
        assert!(nearest_face_of_dim(&t, 0).is_err());
        assert!(nearest_face_of_dim(&t, 3).is_err());
    }

    #[test]
    fn nearest_face_matches_brute_force() {
        use rand::SeedableRng;
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let d = 5;
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-6).collect();
            let x = normalize(&v).unwrap();
            for m in 1..=d {
                let fast = nearest_face_of_dim(&x, m).unwrap();
                let best = all_subsets_of_size(d, m)
                    .into_iter()
                    .map(|s| {
                        let f = FaceSet::new(s, d).unwrap();
                        let a = face_angle(&x, &f).unwrap();
                        (a, f)
                    })
                    .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                    .unwrap();
                let fast_angle = face_angle(&x, &fast).unwrap();
                assert!(fast_angle <= best.0 + 1e-12);
            }
        }
    }

    fn all_subsets_of_size(d: usize, m: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, d: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == m {
                out.push(cur.clone());
                return;
            }
            for i in start..=d {
                cur.push(i);
                rec(i + 1, d, m, cur, out);
                cur.pop();
            }
        }
        rec(1, d, m, &mut cur, &mut out);
        out
    }

    #[test]
    fn face_partition_validation() {
        let f1 = FaceSet::new(vec![1, 2], 3).unwrap();
        let f2 = FaceSet::new(vec![3], 3).unwrap();
        assert!(FacePartition::new(vec![f1.clone(), f2.clone()], None).is_ok());
        // ordering convention violated
        assert!(FacePartition::new(vec![f2.clone(), f1.clone()], None).is_err());
        // overlap
        let g = FaceSet::new(vec![2, 3], 3).unwrap();
        assert!(FacePartition::new(vec![f1.clone(), g], None).is_err());
        // weights must sum to one
        assert!(FacePartition::new(vec![f1.clone(), f2.clone()], Some(vec![0.5, 0.4])).is_err());
        assert!(FacePartition::new(vec![f1, f2], Some(vec![0.6, 0.4])).is_ok());
    }

    #[test]
    fn monotone_coupling_of_dissimilarities() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let kinds = [
            Dissimilarity::SqrtEuclid,
            Dissimilarity::Angular,
            Dissimilarity::C1,
            Dissimilarity::C2,
        ];
        for _ in 0..500 {
            let d = rng.random_range(2..6);
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-9).collect();
                normalize(&v).unwrap()
            };
            let x = mk(&mut rng);
            let y1 = mk(&mut rng);
            let y2 = mk(&mut rng);
            let d1 = x.dot(&y1);
            let d2 = x.dot(&y2);
            for k in kinds {
                let c1 = dissimilarity(&x, &y1, k).unwrap();
                let c2 = dissimilarity(&x, &y2, k).unwrap();
                if d1 > d2 + 1e-12 {
                    assert!(c1 <= c2 + 1e-12, "{k:?}: dot order not respected");
                }
                assert!((0.0..=1.0).contains(&c1));
            }
        }
    }
}
