//! Hüsler–Reiss machinery: random variograms whose groups are
//! asymptotically independent, closed-form tail dependence, exact
//! max-stable sampling with unit Fréchet margins, the log-ratio transform
//! between the simplex interior and Euclidean space, the angular density,
//! and Monte Carlo estimation of the angular moments.

use crate::angle::{FacePartition, RawSample, UnitAngle};
use crate::error::{Error, Result};
use crate::mat::{Lower, SquareMatrix};
use crate::rng::{subseed, unit_rng};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

/// A variogram: symmetric, zero diagonal, nonnegative entries, strictly
/// conditionally negative definite. The last property is checked on
/// construction through positive definiteness of the derived covariance.
#[derive(Debug, Clone)]
pub struct Variogram {
    g: SquareMatrix,
}

impl Variogram {
    pub fn new(g: SquareMatrix) -> Result<Self> {
        let d = g.dim();
        if d < 2 {
            return Err(Error::InvalidVariogram("dimension must be >= 2".into()));
        }
        if g.max_asymmetry() > 1e-12 {
            return Err(Error::InvalidVariogram(format!(
                "asymmetry {} beyond tolerance",
                g.max_asymmetry()
            )));
        }
        let mut g = g;
        g.symmetrize();
        for i in 0..d {
            if g.get(i, i).abs() > 1e-12 {
                return Err(Error::InvalidVariogram(format!(
                    "diagonal entry {} at {i}",
                    g.get(i, i)
                )));
            }
            g.set(i, i, 0.0);
            for j in 0..d {
                let v = g.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidVariogram(format!(
                        "entry {v} at ({i},{j})"
                    )));
                }
            }
        }
        let v = Variogram { g };
        // strict conditional negative definiteness <=> any derived R is PD
        v.gaussian_rep(d)?;
        Ok(v)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.g
    }

    /// Gaussian representation with the 1-based `base` coordinate playing
    /// the role of the normalizing coordinate.
    pub fn gaussian_rep(&self, base: usize) -> Result<GaussianRep> {
        cov_from_variogram(self, base)
    }
}

/// Mean, covariance and Cholesky factor of the `(d-1)`-dimensional normal
/// attached to one base coordinate of a variogram. Coordinates keep their
/// ascending order with the base removed.
#[derive(Debug, Clone)]
pub struct GaussianRep {
    /// 1-based base coordinate.
    pub base: usize,
    /// Coordinates other than the base, 0-based, ascending.
    pub coords: Vec<usize>,
    pub mean: Vec<f64>,
    pub cov: SquareMatrix,
    pub chol: Lower,
}

/// Builds `R_ij = (Gamma_{i,base} + Gamma_{j,base} - Gamma_{ij}) / 2` over
/// `i, j != base` together with the mean vector `-Gamma_{i,base} / 2`.
/// Fails when R is not positive definite; a single jitter of
/// `1e-12 * trace(R)/(d-1)` on the diagonal is attempted first to absorb
/// factorization failures at the numerical margin.
pub fn cov_from_variogram(gamma: &Variogram, base: usize) -> Result<GaussianRep> {
    let d = gamma.dim();
    if base < 1 || base > d {
        return Err(Error::InvalidInput(format!(
            "base {base} out of range 1..={d}"
        )));
    }
    let b = base - 1;
    let coords: Vec<usize> = (0..d).filter(|&i| i != b).collect();
    let m = coords.len();
    let mut cov = SquareMatrix::zeros(m);
    for (ri, &i) in coords.iter().enumerate() {
        for (rj, &j) in coords.iter().enumerate() {
            let v = 0.5 * (gamma.get(i, b) + gamma.get(j, b) - gamma.get(i, j));
            cov.set(ri, rj, v);
        }
    }
    cov.symmetrize();
    let mean: Vec<f64> = coords.iter().map(|&i| -0.5 * gamma.get(i, b)).collect();

    let chol = match cov.cholesky() {
        Ok(l) => l,
        Err(_) => {
            // Only factorization failures at the numerical margin are
            // repaired by a single diagonal jitter; a spectrum that
            // actually touches zero means the variogram is not strictly
            // conditionally negative definite.
            let scale = (cov.trace() / m as f64).max(f64::MIN_POSITIVE);
            if cov.min_eigenvalue() <= 1e-10 * scale {
                return Err(Error::InvalidVariogram(format!(
                    "derived covariance for base {base} is not positive definite"
                )));
            }
            let jitter = 1e-12 * cov.trace() / m as f64;
            let mut fixed = cov.clone();
            for i in 0..m {
                fixed.add_to(i, i, jitter);
            }
            fixed.cholesky().map_err(|_| {
                Error::InvalidVariogram(format!(
                    "derived covariance for base {base} is not positive definite"
                ))
            })?
        }
    };

    Ok(GaussianRep {
        base,
        coords,
        mean,
        cov,
        chol,
    })
}

/// Tail dependence coefficient of a Hüsler–Reiss pair:
/// `chi = 2 * Phi_bar(sqrt(gamma)/2)` with `Phi_bar` the standard normal
/// survival function.
pub fn chi_from_gamma(gamma_ij: f64) -> Result<f64> {
    if !gamma_ij.is_finite() || gamma_ij < 0.0 {
        return Err(Error::InvalidInput(format!(
            "variogram entry must be a nonnegative finite real, got {gamma_ij}"
        )));
    }
    // 2 Phi_bar(x) = erfc(x / sqrt(2)) with x = sqrt(gamma)/2
    Ok(erfc(gamma_ij.sqrt() / (2.0 * 2f64.sqrt())))
}

/// Matrix of pairwise tail dependence coefficients: unit diagonal,
/// symmetric, entries in [0, 1].
#[derive(Debug, Clone)]
pub struct DependenceMatrix {
    chi: SquareMatrix,
}

impl DependenceMatrix {
    pub fn from_variogram(gamma: &Variogram) -> Result<Self> {
        let d = gamma.dim();
        let mut chi = SquareMatrix::identity(d);
        for i in 0..d {
            for j in (i + 1)..d {
                let v = chi_from_gamma(gamma.get(i, j))?;
                chi.set(i, j, v);
                chi.set(j, i, v);
            }
        }
        Ok(DependenceMatrix { chi })
    }

    pub fn dim(&self) -> usize {
        self.chi.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.chi.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.chi
    }
}

/// Parameters of the random variogram recipe.
#[derive(Debug, Clone)]
pub struct VariogramRecipe {
    /// Shape of the Pareto coordinates of the latent points.
    pub pareto_shape: f64,
    /// Offset appended as an extra coordinate to the first group; large
    /// values force the two groups towards exact asymptotic independence.
    pub anchor: f64,
    /// Overall scale; `None` means `3/d`.
    pub scale: Option<f64>,
}

impl Default for VariogramRecipe {
    fn default() -> Self {
        VariogramRecipe {
            pareto_shape: 2.5,
            anchor: 1e5,
            scale: None,
        }
    }
}

/// Draws latent points `h_1, ..., h_d` with iid Pareto coordinates (unit
/// scale, support `[1, inf)` via inverse CDF), appends the anchor
/// coordinate to the first `d1` points and zero to the rest, and sets
/// `Gamma_ij = scale * ||h~_i - h~_j||^2`. Cross-group entries are at
/// least `scale * anchor^2`, so the two blocks are asymptotically
/// independent to machine precision. Returns the variogram together with
/// the ground-truth partition `({1..d1}, {d1+1..d})`.
pub fn gen_variogram(
    d: usize,
    d1: usize,
    seed: u64,
    recipe: &VariogramRecipe,
) -> Result<(Variogram, FacePartition)> {
    if d < 2 {
        return Err(Error::InvalidInput("d must be >= 2".into()));
    }
    if d1 < 1 || d1 > d - 1 {
        return Err(Error::InvalidInput(format!(
            "d1 must lie in 1..={}, got {d1}",
            d - 1
        )));
    }
    let scale = recipe.scale.unwrap_or(3.0 / d as f64);
    let mut rng = unit_rng(seed);

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut h: Vec<f64> = (0..d)
            .map(|_| {
                let u: f64 = rng.random();
                (1.0 - u).powf(-1.0 / recipe.pareto_shape)
            })
            .collect();
        h.push(if i < d1 { recipe.anchor } else { 0.0 });
        points.push(h);
    }

    let mut g = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in (i + 1)..d {
            let sq: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = scale * sq;
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }

    let gamma = Variogram::new(g)?;
    let partition = FacePartition::from_block_sizes(&[d1, d - d1], None)?;
    Ok((gamma, partition))
}

/// Exact draw of `n` iid max-stable Hüsler–Reiss vectors with unit Fréchet
/// margins by the extremal-functions construction: sites are processed in
/// order; at each site Poisson points on `(0, inf)` and log-Gaussian
/// spectral functions (normalized to one at the site) are proposed, and a
/// proposal is kept only if it does not exceed the process already built
/// at earlier sites.
pub fn sample_hr(gamma: &Variogram, n: usize, seed: u64) -> Result<RawSample> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let d = gamma.dim();
    let reps: Vec<GaussianRep> = (1..=d)
        .map(|b| gamma.gaussian_rep(b))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(n);
    for sample_idx in 0..n {
        let mut rng = unit_rng(subseed(seed, sample_idx as u64));
        let mut z = vec![0.0f64; d];
        let mut w = vec![0.0f64; d];
        let mut gauss = vec![0.0f64; d - 1];
        let mut noise = vec![0.0f64; d - 1];
        for j in 0..d {
            let rep = &reps[j];
            let mut zeta: f64 = rng.sample(Exp1);
            while 1.0 / zeta > z[j] {
                for g in noise.iter_mut() {
                    *g = rng.sample(StandardNormal);
                }
                rep.chol.matvec(&noise, &mut gauss);
                w[j] = 1.0;
                for (pos, &coord) in rep.coords.iter().enumerate() {
                    w[coord] = (rep.mean[pos] + gauss[pos]).exp();
                }
                if (0..j).all(|m| w[m] / zeta < z[m]) {
                    for i in 0..d {
                        let cand = w[i] / zeta;
                        if cand > z[i] {
                            z[i] = cand;
                        }
                    }
                }
                let step: f64 = rng.sample(Exp1);
                zeta += step;
            }
        }
        rows.push(z);
    }
    RawSample::new(rows)
}

/// Log-ratio coordinates of an interior simplex point:
/// `t_i(x) = log(x_i / x_d)` for `i = 1..d-1`.
pub fn t_transform(x: &UnitAngle) -> Result<Vec<f64>> {
    let d = x.dim();
    if d < 2 {
        return Err(Error::Domain("transform needs d >= 2".into()));
    }
    if x.entries().iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain(
            "log-ratio transform requires a strictly interior point".into(),
        ));
    }
    let xd = x.entries()[d - 1];
    Ok(x.entries()[..d - 1]
        .iter()
        .map(|&v| (v / xd).ln())
        .collect())
}

/// Inverse of [`t_transform`]:
/// `(e^{z_1}, ..., e^{z_{d-1}}, 1) / sqrt(1 + sum e^{2 z_i})`, evaluated
/// with the largest exponent factored out so arguments up to +-700 are
/// safe.
pub fn t_inverse(z: &[f64]) -> Result<UnitAngle> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    let d = z.len() + 1;
    let a = z.iter().fold(0.0f64, |m, &v| m.max(v));
    // q = sqrt(e^{-2a} + sum e^{2(z_i - a)}); every exponent is <= 0
    let mut q2 = (-2.0 * a).exp();
    for &zi in z {
        q2 += (2.0 * (zi - a)).exp();
    }
    let q = q2.sqrt();
    let mut entries = Vec::with_capacity(d);
    for &zi in z {
        entries.push((zi - a).exp() / q);
    }
    entries.push((-a).exp() / q);
    UnitAngle::new(entries)
}

/// Density of the first `d-1` coordinates of the Hüsler–Reiss angle at an
/// interior point:
/// `f(x) = mu * x_d^{-2} * prod_i x_i^{-1} * phi(t(x))`, with `phi` the
/// normal density of mean `-Gamma_{i,d}/2` and the covariance derived from
/// the variogram at base `d`.
pub fn angular_density(x: &UnitAngle, gamma: &Variogram, mu: f64) -> Result<f64> {
    let d = gamma.dim();
    if x.dim() != d {
        return Err(Error::DimMismatch {
            expected: d,
            got: x.dim(),
        });
    }
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("mu must be positive, got {mu}")));
    }
    if x.entries().iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("density requires an interior point".into()));
    }
    let rep = gamma.gaussian_rep(d)?;
    let t = t_transform(x)?;
    let centered: Vec<f64> = t.iter().zip(&rep.mean).map(|(a, b)| a - b).collect();
    let u = rep.chol.forward_solve(&centered);
    let quad: f64 = u.iter().map(|v| v * v).sum();

    let xd = x.entries()[d - 1];
    let mut logf = mu.ln() - 2.0 * xd.ln();
    for &v in x.entries() {
        logf -= v.ln();
    }
    logf += -0.5 * quad
        - 0.5 * (d - 1) as f64 * (2.0 * PI).ln()
        - rep.chol.diag_product().ln();
    Ok(logf.exp())
}

/// Determinant of the Jacobian of the log-ratio transform restricted to
/// the first `d-1` coordinates: `1 / (x_1 ... x_{d-1} * x_d^2)`.
pub fn jacobian_det_t(x: &UnitAngle) -> Result<f64> {
    let d = x.dim();
    if d < 2 {
        return Err(Error::Domain("transform needs d >= 2".into()));
    }
    if x.entries().iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("Jacobian requires an interior point".into()));
    }
    let mut prod = 1.0;
    for &v in &x.entries()[..d - 1] {
        prod *= v;
    }
    let xd = x.entries()[d - 1];
    Ok(1.0 / (prod * xd * xd))
}

/// Monte Carlo estimates of the angular mean `mu` and second-moment matrix
/// with standard errors.
#[derive(Debug, Clone)]
pub struct AngularSummary {
    pub mu: f64,
    pub mu_se: f64,
    /// Per-base estimates of mu (one per choice of normalizing
    /// coordinate); they agree up to Monte Carlo error.
    pub mu_per_base: Vec<f64>,
    pub mu_se_per_base: Vec<f64>,
    /// Estimated `E(X X^T)`; symmetric with trace 1 up to Monte Carlo
    /// error. Noise can push the smallest eigenvalue marginally negative,
    /// so this is a plain matrix rather than a validated moment matrix.
    pub sigma: SquareMatrix,
    pub sigma_se: SquareMatrix,
    /// Conservative standard error of `trace(sigma)`, including the
    /// uncertainty of the shared `mu` factor.
    pub trace_se: f64,
    pub mc_n: usize,
}

/// For every base coordinate `b`, draws `mc_n` Gaussian vectors from the
/// representation at `b`, maps them to the simplex with `b` in the
/// normalizing role and estimates `1/mu = E(1/W_b)` together with column
/// `b` of `Sigma / mu` as `E(W)`. The columns are assembled into a
/// symmetric matrix by averaging the two estimates of each off-diagonal
/// entry. Standard errors are first-order in the W-moments.
pub fn estimate_summary(gamma: &Variogram, mc_n: usize, seed: u64) -> Result<AngularSummary> {
    if mc_n < 1 {
        return Err(Error::InvalidInput("mc_n must be >= 1".into()));
    }
    let d = gamma.dim();
    let mut col_mean = vec![vec![0.0f64; d]; d];
    let mut col_se = vec![vec![0.0f64; d]; d];
    let mut inv_mu = vec![0.0f64; d];
    let mut inv_mu_se = vec![0.0f64; d];

    for b in 0..d {
        let rep = gamma.gaussian_rep(b + 1)?;
        let mut rng = unit_rng(subseed(seed, b as u64));
        let mut noise = vec![0.0f64; d - 1];
        let mut gauss = vec![0.0f64; d - 1];
        let mut z = vec![0.0f64; d - 1];
        let mut w = vec![0.0f64; d];

        let mut sum = vec![0.0f64; d];
        let mut sumsq = vec![0.0f64; d];
        let mut sum_d = 0.0f64;
        let mut sumsq_d = 0.0f64;

        for _ in 0..mc_n {
            for g in noise.iter_mut() {
                *g = rng.sample(StandardNormal);
            }
            rep.chol.matvec(&noise, &mut gauss);
            for (zi, (m, g)) in z.iter_mut().zip(rep.mean.iter().zip(&gauss)) {
                *zi = m + g;
            }
            // W on the simplex with coordinate b in the normalizing role;
            // 1/W_b = sqrt(1 + sum e^{2z}) evaluated stably.
            let a = z.iter().fold(0.0f64, |m, &v| m.max(v));
            let mut q2 = (-2.0 * a).exp();
            for &zi in &z {
                q2 += (2.0 * (zi - a)).exp();
            }
            let q = q2.sqrt();
            for (pos, &coord) in rep.coords.iter().enumerate() {
                w[coord] = (z[pos] - a).exp() / q;
            }
            w[b] = (-a).exp() / q;
            let big_d = a.exp() * q;

            for i in 0..d {
                sum[i] += w[i];
                sumsq[i] += w[i] * w[i];
            }
            sum_d += big_d;
            sumsq_d += big_d * big_d;
        }

        let nf = mc_n as f64;
        for i in 0..d {
            let mean = sum[i] / nf;
            col_mean[b][i] = mean;
            col_se[b][i] = standard_error(sum[i], sumsq[i], mc_n);
        }
        inv_mu[b] = sum_d / nf;
        inv_mu_se[b] = standard_error(sum_d, sumsq_d, mc_n);
    }

    let pooled_inv: f64 = inv_mu.iter().sum::<f64>() / d as f64;
    let pooled_inv_se: f64 =
        inv_mu_se.iter().map(|s| s * s).sum::<f64>().sqrt() / d as f64;
    let mu = 1.0 / pooled_inv;
    let mu_se = pooled_inv_se * mu * mu;
    let mu_per_base: Vec<f64> = inv_mu.iter().map(|&v| 1.0 / v).collect();
    let mu_se_per_base: Vec<f64> = inv_mu
        .iter()
        .zip(&inv_mu_se)
        .map(|(&v, &s)| s / (v * v))
        .collect();

    let mut sigma = SquareMatrix::zeros(d);
    let mut sigma_se = SquareMatrix::zeros(d);
    for i in 0..d {
        sigma.set(i, i, mu * col_mean[i][i]);
        sigma_se.set(i, i, mu * col_se[i][i]);
        for j in (i + 1)..d {
            // entry (i,j): base j estimates E(W_i), base i estimates E(W_j)
            let est = 0.5 * mu * (col_mean[j][i] + col_mean[i][j]);
            let se = 0.5 * mu * (col_se[j][i].powi(2) + col_se[i][j].powi(2)).sqrt();
            sigma.set(i, j, est);
            sigma.set(j, i, est);
            sigma_se.set(i, j, se);
            sigma_se.set(j, i, se);
        }
    }

    // Trace error: the diagonal means and the shared mu factor fluctuate
    // together (same draws), so the relative errors are added rather than
    // combined in quadrature.
    let diag_sum: f64 = (0..d).map(|b| col_mean[b][b]).sum();
    let diag_se: f64 = (0..d).map(|b| col_se[b][b].powi(2)).sum::<f64>().sqrt();
    let trace = mu * diag_sum;
    let trace_se = trace * (diag_se / diag_sum + mu_se / mu);

    Ok(AngularSummary {
        mu,
        mu_se,
        mu_per_base,
        mu_se_per_base,
        sigma,
        sigma_se,
        trace_se,
        mc_n,
    })
}

fn standard_error(sum: f64, sumsq: f64, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (var / nf).sqrt()
}

/// Kolmogorov–Smirnov statistic of a sample against the unit Fréchet
/// distribution function `exp(-1/y)`.
pub fn ks_statistic_unit_frechet(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, &y) in sorted.iter().enumerate() {
        let f = (-1.0 / y).exp();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        ks = ks.max((f - lo).abs()).max((hi - f).abs());
    }
    ks
}

/// Empirical tail dependence estimate from a bivariate sample:
/// `2 - log C(u,u) / log(u)` with `C` the empirical copula and the
/// per-component thresholds at the `1 - top_fraction` empirical
/// quantiles. For max-stable input this quantity equals the tail
/// dependence coefficient at every level (the raw joint-exceedance ratio
/// carries a `1 - u` bias floor instead), so the top fraction only
/// trades variance against nothing.
pub fn empirical_chi(xs: &[f64], ys: &[f64], top_fraction: f64) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidInput(
            "components must be nonempty and of equal length".into(),
        ));
    }
    if !(top_fraction > 0.0 && top_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "top fraction must lie in (0,1), got {top_fraction}"
        )));
    }
    let thr = |v: &[f64]| -> f64 {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let idx = ((1.0 - top_fraction) * s.len() as f64).floor() as usize;
        s[idx.min(s.len() - 1)]
    };
    let tx = thr(xs);
    let ty = thr(ys);
    let n = xs.len() as f64;
    let mut below_x = 0usize;
    let mut below_both = 0usize;
    for (&x, &y) in xs.iter().zip(ys) {
        if x <= tx {
            below_x += 1;
            if y <= ty {
                below_both += 1;
            }
        }
    }
    if below_both == 0 || below_x == 0 {
        return Err(Error::InvalidInput("top fraction too large".into()));
    }
    let c = below_both as f64 / n;
    let u = below_x as f64 / n;
    if u >= 1.0 {
        return Err(Error::InvalidInput("no exceedances".into()));
    }
    Ok(2.0 - c.ln() / u.ln())
}
