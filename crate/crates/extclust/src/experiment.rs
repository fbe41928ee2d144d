//! Drivers behind the command line: the simulation study (generate,
//! sample, extract, cluster, score, plot), clustering of user files, face
//! reports, and the structural check suites. Everything randomized is
//! seeded through per-task substreams, so outputs are byte-identical
//! across runs and thread counts.

use crate::angle::{extract_angles, AngularSample, FacePartition, RawSample};
use crate::clustering::{fit, ClusterModel, FitConfig, Method};
use crate::error::{Error, Result};
use crate::faces::{detect_angular, threshold_curve, MatchRule, ScoreSummary};
use crate::husler_reiss::{
    chi_from_gamma, gen_variogram, sample_hr, VariogramRecipe,
};
use crate::io;
use crate::plot::Plot;
use crate::rng::{subseed, unit_rng};
use crate::theory::{self, fixtures};
use rand::Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// How the first group's size is chosen per replication.
#[derive(Debug, Clone, Copy)]
pub enum D1Spec {
    Fixed(usize),
    /// Uniform over the inclusive range.
    Range(usize, usize),
}

/// Parameters of the simulation study.
#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub d: usize,
    pub d1: D1Spec,
    pub n: usize,
    pub fraction: f64,
    pub k: usize,
    pub restarts: usize,
    pub replications: usize,
    pub seed: u64,
    pub eps_angle: Vec<f64>,
    pub eps_entry: Vec<f64>,
    pub methods: Vec<Method>,
    pub match_rule: MatchRule,
    pub out_dir: PathBuf,
}

impl SimulateConfig {
    pub fn new(out_dir: PathBuf) -> Self {
        SimulateConfig {
            d: 20,
            d1: D1Spec::Range(3, 10),
            n: 2000,
            fraction: 0.1,
            k: 2,
            restarts: 100,
            replications: 30,
            seed: 1,
            eps_angle: vec![0.1],
            eps_entry: vec![0.1],
            methods: vec![Method::KMeans, Method::Kpc],
            match_rule: MatchRule::BestPermutation,
            out_dir,
        }
    }
}

/// Per-centroid scoring numbers carried into the output tables.
#[derive(Debug, Clone)]
struct CentroidScore {
    angle_to_true: f64,
    max_outside: f64,
    true_face_size: usize,
}

/// One method's result within one replication.
#[derive(Debug, Clone)]
struct MethodOutcome {
    method: Method,
    model: ClusterModel,
    /// Indexed like the (eps_angle x eps_entry) cartesian product.
    scores: Vec<ScoreSummary>,
    centroid_scores: Vec<CentroidScore>,
}

#[derive(Debug, Clone)]
struct RepOutcome {
    rep: usize,
    d1: usize,
    chi_within: Vec<f64>,
    methods: Vec<MethodOutcome>,
}

/// Aggregate error counts per method and threshold pair.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub method: Method,
    pub eps_angle: f64,
    pub eps_entry: f64,
    pub centroids: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub added_entrywise: usize,
    pub removed_entrywise: usize,
    pub added_angular: usize,
    pub removed_angular: usize,
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub aggregates: Vec<AggregateRow>,
    pub replications: usize,
}

/// Runs the full study and writes tables and figures under the output
/// directory. Replications execute in parallel; all randomness flows from
/// per-replication substreams of the master seed, so the byte content of
/// every output is independent of scheduling.
pub fn run_simulate(config: &SimulateConfig) -> Result<SimulateOutcome> {
    validate_simulate(config)?;
    let reps: Vec<Result<RepOutcome>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, rep))
        .collect();
    let reps: Vec<RepOutcome> = reps.into_iter().collect::<Result<_>>()?;

    write_config_echo(config)?;
    write_replications_csv(config, &reps)?;
    let aggregates = aggregate(config, &reps);
    write_aggregate_csv(config, &aggregates)?;
    if let Some(first) = reps.first() {
        write_first_rep_plots(config, first)?;
    }
    write_comparison_scatter(config, &reps)?;

    Ok(SimulateOutcome {
        aggregates,
        replications: reps.len(),
    })
}

fn validate_simulate(config: &SimulateConfig) -> Result<()> {
    if config.d < 2 {
        return Err(Error::InvalidInput("d must be >= 2".into()));
    }
    match config.d1 {
        D1Spec::Fixed(v) if v >= 1 && v < config.d => {}
        D1Spec::Range(lo, hi) if lo >= 1 && lo <= hi && hi < config.d => {}
        _ => {
            return Err(Error::InvalidInput(
                "d1 must lie in 1..d (range bounds ordered)".into(),
            ))
        }
    }
    if config.replications < 1 || config.n < 1 || config.restarts < 1 {
        return Err(Error::InvalidInput(
            "counts must be positive".into(),
        ));
    }
    if !(config.fraction > 0.0 && config.fraction < 1.0) {
        return Err(Error::InvalidInput("fraction must lie in (0,1)".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidInput("no methods selected".into()));
    }
    if config.eps_angle.is_empty() || config.eps_entry.is_empty() {
        return Err(Error::InvalidInput("threshold lists must be nonempty".into()));
    }
    Ok(())
}

fn run_replication(config: &SimulateConfig, rep: usize) -> Result<RepOutcome> {
    let rep_seed = subseed(config.seed, rep as u64);
    let d1 = match config.d1 {
        D1Spec::Fixed(v) => v,
        D1Spec::Range(lo, hi) => {
            let mut rng = unit_rng(subseed(rep_seed, 0));
            rng.random_range(lo..=hi)
        }
    };
    let (gamma, truth) = gen_variogram(config.d, d1, subseed(rep_seed, 1), &VariogramRecipe::default())?;
    if rep == 0 {
        io::write_variogram_csv(&config.out_dir.join("variogram_rep0.csv"), gamma.matrix())?;
    }
    let raw = sample_hr(&gamma, config.n, subseed(rep_seed, 2))?;
    let sample = extract_angles(&raw, config.fraction)?;

    let mut chi_within = Vec::new();
    for face in truth.faces() {
        let ix: Vec<usize> = face.zero_based().collect();
        for (a, &i) in ix.iter().enumerate() {
            for &j in &ix[a + 1..] {
                chi_within.push(chi_from_gamma(gamma.get(i, j))?);
            }
        }
    }

    let mut methods = Vec::with_capacity(config.methods.len());
    for (mi, &method) in config.methods.iter().enumerate() {
        let fit_cfg = FitConfig::new(
            config.k,
            method,
            config.restarts,
            subseed(rep_seed, 10 + mi as u64),
        );
        let model = fit(&sample, &fit_cfg)?;
        let (scores, centroid_scores) = score_model(config, &model, &truth)?;
        methods.push(MethodOutcome {
            method,
            model,
            scores,
            centroid_scores,
        });
    }

    Ok(RepOutcome {
        rep,
        d1,
        chi_within,
        methods,
    })
}

fn score_model(
    config: &SimulateConfig,
    model: &ClusterModel,
    truth: &FacePartition,
) -> Result<(Vec<ScoreSummary>, Vec<CentroidScore>)> {
    let mut scores = Vec::new();
    let mut centroid_scores = Vec::new();
    if model.centroids.len() != truth.num_faces() {
        return Ok((scores, centroid_scores));
    }
    for &ea in &config.eps_angle {
        for &ee in &config.eps_entry {
            scores.push(crate::faces::score(
                &model.centroids,
                truth,
                ea,
                ee,
                config.match_rule,
            )?);
        }
    }
    if let Some(first) = scores.first() {
        for r in &first.reports {
            centroid_scores.push(CentroidScore {
                angle_to_true: r.angle_to_true.unwrap_or(f64::NAN),
                max_outside: r.max_outside_entry.unwrap_or(f64::NAN),
                true_face_size: r.true_face.as_ref().map(|f| f.len()).unwrap_or(0),
            });
        }
    }
    Ok((scores, centroid_scores))
}

fn aggregate(config: &SimulateConfig, reps: &[RepOutcome]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (mi, &method) in config.methods.iter().enumerate() {
        for (ai, &ea) in config.eps_angle.iter().enumerate() {
            for (ei, &ee) in config.eps_entry.iter().enumerate() {
                let idx = ai * config.eps_entry.len() + ei;
                let mut errors = 0usize;
                let mut centroids = 0usize;
                let mut ae = 0usize;
                let mut re = 0usize;
                let mut aa = 0usize;
                let mut ra = 0usize;
                for rep in reps {
                    let m = &rep.methods[mi];
                    if let Some(s) = m.scores.get(idx) {
                        errors += s.total_errors;
                        centroids += s.reports.len();
                        ae += s.total_added_entrywise;
                        re += s.total_removed_entrywise;
                        aa += s.total_added_angular;
                        ra += s.total_removed_angular;
                    }
                }
                rows.push(AggregateRow {
                    method,
                    eps_angle: ea,
                    eps_entry: ee,
                    centroids,
                    errors,
                    error_rate: if centroids > 0 {
                        errors as f64 / centroids as f64
                    } else {
                        f64::NAN
                    },
                    added_entrywise: ae,
                    removed_entrywise: re,
                    added_angular: aa,
                    removed_angular: ra,
                });
            }
        }
    }
    rows
}

fn write_config_echo(config: &SimulateConfig) -> Result<()> {
    let d1 = match config.d1 {
        D1Spec::Fixed(v) => format!("{v}"),
        D1Spec::Range(lo, hi) => format!("{lo}:{hi}"),
    };
    let methods: Vec<&str> = config.methods.iter().map(|m| m.name()).collect();
    let rows = vec![format!(
        "{},{},{},{},{},{},{},{},{},{}",
        config.d,
        d1,
        config.n,
        io::fmt_f64(config.fraction),
        config.k,
        config.restarts,
        config.replications,
        config.seed,
        methods.join(";"),
        match config.match_rule {
            MatchRule::Fixed => "fixed",
            MatchRule::BestPermutation => "best_permutation",
        }
    )];
    io::write_table(
        &config.out_dir.join("run_config.csv"),
        "d,d1,n,fraction,k,restarts,replications,seed,methods,match_rule",
        &rows,
    )
}

fn write_replications_csv(config: &SimulateConfig, reps: &[RepOutcome]) -> Result<()> {
    let mut rows = Vec::new();
    for rep in reps {
        for m in &rep.methods {
            for (c, cs) in m.centroid_scores.iter().enumerate() {
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{},{}",
                    rep.rep,
                    rep.d1,
                    m.method.name(),
                    c + 1,
                    cs.true_face_size,
                    io::fmt_f64(cs.angle_to_true),
                    io::fmt_f64(cs.max_outside),
                    io::fmt_f64(m.model.cost_value),
                    m.model.iterations,
                    m.model.converged,
                ));
            }
        }
    }
    io::write_table(
        &config.out_dir.join("replications.csv"),
        "replication,d1,method,centroid,true_face_size,angle_to_true,max_outside_entry,reward,iterations,converged",
        &rows,
    )
}

fn write_aggregate_csv(config: &SimulateConfig, rows: &[AggregateRow]) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.method.name(),
                io::fmt_f64(r.eps_angle),
                io::fmt_f64(r.eps_entry),
                r.centroids,
                r.errors,
                io::fmt_f64(r.error_rate),
                r.added_entrywise,
                r.removed_entrywise,
                r.added_angular,
                r.removed_angular,
            )
        })
        .collect();
    io::write_table(
        &config.out_dir.join("aggregate.csv"),
        "method,eps_angle,eps_entry,centroids,errors,error_rate,added_entrywise,removed_entrywise,added_angular,removed_angular",
        &lines,
    )
}

fn write_first_rep_plots(config: &SimulateConfig, rep: &RepOutcome) -> Result<()> {
    // within-group tail dependence histogram
    let mut hist = Plot::new("within-group tail dependence", "chi", "count");
    hist.histogram(&rep.chi_within, 20, 0);
    hist.write(&config.out_dir.join("chi_hist.svg"))?;

    // sorted centroid entries, one series per centroid; dashed for the
    // second method
    let mut entries_plot = Plot::new("sorted centroid entries", "rank", "entry");
    for (mi, m) in rep.methods.iter().enumerate() {
        for (ci, c) in m.model.centroids.iter().enumerate() {
            let mut sorted: Vec<f64> = c.entries().to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
            let pts: Vec<(f64, f64)> = sorted
                .iter()
                .enumerate()
                .map(|(i, &v)| ((i + 1) as f64, v))
                .collect();
            let label = if ci == 0 {
                format!("{} c{}", m.method.name(), ci + 1)
            } else {
                String::new()
            };
            entries_plot.line(&label, pts, mi, mi == 1);
        }
    }
    entries_plot.vline(rep.d1 as f64);
    entries_plot.vline((config.d - rep.d1) as f64);
    entries_plot.write(&config.out_dir.join("sorted_entries.svg"))?;

    // minimal angle to a face of each dimension
    let mut curves = Plot::new("smallest angle to a face, by dimension", "dimension", "angle");
    for (mi, m) in rep.methods.iter().enumerate() {
        for (ci, c) in m.model.centroids.iter().enumerate() {
            let pts: Vec<(f64, f64)> = threshold_curve(c)
                .into_iter()
                .map(|(mdim, a)| (mdim as f64, a))
                .collect();
            let label = if ci == 0 {
                format!("{} c{}", m.method.name(), ci + 1)
            } else {
                String::new()
            };
            curves.line(&label, pts, mi, mi == 1);
        }
    }
    curves.vline(rep.d1 as f64);
    curves.vline((config.d - rep.d1) as f64);
    curves.write(&config.out_dir.join("threshold_curves.svg"))?;

    // added-index counts against the threshold, per detector
    let sweep: Vec<f64> = (1..=50).map(|i| i as f64 * 0.01).collect();
    let truth_sizes = [rep.d1, config.d - rep.d1];
    for (detector, fname) in [("entrywise", "error_counts_entrywise.svg"), ("angular", "error_counts_angular.svg")] {
        let mut p = Plot::new(
            &format!("added indices, {detector} thresholding"),
            "threshold",
            "count",
        );
        for (mi, m) in rep.methods.iter().enumerate() {
            let mut added_pts = Vec::new();
            let mut both_pts = Vec::new();
            for &eps in &sweep {
                let mut added = 0usize;
                let mut removed = 0usize;
                for (ci, c) in m.model.centroids.iter().enumerate() {
                    // centroid ci is matched to truth face ci here: the
                    // sweep illustrates threshold sensitivity on the
                    // first replication only
                    let truth_lo = if ci == 0 { 1 } else { rep.d1 + 1 };
                    let truth_hi = if ci == 0 { rep.d1 } else { config.d };
                    let detected: Vec<usize> = match detector {
                        "entrywise" => c
                            .entries()
                            .iter()
                            .enumerate()
                            .filter(|(_, &v)| v > eps)
                            .map(|(i, _)| i + 1)
                            .collect(),
                        _ => detect_angular(c, eps).indices().to_vec(),
                    };
                    added += detected
                        .iter()
                        .filter(|&&i| i < truth_lo || i > truth_hi)
                        .count();
                    let kept = detected
                        .iter()
                        .filter(|&&i| i >= truth_lo && i <= truth_hi)
                        .count();
                    let size = truth_hi - truth_lo + 1;
                    removed += size - kept;
                    let _ = truth_sizes;
                }
                added_pts.push((eps, added as f64));
                both_pts.push((eps, (added + removed) as f64));
            }
            p.line(&format!("{} added", m.method.name()), added_pts, mi, mi == 1);
            p.line("", both_pts, 5, mi == 1);
        }
        p.write(&config.out_dir.join(fname))?;
    }
    Ok(())
}

fn write_comparison_scatter(config: &SimulateConfig, reps: &[RepOutcome]) -> Result<()> {
    let mut plot = Plot::new(
        "angle to matched face vs largest outside entry",
        "angle to face",
        "max outside entry",
    );
    for (mi, &method) in config.methods.iter().enumerate() {
        let mut pts = Vec::new();
        for rep in reps {
            for cs in &rep.methods[mi].centroid_scores {
                if cs.angle_to_true.is_finite() {
                    pts.push((cs.angle_to_true, cs.max_outside));
                }
            }
        }
        plot.scatter(method.name(), pts, mi, 2.4);
    }
    plot.write(&config.out_dir.join("comparison_scatter.svg"))
}

/// How many cluster counts to fit.
#[derive(Debug, Clone, Copy)]
pub enum KSpec {
    Single(usize),
    Range(usize, usize),
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub input: PathBuf,
    pub raw: bool,
    pub rank_transform: bool,
    pub fraction: f64,
    pub k: KSpec,
    pub methods: Vec<Method>,
    pub restarts: usize,
    pub seed: u64,
    /// Angular thresholds for the per-k face statistics.
    pub eps_angle: Vec<f64>,
    pub out_dir: PathBuf,
}

/// Ranks transformed to the unit-Fréchet scale: `-1/log(r/(n+1))` with
/// `r` the within-column average rank.
pub fn rank_transform_to_frechet(rows: &[Vec<f64>]) -> Result<RawSample> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let n = rows.len();
    let d = rows[0].len();
    let mut out = vec![vec![0.0f64; d]; n];
    for c in 0..d {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            rows[i][c]
                .partial_cmp(&rows[j][c])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        // average ranks over ties
        let mut ranks = vec![0.0f64; n];
        let mut pos = 0usize;
        while pos < n {
            let mut end = pos;
            while end + 1 < n && rows[order[end + 1]][c] == rows[order[pos]][c] {
                end += 1;
            }
            let avg = (pos + end) as f64 / 2.0 + 1.0;
            for &oi in &order[pos..=end] {
                ranks[oi] = avg;
            }
            pos = end + 1;
        }
        for r in 0..n {
            let u = ranks[r] / (n as f64 + 1.0);
            out[r][c] = -1.0 / u.ln();
        }
    }
    RawSample::new(out)
}

#[derive(Debug, Clone)]
pub struct ClusterRunRow {
    pub method: Method,
    pub k: usize,
    pub reward: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn run_cluster(config: &ClusterConfig) -> Result<Vec<ClusterRunRow>> {
    let sample = load_sample(config)?;
    let ks: Vec<usize> = match config.k {
        KSpec::Single(k) => vec![k],
        KSpec::Range(lo, hi) => {
            if lo < 1 || lo > hi {
                return Err(Error::InvalidInput("bad k range".into()));
            }
            (lo..=hi).collect()
        }
    };

    let mut summary_rows = Vec::new();
    let mut kstat_rows = Vec::new();
    let mut out = Vec::new();
    for &method in &config.methods {
        for &k in &ks {
            let model = fit(
                &sample,
                &FitConfig::new(k, method, config.restarts, subseed(config.seed, k as u64)),
            )?;
            let stem = format!("{}_k{}", method.name(), k);
            io::write_angles_csv(
                &config.out_dir.join(format!("centroids_{stem}.csv")),
                &model.centroids,
            )?;
            let label_rows: Vec<String> = model
                .assignment
                .labels()
                .iter()
                .enumerate()
                .map(|(i, &l)| format!("{},{}", i + 1, l + 1))
                .collect();
            io::write_table(
                &config.out_dir.join(format!("labels_{stem}.csv")),
                "row,label",
                &label_rows,
            )?;

            for &eps in &config.eps_angle {
                let dims: Vec<usize> = model
                    .centroids
                    .iter()
                    .map(|c| detect_angular(c, eps).len())
                    .collect();
                let max_dim = dims.iter().copied().max().unwrap_or(0);
                let s: f64 = dims.iter().map(|&m| (m * m.saturating_sub(1)) as f64 / 2.0).sum();
                let reduced = 0.5 * (1.0 + (1.0 + 8.0 * s).sqrt());
                kstat_rows.push(format!(
                    "{},{},{},{},{}",
                    method.name(),
                    k,
                    io::fmt_f64(eps),
                    max_dim,
                    io::fmt_f64(reduced),
                ));
            }

            summary_rows.push(format!(
                "{},{},{},{},{},{}",
                method.name(),
                k,
                io::fmt_f64(model.cost_value),
                io::fmt_f64(1.0 - model.cost_value),
                model.iterations,
                model.converged,
            ));
            out.push(ClusterRunRow {
                method,
                k,
                reward: model.cost_value,
                objective: 1.0 - model.cost_value,
                iterations: model.iterations,
                converged: model.converged,
            });
        }
    }
    io::write_table(
        &config.out_dir.join("summary.csv"),
        "method,k,reward,objective,iterations,converged",
        &summary_rows,
    )?;
    io::write_table(
        &config.out_dir.join("kstats.csv"),
        "method,k,eps_angle,max_face_dim,reduced_dim",
        &kstat_rows,
    )?;

    if ks.len() > 1 {
        let mut p = Plot::new("clustering objective against k", "k", "objective");
        for (mi, &method) in config.methods.iter().enumerate() {
            let pts: Vec<(f64, f64)> = out
                .iter()
                .filter(|r| r.method == method)
                .map(|r| (r.k as f64, r.objective))
                .collect();
            p.line(method.name(), pts, mi, mi == 1);
        }
        p.write(&config.out_dir.join("cost_curve.svg"))?;

        let mut p = Plot::new("largest detected face dimension against k", "k", "max dim");
        for (mi, &method) in config.methods.iter().enumerate() {
            for (ei, &eps) in config.eps_angle.iter().enumerate() {
                let pts: Vec<(f64, f64)> = out
                    .iter()
                    .filter(|r| r.method == method)
                    .map(|r| {
                        let dim = kstat_rows
                            .iter()
                            .find_map(|row| {
                                let cols: Vec<&str> = row.split(',').collect();
                                if cols[0] == method.name()
                                    && cols[1] == r.k.to_string()
                                    && cols[2] == io::fmt_f64(eps)
                                {
                                    cols[3].parse::<f64>().ok()
                                } else {
                                    None
                                }
                            })
                            .unwrap_or(f64::NAN);
                        (r.k as f64, dim)
                    })
                    .collect();
                let label = if ei == 0 { method.name().to_string() } else { String::new() };
                p.line(&label, pts, mi, mi == 1);
            }
        }
        p.write(&config.out_dir.join("face_dims.svg"))?;
    }

    Ok(out)
}

fn load_sample(config: &ClusterConfig) -> Result<AngularSample> {
    if config.raw {
        let raw = io::read_raw_csv(&config.input)?;
        let raw = if config.rank_transform {
            rank_transform_to_frechet(raw.rows())?
        } else {
            raw
        };
        extract_angles(&raw, config.fraction)
    } else {
        io::read_angular_sample_csv(&config.input)
    }
}

#[derive(Debug, Clone)]
pub struct FacesConfig {
    pub input: PathBuf,
    pub eps_angle: Vec<f64>,
    pub eps_entry: Vec<f64>,
    pub truth: Option<PathBuf>,
    pub match_rule: MatchRule,
    pub out_dir: PathBuf,
}

pub fn run_faces(config: &FacesConfig) -> Result<()> {
    let centroids = io::read_angles_csv(&config.input)?;
    let truth = config
        .truth
        .as_ref()
        .map(|p| io::read_partition_csv(p))
        .transpose()?;

    let mut rows = Vec::new();
    let fmt_opt = |v: Option<f64>| v.map(io::fmt_f64).unwrap_or_default();
    let fmt_cnt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let fmt_flag = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
    for (detector, eps_list) in [("angular", &config.eps_angle), ("entrywise", &config.eps_entry)]
    {
        for &eps in eps_list.iter() {
            let reports = match &truth {
                Some(t) => {
                    crate::faces::score(&centroids, t, eps, eps, config.match_rule)?.reports
                }
                None => crate::faces::detect_only(&centroids, eps, eps),
            };
            for r in &reports {
                let outcome = if detector == "angular" {
                    &r.angular
                } else {
                    &r.entrywise
                };
                let detected = outcome
                    .detected
                    .as_ref()
                    .map(|f| f.join_semicolon())
                    .unwrap_or_default();
                rows.push(format!(
                    "{},{},{},{},{},{},{},{},{}",
                    r.centroid_index + 1,
                    detector,
                    io::fmt_f64(eps),
                    detected,
                    fmt_opt(r.angle_to_true),
                    fmt_opt(r.max_outside_entry),
                    fmt_cnt(outcome.added),
                    fmt_cnt(outcome.removed),
                    fmt_flag(r.error_flag),
                ));
            }
        }
    }
    io::write_table(
        &config.out_dir.join("face_report.csv"),
        "centroid_id,detector,eps,detected_indices,angle_to_true,max_outside_entry,added,removed,error_flag",
        &rows,
    )?;

    let mut curves = Plot::new("smallest angle to a face, by dimension", "dimension", "angle");
    let mut entries_plot = Plot::new("sorted centroid entries", "rank", "entry");
    for (ci, c) in centroids.iter().enumerate() {
        let pts: Vec<(f64, f64)> = threshold_curve(c)
            .into_iter()
            .map(|(m, a)| (m as f64, a))
            .collect();
        curves.line(&format!("c{}", ci + 1), pts, ci, false);
        let mut sorted: Vec<f64> = c.entries().to_vec();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let pts: Vec<(f64, f64)> = sorted
            .iter()
            .enumerate()
            .map(|(i, &v)| ((i + 1) as f64, v))
            .collect();
        entries_plot.line(&format!("c{}", ci + 1), pts, ci, false);
    }
    curves.write(&config.out_dir.join("threshold_curves.svg"))?;
    entries_plot.write(&config.out_dir.join("sorted_entries.svg"))?;
    Ok(())
}

/// Which structural checks to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSuite {
    Eigen,
    Bounds,
    Conditions,
    All,
}

#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub suite: CheckSuite,
    pub trials: usize,
    pub seed: u64,
    /// Optional user law file for the bounds checks.
    pub law: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub name: String,
    pub trials: usize,
    pub passed: bool,
    /// Distance to the nearest failure; negative means failed.
    pub worst_slack: f64,
    pub detail: String,
}

impl CheckRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name,
            self.trials,
            if self.passed { "pass" } else { "FAIL" },
            io::fmt_f64(self.worst_slack),
            self.detail
        )
    }
}

pub fn run_check(config: &CheckConfig) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let wants = |s: CheckSuite| config.suite == CheckSuite::All || config.suite == s;

    if let Some(path) = &config.law {
        rows.push(check_user_law(path)?);
    }
    if wants(CheckSuite::Eigen) {
        rows.push(check_eigen_sum_inequality(config.trials, config.seed));
        rows.push(check_equality_construction(config.seed));
        rows.push(check_triangle_sweep(config.trials, config.seed));
    }
    if wants(CheckSuite::Bounds) {
        rows.push(check_mu_bound_fixtures());
        rows.push(check_mu_bound_random(config.trials.min(500), config.seed));
        rows.push(check_lambda1_vs_mu(config.trials.min(500), config.seed));
    }
    if wants(CheckSuite::Conditions) {
        rows.push(check_two_face_conditions(config.seed));
        rows.push(check_counterexample());
        rows.push(check_balance_cases());
        rows.push(check_tilt_contrast());
    }
    Ok(rows)
}

fn check_user_law(path: &Path) -> Result<CheckRow> {
    let law = io::read_law_csv(path)?;
    let moments = theory::law_moments(&law);
    let trace = moments.sigma.trace();
    let mut passed = (trace - 1.0).abs() < 1e-10;
    let mut slack = 1e-10 - (trace - 1.0).abs();
    let mut detail = format!("atoms={} trace={trace:.12}", law.num_atoms());
    if moments.mu.is_some() {
        let r = theory::check_mu_bounds(&law)?;
        passed &= r.bounds_hold;
        slack = slack.min((r.mu - r.lower).min(r.upper - r.mu));
        detail.push_str(&format!(" mu={:.12}", r.mu));
    }
    Ok(CheckRow {
        name: "law_file".into(),
        trials: 1,
        passed,
        worst_slack: slack,
        detail,
    })
}

fn check_eigen_sum_inequality(trials: usize, seed: u64) -> CheckRow {
    use crate::eigen::{principal_eigenpair, top_k_eigenvalues, MomentMatrix};
    use crate::mat::SquareMatrix;
    let mut worst = f64::INFINITY;
    let mut passed = true;
    let mut rng = unit_rng(subseed(seed, 101));
    for _ in 0..trials {
        let d = rng.random_range(2..=8usize);
        let k = rng.random_range(1..=d);
        let mut total = SquareMatrix::zeros(d);
        let mut lhs = 0.0;
        for _ in 0..k {
            let mut part = SquareMatrix::zeros(d);
            let vectors = d + rng.random_range(0..3usize);
            for _ in 0..vectors {
                let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                part.add_outer(&v, rng.random::<f64>() + 0.1);
            }
            part.symmetrize();
            let part = MomentMatrix::from_gram_unchecked(part);
            let (l, _) = principal_eigenpair(&part).expect("nonzero");
            lhs += l;
            total = total.add(part.matrix());
        }
        let total = MomentMatrix::from_gram_unchecked(total);
        let rhs: f64 = top_k_eigenvalues(&total, k).expect("k in range").iter().sum();
        let slack = rhs + 1e-8 - lhs;
        worst = worst.min(slack);
        if slack < 0.0 {
            passed = false;
        }
    }
    CheckRow {
        name: "eigen_sum_inequality".into(),
        trials,
        passed,
        worst_slack: worst,
        detail: "sum l1(M_i) <= sum_i<=k l_i(sum M) + 1e-8".into(),
    }
}

fn check_equality_construction(seed: u64) -> CheckRow {
    use crate::eigen::{equality_construction, top_k_eigenvalues, MomentMatrix};
    use crate::mat::SquareMatrix;
    let trials = 100;
    let mut worst = f64::INFINITY;
    let mut passed = true;
    let mut rng = unit_rng(subseed(seed, 102));
    for _ in 0..trials {
        let d = rng.random_range(2..=8usize);
        let k = rng.random_range(1..=d);
        let mut g = SquareMatrix::zeros(d);
        for _ in 0..d + 2 {
            let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            g.add_outer(&v, rng.random::<f64>() + 0.1);
        }
        g.symmetrize();
        let m = MomentMatrix::from_gram_unchecked(g);
        let parts = equality_construction(&m, k).expect("k in range");
        let lead: f64 = parts
            .iter()
            .map(|p| p.sym_eigen().0[0].max(0.0))
            .sum();
        let target: f64 = top_k_eigenvalues(&m, k).expect("k in range").iter().sum();
        let err = (lead - target).abs();
        worst = worst.min(1e-8 - err);
        if err > 1e-8 {
            passed = false;
        }
    }
    CheckRow {
        name: "equality_construction".into(),
        trials,
        passed,
        worst_slack: worst,
        detail: "attains sum of top-k eigenvalues within 1e-8".into(),
    }
}

fn check_triangle_sweep(trials: usize, seed: u64) -> CheckRow {
    let mut rng = unit_rng(subseed(seed, 103));
    let mut passed = true;
    let mut count = 0usize;
    for _ in 0..trials {
        let a = rng.random::<f64>() * 10.0 + 1e-9;
        let b = rng.random::<f64>() * 10.0 + 1e-9;
        let c = rng.random::<f64>() * 10.0;
        let e = rng.random::<f64>() * 10.0;
        if c + e <= 0.0 {
            continue;
        }
        count += 1;
        if !theory::check_triangle_inequality(a, b, c, e).expect("valid inputs") {
            passed = false;
        }
    }
    CheckRow {
        name: "triangle_inequality".into(),
        trials: count,
        passed,
        worst_slack: if passed { 0.0 } else { -1.0 },
        detail: "strict split inequality on random positive tuples".into(),
    }
}

fn check_mu_bound_fixtures() -> CheckRow {
    let mut passed = true;
    let mut detail = String::new();
    for d in 2..=8 {
        let r = theory::check_mu_bounds(&fixtures::case_independence(d)).expect("balanced");
        passed &= r.bounds_hold && r.lower_attained && r.lower_iff_verified == Some(true);
        let r = theory::check_mu_bounds(&fixtures::case_complete_dependence(d)).expect("balanced");
        passed &= r.bounds_hold && r.upper_attained && r.upper_iff_verified == Some(true);
    }
    let r = theory::check_mu_bounds(&fixtures::exchangeable_mixture(2, 0.5)).expect("balanced");
    passed &= r.bounds_hold && !r.lower_attained && !r.upper_attained;
    if !passed {
        detail.push_str("fixture bound violated");
    }
    CheckRow {
        name: "mu_bounds_fixtures".into(),
        trials: 15,
        passed,
        worst_slack: if passed { 0.0 } else { -1.0 },
        detail: "boundary laws attain exactly their bound".into(),
    }
}

fn check_mu_bound_random(trials: usize, seed: u64) -> CheckRow {
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for t in 0..trials {
        let d = 2 + (t % 6);
        let law = fixtures::cyclic_balanced(subseed(seed, 200 + t as u64), d, 1 + t % 3);
        let r = theory::check_mu_bounds(&law).expect("balanced by construction");
        let slack = (r.mu - r.lower).min(r.upper - r.mu);
        worst = worst.min(slack);
        if !r.bounds_hold {
            passed = false;
        }
    }
    CheckRow {
        name: "mu_bounds_random".into(),
        trials,
        passed,
        worst_slack: worst,
        detail: "1/d <= mu <= 1/sqrt(d) on balanced laws".into(),
    }
}

fn check_lambda1_vs_mu(trials: usize, seed: u64) -> CheckRow {
    use crate::eigen::top_k_eigenvalues;
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for t in 0..trials {
        let d = 2 + (t % 6);
        let law = fixtures::cyclic_balanced(subseed(seed, 300 + t as u64), d, 1 + t % 3);
        let m = theory::law_moments(&law);
        let mu = m.mu.expect("balanced");
        let l1 = top_k_eigenvalues(&m.sigma, 1).expect("k=1")[0];
        let slack = l1 - mu + 1e-12;
        worst = worst.min(slack);
        if slack < 0.0 {
            passed = false;
        }
    }
    CheckRow {
        name: "lambda1_geq_mu".into(),
        trials,
        passed,
        worst_slack: worst,
        detail: "largest eigenvalue dominates the balanced mean".into(),
    }
}

fn check_two_face_conditions(seed: u64) -> CheckRow {
    let trials = 50;
    let mut passed = true;
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let (law, partition) = fixtures::two_face_balanced(subseed(seed, 400 + t as u64));
        let r = theory::check_sufficient_condition(&law, &partition).expect("on-face law");
        worst = worst.min(r.minmax_slack);
        let Some(o) = r.oracle else {
            passed = false;
            continue;
        };
        if !r.minmax_holds || !o.centroids_on_faces || (o.reward - r.on_face_reward).abs() > 1e-9 {
            passed = false;
        }
    }
    CheckRow {
        name: "two_face_sufficient_condition".into(),
        trials,
        passed,
        worst_slack: worst,
        detail: "min-max condition holds and the oracle optimum is on-face".into(),
    }
}

fn check_counterexample() -> CheckRow {
    let (law, grouping, _) = fixtures::three_block_counterexample();
    let r = theory::check_sufficient_condition(&law, &grouping).expect("on-face law");
    let o = r.oracle.expect("small instance");
    let margin = o.reward - r.on_face_reward;
    let passed = !r.minmax_holds && margin > 1e-6;
    CheckRow {
        name: "three_block_counterexample".into(),
        trials: 1,
        passed,
        worst_slack: margin,
        detail: "condition fails and regrouping strictly improves the value".into(),
    }
}

fn check_balance_cases() -> CheckRow {
    let mut passed = true;
    let law4 = fixtures::case_independence(4);
    let p22 = FacePartition::from_block_sizes(&[2, 2], None).expect("partition");
    let r = theory::check_kmeans_balance(&law4, &p22).expect("on-face");
    passed &= r.sizes_maximal && r.kmeans_can_fail == Some(false);
    let p13 = FacePartition::from_block_sizes(&[1, 3], None).expect("partition");
    let r13 = theory::check_kmeans_balance(&law4, &p13).expect("on-face");
    passed &= !r13.sizes_maximal && r13.kmeans_can_fail == Some(true);
    let law3 = fixtures::case_independence(3);
    let p12 = FacePartition::from_block_sizes(&[1, 2], None).expect("partition");
    let r12 = theory::check_kmeans_balance(&law3, &p12).expect("on-face");
    passed &= r12.sizes_maximal && r12.kmeans_can_fail == Some(false);
    CheckRow {
        name: "kmeans_size_balance".into(),
        trials: 3,
        passed,
        worst_slack: if passed { 0.0 } else { -1.0 },
        detail: "equal sizes stay on-face, unbalanced sizes provably fail".into(),
    }
}

fn check_tilt_contrast() -> CheckRow {
    let (law, partition) = fixtures::kmeans_tilt(0.01);
    let km = theory::check_kmeans_balance(&law, &partition).expect("on-face");
    let kpc = theory::check_sufficient_condition(&law, &partition).expect("on-face");
    let km_fail = km.kmeans_can_fail == Some(true);
    let kpc_ok = kpc.minmax_holds
        && kpc.oracle.as_ref().map(|o| o.centroids_on_faces) == Some(true);
    CheckRow {
        name: "tilted_independence_contrast".into(),
        trials: 1,
        passed: km_fail && kpc_ok,
        worst_slack: kpc.minmax_slack,
        detail: "linear method flips away, quadratic method stays on-face".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn tiny_config(dir: &Path, seed: u64) -> SimulateConfig {
        let mut c = SimulateConfig::new(dir.to_path_buf());
        c.d = 8;
        c.d1 = D1Spec::Range(2, 4);
        c.n = 300;
        c.fraction = 0.1;
        c.restarts = 10;
        c.replications = 3;
        c.seed = seed;
        c
    }

    #[test]
    fn simulate_writes_expected_files() {
        let dir = TempDir::new().unwrap();
        let cfg = tiny_config(dir.path(), 5);
        let out = run_simulate(&cfg).unwrap();
        assert_eq!(out.replications, 3);
        for f in [
            "replications.csv",
            "aggregate.csv",
            "run_config.csv",
            "variogram_rep0.csv",
            "chi_hist.svg",
            "sorted_entries.svg",
            "threshold_curves.svg",
            "error_counts_entrywise.svg",
            "error_counts_angular.svg",
            "comparison_scatter.svg",
        ] {
            assert!(dir.path().join(f).exists(), "missing {f}");
        }
        assert!(!out.aggregates.is_empty());
    }

    #[test]
    fn simulate_is_reproducible() {
        let dir1 = TempDir::new().unwrap();
        let dir2 = TempDir::new().unwrap();
        run_simulate(&tiny_config(dir1.path(), 9)).unwrap();
        run_simulate(&tiny_config(dir2.path(), 9)).unwrap();
        for f in ["replications.csv", "aggregate.csv"] {
            let a = std::fs::read(dir1.path().join(f)).unwrap();
            let b = std::fs::read(dir2.path().join(f)).unwrap();
            assert_eq!(a, b, "{f} differs between identical runs");
        }
    }

    #[test]
    fn cluster_runs_on_angle_file() {
        let dir = TempDir::new().unwrap();
        let angles: Vec<crate::angle::UnitAngle> = (0..12)
            .map(|i| {
                let t = 0.1 + 0.12 * i as f64;
                crate::angle::normalize(&[t.cos().abs().max(1e-6), t.sin().abs().max(1e-6)])
                    .unwrap()
            })
            .collect();
        let input = dir.path().join("angles.csv");
        io::write_angles_csv(&input, &angles).unwrap();
        let cfg = ClusterConfig {
            input,
            raw: false,
            rank_transform: false,
            fraction: 0.1,
            k: KSpec::Range(1, 3),
            methods: vec![Method::KMeans, Method::Kpc],
            restarts: 5,
            seed: 3,
            eps_angle: vec![0.2, 0.25, 1.0 / 3.0],
            out_dir: dir.path().to_path_buf(),
        };
        let rows = run_cluster(&cfg).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("kstats.csv").exists());
        assert!(dir.path().join("centroids_kmeans_k2.csv").exists());
        assert!(dir.path().join("cost_curve.svg").exists());
        // reward never decreases in k
        for m in [Method::KMeans, Method::Kpc] {
            let r: Vec<f64> = rows
                .iter()
                .filter(|x| x.method == m)
                .map(|x| x.reward)
                .collect();
            assert!(r[1] >= r[0] - 1e-9 && r[2] >= r[1] - 1e-9);
        }
    }

    #[test]
    fn rank_transform_produces_positive_frechet_scale() {
        let rows = vec![
            vec![3.0, 10.0],
            vec![1.0, 30.0],
            vec![2.0, 20.0],
            vec![5.0, 20.0],
        ];
        let out = rank_transform_to_frechet(&rows).unwrap();
        assert_eq!(out.len(), 4);
        for row in out.rows() {
            for &v in row {
                assert!(v > 0.0);
            }
        }
        // largest observation maps to the largest transformed value
        let col0: Vec<f64> = out.rows().iter().map(|r| r[0]).collect();
        assert!(col0[3] > col0[0] && col0[0] > col0[2] && col0[2] > col0[1]);
        // ties share the average rank
        let col1: Vec<f64> = out.rows().iter().map(|r| r[1]).collect();
        assert_eq!(col1[2], col1[3]);
    }

    #[test]
    fn faces_report_with_truth() {
        let dir = TempDir::new().unwrap();
        let centroids = vec![
            crate::angle::normalize(&[1.0, 1.0, 0.0, 0.0]).unwrap(),
            crate::angle::normalize(&[0.0, 0.0, 1.0, 1.0]).unwrap(),
        ];
        let input = dir.path().join("centroids.csv");
        io::write_angles_csv(&input, &centroids).unwrap();
        let truth_path = dir.path().join("truth.csv");
        let p = FacePartition::from_block_sizes(&[2, 2], None).unwrap();
        io::write_partition_csv(&truth_path, &p).unwrap();
        let cfg = FacesConfig {
            input,
            eps_angle: vec![0.1],
            eps_entry: vec![0.1],
            truth: Some(truth_path),
            match_rule: MatchRule::BestPermutation,
            out_dir: dir.path().to_path_buf(),
        };
        run_faces(&cfg).unwrap();
        let report = std::fs::read_to_string(dir.path().join("face_report.csv")).unwrap();
        assert!(report.lines().count() >= 5);
        assert!(report.contains("angular"));
        assert!(report.contains("entrywise"));
        assert!(report.contains("1;2"));
    }

    #[test]
    fn check_suites_pass() {
        let cfg = CheckConfig {
            suite: CheckSuite::All,
            trials: 200,
            seed: 11,
            law: None,
        };
        let rows = run_check(&cfg).unwrap();
        assert!(rows.len() >= 9);
        for r in &rows {
            assert!(r.passed, "{} failed: {}", r.name, r.detail);
        }
    }

    #[test]
    fn check_rejects_corrupt_law_file() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("law.csv");
        std::fs::write(&path, "weight,x1,x2\n0.5,1.0,0.0\n0.4,0.0,1.0\n").unwrap();
        let cfg = CheckConfig {
            suite: CheckSuite::Bounds,
            trials: 10,
            seed: 1,
            law: Some(path),
        };
        assert!(run_check(&cfg).is_err());
    }
}
