//! Convergence experiments: a pool of `M` diagrams, estimators fitted on
//! subsets of size `N`, and their `OT_p^p` error against the pool mean.
//!
//! Seeding: cloud `i` of the pool is sampled with `config.seed` on ChaCha
//! stream `i`. The subset for `(N, replicate)` is drawn from a generator seeded
//! with `config.seed ^ SUBSET_SEED_MIX` on stream `(N << 32) | replicate`, so
//! every `(p, tau)` pair sees the same subsets and no result depends on the
//! order in which jobs run.
//!
//! Both the estimator and the reference are quantized on the same
//! [`QuadraturePartition`] before calling [`ot_distance`]. Signed estimates
//! are handled as `OT(mu_hat+, reference + mu_hat-)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainGeometry, Order, QuadraturePartition};
use crate::homology::{rips_persistence, HomologyDegree};
use crate::measures::{empirical_mean, PersistenceMeasure};
use crate::samplers::{sample_cloud, SamplerSpec, Shape};
use crate::transport::ot_distance;
use crate::wavelet::{
    partition_masses, partition_measure, EstimatorLevels, ThresholdRule, WaveletEstimator,
};

pub const SUBSET_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shape: Shape,
    /// Points per cloud.
    pub n: usize,
    /// Variance of the additive Gaussian noise.
    pub noise_var: f64,
    /// Size of the reference pool.
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "Ns")]
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
    pub taus: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Number of strips `K`; `None` means `ceil(log2 N)`.
    #[serde(rename = "K")]
    pub strips: Option<usize>,
    /// Detail depth `J`; `None` means `ceil(log2 N)`.
    #[serde(rename = "J")]
    pub depth: Option<usize>,
    pub degree: HomologyDegree,
    /// Support radius; `None` fits the smallest power of two around the pool.
    pub radius: Option<f64>,
    /// Ground norm of the transport cost.
    pub q: f64,
    pub quadrature: QuadraturePartition,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Record wall-clock seconds per job. Off by default so that record files
    /// are reproducible byte for byte.
    pub timing: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            shape: Shape::torus(),
            n: 200,
            noise_var: 0.5,
            m: 2000,
            ns: vec![10, 20, 35, 60, 100, 160, 200],
            ps: vec![2.0],
            taus: vec![0.0],
            replicates: 10,
            seed: 7,
            strips: None,
            depth: None,
            degree: HomologyDegree::H1,
            radius: None,
            q: 2.0,
            quadrature: QuadraturePartition {
                resolution: 1,
                depth: 8,
            },
            threads: 0,
            timing: false,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler(0).validate()?;
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.ns.is_empty() || self.ps.is_empty() || self.taus.is_empty() {
            return bad("Ns, ps and taus must be nonempty".into());
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n == 0 || n > self.m) {
            return bad(format!(
                "every N must lie in 1..=M (M = {}), got {n}",
                self.m
            ));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if let Some(p) = self.ps.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
            return bad(format!("p must be finite and >= 1, got {p}"));
        }
        if let Some(t) = self.taus.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return bad(format!("tau must be finite and >= 0, got {t}"));
        }
        Order::finite(self.q)?;
        if let Some(r) = self.radius {
            DomainGeometry::new(r)?;
        }
        QuadraturePartition::new(self.quadrature.resolution, self.quadrature.depth)?;
        if self.strips == Some(0) || self.depth == Some(0) {
            return bad("K and J must be at least 1".into());
        }
        Ok(())
    }

    pub fn sampler(&self, stream: u64) -> SamplerSpec {
        SamplerSpec::new(
            self.shape,
            self.n,
            self.noise_var.max(0.0).sqrt(),
            self.seed,
        )
        .with_stream(stream)
    }

    pub fn levels(&self, samples: usize) -> Result<EstimatorLevels> {
        let auto = EstimatorLevels::auto(samples);
        EstimatorLevels::new(
            self.strips.unwrap_or(auto.strips),
            self.depth.unwrap_or(auto.depth),
        )
    }

    fn subset_rng(&self, samples: usize, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ SUBSET_SEED_MIX);
        rng.set_stream(((samples as u64) << 32) | replicate as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub p: f64,
    pub tau: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub replicate: usize,
    /// `OT_p^p(estimator, reference)`, both quantized.
    pub error: f64,
    /// Nonzero detail coefficients after thresholding.
    pub nnz_coeffs: usize,
    pub seconds: f64,
}

/// Everything a convergence run produces besides the records themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub radius: f64,
    pub atoms: usize,
    pub mass: f64,
    /// Pool mass that fell outside `Omega_R` or on the diagonal.
    pub lost_mass: f64,
    pub quadrature: QuadraturePartition,
    pub quantized_atoms: usize,
    /// Per `p`: cost of moving every reference atom to its representative
    /// point, an upper bound on `OT_p^p(reference, quantized reference)`.
    pub quadrature_error: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRun {
    pub records: Vec<ConvergenceRecord>,
    pub reference: ReferenceSummary,
}

/// Persistence diagrams of `count` sampled clouds, in stream order.
pub fn diagram_pool(config: &ExperimentConfig, count: usize) -> Result<Vec<PersistenceMeasure>> {
    (0..count as u64)
        .into_par_iter()
        .map(|stream| {
            let cloud = sample_cloud(&config.sampler(stream))?;
            Ok(rips_persistence(&cloud)?.degree(config.degree).clone())
        })
        .collect()
}

pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceRun> {
    config.validate()?;
    thread_pool(config)?.install(|| {
        let diagrams = diagram_pool(config, config.m)?;
        run_on_pool(config, &diagrams)
    })
}

/// Like [`run_convergence`], with the first `M` of `diagrams` as the pool.
pub fn run_convergence_on(
    config: &ExperimentConfig,
    diagrams: &[PersistenceMeasure],
) -> Result<ConvergenceRun> {
    config.validate()?;
    if diagrams.len() < config.m {
        return Err(Error::InvalidInput(format!(
            "the pool needs M = {} diagrams, got {}",
            config.m,
            diagrams.len()
        )));
    }
    thread_pool(config)?.install(|| run_on_pool(config, &diagrams[..config.m]))
}

fn thread_pool(config: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn run_on_pool(
    config: &ExperimentConfig,
    diagrams: &[PersistenceMeasure],
) -> Result<ConvergenceRun> {
    let geom = match config.radius {
        Some(r) => DomainGeometry::new(r)?,
        None => DomainGeometry::fitting(
            diagrams
                .iter()
                .flat_map(|d| d.atoms().iter().map(|a| (a.birth, a.death))),
        )?,
    };
    let q = Order::finite(config.q)?;
    let partition = config.quadrature;
    let mean = empirical_mean(diagrams)?.measure;
    let (masses, lost_mass) = partition_masses(&mean, &geom, &partition);
    let reference = partition_measure(&masses, &geom, &partition)?.positive;
    let quadrature_error = config
        .ps
        .iter()
        .map(|&p| (p, quadrature_cost(&mean, &geom, &partition, p, q)))
        .collect();
    let summary = ReferenceSummary {
        radius: geom.radius(),
        atoms: mean.len(),
        mass: mean.total_mass(),
        lost_mass,
        quadrature: partition,
        quantized_atoms: reference.len(),
        quadrature_error,
    };

    let jobs: Vec<(usize, usize)> = config
        .ns
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<Vec<ConvergenceRecord>> = jobs
        .par_iter()
        .map(|&(samples, replicate)| {
            run_job(config, diagrams, &geom, &reference, q, samples, replicate).map_err(|e| {
                Error::Job {
                    samples,
                    replicate,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<ConvergenceRecord> = results.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.p, a.tau, a.samples, a.replicate)
            .partial_cmp(&(b.p, b.tau, b.samples, b.replicate))
            .expect("finite record keys")
    });
    Ok(ConvergenceRun {
        records,
        reference: summary,
    })
}

fn run_job(
    config: &ExperimentConfig,
    diagrams: &[PersistenceMeasure],
    geom: &DomainGeometry,
    reference: &PersistenceMeasure,
    q: Order,
    samples: usize,
    replicate: usize,
) -> Result<Vec<ConvergenceRecord>> {
    let start = Instant::now();
    let mut rng = config.subset_rng(samples, replicate);
    let mut chosen = sample(&mut rng, diagrams.len(), samples).into_vec();
    chosen.sort_unstable();
    let subset: Vec<PersistenceMeasure> = chosen.iter().map(|&i| diagrams[i].clone()).collect();
    let base = WaveletEstimator::estimate(&subset, *geom, config.levels(samples)?)?;
    let shared = start.elapsed().as_secs_f64();

    let mut records = Vec::new();
    for &p in &config.ps {
        for &tau in &config.taus {
            let start = Instant::now();
            let estimator = if tau > 0.0 {
                base.apply_threshold(&ThresholdRule::new(tau, p, samples)?)
            } else {
                base.clone()
            };
            let masses = estimator.partition_masses(&config.quadrature)?;
            let signed = partition_measure(&masses, geom, &config.quadrature)?;
            let target = reference.plus(&signed.negative);
            let (_, plan) = ot_distance(&signed.positive, &target, p, q)?;
            let seconds = if config.timing {
                shared + start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            records.push(ConvergenceRecord {
                p,
                tau,
                samples,
                replicate,
                error: plan.total_cost.max(0.0),
                nnz_coeffs: estimator.nonzero_details(),
                seconds,
            });
        }
    }
    Ok(records)
}

/// `sum_x w(x) min(|x - c(x)|_q^p, d(x)^p + d(c(x))^p)` where `c(x)` is the
/// representative point of the partition square of `x`: the cost of a
/// coupling between a measure and its quantization.
pub fn quadrature_cost(
    measure: &PersistenceMeasure,
    geom: &DomainGeometry,
    partition: &QuadraturePartition,
    p: f64,
    q: Order,
) -> f64 {
    let diagonal = |t1: f64, t2: f64| q.norm((t2 - t1) / 2.0, (t1 - t2) / 2.0).powf(p);
    measure
        .atoms()
        .iter()
        .filter_map(|a| {
            let (u, v) = geom.unit_coords(a.birth, a.death).ok()?;
            let square = partition.square_of(u, v)?;
            let (cu, cv) = partition.unit_center(&square);
            let (c1, c2) = geom.from_unit_square(cu, cv);
            let direct = q.norm(a.birth - c1, a.death - c2).powf(p);
            Some(a.weight * direct.min(diagonal(a.birth, a.death) + diagonal(c1, c2)))
        })
        .sum()
}

pub fn write_records(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "p",
        "tau",
        "N",
        "replicate",
        "error",
        "nnz_coeffs",
        "seconds",
    ])?;
    for r in records {
        writer.write_record([
            r.p.to_string(),
            r.tau.to_string(),
            r.samples.to_string(),
            r.replicate.to_string(),
            format!("{:e}", r.error),
            r.nnz_coeffs.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .enumerate()
        .map(|(row, rec)| {
            rec.map_err(|e: csv::Error| Error::Parse {
                path: path.to_path_buf(),
                row: row + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `a N^-b`
    Power,
    /// `a N^-b log2 N`
    PowerLog,
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateModel::Power => "power",
            RateModel::PowerLog => "power_log",
        })
    }
}

impl FromStr for RateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power" => Ok(RateModel::Power),
            "power_log" => Ok(RateModel::PowerLog),
            other => Err(Error::InvalidInput(format!(
                "unknown rate model {other:?} (expected power or power_log)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub p: f64,
    pub tau: f64,
    pub model: RateModel,
    pub a: f64,
    pub b: f64,
    /// Root mean square of the log-space residuals.
    pub residual: f64,
}

/// Mean error per `N`, for records sharing one `(p, tau)`.
pub fn mean_errors(records: &[ConvergenceRecord]) -> BTreeMap<usize, f64> {
    let mut sums: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        let entry = sums.entry(r.samples).or_default();
        entry.0 += r.error;
        entry.1 += 1;
    }
    sums.into_iter()
        .map(|(n, (s, c))| (n, s / c as f64))
        .collect()
}

/// Least-squares fit of the replicate means in log space.
pub fn fit_rate(records: &[ConvergenceRecord], model: RateModel) -> Result<RateFit> {
    let Some(first) = records.first() else {
        return Err(Error::InvalidInput("no records to fit".into()));
    };
    if records.iter().any(|r| r.p != first.p || r.tau != first.tau) {
        return Err(Error::InvalidInput(
            "fit_rate needs records of a single (p, tau)".into(),
        ));
    }
    let means = mean_errors(records);
    if means.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "fit_rate needs at least 3 distinct N, got {}",
            means.len()
        )));
    }
    let mut xs = Vec::with_capacity(means.len());
    let mut ys = Vec::with_capacity(means.len());
    for (&n, &mean) in &means {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "mean error at N = {n} is not positive: {mean}"
            )));
        }
        let mut y = mean.ln();
        if model == RateModel::PowerLog {
            if n < 2 {
                return Err(Error::InvalidInput("power_log needs N >= 2".into()));
            }
            y -= (n as f64).log2().ln();
        }
        xs.push((n as f64).ln());
        ys.push(y);
    }
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        p: first.p,
        tau: first.tau,
        model,
        a: intercept.exp(),
        b: -slope,
        residual: (sse / len).sqrt(),
    })
}

/// One fit per `(p, tau)` group, in record order.
pub fn fit_groups(records: &[ConvergenceRecord], model: RateModel) -> Result<Vec<RateFit>> {
    let mut groups: Vec<((f64, f64), Vec<ConvergenceRecord>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(key, _)| *key == (r.p, r.tau)) {
            Some((_, group)) => group.push(r.clone()),
            None => groups.push(((r.p, r.tau), vec![r.clone()])),
        }
    }
    groups
        .iter()
        .map(|(_, group)| fit_rate(group, model))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn records(p: f64, tau: f64, f: impl Fn(f64) -> f64) -> Vec<ConvergenceRecord> {
        [10usize, 20, 50, 100, 200]
            .iter()
            .flat_map(|&n| (0..2).map(move |r| (n, r)))
            .map(|(n, replicate)| ConvergenceRecord {
                p,
                tau,
                samples: n,
                replicate,
                error: f(n as f64),
                nnz_coeffs: 0,
                seconds: 0.0,
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let fit = fit_rate(&records(2.0, 0.0, |n| 7.0 * n.powf(-0.5)), RateModel::Power).unwrap();
        assert!((fit.a - 7.0).abs() < 1e-9, "{fit:?}");
        assert!((fit.b - 0.5).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn fit_of_constant_data_has_zero_exponent() {
        let fit = fit_rate(&records(1.0, 0.0, |_| 0.3), RateModel::Power).unwrap();
        assert!(fit.b.abs() < 1e-12);
        assert!((fit.a - 0.3).abs() < 1e-12);
    }

    #[test]
    fn power_log_fit_recovers_exponent() {
        let data = records(1.0, 0.0, |n| 3.0 * n.powf(-0.5) * n.log2());
        let fit = fit_rate(&data, RateModel::PowerLog).unwrap();
        assert!((fit.b - 0.5).abs() < 1e-9);
        assert!((fit.a - 3.0).abs() < 1e-9);
        let plain = fit_rate(&data, RateModel::Power).unwrap();
        assert!(plain.residual > fit.residual);
    }

    #[test]
    fn fit_averages_replicates_before_taking_logs() {
        let mut data = records(2.0, 0.0, |n| 1.0 / n);
        for r in data.iter_mut() {
            r.error *= if r.replicate == 0 { 0.5 } else { 1.5 };
        }
        let fit = fit_rate(&data, RateModel::Power).unwrap();
        assert!((fit.b - 1.0).abs() < 1e-12);
        assert!((fit.a - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let mut data = records(2.0, 0.0, |n| 1.0 / n);
        data[0].error = 0.0;
        data[1].error = 0.0;
        assert!(fit_rate(&data, RateModel::Power)
            .unwrap_err()
            .is_validation());
        let few: Vec<_> = records(2.0, 0.0, |n| 1.0 / n)
            .into_iter()
            .filter(|r| r.samples <= 20)
            .collect();
        assert!(fit_rate(&few, RateModel::Power).is_err());
        let mut mixed = records(2.0, 0.0, |n| 1.0 / n);
        mixed.extend(records(2.0, 5.0, |n| 1.0 / n));
        assert!(fit_rate(&mixed, RateModel::Power).is_err());
        assert_eq!(fit_groups(&mixed, RateModel::Power).unwrap().len(), 2);
        assert!(fit_rate(&[], RateModel::Power).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::default();
        ok.validate().unwrap();
        let mut c = ok.clone();
        c.ns = vec![10, 3000];
        assert!(c.validate().unwrap_err().is_validation());
        let mut c = ok.clone();
        c.replicates = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.ps = vec![0.5];
        assert!(c.validate().is_err());
        let mut c = ok;
        c.taus = vec![-1.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_uses_defaults_for_missing_fields() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"M": 50, "Ns": [5, 10], "K": 3}"#).unwrap();
        assert_eq!(c.m, 50);
        assert_eq!(c.ns, vec![5, 10]);
        assert_eq!(c.strips, Some(3));
        assert_eq!(c.depth, None);
        assert_eq!(c.n, 200);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        let round: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(round, c);
    }

    #[test]
    fn auto_levels_follow_sample_size() {
        let c = ExperimentConfig::default();
        let l = c.levels(100).unwrap();
        assert_eq!((l.strips, l.depth), (7, 7));
        let fixed = ExperimentConfig {
            strips: Some(2),
            ..c
        };
        assert_eq!(fixed.levels(100).unwrap().strips, 2);
    }

    #[test]
    fn subsets_do_not_depend_on_job_order() {
        let c = ExperimentConfig::default();
        let a = sample(&mut c.subset_rng(20, 3), 100, 20).into_vec();
        let _ = sample(&mut c.subset_rng(20, 2), 100, 20);
        let b = sample(&mut c.subset_rng(20, 3), 100, 20).into_vec();
        assert_eq!(a, b);
        let other = sample(&mut c.subset_rng(20, 4), 100, 20).into_vec();
        assert_ne!(a, other);
    }

    #[test]
    fn quadrature_cost_vanishes_on_representative_points() {
        let g = DomainGeometry::new(1.0).unwrap();
        let part = QuadraturePartition::new(1, 3).unwrap();
        let sq = part.square_of(0.3, 0.7).unwrap();
        let (u, v) = part.unit_center(&sq);
        let (t1, t2) = g.from_unit_square(u, v);
        let at_center = PersistenceMeasure::from_pairs([(t1, t2)]).unwrap();
        let q = Order::finite(2.0).unwrap();
        assert!(quadrature_cost(&at_center, &g, &part, 2.0, q) < 1e-24);
        let (s1, s2) = g.from_unit_square(0.3, 0.7);
        let off = PersistenceMeasure::from_pairs([(s1, s2)]).unwrap();
        let d2 = (0.3 - u).powi(2) + (0.7 - v).powi(2);
        assert!((quadrature_cost(&off, &g, &part, 2.0, q) - d2).abs() < 1e-12);
    }
}
