//! Synthetic scenarios with known principal strata, and the replication
//! harness that scores fits against them.
//!
//! Each stratum owns a pair of Gaussians for `(P(0), P(1))`, drawn
//! independently given the stratum. Strata are allocated by a softmax over
//! linear scores in the binary covariates; the dissociative score is 0.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{sample_categorical_log, sample_normal};
use crate::error::{CasbahError, Result};
use crate::gibbs::{run_chain_with_rng, GibbsConfig, PosteriorDraws};
use crate::model::{Hyperparams, ObservedDataset};
use crate::strata::{adjusted_rand_index, compute_pce, point_partition, per_unit_probabilities, stratum_means, StratumLabel};

pub const SCENARIO_IDS: std::ops::RangeInclusive<u8> = 1..=5;

/// Mean and variance of a normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

const fn g(mean: f64, var: f64) -> Gaussian {
    Gaussian { mean, var }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumDesign {
    pub label: StratumLabel,
    /// Allocation score `intercept + coef·x`.
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub p0: Gaussian,
    pub p1: Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub id: u8,
    pub n: usize,
    pub covariates: usize,
    /// Success probability of every Bernoulli covariate.
    pub covariate_prob: f64,
    /// Treatment logit `coef·x + interaction`.
    pub treatment_coef: Vec<f64>,
    /// `(j, k, c)` adds `c x_j x_k` to the treatment logit.
    pub treatment_interaction: Option<(usize, usize, f64)>,
    pub strata: Vec<StratumDesign>,
    pub theta0: [f64; 2],
    pub theta1: [f64; 4],
    pub lambda0: f64,
    pub lambda1: f64,
}

impl ScenarioSpec {
    /// One of the five built-in scenarios with `n = 500`.
    pub fn scenario(id: u8) -> Result<Self> {
        use StratumLabel::*;
        let two = |d: Gaussian, p0: Gaussian, p1: Gaussian| {
            vec![
                StratumDesign { label: Dissociative, intercept: 0.0, coef: vec![0.0, 0.0], p0: d, p1: d },
                StratumDesign { label: Positive, intercept: -5.0, coef: vec![10.0, 0.0], p0, p1 },
            ]
        };
        let three = |d: Gaussian, pos: (Gaussian, Gaussian), neg: (Gaussian, Gaussian)| {
            vec![
                StratumDesign { label: Dissociative, intercept: 0.0, coef: vec![0.0, 0.0], p0: d, p1: d },
                StratumDesign { label: Positive, intercept: -5.0, coef: vec![10.0, -10.0], p0: pos.0, p1: pos.1 },
                StratumDesign { label: Negative, intercept: -15.0, coef: vec![10.0, 10.0], p0: neg.0, p1: neg.1 },
            ]
        };
        let base = |strata, theta1| ScenarioSpec {
            id,
            n: 500,
            covariates: 2,
            covariate_prob: 0.5,
            treatment_coef: vec![0.4, 0.6],
            treatment_interaction: None,
            strata,
            theta0: [1.0, 2.0],
            theta1,
            lambda0: -0.5,
            lambda1: 0.1,
        };
        let spec = match id {
            1 => base(two(g(1.0, 0.05), g(2.0, 0.05), g(3.0, 0.05)), [1.0, 2.0, -1.0, 0.5]),
            2 => base(
                three(g(2.0, 0.05), (g(2.0, 0.05), g(3.0, 0.05)), (g(2.0, 0.05), g(1.0, 0.05))),
                [1.0, 3.0, -1.0, 1.0],
            ),
            3 => base(two(g(1.5, 0.12), g(2.0, 0.1), g(2.5, 0.08)), [1.0, 1.2, -0.8, 0.5]),
            4 => base(
                three(g(1.5, 0.12), (g(2.0, 0.1), g(2.5, 0.08)), (g(2.0, 0.1), g(1.5, 0.12))),
                [1.0, 1.2, -0.8, 0.5],
            ),
            5 => {
                let mut strata = three(g(2.0, 0.05), (g(3.0, 0.05), g(4.0, 0.05)), (g(2.0, 0.05), g(1.0, 0.05)));
                strata[0].coef.extend([0.0, 0.0, 0.0]);
                strata[1].coef.extend([0.5, -0.5, 0.5]);
                strata[2].coef.extend([-0.5, 0.5, 0.5]);
                ScenarioSpec {
                    covariates: 5,
                    treatment_coef: vec![0.4, 0.6, -0.3, 0.0, 0.0],
                    treatment_interaction: Some((3, 4, 0.2)),
                    ..base(strata, [1.0, 1.2, -1.0, 0.5])
                }
            }
            _ => return Err(CasbahError::input(format!("scenario must be 1..5, got {id}"))),
        };
        Ok(spec)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.strata.is_empty() {
            return Err(CasbahError::input("scenario needs at least one stratum"));
        }
        if self.treatment_coef.len() != self.covariates {
            return Err(CasbahError::input("treatment coefficients disagree with covariate count"));
        }
        for s in &self.strata {
            if s.coef.len() != self.covariates {
                return Err(CasbahError::input(format!("{} stratum: allocation coefficients disagree with covariate count", s.label)));
            }
            if !(s.p0.var > 0.0 && s.p1.var > 0.0) {
                return Err(CasbahError::input(format!("{} stratum: variances must be positive", s.label)));
            }
            if s.label == StratumLabel::Dissociative && s.p0 != s.p1 {
                return Err(CasbahError::input("dissociative stratum must share one distribution across arms"));
            }
        }
        if let Some((j, k, _)) = self.treatment_interaction {
            if j >= self.covariates || k >= self.covariates {
                return Err(CasbahError::input("treatment interaction index out of range"));
            }
        }
        if !(0.0..=1.0).contains(&self.covariate_prob) {
            return Err(CasbahError::input("covariate probability must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn mean_y0(&self, p0: f64) -> f64 {
        self.theta0[0] + self.theta0[1] * p0
    }

    pub fn mean_y1(&self, p0: f64, p1: f64) -> f64 {
        let t = &self.theta1;
        t[0] + t[1] * p1 + t[2] * p0 + t[3] * p0 * p1
    }

    /// Expected `Y(1) - Y(0)` per stratum under the generator.
    pub fn population_tau(&self) -> [Option<f64>; 3] {
        let mut out = [None; 3];
        for s in &self.strata {
            let (m0, m1) = (s.p0.mean, s.p1.mean);
            // P(0) and P(1) are independent given the stratum.
            out[s.label.index()] = Some(self.mean_y1(m0, m1) - self.mean_y0(m0));
        }
        out
    }

    fn treatment_probability(&self, x: &[f64]) -> f64 {
        let mut eta: f64 = self.treatment_coef.iter().zip(x).map(|(c, v)| c * v).sum();
        if let Some((j, k, c)) = self.treatment_interaction {
            eta += c * x[j] * x[k];
        }
        1.0 / (1.0 + (-eta).exp())
    }
}

/// Full potential tables behind one synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTruth {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub strata: Vec<StratumLabel>,
}

impl SyntheticTruth {
    pub fn n(&self) -> usize {
        self.strata.len()
    }

    /// Sample average of `P(1) - P(0)`.
    pub fn mean_p_gap(&self) -> f64 {
        mean_diff(&self.p1, &self.p0)
    }

    /// Sample average of `Y(1) - Y(0)`.
    pub fn mean_y_gap(&self) -> f64 {
        mean_diff(&self.y1, &self.y0)
    }

    /// Sample principal causal effects.
    pub fn tau(&self) -> [Option<f64>; 3] {
        let diffs: Vec<f64> = self.y1.iter().zip(&self.y0).map(|(a, b)| a - b).collect();
        stratum_means(&self.strata, &diffs)
    }
}

fn mean_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64
}

/// Draws one dataset; the observed columns mask the truth by treatment.
pub fn generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<(ObservedDataset, SyntheticTruth)> {
    spec.validate()?;
    let n = spec.n;
    let p = spec.covariates;
    let mut x = DMatrix::zeros(n, p);
    let mut truth = SyntheticTruth {
        p0: Vec::with_capacity(n),
        p1: Vec::with_capacity(n),
        y0: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        strata: Vec::with_capacity(n),
    };
    let mut treated = Vec::with_capacity(n);
    let mut scores = vec![0.0; spec.strata.len()];
    for i in 0..n {
        let row: Vec<f64> = (0..p).map(|_| f64::from(u8::from(rng.random_bool(spec.covariate_prob)))).collect();
        for (j, &v) in row.iter().enumerate() {
            x[(i, j)] = v;
        }
        treated.push(rng.random_bool(spec.treatment_probability(&row)));
        for (score, s) in scores.iter_mut().zip(&spec.strata) {
            *score = s.intercept + s.coef.iter().zip(&row).map(|(c, v)| c * v).sum::<f64>();
        }
        let s = &spec.strata[sample_categorical_log(&scores, rng)];
        let p0 = sample_normal(s.p0.mean, s.p0.var, rng);
        let p1 = sample_normal(s.p1.mean, s.p1.var, rng);
        let y0 = sample_normal(spec.mean_y0(p0), spec.lambda0.exp(), rng);
        let y1 = sample_normal(spec.mean_y1(p0, p1), (spec.lambda0 + spec.lambda1 * p1).exp(), rng);
        truth.p0.push(p0);
        truth.p1.push(p1);
        truth.y0.push(y0);
        truth.y1.push(y1);
        truth.strata.push(s.label);
    }
    let p_obs = (0..n).map(|i| if treated[i] { truth.p1[i] } else { truth.p0[i] }).collect();
    let y_obs = (0..n).map(|i| if treated[i] { truth.y1[i] } else { truth.y0[i] }).collect();
    Ok((ObservedDataset::new(x, treated, p_obs, y_obs)?, truth))
}

/// Data and chain streams of replicate `index` under `master_seed`.
pub fn replicate_rngs(master_seed: u64, index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut data = ChaCha8Rng::seed_from_u64(master_seed);
    data.set_stream(2 * index);
    let mut chain = ChaCha8Rng::seed_from_u64(master_seed);
    chain.set_stream(2 * index + 1);
    (data, chain)
}

/// Scores of one fitted replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMetrics {
    pub index: usize,
    /// Posterior mean of the sample average `P(1) - P(0)` minus its true value.
    pub bias_p: f64,
    pub bias_y: f64,
    pub ari: f64,
    /// Distinct strata in the point partition.
    pub strata_recovered: usize,
    /// Posterior mean of each PCE, for strata present in the point partition.
    pub tau_estimate: [Option<f64>; 3],
    pub tau_true: [Option<f64>; 3],
    pub lambda_accepts: (usize, usize),
}

/// Scores a fit against its truth.
pub fn score_fit(index: usize, data: &ObservedDataset, truth: &SyntheticTruth, draws: &PosteriorDraws) -> Result<ReplicateMetrics> {
    if draws.is_empty() {
        return Err(CasbahError::input("no kept draws"));
    }
    let n = data.n() as f64;
    let kept = draws.len() as f64;
    let (mut p_gap, mut y_gap) = (0.0, 0.0);
    for d in &draws.draws {
        for i in 0..data.n() {
            let (p0, p1) = d.post_treatment_pair(data, i);
            let (y0, y1) = d.outcome_pair(data, i);
            p_gap += (p1 - p0) / n;
            y_gap += (y1 - y0) / n;
        }
    }
    let partition = point_partition(&per_unit_probabilities(draws, data.n()));
    let mut present = [false; 3];
    for s in &partition {
        present[s.index()] = true;
    }
    let pce = compute_pce(draws, data);
    Ok(ReplicateMetrics {
        index,
        bias_p: p_gap / kept - truth.mean_p_gap(),
        bias_y: y_gap / kept - truth.mean_y_gap(),
        ari: adjusted_rand_index(&partition, &truth.strata)?,
        strata_recovered: present.iter().filter(|&&p| p).count(),
        tau_estimate: std::array::from_fn(|k| if present[k] { pce.posterior_mean(StratumLabel::ALL[k]) } else { None }),
        tau_true: truth.tau(),
        lambda_accepts: draws.lambda_accepts,
    })
}

/// Generates, fits and scores replicate `index`.
pub fn run_replicate(
    spec: &ScenarioSpec,
    hp: &Hyperparams,
    config: &GibbsConfig,
    master_seed: u64,
    index: usize,
) -> Result<ReplicateMetrics> {
    let (mut data_rng, mut chain_rng) = replicate_rngs(master_seed, index as u64);
    let (data, truth) = generate(spec, &mut data_rng)?;
    let draws = run_chain_with_rng(&data, hp, config, &mut chain_rng)?;
    score_fit(index, &data, &truth, &draws)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub scenario: u8,
    /// Successful replicates in index order.
    pub replicates: Vec<ReplicateMetrics>,
    /// `(index, message)` of every failed chain.
    pub failures: Vec<(usize, String)>,
    pub population_tau: [Option<f64>; 3],
}

/// Median and interquartile range across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianIqr {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl MedianIqr {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Mean and sample sd across replicates; `sd` is `None` below two values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
    pub count: usize,
}

fn median_iqr(values: &[f64]) -> Option<MedianIqr> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(MedianIqr {
        median: crate::strata::quantile(&v, 0.5),
        q1: crate::strata::quantile(&v, 0.25),
        q3: crate::strata::quantile(&v, 0.75),
    })
}

pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    Some(MeanSd { mean, sd, count: values.len() })
}

/// Truth and across-replicate estimate of one stratum effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauRow {
    pub stratum: StratumLabel,
    /// Generator expectation; `None` when the scenario has no such stratum.
    pub truth: Option<f64>,
    /// Across replicates in which the stratum was recovered.
    pub estimate: Option<MeanSd>,
}

impl StudyReport {
    /// Bias of `E{P(1) - P(0)}` and `E{Y(1) - Y(0)}`.
    pub fn table1(&self) -> (Option<MedianIqr>, Option<MedianIqr>) {
        let bp: Vec<f64> = self.replicates.iter().map(|r| r.bias_p).collect();
        let by: Vec<f64> = self.replicates.iter().map(|r| r.bias_y).collect();
        (median_iqr(&bp), median_iqr(&by))
    }

    /// Adjusted Rand index across replicates.
    pub fn table2(&self) -> Option<MeanSd> {
        mean_sd(&self.replicates.iter().map(|r| r.ari).collect::<Vec<_>>())
    }

    pub fn table3(&self) -> [TauRow; 3] {
        StratumLabel::ALL.map(|s| {
            let est: Vec<f64> = self.replicates.iter().filter_map(|r| r.tau_estimate[s.index()]).collect();
            TauRow { stratum: s, truth: self.population_tau[s.index()], estimate: mean_sd(&est) }
        })
    }
}

/// Runs `replicates` independent replicates on a pool of `jobs` threads.
/// Failed chains are logged and counted, not propagated.
pub fn replicate_study(
    spec: &ScenarioSpec,
    replicates: usize,
    hp: &Hyperparams,
    config: &GibbsConfig,
    master_seed: u64,
    jobs: usize,
) -> Result<StudyReport> {
    spec.validate()?;
    hp.validate()?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CasbahError::input(format!("thread pool: {e}")))?;
    let results: Vec<Result<ReplicateMetrics>> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|idx| {
                let r = run_replicate(spec, hp, config, master_seed, idx);
                log::info!("scenario {} replicate {idx} done", spec.id);
                r
            })
            .collect()
    });
    let mut report = StudyReport {
        scenario: spec.id,
        replicates: Vec::new(),
        failures: Vec::new(),
        population_tau: spec.population_tau(),
    };
    for (idx, r) in results.into_iter().enumerate() {
        match r {
            Ok(m) => report.replicates.push(m),
            Err(e) => {
                log::warn!("scenario {} replicate {idx} failed: {e}", spec.id);
                report.failures.push((idx, e.to_string()));
            }
        }
    }
    Ok(report)
}
