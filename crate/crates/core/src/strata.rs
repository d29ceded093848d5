//! Principal strata from posterior draws.
//!
//! A unit is dissociative when both arms share a cluster. Otherwise the sign
//! of `η_{S(1)} - η_{S(0)}` decides between the positive and negative
//! associative strata; distinct clusters with equal locations count as
//! dissociative.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{CasbahError, Result};
use crate::gibbs::PosteriorDraws;
use crate::model::{MixtureState, ObservedDataset};

/// Two-sided level of every reported credible interval.
pub const CREDIBLE_LEVEL: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumLabel {
    Negative,
    Dissociative,
    Positive,
}

impl StratumLabel {
    /// Column order used by every per-stratum array.
    pub const ALL: [StratumLabel; 3] = [StratumLabel::Negative, StratumLabel::Dissociative, StratumLabel::Positive];

    pub fn index(self) -> usize {
        self as usize
    }

    /// `-1`, `0`, `1`.
    pub fn code(self) -> i32 {
        self as i32 - 1
    }

    pub fn from_code(code: i32) -> Option<Self> {
        match code {
            -1 => Some(Self::Negative),
            0 => Some(Self::Dissociative),
            1 => Some(Self::Positive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::Dissociative => "dissociative",
            Self::Positive => "positive",
        }
    }
}

impl std::fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Stratum implied by a pair of labels and their atom locations.
pub fn classify(s0: usize, s1: usize, eta0: f64, eta1: f64) -> StratumLabel {
    if s0 == s1 || eta1 == eta0 {
        StratumLabel::Dissociative
    } else if eta1 > eta0 {
        StratumLabel::Positive
    } else {
        StratumLabel::Negative
    }
}

pub fn assign_stratum(state: &MixtureState, unit: usize) -> StratumLabel {
    let s0 = state.labels[0][unit];
    let s1 = state.labels[1][unit];
    classify(s0, s1, state.eta[s0], state.eta[s1])
}

/// Mean of `values` within each stratum; `None` for an empty stratum.
pub fn stratum_means(labels: &[StratumLabel], values: &[f64]) -> [Option<f64>; 3] {
    let mut sum = [0.0; 3];
    let mut count = [0usize; 3];
    for (l, v) in labels.iter().zip(values) {
        sum[l.index()] += v;
        count[l.index()] += 1;
    }
    std::array::from_fn(|k| (count[k] > 0).then(|| sum[k] / count[k] as f64))
}

/// Median and equal-tailed interval of one stratum's draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalSummary {
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    /// Number of iterations in which the stratum was non-empty.
    pub draws: usize,
}

/// Per-iteration stratum means and their summaries, indexed by [`StratumLabel::index`].
#[derive(Debug, Clone, PartialEq)]
pub struct StratumEffects {
    pub per_draw: Vec<[Option<f64>; 3]>,
    /// `None` when the stratum is empty in every iteration.
    pub summary: [Option<IntervalSummary>; 3],
}

impl StratumEffects {
    pub fn from_draws(per_draw: Vec<[Option<f64>; 3]>) -> Self {
        let summary = std::array::from_fn(|k| {
            let values: Vec<f64> = per_draw.iter().filter_map(|d| d[k]).collect();
            summarize_interval(&values, CREDIBLE_LEVEL)
        });
        Self { per_draw, summary }
    }

    /// Mean over the iterations in which the stratum is non-empty.
    pub fn posterior_mean(&self, stratum: StratumLabel) -> Option<f64> {
        let values: Vec<f64> = self.per_draw.iter().filter_map(|d| d[stratum.index()]).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize_interval(values: &[f64], level: f64) -> Option<IntervalSummary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Some(IntervalSummary {
        median: quantile(&sorted, 0.5),
        lower: quantile(&sorted, tail),
        upper: quantile(&sorted, 1.0 - tail),
        draws: sorted.len(),
    })
}

/// Principal causal effects: per kept iteration, the mean of `Y(1) - Y(0)`
/// within each stratum, with imputed values filling the unobserved arm.
pub fn compute_pce(draws: &PosteriorDraws, data: &ObservedDataset) -> StratumEffects {
    StratumEffects::from_draws(
        draws
            .draws
            .iter()
            .map(|d| {
                let diffs: Vec<f64> = (0..data.n())
                    .map(|i| {
                        let (y0, y1) = d.outcome_pair(data, i);
                        y1 - y0
                    })
                    .collect();
                stratum_means(&d.strata, &diffs)
            })
            .collect(),
    )
}

/// Per kept iteration, the mean of `P(1) - P(0)` within each stratum.
pub fn expected_post_treatment_gap(draws: &PosteriorDraws, data: &ObservedDataset) -> StratumEffects {
    StratumEffects::from_draws(
        draws
            .draws
            .iter()
            .map(|d| {
                let gaps: Vec<f64> = (0..data.n())
                    .map(|i| {
                        let (p0, p1) = d.post_treatment_pair(data, i);
                        p1 - p0
                    })
                    .collect();
                stratum_means(&d.strata, &gaps)
            })
            .collect(),
    )
}

/// Empirical stratum frequencies per unit over the kept draws.
pub fn per_unit_probabilities(draws: &PosteriorDraws, n: usize) -> Vec<[f64; 3]> {
    let mut counts = vec![[0usize; 3]; n];
    for d in &draws.draws {
        for (i, s) in d.strata.iter().enumerate() {
            counts[i][s.index()] += 1;
        }
    }
    let total = draws.len().max(1) as f64;
    counts
        .into_iter()
        .map(|c| {
            if draws.is_empty() {
                [0.0, 1.0, 0.0]
            } else {
                c.map(|k| k as f64 / total)
            }
        })
        .collect()
}

/// Per-unit posterior mode. Ties go to dissociative, then negative.
pub fn point_partition(probs: &[[f64; 3]]) -> Vec<StratumLabel> {
    const PREFERENCE: [StratumLabel; 3] = [StratumLabel::Dissociative, StratumLabel::Negative, StratumLabel::Positive];
    probs
        .iter()
        .map(|p| {
            let mut best = PREFERENCE[0];
            for &s in &PREFERENCE[1..] {
                if p[s.index()] > p[best.index()] {
                    best = s;
                }
            }
            best
        })
        .collect()
}

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index. Returns 1 when the expected and maximal
/// indices coincide (both partitions trivial).
pub fn adjusted_rand_index<A: Eq + Hash, B: Eq + Hash>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CasbahError::input(format!("partition lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(CasbahError::input("adjusted Rand index needs at least two items"));
    }
    let mut cells: HashMap<(&A, &B), usize> = HashMap::new();
    let mut rows: HashMap<&A, usize> = HashMap::new();
    let mut cols: HashMap<&B, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| choose2(c)).sum();
    let sa: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sb: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sa * sb / choose2(a.len());
    let max = 0.5 * (sa + sb);
    if (max - expected).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Post-processed view of a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataSummary {
    pub per_unit_probs: Vec<[f64; 3]>,
    pub point_partition: Vec<StratumLabel>,
    pub tau: StratumEffects,
    pub gap: StratumEffects,
    /// Point-partition sizes.
    pub strata_counts: [usize; 3],
}

pub fn summarize(draws: &PosteriorDraws, data: &ObservedDataset) -> Result<StrataSummary> {
    if draws.is_empty() {
        return Err(CasbahError::input("no kept draws to summarize"));
    }
    if let Some(d) = draws.draws.iter().find(|d| d.strata.len() != data.n()) {
        return Err(CasbahError::input(format!(
            "draw at iteration {} has {} units, dataset has {}",
            d.iteration,
            d.strata.len(),
            data.n()
        )));
    }
    let per_unit_probs = per_unit_probabilities(draws, data.n());
    let point_partition = point_partition(&per_unit_probs);
    let mut strata_counts = [0; 3];
    for s in &point_partition {
        strata_counts[s.index()] += 1;
    }
    Ok(StrataSummary {
        per_unit_probs,
        point_partition,
        tau: compute_pce(draws, data),
        gap: expected_post_treatment_gap(draws, data),
        strata_counts,
    })
}
