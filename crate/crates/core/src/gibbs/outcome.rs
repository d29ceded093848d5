use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::linalg::cholesky_jittered;
use crate::dist::{normal_ln_pdf, sample_normal, sample_std_normal};
use crate::error::{CasbahError, Result};
use crate::gibbs::OutcomeState;
use crate::model::{Hyperparams, MixtureState, ObservedDataset};

/// Gaussian full conditional of one arm's regression coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePosterior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl OutcomePosterior {
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        Ok(cholesky_jittered(&self.precision)?.inverse())
    }
}

/// Weighted Bayesian regression: precision `ZᵀWZ + I/σ_θ²`, mean solving
/// `(ZᵀWZ + I/σ_θ²) m = ZᵀWy + μ_θ/σ_θ² 1`. `weights` are inverse variances.
pub fn outcome_posterior(
    design: &DMatrix<f64>,
    y: &[f64],
    weights: &[f64],
    hp: &Hyperparams,
) -> Result<OutcomePosterior> {
    let q = design.ncols();
    let mut precision = DMatrix::from_diagonal_element(q, q, 1.0 / hp.sigma2_theta);
    let mut rhs = DVector::from_element(q, hp.mu_theta / hp.sigma2_theta);
    for (r, row) in design.row_iter().enumerate() {
        let w = weights[r];
        for a in 0..q {
            rhs[a] += w * row[a] * y[r];
            for b in 0..q {
                precision[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let chol = cholesky_jittered(&precision)?;
    let mean = chol.solve(&rhs);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(CasbahError::numerical("outcome coefficient posterior mean is not finite"));
    }
    Ok(OutcomePosterior { mean, precision })
}

/// Design, response and precision weights of the observed outcomes in `arm`.
fn arm_regression(
    mixture: &MixtureState,
    outcome: &OutcomeState,
    data: &ObservedDataset,
    arm: usize,
) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
    let units: Vec<usize> = (0..data.n()).filter(|&i| data.arm(i) == arm).collect();
    let q = if arm == 0 { 2 } else { 4 };
    let mut design = DMatrix::zeros(units.len(), q);
    let mut y = Vec::with_capacity(units.len());
    let mut w = Vec::with_capacity(units.len());
    for (r, &i) in units.iter().enumerate() {
        let p0 = mixture.post_treatment(data, i, 0);
        let p1 = mixture.post_treatment(data, i, 1);
        design[(r, 0)] = 1.0;
        if arm == 0 {
            design[(r, 1)] = p0;
            w.push(1.0 / outcome.var0());
        } else {
            design[(r, 1)] = p1;
            design[(r, 2)] = p0;
            design[(r, 3)] = p0 * p1;
            w.push(1.0 / outcome.var1(p1));
        }
        y.push(data.y_obs[i]);
    }
    (design, y, w)
}

fn sample_posterior<R: Rng + ?Sized>(post: &OutcomePosterior, rng: &mut R) -> Result<DVector<f64>> {
    let chol = cholesky_jittered(&post.precision)?;
    let eps = DVector::from_fn(post.mean.len(), |_, _| sample_std_normal(rng));
    let noise = chol
        .l()
        .transpose()
        .solve_upper_triangular(&eps)
        .ok_or_else(|| CasbahError::numerical("singular outcome precision factor"))?;
    Ok(&post.mean + noise)
}

/// Draws `θ⁽⁰⁾` from the control units and `θ⁽¹⁾` from the treated units.
pub fn step_outcome_params<R: Rng + ?Sized>(
    mixture: &MixtureState,
    outcome: &mut OutcomeState,
    data: &ObservedDataset,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<()> {
    let (z, y, w) = arm_regression(mixture, outcome, data, 0);
    let t0 = sample_posterior(&outcome_posterior(&z, &y, &w, hp)?, rng)?;
    let (z, y, w) = arm_regression(mixture, outcome, data, 1);
    let t1 = sample_posterior(&outcome_posterior(&z, &y, &w, hp)?, rng)?;
    outcome.theta0 = [t0[0], t0[1]];
    outcome.theta1 = [t1[0], t1[1], t1[2], t1[3]];
    Ok(())
}

fn observed_ln_likelihood(
    mixture: &MixtureState,
    outcome: &OutcomeState,
    data: &ObservedDataset,
    i: usize,
) -> f64 {
    let p0 = mixture.post_treatment(data, i, 0);
    let p1 = mixture.post_treatment(data, i, 1);
    if data.treated[i] {
        normal_ln_pdf(data.y_obs[i], outcome.mean1(p0, p1), outcome.var1(p1))
    } else {
        normal_ln_pdf(data.y_obs[i], outcome.mean0(p0), outcome.var0())
    }
}

/// Log likelihood ratio of replacing `λ0` by `proposal`, over all units.
pub fn lambda0_log_ratio(mixture: &MixtureState, outcome: &OutcomeState, data: &ObservedDataset, proposal: f64) -> f64 {
    let moved = OutcomeState { lambda0: proposal, ..outcome.clone() };
    (0..data.n())
        .map(|i| observed_ln_likelihood(mixture, &moved, data, i) - observed_ln_likelihood(mixture, outcome, data, i))
        .sum()
}

/// Log likelihood ratio of replacing `λ1` by `proposal`, over treated units.
pub fn lambda1_log_ratio(mixture: &MixtureState, outcome: &OutcomeState, data: &ObservedDataset, proposal: f64) -> f64 {
    let moved = OutcomeState { lambda1: proposal, ..outcome.clone() };
    (0..data.n())
        .filter(|&i| data.treated[i])
        .map(|i| observed_ln_likelihood(mixture, &moved, data, i) - observed_ln_likelihood(mixture, outcome, data, i))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LambdaMoves {
    pub lambda0_accepted: bool,
    pub lambda1_accepted: bool,
}

/// Independence Metropolis for `λ0` then `λ1`. Proposals come from the prior,
/// so the acceptance ratio is the likelihood ratio alone.
pub fn step_lambda<R: Rng + ?Sized>(
    mixture: &MixtureState,
    outcome: &mut OutcomeState,
    data: &ObservedDataset,
    hp: &Hyperparams,
    rng: &mut R,
) -> LambdaMoves {
    let mut moves = LambdaMoves::default();
    let proposal = sample_normal(hp.mu_lambda, hp.sigma2_lambda, rng);
    let ratio = lambda0_log_ratio(mixture, outcome, data, proposal);
    if accept(ratio, rng) {
        outcome.lambda0 = proposal;
        moves.lambda0_accepted = true;
    }
    let proposal = sample_normal(hp.mu_lambda, hp.sigma2_lambda, rng);
    let ratio = lambda1_log_ratio(mixture, outcome, data, proposal);
    if accept(ratio, rng) {
        outcome.lambda1 = proposal;
        moves.lambda1_accepted = true;
    }
    moves
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}

/// Draws the outcome under the unobserved arm for every unit.
pub fn step_impute_outcome<R: Rng + ?Sized>(
    mixture: &MixtureState,
    outcome: &OutcomeState,
    data: &ObservedDataset,
    rng: &mut R,
) -> Vec<f64> {
    (0..data.n())
        .map(|i| {
            let p0 = mixture.post_treatment(data, i, 0);
            let p1 = mixture.post_treatment(data, i, 1);
            if data.treated[i] {
                sample_normal(outcome.mean0(p0), outcome.var0(), rng)
            } else {
                sample_normal(outcome.mean1(p0, p1), outcome.var1(p1), rng)
            }
        })
        .collect()
}
