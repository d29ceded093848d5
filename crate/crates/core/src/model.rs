//! Model state, priors, probit stick-breaking weights and the prior
//! probability of the dissociative stratum.
//!
//! Cluster labels are stored 0-based (`0..L`); files and the C API expose
//! them 1-based.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dist::{bvn_cdf, norm_cdf, norm_ln_cdf, sample_normal, InvGamma};
use crate::error::{CasbahError, Result};
use crate::gibbs::OutcomeState;

/// Prior hyperparameters. Defaults are the noninformative simulation setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Truncation level `L` of the stick-breaking process.
    pub truncation: usize,
    pub mu_eta: f64,
    pub sigma2_eta: f64,
    /// Inverse-gamma shape of the atom variances.
    pub gamma1: f64,
    /// Inverse-gamma scale of the atom variances.
    pub gamma2: f64,
    /// Common prior mean of every probit coefficient.
    pub xi: f64,
    /// Common prior variance of every probit coefficient (`Ω = ω² I`).
    pub omega2: f64,
    pub mu_theta: f64,
    pub sigma2_theta: f64,
    pub mu_lambda: f64,
    pub sigma2_lambda: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            truncation: 20,
            mu_eta: 0.0,
            sigma2_eta: 20.0,
            gamma1: 2.0,
            gamma2: 0.5,
            xi: 0.0,
            omega2: 20.0,
            mu_theta: 0.0,
            sigma2_theta: 100.0,
            mu_lambda: 0.0,
            sigma2_lambda: 4.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.truncation < 2 {
            return Err(CasbahError::input(format!("L must be at least 2, got {}", self.truncation)));
        }
        let positive = [
            ("sigma2_eta", self.sigma2_eta),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("omega2", self.omega2),
            ("sigma2_theta", self.sigma2_theta),
            ("sigma2_lambda", self.sigma2_lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CasbahError::input(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("mu_eta", self.mu_eta), ("xi", self.xi), ("mu_theta", self.mu_theta), ("mu_lambda", self.mu_lambda)] {
            if !v.is_finite() {
                return Err(CasbahError::input(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Number of stick-breaking coefficient columns, `L - 1`.
    pub fn sticks(&self) -> usize {
        self.truncation - 1
    }
}

/// The observed data: covariates, treatment, observed post-treatment and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedDataset {
    /// `n x p` covariates (no intercept column).
    pub x: DMatrix<f64>,
    pub treated: Vec<bool>,
    pub p_obs: Vec<f64>,
    pub y_obs: Vec<f64>,
}

impl ObservedDataset {
    pub fn new(x: DMatrix<f64>, treated: Vec<bool>, p_obs: Vec<f64>, y_obs: Vec<f64>) -> Result<Self> {
        let n = x.nrows();
        if treated.len() != n || p_obs.len() != n || y_obs.len() != n {
            return Err(CasbahError::input(format!(
                "dataset columns disagree in length: x {n}, t {}, p {}, y {}",
                treated.len(),
                p_obs.len(),
                y_obs.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| !p_obs[i].is_finite() || !y_obs[i].is_finite() || x.row(i).iter().any(|v| !v.is_finite())) {
            return Err(CasbahError::input(format!("row {i}: non-finite value")));
        }
        Ok(Self { x, treated, p_obs, y_obs })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Arm index (0 control, 1 treated) of unit `i`.
    pub fn arm(&self, i: usize) -> usize {
        usize::from(self.treated[i])
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&t| t).count()
    }

    /// Covariates of unit `i` without intercept.
    pub fn covariate_row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// All covariate rows, row-major.
    pub fn covariate_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.covariate_row(i)).collect()
    }

    /// Checks the extra conditions a fit needs.
    pub fn validate_for_fit(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(CasbahError::input("dataset has no units"));
        }
        let treated = self.n_treated();
        if treated == 0 || treated == self.n() {
            return Err(CasbahError::input("both treatment arms must be non-empty"));
        }
        Ok(())
    }
}

/// Mixture part of the sampler state.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureState {
    /// Atom locations, length `L`, shared by both arms.
    pub eta: Vec<f64>,
    /// Atom variances, length `L`.
    pub sigma2: Vec<f64>,
    /// Probit coefficients per arm: `(p+1) x (L-1)`, column `l` is stick `l`,
    /// row 0 the intercept.
    pub beta: [DMatrix<f64>; 2],
    /// 0-based cluster labels per arm and unit.
    pub labels: [Vec<usize>; 2],
    /// Imputed post-treatment value under the unobserved arm.
    pub p_missing: Vec<f64>,
}

impl MixtureState {
    pub fn truncation(&self) -> usize {
        self.eta.len()
    }

    /// `P_i(arm)`: observed under the assigned arm, imputed otherwise.
    pub fn post_treatment(&self, data: &ObservedDataset, i: usize, arm: usize) -> f64 {
        if data.arm(i) == arm {
            data.p_obs[i]
        } else {
            self.p_missing[i]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().chain(&self.sigma2).chain(&self.p_missing).all(|v| v.is_finite())
            && self.sigma2.iter().all(|&s| s > 0.0)
            && self.beta.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Linear predictors `α_l(x) = β_{0l} + xᵀβ_l` for every stick.
pub fn linear_predictors(beta_arm: &DMatrix<f64>, x_row: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for col in beta_arm.column_iter() {
        let mut a = col[0];
        for (j, &xj) in x_row.iter().enumerate() {
            a += col[j + 1] * xj;
        }
        out.push(a);
    }
}

/// Probit stick-breaking weights with the last stick closed (`Φ(α_L) ≡ 1`).
pub fn compute_weights(beta_arm: &DMatrix<f64>, x_row: &[f64]) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(beta_arm.ncols());
    linear_predictors(beta_arm, x_row, &mut alpha);
    let mut weights = Vec::with_capacity(alpha.len() + 1);
    let mut remaining = 1.0;
    for &a in &alpha {
        weights.push(remaining * norm_cdf(a));
        remaining *= norm_cdf(-a);
    }
    weights.push(remaining);
    weights
}

/// Log of [`compute_weights`], computed without underflow.
pub fn log_weights(beta_arm: &DMatrix<f64>, x_row: &[f64], alpha_buf: &mut Vec<f64>, out: &mut Vec<f64>) {
    linear_predictors(beta_arm, x_row, alpha_buf);
    out.clear();
    let mut log_remaining = 0.0;
    for &a in alpha_buf.iter() {
        out.push(log_remaining + norm_ln_cdf(a));
        log_remaining += norm_ln_cdf(-a);
    }
    out.push(log_remaining);
}

/// Prior probability that both arms pick the same atom, from the first two
/// moments of the stick fraction `Φ(α(x))`:
/// `ρ2 [(1 + ρ2 - 2ρ1)^L - 1] / (ρ2 - 2ρ1)`.
///
/// The sum runs over `L` unclosed sticks. Requires `0 < ρ1 <= 1` and
/// `ρ1² <= ρ2 <= ρ1`.
pub fn prior_dissociative_probability(rho1: f64, rho2: f64, truncation: usize) -> Result<f64> {
    const TOL: f64 = 1e-12;
    if !(rho1 > 0.0 && rho1 <= 1.0) {
        return Err(CasbahError::input(format!("rho1 must lie in (0, 1], got {rho1}")));
    }
    if !(rho2 >= rho1 * rho1 - TOL && rho2 <= rho1 + TOL) {
        return Err(CasbahError::input(format!(
            "rho2 must lie in [rho1^2, rho1] = [{}, {rho1}], got {rho2}",
            rho1 * rho1
        )));
    }
    if truncation < 1 {
        return Err(CasbahError::input("L must be at least 1"));
    }
    let denom = rho2 - 2.0 * rho1;
    let prob = if denom.abs() < TOL {
        truncation as f64 * rho2
    } else {
        let ratio = 1.0 + rho2 - 2.0 * rho1;
        rho2 * (ratio.powi(truncation as i32) - 1.0) / denom
    };
    Ok(prob.clamp(0.0, 1.0))
}

/// `(E Φ(α), E Φ(α)²)` for `α ~ N(alpha_mean, 1)`.
pub fn rho_moments(alpha_mean: f64) -> (f64, f64) {
    let a = alpha_mean / std::f64::consts::SQRT_2;
    let rho1 = norm_cdf(a);
    let rho2 = bvn_cdf(a, a, 0.5).unwrap_or(if a > 0.0 { 1.0 } else { 0.0 });
    (rho1, rho2)
}

/// Draws a starting state: atoms, coefficients and outcome parameters from
/// their priors, labels uniform on `0..L`, and each missing post-treatment
/// value set to the unit's observed one.
pub fn init_state<R: Rng + ?Sized>(data: &ObservedDataset, hp: &Hyperparams, rng: &mut R) -> Result<(MixtureState, OutcomeState)> {
    hp.validate()?;
    let l = hp.truncation;
    let n = data.n();
    let sigma_prior = InvGamma::new(hp.gamma1, hp.gamma2)?;
    let eta: Vec<f64> = (0..l).map(|_| sample_normal(hp.mu_eta, hp.sigma2_eta, rng)).collect();
    let sigma2: Vec<f64> = (0..l).map(|_| sigma_prior.sample(rng)).collect();
    let mut draw_beta = || DMatrix::from_fn(data.p() + 1, hp.sticks(), |_, _| sample_normal(hp.xi, hp.omega2, rng));
    let beta = [draw_beta(), draw_beta()];
    let labels = [
        (0..n).map(|_| rng.random_range(0..l)).collect(),
        (0..n).map(|_| rng.random_range(0..l)).collect(),
    ];
    let mixture = MixtureState {
        eta,
        sigma2,
        beta,
        labels,
        p_missing: data.p_obs.clone(),
    };
    let mut theta = |k: usize| (0..k).map(|_| sample_normal(hp.mu_theta, hp.sigma2_theta, rng)).collect::<Vec<_>>();
    let t0 = theta(2);
    let t1 = theta(4);
    let outcome = OutcomeState {
        theta0: [t0[0], t0[1]],
        theta1: [t1[0], t1[1], t1[2], t1[3]],
        lambda0: sample_normal(hp.mu_lambda, hp.sigma2_lambda, rng),
        lambda1: sample_normal(hp.mu_lambda, hp.sigma2_lambda, rng),
    };
    Ok((mixture, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize) -> ObservedDataset {
        let x = DMatrix::from_fn(n, 2, |i, j| ((i + j) % 2) as f64);
        let t = (0..n).map(|i| i % 2 == 0).collect();
        let p = (0..n).map(|i| i as f64 * 0.1).collect();
        let y = (0..n).map(|i| 1.0 + i as f64).collect();
        ObservedDataset::new(x, t, p, y).unwrap()
    }

    #[test]
    fn even_sticks() {
        let beta = DMatrix::zeros(1, 2);
        let w = compute_weights(&beta, &[]);
        assert_eq!(w, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn extreme_predictors() {
        let hi = DMatrix::from_element(1, 4, 10.0);
        let w = compute_weights(&hi, &[]);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let lo = DMatrix::from_element(1, 4, -10.0);
        let w = compute_weights(&lo, &[]);
        assert!((w[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_weights_agree_with_linear() {
        let beta = DMatrix::from_row_slice(2, 3, &[0.3, -1.0, 2.0, 0.5, 0.1, -0.7]);
        let x = [1.5];
        let lin = compute_weights(&beta, &x);
        let (mut a, mut lw) = (Vec::new(), Vec::new());
        log_weights(&beta, &x, &mut a, &mut lw);
        for (p, l) in lin.iter().zip(&lw) {
            assert!((p.ln() - l).abs() < 1e-12);
        }
    }

    #[test]
    fn dissociative_probability_examples() {
        assert_eq!(prior_dissociative_probability(1.0, 1.0, 20).unwrap(), 1.0);
        assert_eq!(prior_dissociative_probability(1.0, 1.0, 1).unwrap(), 1.0);
        assert!((prior_dissociative_probability(0.5, 0.25, 2).unwrap() - 0.3125).abs() < 1e-15);
        let large = prior_dissociative_probability(0.5, 0.25, 200).unwrap();
        assert!((large - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dissociative_probability_rejects_out_of_bounds() {
        assert!(prior_dissociative_probability(0.0, 0.0, 5).is_err());
        assert!(prior_dissociative_probability(0.5, 0.2, 5).is_err());
        assert!(prior_dissociative_probability(0.5, 0.6, 5).is_err());
        assert!(prior_dissociative_probability(1.2, 1.0, 5).is_err());
        assert!(prior_dissociative_probability(0.5, 0.3, 0).is_err());
    }

    #[test]
    fn rho_moments_at_zero() {
        let (r1, r2) = rho_moments(0.0);
        assert_eq!(r1, 0.5);
        assert!((r2 - 1.0 / 3.0).abs() < 1e-12);
        let (r1, r2) = rho_moments(60.0);
        assert!((r1 - 1.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn init_is_reproducible_and_shaped() {
        let data = toy_data(7);
        let hp = Hyperparams { truncation: 2, ..Default::default() };
        let a = init_state(&data, &hp, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = init_state(&data, &hp, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
        let (m, _) = a;
        assert_eq!(m.beta[0].shape(), (3, 1));
        assert!(m.labels.iter().all(|ls| ls.len() == 7 && ls.iter().all(|&s| s < 2)));
        assert_eq!(m.p_missing, data.p_obs);
    }

    #[test]
    fn init_single_unit() {
        let data = toy_data(1);
        let (m, _) = init_state(&data, &Hyperparams::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(m.labels[0].len(), 1);
        assert_eq!(m.labels[1].len(), 1);
        assert!(m.is_finite());
    }

    #[test]
    fn dataset_validation() {
        let x = DMatrix::zeros(2, 1);
        assert!(ObservedDataset::new(x.clone(), vec![true], vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(ObservedDataset::new(x.clone(), vec![true, false], vec![f64::NAN, 1.0], vec![0.0, 1.0]).is_err());
        let single_arm = ObservedDataset::new(x, vec![true, true], vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(single_arm.validate_for_fit().is_err());
    }
}
