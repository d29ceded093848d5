//! Blocked Gibbs sampler.
//!
//! One iteration runs, in order: cluster allocation (weights computed from the
//! current coefficients), atoms, stick-breaking coefficients per arm,
//! imputation of the missing post-treatment values, outcome coefficients per
//! arm, and the two log-variance parameters. Kept iterations additionally
//! impute the missing outcomes and record the stratum of every unit.

mod allocation;
mod atoms;
mod impute;
mod outcome;
mod weights;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use allocation::step_cluster_allocation;
pub use atoms::{atom_posterior, sigma2_posterior, step_atoms, AtomPosterior};
pub use impute::{missing_post_treatment_posterior, step_impute_post_treatment};
pub use outcome::{
    lambda0_log_ratio, lambda1_log_ratio, outcome_posterior, step_impute_outcome, step_lambda,
    step_outcome_params, LambdaMoves, OutcomePosterior,
};
pub use weights::{step_weights, step_weights_with, StickDesign, WeightsSolver, DENSE_SUN_LIMIT};

use crate::dist::DEFAULT_SWEEPS;
use crate::error::{CasbahError, Result};
use crate::model::{init_state, Hyperparams, MixtureState, ObservedDataset};
use crate::strata::{assign_stratum, StratumLabel};

/// Outcome regression: `Y(0) ~ N(θ00 + θ01 P(0), e^{λ0})` and
/// `Y(1) ~ N(θ10 + θ11 P(1) + θ12 P(0) + θ13 P(0)P(1), e^{λ0 + λ1 P(1)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeState {
    pub theta0: [f64; 2],
    pub theta1: [f64; 4],
    pub lambda0: f64,
    pub lambda1: f64,
}

impl OutcomeState {
    pub fn mean0(&self, p0: f64) -> f64 {
        self.theta0[0] + self.theta0[1] * p0
    }

    pub fn mean1(&self, p0: f64, p1: f64) -> f64 {
        let t = &self.theta1;
        t[0] + t[1] * p1 + t[2] * p0 + t[3] * p0 * p1
    }

    pub fn var0(&self) -> f64 {
        self.lambda0.exp()
    }

    pub fn var1(&self, p1: f64) -> f64 {
        (self.lambda0 + self.lambda1 * p1).exp()
    }

    pub fn is_finite(&self) -> bool {
        self.theta0.iter().chain(&self.theta1).all(|v| v.is_finite())
            && self.lambda0.is_finite()
            && self.lambda1.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tmvn_sweeps: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            iterations: 3000,
            burn_in: 1000,
            thin: 1,
            tmvn_sweeps: DEFAULT_SWEEPS,
            seed: 1,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(CasbahError::input(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(CasbahError::input("thin must be at least 1"));
        }
        if self.tmvn_sweeps == 0 {
            return Err(CasbahError::input("tmvn_sweeps must be at least 1"));
        }
        Ok(())
    }

    pub fn kept_count(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// 1-based iteration `r` is kept after burn-in and thinning.
    pub fn keeps(&self, r: usize) -> bool {
        r > self.burn_in && (r - self.burn_in).is_multiple_of(self.thin)
    }
}

/// One kept iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord {
    /// 1-based iteration index.
    pub iteration: usize,
    pub mixture: MixtureState,
    pub outcome: OutcomeState,
    /// Imputed outcome under the unobserved arm.
    pub y_missing: Vec<f64>,
    pub strata: Vec<StratumLabel>,
}

impl DrawRecord {
    /// `(P_i(0), P_i(1))` with the imputed value filled in.
    pub fn post_treatment_pair(&self, data: &ObservedDataset, i: usize) -> (f64, f64) {
        (self.mixture.post_treatment(data, i, 0), self.mixture.post_treatment(data, i, 1))
    }

    /// `(Y_i(0), Y_i(1))` with the imputed value filled in.
    pub fn outcome_pair(&self, data: &ObservedDataset, i: usize) -> (f64, f64) {
        if data.treated[i] {
            (self.y_missing[i], data.y_obs[i])
        } else {
            (data.y_obs[i], self.y_missing[i])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub draws: Vec<DrawRecord>,
    /// Accepted Metropolis moves for `(λ0, λ1)` over all iterations.
    pub lambda_accepts: (usize, usize),
    pub iterations: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

fn at_step<T>(iteration: usize, step: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| CasbahError::Chain { iteration, step, source: Box::new(e) })
}

/// Runs a chain seeded from `config.seed`.
pub fn run_chain(data: &ObservedDataset, hp: &Hyperparams, config: &GibbsConfig) -> Result<PosteriorDraws> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    run_chain_with_rng(data, hp, config, &mut rng)
}

pub fn run_chain_with_rng(
    data: &ObservedDataset,
    hp: &Hyperparams,
    config: &GibbsConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PosteriorDraws> {
    data.validate_for_fit()?;
    hp.validate()?;
    config.validate()?;
    let (mut mixture, mut outcome) = init_state(data, hp, rng)?;
    let mut draws = Vec::with_capacity(config.kept_count());
    let mut accepts = (0, 0);

    for r in 1..=config.iterations {
        step_cluster_allocation(&mut mixture, data, hp, rng);
        step_atoms(&mut mixture, data, hp, rng);
        at_step(r, "weights", step_weights(&mut mixture, data, hp, config.tmvn_sweeps, rng))?;
        step_impute_post_treatment(&mut mixture, &outcome, data, hp, rng);
        at_step(r, "outcome", step_outcome_params(&mixture, &mut outcome, data, hp, rng))?;
        let moves = step_lambda(&mixture, &mut outcome, data, hp, rng);
        accepts.0 += usize::from(moves.lambda0_accepted);
        accepts.1 += usize::from(moves.lambda1_accepted);

        if !mixture.is_finite() || !outcome.is_finite() {
            return Err(CasbahError::Chain {
                iteration: r,
                step: "state check",
                source: Box::new(CasbahError::numerical("state became non-finite")),
            });
        }

        if config.keeps(r) {
            let y_missing = step_impute_outcome(&mixture, &outcome, data, rng);
            let strata = (0..data.n()).map(|i| assign_stratum(&mixture, i)).collect();
            draws.push(DrawRecord {
                iteration: r,
                mixture: mixture.clone(),
                outcome: outcome.clone(),
                y_missing,
                strata,
            });
        }
        if r % 100 == 0 {
            log::info!(
                "iteration {r}/{}: occupied atoms {}, lambda acceptance {}/{}",
                config.iterations,
                occupied_atoms(&mixture),
                accepts.0,
                accepts.1
            );
        }
    }
    Ok(PosteriorDraws { draws, lambda_accepts: accepts, iterations: config.iterations })
}

fn occupied_atoms(state: &MixtureState) -> usize {
    let mut used = vec![false; state.truncation()];
    for arm in &state.labels {
        for &s in arm {
            used[s] = true;
        }
    }
    used.into_iter().filter(|&u| u).count()
}
