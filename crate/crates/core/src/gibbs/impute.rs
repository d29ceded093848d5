use rand::Rng;

use crate::dist::{sample_categorical, sample_normal};
use crate::gibbs::OutcomeState;
use crate::model::{compute_weights, Hyperparams, MixtureState, ObservedDataset};

/// Below this `|θ12 + θ13 P(1)|` the treated outcome carries no information on `P(0)`.
const SLOPE_FLOOR: f64 = 1e-10;

/// `(mean, var)` of the missing post-treatment value of unit `i` given its
/// counterfactual atom `(eta, sigma2)`.
///
/// Control units draw `P(1)` from the atom. Treated units combine the atom with
/// the treated-outcome regression read as a Gaussian likelihood in `P(0)`.
pub fn missing_post_treatment_posterior(
    eta: f64,
    sigma2: f64,
    outcome: &OutcomeState,
    treated: bool,
    p_obs: f64,
    y_obs: f64,
) -> (f64, f64) {
    if !treated {
        return (eta, sigma2);
    }
    let t = &outcome.theta1;
    let slope = t[2] + t[3] * p_obs;
    if slope.abs() < SLOPE_FLOOR {
        return (eta, sigma2);
    }
    let m1 = (y_obs - t[0] - t[1] * p_obs) / slope;
    let v1 = outcome.var1(p_obs) / (slope * slope);
    let precision = 1.0 / sigma2 + 1.0 / v1;
    let var = 1.0 / precision;
    (var * (eta / sigma2 + m1 / v1), var)
}

/// Redraws the counterfactual label of every unit from the prior stick
/// weights of the opposite arm, then its missing post-treatment value.
pub fn step_impute_post_treatment<R: Rng + ?Sized>(
    state: &mut MixtureState,
    outcome: &OutcomeState,
    data: &ObservedDataset,
    _hp: &Hyperparams,
    rng: &mut R,
) {
    for i in 0..data.n() {
        let missing_arm = 1 - data.arm(i);
        let weights = compute_weights(&state.beta[missing_arm], &data.covariate_row(i));
        let l = sample_categorical(&weights, rng);
        state.labels[missing_arm][i] = l;
        let (mean, var) =
            missing_post_treatment_posterior(state.eta[l], state.sigma2[l], outcome, data.treated[i], data.p_obs[i], data.y_obs[i]);
        state.p_missing[i] = sample_normal(mean, var, rng);
    }
}
