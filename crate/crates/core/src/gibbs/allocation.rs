use rand::Rng;

use crate::dist::{normal_ln_pdf, sample_categorical_log};
use crate::model::{log_weights, Hyperparams, MixtureState, ObservedDataset};

/// Redraws every label with `P(S = l) ∝ π_l(x_i) N(P_i(t); η_l, σ_l²)`,
/// normalised in log space.
pub fn step_cluster_allocation<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &ObservedDataset,
    _hp: &Hyperparams,
    rng: &mut R,
) {
    let l = state.truncation();
    let mut alpha = Vec::with_capacity(l);
    let mut lw = Vec::with_capacity(l);
    for i in 0..data.n() {
        let x = data.covariate_row(i);
        for arm in 0..2 {
            let value = state.post_treatment(data, i, arm);
            log_weights(&state.beta[arm], &x, &mut alpha, &mut lw);
            for (k, w) in lw.iter_mut().enumerate() {
                *w += normal_ln_pdf(value, state.eta[k], state.sigma2[k]);
            }
            state.labels[arm][i] = sample_categorical_log(&lw, rng);
        }
    }
}
