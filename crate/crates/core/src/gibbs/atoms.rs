use rand::Rng;

use crate::dist::{sample_normal, InvGamma};
use crate::model::{Hyperparams, MixtureState, ObservedDataset};

/// Normal full conditional of one atom location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomPosterior {
    pub mean: f64,
    pub var: f64,
}

/// `η_l | ·` given the sum and count of values allocated to the atom
/// (pooled over both arms) and the current `σ_l²`. An empty atom gets the prior.
pub fn atom_posterior(sum: f64, count: usize, sigma2: f64, hp: &Hyperparams) -> AtomPosterior {
    let precision = count as f64 / sigma2 + 1.0 / hp.sigma2_eta;
    let var = 1.0 / precision;
    AtomPosterior {
        mean: var * (sum / sigma2 + hp.mu_eta / hp.sigma2_eta),
        var,
    }
}

/// `σ_l² | ·` given the count and summed squared deviations from `η_l`.
pub fn sigma2_posterior(sse: f64, count: usize, hp: &Hyperparams) -> InvGamma {
    InvGamma::new(hp.gamma1 + count as f64 / 2.0, hp.gamma2 + sse / 2.0).expect("positive hyperparameters")
}

/// Updates every atom from its conjugate conditional: location first, then
/// variance around the new location.
pub fn step_atoms<R: Rng + ?Sized>(state: &mut MixtureState, data: &ObservedDataset, hp: &Hyperparams, rng: &mut R) {
    let l = state.truncation();
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); l];
    for i in 0..data.n() {
        for arm in 0..2 {
            members[state.labels[arm][i]].push(state.post_treatment(data, i, arm));
        }
    }
    for (k, values) in members.iter().enumerate() {
        let sum: f64 = values.iter().sum();
        let post = atom_posterior(sum, values.len(), state.sigma2[k], hp);
        let eta = sample_normal(post.mean, post.var, rng);
        let sse: f64 = values.iter().map(|v| (v - eta) * (v - eta)).sum();
        state.eta[k] = eta;
        state.sigma2[k] = sigma2_posterior(sse, values.len(), hp).sample(rng);
    }
}
