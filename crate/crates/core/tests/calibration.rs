//! Fits data drawn from the model itself and checks that 90% intervals of the
//! atom locations cover the truth often enough.

mod common;

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use casbah::gibbs::run_chain_with_rng;
use casbah::strata::summarize_interval;
use casbah::{GibbsConfig, Hyperparams, ObservedDataset};

use common::{phi, std_normal};

const ETA: [f64; 3] = [-2.0, 1.0, 4.0];
const SIGMA2: [f64; 3] = [0.1, 0.15, 0.1];

/// Stick intercepts and slopes of the two arms, two sticks each.
const STICKS: [[(f64, f64); 2]; 2] = [[(0.5, -1.0), (0.0, 0.5)], [(-0.5, 1.0), (0.3, -0.5)]];

fn draw_label(arm: usize, x: f64, rng: &mut ChaCha8Rng) -> usize {
    for (k, &(a, b)) in STICKS[arm].iter().enumerate() {
        if rng.random::<f64>() < phi(a + b * x) {
            return k;
        }
    }
    2
}

/// Data plus the true atom of every `(unit, arm)`.
fn model_data(n: usize, rng: &mut ChaCha8Rng) -> (ObservedDataset, [Vec<usize>; 2]) {
    let mut x = DMatrix::zeros(n, 1);
    let (mut treated, mut p_obs, mut y_obs) = (Vec::new(), Vec::new(), Vec::new());
    let mut labels = [Vec::new(), Vec::new()];
    for i in 0..n {
        let xi = f64::from(u8::from(rng.random_bool(0.5)));
        x[(i, 0)] = xi;
        let s0 = draw_label(0, xi, rng);
        let s1 = draw_label(1, xi, rng);
        let p0 = ETA[s0] + SIGMA2[s0].sqrt() * std_normal(rng);
        let p1 = ETA[s1] + SIGMA2[s1].sqrt() * std_normal(rng);
        let t = rng.random_bool(0.5);
        let y = if t {
            1.0 + 2.0 * p1 - p0 + 0.5 * p0 * p1 + (-0.5 + 0.1 * p1).exp().sqrt() * std_normal(rng)
        } else {
            1.0 + 2.0 * p0 + (-0.5f64).exp().sqrt() * std_normal(rng)
        };
        treated.push(t);
        p_obs.push(if t { p1 } else { p0 });
        y_obs.push(y);
        labels[0].push(s0);
        labels[1].push(s1);
    }
    (ObservedDataset::new(x, treated, p_obs, y_obs).unwrap(), labels)
}

#[test]
fn atom_intervals_cover_truth() {
    let hp = Hyperparams::default();
    let cfg = GibbsConfig { iterations: 1500, burn_in: 500, ..GibbsConfig::default() };
    let (mut covered, mut total) = (0, 0);
    for rep in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let (data, truth) = model_data(200, &mut rng);
        let draws = run_chain_with_rng(&data, &hp, &cfg, &mut rng).unwrap();
        for (k, &eta) in ETA.iter().enumerate() {
            let members: Vec<(usize, usize)> =
                (0..2).flat_map(|arm| (0..data.n()).map(move |i| (arm, i))).filter(|&(arm, i)| truth[arm][i] == k).collect();
            if members.is_empty() {
                continue;
            }
            // The fitted atom holding most of the true members, per draw.
            let values: Vec<f64> = draws
                .draws
                .iter()
                .map(|d| {
                    let mut counts: HashMap<usize, usize> = HashMap::new();
                    for &(arm, i) in &members {
                        *counts.entry(d.mixture.labels[arm][i]).or_default() += 1;
                    }
                    let (&best, _) = counts.iter().max_by_key(|(&l, &c)| (c, std::cmp::Reverse(l))).unwrap();
                    d.mixture.eta[best]
                })
                .collect();
            let s = summarize_interval(&values, 0.9).unwrap();
            total += 1;
            if s.lower <= eta && eta <= s.upper {
                covered += 1;
            }
        }
    }
    let rate = covered as f64 / total as f64;
    assert!(rate >= 0.8, "coverage {covered}/{total} = {rate}");
}
