//! Oracles shared by the integration test targets. None of them call the
//! code paths they check.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Mean and variance of a 1-D density known up to a constant, by the
/// trapezoid rule on `points` equally spaced nodes over `[lo, hi]`.
pub fn grid_moments(lo: f64, hi: f64, points: usize, ln_density: impl Fn(f64) -> f64) -> (f64, f64) {
    grid_moments_of(lo, hi, points, ln_density, |x| x)
}

/// Mean and variance of `map(u)` where `u` has the given unnormalised log
/// density on `[lo, hi]`.
pub fn grid_moments_of(
    lo: f64,
    hi: f64,
    points: usize,
    ln_density: impl Fn(f64) -> f64,
    map: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let us: Vec<f64> = (0..points).map(|k| lo + h * k as f64).collect();
    let lds: Vec<f64> = us.iter().map(|&u| ln_density(u)).collect();
    let top = lds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (k, (&u, &ld)) in us.iter().zip(&lds).enumerate() {
        let w = if k == 0 || k == points - 1 { 0.5 } else { 1.0 } * (ld - top).exp();
        let x = map(u);
        z += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    let mean = m1 / z;
    (mean, m2 / z - mean * mean)
}

/// Standard normal CDF by the complementary error function.
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn ln_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean) * (x - mean) / var)
}

/// Box-Muller, independent of the crate's normal sampler.
pub fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `N(mean, 1)` truncated to `x > 0` when `positive`, `x < 0` otherwise.
/// Plain rejection when the kept side has mass above 0.05, inversion otherwise.
pub fn truncated_unit_normal(mean: f64, positive: bool, rng: &mut ChaCha8Rng) -> f64 {
    let below = phi(-mean);
    let mass = if positive { 1.0 - below } else { below };
    if mass > 0.05 {
        loop {
            let z = mean + std_normal(rng);
            if (z > 0.0) == positive {
                return z;
            }
        }
    }
    let u: f64 = rng.random();
    let p = if positive { below + u * (1.0 - below) } else { u * below };
    mean + inverse_phi(p)
}

/// Bisection inverse of [`phi`].
pub fn inverse_phi(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of draws in which two arms stop at the same stick among the
/// first `sticks`. Each stick carries one predictor `α ~ N(alpha_mean, alpha_var)`
/// shared by both arms; each arm stops there with probability `Φ(α)`.
pub fn mc_same_stick(alpha_mean: f64, alpha_var: f64, sticks: usize, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut hits = 0usize;
    for _ in 0..draws {
        let (mut s0, mut s1) = (None, None);
        for l in 0..sticks {
            let v = phi(alpha_mean + alpha_var.sqrt() * std_normal(rng));
            if s0.is_none() && rng.random::<f64>() < v {
                s0 = Some(l);
            }
            if s1.is_none() && rng.random::<f64>() < v {
                s1 = Some(l);
            }
            if s0.is_some() || s1.is_some() {
                break;
            }
        }
        if s0.is_some() && s0 == s1 {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// [`mc_same_stick`] with every stick probability fixed at `v`.
pub fn mc_same_stick_fixed(v: f64, sticks: usize, draws: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut hits = 0usize;
    for _ in 0..draws {
        for _ in 0..sticks {
            let a = rng.random::<f64>() < v;
            let b = rng.random::<f64>() < v;
            if a && b {
                hits += 1;
            }
            if a || b {
                break;
            }
        }
    }
    hits as f64 / draws as f64
}

fn choose2(k: usize) -> f64 {
    (k * k.saturating_sub(1)) as f64 / 2.0
}

/// ARI by explicit pair counting over all `n(n-1)/2` pairs.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            if sa && sb {
                both += 1.0;
            }
            if sa {
                in_a += 1.0;
            }
            if sb {
                in_b += 1.0;
            }
        }
    }
    let pairs = choose2(n);
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Every set partition of `n` elements into at most `max_blocks` blocks, as
/// restricted growth strings.
pub fn partitions(n: usize, max_blocks: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, max_blocks: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let used = prefix.iter().max().map_or(0, |m| m + 1);
        for b in 0..=used.min(max_blocks - 1) {
            prefix.push(b);
            grow(prefix, n, max_blocks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, max_blocks, &mut out);
    out
}

/// Equal up to renaming of blocks.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let n = a.len();
    (0..n).all(|i| (0..n).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
