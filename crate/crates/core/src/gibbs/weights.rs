//! Stick-breaking coefficient update.
//!
//! Given the labels of one arm, the probit likelihood of the coefficients is
//! `Φ_{n̄}(X̄ β; I)` where every unit contributes one row per stick it passed
//! through: `+x_i` for the stick it stopped at and `-x_i` for earlier ones.
//! Under the prior `N(ξ 1, ω² I)` the posterior is unified skew-normal with
//! `Δ = ω X̄ᵀ d⁻¹`, `γ = d⁻¹ X̄ ξ`, `Γ = d⁻¹ (ω² X̄ X̄ᵀ + I) d⁻¹` and
//! `d = diag(ω² X̄ X̄ᵀ + I)^{1/2}`.
//!
//! Two samplers target that posterior. [`WeightsSolver::DenseSun`] builds the
//! SUN parameters explicitly and uses [`SunSampler`]. [`WeightsSolver::Blockwise`]
//! exploits that each row of `X̄` touches a single stick, so `X̄ᵀX̄` is block
//! diagonal and the SUN factors reduce to `(p+1) x (p+1)` systems per stick;
//! its truncated component is swept jointly with the Gaussian component,
//! whose last draw is exactly `B0 + Δ Γ⁻¹ B1`.
//!
//! Both warm-start the truncated component from the current coefficients: given
//! `u = (β - ξ)/ω`, the unscaled latent `d B1` has independent coordinates
//! `N(ω X̄u, 1)` truncated below `-X̄ξ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dist::{sample_normal, sample_std_normal, sample_truncnorm_lower, SunParams, SunSampler};
use crate::error::{CasbahError, Result};
use crate::model::{Hyperparams, MixtureState, ObservedDataset};

/// Largest `n̄` routed to the dense SUN sampler by [`WeightsSolver::Auto`].
pub const DENSE_SUN_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightsSolver {
    /// Dense for `n̄ <= DENSE_SUN_LIMIT`, blockwise otherwise.
    #[default]
    Auto,
    DenseSun,
    Blockwise,
}

/// Row structure of the stacked probit design for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct StickDesign {
    /// `(unit, stick, sign)` per row of `X̄`.
    pub rows: Vec<(usize, usize, f64)>,
    pub sticks: usize,
}

impl StickDesign {
    /// Unit with 0-based label `s` contributes `min(s + 1, L - 1)` rows.
    pub fn new(labels: &[usize], truncation: usize) -> Self {
        let sticks = truncation - 1;
        let mut rows = Vec::new();
        for (i, &s) in labels.iter().enumerate() {
            for k in 0..(s + 1).min(sticks) {
                rows.push((i, k, if k == s { 1.0 } else { -1.0 }));
            }
        }
        Self { rows, sticks }
    }

    /// `n̄`
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Dense `n̄ x (p+1)(L-1)` matrix; stick `k` owns columns `k(p+1)..(k+1)(p+1)`.
    pub fn dense(&self, data: &ObservedDataset) -> DMatrix<f64> {
        let width = data.p() + 1;
        let mut m = DMatrix::zeros(self.len(), width * self.sticks);
        for (r, &(i, k, sign)) in self.rows.iter().enumerate() {
            m[(r, k * width)] = sign;
            for j in 0..data.p() {
                m[(r, k * width + j + 1)] = sign * data.x[(i, j)];
            }
        }
        m
    }

    /// The SUN posterior of the flattened coefficient vector.
    pub fn sun_params(&self, data: &ObservedDataset, hp: &Hyperparams) -> SunParams {
        let xbar = self.dense(data);
        let q = xbar.ncols();
        let omega = hp.omega2.sqrt();
        let mut m = hp.omega2 * &xbar * xbar.transpose();
        for r in 0..self.len() {
            m[(r, r)] += 1.0;
        }
        let d_inv = DVector::from_iterator(self.len(), (0..self.len()).map(|r| 1.0 / m[(r, r)].sqrt()));
        let d_inv_mat = DMatrix::from_diagonal(&d_inv);
        let xi = DVector::from_element(q, hp.xi);
        let delta = omega * xbar.transpose() * &d_inv_mat;
        let gamma = &d_inv_mat * &xbar * &xi;
        let mut gamma_cov = &d_inv_mat * m * &d_inv_mat;
        gamma_cov = 0.5 * (&gamma_cov + gamma_cov.transpose());
        SunParams {
            xi,
            omega_scale: DVector::from_element(q, omega),
            delta,
            gamma,
            gamma_cov,
        }
    }
}

/// Updates `β⁽⁰⁾` and `β⁽¹⁾` with the default solver.
pub fn step_weights<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &ObservedDataset,
    hp: &Hyperparams,
    sweeps: usize,
    rng: &mut R,
) -> Result<()> {
    step_weights_with(state, data, hp, sweeps, WeightsSolver::Auto, rng)
}

pub fn step_weights_with<R: Rng + ?Sized>(
    state: &mut MixtureState,
    data: &ObservedDataset,
    hp: &Hyperparams,
    sweeps: usize,
    solver: WeightsSolver,
    rng: &mut R,
) -> Result<()> {
    for arm in 0..2 {
        let design = StickDesign::new(&state.labels[arm], state.truncation());
        let dense = match solver {
            WeightsSolver::Auto => design.len() <= DENSE_SUN_LIMIT,
            WeightsSolver::DenseSun => true,
            WeightsSolver::Blockwise => false,
        };
        state.beta[arm] = if dense {
            sample_dense(&design, &state.beta[arm], data, hp, sweeps, rng)?
        } else {
            sample_blockwise(&design, &state.beta[arm], data, hp, sweeps, rng)?
        };
    }
    Ok(())
}

fn unscaled_latent_start<R: Rng + ?Sized>(xbar: &DMatrix<f64>, u: &DVector<f64>, hp: &Hyperparams, rng: &mut R) -> DVector<f64> {
    let omega = hp.omega2.sqrt();
    let mean = omega * xbar * u;
    let offset = xbar * DVector::from_element(xbar.ncols(), hp.xi);
    DVector::from_iterator(
        mean.len(),
        mean.iter().zip(offset.iter()).map(|(&m, &o)| sample_truncnorm_lower(m, 1.0, -o, rng)),
    )
}

fn sample_dense<R: Rng + ?Sized>(
    design: &StickDesign,
    beta: &DMatrix<f64>,
    data: &ObservedDataset,
    hp: &Hyperparams,
    sweeps: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (rows, cols) = beta.shape();
    let params = design.sun_params(data, hp);
    let sampler = SunSampler::new(&params)?;
    let draw = if design.is_empty() {
        sampler.sample(rng, sweeps)
    } else {
        let xbar = design.dense(data);
        let omega = hp.omega2.sqrt();
        let u = DVector::from_iterator(rows * cols, beta.iter().map(|b| (b - hp.xi) / omega));
        let w = unscaled_latent_start(&xbar, &u, hp, rng);
        let d = DVector::from_iterator(
            xbar.nrows(),
            xbar.row_iter().map(|row| (hp.omega2 * row.norm_squared() + 1.0).sqrt()),
        );
        let b1 = w.component_div(&d);
        sampler.sample_from(b1, rng, sweeps)
    };
    if draw.iter().any(|v| !v.is_finite()) {
        return Err(CasbahError::numerical("dense SUN draw produced non-finite coefficients"));
    }
    Ok(DMatrix::from_column_slice(rows, cols, draw.as_slice()))
}

fn sample_blockwise<R: Rng + ?Sized>(
    design: &StickDesign,
    beta: &DMatrix<f64>,
    data: &ObservedDataset,
    hp: &Hyperparams,
    sweeps: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let width = data.p() + 1;
    let omega = hp.omega2.sqrt();
    let mut per_stick: Vec<Vec<(usize, f64)>> = vec![Vec::new(); design.sticks];
    for &(i, k, sign) in &design.rows {
        per_stick[k].push((i, sign));
    }
    let mut out = beta.clone();
    let mut z = Vec::new();
    for (k, rows) in per_stick.iter().enumerate() {
        if rows.is_empty() {
            for j in 0..width {
                out[(j, k)] = sample_normal(hp.xi, hp.omega2, rng);
            }
            continue;
        }
        // Signed design rows z_r = sign * (1, x_i).
        z.clear();
        for &(i, sign) in rows {
            z.push(sign);
            for j in 0..data.p() {
                z.push(sign * data.x[(i, j)]);
            }
        }
        let zmat = DMatrix::from_row_slice(rows.len(), width, &z);
        let mut precision = hp.omega2 * zmat.transpose() * &zmat;
        for j in 0..width {
            precision[(j, j)] += 1.0;
        }
        let chol = precision.cholesky().ok_or_else(|| {
            CasbahError::numerical(format!("stick {k}: latent precision not positive definite"))
        })?;
        let lower = -(&zmat * DVector::from_element(width, hp.xi));
        let mut u = DVector::from_iterator(width, out.column(k).iter().map(|b| (b - hp.xi) / omega));
        let mut w = DVector::zeros(rows.len());
        for _ in 0..sweeps.max(1) {
            let mean = omega * &zmat * &u;
            for r in 0..rows.len() {
                w[r] = sample_truncnorm_lower(mean[r], 1.0, lower[r], rng);
            }
            let centre = chol.solve(&(omega * zmat.transpose() * &w));
            let eps = DVector::from_fn(width, |_, _| sample_std_normal(rng));
            // L⁻ᵀ ε has covariance (L Lᵀ)⁻¹.
            let noise = chol
                .l()
                .transpose()
                .solve_upper_triangular(&eps)
                .ok_or_else(|| CasbahError::numerical(format!("stick {k}: singular factor")))?;
            u = centre + noise;
        }
        for j in 0..width {
            out[(j, k)] = hp.xi + omega * u[j];
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CasbahError::numerical("blockwise SUN draw produced non-finite coefficients"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize) -> ObservedDataset {
        let x = DMatrix::from_fn(n, 1, |i, _| (i % 3) as f64 - 1.0);
        ObservedDataset::new(x, (0..n).map(|i| i % 2 == 0).collect(), vec![0.0; n], vec![0.0; n]).unwrap()
    }

    #[test]
    fn design_rows_follow_labels() {
        // L = 3: label 0 -> (+ stick 0); label 1 -> (- stick 0, + stick 1); label 2 -> (-, -).
        let d = StickDesign::new(&[0, 1, 2], 3);
        assert_eq!(
            d.rows,
            vec![(0, 0, 1.0), (1, 0, -1.0), (1, 1, 1.0), (2, 0, -1.0), (2, 1, -1.0)]
        );
        assert_eq!(d.len(), 1 + 2 + 2);
    }

    #[test]
    fn dense_layout_puts_sticks_in_column_blocks() {
        let data = data(2);
        let d = StickDesign::new(&[1, 0], 3);
        let m = d.dense(&data);
        assert_eq!(m.shape(), (3, 4));
        // unit 0 (x = -1): rows (-1, +1) on stick 0 then (1, -1) on stick 1
        assert_eq!(m.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0, -1.0]);
        assert_eq!(m.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn sun_parameters_are_consistent() {
        let data = data(5);
        let hp = Hyperparams { truncation: 3, ..Default::default() };
        let d = StickDesign::new(&[0, 1, 2, 1, 0], 3);
        let sun = d.sun_params(&data, &hp);
        sun.validate().unwrap();
        for r in 0..d.len() {
            assert!((sun.gamma_cov[(r, r)] - 1.0).abs() < 1e-12);
        }
        // Δ Δᵀ has eigenvalues < 1 relative to Γ: I - ΔΓ⁻¹Δᵀ must be PSD.
        SunSampler::new(&sun).unwrap();
    }

    #[test]
    fn reproducible_with_fixed_seed() {
        let data = data(6);
        let hp = Hyperparams { truncation: 3, ..Default::default() };
        let mk = || MixtureState {
            eta: vec![0.0; 3],
            sigma2: vec![1.0; 3],
            beta: [DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)],
            labels: [vec![0, 1, 2, 0, 1, 2], vec![2, 2, 1, 0, 0, 1]],
            p_missing: vec![0.0; 6],
        };
        for solver in [WeightsSolver::DenseSun, WeightsSolver::Blockwise] {
            let mut a = mk();
            let mut b = mk();
            step_weights_with(&mut a, &data, &hp, 10, solver, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            step_weights_with(&mut b, &data, &hp, 10, solver, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            assert_eq!(a.beta, b.beta);
            assert_ne!(a.beta[0], DMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn empty_design_draws_from_prior() {
        let data = ObservedDataset::new(DMatrix::zeros(0, 1), vec![], vec![], vec![]).unwrap();
        let hp = Hyperparams { truncation: 2, xi: 3.0, omega2: 0.01, ..Default::default() };
        let mut s = MixtureState {
            eta: vec![0.0; 2],
            sigma2: vec![1.0; 2],
            beta: [DMatrix::zeros(2, 1), DMatrix::zeros(2, 1)],
            labels: [vec![], vec![]],
            p_missing: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for solver in [WeightsSolver::DenseSun, WeightsSolver::Blockwise] {
            step_weights_with(&mut s, &data, &hp, 10, solver, &mut rng).unwrap();
            assert!(s.beta[0].iter().all(|b| (b - 3.0).abs() < 0.6));
        }
    }
}
