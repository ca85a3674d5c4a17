//! First-order expansion diagnostics: the directional derivative of the
//! averaged value function, the Poisson-equation right-hand side `rho`, the
//! correction term `u1`, and the remainder `r^eps = u^eps - ubar - eps u1`.
//!
//! The correction solves the Poisson equation of the frozen generator with
//! right-hand side `rho(t, x, y) = (a(x, y) - abar(x), Dx ubar(t, x))`,
//! which is centered under the invariant measure, and has the integral
//! representation
//!
//! ```text
//! u1(t, x, y) = int_0^inf E rho(t, x, Y^x_s(y)) ds,
//! ```
//!
//! estimated here by trapezoidal quadrature along frozen paths truncated at
//! `s_trunc`, with the (exponentially small) tail reported separately.
//! `Dx ubar` is estimated pathwise through the first-variation process:
//! `Dx ubar(t, x) . k = E [(grad phi(Xbar_t), eta_t)]` with `eta_0 = k`.

use rayon::prelude::*;

use crate::ergodic::AveragedDrift;
use crate::error::{Result, SimError};
use crate::integrate::{
    frozen_kernel, pair_on_with, variation_kernel, Drift, KernelScratch, NoiseRealization,
    ScaleParams,
};
use crate::model::CoefficientModel;
use crate::randomness::RandomPlan;
use crate::stats::mean_stderr;
use crate::weakerror::{n_rule, McEstimate, Observable};

const TAG_DX: u64 = 0x4458_5542;
const TAG_U1: u64 = 0x5531_4553;
const TAG_EPS: u64 = 0x4550_5345;

/// Directional derivative `Dx ubar(t_end, x) . direction` via the
/// first-variation process of the averaged flow.
pub fn estimate_dx_ubar(
    abar: &AveragedDrift,
    model: &CoefficientModel,
    obs: &Observable,
    t_end: f64,
    x: &[f64],
    direction: &[f64],
    n: usize,
    dt: f64,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(SimError::InvalidInput(format!(
            "derivative estimator needs n >= 2 samples, got {n}"
        )));
    }
    if crate::stats::norm(direction) == 0.0 {
        return Err(SimError::InvalidInput(
            "derivative direction must be nonzero".into(),
        ));
    }
    let n_dim = model.dims().n;
    let values: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map_init(
            || {
                (
                    NoiseRealization::new(),
                    KernelScratch::for_model(model),
                    vec![0.0; n_dim],
                )
            },
            |(noise, scratch, grad), i| -> Result<f64> {
                let p = plan.for_sample(i);
                noise
                    .resample_slow(model, t_end, dt, &p)
                    .map_err(|e| e.with_sample(i))?;
                let mut xb = x.to_vec();
                let mut eta = direction.to_vec();
                variation_kernel(abar, model, noise, &mut xb, &mut eta, scratch)
                    .map_err(|e| e.with_sample(i))?;
                obs.grad_into(&xb, grad);
                Ok(crate::stats::dot(grad, &eta))
            },
        )
        .collect::<Result<Vec<_>>>()?;
    Ok(McEstimate::from_samples(&values))
}

/// `Dx ubar` along every coordinate direction, with standard errors.
fn dx_ubar_all_directions(
    abar: &AveragedDrift,
    model: &CoefficientModel,
    obs: &Observable,
    t_end: f64,
    x: &[f64],
    n: usize,
    dt: f64,
    plan: &RandomPlan,
) -> Result<Vec<McEstimate>> {
    let n_dim = model.dims().n;
    let base = plan.for_sample(TAG_DX);
    (0..n_dim)
        .map(|j| {
            let mut dir = vec![0.0; n_dim];
            dir[j] = 1.0;
            estimate_dx_ubar(
                abar,
                model,
                obs,
                t_end,
                x,
                &dir,
                n,
                dt,
                &base.for_sample(j as u64),
            )
        })
        .collect()
}

/// Evaluate `a(x, y) - abar(x)` into `out`; returns the standard errors of
/// the averaged drift (zero for the analytic source).
fn drift_gap(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    x: &[f64],
    y: &[f64],
    out: &mut [f64],
) -> Result<Vec<f64>> {
    let n_dim = model.dims().n;
    let mut a = vec![0.0; n_dim];
    let mut ab = vec![0.0; n_dim];
    model.eval_a(x, y, &mut a);
    abar.eval(x, &mut ab)?;
    for i in 0..n_dim {
        out[i] = a[i] - ab[i];
    }
    if abar.is_analytic() {
        Ok(vec![0.0; n_dim])
    } else {
        Ok(abar.estimate_at(x)?.stderr.clone())
    }
}

/// Pointwise Poisson-equation right-hand side
/// `rho(t_end, x, y) = (a(x, y) - abar(x), Dx ubar(t_end, x))`.
///
/// `n` is the sample count of the derivative estimate; the drift gap itself
/// is deterministic (up to the averaged-drift noise when it is estimated).
pub fn estimate_rho(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    obs: &Observable,
    t_end: f64,
    x: &[f64],
    y: &[f64],
    n: usize,
    dt: f64,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    let n_dim = model.dims().n;
    let dx = dx_ubar_all_directions(abar, model, obs, t_end, x, n, dt, plan)?;
    let mut gap = vec![0.0; n_dim];
    let gap_se = drift_gap(model, abar, x, y, &mut gap)?;
    let mut mean = 0.0;
    let mut var = 0.0;
    for j in 0..n_dim {
        mean += gap[j] * dx[j].mean;
        var += (gap[j] * dx[j].stderr).powi(2) + (dx[j].mean * gap_se[j]).powi(2);
    }
    Ok(McEstimate {
        mean,
        stderr: var.sqrt(),
        n: n as u64,
    })
}

/// Correction estimate plus its truncation diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct U1Estimate {
    pub estimate: McEstimate,
    pub s_trunc: f64,
    /// Bound on the discarded tail `int_S^inf E rho ds`, from the terminal
    /// integrand level and the mixing rate.
    pub tail_bound: f64,
    /// Set when the truncation horizon is too short for the tail to hide
    /// below the statistical error.
    pub tail_warning: bool,
}

/// Parameters of the `u1` quadrature.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct U1Params {
    /// Truncation horizon of the s-integral (want `>= 10 / beta_hat`).
    pub s_trunc: f64,
    /// Frozen-path samples.
    pub n: usize,
    /// Frozen-path step.
    pub dt: f64,
    /// Samples for the `Dx ubar` factor.
    pub n_deriv: usize,
    /// Averaged-path step for the `Dx ubar` factor.
    pub dt_deriv: f64,
    /// Dissipativity constant used for the tail bound.
    pub beta_hat: f64,
}

impl Default for U1Params {
    fn default() -> Self {
        U1Params {
            s_trunc: 12.0,
            n: 20_000,
            dt: 0.01,
            n_deriv: 20_000,
            dt_deriv: 0.005,
            beta_hat: 1.0,
        }
    }
}

/// Estimate `u1(t_end, x, y)` by integrating the expected drift gap along
/// frozen paths and contracting with `Dx ubar(t_end, x)`.
///
/// One long path per sample supplies the whole s-profile of the integrand;
/// the trapezoidal rule runs on the path's own jump-adapted grid.
pub fn estimate_u1(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    obs: &Observable,
    t_end: f64,
    x: &[f64],
    y: &[f64],
    params: &U1Params,
    plan: &RandomPlan,
) -> Result<U1Estimate> {
    if !(params.s_trunc > 0.0) || params.n < 2 {
        return Err(SimError::InvalidInput(
            "u1 estimator needs s_trunc > 0 and n >= 2".into(),
        ));
    }
    let n_dim = model.dims().n;
    let dx = dx_ubar_all_directions(
        abar,
        model,
        obs,
        t_end,
        x,
        params.n_deriv,
        params.dt_deriv,
        plan,
    )?;
    let dx_mean: Vec<f64> = dx.iter().map(|e| e.mean).collect();

    let mut abar_x = vec![0.0; n_dim];
    abar.eval(x, &mut abar_x)?;

    // per-sample: coordinatewise integral of (a - abar) over [0, S], plus
    // the terminal scalar integrand for the tail estimate
    let base = plan.for_sample(TAG_U1);
    let rows: Vec<(Vec<f64>, f64)> = (0..params.n as u64)
        .into_par_iter()
        .map_init(
            || {
                (
                    NoiseRealization::new(),
                    KernelScratch::for_model(model),
                    vec![0.0; n_dim],
                )
            },
            |(noise, scratch, abuf), i| -> Result<(Vec<f64>, f64)> {
                let p = base.for_sample(i);
                noise
                    .resample_frozen(model, params.s_trunc, params.dt, &p)
                    .map_err(|e| e.with_sample(i))?;
                let mut ys = y.to_vec();
                let mut integral = vec![0.0; n_dim];
                let mut prev_gap = vec![0.0; n_dim];
                let mut last_gap = vec![0.0; n_dim];
                let mut prev_t = 0.0;
                let mut first = true;
                frozen_kernel(model, x, noise, &mut ys, scratch, |_, t, state| {
                    model.eval_a(x, state, abuf);
                    for j in 0..n_dim {
                        let gap = abuf[j] - abar_x[j];
                        if !first {
                            integral[j] += 0.5 * (t - prev_t) * (prev_gap[j] + gap);
                        }
                        prev_gap[j] = gap;
                        last_gap[j] = gap;
                    }
                    prev_t = t;
                    first = false;
                })
                .map_err(|e| e.with_sample(i))?;
                let terminal: f64 = last_gap
                    .iter()
                    .zip(&dx_mean)
                    .map(|(g, d)| g * d)
                    .sum();
                Ok((integral, terminal))
            },
        )
        .collect::<Result<Vec<_>>>()?;

    // contract coordinate means with Dx ubar, propagating both error sources
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut coord = vec![0.0; rows.len()];
    for j in 0..n_dim {
        for (i, (row, _)) in rows.iter().enumerate() {
            coord[i] = row[j];
        }
        let (mj, sej) = mean_stderr(&coord);
        mean += dx_mean[j] * mj;
        var += (dx_mean[j] * sej).powi(2) + (mj * dx[j].stderr).powi(2);
    }
    let stderr = var.sqrt();

    let terminals: Vec<f64> = rows.iter().map(|(_, t)| *t).collect();
    let (term_mean, term_se) = mean_stderr(&terminals);
    let beta = params.beta_hat.max(1e-6);
    let tail_bound = (term_mean.abs() + term_se) * 2.0 / beta;
    let tail_warning = tail_bound > stderr.max(1e-300) || params.s_trunc < 10.0 / beta;

    Ok(U1Estimate {
        estimate: McEstimate {
            mean,
            stderr,
            n: params.n as u64,
        },
        s_trunc: params.s_trunc,
        tail_bound,
        tail_warning,
    })
}

/// Per-epsilon report of the expansion `u^eps = ubar + eps u1 + r^eps`.
/// `r_eps` is the arithmetic residue of the other fields.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExpansionReport {
    pub epsilon: f64,
    pub u_eps: McEstimate,
    pub u_bar: McEstimate,
    pub u1_hat: McEstimate,
    pub r_eps: f64,
    pub r_eps_stderr: f64,
    pub s_trunc: f64,
    pub tail_bound: f64,
    pub tail_warning: bool,
}

/// Parameters for [`residual_check`].
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ExpansionParams {
    pub t_end: f64,
    /// Step for the coupled/averaged runs; defaults to `0.1 * min(epsilons)`.
    pub dt: Option<f64>,
    pub u1: U1Params,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        ExpansionParams {
            t_end: 1.0,
            dt: None,
            u1: U1Params::default(),
        }
    }
}

/// Estimate `u^eps`, `ubar`, and the remainder across an epsilon grid.
///
/// `u1` is estimated once (it does not depend on epsilon); each epsilon gets
/// coupled samples sized by the weak-error rule with base `n0`. The
/// per-sample coupling makes `u_eps - u_bar` a low-variance difference, so
/// the remainder is resolvable at small epsilon.
pub fn residual_check(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    obs: &Observable,
    x: &[f64],
    y: &[f64],
    epsilons: &[f64],
    n0: usize,
    params: &ExpansionParams,
    plan: &RandomPlan,
) -> Result<Vec<ExpansionReport>> {
    if epsilons.len() < 2 {
        return Err(SimError::InvalidInput(
            "residual check needs at least two epsilons".into(),
        ));
    }
    let eps_min = epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps_max = epsilons.iter().cloned().fold(0.0, f64::max);
    if !(eps_min > 0.0 && eps_max <= 1.0) {
        return Err(SimError::InvalidInput(
            "epsilons must lie in (0, 1]".into(),
        ));
    }
    let dt = params.dt.unwrap_or(0.1 * eps_min);

    let u1 = estimate_u1(model, abar, obs, params.t_end, x, y, &params.u1, plan)?;

    let mut reports = Vec::with_capacity(epsilons.len());
    for (k, &eps) in epsilons.iter().enumerate() {
        let scale = ScaleParams::new(eps, params.t_end, dt)?;
        let n = n_rule(n0, eps_max, eps);
        let cell = plan.for_sample(TAG_EPS).for_sample(k as u64);

        let rows: Vec<(f64, f64)> = (0..n as u64)
            .into_par_iter()
            .map_init(
                || (NoiseRealization::new(), KernelScratch::for_model(model)),
                |(noise, scratch), i| -> Result<(f64, f64)> {
                    let p = cell.for_sample(i);
                    noise
                        .resample_coupled(model, &scale, &p)
                        .map_err(|e| e.with_sample(i))?;
                    let pair = pair_on_with(model, abar, &scale, x, y, noise, scratch)
                        .map_err(|e| e.with_sample(i))?;
                    Ok((obs.eval(&pair.x_eps), obs.eval(&pair.x_bar)))
                },
            )
            .collect::<Result<Vec<_>>>()?;

        let eps_vals: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let bar_vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let diff_vals: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
        let u_eps = McEstimate::from_samples(&eps_vals);
        let u_bar = McEstimate::from_samples(&bar_vals);
        let diff = McEstimate::from_samples(&diff_vals);

        let r_eps = u_eps.mean - u_bar.mean - eps * u1.estimate.mean;
        let r_eps_stderr =
            (diff.stderr.powi(2) + (eps * u1.estimate.stderr).powi(2)).sqrt();
        reports.push(ExpansionReport {
            epsilon: eps,
            u_eps,
            u_bar,
            u1_hat: u1.estimate,
            r_eps,
            r_eps_stderr,
            s_trunc: u1.s_trunc,
            tail_bound: u1.tail_bound,
            tail_warning: u1.tail_warning,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::AveragedDrift;
    use crate::integrate::DriftFn;
    use crate::model::{make_jump_ou_benchmark, CoefficientModel, Dims, JumpOuParams};
    use std::sync::Arc;

    fn benchmark() -> Arc<CoefficientModel> {
        Arc::new(make_jump_ou_benchmark(JumpOuParams::default()).unwrap())
    }

    fn still_model() -> Arc<CoefficientModel> {
        Arc::new(
            CoefficientModel::builder(Dims::scalar())
                .jump_rates(0.0, 0.0)
                .build()
                .unwrap(),
        )
    }

    // Wraps a closure drift in the AveragedDrift-compatible path used by the
    // estimators that only need the Drift trait.
    fn analytic_drift(model: &Arc<CoefficientModel>) -> AveragedDrift {
        AveragedDrift::analytic(model).unwrap()
    }

    #[test]
    fn derivative_of_identity_flow_is_one() {
        // abar = 0, b = c = 0, phi(x) = x: the flow is the identity and
        // Dx ubar = 1 exactly.
        let model = still_model();
        let zero = DriftFn(|_: &[f64], _: &mut [f64]| {});
        let obs = Observable::coordinate(0);
        let plan = RandomPlan::new(300, 0);
        // route through the public estimator by faking an analytic drift:
        // a model with abar = 0 closed form
        let model_zero = Arc::new(
            CoefficientModel::builder(Dims::scalar())
                .abar_analytic(|_, out| out[0] = 0.0)
                .jump_rates(0.0, 0.0)
                .build()
                .unwrap(),
        );
        let abar = analytic_drift(&model_zero);
        let est =
            estimate_dx_ubar(&abar, &model_zero, &obs, 1.0, &[0.3], &[1.0], 4, 0.01, &plan)
                .unwrap();
        assert!((est.mean - 1.0).abs() < 1e-9);
        assert!(est.stderr < 1e-12);
        let _ = (model, zero);
    }

    #[test]
    fn derivative_of_linear_flow_matches_exponential() {
        let lambda = 0.8;
        let model = Arc::new(
            CoefficientModel::builder(Dims::scalar())
                .abar_analytic(move |x, out| out[0] = lambda * x[0])
                .jump_rates(0.0, 0.0)
                .build()
                .unwrap(),
        );
        let abar = analytic_drift(&model);
        let obs = Observable::coordinate(0);
        let plan = RandomPlan::new(301, 0);
        let dt = 1e-3;
        let est =
            estimate_dx_ubar(&abar, &model, &obs, 1.0, &[0.5], &[1.0], 4, dt, &plan).unwrap();
        let exact = lambda.exp();
        assert!(
            (est.mean - exact).abs() <= 5.0 * dt * exact,
            "derivative {} vs {exact}",
            est.mean
        );
    }

    #[test]
    fn variation_estimate_agrees_with_common_noise_finite_difference() {
        // central finite difference of ubar with common random numbers
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(302, 0);
        let n = 4000;
        let dt = 0.005;
        let t_end = 1.0;

        let var_est = estimate_dx_ubar(
            &abar, &model, &obs, t_end, &[0.0], &[1.0], n, dt, &plan,
        )
        .unwrap();

        let delta = 1e-3;
        let fd_plan = plan.for_sample(42);
        let mut fd_samples = Vec::with_capacity(n);
        let mut noise = NoiseRealization::new();
        let mut scratch = KernelScratch::for_model(&model);
        for i in 0..n as u64 {
            let p = fd_plan.for_sample(i);
            noise.resample_slow(&model, t_end, dt, &p).unwrap();
            let mut xp = vec![delta];
            crate::integrate::averaged_window_kernel(
                &abar,
                &model,
                &noise,
                0,
                noise.grid.steps(),
                &mut xp,
                &mut scratch,
                None,
            )
            .unwrap();
            let mut xm = vec![-delta];
            crate::integrate::averaged_window_kernel(
                &abar,
                &model,
                &noise,
                0,
                noise.grid.steps(),
                &mut xm,
                &mut scratch,
                None,
            )
            .unwrap();
            fd_samples.push((obs.eval(&xp) - obs.eval(&xm)) / (2.0 * delta));
        }
        let (fd_mean, fd_se) = crate::stats::mean_stderr(&fd_samples);
        let combined = (var_est.stderr.powi(2) + fd_se.powi(2)).sqrt();
        assert!(
            (var_est.mean - fd_mean).abs() <= 3.0 * combined + 1e-4,
            "variation {} +- {} vs finite difference {} +- {}",
            var_est.mean,
            var_est.stderr,
            fd_mean,
            fd_se
        );
    }

    #[test]
    fn rho_vanishes_when_drift_ignores_fast_variable() {
        let model = Arc::new(
            make_jump_ou_benchmark(JumpOuParams {
                gamma: 0.0,
                ..Default::default()
            })
            .unwrap(),
        );
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(303, 0);
        let rho =
            estimate_rho(&model, &abar, &obs, 1.0, &[0.0], &[2.0], 64, 0.01, &plan).unwrap();
        assert_eq!(rho.mean, 0.0);
    }

    #[test]
    fn rho_matches_closed_form_drift_gap_times_derivative() {
        // linear read at x = 0: a - abar = gamma (y - 1.2)
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(304, 0);
        let y = [0.3];
        let n = 2000;
        let dt = 0.005;
        let rho = estimate_rho(&model, &abar, &obs, 1.0, &[0.0], &y, n, dt, &plan).unwrap();
        let dx = estimate_dx_ubar(
            &abar,
            &model,
            &obs,
            1.0,
            &[0.0],
            &[1.0],
            n,
            dt,
            &plan.for_sample(TAG_DX).for_sample(0),
        )
        .unwrap();
        let expected = 1.0 * (y[0] - 1.2) * dx.mean;
        assert!(
            (rho.mean - expected).abs() <= 1e-12 + 3.0 * rho.stderr,
            "rho {} vs gamma (y - 1.2) Dx = {expected}",
            rho.mean
        );
    }

    #[test]
    fn rho_is_centered_under_the_invariant_measure() {
        // ensemble average of rho over near-stationary fast samples
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(305, 0);
        let dx = estimate_dx_ubar(
            &abar, &model, &obs, 1.0, &[0.0], &[1.0], 4000, 0.005, &plan,
        )
        .unwrap();

        // stationary samples: frozen paths run past many mixing times
        let n = 20_000;
        let horizon = 15.0;
        let sample_plan = plan.for_sample(7);
        let mut vals = Vec::with_capacity(n);
        let mut noise = NoiseRealization::new();
        let mut scratch = KernelScratch::for_model(&model);
        let mut abuf = [0.0];
        for i in 0..n as u64 {
            let p = sample_plan.for_sample(i);
            noise.resample_frozen(&model, horizon, 0.02, &p).unwrap();
            let mut ys = vec![0.5];
            frozen_kernel(&model, &[0.0], &noise, &mut ys, &mut scratch, |_, _, _| {}).unwrap();
            model.eval_a(&[0.0], &ys, &mut abuf);
            vals.push((abuf[0] - 1.2) * dx.mean);
        }
        let (mean, se) = crate::stats::mean_stderr(&vals);
        assert!(
            mean.abs() <= 3.0 * se + 3.0 * dx.stderr,
            "stationary mean of rho = {mean} +- {se}"
        );
    }

    #[test]
    fn u1_vanishes_when_drift_ignores_fast_variable() {
        let model = Arc::new(
            make_jump_ou_benchmark(JumpOuParams {
                gamma: 0.0,
                ..Default::default()
            })
            .unwrap(),
        );
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(306, 0);
        let params = U1Params {
            s_trunc: 12.0,
            n: 200,
            dt: 0.02,
            n_deriv: 200,
            dt_deriv: 0.01,
            beta_hat: 1.0,
        };
        let u1 = estimate_u1(&model, &abar, &obs, 1.0, &[0.0], &[0.5], &params, &plan).unwrap();
        assert_eq!(u1.estimate.mean, 0.0);
    }

    #[test]
    fn u1_matches_analytic_benchmark_value() {
        // E[Y_s - m] = (y - m) e^{-s} integrates to (y - m), so
        // u1(t, 0, y) = gamma (y - m) Dx ubar(t, 0) with m = 1.2.
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(307, 0);
        let y = 0.5;
        let params = U1Params {
            s_trunc: 14.0,
            n: 20_000,
            dt: 0.01,
            n_deriv: 20_000,
            dt_deriv: 0.005,
            beta_hat: 1.0,
        };
        let u1 = estimate_u1(&model, &abar, &obs, 1.0, &[0.0], &[y], &params, &plan).unwrap();
        let dx = estimate_dx_ubar(
            &abar,
            &model,
            &obs,
            1.0,
            &[0.0],
            &[1.0],
            20_000,
            0.005,
            &plan.for_sample(TAG_DX).for_sample(0),
        )
        .unwrap();
        let analytic = 1.0 * (y - 1.2) * dx.mean;
        let tol = 3.0 * u1.estimate.stderr + u1.tail_bound + 3.0 * (y - 1.2_f64).abs() * dx.stderr;
        assert!(
            (u1.estimate.mean - analytic).abs() <= tol,
            "u1 {} +- {} vs analytic {analytic} (tail {})",
            u1.estimate.mean,
            u1.estimate.stderr,
            u1.tail_bound
        );
        assert!(!u1.tail_warning, "tail bound {} too large", u1.tail_bound);
    }

    #[test]
    fn u1_is_stable_under_s_doubling() {
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(308, 0);
        let mk = |s: f64| U1Params {
            s_trunc: s,
            n: 8000,
            dt: 0.01,
            n_deriv: 8000,
            dt_deriv: 0.005,
            beta_hat: 1.0,
        };
        let a = estimate_u1(&model, &abar, &obs, 1.0, &[0.0], &[0.5], &mk(11.0), &plan).unwrap();
        let b = estimate_u1(&model, &abar, &obs, 1.0, &[0.0], &[0.5], &mk(22.0), &plan).unwrap();
        let spread = (a.estimate.stderr.powi(2) + b.estimate.stderr.powi(2)).sqrt();
        assert!(
            (a.estimate.mean - b.estimate.mean).abs() <= spread.max(a.estimate.stderr),
            "S = 11: {}, S = 22: {} (se {spread})",
            a.estimate.mean,
            b.estimate.mean
        );
    }

    #[test]
    fn residual_reports_hold_arithmetic_identity() {
        let model = benchmark();
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(309, 0);
        let params = ExpansionParams {
            t_end: 1.0,
            dt: None,
            u1: U1Params {
                s_trunc: 11.0,
                n: 2000,
                dt: 0.02,
                n_deriv: 2000,
                dt_deriv: 0.01,
                beta_hat: 1.0,
            },
        };
        let reports = residual_check(
            &model,
            &abar,
            &obs,
            &[0.0],
            &[0.5],
            &[0.125, 0.0625],
            2000,
            &params,
            &plan,
        )
        .unwrap();
        for r in &reports {
            let recomputed = r.u_eps.mean - r.u_bar.mean - r.epsilon * r.u1_hat.mean;
            assert_eq!(r.r_eps, recomputed);
        }
    }

    #[test]
    fn residual_check_gamma_zero_everything_vanishes() {
        let model = Arc::new(
            make_jump_ou_benchmark(JumpOuParams {
                gamma: 0.0,
                ..Default::default()
            })
            .unwrap(),
        );
        let abar = analytic_drift(&model);
        let obs = Observable::tanh_sum();
        let plan = RandomPlan::new(310, 0);
        let params = ExpansionParams {
            t_end: 1.0,
            dt: None,
            u1: U1Params {
                s_trunc: 11.0,
                n: 200,
                dt: 0.02,
                n_deriv: 200,
                dt_deriv: 0.01,
                beta_hat: 1.0,
            },
        };
        let reports = residual_check(
            &model,
            &abar,
            &obs,
            &[0.0],
            &[0.5],
            &[0.25, 0.125],
            200,
            &params,
            &plan,
        )
        .unwrap();
        for r in &reports {
            assert_eq!(r.u1_hat.mean, 0.0);
            assert_eq!(r.r_eps, 0.0);
        }
    }
}
