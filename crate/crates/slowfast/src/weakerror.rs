//! Monte Carlo estimation of `u^eps = E phi(X^eps_T)`, `ubar = E phi(Xbar_T)`,
//! the weak and strong errors between them, and log-log convergence-rate
//! fitting.
//!
//! The coupled weak-error estimator averages per-sample differences
//! `phi(X^eps_T) - phi(Xbar_T)` with both paths driven by one noise
//! realization. Expectations subtract, so the estimator is unbiased for the
//! weak error, and the shared slow noise makes the per-sample difference
//! O(sqrt(eps)) instead of O(1) — the variance reduction that makes slope
//! fitting affordable. The strong error uses the same coupling and averages
//! `|X^eps_T - Xbar_T|`.
//!
//! Sample accumulation collects per-sample values in index order and sums
//! pairwise, so estimates are bit-identical regardless of the rayon worker
//! count.

use rayon::prelude::*;

use crate::ergodic::AveragedDrift;
use crate::error::{Result, SimError};
use crate::integrate::{pair_on_with, KernelScratch, NoiseRealization, ScaleParams};
use crate::integrate::{averaged_window_kernel, coupled_window_kernel};
use crate::model::CoefficientModel;
use crate::randomness::RandomPlan;
use crate::stats::{mean_stderr, norm, weighted_line};

/// Scalar observable of the slow state. Carries an optional analytic
/// gradient; without one, directional derivatives fall back to central
/// finite differences with a scale-aware step.
pub struct Observable {
    name: String,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Option<Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>>,
    pub smoothness: Smoothness,
}

/// Smoothness tag; the weak-order theory asks for three bounded derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    CbThree,
    Unknown,
}

impl Observable {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            name: name.into(),
            f: Box::new(f),
            grad: None,
            smoothness: Smoothness::Unknown,
        }
    }

    pub fn with_grad(mut self, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Box::new(grad));
        self
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    /// Default observable `phi(x) = sum_i tanh(x_i)`: bounded with three
    /// bounded derivatives.
    pub fn tanh_sum() -> Self {
        Observable::new("tanh_sum", |x: &[f64]| x.iter().map(|v| v.tanh()).sum())
            .with_grad(|x, out| {
                for (o, v) in out.iter_mut().zip(x) {
                    let t = v.tanh();
                    *o = 1.0 - t * t;
                }
            })
            .with_smoothness(Smoothness::CbThree)
    }

    /// `phi(x) = x_i`.
    pub fn coordinate(i: usize) -> Self {
        Observable::new(format!("x{i}"), move |x: &[f64]| x[i]).with_grad(move |x, out| {
            out.fill(0.0);
            let _ = x;
            out[i] = 1.0;
        })
    }

    pub fn constant(c: f64) -> Self {
        Observable::new("constant", move |_: &[f64]| c).with_grad(|_, out| out.fill(0.0))
    }

    /// Observables addressable from config files: `tanh_sum` or `x<i>`.
    pub fn by_name(name: &str) -> Option<Self> {
        if name == "tanh_sum" {
            return Some(Self::tanh_sum());
        }
        if let Some(idx) = name.strip_prefix('x') {
            if let Ok(i) = idx.parse::<usize>() {
                return Some(Self::coordinate(i));
            }
        }
        None
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Gradient at `x`: analytic when supplied, otherwise central finite
    /// differences with step `1e-5 * max(1, |x|)`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        if let Some(g) = &self.grad {
            g(x, out);
            return;
        }
        let step = 1e-5 * norm(x).max(1.0);
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + step;
            let up = (self.f)(&xp);
            xp[i] = x[i] - step;
            let um = (self.f)(&xp);
            xp[i] = x[i];
            out[i] = (up - um) / (2.0 * step);
        }
    }
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("grad", &self.grad.is_some())
            .finish()
    }
}

/// Scalar Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let (mean, stderr) = mean_stderr(values);
        McEstimate {
            mean,
            stderr,
            n: values.len() as u64,
        }
    }
}

fn require_samples(n: usize) -> Result<()> {
    if n < 2 {
        return Err(SimError::InvalidInput(format!(
            "estimator needs n >= 2 samples, got {n}"
        )));
    }
    Ok(())
}

/// Collect per-sample values in index order; errors carry the failing
/// sample index.
fn par_sample_values(
    model: &CoefficientModel,
    n: usize,
    body: impl Fn(u64, &mut NoiseRealization, &mut KernelScratch) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    (0..n as u64)
        .into_par_iter()
        .map_init(
            || (NoiseRealization::new(), KernelScratch::for_model(model)),
            |(noise, scratch), i| body(i, noise, scratch).map_err(|e| e.with_sample(i)),
        )
        .collect()
}

/// Estimate `u^eps(T, x, y) = E phi(X^eps_T(x, y))` by forward simulation.
pub fn estimate_u_eps(
    model: &CoefficientModel,
    scale: &ScaleParams,
    x: &[f64],
    y: &[f64],
    obs: &Observable,
    n: usize,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    require_samples(n)?;
    let values = par_sample_values(model, n, |i, noise, scratch| {
        let p = plan.for_sample(i);
        noise.resample_coupled(model, scale, &p)?;
        let mut xs = x.to_vec();
        let mut ys = y.to_vec();
        coupled_window_kernel(
            model,
            scale,
            noise,
            0,
            noise.grid.steps(),
            &mut xs,
            &mut ys,
            scratch,
            None,
        )?;
        Ok(obs.eval(&xs))
    })?;
    Ok(McEstimate::from_samples(&values))
}

/// Estimate `ubar(T, x) = E phi(Xbar_T(x))` with the averaged integrator.
pub fn estimate_u_bar(
    abar: &AveragedDrift,
    model: &CoefficientModel,
    x: &[f64],
    obs: &Observable,
    t_end: f64,
    dt: f64,
    n: usize,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    require_samples(n)?;
    let values = par_sample_values(model, n, |i, noise, scratch| {
        let p = plan.for_sample(i);
        noise.resample_slow(model, t_end, dt, &p)?;
        let mut xs = x.to_vec();
        averaged_window_kernel(abar, model, noise, 0, noise.grid.steps(), &mut xs, scratch, None)?;
        Ok(obs.eval(&xs))
    })?;
    Ok(McEstimate::from_samples(&values))
}

// disjoint derivation tags for the independent two-estimator route
const TAG_UNCOUPLED_EPS: u64 = 0x7545_5053;
const TAG_UNCOUPLED_BAR: u64 = 0x7542_4152;

/// Estimate the weak error `E phi(X^eps_T) - E phi(Xbar_T)`.
///
/// With `coupled = true` the two paths share a realization and per-sample
/// differences are averaged; with `coupled = false` the terms are estimated
/// on independent substream families and subtracted.
pub fn weak_error(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    scale: &ScaleParams,
    x: &[f64],
    y: &[f64],
    obs: &Observable,
    n: usize,
    plan: &RandomPlan,
    coupled: bool,
) -> Result<McEstimate> {
    require_samples(n)?;
    if coupled {
        let values = par_sample_values(model, n, |i, noise, scratch| {
            let p = plan.for_sample(i);
            noise.resample_coupled(model, scale, &p)?;
            let pair = pair_on_with(model, abar, scale, x, y, noise, scratch)?;
            Ok(obs.eval(&pair.x_eps) - obs.eval(&pair.x_bar))
        })?;
        Ok(McEstimate::from_samples(&values))
    } else {
        let ue = estimate_u_eps(
            model,
            scale,
            x,
            y,
            obs,
            n,
            &plan.for_sample(TAG_UNCOUPLED_EPS),
        )?;
        let ub = estimate_u_bar(
            abar,
            model,
            x,
            obs,
            scale.t_end,
            scale.dt,
            n,
            &plan.for_sample(TAG_UNCOUPLED_BAR),
        )?;
        Ok(McEstimate {
            mean: ue.mean - ub.mean,
            stderr: (ue.stderr * ue.stderr + ub.stderr * ub.stderr).sqrt(),
            n: n as u64,
        })
    }
}

/// Estimate the strong error `E |X^eps_T - Xbar_T|` under synchronous
/// coupling of the slow Brownian motion and slow jumps.
pub fn strong_error(
    model: &CoefficientModel,
    abar: &AveragedDrift,
    scale: &ScaleParams,
    x: &[f64],
    y: &[f64],
    n: usize,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    require_samples(n)?;
    let values = par_sample_values(model, n, |i, noise, scratch| {
        let p = plan.for_sample(i);
        noise.resample_coupled(model, scale, &p)?;
        let pair = pair_on_with(model, abar, scale, x, y, noise, scratch)?;
        let d: f64 = pair
            .x_eps
            .iter()
            .zip(&pair.x_bar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(d.sqrt())
    })?;
    Ok(McEstimate::from_samples(&values))
}

/// Sample-count rule for rate experiments: `n(eps) = n0 * max(1, eps_ref /
/// eps)`. Under coupling the per-sample difference variance shrinks like
/// `eps`, so this keeps the relative standard error roughly constant across
/// the epsilon grid.
pub fn n_rule(n0: usize, eps_ref: f64, eps: f64) -> usize {
    ((n0 as f64) * (eps_ref / eps).max(1.0)).round() as usize
}

/// One point of a rate experiment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub error: f64,
    pub stderr: f64,
}

/// Weighted log-log fit of error against epsilon.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_ci: (f64, f64),
    /// All input points.
    pub points: Vec<RatePoint>,
    /// Points excluded as statistically indistinguishable from zero
    /// (`|error| <= 2 stderr`).
    pub excluded: Vec<RatePoint>,
}

/// Least squares of `ln |error|` against `ln eps`, weighted by the inverse
/// variance of the log-points (`stderr / |error|` by the delta method).
/// Points whose error is within two standard errors of zero would put noise
/// into the log and are excluded; fewer than three usable points is an
/// error that lists the exclusions.
pub fn fit_rate(points: &[RatePoint]) -> Result<RateFit> {
    for p in points {
        if !(p.epsilon > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "rate fit needs positive epsilon, got {}",
                p.epsilon
            )));
        }
    }
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].epsilon == points[j].epsilon {
                return Err(SimError::InvalidInput(format!(
                    "rate fit needs distinct epsilons, {} repeats",
                    points[i].epsilon
                )));
            }
        }
    }

    let mut usable = Vec::new();
    let mut excluded = Vec::new();
    for &p in points {
        if p.error.abs() > 2.0 * p.stderr && p.error != 0.0 {
            usable.push(p);
        } else {
            excluded.push(p);
        }
    }
    if usable.len() < 3 {
        return Err(SimError::InsufficientData {
            reason: format!(
                "{} usable points (need >= 3); excluded as statistically zero: {:?}",
                usable.len(),
                excluded
                    .iter()
                    .map(|p| (p.epsilon, p.error, p.stderr))
                    .collect::<Vec<_>>()
            ),
        });
    }

    let xs: Vec<f64> = usable.iter().map(|p| p.epsilon.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.error.abs().ln()).collect();
    let ws: Vec<f64> = usable
        .iter()
        .map(|p| {
            let se_log = (p.stderr / p.error.abs()).max(1e-8);
            1.0 / (se_log * se_log)
        })
        .collect();
    let fit = weighted_line(&xs, &ys, &ws);
    let sd = fit.slope_var.sqrt();
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        slope_ci: (fit.slope - 1.96 * sd, fit.slope + 1.96 * sd),
        points: points.to_vec(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_jump_ou_benchmark, CoefficientModel, Dims, JumpOuParams};
    use std::sync::Arc;

    fn benchmark() -> Arc<CoefficientModel> {
        Arc::new(make_jump_ou_benchmark(JumpOuParams::default()).unwrap())
    }

    fn benchmark_with(p: JumpOuParams) -> Arc<CoefficientModel> {
        Arc::new(make_jump_ou_benchmark(p).unwrap())
    }

    #[test]
    fn constant_observable_has_zero_stderr() {
        let model = benchmark();
        let abar = AveragedDrift::analytic(&model).unwrap();
        let scale = ScaleParams::new(0.5, 1.0, 0.05).unwrap();
        let plan = RandomPlan::new(200, 0);
        let obs = Observable::constant(1.0);
        let ue = estimate_u_eps(&model, &scale, &[0.0], &[0.5], &obs, 16, &plan).unwrap();
        assert_eq!(ue.mean, 1.0);
        assert_eq!(ue.stderr, 0.0);
        let ub = estimate_u_bar(&abar, &model, &[0.0], &obs, 1.0, 0.05, 16, &plan).unwrap();
        assert_eq!(ub.mean, 1.0);
        assert_eq!(ub.stderr, 0.0);
    }

    #[test]
    fn deterministic_linear_decay_reaches_exp_minus_one() {
        // a(x, y) = -x, all noise off: X_1 = e^{-1} on every path.
        let model = Arc::new(
            CoefficientModel::builder(Dims::scalar())
                .drift_a(|x, _, out| out[0] = -x[0])
                .drift_f(|_, y, out| out[0] = -y[0])
                .abar_analytic(|x, out| out[0] = -x[0])
                .jump_rates(0.0, 0.0)
                .build()
                .unwrap(),
        );
        let dt = 1e-3;
        let scale = ScaleParams::new(1.0, 1.0, dt).unwrap();
        let plan = RandomPlan::new(201, 0);
        let obs = Observable::coordinate(0);
        let ue = estimate_u_eps(&model, &scale, &[1.0], &[0.0], &obs, 4, &plan).unwrap();
        assert!((ue.mean - (-1.0_f64).exp()).abs() <= 5.0 * dt);
        assert!(ue.stderr < 1e-14);

        let abar = AveragedDrift::analytic(&model).unwrap();
        let ub = estimate_u_bar(&abar, &model, &[1.0], &obs, 1.0, dt, 4, &plan).unwrap();
        assert!((ub.mean - (-1.0_f64).exp()).abs() <= 5.0 * dt);
    }

    #[test]
    fn averaged_estimator_matches_ode_oracle_without_slow_noise() {
        // lambda1 = 0, sigma_b = 0: Xbar is the deterministic averaged flow.
        let model = benchmark_with(JumpOuParams {
            lambda1: 0.0,
            sigma_b: 0.0,
            c0: 0.0,
            ..Default::default()
        });
        let abar = AveragedDrift::analytic(&model).unwrap();
        let obs = Observable::coordinate(0);
        let dt = 1e-3;
        let plan = RandomPlan::new(202, 0);
        let ub = estimate_u_bar(&abar, &model, &[0.0], &obs, 1.0, dt, 4, &plan).unwrap();

        // RK4 oracle for xbar' = sin x + cos x + 0.2
        let mut xo = 0.0_f64;
        let steps = 100_000;
        let h = 1.0 / steps as f64;
        let deriv = |x: f64| x.sin() + x.cos() + 0.2;
        for _ in 0..steps {
            let k1 = deriv(xo);
            let k2 = deriv(xo + 0.5 * h * k1);
            let k3 = deriv(xo + 0.5 * h * k2);
            let k4 = deriv(xo + h * k3);
            xo += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!(
            (ub.mean - xo).abs() <= 5.0 * dt,
            "averaged {} vs oracle {xo}",
            ub.mean
        );
    }

    #[test]
    fn doubling_n_roughly_halves_stderr() {
        let model = benchmark();
        let scale = ScaleParams::new(0.25, 1.0, 0.02).unwrap();
        let plan = RandomPlan::new(203, 0);
        let obs = Observable::tanh_sum();
        let a = estimate_u_eps(&model, &scale, &[0.0], &[0.5], &obs, 4000, &plan).unwrap();
        let b = estimate_u_eps(&model, &scale, &[0.0], &[0.5], &obs, 8000, &plan).unwrap();
        let ratio = a.stderr / b.stderr;
        let target = (2.0_f64).sqrt();
        assert!(
            (ratio / target - 1.0).abs() < 0.2,
            "stderr ratio {ratio}, expected ~{target}"
        );
    }

    #[test]
    fn coupled_weak_error_is_exactly_zero_when_drift_ignores_fast() {
        let model = benchmark_with(JumpOuParams {
            gamma: 0.0,
            ..Default::default()
        });
        let abar = AveragedDrift::analytic(&model).unwrap();
        let scale = ScaleParams::new(0.125, 1.0, 0.01).unwrap();
        let plan = RandomPlan::new(204, 0);
        let obs = Observable::tanh_sum();
        let we = weak_error(&model, &abar, &scale, &[0.0], &[0.5], &obs, 64, &plan, true).unwrap();
        assert_eq!(we.mean, 0.0);
        assert_eq!(we.stderr, 0.0);
        let se = strong_error(&model, &abar, &scale, &[0.0], &[0.5], 64, &plan).unwrap();
        assert_eq!(se.mean, 0.0);
    }

    #[test]
    fn coupled_and_uncoupled_weak_errors_agree() {
        let model = benchmark();
        let abar = AveragedDrift::analytic(&model).unwrap();
        let scale = ScaleParams::new(0.1, 1.0, 0.01).unwrap();
        let plan = RandomPlan::new(205, 0);
        let obs = Observable::tanh_sum();
        let c = weak_error(
            &model,
            &abar,
            &scale,
            &[0.0],
            &[0.5],
            &obs,
            20_000,
            &plan,
            true,
        )
        .unwrap();
        let u = weak_error(
            &model,
            &abar,
            &scale,
            &[0.0],
            &[0.5],
            &obs,
            60_000,
            &plan,
            false,
        )
        .unwrap();
        let combined = (c.stderr * c.stderr + u.stderr * u.stderr).sqrt();
        assert!(
            (c.mean - u.mean).abs() <= 3.0 * combined,
            "coupled {} +- {} vs uncoupled {} +- {}",
            c.mean,
            c.stderr,
            u.mean,
            u.stderr
        );
    }

    #[test]
    fn weak_error_shrinks_when_epsilon_halves() {
        let model = benchmark();
        let abar = AveragedDrift::analytic(&model).unwrap();
        let plan = RandomPlan::new(206, 0);
        let obs = Observable::tanh_sum();
        let dt = 0.1 * 0.0625;
        let w3 = weak_error(
            &model,
            &abar,
            &ScaleParams::new(0.125, 1.0, dt).unwrap(),
            &[0.0],
            &[0.5],
            &obs,
            20_000,
            &plan,
            true,
        )
        .unwrap();
        let w4 = weak_error(
            &model,
            &abar,
            &ScaleParams::new(0.0625, 1.0, dt).unwrap(),
            &[0.0],
            &[0.5],
            &obs,
            40_000,
            &plan.for_sample(1),
            true,
        )
        .unwrap();
        let gap = w3.mean.abs() - w4.mean.abs();
        let combined = (w3.stderr * w3.stderr + w4.stderr * w4.stderr).sqrt();
        assert!(
            gap > combined,
            "|weak(2^-3)| = {} should exceed |weak(2^-4)| = {} beyond noise {combined}",
            w3.mean.abs(),
            w4.mean.abs()
        );
    }

    #[test]
    fn strong_error_scales_like_sqrt_epsilon() {
        let model = benchmark();
        let abar = AveragedDrift::analytic(&model).unwrap();
        let plan = RandomPlan::new(207, 0);
        let dt = 0.1 / 32.0;
        let s4 = strong_error(
            &model,
            &abar,
            &ScaleParams::new(0.0625, 1.0, dt).unwrap(),
            &[0.0],
            &[0.5],
            20_000,
            &plan,
        )
        .unwrap();
        let s5 = strong_error(
            &model,
            &abar,
            &ScaleParams::new(0.03125, 1.0, dt).unwrap(),
            &[0.0],
            &[0.5],
            20_000,
            &plan.for_sample(1),
        )
        .unwrap();
        let ratio = s4.mean / s5.mean;
        assert!(
            (1.1..=1.8).contains(&ratio),
            "strong error ratio {ratio}, expected near sqrt(2)"
        );
    }

    #[test]
    fn strong_error_dominates_weak_error_for_lipschitz_observable() {
        // tanh is 1-Lipschitz: |E phi(X) - phi(Xbar)| <= E |X - Xbar|.
        let model = benchmark();
        let abar = AveragedDrift::analytic(&model).unwrap();
        let scale = ScaleParams::new(0.125, 1.0, 0.01).unwrap();
        let plan = RandomPlan::new(208, 0);
        let obs = Observable::tanh_sum();
        let w = weak_error(&model, &abar, &scale, &[0.0], &[0.5], &obs, 5000, &plan, true).unwrap();
        let s = strong_error(&model, &abar, &scale, &[0.0], &[0.5], 5000, &plan).unwrap();
        assert!(s.mean >= w.mean.abs());
    }

    #[test]
    fn n_rule_grows_inversely_with_epsilon() {
        assert_eq!(n_rule(1000, 0.125, 0.125), 1000);
        assert_eq!(n_rule(1000, 0.125, 0.0625), 2000);
        assert_eq!(n_rule(1000, 0.125, 0.125 / 32.0), 32_000);
        assert_eq!(n_rule(1000, 0.125, 0.5), 1000); // never below n0
    }

    #[test]
    fn fit_rate_exact_line() {
        let points: Vec<RatePoint> = (3..=8)
            .map(|k| RatePoint {
                epsilon: 2.0_f64.powi(-k),
                error: 2.0_f64.powi(-k),
                stderr: 0.0,
            })
            .collect();
        let fit = fit_rate(&points).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-9);
        assert!(fit.slope_ci.0 <= fit.slope && fit.slope <= fit.slope_ci.1);
        assert!(fit.excluded.is_empty());
    }

    #[test]
    fn fit_rate_excludes_statistical_zeros_and_reports_them() {
        let mut points: Vec<RatePoint> = (3..=8)
            .map(|k| RatePoint {
                epsilon: 2.0_f64.powi(-k),
                error: 3.0 * 2.0_f64.powi(-k),
                stderr: 1e-6,
            })
            .collect();
        points.push(RatePoint {
            epsilon: 2.0_f64.powi(-9),
            error: 1e-7,
            stderr: 1e-6,
        });
        let fit = fit_rate(&points).unwrap();
        assert_eq!(fit.excluded.len(), 1);
        assert_eq!(fit.excluded[0].epsilon, 2.0_f64.powi(-9));
        assert!((fit.slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_rate_needs_three_usable_points() {
        let points = vec![
            RatePoint {
                epsilon: 0.5,
                error: 0.5,
                stderr: 0.0,
            },
            RatePoint {
                epsilon: 0.25,
                error: 0.25,
                stderr: 0.0,
            },
        ];
        match fit_rate(&points) {
            Err(SimError::InsufficientData { .. }) => {}
            other => panic!("expected insufficient data, got {other:?}"),
        }
    }

    #[test]
    fn fit_rate_rejects_repeated_epsilon() {
        let p = RatePoint {
            epsilon: 0.5,
            error: 0.1,
            stderr: 0.0,
        };
        assert!(fit_rate(&[p, p, p]).is_err());
    }
}
