//! Ergodic estimation for the frozen fast process: the averaged drift
//! `abar(x) = int a(x, y) mu^x(dy)`, the stationary second moment, and the
//! exponential mixing rate under synchronous coupling.
//!
//! Two estimator families are available. `TimeAverage` integrates
//! `a(x, Y_s)` along frozen paths and averages over `[burn_in, horizon]`
//! (time averages equal space averages by ergodicity); with several paths
//! the standard error comes from the replica spread, with a single path
//! from 32 non-overlapping batch means. `Ensemble` averages the endpoint
//! value `a(x, Y_horizon)` over independent paths.

use std::sync::Arc;

use dashmap::DashMap;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::integrate::{frozen_kernel, Drift, KernelScratch, NoiseRealization};
use crate::model::CoefficientModel;
use crate::randomness::RandomPlan;
use crate::stats::{mean_stderr, norm_sq, weighted_line};
use crate::weakerror::McEstimate;

/// Monte Carlo parameters for frozen-path estimators.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErgodicParams {
    pub burn_in: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub dt: f64,
}

impl ErgodicParams {
    /// Defaults scaled to a measured dissipativity constant: burn-in
    /// `10 / beta` leaves residual bias `exp(-beta burn_in / 2) ~ 7e-3`
    /// relative, horizon `100 / beta` gives a long averaging window.
    pub fn from_beta(beta_hat: f64) -> Self {
        let beta = beta_hat.max(1e-6);
        ErgodicParams {
            burn_in: 10.0 / beta,
            horizon: 100.0 / beta,
            n_paths: 64,
            dt: 0.01 / beta.max(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.burn_in > 0.0 && self.horizon > self.burn_in) {
            return Err(SimError::InvalidInput(format!(
                "need horizon > burn_in > 0, got burn_in = {}, horizon = {}",
                self.burn_in, self.horizon
            )));
        }
        if !(self.dt > 0.0) || self.n_paths == 0 {
            return Err(SimError::InvalidInput(
                "ergodic estimator needs dt > 0 and n_paths >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// How to turn frozen paths into an invariant-measure average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AbarMethod {
    TimeAverage,
    Ensemble,
}

/// Vector-valued Monte Carlo estimate with per-coordinate standard errors.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VectorEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: u64,
}

const BATCH_COUNT: usize = 32;

/// Estimate the averaged drift at `x` from frozen paths started at the
/// origin of the fast space.
pub fn estimate_abar(
    model: &CoefficientModel,
    x: &[f64],
    method: AbarMethod,
    params: &ErgodicParams,
    plan: &RandomPlan,
) -> Result<VectorEstimate> {
    params.validate()?;
    let n_dim = model.dims().n;
    observable_average(model, x, method, params, plan, n_dim, |model, x, y, out| {
        model.eval_a(x, y, out)
    })
}

/// Estimate the stationary second moment `int |y|^2 mu^x(dy)`.
///
/// Uses the same time-average machinery as [`estimate_abar`]; the spread
/// across `params.n_paths` replicas gives the standard error.
pub fn estimate_invariant_moment(
    model: &CoefficientModel,
    x: &[f64],
    params: &ErgodicParams,
    plan: &RandomPlan,
) -> Result<McEstimate> {
    params.validate()?;
    let est = observable_average(
        model,
        x,
        AbarMethod::TimeAverage,
        params,
        plan,
        1,
        |_, _, y, out| out[0] = norm_sq(y),
    )?;
    Ok(McEstimate {
        mean: est.value[0],
        stderr: est.stderr[0],
        n: est.n,
    })
}

/// Shared frozen-path averaging for a vector observable of `(x, y)`.
fn observable_average(
    model: &CoefficientModel,
    x: &[f64],
    method: AbarMethod,
    params: &ErgodicParams,
    plan: &RandomPlan,
    out_dim: usize,
    observe: impl Fn(&CoefficientModel, &[f64], &[f64], &mut [f64]) + Sync,
) -> Result<VectorEstimate> {
    let m = model.dims().m;
    let y0 = vec![0.0; m];

    if method == AbarMethod::TimeAverage && params.n_paths == 1 {
        return batch_mean_average(model, x, params, plan, out_dim, &observe);
    }

    let per_path: Vec<Vec<f64>> = (0..params.n_paths as u64)
        .into_par_iter()
        .map_init(
            || (NoiseRealization::new(), KernelScratch::for_model(model)),
            |(noise, scratch), i| -> Result<Vec<f64>> {
                let sample_plan = plan.for_sample(i);
                noise.resample_frozen(model, params.horizon, params.dt, &sample_plan)?;
                let mut y = y0.clone();
                let mut value = vec![0.0; out_dim];
                match method {
                    AbarMethod::Ensemble => {
                        frozen_kernel(model, x, noise, &mut y, scratch, |_, _, _| {})
                            .map_err(|e| e.with_sample(i))?;
                        observe(model, x, &y, &mut value);
                    }
                    AbarMethod::TimeAverage => {
                        let mut acc = vec![0.0; out_dim];
                        let mut duration = 0.0;
                        let mut prev_t = 0.0;
                        let mut prev_val = vec![0.0; out_dim];
                        let mut first = true;
                        frozen_kernel(model, x, noise, &mut y, scratch, |_, t, state| {
                            if !first && prev_t >= params.burn_in {
                                let h = t - prev_t;
                                for (a, v) in acc.iter_mut().zip(&prev_val) {
                                    *a += h * v;
                                }
                                duration += h;
                            }
                            observe(model, x, state, &mut prev_val);
                            prev_t = t;
                            first = false;
                        })
                        .map_err(|e| e.with_sample(i))?;
                        for (v, a) in value.iter_mut().zip(&acc) {
                            *v = a / duration;
                        }
                    }
                }
                Ok(value)
            },
        )
        .collect::<Result<Vec<_>>>()?;

    let mut value = vec![0.0; out_dim];
    let mut stderr = vec![0.0; out_dim];
    let mut coord = vec![0.0; per_path.len()];
    for j in 0..out_dim {
        for (i, v) in per_path.iter().enumerate() {
            coord[i] = v[j];
        }
        let (m, se) = mean_stderr(&coord);
        value[j] = m;
        stderr[j] = se;
    }
    Ok(VectorEstimate {
        value,
        stderr,
        n: per_path.len() as u64,
    })
}

/// Single long path; standard error from non-overlapping batch means.
fn batch_mean_average(
    model: &CoefficientModel,
    x: &[f64],
    params: &ErgodicParams,
    plan: &RandomPlan,
    out_dim: usize,
    observe: &(impl Fn(&CoefficientModel, &[f64], &[f64], &mut [f64]) + Sync),
) -> Result<VectorEstimate> {
    let m = model.dims().m;
    let mut noise = NoiseRealization::new();
    noise.resample_frozen(model, params.horizon, params.dt, plan)?;
    let mut scratch = KernelScratch::for_model(model);
    let mut y = vec![0.0; m];

    let window = params.horizon - params.burn_in;
    let mut acc = vec![vec![0.0; out_dim]; BATCH_COUNT];
    let mut dur = vec![0.0; BATCH_COUNT];
    let mut prev_t = 0.0;
    let mut prev_val = vec![0.0; out_dim];
    let mut first = true;
    frozen_kernel(model, x, &noise, &mut y, &mut scratch, |_, t, state| {
        if !first && prev_t >= params.burn_in {
            let b = (((prev_t - params.burn_in) / window) * BATCH_COUNT as f64)
                .floor()
                .min(BATCH_COUNT as f64 - 1.0) as usize;
            let h = t - prev_t;
            for (a, v) in acc[b].iter_mut().zip(&prev_val) {
                *a += h * v;
            }
            dur[b] += h;
        }
        observe(model, x, state, &mut prev_val);
        prev_t = t;
        first = false;
    })?;

    let total_dur: f64 = dur.iter().sum();
    let mut value = vec![0.0; out_dim];
    let mut stderr = vec![0.0; out_dim];
    let mut batch_means = vec![0.0; BATCH_COUNT];
    for j in 0..out_dim {
        let total: f64 = acc.iter().map(|a| a[j]).sum();
        value[j] = total / total_dur;
        for b in 0..BATCH_COUNT {
            batch_means[b] = if dur[b] > 0.0 { acc[b][j] / dur[b] } else { 0.0 };
        }
        let (_, se) = mean_stderr(&batch_means);
        stderr[j] = se;
    }
    Ok(VectorEstimate {
        value,
        stderr,
        n: 1,
    })
}

/// One point of the mixing curve: ensemble mean of the squared distance
/// between two synchronously coupled frozen paths.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MixingPoint {
    pub t: f64,
    pub mean_sq_dist: f64,
    pub stderr: f64,
}

/// Fitted exponential decay of `E |Y^x_t(y1) - Y^x_t(y2)|^2`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MixingEstimate {
    /// Fitted exponent of the squared distance (negative under dissipativity).
    pub beta_hat_sq: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub curve: Vec<MixingPoint>,
}

/// Couple two frozen paths through identical `W` and `N` realizations and
/// fit the decay exponent of the mean squared distance by log-linear
/// regression over the decay window.
pub fn estimate_mixing_rate(
    model: &CoefficientModel,
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    horizon: f64,
    n_paths: usize,
    dt: f64,
    plan: &RandomPlan,
) -> Result<MixingEstimate> {
    if y1 == y2 {
        return Err(SimError::InvalidInput(
            "mixing probe needs distinct initial fast states".into(),
        ));
    }
    if n_paths == 0 || !(horizon > 0.0) || !(dt > 0.0) {
        return Err(SimError::InvalidInput(
            "mixing probe needs n_paths >= 1, horizon > 0, dt > 0".into(),
        ));
    }

    // curve sampled on the uniform lattice, roughly 64 points
    let uniform_count = (horizon / dt).ceil() as usize + 1;
    let stride = (uniform_count / 64).max(1);

    let per_path: Vec<Vec<(f64, f64)>> = (0..n_paths as u64)
        .into_par_iter()
        .map_init(
            || (NoiseRealization::new(), KernelScratch::for_model(model)),
            |(noise, scratch), i| -> Result<Vec<(f64, f64)>> {
                let sample_plan = plan.for_sample(i);
                noise.resample_frozen(model, horizon, dt, &sample_plan)?;
                let m = model.dims().m;

                let mut first_path: Vec<f64> = Vec::new();
                let mut ya = y1.to_vec();
                frozen_kernel(model, x, noise, &mut ya, scratch, |_, _, state| {
                    first_path.extend_from_slice(state);
                })
                .map_err(|e| e.with_sample(i))?;

                let mut curve = Vec::new();
                let mut uniform_seen = 0usize;
                let mut yb = y2.to_vec();
                let grid = &noise.grid;
                frozen_kernel(model, x, noise, &mut yb, scratch, |k, t, state| {
                    if grid.is_uniform_node(k) {
                        if uniform_seen % stride == 0 {
                            let other = &first_path[k * m..(k + 1) * m];
                            let d: f64 = state
                                .iter()
                                .zip(other)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum();
                            curve.push((t, d));
                        }
                        uniform_seen += 1;
                    }
                })
                .map_err(|e| e.with_sample(i))?;
                Ok(curve)
            },
        )
        .collect::<Result<Vec<_>>>()?;

    // ensemble mean per curve point (uniform nodes are shared by all paths)
    let n_points = per_path.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut curve = Vec::with_capacity(n_points);
    let mut samples = vec![0.0; per_path.len()];
    for j in 0..n_points {
        let t = per_path[0][j].0;
        for (i, c) in per_path.iter().enumerate() {
            samples[i] = c[j].1;
        }
        let (mean, se) = mean_stderr(&samples);
        curve.push(MixingPoint {
            t,
            mean_sq_dist: mean,
            stderr: se,
        });
    }

    // decay window: positive means down to a relative floor of the start
    let initial = curve.first().map(|p| p.mean_sq_dist).unwrap_or(0.0);
    let floor = initial * 1e-12;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for p in &curve {
        if p.mean_sq_dist > floor && p.mean_sq_dist > 0.0 {
            ts.push(p.t);
            logs.push(p.mean_sq_dist.ln());
        }
    }
    if ts.len() < 2 {
        return Err(SimError::InvalidInput(
            "mixing curve has too few positive points to fit".into(),
        ));
    }
    let ws = vec![1.0; ts.len()];
    let fit = weighted_line(&ts, &logs, &ws);
    Ok(MixingEstimate {
        beta_hat_sq: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        curve,
    })
}

const ABAR_CELL_SALT: u64 = 0x6162_6172_2D63_656C; // distinct stream namespace

/// Averaged drift usable inside the averaged-equation integrator: either
/// the model's closed form or a memoized Monte Carlo estimate.
///
/// The estimated variant quantizes queries to cells of width `quantum`,
/// estimates once per cell at the cell center with a substream derived only
/// from the cell key, and caches the result. The noise in the estimate is
/// therefore frozen for the lifetime of the value: repeated queries in a
/// cell return the identical record and whole runs stay reproducible.
pub struct AveragedDrift {
    model: Arc<CoefficientModel>,
    source: Source,
}

enum Source {
    Analytic,
    Estimated {
        method: AbarMethod,
        params: ErgodicParams,
        quantum: f64,
        seed: u64,
        stream: u64,
        cache: DashMap<Vec<i64>, Arc<VectorEstimate>>,
    },
}

impl AveragedDrift {
    /// Use the model's closed-form averaged drift. Fails when the model
    /// does not carry one.
    pub fn analytic(model: &Arc<CoefficientModel>) -> Result<Self> {
        if model.abar_analytic().is_none() {
            return Err(SimError::InvalidModel(
                "model has no closed-form averaged drift".into(),
            ));
        }
        Ok(AveragedDrift {
            model: Arc::clone(model),
            source: Source::Analytic,
        })
    }

    /// Memoized Monte Carlo averaged drift with cell width `quantum`
    /// (default 1e-3 per coordinate via [`AveragedDrift::estimated_default`]).
    pub fn estimated(
        model: Arc<CoefficientModel>,
        method: AbarMethod,
        params: ErgodicParams,
        quantum: f64,
        plan: RandomPlan,
    ) -> Result<Self> {
        params.validate()?;
        if !(quantum > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "cache quantum must be > 0, got {quantum}"
            )));
        }
        Ok(AveragedDrift {
            model,
            source: Source::Estimated {
                method,
                params,
                quantum,
                seed: plan.seed(),
                stream: plan.stream_id(),
                cache: DashMap::new(),
            },
        })
    }

    pub fn estimated_default(model: Arc<CoefficientModel>, beta_hat: f64, plan: RandomPlan) -> Result<Self> {
        Self::estimated(
            model,
            AbarMethod::TimeAverage,
            ErgodicParams::from_beta(beta_hat),
            1e-3,
            plan,
        )
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.source, Source::Analytic)
    }

    pub fn cache_len(&self) -> usize {
        match &self.source {
            Source::Analytic => 0,
            Source::Estimated { cache, .. } => cache.len(),
        }
    }

    /// Cached estimate for the cell containing `x` (estimated source only).
    pub fn estimate_at(&self, x: &[f64]) -> Result<Arc<VectorEstimate>> {
        match &self.source {
            Source::Analytic => Err(SimError::InvalidInput(
                "analytic averaged drift has no Monte Carlo record".into(),
            )),
            Source::Estimated {
                method,
                params,
                quantum,
                seed,
                stream,
                cache,
            } => {
                let key: Vec<i64> = x.iter().map(|&v| (v / quantum).round() as i64).collect();
                if let Some(hit) = cache.get(&key) {
                    return Ok(Arc::clone(hit.value()));
                }
                let center: Vec<f64> = key.iter().map(|&k| k as f64 * quantum).collect();
                let mut h = *stream ^ ABAR_CELL_SALT;
                for &k in &key {
                    h = crate::randomness::mix_for_cell(h, k as u64);
                }
                let cell_plan = RandomPlan::new(*seed, h);
                let est = Arc::new(estimate_abar(
                    &self.model,
                    &center,
                    *method,
                    params,
                    &cell_plan,
                )?);
                // concurrent estimates of one cell compute identical values
                let entry = cache.entry(key).or_insert(est);
                Ok(Arc::clone(entry.value()))
            }
        }
    }
}

impl Drift for AveragedDrift {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.source {
            Source::Analytic => {
                out.fill(0.0);
                (self.model.abar_analytic().expect("checked at construction"))(x, out);
                Ok(())
            }
            Source::Estimated { .. } => {
                let est = self.estimate_at(x)?;
                out.copy_from_slice(&est.value);
                Ok(())
            }
        }
    }

    fn fd_step(&self) -> f64 {
        match &self.source {
            Source::Analytic => 1e-5,
            // steps must straddle several cache cells, or the finite
            // difference would see a piecewise-constant function
            Source::Estimated { quantum, .. } => (10.0 * quantum).max(1e-2),
        }
    }
}
