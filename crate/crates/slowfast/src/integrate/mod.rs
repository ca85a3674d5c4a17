//! Jump-adapted Euler-Maruyama integration of the coupled slow/fast system,
//! the frozen fast equation, the averaged equation, and the first-variation
//! process of the averaged flow.
//!
//! All integrators share the same scheme: diffusion steps between grid
//! nodes with coefficients evaluated at the left node, jumps applied
//! exactly at their scheduled times using the pre-jump (left-limit) state.
//! Jumps are exact in distribution because every jump time is a grid node.
//!
//! Integration happens on a materialized [`NoiseRealization`]; running two
//! systems on one realization is what implements synchronous coupling. The
//! window variants (`*_window`) restart an integration mid-grid, which makes
//! the pathwise flow property `solve(0, T) = solve(T/2, T) . solve(0, T/2)`
//! hold node for node.

mod grid;
mod noise;

pub use grid::TimeGrid;
pub use noise::NoiseRealization;

use crate::error::{Result, SimError};
use crate::model::CoefficientModel;
use crate::randomness::RandomPlan;
use crate::stats::{norm, norm_sq};

/// Default bound on dt relative to epsilon: the fast relaxation time is
/// O(epsilon), so the step must stay a fraction of it.
pub const DT_FAST_FACTOR: f64 = 0.1;

/// States with norm beyond this are treated as blow-up rather than being
/// propagated as inf/NaN.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Timescale ratio, horizon, and base step of one integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub epsilon: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl ScaleParams {
    /// Validates `0 < epsilon <= 1`, `t_end > 0`, and
    /// `0 < dt <= DT_FAST_FACTOR * epsilon`.
    pub fn new(epsilon: f64, t_end: f64, dt: f64) -> Result<Self> {
        Self::with_fast_factor(epsilon, t_end, dt, DT_FAST_FACTOR)
    }

    pub fn with_fast_factor(epsilon: f64, t_end: f64, dt: f64, factor: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(SimError::InvalidInput(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        if !(t_end > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "t_end must be > 0, got {t_end}"
            )));
        }
        if !(dt > 0.0 && dt <= factor * epsilon + 1e-15) {
            return Err(SimError::InvalidInput(format!(
                "dt must lie in (0, {factor} * epsilon]; got dt = {dt} at epsilon = {epsilon}"
            )));
        }
        Ok(ScaleParams { epsilon, t_end, dt })
    }
}

/// Drift source for the averaged equation. Implemented by the closed-form
/// and Monte Carlo averaged drifts in the ergodic module, and by plain
/// closures through [`DriftFn`] for tests and synthetic flows.
pub trait Drift: Send + Sync {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Step used for finite-difference directional derivatives of this
    /// drift (estimated drifts need a coarser step than analytic ones).
    fn fd_step(&self) -> f64 {
        1e-5
    }
}

/// Closure adapter for [`Drift`].
pub struct DriftFn<F>(pub F);

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> Drift for DriftFn<F> {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        (self.0)(x, out);
        Ok(())
    }
}

/// Recorded trajectory, one row per grid node.
#[derive(Debug, Clone, Default)]
pub struct PathDump {
    pub t: Vec<f64>,
    /// Node-major slow states, `t.len() * n` entries.
    pub x: Vec<f64>,
    /// Node-major fast states, `t.len() * m` entries (empty for averaged runs).
    pub y: Vec<f64>,
    pub p_jump: Vec<bool>,
    pub n_jump: Vec<bool>,
    pub n: usize,
    pub m: usize,
}

impl PathDump {
    fn push_node(&mut self, t: f64, x: &[f64], y: &[f64], pj: bool, nj: bool) {
        self.t.push(t);
        self.x.extend_from_slice(x);
        self.y.extend_from_slice(y);
        self.p_jump.push(pj);
        self.n_jump.push(nj);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.m..(k + 1) * self.m]
    }
}

/// Terminal states of a coupled integration.
#[derive(Debug, Clone)]
pub struct CoupledOutcome {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub path: Option<PathDump>,
}

/// Terminal state of an averaged integration.
#[derive(Debug, Clone)]
pub struct AveragedOutcome {
    pub x: Vec<f64>,
    pub path: Option<PathDump>,
}

/// Coupled and averaged terminal states driven by one noise realization
/// (shared grid, shared slow Brownian increments and slow jumps).
#[derive(Debug, Clone)]
pub struct PairOutcome {
    pub x_eps: Vec<f64>,
    pub y_eps: Vec<f64>,
    pub x_bar: Vec<f64>,
}

/// Frozen fast path sampled at every node of its jump-adapted grid.
#[derive(Debug, Clone, Default)]
pub struct FrozenPath {
    pub times: Vec<f64>,
    /// Node-major states, `times.len() * m` entries.
    pub states: Vec<f64>,
    pub m: usize,
    pub n_jump: Vec<bool>,
}

impl FrozenPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.m..(k + 1) * self.m]
    }
}

/// Averaged state and first-variation process at the horizon.
#[derive(Debug, Clone)]
pub struct VariationOutcome {
    pub x_bar: Vec<f64>,
    pub eta: Vec<f64>,
}

#[inline]
fn check_state(v: &[f64], t: f64) -> Result<()> {
    let s = norm_sq(v);
    if !s.is_finite() || s > BLOWUP_THRESHOLD * BLOWUP_THRESHOLD {
        return Err(SimError::BlowUp {
            time: t,
            sample: None,
        });
    }
    Ok(())
}

/// Reusable per-worker coefficient buffers.
#[derive(Debug, Clone, Default)]
pub(crate) struct KernelScratch {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    // finite-difference workspace for the variation kernel
    xp: Vec<f64>,
    vp: Vec<f64>,
    vm: Vec<f64>,
    da: Vec<f64>,
    db_eta: Vec<f64>,
    dc: Vec<f64>,
}

impl KernelScratch {
    pub(crate) fn for_model(model: &CoefficientModel) -> Self {
        let d = model.dims();
        KernelScratch {
            a: vec![0.0; d.n],
            b: vec![0.0; d.n * d.d1],
            c: vec![0.0; d.n],
            f: vec![0.0; d.m],
            g: vec![0.0; d.m * d.d2],
            h: vec![0.0; d.m],
            xp: vec![0.0; d.n],
            vp: vec![0.0; d.n * d.d1],
            vm: vec![0.0; d.n * d.d1],
            da: vec![0.0; d.n],
            db_eta: vec![0.0; d.n * d.d1],
            dc: vec![0.0; d.n],
        }
    }
}

/// Advance the coupled system over grid nodes `first..=last` of `noise`,
/// mutating `x`, `y` in place. Records every visited node when `record` is
/// given (including node `first`).
pub(crate) fn coupled_window_kernel(
    model: &CoefficientModel,
    scale: &ScaleParams,
    noise: &NoiseRealization,
    first: usize,
    last: usize,
    x: &mut [f64],
    y: &mut [f64],
    scratch: &mut KernelScratch,
    mut record: Option<&mut PathDump>,
) -> Result<()> {
    let d = model.dims();
    let grid = &noise.grid;
    let inv_eps = 1.0 / scale.epsilon;
    let inv_sqrt_eps = inv_eps.sqrt();

    if let Some(rec) = record.as_deref_mut() {
        rec.push_node(grid.node(first), x, y, grid.p_jump_at(first), grid.n_jump_at(first));
    }

    for k in first..last {
        let t1 = grid.node(k + 1);
        let h = t1 - grid.node(k);

        model.eval_a(x, y, &mut scratch.a);
        model.eval_b(x, &mut scratch.b);
        model.eval_f(x, y, &mut scratch.f);
        model.eval_g(x, y, &mut scratch.g);
        let db = noise.db_at(k);
        let dw = noise.dw_at(k);

        for i in 0..d.n {
            let mut v = x[i] + scratch.a[i] * h;
            for j in 0..d.d1 {
                v += scratch.b[i * d.d1 + j] * db[j];
            }
            x[i] = v;
        }
        for i in 0..d.m {
            let mut v = y[i] + scratch.f[i] * h * inv_eps;
            for j in 0..d.d2 {
                v += scratch.g[i * d.d2 + j] * dw[j] * inv_sqrt_eps;
            }
            y[i] = v;
        }

        // jumps at t1, coefficients at the pre-jump (left-limit) state
        let pj = grid.p_jump_at(k + 1);
        let nj = grid.n_jump_at(k + 1);
        if pj || nj {
            if pj {
                model.eval_c(x, &mut scratch.c);
            }
            if nj {
                model.eval_h(x, y, &mut scratch.h);
            }
            if pj {
                for i in 0..d.n {
                    x[i] += scratch.c[i];
                }
            }
            if nj {
                for i in 0..d.m {
                    y[i] += scratch.h[i];
                }
            }
        }

        check_state(x, t1)?;
        check_state(y, t1)?;
        if let Some(rec) = record.as_deref_mut() {
            rec.push_node(t1, x, y, pj, nj);
        }
    }
    Ok(())
}

/// Advance the averaged equation over grid nodes `first..=last` of `noise`,
/// sharing the slow Brownian increments and slow jump markers. Fast jump
/// nodes are plain diffusion nodes here.
pub(crate) fn averaged_window_kernel(
    abar: &dyn Drift,
    model: &CoefficientModel,
    noise: &NoiseRealization,
    first: usize,
    last: usize,
    xb: &mut [f64],
    scratch: &mut KernelScratch,
    mut record: Option<&mut PathDump>,
) -> Result<()> {
    let d = model.dims();
    let grid = &noise.grid;

    if let Some(rec) = record.as_deref_mut() {
        rec.push_node(grid.node(first), xb, &[], grid.p_jump_at(first), false);
    }

    for k in first..last {
        let t1 = grid.node(k + 1);
        let h = t1 - grid.node(k);

        abar.eval(xb, &mut scratch.a)?;
        model.eval_b(xb, &mut scratch.b);
        let db = noise.db_at(k);

        for i in 0..d.n {
            let mut v = xb[i] + scratch.a[i] * h;
            for j in 0..d.d1 {
                v += scratch.b[i * d.d1 + j] * db[j];
            }
            xb[i] = v;
        }

        let pj = grid.p_jump_at(k + 1);
        if pj {
            model.eval_c(xb, &mut scratch.c);
            for i in 0..d.n {
                xb[i] += scratch.c[i];
            }
        }

        check_state(xb, t1)?;
        if let Some(rec) = record.as_deref_mut() {
            rec.push_node(t1, xb, &[], pj, false);
        }
    }
    Ok(())
}

/// Advance the frozen fast equation (timescale one, jump intensity
/// `lambda2`) over its grid, calling `on_node` at every node including the
/// initial one.
pub(crate) fn frozen_kernel(
    model: &CoefficientModel,
    x_frozen: &[f64],
    noise: &NoiseRealization,
    y: &mut [f64],
    scratch: &mut KernelScratch,
    mut on_node: impl FnMut(usize, f64, &[f64]),
) -> Result<()> {
    let d = model.dims();
    let grid = &noise.grid;
    on_node(0, grid.node(0), y);

    for k in 0..grid.steps() {
        let t1 = grid.node(k + 1);
        let h = t1 - grid.node(k);

        model.eval_f(x_frozen, y, &mut scratch.f);
        model.eval_g(x_frozen, y, &mut scratch.g);
        let dw = noise.dw_at(k);

        for i in 0..d.m {
            let mut v = y[i] + scratch.f[i] * h;
            for j in 0..d.d2 {
                v += scratch.g[i * d.d2 + j] * dw[j];
            }
            y[i] = v;
        }

        if grid.n_jump_at(k + 1) {
            model.eval_h(x_frozen, y, &mut scratch.h);
            for i in 0..d.m {
                y[i] += scratch.h[i];
            }
        }

        check_state(y, t1)?;
        on_node(k + 1, t1, y);
    }
    Ok(())
}

/// Directional finite difference of a slow-state coefficient:
/// `out = (coef(x + delta dir) - coef(x - delta dir)) / (2 delta)`, with the
/// perturbation scaled to `step * max(1, |x|)` along `dir`.
fn directional_fd(
    eval: &mut dyn FnMut(&[f64], &mut [f64]) -> Result<()>,
    x: &[f64],
    dir: &[f64],
    step: f64,
    xp: &mut [f64],
    vp: &mut [f64],
    vm: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    let dir_norm = norm(dir);
    if dir_norm == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    let delta = step * norm(x).max(1.0) / dir_norm;
    for i in 0..x.len() {
        xp[i] = x[i] + delta * dir[i];
    }
    eval(xp, vp)?;
    for i in 0..x.len() {
        xp[i] = x[i] - delta * dir[i];
    }
    eval(xp, vm)?;
    let scale = 1.0 / (2.0 * delta);
    for i in 0..out.len() {
        out[i] = (vp[i] - vm[i]) * scale;
    }
    Ok(())
}

/// Jointly advance the averaged state and its first variation along the
/// direction carried in `eta`. Coefficient derivatives are central finite
/// differences of `abar`, `b`, and `c` along `eta`.
pub(crate) fn variation_kernel(
    abar: &dyn Drift,
    model: &CoefficientModel,
    noise: &NoiseRealization,
    xb: &mut [f64],
    eta: &mut [f64],
    scratch: &mut KernelScratch,
) -> Result<()> {
    let d = model.dims();
    let grid = &noise.grid;
    let step_abar = abar.fd_step();
    let step_coef = 1e-5;

    for k in 0..grid.steps() {
        let t1 = grid.node(k + 1);
        let h = t1 - grid.node(k);
        let db = noise.db_at(k);

        abar.eval(xb, &mut scratch.a)?;
        model.eval_b(xb, &mut scratch.b);
        directional_fd(
            &mut |x, out| abar.eval(x, out),
            xb,
            eta,
            step_abar,
            &mut scratch.xp,
            &mut scratch.vp[..d.n],
            &mut scratch.vm[..d.n],
            &mut scratch.da,
        )?;
        directional_fd(
            &mut |x, out| {
                model.eval_b(x, out);
                Ok(())
            },
            xb,
            eta,
            step_coef,
            &mut scratch.xp,
            &mut scratch.vp,
            &mut scratch.vm,
            &mut scratch.db_eta,
        )?;

        for i in 0..d.n {
            let mut ev = eta[i] + scratch.da[i] * h;
            let mut xv = xb[i] + scratch.a[i] * h;
            for j in 0..d.d1 {
                ev += scratch.db_eta[i * d.d1 + j] * db[j];
                xv += scratch.b[i * d.d1 + j] * db[j];
            }
            eta[i] = ev;
            xb[i] = xv;
        }

        if grid.p_jump_at(k + 1) {
            model.eval_c(xb, &mut scratch.c);
            directional_fd(
                &mut |x, out| {
                    model.eval_c(x, out);
                    Ok(())
                },
                xb,
                eta,
                step_coef,
                &mut scratch.xp,
                &mut scratch.vp[..d.n],
                &mut scratch.vm[..d.n],
                &mut scratch.dc,
            )?;
            for i in 0..d.n {
                xb[i] += scratch.c[i];
                eta[i] += scratch.dc[i];
            }
        }

        check_state(xb, t1)?;
        check_state(eta, t1)?;
    }
    Ok(())
}

fn check_dims(model: &CoefficientModel, x0: &[f64], y0: Option<&[f64]>) -> Result<()> {
    let d = model.dims();
    if x0.len() != d.n {
        return Err(SimError::InvalidInput(format!(
            "slow state has length {}, model expects {}",
            x0.len(),
            d.n
        )));
    }
    if let Some(y0) = y0 {
        if y0.len() != d.m {
            return Err(SimError::InvalidInput(format!(
                "fast state has length {}, model expects {}",
                y0.len(),
                d.m
            )));
        }
    }
    Ok(())
}

/// Integrate the coupled system on `[0, t_end]` with noise drawn from
/// `plan`. The fast jump schedule uses intensity `lambda2 / epsilon`.
pub fn simulate_coupled(
    model: &CoefficientModel,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    plan: &RandomPlan,
) -> Result<CoupledOutcome> {
    let noise = NoiseRealization::sample_coupled(model, scale, plan)?;
    simulate_coupled_on(model, scale, x0, y0, &noise)
}

/// As [`simulate_coupled`], recording the full path.
pub fn simulate_coupled_recorded(
    model: &CoefficientModel,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    plan: &RandomPlan,
) -> Result<CoupledOutcome> {
    check_dims(model, x0, Some(y0))?;
    let noise = NoiseRealization::sample_coupled(model, scale, plan)?;
    let d = model.dims();
    let mut path = PathDump {
        n: d.n,
        m: d.m,
        ..Default::default()
    };
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    coupled_window_kernel(
        model,
        scale,
        &noise,
        0,
        noise.grid.steps(),
        &mut x,
        &mut y,
        &mut scratch,
        Some(&mut path),
    )?;
    Ok(CoupledOutcome {
        x,
        y,
        path: Some(path),
    })
}

/// Integrate the coupled system on an existing noise realization.
pub fn simulate_coupled_on(
    model: &CoefficientModel,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    noise: &NoiseRealization,
) -> Result<CoupledOutcome> {
    check_dims(model, x0, Some(y0))?;
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    coupled_window_kernel(
        model,
        scale,
        noise,
        0,
        noise.grid.steps(),
        &mut x,
        &mut y,
        &mut scratch,
        None,
    )?;
    Ok(CoupledOutcome { x, y, path: None })
}

/// Restart variant: integrate from node `first` (where `x0`, `y0` are the
/// states) up to node `last` of the realization's grid.
pub fn simulate_coupled_window(
    model: &CoefficientModel,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    noise: &NoiseRealization,
    first: usize,
    last: usize,
) -> Result<CoupledOutcome> {
    check_dims(model, x0, Some(y0))?;
    if first > last || last > noise.grid.steps() {
        return Err(SimError::InvalidInput(format!(
            "node window {first}..{last} out of range (grid has {} steps)",
            noise.grid.steps()
        )));
    }
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    coupled_window_kernel(
        model, scale, noise, first, last, &mut x, &mut y, &mut scratch, None,
    )?;
    Ok(CoupledOutcome { x, y, path: None })
}

/// Path of the frozen fast equation `dY = f(x, Y) dt + g(x, Y) dW + h dN`
/// (intensity `lambda2`) on its jump-adapted grid.
pub fn simulate_frozen(
    model: &CoefficientModel,
    x: &[f64],
    y0: &[f64],
    horizon: f64,
    dt: f64,
    plan: &RandomPlan,
) -> Result<FrozenPath> {
    check_dims(model, x, Some(y0))?;
    let noise = NoiseRealization::sample_frozen(model, horizon, dt, plan)?;
    let mut path = FrozenPath {
        m: model.dims().m,
        ..Default::default()
    };
    let mut y = y0.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    let grid_njump: Vec<bool> = (0..noise.grid.nodes().len())
        .map(|k| noise.grid.n_jump_at(k))
        .collect();
    frozen_kernel(model, x, &noise, &mut y, &mut scratch, |_, t, state| {
        path.times.push(t);
        path.states.extend_from_slice(state);
    })?;
    path.n_jump = grid_njump;
    Ok(path)
}

/// Integrate the averaged equation on `[0, t_end]` with its own slow-only
/// realization (uniform grid plus `P` jumps).
pub fn simulate_averaged(
    abar: &dyn Drift,
    model: &CoefficientModel,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    plan: &RandomPlan,
) -> Result<AveragedOutcome> {
    check_dims(model, x0, None)?;
    let noise = NoiseRealization::sample_slow(model, t_end, dt, plan)?;
    simulate_averaged_on(abar, model, x0, &noise)
}

/// Integrate the averaged equation on an existing realization. When the
/// realization came from [`NoiseRealization::sample_coupled`] this shares
/// the slow substreams with the coupled path: with a drift independent of
/// the fast variable the two slow recursions are identical node by node.
pub fn simulate_averaged_on(
    abar: &dyn Drift,
    model: &CoefficientModel,
    x0: &[f64],
    noise: &NoiseRealization,
) -> Result<AveragedOutcome> {
    check_dims(model, x0, None)?;
    let mut xb = x0.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    averaged_window_kernel(
        abar,
        model,
        noise,
        0,
        noise.grid.steps(),
        &mut xb,
        &mut scratch,
        None,
    )?;
    Ok(AveragedOutcome { x: xb, path: None })
}

/// Coupled and averaged paths on one realization: the synchronous-coupling
/// primitive behind the weak- and strong-error estimators.
pub fn simulate_pair(
    model: &CoefficientModel,
    abar: &dyn Drift,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    plan: &RandomPlan,
) -> Result<PairOutcome> {
    let noise = NoiseRealization::sample_coupled(model, scale, plan)?;
    simulate_pair_on(model, abar, scale, x0, y0, &noise)
}

pub fn simulate_pair_on(
    model: &CoefficientModel,
    abar: &dyn Drift,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    noise: &NoiseRealization,
) -> Result<PairOutcome> {
    check_dims(model, x0, Some(y0))?;
    let mut scratch = KernelScratch::for_model(model);
    pair_on_with(model, abar, scale, x0, y0, noise, &mut scratch)
}

pub(crate) fn pair_on_with(
    model: &CoefficientModel,
    abar: &dyn Drift,
    scale: &ScaleParams,
    x0: &[f64],
    y0: &[f64],
    noise: &NoiseRealization,
    scratch: &mut KernelScratch,
) -> Result<PairOutcome> {
    let steps = noise.grid.steps();
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    coupled_window_kernel(model, scale, noise, 0, steps, &mut x, &mut y, scratch, None)?;
    let mut xb = x0.to_vec();
    averaged_window_kernel(abar, model, noise, 0, steps, &mut xb, scratch, None)?;
    Ok(PairOutcome {
        x_eps: x,
        y_eps: y,
        x_bar: xb,
    })
}

/// Jointly integrate the averaged state and its first-variation process
/// `eta` (pathwise derivative of the averaged flow with respect to the
/// initial condition) along `direction`.
pub fn simulate_first_variation(
    abar: &dyn Drift,
    model: &CoefficientModel,
    x0: &[f64],
    direction: &[f64],
    t_end: f64,
    dt: f64,
    plan: &RandomPlan,
) -> Result<VariationOutcome> {
    check_dims(model, x0, None)?;
    if direction.len() != x0.len() {
        return Err(SimError::InvalidInput(
            "variation direction has wrong dimension".into(),
        ));
    }
    if norm(direction) == 0.0 {
        return Err(SimError::InvalidInput(
            "variation direction must be nonzero".into(),
        ));
    }
    let noise = NoiseRealization::sample_slow(model, t_end, dt, plan)?;
    let mut xb = x0.to_vec();
    let mut eta = direction.to_vec();
    let mut scratch = KernelScratch::for_model(model);
    variation_kernel(abar, model, &noise, &mut xb, &mut eta, &mut scratch)?;
    Ok(VariationOutcome { x_bar: xb, eta })
}
