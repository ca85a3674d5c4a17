//! Coefficient models for the slow/fast system, the built-in jump-OU
//! benchmark, and sampled numeric probes for the standing assumptions
//! (boundedness/Lipschitz, uniform ellipticity of the fast diffusion, and
//! dissipativity of the fast drift).
//!
//! A [`CoefficientModel`] bundles the six coefficients
//!
//! ```text
//! slow:  a(x, y) in R^n,   b(x) in R^{n x d1},   c(x) in R^n
//! fast:  f(x, y) in R^m,   g(x, y) in R^{m x d2}, h(x, y) in R^m
//! ```
//!
//! together with the jump intensities of the slow (`lambda1`) and frozen
//! fast (`lambda2`) Poisson processes. Models are immutable after
//! construction and safe to share across worker threads; every operation
//! here is a pure function of its inputs.

use std::collections::BTreeMap;

use crate::error::{Result, SimError};

/// Problem dimensions: slow state `n`, fast state `m`, slow Brownian `d1`,
/// fast Brownian `d2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub d1: usize,
    pub d2: usize,
}

impl Dims {
    pub fn new(n: usize, m: usize, d1: usize, d2: usize) -> Self {
        Dims { n, m, d1, d2 }
    }

    /// Scalar slow and fast state, scalar noises.
    pub fn scalar() -> Self {
        Dims::new(1, 1, 1, 1)
    }
}

/// Coefficient of both states; writes its value into `out`.
pub type SlowFastFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Coefficient of the slow state only.
pub type SlowFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// The sextuple `(a, b, c, f, g, h)` plus jump intensities. Matrix-valued
/// coefficients are written row-major into the output slice (`b` fills
/// `n * d1` entries, `g` fills `m * d2`). Output buffers are zeroed before
/// each evaluation, so coefficient closures may write sparsely.
pub struct CoefficientModel {
    dims: Dims,
    a: Box<SlowFastFn>,
    b: Box<SlowFn>,
    c: Box<SlowFn>,
    f: Box<SlowFastFn>,
    g: Box<SlowFastFn>,
    h: Box<SlowFastFn>,
    lambda1: f64,
    lambda2: f64,
    abar_analytic: Option<Box<SlowFn>>,
}

impl std::fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("dims", &self.dims)
            .field("lambda1", &self.lambda1)
            .field("lambda2", &self.lambda2)
            .field("abar_analytic", &self.abar_analytic.is_some())
            .finish()
    }
}

impl CoefficientModel {
    pub fn builder(dims: Dims) -> ModelBuilder {
        ModelBuilder {
            dims,
            a: None,
            b: None,
            c: None,
            f: None,
            g: None,
            h: None,
            lambda1: 0.0,
            lambda2: 0.0,
            abar_analytic: None,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn eval_a(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.n);
        out.fill(0.0);
        (self.a)(x, y, out);
    }

    pub fn eval_b(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.n * self.dims.d1);
        out.fill(0.0);
        (self.b)(x, out);
    }

    pub fn eval_c(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.n);
        out.fill(0.0);
        (self.c)(x, out);
    }

    pub fn eval_f(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.m);
        out.fill(0.0);
        (self.f)(x, y, out);
    }

    pub fn eval_g(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.m * self.dims.d2);
        out.fill(0.0);
        (self.g)(x, y, out);
    }

    pub fn eval_h(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.m);
        out.fill(0.0);
        (self.h)(x, y, out);
    }

    /// Closed-form averaged drift, when the model carries one.
    pub fn abar_analytic(&self) -> Option<&SlowFn> {
        self.abar_analytic.as_deref()
    }
}

pub struct ModelBuilder {
    dims: Dims,
    a: Option<Box<SlowFastFn>>,
    b: Option<Box<SlowFn>>,
    c: Option<Box<SlowFn>>,
    f: Option<Box<SlowFastFn>>,
    g: Option<Box<SlowFastFn>>,
    h: Option<Box<SlowFastFn>>,
    lambda1: f64,
    lambda2: f64,
    abar_analytic: Option<Box<SlowFn>>,
}

impl ModelBuilder {
    pub fn drift_a(mut self, a: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.a = Some(Box::new(a));
        self
    }

    pub fn diffusion_b(mut self, b: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.b = Some(Box::new(b));
        self
    }

    pub fn jump_c(mut self, c: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.c = Some(Box::new(c));
        self
    }

    pub fn drift_f(mut self, f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.f = Some(Box::new(f));
        self
    }

    pub fn diffusion_g(mut self, g: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.g = Some(Box::new(g));
        self
    }

    pub fn jump_h(mut self, h: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.h = Some(Box::new(h));
        self
    }

    pub fn jump_rates(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn abar_analytic(mut self, abar: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.abar_analytic = Some(Box::new(abar));
        self
    }

    /// Finish the model; unset coefficients default to zero. Validates the
    /// intensities and smoke-evaluates every coefficient at the origin.
    pub fn build(self) -> Result<CoefficientModel> {
        if !(self.lambda1 >= 0.0) {
            return Err(SimError::InvalidModel(format!(
                "lambda1 must be >= 0, got {}",
                self.lambda1
            )));
        }
        if !(self.lambda2 >= 0.0) {
            return Err(SimError::InvalidModel(format!(
                "lambda2 must be >= 0, got {}",
                self.lambda2
            )));
        }
        let zero2: Box<SlowFastFn> = Box::new(|_, _, _| {});
        let zero1: Box<SlowFn> = Box::new(|_, _| {});
        let model = CoefficientModel {
            dims: self.dims,
            a: self.a.unwrap_or_else(|| Box::new(|_, _, _| {})),
            b: self.b.unwrap_or(zero1),
            c: self.c.unwrap_or_else(|| Box::new(|_, _| {})),
            f: self.f.unwrap_or(zero2),
            g: self.g.unwrap_or_else(|| Box::new(|_, _, _| {})),
            h: self.h.unwrap_or_else(|| Box::new(|_, _, _| {})),
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            abar_analytic: self.abar_analytic,
        };
        let d = model.dims;
        let x0 = vec![0.0; d.n];
        let y0 = vec![0.0; d.m];
        let mut buf = vec![0.0; d.n.max(d.m) * d.d1.max(d.d2).max(1)];
        model.eval_a(&x0, &y0, &mut buf[..d.n]);
        check_finite(&buf[..d.n], "a")?;
        model.eval_b(&x0, &mut buf[..d.n * d.d1]);
        check_finite(&buf[..d.n * d.d1], "b")?;
        model.eval_c(&x0, &mut buf[..d.n]);
        check_finite(&buf[..d.n], "c")?;
        model.eval_f(&x0, &y0, &mut buf[..d.m]);
        check_finite(&buf[..d.m], "f")?;
        model.eval_g(&x0, &y0, &mut buf[..d.m * d.d2]);
        check_finite(&buf[..d.m * d.d2], "g")?;
        model.eval_h(&x0, &y0, &mut buf[..d.m]);
        check_finite(&buf[..d.m], "h")?;
        Ok(model)
    }
}

fn check_finite(v: &[f64], name: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(SimError::InvalidModel(format!(
            "coefficient {name} is non-finite at the origin"
        )));
    }
    Ok(())
}

/// Parameters of the jump-OU benchmark. Defaults match the standard
/// acceptance configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct JumpOuParams {
    /// Coupling strength of the fast variable in the slow drift.
    pub gamma: f64,
    /// Fast diffusion constant (must be positive).
    pub sigma: f64,
    /// Fast jump size.
    pub kappa: f64,
    /// Frozen fast jump intensity.
    pub lambda2: f64,
    /// Slow diffusion constant.
    pub sigma_b: f64,
    /// Slow jump size.
    pub c0: f64,
    /// Slow jump intensity.
    pub lambda1: f64,
    /// Read the fast variable through tanh (keeps the slow drift bounded,
    /// at the price of losing the closed-form averaged drift).
    pub bounded_read: bool,
}

impl Default for JumpOuParams {
    fn default() -> Self {
        JumpOuParams {
            gamma: 1.0,
            sigma: 0.5,
            kappa: 0.2,
            lambda2: 1.0,
            sigma_b: 0.2,
            c0: 0.1,
            lambda1: 0.5,
            bounded_read: false,
        }
    }
}

/// Scalar benchmark: the fast variable is a jump-OU process relaxing to
/// `cos x`, the slow drift reads it linearly (or through tanh).
///
/// ```text
/// a(x, y) = sin x + gamma * y        (linear read)
///         = sin x + gamma * tanh y   (bounded read)
/// f(x, y) = -(y - cos x),  g = sigma,  h = kappa,  b = sigma_b,  c = c0
/// ```
///
/// The frozen fast process has stationary mean `cos x + lambda2 * kappa`
/// (first-moment balance `0 = -(M1 - cos x) + lambda2 * kappa`), so for the
/// linear read the averaged drift is known in closed form:
/// `abar(x) = sin x + gamma * (cos x + lambda2 * kappa)`.
pub fn make_jump_ou_benchmark(params: JumpOuParams) -> Result<CoefficientModel> {
    if !(params.sigma > 0.0) {
        return Err(SimError::InvalidModel(format!(
            "jump-OU benchmark needs sigma > 0, got {}",
            params.sigma
        )));
    }
    if !(params.lambda1 >= 0.0) || !(params.lambda2 >= 0.0) {
        return Err(SimError::InvalidModel(
            "jump-OU benchmark needs lambda1 >= 0 and lambda2 >= 0".into(),
        ));
    }
    let p = params;
    let mut builder = CoefficientModel::builder(Dims::scalar())
        .drift_a(move |x, y, out| {
            out[0] = if p.bounded_read {
                x[0].sin() + p.gamma * y[0].tanh()
            } else {
                x[0].sin() + p.gamma * y[0]
            };
        })
        .diffusion_b(move |_, out| out[0] = p.sigma_b)
        .jump_c(move |_, out| out[0] = p.c0)
        .drift_f(move |x, y, out| out[0] = -(y[0] - x[0].cos()))
        .diffusion_g(move |_, _, out| out[0] = p.sigma)
        .jump_h(move |_, _, out| out[0] = p.kappa)
        .jump_rates(p.lambda1, p.lambda2);
    if !p.bounded_read {
        builder = builder
            .abar_analytic(move |x, out| out[0] = x[0].sin() + p.gamma * (x[0].cos() + p.lambda2 * p.kappa));
    }
    builder.build()
}

/// Deterministic quasi-uniform probe points for the assumption checks.
#[derive(Debug, Clone)]
pub struct ProbeSet {
    pub x_points: Vec<Vec<f64>>,
    pub y_points: Vec<Vec<f64>>,
    pub y_pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ProbeSet {
    /// Default probe: 64 quasi-uniform x points in [-3,3]^n, 64 y points and
    /// 64 y pairs in [-3,3]^m, from a Kronecker (R_d) low-discrepancy
    /// sequence.
    pub fn default_for(dims: Dims) -> Self {
        Self::with_count(dims, 64)
    }

    pub fn with_count(dims: Dims, count: usize) -> Self {
        let scale = |u: f64| -3.0 + 6.0 * u;
        let xs = rd_sequence(dims.n, count, 0.5);
        let ys = rd_sequence(dims.m, count, 0.25);
        let ys2 = rd_sequence(dims.m, count, 0.75);
        let x_points: Vec<Vec<f64>> = xs
            .iter()
            .map(|p| p.iter().map(|&u| scale(u)).collect())
            .collect();
        let y_points: Vec<Vec<f64>> = ys
            .iter()
            .map(|p| p.iter().map(|&u| scale(u)).collect())
            .collect();
        let y_pairs: Vec<(Vec<f64>, Vec<f64>)> = ys
            .iter()
            .zip(&ys2)
            .map(|(p, q)| {
                let y1: Vec<f64> = p.iter().map(|&u| scale(u)).collect();
                let mut y2: Vec<f64> = q.iter().map(|&u| scale(u)).collect();
                if y1 == y2 {
                    y2[0] += 1e-3;
                }
                (y1, y2)
            })
            .collect();
        ProbeSet {
            x_points,
            y_points,
            y_pairs,
        }
    }
}

/// Kronecker sequence based on the generalized golden ratio; `count` points
/// in [0,1]^d starting from offset `seed0`.
fn rd_sequence(d: usize, count: usize, seed0: f64) -> Vec<Vec<f64>> {
    // phi_d is the unique positive root of x^(d+1) = x + 1
    let mut phi = 2.0_f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (d as f64 + 1.0));
    }
    let alphas: Vec<f64> = (1..=d).map(|j| (1.0 / phi.powi(j as i32)).fract()).collect();
    (0..count)
        .map(|i| {
            alphas
                .iter()
                .map(|&a| (seed0 + a * (i as f64 + 1.0)).fract())
                .collect()
        })
        .collect()
}

/// One probe point violating an assumption.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Violation {
    pub assumption: String,
    pub x: Vec<f64>,
    pub y1: Vec<f64>,
    /// Second fast point for pairwise checks; absent for pointwise ones.
    pub y2: Option<Vec<f64>>,
    pub value: f64,
}

/// Sampled evidence for the standing assumptions. `alpha_hat` and
/// `beta_hat` are `None` when the corresponding check did not run.
/// `violations` is empty iff every probed constant came out positive.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct AssumptionReport {
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub lipschitz_probe: BTreeMap<String, f64>,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn merge(mut self, other: AssumptionReport) -> AssumptionReport {
        self.alpha_hat = other.alpha_hat.or(self.alpha_hat);
        self.beta_hat = other.beta_hat.or(self.beta_hat);
        self.lipschitz_probe.extend(other.lipschitz_probe);
        self.violations.extend(other.violations);
        self
    }
}

/// Evaluate the dissipativity inequality of the fast equation on sampled
/// pairs: for each probe `(x, y1, y2)` compute
///
/// ```text
/// LHS = (y1 - y2, f(x,y1) - f(x,y2) + lambda2 (h(x,y1) - h(x,y2)))
///     + ||g(x,y1) - g(x,y2)||_F^2 + lambda2 ||h(x,y1) - h(x,y2)||^2
/// ```
///
/// and report `beta_hat = min -LHS / ||y1 - y2||^2`. Probes with `LHS >= 0`
/// are recorded as violations.
pub fn check_dissipativity(model: &CoefficientModel, probe: &ProbeSet) -> Result<AssumptionReport> {
    if probe.x_points.is_empty() || probe.y_pairs.is_empty() {
        return Err(SimError::InvalidInput(
            "dissipativity probe needs x points and y pairs".into(),
        ));
    }
    let d = model.dims();
    let l2 = model.lambda2();
    let mut f1 = vec![0.0; d.m];
    let mut f2 = vec![0.0; d.m];
    let mut h1 = vec![0.0; d.m];
    let mut h2 = vec![0.0; d.m];
    let mut g1 = vec![0.0; d.m * d.d2];
    let mut g2 = vec![0.0; d.m * d.d2];

    let mut beta = f64::INFINITY;
    let mut violations = Vec::new();
    for x in &probe.x_points {
        for (y1, y2) in &probe.y_pairs {
            let dy_sq: f64 = y1
                .iter()
                .zip(y2)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dy_sq == 0.0 {
                return Err(SimError::InvalidInput(
                    "dissipativity probe pairs must be distinct".into(),
                ));
            }
            model.eval_f(x, y1, &mut f1);
            model.eval_f(x, y2, &mut f2);
            model.eval_h(x, y1, &mut h1);
            model.eval_h(x, y2, &mut h2);
            model.eval_g(x, y1, &mut g1);
            model.eval_g(x, y2, &mut g2);

            let mut lhs = 0.0;
            for i in 0..d.m {
                lhs += (y1[i] - y2[i]) * (f1[i] - f2[i] + l2 * (h1[i] - h2[i]));
                lhs += l2 * (h1[i] - h2[i]) * (h1[i] - h2[i]);
            }
            for k in 0..d.m * d.d2 {
                lhs += (g1[k] - g2[k]) * (g1[k] - g2[k]);
            }
            beta = beta.min(-lhs / dy_sq);
            if lhs >= 0.0 {
                violations.push(Violation {
                    assumption: "dissipativity".into(),
                    x: x.clone(),
                    y1: y1.clone(),
                    y2: Some(y2.clone()),
                    value: lhs,
                });
            }
        }
    }
    Ok(AssumptionReport {
        alpha_hat: None,
        beta_hat: Some(beta),
        lipschitz_probe: BTreeMap::new(),
        violations,
    })
}

/// Uniform-ellipticity probe of the fast diffusion: the minimum eigenvalue
/// of `g g^T` over the sampled points. Probes where it is not strictly
/// positive are violations.
pub fn check_nondegeneracy(model: &CoefficientModel, probe: &ProbeSet) -> Result<AssumptionReport> {
    if probe.x_points.is_empty() || probe.y_points.is_empty() {
        return Err(SimError::InvalidInput(
            "nondegeneracy probe needs x and y points".into(),
        ));
    }
    let d = model.dims();
    let mut g = vec![0.0; d.m * d.d2];
    let mut ggt = vec![0.0; d.m * d.m];
    let mut alpha = f64::INFINITY;
    let mut violations = Vec::new();
    for x in &probe.x_points {
        for y in &probe.y_points {
            model.eval_g(x, y, &mut g);
            for i in 0..d.m {
                for j in 0..d.m {
                    let mut s = 0.0;
                    for k in 0..d.d2 {
                        s += g[i * d.d2 + k] * g[j * d.d2 + k];
                    }
                    ggt[i * d.m + j] = s;
                }
            }
            let lam = min_eigenvalue_sym(&ggt, d.m);
            alpha = alpha.min(lam);
            if lam <= 0.0 {
                violations.push(Violation {
                    assumption: "nondegeneracy".into(),
                    x: x.clone(),
                    y1: y.clone(),
                    y2: None,
                    value: lam,
                });
            }
        }
    }
    Ok(AssumptionReport {
        alpha_hat: Some(alpha),
        beta_hat: None,
        lipschitz_probe: BTreeMap::new(),
        violations,
    })
}

/// Max finite-difference slope of each coefficient over all pairs of probe
/// points (Euclidean metric on the concatenated (x, y) arguments).
pub fn probe_lipschitz(model: &CoefficientModel, probe: &ProbeSet) -> BTreeMap<String, f64> {
    let d = model.dims();
    let count = probe.x_points.len().min(probe.y_points.len());
    let points: Vec<(&Vec<f64>, &Vec<f64>)> = (0..count)
        .map(|i| (&probe.x_points[i], &probe.y_points[i]))
        .collect();

    let mut out = BTreeMap::new();
    let mut buf1 = vec![0.0; d.n.max(d.m) * d.d1.max(d.d2).max(1)];
    let mut buf2 = buf1.clone();

    let mut slope_of = |name: &str, len: usize, full_metric: bool, eval: &mut dyn FnMut(&[f64], &[f64], &mut [f64])| {
        let mut max_slope = 0.0_f64;
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                let (x1, y1) = points[i];
                let (x2, y2) = points[j];
                let mut dist_sq: f64 = x1
                    .iter()
                    .zip(x2.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if full_metric {
                    dist_sq += y1
                        .iter()
                        .zip(y2.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
                if dist_sq < 1e-20 {
                    continue;
                }
                eval(x1, y1, &mut buf1[..len]);
                eval(x2, y2, &mut buf2[..len]);
                let diff_sq: f64 = buf1[..len]
                    .iter()
                    .zip(&buf2[..len])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                max_slope = max_slope.max((diff_sq / dist_sq).sqrt());
            }
        }
        out.insert(name.to_string(), max_slope);
    };

    slope_of("a", d.n, true, &mut |x, y, o| model.eval_a(x, y, o));
    slope_of("b", d.n * d.d1, false, &mut |x, _, o| model.eval_b(x, o));
    slope_of("c", d.n, false, &mut |x, _, o| model.eval_c(x, o));
    slope_of("f", d.m, true, &mut |x, y, o| model.eval_f(x, y, o));
    slope_of("g", d.m * d.d2, true, &mut |x, y, o| model.eval_g(x, y, o));
    slope_of("h", d.m, true, &mut |x, y, o| model.eval_h(x, y, o));
    out
}

/// Run both assumption checks plus the Lipschitz probe and merge the
/// results into one report.
pub fn assumption_report(model: &CoefficientModel, probe: &ProbeSet) -> Result<AssumptionReport> {
    let mut report = check_dissipativity(model, probe)?.merge(check_nondegeneracy(model, probe)?);
    report.lipschitz_probe = probe_lipschitz(model, probe);
    Ok(report)
}

/// Minimum eigenvalue of a symmetric matrix (row-major, `m x m`) by cyclic
/// Jacobi rotations. Intended for the small fast-state dimensions used by
/// the ellipticity probe.
pub(crate) fn min_eigenvalue_sym(a: &[f64], m: usize) -> f64 {
    debug_assert_eq!(a.len(), m * m);
    if m == 0 {
        return 0.0;
    }
    if m == 1 {
        return a[0];
    }
    let mut w = a.to_vec();
    let idx = |i: usize, j: usize| i * m + j;
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                off += w[idx(i, j)] * w[idx(i, j)];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = w[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = w[idx(p, p)];
                let aqq = w[idx(q, q)];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = w[idx(k, p)];
                    let akq = w[idx(k, q)];
                    w[idx(k, p)] = c * akp - s * akq;
                    w[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = w[idx(p, k)];
                    let aqk = w[idx(q, k)];
                    w[idx(p, k)] = c * apk - s * aqk;
                    w[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..m).map(|i| w[idx(i, i)]).fold(f64::INFINITY, f64::min)
}
