//! A materialized noise realization: the jump-adapted grid plus every
//! Brownian increment on it.
//!
//! Materializing the draws (rather than streaming them inside the step
//! loop) is what lets one realization drive several integrations — the
//! coupled system and its paired averaged path share the slow increments
//! slice for slice, which is the synchronous coupling the error estimators
//! rely on.

use crate::error::Result;
use crate::model::CoefficientModel;
use crate::randomness::{
    fill_brownian_increments, sample_jump_times_with, NoiseRole, RandomPlan,
};

use super::grid::TimeGrid;
use super::ScaleParams;

#[derive(Debug, Clone, Default)]
pub struct NoiseRealization {
    pub grid: TimeGrid,
    /// Slow Brownian increments, step-major, `steps * d1` entries.
    pub db: Vec<f64>,
    /// Fast Brownian increments, step-major, `steps * d2` entries.
    pub dw: Vec<f64>,
    d1: usize,
    d2: usize,
    p_times: Vec<f64>,
    n_times: Vec<f64>,
    steps_scratch: Vec<f64>,
}

impl NoiseRealization {
    pub fn new() -> Self {
        Self::default()
    }

    /// Realization for the coupled system on `[0, t_end]`: slow jumps at
    /// `lambda1`, fast jumps at `lambda2 / epsilon`, both Brownian blocks.
    pub fn sample_coupled(
        model: &CoefficientModel,
        scale: &ScaleParams,
        plan: &RandomPlan,
    ) -> Result<Self> {
        let mut noise = Self::new();
        noise.resample_coupled(model, scale, plan)?;
        Ok(noise)
    }

    /// Realization for the averaged equation alone: slow jumps and slow
    /// Brownian increments on the uniform-plus-`P` grid.
    pub fn sample_slow(
        model: &CoefficientModel,
        t_end: f64,
        dt: f64,
        plan: &RandomPlan,
    ) -> Result<Self> {
        let mut noise = Self::new();
        noise.resample_slow(model, t_end, dt, plan)?;
        Ok(noise)
    }

    /// Realization for the frozen fast equation: fast jumps at `lambda2`
    /// (timescale fixed at one) and fast Brownian increments.
    pub fn sample_frozen(
        model: &CoefficientModel,
        horizon: f64,
        dt: f64,
        plan: &RandomPlan,
    ) -> Result<Self> {
        let mut noise = Self::new();
        noise.resample_frozen(model, horizon, dt, plan)?;
        Ok(noise)
    }

    pub(crate) fn resample_coupled(
        &mut self,
        model: &CoefficientModel,
        scale: &ScaleParams,
        plan: &RandomPlan,
    ) -> Result<()> {
        let dims = model.dims();
        self.d1 = dims.d1;
        self.d2 = dims.d2;

        let mut p_rng = plan.rng(NoiseRole::SlowJumps);
        sample_jump_times_with(&mut p_rng, model.lambda1(), scale.t_end, &mut self.p_times);
        let mut n_rng = plan.rng(NoiseRole::FastJumps);
        sample_jump_times_with(
            &mut n_rng,
            model.lambda2() / scale.epsilon,
            scale.t_end,
            &mut self.n_times,
        );
        self.grid
            .rebuild(scale.t_end, scale.dt, &self.p_times, &self.n_times)?;
        self.fill_steps();

        let mut b_rng = plan.rng(NoiseRole::SlowBrownian);
        fill_brownian_increments(&mut b_rng, &self.steps_scratch, dims.d1, &mut self.db);
        let mut w_rng = plan.rng(NoiseRole::FastBrownian);
        fill_brownian_increments(&mut w_rng, &self.steps_scratch, dims.d2, &mut self.dw);
        Ok(())
    }

    pub(crate) fn resample_slow(
        &mut self,
        model: &CoefficientModel,
        t_end: f64,
        dt: f64,
        plan: &RandomPlan,
    ) -> Result<()> {
        let dims = model.dims();
        self.d1 = dims.d1;
        self.d2 = 0;

        let mut p_rng = plan.rng(NoiseRole::SlowJumps);
        sample_jump_times_with(&mut p_rng, model.lambda1(), t_end, &mut self.p_times);
        self.n_times.clear();
        self.grid.rebuild(t_end, dt, &self.p_times, &[])?;
        self.fill_steps();

        let mut b_rng = plan.rng(NoiseRole::SlowBrownian);
        fill_brownian_increments(&mut b_rng, &self.steps_scratch, dims.d1, &mut self.db);
        self.dw.clear();
        Ok(())
    }

    pub(crate) fn resample_frozen(
        &mut self,
        model: &CoefficientModel,
        horizon: f64,
        dt: f64,
        plan: &RandomPlan,
    ) -> Result<()> {
        let dims = model.dims();
        self.d1 = 0;
        self.d2 = dims.d2;

        let mut n_rng = plan.rng(NoiseRole::FastJumps);
        sample_jump_times_with(&mut n_rng, model.lambda2(), horizon, &mut self.n_times);
        self.p_times.clear();
        self.grid.rebuild(horizon, dt, &[], &self.n_times)?;
        self.fill_steps();

        self.db.clear();
        let mut w_rng = plan.rng(NoiseRole::FastBrownian);
        fill_brownian_increments(&mut w_rng, &self.steps_scratch, dims.d2, &mut self.dw);
        Ok(())
    }

    fn fill_steps(&mut self) {
        self.steps_scratch.clear();
        let nodes = self.grid.nodes();
        for w in nodes.windows(2) {
            self.steps_scratch.push(w[1] - w[0]);
        }
    }

    #[inline]
    pub(crate) fn db_at(&self, k: usize) -> &[f64] {
        &self.db[k * self.d1..(k + 1) * self.d1]
    }

    #[inline]
    pub(crate) fn dw_at(&self, k: usize) -> &[f64] {
        &self.dw[k * self.d2..(k + 1) * self.d2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_jump_ou_benchmark, JumpOuParams};

    #[test]
    fn coupled_realization_shapes() {
        let model = make_jump_ou_benchmark(JumpOuParams::default()).unwrap();
        let scale = ScaleParams::new(0.25, 1.0, 0.02).unwrap();
        let plan = RandomPlan::new(5, 0);
        let noise = NoiseRealization::sample_coupled(&model, &scale, &plan).unwrap();
        let k = noise.grid.steps();
        assert_eq!(noise.db.len(), k);
        assert_eq!(noise.dw.len(), k);
        assert!(noise.grid.nodes().len() >= 51); // at least the uniform lattice
    }

    #[test]
    fn resampling_is_reproducible() {
        let model = make_jump_ou_benchmark(JumpOuParams::default()).unwrap();
        let scale = ScaleParams::new(0.5, 1.0, 0.05).unwrap();
        let plan = RandomPlan::new(9, 3);
        let a = NoiseRealization::sample_coupled(&model, &scale, &plan).unwrap();
        let mut b = NoiseRealization::new();
        b.resample_coupled(&model, &scale, &plan).unwrap();
        assert_eq!(a.grid.nodes(), b.grid.nodes());
        assert_eq!(a.db, b.db);
        assert_eq!(a.dw, b.dw);
    }

    #[test]
    fn fast_jump_intensity_scales_with_epsilon() {
        let model = make_jump_ou_benchmark(JumpOuParams::default()).unwrap();
        let plan = RandomPlan::new(17, 0);
        let mut counts = [0usize; 2];
        for (i, eps) in [1.0, 0.125].into_iter().enumerate() {
            let scale = ScaleParams::new(eps, 1.0, 0.0125).unwrap();
            for s in 0..200 {
                let noise =
                    NoiseRealization::sample_coupled(&model, &scale, &plan.for_sample(s)).unwrap();
                counts[i] += noise.n_times.len();
            }
        }
        // lambda2 = 1: about 200 jumps at eps = 1, about 1600 at eps = 1/8
        let ratio = counts[1] as f64 / counts[0] as f64;
        assert!((ratio - 8.0).abs() < 1.5, "ratio {ratio}");
    }
}
