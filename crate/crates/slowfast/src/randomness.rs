//! Reproducible randomness: seeded substreams, Poisson jump schedules, and
//! Brownian increments.
//!
//! Every stochastic quantity in the crate is drawn from a [`RandomPlan`],
//! which names a `(seed, stream_id)` pair plus one independent substream per
//! noise role (slow Brownian `B`, fast Brownian `W`, slow jumps `P`, fast
//! jumps `N`). The generator is ChaCha8: counter based, so any draw is
//! addressable without generating predecessors, and keyed per stream, so
//! worker threads never share mutable state. Identical `(seed, stream_id,
//! role)` always reproduce bit-identical draws regardless of thread count.
//!
//! The draw-order contract used by the integrators (and by any reference
//! implementation that wants to replay the same noise) is: slow jump times
//! first, then fast jump times, then per grid step the `d1` slow Brownian
//! normals, then per grid step the `d2` fast Brownian normals. Each role
//! reads from its own substream, so the four blocks are independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{Result, SimError};

/// Which driving noise a substream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseRole {
    /// Brownian motion `B` of the slow equation.
    SlowBrownian,
    /// Brownian motion `W` of the fast equation.
    FastBrownian,
    /// Poisson process `P` of the slow equation.
    SlowJumps,
    /// Poisson process `N` of the fast equation.
    FastJumps,
}

impl NoiseRole {
    pub const ALL: [NoiseRole; 4] = [
        NoiseRole::SlowBrownian,
        NoiseRole::FastBrownian,
        NoiseRole::SlowJumps,
        NoiseRole::FastJumps,
    ];

    fn index(self) -> usize {
        match self {
            NoiseRole::SlowBrownian => 0,
            NoiseRole::FastBrownian => 1,
            NoiseRole::SlowJumps => 2,
            NoiseRole::FastJumps => 3,
        }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One full avalanche of `a` combined with `b`; used to derive child stream
/// ids. Collisions among derived ids are possible in principle (64-bit
/// birthday bound) but harmless at desk scale and irrelevant to determinism.
fn mix2(a: u64, b: u64) -> u64 {
    let mut s = a ^ 0xA076_1D64_78BD_642F;
    let h = splitmix64(&mut s);
    let mut s2 = h ^ b.wrapping_mul(GOLDEN);
    splitmix64(&mut s2)
}

/// Stream derivation for cache cells keyed by quantized coordinates.
pub(crate) fn mix_for_cell(h: u64, v: u64) -> u64 {
    mix2(h, v)
}

/// Addressable source of independent substreams.
///
/// `stream_id` labels one logical sample path (or experiment cell); the four
/// role substreams of a plan are independent of each other and of every
/// other plan's substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomPlan {
    seed: u64,
    stream_id: u64,
    role_streams: [u64; 4],
}

impl RandomPlan {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomPlan {
            seed,
            stream_id,
            role_streams: [0, 1, 2, 3],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Substream label assigned to `role`.
    pub fn substream_id(&self, role: NoiseRole) -> u64 {
        self.role_streams[role.index()]
    }

    /// Plan for Monte Carlo sample `index`, derived deterministically from
    /// this plan. Distinct indices give independent substream families.
    pub fn for_sample(&self, index: u64) -> RandomPlan {
        RandomPlan {
            seed: self.seed,
            stream_id: mix2(self.stream_id, index),
            role_streams: self.role_streams,
        }
    }

    /// Fresh generator positioned at the start of the `role` substream.
    pub fn rng(&self, role: NoiseRole) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut s = self.seed ^ mix2(self.stream_id, 0x5157_4F52_4B50_4C4E);
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.role_streams[role.index()]);
        rng
    }
}

/// Sorted jump times of a Poisson process on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpSchedule {
    pub rate: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
}

impl JumpSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Draw the jump times of a Poisson process with the given intensity by
/// accumulating exponential interarrival times. Zero intensity yields an
/// empty schedule.
pub fn sample_jump_times(
    rate: f64,
    horizon: f64,
    plan: &RandomPlan,
    role: NoiseRole,
) -> Result<JumpSchedule> {
    if !(rate >= 0.0) {
        return Err(SimError::InvalidInput(format!(
            "jump rate must be >= 0, got {rate}"
        )));
    }
    if !(horizon > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "jump horizon must be > 0, got {horizon}"
        )));
    }
    let mut times = Vec::new();
    if rate > 0.0 {
        let mut rng = plan.rng(role);
        sample_jump_times_with(&mut rng, rate, horizon, &mut times);
    }
    Ok(JumpSchedule {
        rate,
        horizon,
        times,
    })
}

pub(crate) fn sample_jump_times_with(
    rng: &mut ChaCha8Rng,
    rate: f64,
    horizon: f64,
    times: &mut Vec<f64>,
) {
    times.clear();
    if rate <= 0.0 {
        return;
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    loop {
        let gap: f64 = exp.sample(rng);
        if gap <= 0.0 {
            // measure-zero draw; skip so times stay strictly increasing
            continue;
        }
        t += gap;
        if t > horizon {
            break;
        }
        times.push(t);
    }
}

/// Independent Gaussian increments for a Brownian path on a step grid: the
/// k-th entry is N(0, step_k * I_dim).
pub fn brownian_increments(
    steps: &[f64],
    dim: usize,
    plan: &RandomPlan,
    role: NoiseRole,
) -> Result<Vec<Vec<f64>>> {
    for (k, &h) in steps.iter().enumerate() {
        if !(h > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "step lengths must be > 0, got {h} at index {k}"
            )));
        }
    }
    let mut rng = plan.rng(role);
    let mut flat = Vec::new();
    fill_brownian_increments(&mut rng, steps, dim, &mut flat);
    Ok(steps
        .iter()
        .enumerate()
        .map(|(k, _)| flat[k * dim..(k + 1) * dim].to_vec())
        .collect())
}

/// Flat (step-major) variant used by the integrators; `out` is resized to
/// `steps.len() * dim`.
pub(crate) fn fill_brownian_increments(
    rng: &mut ChaCha8Rng,
    steps: &[f64],
    dim: usize,
    out: &mut Vec<f64>,
) {
    out.clear();
    out.reserve(steps.len() * dim);
    for &h in steps {
        let s = h.sqrt();
        for _ in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            out.push(s * z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_plan_reproduces_bits() {
        let plan = RandomPlan::new(42, 7);
        let a = sample_jump_times(2.0, 10.0, &plan, NoiseRole::SlowJumps).unwrap();
        let b = sample_jump_times(2.0, 10.0, &plan, NoiseRole::SlowJumps).unwrap();
        assert_eq!(a.times, b.times);

        let ga = brownian_increments(&[0.1, 0.2, 0.3], 2, &plan, NoiseRole::SlowBrownian).unwrap();
        let gb = brownian_increments(&[0.1, 0.2, 0.3], 2, &plan, NoiseRole::SlowBrownian).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn distinct_roles_and_streams_differ() {
        let plan = RandomPlan::new(42, 7);
        let a = brownian_increments(&[1.0; 8], 1, &plan, NoiseRole::SlowBrownian).unwrap();
        let b = brownian_increments(&[1.0; 8], 1, &plan, NoiseRole::FastBrownian).unwrap();
        assert_ne!(a, b);
        let other = plan.for_sample(1);
        let c = brownian_increments(&[1.0; 8], 1, &other, NoiseRole::SlowBrownian).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_rate_gives_empty_schedule() {
        let plan = RandomPlan::new(1, 0);
        let s = sample_jump_times(0.0, 10.0, &plan, NoiseRole::FastJumps).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn schedule_is_sorted_and_in_range() {
        for stream in 0..50 {
            let plan = RandomPlan::new(3, stream);
            let s = sample_jump_times(5.0, 4.0, &plan, NoiseRole::SlowJumps).unwrap();
            for w in s.times.windows(2) {
                assert!(w[0] < w[1]);
            }
            if let Some(&last) = s.times.last() {
                assert!(last <= 4.0);
            }
            if let Some(&first) = s.times.first() {
                assert!(first > 0.0);
            }
        }
    }

    #[test]
    fn poisson_count_mean_matches_rate_times_horizon() {
        // rate 2, horizon 10 => mean count 20; averaged over 1e5 substreams
        // the sample mean has sd sqrt(20/1e5) ~ 0.014.
        let base = RandomPlan::new(2024, 0);
        let n = 100_000u64;
        let mut total = 0usize;
        for i in 0..n {
            let plan = base.for_sample(i);
            total += sample_jump_times(2.0, 10.0, &plan, NoiseRole::SlowJumps)
                .unwrap()
                .len();
        }
        let mean = total as f64 / n as f64;
        assert!(
            (mean - 20.0).abs() < 0.05,
            "poisson mean count {mean}, expected 20.0 +- 0.05"
        );
    }

    #[test]
    fn empty_grid_gives_empty_increments() {
        let plan = RandomPlan::new(0, 0);
        let g = brownian_increments(&[], 3, &plan, NoiseRole::SlowBrownian).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn increment_variance_matches_step() {
        // 1e6 steps of 1e-3: per-coordinate sample variance within 1%.
        let plan = RandomPlan::new(7, 0);
        let steps = vec![1e-3; 1_000_000];
        let mut rng = plan.rng(NoiseRole::SlowBrownian);
        let mut flat = Vec::new();
        fill_brownian_increments(&mut rng, &steps, 1, &mut flat);
        let var = crate::stats::norm_sq(&flat) / flat.len() as f64;
        assert!(
            (var / 1e-3 - 1.0).abs() < 0.01,
            "variance ratio {}",
            var / 1e-3
        );
    }

    #[test]
    fn path_sum_variance_matches_horizon() {
        // Sum of increments over [0, T] has variance T; 1e5 independent
        // paths of 16 steps each, T = 1. Tolerance 2%.
        let base = RandomPlan::new(11, 0);
        let steps = vec![1.0 / 16.0; 16];
        let n = 100_000u64;
        let mut sums = Vec::with_capacity(n as usize);
        let mut flat = Vec::new();
        for i in 0..n {
            let mut rng = base.for_sample(i).rng(NoiseRole::SlowBrownian);
            fill_brownian_increments(&mut rng, &steps, 1, &mut flat);
            sums.push(flat.iter().sum::<f64>());
        }
        let mean = crate::stats::pairwise_sum(&sums) / n as f64;
        let var = sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n as f64 - 1.0);
        assert!((var - 1.0).abs() < 0.02, "path variance {var}");
    }

    #[test]
    fn negative_rate_and_bad_horizon_are_rejected() {
        let plan = RandomPlan::new(0, 0);
        assert!(sample_jump_times(-1.0, 1.0, &plan, NoiseRole::SlowJumps).is_err());
        assert!(sample_jump_times(1.0, 0.0, &plan, NoiseRole::SlowJumps).is_err());
        assert!(brownian_increments(&[0.1, -0.1], 1, &plan, NoiseRole::SlowBrownian).is_err());
    }

    #[test]
    fn substream_correlation_is_small() {
        // Empirical correlation between the first 1e4 standard normals of
        // distinct substreams stays below 0.02 in absolute value.
        use rand_distr::StandardNormal;
        let plan = RandomPlan::new(99, 5);
        let pairs = [
            (plan.rng(NoiseRole::SlowBrownian), plan.rng(NoiseRole::FastBrownian)),
            (plan.rng(NoiseRole::SlowBrownian), plan.rng(NoiseRole::SlowJumps)),
            (
                plan.rng(NoiseRole::SlowBrownian),
                plan.for_sample(3).rng(NoiseRole::SlowBrownian),
            ),
        ];
        for (mut ra, mut rb) in pairs {
            let n = 10_000;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            let mut syy = 0.0;
            for _ in 0..n {
                let x: f64 = ra.sample(StandardNormal);
                let y: f64 = rb.sample(StandardNormal);
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            let corr = sxy / (sxx.sqrt() * syy.sqrt());
            assert!(corr.abs() < 0.02, "correlation {corr}");
        }
    }
}
