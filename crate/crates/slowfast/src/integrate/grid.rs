//! Jump-adapted time grid: the union of a uniform grid with every scheduled
//! jump time, so jumps are applied exactly at their sampled times.

use crate::error::{Result, SimError};

/// Strictly increasing nodes `0 = t_0 < ... < t_K = t_end` with per-node
/// markers saying which Poisson process jumps there and whether the node
/// belongs to the underlying uniform lattice.
#[derive(Debug, Clone, Default)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    p_jump: Vec<bool>,
    n_jump: Vec<bool>,
    uniform: Vec<bool>,
}

impl TimeGrid {
    pub fn build(t_end: f64, dt: f64, p_times: &[f64], n_times: &[f64]) -> Result<TimeGrid> {
        let mut grid = TimeGrid::default();
        grid.rebuild(t_end, dt, p_times, n_times)?;
        Ok(grid)
    }

    /// In-place rebuild, reusing buffers.
    pub(crate) fn rebuild(
        &mut self,
        t_end: f64,
        dt: f64,
        p_times: &[f64],
        n_times: &[f64],
    ) -> Result<()> {
        if !(t_end > 0.0) || !(dt > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "grid needs t_end > 0 and dt > 0, got t_end = {t_end}, dt = {dt}"
            )));
        }
        for times in [p_times, n_times] {
            for w in times.windows(2) {
                if !(w[0] < w[1]) {
                    return Err(SimError::InvalidInput(
                        "jump times must be strictly increasing".into(),
                    ));
                }
            }
            if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
                if !(first > 0.0) || !(last <= t_end) {
                    return Err(SimError::InvalidInput(
                        "jump times must lie in (0, t_end]".into(),
                    ));
                }
            }
        }

        self.nodes.clear();
        self.p_jump.clear();
        self.n_jump.clear();
        self.uniform.clear();

        // three-way merge of the uniform lattice with both jump lists
        let tol = t_end * 1e-12;
        let mut j = 0u64; // next uniform tick index
        let mut ip = 0;
        let mut in_ = 0;
        loop {
            let tu = {
                let t = (j as f64) * dt;
                if t >= t_end - tol {
                    t_end
                } else {
                    t
                }
            };
            let tp = p_times.get(ip).copied().unwrap_or(f64::INFINITY);
            let tn = n_times.get(in_).copied().unwrap_or(f64::INFINITY);
            let t = tu.min(tp).min(tn);

            let from_uniform = tu == t;
            let from_p = tp == t;
            let from_n = tn == t;
            if from_uniform {
                j += 1;
            }
            if from_p {
                ip += 1;
            }
            if from_n {
                in_ += 1;
            }

            self.nodes.push(t);
            self.p_jump.push(from_p);
            self.n_jump.push(from_n);
            self.uniform.push(from_uniform);

            if t >= t_end {
                break;
            }
        }
        debug_assert_eq!(*self.nodes.last().unwrap(), t_end);
        Ok(())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of integration steps (`nodes().len() - 1`).
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    #[inline]
    pub fn p_jump_at(&self, k: usize) -> bool {
        self.p_jump[k]
    }

    #[inline]
    pub fn n_jump_at(&self, k: usize) -> bool {
        self.n_jump[k]
    }

    /// True when node `k` lies on the uniform lattice (used to sample
    /// ensemble statistics at times shared by every path).
    #[inline]
    pub fn is_uniform_node(&self, k: usize) -> bool {
        self.uniform[k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_uniform_grid() {
        let g = TimeGrid::build(1.0, 0.25, &[], &[]).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.steps(), 4);
        assert!((0..=4).all(|k| g.is_uniform_node(k)));
        assert!((0..=4).all(|k| !g.p_jump_at(k) && !g.n_jump_at(k)));
    }

    #[test]
    fn jump_times_become_nodes() {
        let g = TimeGrid::build(1.0, 0.5, &[0.3], &[0.6, 1.0]).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.3, 0.5, 0.6, 1.0]);
        assert!(g.p_jump_at(1));
        assert!(g.n_jump_at(3));
        assert!(g.n_jump_at(4));
        assert!(g.is_uniform_node(4)); // t_end is both uniform and a jump
    }

    #[test]
    fn coincident_jump_and_tick_merge_into_one_node() {
        let g = TimeGrid::build(1.0, 0.25, &[0.5], &[0.5]).unwrap();
        let count = g.nodes().iter().filter(|&&t| t == 0.5).count();
        assert_eq!(count, 1);
        let k = g.nodes().iter().position(|&t| t == 0.5).unwrap();
        assert!(g.p_jump_at(k) && g.n_jump_at(k) && g.is_uniform_node(k));
    }

    #[test]
    fn non_divisible_horizon_ends_exactly_at_t_end() {
        let g = TimeGrid::build(1.0, 0.3, &[], &[]).unwrap();
        assert_eq!(*g.nodes().last().unwrap(), 1.0);
        for w in g.nodes().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn unsorted_or_out_of_range_jumps_rejected() {
        assert!(TimeGrid::build(1.0, 0.1, &[0.5, 0.4], &[]).is_err());
        assert!(TimeGrid::build(1.0, 0.1, &[1.5], &[]).is_err());
        assert!(TimeGrid::build(1.0, 0.1, &[], &[0.0]).is_err());
    }
}
