//! Small numeric helpers: deterministic summation and weighted line fits.
//!
//! Monte Carlo accumulation goes through [`pairwise_sum`] on sample vectors
//! collected in index order, so results do not depend on how many rayon
//! workers produced them.

/// Pairwise (cascade) summation. Deterministic for a fixed input order and
/// accurate to O(log n) rounding growth.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean and standard error (sd / sqrt(n)). Fewer than two samples
/// give a zero standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Weighted least-squares line `y = intercept + slope * x`.
///
/// Weights are treated as inverse variances of the `y` values, so
/// `slope_var` and `intercept_var` come from the known-variance covariance
/// formula. `r_squared` is the weighted coefficient of determination.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_var: f64,
    pub intercept_var: f64,
    pub r_squared: f64,
}

pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(xs.len(), ws.len());
    assert!(xs.len() >= 2, "line fit needs at least two points");

    let w_tot: f64 = ws.iter().sum();
    let x_bar: f64 = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / w_tot;
    let y_bar: f64 = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / w_tot;

    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        let dx = xs[i] - x_bar;
        sxx += ws[i] * dx * dx;
        sxy += ws[i] * dx * (ys[i] - y_bar);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;

    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for i in 0..xs.len() {
        let fit = intercept + slope * xs[i];
        ss_res += ws[i] * (ys[i] - fit) * (ys[i] - fit);
        ss_tot += ws[i] * (ys[i] - y_bar) * (ys[i] - y_bar);
    }
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };

    LineFit {
        slope,
        intercept,
        slope_var: 1.0 / sxx,
        intercept_var: 1.0 / w_tot + x_bar * x_bar / sxx,
        r_squared,
    }
}

/// Squared Euclidean norm.
pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        // 10^7 copies of 0.1: exact sum is 10^6.
        let xs = vec![0.1_f64; 10_000_000];
        let exact = 1.0e6;
        let pw = pairwise_sum(&xs);
        assert!((pw - exact).abs() < 1e-7, "pairwise error {}", pw - exact);
    }

    #[test]
    fn mean_stderr_basics() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        // sd = sqrt(5/3), se = sd/2
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        let (_, se1) = mean_stderr(&[7.0]);
        assert_eq!(se1, 0.0);
    }

    #[test]
    fn weighted_line_recovers_exact_line() {
        let xs: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let ws = vec![1.0; 6];
        let fit = weighted_line(&xs, &ys, &ws);
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_line_respects_weights() {
        // Outlier with negligible weight must not move the fit.
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 2.0, 100.0];
        let ws = [1.0, 1.0, 1.0, 1e-12];
        let fit = weighted_line(&xs, &ys, &ws);
        assert!((fit.slope - 1.0).abs() < 1e-6);
    }
}
