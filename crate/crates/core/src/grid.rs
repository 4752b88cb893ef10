//! Uniform time grids in units of `1/J`.

use std::f64::consts::FRAC_PI_2;

/// Default number of points on the `[0, π/2]` window.
pub const DEFAULT_POINTS: usize = 201;

/// `points` equally spaced values on `[0, t_max]`, endpoints included.
pub fn uniform(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|k| t_max * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// 201 points on `[0, π/2]`.
pub fn default_grid() -> Vec<f64> {
    uniform(FRAC_PI_2, DEFAULT_POINTS)
}

/// Index of the grid point closest to `t` (first one on ties).
pub fn nearest_index(times: &[f64], t: f64) -> Option<usize> {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn default_grid_hits_quarter_pi() {
        let g = default_grid();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[200], FRAC_PI_2);
        let k = nearest_index(&g, FRAC_PI_4).unwrap();
        assert_eq!(k, 100);
        assert!((g[k] - FRAC_PI_4).abs() < 1e-15);
    }
}
