//! Log-uniform equity state meshes, one per time step, and clamped linear
//! interpolation of value functions over them.
//!
//! Step `n` holds `N_S (n+1)` points evenly spaced in log-price between
//! `s_ref e^{-n sigma sqrt(dt)}` and `s_ref e^{+n sigma sqrt(dt)}`; step 0 is
//! the singleton `{s_ref}`. Interpolation is linear in the raw price, with
//! out-of-range queries clamped to the boundary value.

use crate::error::{Error, Result};

/// One time step of the mesh. Prices and their logs are both stored; the logs
/// are exactly uniform, which gives O(1) bracket lookup.
#[derive(Debug, Clone)]
pub struct MeshStep {
    pub prices: Vec<f64>,
    pub logs: Vec<f64>,
    log_min: f64,
    dlog: f64,
}

impl MeshStep {
    fn singleton(s_ref: f64) -> Self {
        MeshStep {
            prices: vec![s_ref],
            logs: vec![s_ref.ln()],
            log_min: s_ref.ln(),
            dlog: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Bracketing index and upper weight for a query price, given its log.
    /// The interpolated value is `v[lo] + w (v[lo+1] - v[lo])`; out-of-range
    /// queries clamp to the boundary (`w` = 0 below, 1 above), and for meshes
    /// of at least two points `lo` never exceeds `len - 2`.
    #[inline]
    pub fn bracket(&self, query: f64, ln_query: f64) -> (usize, f64) {
        let m = self.prices.len();
        if m == 1 || query <= self.prices[0] {
            return (0, 0.0);
        }
        if query >= self.prices[m - 1] {
            return (m - 2, 1.0);
        }
        let mut lo = (((ln_query - self.log_min) / self.dlog) as usize).min(m - 2);
        // float guard: the log-derived index can be off by one
        while lo > 0 && self.prices[lo] > query {
            lo -= 1;
        }
        while lo + 1 < m - 1 && self.prices[lo + 1] < query {
            lo += 1;
        }
        let s_lo = self.prices[lo];
        let s_hi = self.prices[lo + 1];
        (lo, (query - s_lo) / (s_hi - s_lo))
    }

    /// Clamped linear interpolation of `values` (one per mesh point) at `query`.
    pub fn interp(&self, values: &[f64], query: f64) -> f64 {
        debug_assert_eq!(values.len(), self.prices.len());
        if values.len() == 1 {
            return values[0];
        }
        let (lo, w) = self.bracket(query, query.ln());
        if w == 0.0 {
            values[lo]
        } else if w == 1.0 {
            values[lo + 1]
        } else {
            values[lo] + w * (values[lo + 1] - values[lo])
        }
    }
}

/// Per-step meshes for one lattice (global horizon or one local period).
#[derive(Debug, Clone)]
pub struct EquityMesh {
    steps: Vec<MeshStep>,
}

impl EquityMesh {
    pub fn step(&self, n: usize) -> &MeshStep {
        &self.steps[n]
    }

    pub fn n_steps(&self) -> usize {
        self.steps.len() - 1
    }
}

/// Builds meshes for steps `0..=n_steps`.
pub fn build_mesh(
    s_ref: f64,
    sigma_max: f64,
    dt: f64,
    n_refine: usize,
    n_steps: usize,
) -> Result<EquityMesh> {
    if !(s_ref > 0.0) || !(sigma_max > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "mesh needs positive s_ref, sigma_max, dt; got {s_ref}, {sigma_max}, {dt}"
        )));
    }
    if n_refine < 2 {
        return Err(Error::InvalidConfig(
            "mesh refinement must be at least 2".into(),
        ));
    }
    let width = sigma_max * dt.sqrt();
    let ln_ref = s_ref.ln();
    let mut steps = Vec::with_capacity(n_steps + 1);
    steps.push(MeshStep::singleton(s_ref));
    for n in 1..=n_steps {
        let count = n_refine * (n + 1);
        let half = n as f64 * width;
        let dlog = 2.0 * half / (count - 1) as f64;
        let log_min = ln_ref - half;
        let logs: Vec<f64> = (0..count).map(|i| log_min + i as f64 * dlog).collect();
        let prices: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        steps.push(MeshStep {
            prices,
            logs,
            log_min,
            dlog,
        });
    }
    Ok(EquityMesh { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_mesh_matches_exponent_formula() {
        let mesh = build_mesh(1.0, 0.2, 0.25, 2, 1).unwrap();
        let logs = &mesh.step(1).logs;
        let expect = [-0.1, -0.1 / 3.0, 0.1 / 3.0, 0.1];
        assert_eq!(logs.len(), 4);
        for (a, b) in logs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn endpoints_and_sizes() {
        let s0 = 100.0;
        let sigma = 0.3;
        let dt = 1.0 / 16.0;
        let mesh = build_mesh(s0, sigma, dt, 4, 10).unwrap();
        assert_eq!(mesh.step(0).prices, vec![s0]);
        for n in 1..=10 {
            let step = mesh.step(n);
            assert_eq!(step.len(), 4 * (n + 1));
            let half = n as f64 * sigma * dt.sqrt();
            assert!((step.prices[0] - s0 * (-half).exp()).abs() < 1e-12 * s0);
            assert!((step.prices[step.len() - 1] - s0 * half.exp()).abs() < 1e-12 * s0);
            for w in step.prices.windows(2) {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn refinement_below_two_is_rejected() {
        assert!(build_mesh(1.0, 0.2, 0.25, 1, 4).is_err());
    }

    #[test]
    fn interp_exact_at_nodes_and_clamped_outside() {
        let mesh = build_mesh(1.0, 0.25, 0.5, 3, 5).unwrap();
        let step = mesh.step(4);
        let values: Vec<f64> = (0..step.len()).map(|i| (i * i) as f64).collect();
        for (i, &s) in step.prices.iter().enumerate() {
            assert_eq!(step.interp(&values, s), values[i]);
        }
        assert_eq!(step.interp(&values, step.prices[0] * 0.5), values[0]);
        assert_eq!(
            step.interp(&values, step.prices[step.len() - 1] * 2.0),
            values[step.len() - 1]
        );
    }

    #[test]
    fn interp_reproduces_linear_functions() {
        let mesh = build_mesh(2.0, 0.2, 0.1, 4, 6).unwrap();
        let step = mesh.step(6);
        let (a, b) = (3.7, -1.2);
        let values: Vec<f64> = step.prices.iter().map(|s| a * s + b).collect();
        let lo = step.prices[0];
        let hi = step.prices[step.len() - 1];
        for i in 0..100 {
            let q = lo + (hi - lo) * ((i as f64 * 0.37 + 0.013) % 1.0);
            let q = q.clamp(lo, hi);
            let v = step.interp(&values, q);
            assert!(
                (v - (a * q + b)).abs() <= 1e-12 * (a * q + b).abs().max(1.0),
                "q = {q}"
            );
        }
    }

    #[test]
    fn monotone_values_give_monotone_interpolant() {
        let mesh = build_mesh(1.0, 0.3, 0.2, 3, 4).unwrap();
        let step = mesh.step(3);
        let values: Vec<f64> = step.prices.iter().map(|s| s.sqrt() + s).collect();
        let lo = step.prices[0];
        let hi = step.prices[step.len() - 1];
        for i in 0..100 {
            let q1 = lo + (hi - lo) * ((i as f64 * 0.291) % 1.0);
            let q2 = lo + (hi - lo) * ((i as f64 * 0.577 + 0.1) % 1.0);
            let (qa, qb) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            assert!(step.interp(&values, qa) <= step.interp(&values, qb) + 1e-15);
        }
    }

    #[test]
    fn quadratic_interp_error_bound() {
        let mesh = build_mesh(1.0, 0.25, 0.25, 4, 8).unwrap();
        let step = mesh.step(8);
        let values: Vec<f64> = step.prices.iter().map(|s| s * s).collect();
        let max_gap = step
            .prices
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0f64, f64::max);
        // linear interpolation error for f'' = 2 is at most gap^2 / 4
        let bound = max_gap * max_gap / 4.0 * (1.0 + 1e-12);
        let lo = step.prices[0];
        let hi = step.prices[step.len() - 1];
        for i in 0..500 {
            let q = lo + (hi - lo) * ((i as f64 + 0.5) / 500.0);
            let err = (step.interp(&values, q) - q * q).abs();
            assert!(err <= bound, "q = {q}, err = {err}, bound = {bound}");
        }
    }
}
