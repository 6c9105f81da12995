//! Recombining "multiple-jumps" tree for the unit-volatility mean-reverting
//! factor. Node values are fixed at `(2j - n) sqrt(dt)`; mean reversion is
//! absorbed by letting the up/down successors skip levels so that the local
//! drift is matched, with the transition probability clamped into [0, 1].

use crate::error::{Error, Result};
use crate::term_structure::HwParams;

/// Up/down successor indices into the next level and the up probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub j_up: usize,
    pub j_dw: usize,
    pub prob_up: f64,
}

/// Recombining lattice for the rate factor over `n_steps` steps of size `dt`.
#[derive(Debug, Clone)]
pub struct RateTree {
    pub n_steps: usize,
    pub dt: f64,
    sqrt_dt: f64,
    kappa: f64,
    /// successors[n][j] for n in 0..n_steps, j in 0..=n
    successors: Vec<Vec<Successor>>,
}

impl RateTree {
    /// Factor value at node `(n, j)`, i.e. `(2j - n) sqrt(dt)`.
    #[inline]
    pub fn value(&self, n: usize, j: usize) -> f64 {
        (2.0 * j as f64 - n as f64) * self.sqrt_dt
    }

    /// All node values at level `n`, increasing in `j`.
    pub fn level(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|j| self.value(n, j)).collect()
    }

    /// Stored successor triple for node `(n, j)`.
    pub fn successors(&self, n: usize, j: usize) -> Result<Successor> {
        if n >= self.n_steps || j > n {
            return Err(Error::NodeOutOfRange { step: n, node: j });
        }
        Ok(self.successors[n][j])
    }

    /// Unchecked successor lookup for hot loops.
    #[inline]
    pub(crate) fn successor_unchecked(&self, n: usize, j: usize) -> Successor {
        self.successors[n][j]
    }
}

/// Builds the tree: successor indices per the min/max set definitions, and
/// `p_up = clamp((mu dt + R - R_dw) / (R_up - R_dw), 0, 1)` with drift
/// `mu = -kappa R`.
pub fn build_rate_tree(hw: &HwParams, n_steps: usize, dt: f64) -> Result<RateTree> {
    hw.validate()?;
    if n_steps < 1 {
        return Err(Error::InvalidConfig(
            "rate tree needs at least one step".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::NonpositiveDt(dt));
    }
    let sqrt_dt = dt.sqrt();
    let mut successors = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let mut row = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let r = (2.0 * j as f64 - n as f64) * sqrt_dt;
            let target = r - hw.kappa * r * dt;
            let value_at = |jj: usize| (2.0 * jj as f64 - (n + 1) as f64) * sqrt_dt;

            let mut j_up = j + 1;
            while j_up < n + 1 && value_at(j_up) < target {
                j_up += 1;
            }
            // empty candidate set clamps to the top node
            let mut j_dw = j;
            while j_dw > 0 && value_at(j_dw) > target {
                j_dw -= 1;
            }
            // j_dw = 0 doubles as the empty-set clamp

            let r_up = value_at(j_up);
            let r_dw = value_at(j_dw);
            let prob_up = ((target - r_dw) / (r_up - r_dw)).clamp(0.0, 1.0);
            row.push(Successor { j_up, j_dw, prob_up });
        }
        successors.push(row);
    }
    Ok(RateTree {
        n_steps,
        dt,
        sqrt_dt,
        kappa: hw.kappa,
        successors,
    })
}

impl RateTree {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}
