//! Exact Gaussian moments for the joint increment of the unit-volatility rate
//! factor `R`, its time integral `I`, and the equity Brownian driver `W`,
//! conditioned on the current rate state, plus the conditional law of the
//! Brownian increment given both rate endpoints.
//!
//! These closed forms drive the lattice transition construction, the exact
//! Monte Carlo stepping, and the eight-point cubature of the GPR-tree engine.

use crate::error::{Error, Result};
use crate::term_structure::HwParams;

/// First and second moments of `(dR, dI, dW)` over a step `dt`, conditioned
/// on the current factor value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMoments {
    pub mu_r: f64,
    pub mu_i: f64,
    pub mu_w: f64,
    pub var_r: f64,
    pub var_i: f64,
    pub var_w: f64,
    pub cov_ri: f64,
    pub cov_rw: f64,
    pub cov_iw: f64,
}

impl JointMoments {
    /// Covariance matrix in `(R, I, W)` order, row major.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        [
            [self.var_r, self.cov_ri, self.cov_rw],
            [self.cov_ri, self.var_i, self.cov_iw],
            [self.cov_rw, self.cov_iw, self.var_w],
        ]
    }

    pub fn mean(&self) -> [f64; 3] {
        [self.mu_r, self.mu_i, self.mu_w]
    }
}

/// Conditional law of the equity Brownian increment given the rate factor at
/// both ends of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalBrownian {
    pub mu_w_given_r: f64,
    pub var_w_given_r: f64,
}

impl ConditionalBrownian {
    pub fn sd(&self) -> f64 {
        self.var_w_given_r.max(0.0).sqrt()
    }
}

/// Joint moments of `(dR, dI, dW) | R_t = r_t` over a step of length `dt`.
pub fn joint_moments(hw: &HwParams, r_t: f64, dt: f64) -> Result<JointMoments> {
    if !(dt > 0.0) {
        return Err(Error::NonpositiveDt(dt));
    }
    let k = hw.kappa;
    let rho = hw.rho;
    let e1 = (-k * dt).exp();
    let e2 = (-2.0 * k * dt).exp();
    let mu_r = r_t * (e1 - 1.0);
    Ok(JointMoments {
        mu_r,
        mu_i: -mu_r / k,
        mu_w: 0.0,
        var_r: (1.0 - e2) / (2.0 * k),
        var_i: (2.0 * k * dt + 4.0 * e1 - e2 - 3.0) / (2.0 * k * k * k),
        var_w: dt,
        cov_ri: (1.0 - e1) * (1.0 - e1) / (2.0 * k * k),
        cov_rw: rho * (1.0 - e1) / k,
        cov_iw: rho * (k * dt + e1 - 1.0) / (k * k),
    })
}

/// Law of `dW | R_t, R_{t+dt}`:
/// mean `2 rho (1-e^{-k dt})/(1-e^{-2 k dt}) (R_{t+dt} - R_t e^{-k dt})`,
/// variance `dt - 2 rho^2/k (1-e^{-k dt})/(1+e^{-k dt})`.
pub fn conditional_w(hw: &HwParams, r_t: f64, r_next: f64, dt: f64) -> Result<ConditionalBrownian> {
    if !(dt > 0.0) {
        return Err(Error::NonpositiveDt(dt));
    }
    let k = hw.kappa;
    let rho = hw.rho;
    let e1 = (-k * dt).exp();
    let e2 = (-2.0 * k * dt).exp();
    let coeff = 2.0 * rho * (1.0 - e1) / (1.0 - e2);
    Ok(ConditionalBrownian {
        mu_w_given_r: coeff * (r_next - r_t * e1),
        var_w_given_r: dt - 2.0 * rho * rho / k * (1.0 - e1) / (1.0 + e1),
    })
}

/// Regression coefficient of `dW` on the rate endpoint residual,
/// `2 rho (1-e^{-k dt})/(1-e^{-2 k dt})`. Shared by [`conditional_w`] and the
/// total-variance identity used in tests.
pub fn conditional_w_slope(hw: &HwParams, dt: f64) -> f64 {
    let e1 = (-hw.kappa * dt).exp();
    let e2 = (-2.0 * hw.kappa * dt).exp();
    2.0 * hw.rho * (1.0 - e1) / (1.0 - e2)
}

/// Lower-triangular Cholesky factor of a symmetric 3x3 matrix.
///
/// Pivots below `1e-14` of the largest diagonal entry are clamped to zero so
/// that the degenerate `|rho| -> 1` limits factor cleanly; genuinely negative
/// pivots report the offending leading minor.
pub fn chol3(cov: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let scale = cov[0][0].max(cov[1][1]).max(cov[2][2]).max(0.0);
    let tol = 1e-14 * scale;
    let mut l = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < -tol {
                    return Err(Error::NotPsd { minor: i + 1 });
                }
                l[i][i] = if s <= tol { 0.0 } else { s.sqrt() };
            } else {
                l[i][j] = if l[j][j] == 0.0 { 0.0 } else { s / l[j][j] };
            }
        }
    }
    Ok(l)
}
