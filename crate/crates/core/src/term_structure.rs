//! Nelson-Siegel-Svensson forward curve, market bond prices, and the
//! deterministic shift that fits the Hull-White short rate to the curve.
//!
//! The short rate decomposes as `r(t) = omega * R(t) + beta(t)` where `R` is a
//! unit-volatility mean-reverting factor and `beta` absorbs the fitted term
//! structure plus a convexity adjustment. Everything here is closed form; the
//! pricers call these functions once per time step, so no quadrature is used
//! outside of test oracles.

use crate::error::{Error, Result};

/// How stored curve parameters map to annualized decimal rates.
///
/// ECB publishes NSS parameters in percent (beta0 ~ 0.5 for a 0.5% level),
/// while textbook flat curves quote decimals (beta0 = 0.05 for 5%).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateScale {
    Decimal,
    Percent,
}

impl RateScale {
    fn factor(self) -> f64 {
        match self {
            RateScale::Decimal => 1.0,
            RateScale::Percent => 0.01,
        }
    }
}

/// Nelson-Siegel-Svensson instantaneous forward curve parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSpec {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Short-term decay time, years. Must be positive.
    pub tau1: f64,
    /// Long-term decay time, years. Must be positive.
    pub tau2: f64,
    pub rate_scale: RateScale,
}

/// Hull-White rate dynamics: mean reversion, rate volatility, and the
/// correlation between the rate and equity drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HwParams {
    /// Mean-reversion speed (1/years). Must be positive.
    pub kappa: f64,
    /// Short-rate volatility. Zero collapses the rate to the fitted curve.
    pub omega: f64,
    /// Equity-rate correlation, in [-1, 1].
    pub rho: f64,
}

impl HwParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.omega >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega must be nonnegative, got {}",
                self.omega
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

impl CurveSpec {
    /// Flat curve at a constant decimal rate.
    pub fn flat(rate: f64) -> Self {
        CurveSpec {
            beta0: rate,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            tau1: 1.0,
            tau2: 1.0,
            rate_scale: RateScale::Decimal,
        }
    }

    /// Looks up a named curve preset: `flat_5pct`, `ecb_2020_09_02`,
    /// `ecb_2024_09_02`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "flat_5pct" => Some(CurveSpec::flat(0.05)),
            "ecb_2020_09_02" => Some(CurveSpec {
                beta0: 0.269446,
                beta1: -0.862654,
                beta2: 12.121820,
                beta3: -14.133376,
                tau1: 1.955330,
                tau2: 2.105346,
                rate_scale: RateScale::Percent,
            }),
            "ecb_2024_09_02" => Some(CurveSpec {
                beta0: 0.503770,
                beta1: 3.051550,
                beta2: -1.578007,
                beta3: 6.467092,
                tau1: 1.710328,
                tau2: 12.217401,
                rate_scale: RateScale::Percent,
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0) || !(self.tau2 > 0.0) {
            return Err(Error::InvalidCurve(format!(
                "decay times must be positive, got tau1 = {}, tau2 = {}",
                self.tau1, self.tau2
            )));
        }
        Ok(())
    }
}

/// Instantaneous forward rate `f(0, t)` as an annualized decimal.
pub fn forward_rate(curve: &CurveSpec, t: f64) -> Result<f64> {
    curve.validate()?;
    let e1 = (-t / curve.tau1).exp();
    let e2 = (-t / curve.tau2).exp();
    let raw = curve.beta0
        + curve.beta1 * e1
        + t * (curve.beta2 / curve.tau1) * e1
        + t * (curve.beta3 / curve.tau2) * e2;
    Ok(raw * curve.rate_scale.factor())
}

/// Slope `d f(0, t) / dt` of the forward curve, decimal per year.
pub fn forward_rate_slope(curve: &CurveSpec, t: f64) -> Result<f64> {
    curve.validate()?;
    let e1 = (-t / curve.tau1).exp();
    let e2 = (-t / curve.tau2).exp();
    let raw = -(curve.beta1 / curve.tau1) * e1
        + (curve.beta2 / curve.tau1) * (1.0 - t / curve.tau1) * e1
        + (curve.beta3 / curve.tau2) * (1.0 - t / curve.tau2) * e2;
    Ok(raw * curve.rate_scale.factor())
}

// Antiderivative of the forward curve: F(t) = int_0^t f(0,s) ds, with F(0) = 0.
fn forward_antiderivative(curve: &CurveSpec, t: f64) -> f64 {
    let e1 = (-t / curve.tau1).exp();
    let e2 = (-t / curve.tau2).exp();
    let raw = curve.beta0 * t
        + curve.beta1 * curve.tau1 * (1.0 - e1)
        + curve.beta2 * (curve.tau1 - e1 * (t + curve.tau1))
        + curve.beta3 * (curve.tau2 - e2 * (t + curve.tau2));
    raw * curve.rate_scale.factor()
}

/// Forward-curve integral over `[t0, t1]`.
pub fn forward_integral(curve: &CurveSpec, t0: f64, t1: f64) -> Result<f64> {
    curve.validate()?;
    if t1 < t0 {
        return Err(Error::ReversedInterval { t0, t1 });
    }
    Ok(forward_antiderivative(curve, t1) - forward_antiderivative(curve, t0))
}

/// Market zero-coupon bond price `P(0, t) = exp(-int_0^t f(0,s) ds)`.
pub fn bond_price(curve: &CurveSpec, t: f64) -> Result<f64> {
    Ok((-forward_integral(curve, 0.0, t)?).exp())
}

/// Fitted shift `beta(t) = f(0,t) + omega^2 / (2 kappa^2) * (1 - e^{-kappa t})^2`.
pub fn beta_shift(curve: &CurveSpec, hw: &HwParams, t: f64) -> Result<f64> {
    let f = forward_rate(curve, t)?;
    let u = 1.0 - (-hw.kappa * t).exp();
    Ok(f + hw.omega * hw.omega / (2.0 * hw.kappa * hw.kappa) * u * u)
}

/// Closed-form integral of `beta` over `[t0, t1]`.
pub fn beta_integral(curve: &CurveSpec, hw: &HwParams, t0: f64, t1: f64) -> Result<f64> {
    let f_part = forward_integral(curve, t0, t1)?;
    // int (1 - e^{-k t})^2 dt = t + 2 e^{-k t} / k - e^{-2 k t} / (2 k)
    let k = hw.kappa;
    let g = |t: f64| t + 2.0 * (-k * t).exp() / k - (-2.0 * k * t).exp() / (2.0 * k);
    let convexity = hw.omega * hw.omega / (2.0 * k * k) * (g(t1) - g(t0));
    Ok(f_part + convexity)
}

/// The classical term-structure fitting function
/// `theta(t) = f'(0,t)/kappa + f(0,t) + omega^2/(2 kappa^2) (1 - e^{-2 kappa t})`.
///
/// Kept for completeness; the pricers use the `beta` decomposition instead.
pub fn theta_fit(curve: &CurveSpec, hw: &HwParams, t: f64) -> Result<f64> {
    let f = forward_rate(curve, t)?;
    let df = forward_rate_slope(curve, t)?;
    let k = hw.kappa;
    Ok(df / k + f + hw.omega * hw.omega / (2.0 * k * k) * (1.0 - (-2.0 * k * t).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ecb24() -> CurveSpec {
        CurveSpec::preset("ecb_2024_09_02").unwrap()
    }

    fn hw(kappa: f64, omega: f64) -> HwParams {
        HwParams {
            kappa,
            omega,
            rho: 0.0,
        }
    }

    /// Adaptive Simpson quadrature, used only as an independent oracle.
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64 + Copy>(
            f: F,
            a: f64,
            b: f64,
            fa: f64,
            fb: f64,
            fm: f64,
            whole: f64,
            tol: f64,
            depth: usize,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, fm, flm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, fb, frm, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let m = 0.5 * (a + b);
        let fm = f(m);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fb, fm, whole, tol, 40)
    }

    #[test]
    fn flat_curve_forward_is_constant() {
        let c = CurveSpec::preset("flat_5pct").unwrap();
        assert_eq!(forward_rate(&c, 3.0).unwrap(), 0.05);
    }

    #[test]
    fn ecb_curves_at_zero() {
        assert!((forward_rate(&ecb24(), 0.0).unwrap() - 0.0355532).abs() < 1e-12);
        let c20 = CurveSpec::preset("ecb_2020_09_02").unwrap();
        assert!((forward_rate(&c20, 0.0).unwrap() - (-0.00593208)).abs() < 1e-12);
    }

    #[test]
    fn invalid_tau_is_rejected() {
        let mut c = CurveSpec::flat(0.05);
        c.tau1 = 0.0;
        assert!(matches!(forward_rate(&c, 1.0), Err(Error::InvalidCurve(_))));
    }

    #[test]
    fn bond_price_basics() {
        let c = CurveSpec::flat(0.05);
        assert_eq!(bond_price(&c, 0.0).unwrap(), 1.0);
        assert!((bond_price(&c, 2.0).unwrap() - (-0.10f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn bond_price_matches_quadrature_on_ecb_curve() {
        let c = ecb24();
        // Frozen from the adaptive Simpson oracle (abs tol 1e-10).
        let quad = simpson(|s| forward_rate(&c, s).unwrap(), 0.0, 7.0, 1e-12);
        let frozen = 0.8596467627559568;
        assert!(
            ((-quad).exp() - frozen).abs() < 1e-9,
            "oracle {} vs frozen {frozen}",
            (-quad).exp()
        );
        assert!((bond_price(&c, 7.0).unwrap() - frozen).abs() < 1e-10);
    }

    #[test]
    fn bond_price_matches_quadrature_random_tenors() {
        let c = ecb24();
        for i in 0..20 {
            // deterministic scatter of tenors in (0, 10]
            let t = 10.0 * ((i as f64 * 0.37 + 0.11) % 1.0).max(0.01);
            let quad = simpson(|s| forward_rate(&c, s).unwrap(), 0.0, t, 1e-12);
            let closed = bond_price(&c, t).unwrap();
            assert!(
                (closed - (-quad).exp()).abs() < 1e-10 * closed,
                "t = {t}: closed {closed} vs quad {}",
                (-quad).exp()
            );
        }
    }

    #[test]
    fn beta_shift_cases() {
        let c = CurveSpec::flat(0.05);
        let p = hw(0.2, 0.03);
        assert_eq!(
            beta_shift(&c, &p, 0.0).unwrap(),
            forward_rate(&c, 0.0).unwrap()
        );
        let p0 = hw(0.7, 0.0);
        assert_eq!(
            beta_shift(&c, &p0, 2.5).unwrap(),
            forward_rate(&c, 2.5).unwrap()
        );
        let u = 1.0 - (-0.2f64).exp();
        let expect = 0.05 + 0.0009 / 0.08 * u * u;
        assert!((beta_shift(&c, &p, 1.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.0503696).abs() < 1e-7);
    }

    #[test]
    fn beta_shift_dominates_forward() {
        let c = ecb24();
        let p = hw(0.2, 0.03);
        for i in 0..50 {
            let t = i as f64 * 0.2;
            assert!(beta_shift(&c, &p, t).unwrap() >= forward_rate(&c, t).unwrap());
        }
    }

    #[test]
    fn beta_integral_cases() {
        let c = CurveSpec::flat(0.05);
        let p = hw(0.2, 0.0);
        assert_eq!(beta_integral(&c, &p, 1.3, 1.3).unwrap(), 0.0);
        assert!((beta_integral(&c, &p, 0.0, 1.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(matches!(
            beta_integral(&c, &p, 2.0, 1.0),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn beta_integral_matches_quadrature() {
        let c = ecb24();
        let p = hw(0.2, 0.03);
        let quad = simpson(|s| beta_shift(&c, &p, s).unwrap(), 0.0, 7.0, 1e-12);
        let closed = beta_integral(&c, &p, 0.0, 7.0).unwrap();
        assert!((closed - quad).abs() < 1e-10, "closed {closed} vs quad {quad}");
        assert!((closed - 0.1716405905253082).abs() < 1e-12);
    }

    #[test]
    fn beta_integral_additivity() {
        let c = ecb24();
        let p = hw(0.35, 0.02);
        for i in 0..30 {
            let a = (i as f64 * 0.23) % 4.0;
            let b = a + ((i as f64 * 0.61 + 0.05) % 3.0);
            let m = 0.5 * (a + b);
            let whole = beta_integral(&c, &p, a, b).unwrap();
            let split =
                beta_integral(&c, &p, a, m).unwrap() + beta_integral(&c, &p, m, b).unwrap();
            assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1.0));
        }
    }

    #[test]
    fn theta_fit_cases() {
        let flat = CurveSpec::flat(0.05);
        let p0 = hw(0.8, 0.0);
        for t in [0.25, 1.0, 6.0] {
            assert!((theta_fit(&flat, &p0, t).unwrap() - 0.05).abs() < 1e-15);
        }
        let p1 = hw(1.0, 0.03);
        let expect = 0.05 + 0.0009 / 2.0 * (1.0 - (-2.0f64).exp());
        assert!((theta_fit(&flat, &p1, 1.0).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.0503890).abs() < 1e-7);
    }

    #[test]
    fn theta_fit_matches_finite_difference_slope() {
        let c = ecb24();
        let p = hw(0.2, 0.03);
        let t = 2.0;
        let h = 1e-6;
        let df = (forward_rate(&c, t + h).unwrap() - forward_rate(&c, t - h).unwrap()) / (2.0 * h);
        let oracle = df / p.kappa
            + forward_rate(&c, t).unwrap()
            + p.omega * p.omega / (2.0 * p.kappa * p.kappa) * (1.0 - (-2.0 * p.kappa * t).exp());
        assert!((theta_fit(&c, &p, t).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn percent_and_prescaled_decimal_agree() {
        let pct = ecb24();
        let dec = CurveSpec {
            beta0: pct.beta0 / 100.0,
            beta1: pct.beta1 / 100.0,
            beta2: pct.beta2 / 100.0,
            beta3: pct.beta3 / 100.0,
            rate_scale: RateScale::Decimal,
            ..pct
        };
        for i in 0..40 {
            let t = i as f64 * 0.25;
            let a = forward_rate(&pct, t).unwrap();
            let b = forward_rate(&dec, t).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}
