//! Exact-simulation Monte Carlo pricer for the fixed-volatility case, plus a
//! Longstaff-Schwartz treatment of the surrender option.
//!
//! Steps sample the joint Gaussian law of the rate factor, its time integral
//! and the equity Brownian increment through the closed-form moments and a
//! 3x3 Cholesky factor, so the only discretization left is the monitoring
//! frequency itself. Paths use per-path ChaCha substreams with normals drawn
//! by inverse CDF, which makes every estimate reproducible bit for bit for a
//! given seed regardless of thread count.

use crate::eia_contract::{clipped_return, maturity_payoff, surrender_value, EiaContract};
use crate::error::{Error, Result};
use crate::hw_math::{chol3, joint_moments};
use crate::term_structure::beta_integral;
use crate::uvhw_engine::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Simulated market states on the monitoring/sub-step grid.
///
/// States are stored step-major: `states[n][i]` is `(R, I, S)` of path `i`
/// at time `n * dt`, with `I` the running integral of the rate factor.
pub struct SimPaths {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub sigma: f64,
    pub seed: u64,
    states: Vec<Vec<[f64; 3]>>,
    /// cumulative integral of beta out to each step time
    beta_cum: Vec<f64>,
}

impl SimPaths {
    /// `(R, I, S)` of path `i` at step `n`.
    pub fn state(&self, n: usize, i: usize) -> [f64; 3] {
        self.states[n][i]
    }

    pub fn states_at(&self, n: usize) -> &[[f64; 3]] {
        &self.states[n]
    }

    /// `int_0^{t_n} beta(s) ds`.
    pub fn beta_cum(&self, n: usize) -> f64 {
        self.beta_cum[n]
    }

    /// Pathwise stochastic discount factor from step `n0` to `n1`:
    /// `exp(-omega (I_{n1} - I_{n0}) - int beta)`.
    pub fn discount(&self, omega: f64, n0: usize, n1: usize, i: usize) -> f64 {
        let di = self.states[n1][i][1] - self.states[n0][i][1];
        (-omega * di - (self.beta_cum[n1] - self.beta_cum[n0])).exp()
    }
}

/// Monte Carlo estimate with its sampling error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub ci95_halfwidth: f64,
    pub n_paths: usize,
}

impl McEstimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n as f64 - 1.0);
        let se = (var / n as f64).sqrt();
        McEstimate {
            price: mean,
            std_error: se,
            ci95_halfwidth: 1.959964 * se,
            n_paths: n,
        }
    }
}

/// Deterministically ordered pairwise summation.
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

/// Inverse standard normal CDF (Wichura's AS 241, double precision).
pub fn norm_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(r, &SPLIT1_NUM) / poly(r, &SPLIT1_DEN);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(r, &SPLIT2_NUM) / poly(r, &SPLIT2_DEN)
    } else {
        let r = r - 5.0;
        poly(r, &SPLIT3_NUM) / poly(r, &SPLIT3_DEN)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

fn poly(x: f64, c: &[f64; 8]) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

const SPLIT1_NUM: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const SPLIT1_DEN: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const SPLIT2_NUM: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const SPLIT2_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const SPLIT3_NUM: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const SPLIT3_DEN: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

/// Simulates `(R, I, S)` paths with exact joint Gaussian steps.
///
/// Each monitoring period is cut into `n_steps_per_period` exact sub-steps
/// (one is already exact for European payoffs; more only refine where the
/// paths are reused by the scenario-cloud pricer). Path `i` draws from
/// ChaCha substream `i`, so any prefix of the path set is reproducible.
pub fn simulate(
    model: &ModelParams,
    c: &EiaContract,
    sigma: f64,
    n_paths: usize,
    n_steps_per_period: usize,
    seed: u64,
) -> Result<SimPaths> {
    model.validate()?;
    c.validate()?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "simulation volatility must be positive, got {sigma}"
        )));
    }
    if n_paths == 0 || n_steps_per_period == 0 {
        return Err(Error::InvalidConfig(
            "need at least one path and one step per period".into(),
        ));
    }
    let n_steps = c.n_monitoring * n_steps_per_period;
    let dt = c.maturity / n_steps as f64;
    let hw = &model.hw;

    // the rate factor only matters when it feeds the discount or the equity
    // drift (omega > 0) or correlates with the equity driver (rho != 0)
    let rate_active = hw.omega != 0.0 || hw.rho != 0.0;

    let mom = joint_moments(hw, 0.0, dt)?;
    let chol = chol3(&mom.covariance())?;
    let decay = (-hw.kappa * dt).exp();
    let drift_c = -(model.eta + 0.5 * sigma * sigma) * dt;

    let mut beta_cum = Vec::with_capacity(n_steps + 1);
    beta_cum.push(0.0);
    for n in 0..n_steps {
        let b = beta_integral(&model.curve, hw, n as f64 * dt, (n + 1) as f64 * dt)?;
        beta_cum.push(beta_cum[n] + b);
    }

    let mut per_path: Vec<Vec<[f64; 3]>> = Vec::new();
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let mut draw = |active: bool| -> f64 {
                if active {
                    let u: f64 = rng.random();
                    norm_inv_cdf(u.max(f64::MIN_POSITIVE).min(1.0 - 1e-16))
                } else {
                    0.0
                }
            };
            let mut r = 0.0f64;
            let mut int_r = 0.0f64;
            let mut ln_s = model.s0.ln();
            let mut states = Vec::with_capacity(n_steps + 1);
            states.push([r, int_r, model.s0]);
            for n in 0..n_steps {
                let g = [draw(rate_active), draw(rate_active), draw(true)];
                let mu_r = r * (decay - 1.0);
                let mu_i = -mu_r / hw.kappa;
                let d_r = mu_r + chol[0][0] * g[0];
                let d_i = mu_i + chol[1][0] * g[0] + chol[1][1] * g[1];
                let d_w = chol[2][0] * g[0] + chol[2][1] * g[1] + chol[2][2] * g[2];
                let beta_n = beta_cum[n + 1] - beta_cum[n];
                ln_s += hw.omega * d_i + beta_n + drift_c + sigma * d_w;
                r += d_r;
                int_r += d_i;
                states.push([r, int_r, ln_s.exp()]);
            }
            states
        })
        .collect_into_vec(&mut per_path);

    let mut states: Vec<Vec<[f64; 3]>> = (0..=n_steps)
        .map(|_| Vec::with_capacity(n_paths))
        .collect();
    for path in per_path {
        for (n, s) in path.into_iter().enumerate() {
            states[n].push(s);
        }
    }

    Ok(SimPaths {
        n_paths,
        n_steps,
        dt,
        sigma,
        seed,
        states,
        beta_cum,
    })
}

/// Cumulative clipped return of path `i` at each monitoring date.
fn z_path(paths: &SimPaths, c: &EiaContract, sub: usize, i: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(c.n_monitoring + 1);
    z.push(0.0);
    let mut prev_s = paths.state(0, i)[2];
    for m in 1..=c.n_monitoring {
        let s = paths.state(m * sub, i)[2];
        let acc = z[m - 1] + clipped_return(s / prev_s - 1.0, c);
        z.push(acc);
        prev_s = s;
    }
    z
}

/// European contract value by plain Monte Carlo over the supplied paths.
pub fn price_european_mc_on(paths: &SimPaths, c: &EiaContract, model: &ModelParams) -> McEstimate {
    let sub = paths.n_steps / c.n_monitoring;
    let omega = model.hw.omega;
    let samples: Vec<f64> = (0..paths.n_paths)
        .into_par_iter()
        .map(|i| {
            let z = z_path(paths, c, sub, i);
            let mut disc = 1.0;
            for m in 1..=c.n_monitoring {
                disc *= paths.discount(omega, (m - 1) * sub, m * sub, i);
            }
            disc * maturity_payoff(z[c.n_monitoring], c)
        })
        .collect();
    McEstimate::from_samples(&samples)
}

/// Simulates and prices the European contract at a fixed volatility.
pub fn price_european_mc(
    c: &EiaContract,
    model: &ModelParams,
    sigma: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let paths = simulate(model, c, sigma, n_paths, 1, seed)?;
    Ok(price_european_mc_on(&paths, c, model))
}

const BASIS: usize = 6;

/// Longstaff-Schwartz lower-bound price of the surrender contract: backward
/// regression of realized continuation values on `{1, z, r, z^2, r^2, zr}`
/// over all paths, exercise where the fitted continuation falls below the
/// surrender value, then average the realized cash flows.
pub fn price_surrender_ls(
    c: &EiaContract,
    model: &ModelParams,
    sigma: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !c.surrender_allowed() {
        return Err(Error::SurrenderDisabled);
    }
    if n_paths < 10 * BASIS {
        return Err(Error::TooFewPaths {
            required: 10 * BASIS,
            actual: n_paths,
        });
    }
    let paths = simulate(model, c, sigma, n_paths, 1, seed)?;
    Ok(ls_on_paths(&paths, c, model))
}

/// Longstaff-Schwartz over already-simulated paths.
pub fn ls_on_paths(paths: &SimPaths, c: &EiaContract, model: &ModelParams) -> McEstimate {
    let big_m = c.n_monitoring;
    let sub = paths.n_steps / big_m;
    let omega = model.hw.omega;
    let n = paths.n_paths;

    let zs: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| z_path(paths, c, sub, i))
        .collect();

    // realized values, rolled backward from maturity
    let mut values: Vec<f64> = (0..n).map(|i| maturity_payoff(zs[i][big_m], c)).collect();

    for m in (1..big_m).rev() {
        for (i, v) in values.iter_mut().enumerate() {
            *v *= paths.discount(omega, m * sub, (m + 1) * sub, i);
        }
        let t_m = c.monitor_time(m);
        let beta_m = crate::term_structure::beta_shift(&model.curve, &model.hw, t_m)
            .expect("validated curve");
        let mut gram = [[0.0f64; BASIS]; BASIS];
        let mut rhs = [0.0f64; BASIS];
        let mut feats: Vec<[f64; BASIS]> = Vec::with_capacity(n);
        for i in 0..n {
            let z = zs[i][m];
            let r = omega * paths.state(m * sub, i)[0] + beta_m;
            let phi = [1.0, z, r, z * z, r * r, z * r];
            for a in 0..BASIS {
                for b in a..BASIS {
                    gram[a][b] += phi[a] * phi[b];
                }
                rhs[a] += phi[a] * values[i];
            }
            feats.push(phi);
        }
        for a in 0..BASIS {
            for b in 0..a {
                gram[a][b] = gram[b][a];
            }
        }
        let coef = solve_spd::<BASIS>(gram, rhs);
        for i in 0..n {
            let fitted: f64 = (0..BASIS).map(|a| coef[a] * feats[i][a]).sum();
            let exercise = surrender_value(m, zs[i][m], c).expect("surrender allowed");
            if exercise >= fitted {
                values[i] = exercise;
            }
        }
    }
    for (i, v) in values.iter_mut().enumerate() {
        *v *= paths.discount(omega, 0, sub, i);
    }
    McEstimate::from_samples(&values)
}

/// Cholesky solve of a small SPD system, with jitter escalation on failure.
fn solve_spd<const N: usize>(mut a: [[f64; N]; N], b: [f64; N]) -> [f64; N] {
    let scale = (0..N).map(|i| a[i][i]).fold(0.0f64, f64::max).max(1e-300);
    let mut jitter = 1e-12 * scale;
    for _ in 0..6 {
        let mut l = a;
        if cholesky_in_place::<N>(&mut l) {
            let mut y = b;
            for i in 0..N {
                for k in 0..i {
                    y[i] -= l[i][k] * y[k];
                }
                y[i] /= l[i][i];
            }
            let mut x = y;
            for i in (0..N).rev() {
                for k in i + 1..N {
                    x[i] -= l[k][i] * x[k];
                }
                x[i] /= l[i][i];
            }
            return x;
        }
        for row in a.iter_mut().enumerate() {
            row.1[row.0] += jitter;
        }
        jitter *= 100.0;
    }
    [0.0; N]
}

fn cholesky_in_place<const N: usize>(a: &mut [[f64; N]; N]) -> bool {
    for i in 0..N {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                a[i][i] = s.sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    for i in 0..N {
        for j in i + 1..N {
            a[i][j] = 0.0;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term_structure::{CurveSpec, HwParams};

    fn kw() -> EiaContract {
        EiaContract::preset("kw_table3").unwrap()
    }

    fn model(rho: f64, omega: f64) -> ModelParams {
        ModelParams {
            s0: 100.0,
            sigma_min: 0.20,
            sigma_max: 0.30,
            sigma_fixed: Some(0.25),
            eta: 0.0,
            hw: HwParams { kappa: 0.2, omega, rho },
            curve: CurveSpec::preset("ecb_2024_09_02").unwrap(),
        }
    }

    #[test]
    fn inverse_cdf_matches_known_quantiles() {
        assert!(norm_inv_cdf(0.5).abs() < 1e-15);
        assert!((norm_inv_cdf(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((norm_inv_cdf(0.0013498980316300933) - (-3.0)).abs() < 1e-10);
        for &p in &[1e-12, 0.001, 0.3, 0.7, 0.999] {
            let x = norm_inv_cdf(p);
            let cdf = 0.5 * erfc_approx(-x / std::f64::consts::SQRT_2);
            assert!((cdf - p).abs() < 2e-7, "p = {p}, x = {x}, cdf = {cdf}");
        }
    }

    fn erfc_approx(x: f64) -> f64 {
        // Numerical Recipes erfc, |eps| < 1.2e-7; enough for a sanity loop
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let ans = t
            * (-z * z - 1.26551223
                + t * (1.00002368
                    + t * (0.37409196
                        + t * (0.09678418
                            + t * (-0.18628806
                                + t * (0.27886807
                                    + t * (-1.13520398
                                        + t * (1.48851587
                                            + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
        if x >= 0.0 {
            ans
        } else {
            2.0 - ans
        }
    }

    #[test]
    fn degenerate_rate_factor_stays_zero() {
        let c = kw();
        let mp = model(0.0, 0.0);
        let paths = simulate(&mp, &c, 0.25, 64, 2, 7).unwrap();
        for n in 0..=paths.n_steps {
            for i in 0..paths.n_paths {
                let s = paths.state(n, i);
                assert_eq!(s[0], 0.0);
                assert_eq!(s[1], 0.0);
            }
        }
    }

    #[test]
    fn factor_mean_and_martingale() {
        let c = kw();
        let mp = model(-0.3, 0.03);
        let n_paths = 200_000;
        let paths = simulate(&mp, &c, 0.25, n_paths, 1, 11).unwrap();
        let m1: Vec<f64> = (0..n_paths).map(|i| paths.state(1, i)[0]).collect();
        let mean_r = pairwise_sum(&m1) / n_paths as f64;
        let var_r = joint_moments(&mp.hw, 0.0, 1.0).unwrap().var_r;
        let se = (var_r / n_paths as f64).sqrt();
        assert!(mean_r.abs() < 3.0 * se, "mean {mean_r} vs se {se}");

        // discounted terminal index over s0 has unit mean
        let last = paths.n_steps;
        let samples: Vec<f64> = (0..n_paths)
            .map(|i| paths.discount(mp.hw.omega, 0, last, i) * paths.state(last, i)[2] / mp.s0)
            .collect();
        let est = McEstimate::from_samples(&samples);
        assert!(
            (est.price - 1.0).abs() < 3.0 * est.std_error,
            "martingale mean {} +- {}",
            est.price,
            est.std_error
        );
    }

    #[test]
    fn z_respects_bounds_pathwise() {
        let c = kw();
        let mp = model(0.3, 0.03);
        let paths = simulate(&mp, &c, 0.3, 500, 1, 3).unwrap();
        for i in 0..paths.n_paths {
            let z = z_path(&paths, &c, 1, i);
            for (m, &zm) in z.iter().enumerate() {
                assert!(zm >= m as f64 * c.local_floor - 1e-12);
                assert!(zm <= m as f64 * c.local_cap + 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let c = kw();
        let mp = model(-0.3, 0.03);
        let a = price_european_mc(&c, &mp, 0.25, 20_000, 42).unwrap();
        let b = price_european_mc(&c, &mp, 0.25, 20_000, 42).unwrap();
        assert_eq!(a.price, b.price);
        assert_eq!(a.std_error, b.std_error);
        let c2 = price_european_mc(&c, &mp, 0.25, 20_000, 43).unwrap();
        assert_ne!(a.price, c2.price);
    }

    #[test]
    fn degenerate_volatility_limit_is_deterministic_payoff() {
        let mut c = kw();
        c.mcv_fraction = 0.0;
        let mut mp = model(0.0, 0.0);
        mp.curve = CurveSpec::flat(0.05);
        let est = price_european_mc(&c, &mp, 1e-8, 4_000, 9).unwrap();
        // deterministic annual return e^r - 1 clipped at the cap
        let ret = (0.05f64).exp() - 1.0;
        let clip = ret.min(c.local_cap).max(c.local_floor);
        let expect = (-0.05f64 * 7.0).exp() * (1.0 + 7.0 * clip);
        assert!(est.std_error < 1e-6);
        assert!(
            (est.price - expect).abs() < 1e-4,
            "mc {} vs deterministic {expect}",
            est.price
        );
    }

    #[test]
    fn ls_without_binding_exercise_matches_european() {
        // surrender allowed but the penalty confiscates nearly the whole
        // account and the MCV is void: exercise never fires
        let mut c = kw();
        c.surrender = crate::eia_contract::Surrender::AtMonitoringDates;
        c.penalty = vec![0.999999; 6];
        c.mcv_fraction = 0.0;
        let mp = model(-0.3, 0.03);
        let paths = simulate(&mp, &c, 0.25, 30_000, 1, 5).unwrap();
        let eu = price_european_mc_on(&paths, &c, &mp);
        let ls = ls_on_paths(&paths, &c, &mp);
        assert!(
            (eu.price - ls.price).abs() < 1e-12 * eu.price,
            "eu {} vs ls {}",
            eu.price,
            ls.price
        );
    }

    #[test]
    fn ls_bounds_european_from_above() {
        let mut c = kw();
        c.surrender = crate::eia_contract::Surrender::AtMonitoringDates;
        let mp = model(0.0, 0.03);
        let paths = simulate(&mp, &c, 0.25, 50_000, 1, 13).unwrap();
        let eu = price_european_mc_on(&paths, &c, &mp);
        let ls = ls_on_paths(&paths, &c, &mp);
        assert!(
            ls.price >= eu.price - 2.0 * (ls.std_error + eu.std_error),
            "ls {} vs eu {}",
            ls.price,
            eu.price
        );
    }

    #[test]
    fn too_few_paths_for_regression() {
        let mut c = kw();
        c.surrender = crate::eia_contract::Surrender::AtMonitoringDates;
        let mp = model(0.0, 0.03);
        assert!(matches!(
            price_surrender_ls(&c, &mp, 0.25, 12, 1),
            Err(Error::TooFewPaths { .. })
        ));
    }
}
