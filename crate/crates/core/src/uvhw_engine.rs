//! Backward-induction engine on the (rate tree x equity mesh) product:
//! four-successor expansion of each node, discounted expectation with linear
//! interpolation on the next mesh, per-node volatility optimization by grid
//! search, and European / early-exercise drivers for vanilla payoffs.
//!
//! The per-period EIA recursion reuses the same kernel through
//! [`Engine::roll_step`], which rolls whole value blocks (rate node x mesh
//! point x state slot) one step back in time.

use crate::equity_mesh::{build_mesh, MeshStep};
use crate::error::{Error, Result};
use crate::rate_lattice::{build_rate_tree, RateTree};
use crate::term_structure::{beta_integral, CurveSpec, HwParams};
use rayon::prelude::*;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

/// Volatility values that tie within this tolerance resolve to the smaller one.
pub(crate) const SIGMA_TIE_TOL: f64 = 1e-14;

/// Which volatility operator the valuation applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Worst case for the buyer: minimize over admissible volatilities.
    LongMin,
    /// Worst case for the writer: maximize over admissible volatilities.
    ShortMax,
    /// Plain Black-Scholes-Hull-White valuation at a fixed volatility.
    FixedSigma(f64),
}

impl Objective {
    pub fn is_uvm(&self) -> bool {
        !matches!(self, Objective::FixedSigma(_))
    }
}

/// Early-exercise formulation for vanilla options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EarlyObjective {
    /// Buyer's robust price: min-sigma continuation, buyer's optimal stopping.
    LongMin,
    /// Writer's worst case over both volatility and stopping.
    ShortMax,
    /// Max-sigma continuation evaluated along the buyer's (long) stopping rule.
    Mixed,
    /// Bermudan price at a fixed volatility.
    FixedSigma(f64),
}

/// Market and model inputs shared by every pricer.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub s0: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Volatility used by fixed-sigma (BS-HW) runs when the CLI selects them.
    pub sigma_fixed: Option<f64>,
    /// Continuous dividend yield.
    pub eta: f64,
    pub hw: HwParams,
    pub curve: CurveSpec,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.hw.validate()?;
        self.curve.validate()?;
        if !(self.s0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "s0 must be positive, got {}",
                self.s0
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max) {
            return Err(Error::InvalidConfig(format!(
                "volatility bounds must satisfy 0 < sigma_min <= sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )));
        }
        if !(self.eta >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dividend yield must be nonnegative, got {}",
                self.eta
            )));
        }
        Ok(())
    }

    /// Mesh half-width volatility: the fixed sigma in BS-HW mode, otherwise
    /// the upper volatility bound.
    pub fn mesh_sigma(&self, objective: Objective) -> f64 {
        match objective {
            Objective::FixedSigma(s) => s,
            _ => self.sigma_max,
        }
    }

    /// Uniform search grid; both interval endpoints are always members.
    pub fn sigma_grid(&self, objective: Objective, n_sigma: usize) -> Vec<f64> {
        match objective {
            Objective::FixedSigma(s) => vec![s],
            _ => {
                let n = n_sigma.max(2);
                let lo = self.sigma_min;
                let hi = self.sigma_max;
                (0..n)
                    .map(|q| {
                        if q == 0 {
                            lo
                        } else if q == n - 1 {
                            hi
                        } else {
                            lo + (hi - lo) * q as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Discretization knobs: steps per monitoring period, mesh refinement,
/// cumulative-return grid size, and volatility grid size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeConfig {
    /// Time steps per monitoring period (per year for vanilla payoffs).
    pub n_local_steps: usize,
    /// Mesh points per binomial node count.
    pub mesh_refine: usize,
    /// Grid size for the cumulative-return state.
    pub z_points: usize,
    /// Volatility grid size for the min/max search.
    pub sigma_points: usize,
}

impl LatticeConfig {
    pub fn validate(&self, objective: Objective) -> Result<()> {
        if self.n_local_steps < 1 || self.z_points < 1 {
            return Err(Error::InvalidConfig(
                "n_local_steps and z_points must be at least 1".into(),
            ));
        }
        if self.mesh_refine < 2 {
            return Err(Error::InvalidConfig("mesh_refine must be at least 2".into()));
        }
        if objective.is_uvm() && self.sigma_points < 2 {
            return Err(Error::InvalidConfig(
                "sigma_points must be at least 2 for uncertain-volatility objectives".into(),
            ));
        }
        Ok(())
    }
}

/// Priced output with run diagnostics.
#[derive(Debug, Clone)]
pub struct PriceResult {
    pub price: f64,
    pub objective: Objective,
    pub n_time_steps: usize,
    pub dt: f64,
    pub runtime_secs: f64,
    pub node_evaluations: u64,
    /// Fraction of optimized slots whose best sigma was strictly inside the
    /// grid; only populated for UVM objectives with more than two grid points.
    pub sigma_interior_fraction: Option<f64>,
    pub std_error: Option<f64>,
}

/// The four equity successors of one (rate node, equity state) pair, with the
/// branch discounts and the rate-up probability.
#[derive(Debug, Clone, Copy)]
pub struct SuccessorQuad {
    pub s_up_up: f64,
    pub s_up_dw: f64,
    pub s_dw_up: f64,
    pub s_dw_dw: f64,
    pub d_up: f64,
    pub d_dw: f64,
    pub j_up: usize,
    pub j_dw: usize,
    pub prob_up: f64,
}

pub(crate) struct SigmaCounters {
    pub interior: AtomicU64,
    pub total: AtomicU64,
}

impl SigmaCounters {
    pub fn new() -> Self {
        SigmaCounters {
            interior: AtomicU64::new(0),
            total: AtomicU64::new(0),
        }
    }

    pub fn fraction(&self) -> f64 {
        let t = self.total.load(Ordering::Relaxed);
        if t == 0 {
            0.0
        } else {
            self.interior.load(Ordering::Relaxed) as f64 / t as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    Min,
    Max,
}

#[inline]
fn improves(op: Op, candidate: f64, best: f64) -> bool {
    match op {
        Op::Min => candidate < best - SIGMA_TIE_TOL,
        Op::Max => candidate > best + SIGMA_TIE_TOL,
    }
}

/// Precomputed per-lattice quantities: the rate tree, the beta integrals over
/// every global step, and the conditional-Brownian constants (the step size is
/// uniform, so they are step-independent).
pub(crate) struct Engine<'a> {
    pub tree: &'a RateTree,
    pub dt: f64,
    beta_ints: Vec<f64>,
    omega: f64,
    eta: f64,
    exp_k: f64,
    cond_slope: f64,
    cond_sd: f64,
}

impl<'a> Engine<'a> {
    pub fn new(tree: &'a RateTree, model: &ModelParams) -> Result<Self> {
        let dt = tree.dt;
        let hw = &model.hw;
        let mut beta_ints = Vec::with_capacity(tree.n_steps);
        for n in 0..tree.n_steps {
            beta_ints.push(beta_integral(
                &model.curve,
                hw,
                n as f64 * dt,
                (n + 1) as f64 * dt,
            )?);
        }
        let cond = crate::hw_math::conditional_w(hw, 0.0, 0.0, dt)?;
        Ok(Engine {
            tree,
            dt,
            beta_ints,
            omega: hw.omega,
            eta: model.eta,
            exp_k: (-hw.kappa * dt).exp(),
            cond_slope: crate::hw_math::conditional_w_slope(hw, dt),
            cond_sd: cond.sd(),
        })
    }

    pub fn beta_int(&self, n: usize) -> f64 {
        self.beta_ints[n]
    }

    /// Rolls one or two value families from global level `n + 1` back to `n`.
    ///
    /// Value blocks are flattened as `[(rate node j) x (mesh point i) x (slot
    /// k)]` with `k` fastest. Each family pairs its own value block with a
    /// min or max volatility operator; the successor geometry (and therefore
    /// most of the per-node work) is shared between families.
    #[allow(clippy::too_many_arguments)]
    pub fn roll_step(
        &self,
        n: usize,
        mesh_cur: &MeshStep,
        mesh_next: &MeshStep,
        k_count: usize,
        sigma_grid: &[f64],
        next_a: &[f64],
        out_a: &mut [f64],
        op_a: Op,
        second: Option<(&[f64], &mut [f64], Op)>,
        stats: Option<&SigmaCounters>,
    ) {
        let mlen_c = mesh_cur.len();
        let mlen_n = mesh_next.len();
        debug_assert_eq!(out_a.len(), (n + 1) * mlen_c * k_count);
        debug_assert_eq!(next_a.len(), (n + 2) * mlen_n * k_count);
        debug_assert!(mlen_n >= 2);
        let chunk = mlen_c * k_count;

        match second {
            None => {
                out_a
                    .par_chunks_mut(chunk)
                    .enumerate()
                    .for_each(|(j, out_row)| {
                        self.roll_row(
                            n,
                            j,
                            mesh_cur,
                            mesh_next,
                            k_count,
                            sigma_grid,
                            &mut [(next_a, out_row, op_a)],
                            stats,
                        );
                    });
            }
            Some((next_b, out_b, op_b)) => {
                debug_assert_eq!(next_b.len(), next_a.len());
                debug_assert_eq!(out_b.len(), out_a.len());
                out_a
                    .par_chunks_mut(chunk)
                    .zip(out_b.par_chunks_mut(chunk))
                    .enumerate()
                    .for_each(|(j, (row_a, row_b))| {
                        self.roll_row(
                            n,
                            j,
                            mesh_cur,
                            mesh_next,
                            k_count,
                            sigma_grid,
                            &mut [(next_a, row_a, op_a), (next_b, row_b, op_b)],
                            stats,
                        );
                    });
            }
        }
    }

    /// One rate node's worth of backward induction.
    #[allow(clippy::too_many_arguments)]
    fn roll_row(
        &self,
        n: usize,
        j: usize,
        mesh_cur: &MeshStep,
        mesh_next: &MeshStep,
        k_count: usize,
        sigma_grid: &[f64],
        families: &mut [(&[f64], &mut [f64], Op)],
        stats: Option<&SigmaCounters>,
    ) {
        let succ = self.tree.successor_unchecked(n, j);
        let r_j = self.tree.value(n, j);
        let r_up = self.tree.value(n + 1, succ.j_up);
        let r_dw = self.tree.value(n + 1, succ.j_dw);
        let beta = self.beta_ints[n];
        let half_w_dt = 0.5 * self.omega * self.dt;

        let a_up = half_w_dt * (r_up + r_j) + beta;
        let a_dw = half_w_dt * (r_dw + r_j) + beta;
        let d_up = (-a_up).exp();
        let d_dw = (-a_dw).exp();
        let mu_up = self.cond_slope * (r_up - r_j * self.exp_k);
        let mu_dw = self.cond_slope * (r_dw - r_j * self.exp_k);

        let p_up = succ.prob_up;
        let w_up = 0.5 * p_up * d_up;
        let w_dw = 0.5 * (1.0 - p_up) * d_dw;

        // per sigma: log-factors and factors of the four successors
        let n_sig = sigma_grid.len();
        let mut lnf = vec![[0.0f64; 4]; n_sig];
        let mut fac = vec![[0.0f64; 4]; n_sig];
        for (q, &sigma) in sigma_grid.iter().enumerate() {
            let drift = -(self.eta + 0.5 * sigma * sigma) * self.dt;
            let l = [
                a_up + drift + sigma * (mu_up + self.cond_sd),
                a_up + drift + sigma * (mu_up - self.cond_sd),
                a_dw + drift + sigma * (mu_dw + self.cond_sd),
                a_dw + drift + sigma * (mu_dw - self.cond_sd),
            ];
            lnf[q] = l;
            fac[q] = [l[0].exp(), l[1].exp(), l[2].exp(), l[3].exp()];
        }

        let mlen_n = mesh_next.len();
        let row_up = succ.j_up * mlen_n * k_count;
        let row_dw = succ.j_dw * mlen_n * k_count;

        let n_fam = families.len();
        let mut best = vec![0.0f64; n_fam * k_count];
        let mut best_idx = vec![0usize; n_fam * k_count];
        let mut interior = 0u64;
        let mut total = 0u64;

        for i in 0..mesh_cur.len() {
            let s_i = mesh_cur.prices[i];
            let ls_i = mesh_cur.logs[i];
            for q in 0..n_sig {
                // brackets for the four successor prices, shared by families
                let b0 = mesh_next.bracket(s_i * fac[q][0], ls_i + lnf[q][0]);
                let b1 = mesh_next.bracket(s_i * fac[q][1], ls_i + lnf[q][1]);
                let b2 = mesh_next.bracket(s_i * fac[q][2], ls_i + lnf[q][2]);
                let b3 = mesh_next.bracket(s_i * fac[q][3], ls_i + lnf[q][3]);
                for (f, (next, _, op)) in families.iter().enumerate() {
                    let up0 = &next[row_up + b0.0 * k_count..];
                    let up1 = &next[row_up + b1.0 * k_count..];
                    let dw2 = &next[row_dw + b2.0 * k_count..];
                    let dw3 = &next[row_dw + b3.0 * k_count..];
                    for k in 0..k_count {
                        let f0 = up0[k] + b0.1 * (up0[k + k_count] - up0[k]);
                        let f1 = up1[k] + b1.1 * (up1[k + k_count] - up1[k]);
                        let f2 = dw2[k] + b2.1 * (dw2[k + k_count] - dw2[k]);
                        let f3 = dw3[k] + b3.1 * (dw3[k + k_count] - dw3[k]);
                        let e = w_up * (f0 + f1) + w_dw * (f2 + f3);
                        let slot = f * k_count + k;
                        if q == 0 || improves(*op, e, best[slot]) {
                            best[slot] = e;
                            best_idx[slot] = q;
                        }
                    }
                }
            }
            for (f, (_, out, _)) in families.iter_mut().enumerate() {
                for k in 0..k_count {
                    let slot = f * k_count + k;
                    out[i * k_count + k] = best[slot];
                    total += 1;
                    if best_idx[slot] > 0 && best_idx[slot] + 1 < n_sig {
                        interior += 1;
                    }
                }
            }
        }

        if let Some(c) = stats {
            c.interior.fetch_add(interior, Ordering::Relaxed);
            c.total.fetch_add(total, Ordering::Relaxed);
        }
    }
}

/// The four successor states of `(n, j, s)` for one volatility, with branch
/// discounts: the up/down Brownian displacement is the conditional mean plus
/// or minus one conditional standard deviation, and the rate integral uses
/// the trapezoid across the step.
pub fn successor_quad(
    model: &ModelParams,
    tree: &RateTree,
    n: usize,
    j: usize,
    s: f64,
    sigma: f64,
) -> Result<SuccessorQuad> {
    if !(s > 0.0) {
        return Err(Error::InvalidConfig(format!("equity state must be positive, got {s}")));
    }
    let succ = tree.successors(n, j)?;
    let dt = tree.dt;
    let hw = &model.hw;
    let beta = beta_integral(&model.curve, hw, n as f64 * dt, (n + 1) as f64 * dt)?;
    let r_j = tree.value(n, j);
    let r_up = tree.value(n + 1, succ.j_up);
    let r_dw = tree.value(n + 1, succ.j_dw);
    let a_up = 0.5 * hw.omega * dt * (r_up + r_j) + beta;
    let a_dw = 0.5 * hw.omega * dt * (r_dw + r_j) + beta;
    let drift = -(model.eta + 0.5 * sigma * sigma) * dt;
    let cond_up = crate::hw_math::conditional_w(hw, r_j, r_up, dt)?;
    let cond_dw = crate::hw_math::conditional_w(hw, r_j, r_dw, dt)?;
    let sd = cond_up.sd();
    Ok(SuccessorQuad {
        s_up_up: s * (a_up + drift + sigma * (cond_up.mu_w_given_r + sd)).exp(),
        s_up_dw: s * (a_up + drift + sigma * (cond_up.mu_w_given_r - sd)).exp(),
        s_dw_up: s * (a_dw + drift + sigma * (cond_dw.mu_w_given_r + sd)).exp(),
        s_dw_dw: s * (a_dw + drift + sigma * (cond_dw.mu_w_given_r - sd)).exp(),
        d_up: (-a_up).exp(),
        d_dw: (-a_dw).exp(),
        j_up: succ.j_up,
        j_dw: succ.j_dw,
        prob_up: succ.prob_up,
    })
}

/// Discounted one-step expectation
/// `1/2 p d_up [f(uu) + f(ud)] + 1/2 (1 - p) d_dw [f(du) + f(dd)]`,
/// where `f` interpolates the supplied next-step values.
pub fn expected_step(
    quad: &SuccessorQuad,
    mesh_next: &MeshStep,
    values_up: &[f64],
    values_dw: &[f64],
) -> f64 {
    let f_uu = mesh_next.interp(values_up, quad.s_up_up);
    let f_ud = mesh_next.interp(values_up, quad.s_up_dw);
    let f_du = mesh_next.interp(values_dw, quad.s_dw_up);
    let f_dd = mesh_next.interp(values_dw, quad.s_dw_dw);
    0.5 * quad.prob_up * quad.d_up * (f_uu + f_ud)
        + 0.5 * (1.0 - quad.prob_up) * quad.d_dw * (f_du + f_dd)
}

/// Grid search of the one-step objective over the admissible volatilities.
/// `values_next` is the full `(n + 2) x mesh` block at level `n + 1`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_sigma(
    model: &ModelParams,
    tree: &RateTree,
    n: usize,
    j: usize,
    s: f64,
    mesh_next: &MeshStep,
    values_next: &[f64],
    objective: Objective,
    n_sigma: usize,
) -> Result<(f64, f64)> {
    let grid = model.sigma_grid(objective, n_sigma);
    let op = match objective {
        Objective::LongMin => Op::Min,
        Objective::ShortMax => Op::Max,
        Objective::FixedSigma(_) => Op::Max,
    };
    let mlen = mesh_next.len();
    let mut best = f64::NAN;
    let mut best_sigma = grid[0];
    for (q, &sigma) in grid.iter().enumerate() {
        let quad = successor_quad(model, tree, n, j, s, sigma)?;
        let vals_up = &values_next[quad.j_up * mlen..(quad.j_up + 1) * mlen];
        let vals_dw = &values_next[quad.j_dw * mlen..(quad.j_dw + 1) * mlen];
        let e = expected_step(&quad, mesh_next, vals_up, vals_dw);
        if q == 0 || improves(op, e, best) {
            best = e;
            best_sigma = sigma;
        }
    }
    Ok((best_sigma, best))
}

/// Exercise opportunities for a vanilla early-exercise contract: dates (which
/// must sit on the lattice) and the exercise value as a function of the date
/// and the equity level.
pub struct ExerciseSchedule<'a> {
    pub dates: &'a [f64],
    pub value: &'a (dyn Fn(f64, f64) -> f64 + Sync),
}

fn date_to_step(date: f64, dt: f64, n_t: usize) -> Result<usize> {
    let idx = (date / dt).round();
    if (idx * dt - date).abs() > 1e-9 * date.abs().max(1.0) {
        return Err(Error::ExerciseDateOffLattice(date));
    }
    let idx = idx as usize;
    if idx == 0 || idx > n_t {
        return Err(Error::ExerciseDateOffLattice(date));
    }
    Ok(idx)
}

/// European vanilla valuation: terminal payoff of the equity level only.
/// `cfg.n_local_steps` counts lattice steps per year.
pub fn price_european(
    model: &ModelParams,
    payoff: &(dyn Fn(f64) -> f64 + Sync),
    maturity: f64,
    cfg: &LatticeConfig,
    objective: Objective,
) -> Result<PriceResult> {
    let schedule = ExerciseSchedule {
        dates: &[],
        value: &|_, _| 0.0,
    };
    let early = match objective {
        Objective::LongMin => EarlyObjective::LongMin,
        Objective::ShortMax => EarlyObjective::ShortMax,
        Objective::FixedSigma(s) => EarlyObjective::FixedSigma(s),
    };
    price_early_exercise(model, payoff, &schedule, maturity, cfg, early)
}

/// Early-exercise vanilla valuation under the four formulations.
pub fn price_early_exercise(
    model: &ModelParams,
    payoff: &(dyn Fn(f64) -> f64 + Sync),
    exercise: &ExerciseSchedule<'_>,
    maturity: f64,
    cfg: &LatticeConfig,
    objective: EarlyObjective,
) -> Result<PriceResult> {
    let start = Instant::now();
    model.validate()?;
    if !(maturity > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "maturity must be positive, got {maturity}"
        )));
    }
    let (main_obj, companion) = match objective {
        EarlyObjective::LongMin => (Objective::LongMin, None),
        EarlyObjective::ShortMax => (Objective::ShortMax, None),
        EarlyObjective::Mixed => (Objective::ShortMax, Some(Objective::LongMin)),
        EarlyObjective::FixedSigma(s) => (Objective::FixedSigma(s), None),
    };
    cfg.validate(main_obj)?;

    let n_t = ((cfg.n_local_steps as f64 * maturity).round() as usize).max(1);
    let dt = maturity / n_t as f64;
    let tree = build_rate_tree(&model.hw, n_t, dt)?;
    let mesh = build_mesh(model.s0, model.mesh_sigma(main_obj), dt, cfg.mesh_refine, n_t)?;
    let engine = Engine::new(&tree, model)?;
    let grid = model.sigma_grid(main_obj, cfg.sigma_points);

    let mut exercise_steps = vec![usize::MAX; exercise.dates.len()];
    for (d, &date) in exercise.dates.iter().enumerate() {
        exercise_steps[d] = date_to_step(date, dt, n_t)?;
    }

    let op_main = if matches!(main_obj, Objective::LongMin) {
        Op::Min
    } else {
        Op::Max
    };
    let stats = SigmaCounters::new();
    let track_stats = main_obj.is_uvm() && grid.len() > 2;

    // terminal values, identical across rate nodes
    let terminal: Vec<f64> = mesh.step(n_t).prices.iter().map(|&s| payoff(s)).collect();
    let mut main: Vec<f64> = (0..=n_t).flat_map(|_| terminal.iter().copied()).collect();
    let mut comp: Option<Vec<f64>> = companion.map(|_| main.clone());
    if exercise_steps.contains(&n_t) {
        let date = n_t as f64 * dt;
        let prices = &mesh.step(n_t).prices;
        for block in main.chunks_mut(prices.len()) {
            for (i, v) in block.iter_mut().enumerate() {
                *v = v.max((exercise.value)(date, prices[i]));
            }
        }
        if let Some(c) = comp.as_mut() {
            c.copy_from_slice(&main);
        }
    }

    let mut nodes = 0u64;
    for n in (0..n_t).rev() {
        let mesh_cur = mesh.step(n);
        let mesh_next = mesh.step(n + 1);
        let mut out_main = vec![0.0f64; (n + 1) * mesh_cur.len()];
        nodes += out_main.len() as u64;
        match comp.as_mut() {
            None => {
                engine.roll_step(
                    n,
                    mesh_cur,
                    mesh_next,
                    1,
                    &grid,
                    &main,
                    &mut out_main,
                    op_main,
                    None,
                    track_stats.then_some(&stats),
                );
                main = out_main;
            }
            Some(c) => {
                let mut out_comp = vec![0.0f64; (n + 1) * mesh_cur.len()];
                engine.roll_step(
                    n,
                    mesh_cur,
                    mesh_next,
                    1,
                    &grid,
                    &main,
                    &mut out_main,
                    op_main,
                    Some((c.as_slice(), out_comp.as_mut_slice(), Op::Min)),
                    track_stats.then_some(&stats),
                );
                main = out_main;
                *c = out_comp;
            }
        }

        if n > 0 && exercise_steps.contains(&n) {
            let date = n as f64 * dt;
            let prices = &mesh.step(n).prices;
            let mlen = prices.len();
            match comp.as_mut() {
                None => {
                    for j in 0..=n {
                        for i in 0..mlen {
                            let e = (exercise.value)(date, prices[i]);
                            let v = &mut main[j * mlen + i];
                            if e > *v {
                                *v = e;
                            }
                        }
                    }
                }
                Some(c) => {
                    // the long value drives the exercise indicator; where the
                    // long holder stops, both value families take the payoff
                    for j in 0..=n {
                        for i in 0..mlen {
                            let e = (exercise.value)(date, prices[i]);
                            let idx = j * mlen + i;
                            if c[idx] <= e {
                                main[idx] = e;
                                c[idx] = e;
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(PriceResult {
        price: main[0],
        objective: main_obj,
        n_time_steps: n_t,
        dt,
        runtime_secs: start.elapsed().as_secs_f64(),
        node_evaluations: nodes,
        sigma_interior_fraction: track_stats.then(|| stats.fraction()),
        std_error: None,
    })
}
