//! Lattice valuation of the cliquet EIA: a grid of cumulative-return states
//! per monitoring date, normalized one-period equity meshes, and a backward
//! recursion that alternates global (return-grid x rate-node) value functions
//! at monitoring dates with local (rate-node x equity-mesh) problems inside
//! each period. Handles European, pure long/short surrender, and the mixed
//! formulation, and can extract optimal-surrender regions.

use crate::eia_contract::{
    clipped_return, global_account, maturity_payoff, mcv, surrender_value, EiaContract,
};
use crate::equity_mesh::{build_mesh, MeshStep};
use crate::error::{Error, Result};
use crate::rate_lattice::build_rate_tree;
use crate::term_structure::beta_shift;
use crate::uvhw_engine::{
    Engine, LatticeConfig, ModelParams, Objective, Op, PriceResult, SigmaCounters,
};
use std::time::Instant;

/// Surrender-handling mode of the valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No early termination; pure hold-to-maturity value.
    European,
    /// Policyholder exercises optimally against her own value function.
    Long,
    /// Writer's worst case: optimal exercise against the max-sigma value.
    Short,
    /// Max-sigma continuation along the long holder's exercise rule.
    Mixed,
}

/// Which side's surrender region to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExerciseSide {
    Long,
    Short,
}

/// Classification of one (z, r) sample of the surrender region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionClass {
    /// Continuation beats both exercise components.
    White,
    /// The guaranteed-rate component forces exercise, the account does not.
    Red,
    /// The account component forces exercise, the guarantee does not.
    Blue,
    /// Both components force exercise.
    Green,
}

impl RegionClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionClass::White => "white",
            RegionClass::Red => "red",
            RegionClass::Blue => "blue",
            RegionClass::Green => "green",
        }
    }
}

/// One sample of the exercise region.
#[derive(Debug, Clone, Copy)]
pub struct ExerciseRegionCell {
    pub z: f64,
    pub r: f64,
    pub class: RegionClass,
}

/// Uniform grid of cumulative-return states at one monitoring date.
#[derive(Debug, Clone)]
pub struct ZGrid {
    points: Vec<f64>,
}

impl ZGrid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bracketing index and upper weight, clamped at both ends.
    #[inline]
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let k = self.points.len();
        if k == 1 || z <= self.points[0] {
            return (0, 0.0);
        }
        if z >= self.points[k - 1] {
            return (k - 2, 1.0);
        }
        let step = (self.points[k - 1] - self.points[0]) / (k - 1) as f64;
        let mut lo = (((z - self.points[0]) / step) as usize).min(k - 2);
        while lo > 0 && self.points[lo] > z {
            lo -= 1;
        }
        while lo + 1 < k - 1 && self.points[lo + 1] < z {
            lo += 1;
        }
        (lo, (z - self.points[lo]) / (self.points[lo + 1] - self.points[lo]))
    }
}

/// Grid for the cumulative return at monitoring date `m`: `z_points` uniform
/// values spanning the attainable range `[m F_l, m C_l]`; a single point at
/// inception or when the range is degenerate.
pub fn build_z_grid(m: usize, c: &EiaContract, cfg: &LatticeConfig) -> Result<ZGrid> {
    if m == 0 {
        return Ok(ZGrid { points: vec![0.0] });
    }
    let lo = m as f64 * c.local_floor;
    let hi = m as f64 * c.local_cap;
    if lo == hi {
        return Ok(ZGrid { points: vec![lo] });
    }
    let n = cfg.z_points;
    if n < 2 {
        return Err(Error::InvalidConfig(
            "z_points must be at least 2 when the local floor and cap differ".into(),
        ));
    }
    let points = (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        })
        .collect();
    Ok(ZGrid { points })
}

/// Value function at one monitoring date over (rate node, return grid),
/// flattened as `[j * n_z + k]`.
#[derive(Debug, Clone)]
pub struct GlobalValue {
    pub m: usize,
    pub n_rate: usize,
    pub n_z: usize,
    pub values: Vec<f64>,
}

/// Terminal global values: the maturity payoff, identical across rate nodes.
pub fn seed_terminal(c: &EiaContract, cfg: &LatticeConfig) -> Result<GlobalValue> {
    c.validate()?;
    let m = c.n_monitoring;
    let z = build_z_grid(m, c, cfg)?;
    let n_rate = cfg.n_local_steps * m + 1;
    let payoffs: Vec<f64> = z.points().iter().map(|&zk| maturity_payoff(zk, c)).collect();
    let mut values = Vec::with_capacity(n_rate * z.len());
    for _ in 0..n_rate {
        values.extend_from_slice(&payoffs);
    }
    Ok(GlobalValue {
        m,
        n_rate,
        n_z: z.len(),
        values,
    })
}

/// Seeds one period's local terminal from the next date's global values:
/// `V_loc(R, S) = V_glo_next(Z_k + clip(alpha (S - 1)), R)`, linear in z.
/// Returns values flattened as `[(rate node j) x (mesh point i)]`.
pub fn link_local_terminal(
    v_glo_next: &GlobalValue,
    m: usize,
    k: usize,
    c: &EiaContract,
    cfg: &LatticeConfig,
    mesh_terminal: &MeshStep,
) -> Result<Vec<f64>> {
    let z_cur = build_z_grid(m, c, cfg)?;
    let z_next = build_z_grid(m + 1, c, cfg)?;
    if z_next.len() != v_glo_next.n_z {
        return Err(Error::InvalidConfig(
            "global value grid does not match the contract's z grid".into(),
        ));
    }
    let z_k = z_cur.points()[k];
    let mlen = mesh_terminal.len();
    let mut out = vec![0.0; v_glo_next.n_rate * mlen];
    for (i, &s) in mesh_terminal.prices.iter().enumerate() {
        let (kk, w) = z_next.locate(z_k + clipped_return(s - 1.0, c));
        for j in 0..v_glo_next.n_rate {
            let base = j * v_glo_next.n_z + kk;
            let v = if w == 0.0 {
                v_glo_next.values[base]
            } else {
                v_glo_next.values[base] + w * (v_glo_next.values[base + 1] - v_glo_next.values[base])
            };
            out[j * mlen + i] = v;
        }
    }
    Ok(out)
}

/// Rolls one period's local problem from its terminal values down to the
/// monitoring date, returning the continuation value per rate node at level
/// `m * N_L`. Exposed for oracle tests; the full sweep fuses all `k` slots.
pub fn local_backward(
    model: &ModelParams,
    c: &EiaContract,
    cfg: &LatticeConfig,
    m: usize,
    objective: Objective,
    terminal: &[f64],
) -> Result<Vec<f64>> {
    model.validate()?;
    cfg.validate(objective)?;
    let n_l = cfg.n_local_steps;
    let big_m = c.n_monitoring;
    let n_t = big_m * n_l;
    let dt = c.maturity / n_t as f64;
    let tree = build_rate_tree(&model.hw, n_t, dt)?;
    let mesh = build_mesh(1.0, model.mesh_sigma(objective), dt, cfg.mesh_refine, n_l)?;
    let engine = Engine::new(&tree, model)?;
    let grid = model.sigma_grid(objective, cfg.sigma_points);
    let op = match objective {
        Objective::LongMin => Op::Min,
        _ => Op::Max,
    };
    let top = (m + 1) * n_l;
    if terminal.len() != (top + 1) * mesh.step(n_l).len() {
        return Err(Error::InvalidConfig(format!(
            "terminal block must hold {} values, got {}",
            (top + 1) * mesh.step(n_l).len(),
            terminal.len()
        )));
    }
    let mut cur = terminal.to_vec();
    for h in (0..n_l).rev() {
        let n = m * n_l + h;
        let mut out = vec![0.0; (n + 1) * mesh.step(h).len()];
        engine.roll_step(
            n,
            mesh.step(h),
            mesh.step(h + 1),
            1,
            &grid,
            &cur,
            &mut out,
            op,
            None,
            None,
        );
        cur = out;
    }
    Ok(cur)
}

/// Applies the monitoring-date decision to continuation values `cont`
/// (flattened `[j * n_z + k]`). `european` passes them through; `long` and
/// `short` take the maximum with the surrender value; `mixed` keeps the
/// max-sigma continuation where the long holder would continue and pays the
/// exercise value where she would stop, which requires the long-side
/// continuations in `cont_long`.
pub fn monitor_update(
    cont: &[f64],
    cont_long: Option<&[f64]>,
    m: usize,
    z_grid: &ZGrid,
    c: &EiaContract,
    mode: Mode,
) -> Result<Vec<f64>> {
    let n_z = z_grid.len();
    if mode == Mode::European || !c.surrender_allowed() {
        return Ok(cont.to_vec());
    }
    let mut exercise = Vec::with_capacity(n_z);
    for &z in z_grid.points() {
        exercise.push(surrender_value(m, z, c)?);
    }
    match mode {
        Mode::European => unreachable!(),
        Mode::Long | Mode::Short => Ok(cont
            .iter()
            .enumerate()
            .map(|(idx, &v)| v.max(exercise[idx % n_z]))
            .collect()),
        Mode::Mixed => {
            let long = cont_long.ok_or_else(|| {
                Error::InvalidConfig("mixed update requires the long-side continuations".into())
            })?;
            if long.len() != cont.len() {
                return Err(Error::InvalidConfig(
                    "long companion has mismatched shape".into(),
                ));
            }
            Ok(cont
                .iter()
                .zip(long.iter())
                .enumerate()
                .map(|(idx, (&v, &vl))| {
                    let e = exercise[idx % n_z];
                    if vl > e {
                        v
                    } else {
                        e
                    }
                })
                .collect())
        }
    }
}

struct SweepOutput {
    price: f64,
    nodes: u64,
    /// continuation values `[j * n_z + k]` at each requested date
    captured: Vec<(usize, Vec<f64>)>,
    sigma_fraction: Option<f64>,
}

fn validate_run(
    c: &EiaContract,
    model: &ModelParams,
    cfg: &LatticeConfig,
    mode: Mode,
    objective: Objective,
) -> Result<()> {
    c.validate()?;
    model.validate()?;
    cfg.validate(objective)?;
    if mode != Mode::European && !c.surrender_allowed() {
        return Err(Error::InvalidConfig(
            "surrender modes need a contract that allows surrender".into(),
        ));
    }
    if mode == Mode::Mixed && matches!(objective, Objective::LongMin) {
        return Err(Error::InvalidConfig(
            "mixed valuation pairs with the max-sigma or fixed-sigma objective".into(),
        ));
    }
    Ok(())
}

fn run_sweep(
    c: &EiaContract,
    model: &ModelParams,
    cfg: &LatticeConfig,
    mode: Mode,
    objective: Objective,
    capture: &[usize],
) -> Result<SweepOutput> {
    validate_run(c, model, cfg, mode, objective)?;
    let big_m = c.n_monitoring;
    let n_l = cfg.n_local_steps;
    let n_t = big_m * n_l;
    let dt = c.maturity / n_t as f64;
    let tree = build_rate_tree(&model.hw, n_t, dt)?;
    let mesh = build_mesh(1.0, model.mesh_sigma(objective), dt, cfg.mesh_refine, n_l)?;
    let engine = Engine::new(&tree, model)?;
    let grid = model.sigma_grid(objective, cfg.sigma_points);
    let op_main = match (mode, objective) {
        (_, Objective::LongMin) => Op::Min,
        _ => Op::Max,
    };
    let mixed = mode == Mode::Mixed;
    let stats = SigmaCounters::new();
    let track = objective.is_uvm() && grid.len() > 2;

    let z_grids: Vec<ZGrid> = (0..=big_m)
        .map(|m| build_z_grid(m, c, cfg))
        .collect::<Result<_>>()?;

    let mut v_glo = seed_terminal(c, cfg)?;
    let mut v_glo_long = mixed.then(|| v_glo.clone());
    let mut nodes = 0u64;
    let mut captured = Vec::new();

    for m in (0..big_m).rev() {
        let k_cur = z_grids[m].len();
        let mesh_top = mesh.step(n_l);
        let top_nodes = (m + 1) * n_l + 1;

        // local terminal over all k slots at once: [(j, i, k)]
        let seed_block = |v: &GlobalValue| -> Vec<f64> {
            let mlen = mesh_top.len();
            let mut block = vec![0.0; top_nodes * mlen * k_cur];
            for (i, &s) in mesh_top.prices.iter().enumerate() {
                let inc = clipped_return(s - 1.0, c);
                for (k, &zk) in z_grids[m].points().iter().enumerate() {
                    let (kk, w) = z_grids[m + 1].locate(zk + inc);
                    for j in 0..top_nodes {
                        let base = j * v.n_z + kk;
                        let val = if w == 0.0 {
                            v.values[base]
                        } else {
                            v.values[base] + w * (v.values[base + 1] - v.values[base])
                        };
                        block[(j * mlen + i) * k_cur + k] = val;
                    }
                }
            }
            block
        };

        let mut cur_main = seed_block(&v_glo);
        let mut cur_long = v_glo_long.as_ref().map(&seed_block);

        for h in (0..n_l).rev() {
            let n = m * n_l + h;
            let mesh_cur = mesh.step(h);
            let mesh_next = mesh.step(h + 1);
            let mut out_main = vec![0.0; (n + 1) * mesh_cur.len() * k_cur];
            nodes += out_main.len() as u64;
            match cur_long.as_mut() {
                None => {
                    engine.roll_step(
                        n,
                        mesh_cur,
                        mesh_next,
                        k_cur,
                        &grid,
                        &cur_main,
                        &mut out_main,
                        op_main,
                        None,
                        track.then_some(&stats),
                    );
                    cur_main = out_main;
                }
                Some(l) => {
                    let mut out_long = vec![0.0; (n + 1) * mesh_cur.len() * k_cur];
                    engine.roll_step(
                        n,
                        mesh_cur,
                        mesh_next,
                        k_cur,
                        &grid,
                        &cur_main,
                        &mut out_main,
                        op_main,
                        Some((l.as_slice(), out_long.as_mut_slice(), Op::Min)),
                        track.then_some(&stats),
                    );
                    cur_main = out_main;
                    *l = out_long;
                }
            }
        }

        // the h = 0 mesh is the singleton {1}: cur blocks are [j * k] already
        if capture.contains(&m) {
            captured.push((m, cur_main.clone()));
        }

        let n_rate = m * n_l + 1;
        if m >= 1 {
            let updated = monitor_update(&cur_main, cur_long.as_deref(), m, &z_grids[m], c, mode)?;
            v_glo = GlobalValue {
                m,
                n_rate,
                n_z: k_cur,
                values: updated,
            };
            if let Some(l) = cur_long {
                let updated_long = monitor_update(&l, None, m, &z_grids[m], c, Mode::Long)?;
                v_glo_long = Some(GlobalValue {
                    m,
                    n_rate,
                    n_z: k_cur,
                    values: updated_long,
                });
            }
        } else {
            v_glo = GlobalValue {
                m: 0,
                n_rate,
                n_z: k_cur,
                values: cur_main,
            };
            v_glo_long = None;
        }
    }

    captured.sort_by_key(|(m, _)| *m);
    Ok(SweepOutput {
        price: v_glo.values[0],
        nodes,
        captured,
        sigma_fraction: track.then(|| stats.fraction()),
    })
}

/// Values the contract by the full backward sweep and returns the root value
/// with run diagnostics.
pub fn price_eia(
    c: &EiaContract,
    model: &ModelParams,
    cfg: &LatticeConfig,
    mode: Mode,
    objective: Objective,
) -> Result<PriceResult> {
    let start = Instant::now();
    let out = run_sweep(c, model, cfg, mode, objective, &[])?;
    let n_t = c.n_monitoring * cfg.n_local_steps;
    Ok(PriceResult {
        price: out.price,
        objective,
        n_time_steps: n_t,
        dt: c.maturity / n_t as f64,
        runtime_secs: start.elapsed().as_secs_f64(),
        node_evaluations: out.nodes,
        sigma_interior_fraction: out.sigma_fraction,
        std_error: None,
    })
}

/// Classifies surrender optimality over a (z, r) sample grid at monitoring
/// date `m`. The side picks the value function: the long holder's (min-sigma)
/// or the writer's worst case (max-sigma). Rates map onto the lattice through
/// `R = (r - beta(t_m)) / omega` with linear interpolation between the
/// bracketing tree nodes.
pub fn exercise_region(
    c: &EiaContract,
    model: &ModelParams,
    cfg: &LatticeConfig,
    m: usize,
    z_samples: &[f64],
    r_samples: &[f64],
    side: ExerciseSide,
) -> Result<Vec<ExerciseRegionCell>> {
    if !c.surrender_allowed() {
        return Err(Error::SurrenderDisabled);
    }
    if model.hw.omega == 0.0 {
        return Err(Error::DegenerateRateAxis);
    }
    if m < 1 || m >= c.n_monitoring {
        return Err(Error::InvalidConfig(format!(
            "region date m = {m} outside 1..{}",
            c.n_monitoring - 1
        )));
    }
    let (mode, objective) = match side {
        ExerciseSide::Long => (Mode::Long, Objective::LongMin),
        ExerciseSide::Short => (Mode::Short, Objective::ShortMax),
    };
    let out = run_sweep(c, model, cfg, mode, objective, &[m])?;
    let cont = &out.captured.iter().find(|(mm, _)| *mm == m).unwrap().1;
    let z_grid = build_z_grid(m, c, cfg)?;
    region_from_continuation(cont, &z_grid, c, model, cfg, m, z_samples, r_samples)
}

#[allow(clippy::too_many_arguments)]
fn region_from_continuation(
    cont: &[f64],
    z_grid: &ZGrid,
    c: &EiaContract,
    model: &ModelParams,
    cfg: &LatticeConfig,
    m: usize,
    z_samples: &[f64],
    r_samples: &[f64],
) -> Result<Vec<ExerciseRegionCell>> {
    let n_t = c.n_monitoring * cfg.n_local_steps;
    let dt = c.maturity / n_t as f64;
    let level = m * cfg.n_local_steps;
    let n_z = z_grid.len();
    let beta_m = beta_shift(&model.curve, &model.hw, c.monitor_time(m))?;
    let sq = dt.sqrt();
    let node_val = |j: usize| (2.0 * j as f64 - level as f64) * sq;

    let mut cells = Vec::with_capacity(z_samples.len() * r_samples.len());
    for &z in z_samples {
        let (k, wz) = z_grid.locate(z);
        let e_account = (1.0 - c.penalty_at(m)) * global_account(z, c);
        let e_guarantee = mcv(m, c);
        for &r in r_samples {
            let factor = (r - beta_m) / model.hw.omega;
            let (j_lo, wj) = if level == 0 || factor <= node_val(0) {
                (0, 0.0)
            } else if factor >= node_val(level) {
                (level - 1, 1.0)
            } else {
                let j = ((factor - node_val(0)) / (2.0 * sq)).floor() as usize;
                let j = j.min(level - 1);
                let w = (factor - node_val(j)) / (node_val(j + 1) - node_val(j));
                (j, w)
            };
            let at = |j: usize, kk: usize| cont[j * n_z + kk];
            let interp_j = |j: usize| {
                if wz == 0.0 {
                    at(j, k)
                } else {
                    at(j, k) + wz * (at(j, k + 1) - at(j, k))
                }
            };
            let cvalue = if wj == 0.0 {
                interp_j(j_lo)
            } else {
                interp_j(j_lo) + wj * (interp_j(j_lo + 1) - interp_j(j_lo))
            };
            let class = if cvalue > e_account && cvalue > e_guarantee {
                RegionClass::White
            } else if e_guarantee >= cvalue && cvalue > e_account {
                RegionClass::Red
            } else if e_account >= cvalue && cvalue > e_guarantee {
                RegionClass::Blue
            } else {
                RegionClass::Green
            };
            cells.push(ExerciseRegionCell { z, r, class });
        }
    }
    Ok(cells)
}
