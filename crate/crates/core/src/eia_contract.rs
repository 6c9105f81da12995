//! Contract mathematics for cliquet-style equity-indexed annuities: clipped
//! periodic returns, the cumulative account, global caps/floors, the minimum
//! contract value, surrender penalties, and payoffs.
//!
//! All functions here are pure; the pricing engines own the dynamics.

use crate::error::{Error, Result};

/// Whether the policyholder may terminate early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surrender {
    None,
    AtMonitoringDates,
}

/// Cliquet EIA terms.
///
/// `global_floor` / `global_cap` accept `-inf` / `+inf` to disable the
/// corresponding clip. The surrender penalty is a per-date table
/// `penalty[m-1]` for monitoring dates `m = 1..M-1`; missing entries mean no
/// penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct EiaContract {
    /// Maturity in years.
    pub maturity: f64,
    /// Number of monitoring periods; dates are `m * maturity / n_monitoring`.
    pub n_monitoring: usize,
    /// Notional multiplier.
    pub notional: f64,
    /// 1 for gross-return (adds the premium back), 0 for net-return contracts.
    pub gross_switch: u8,
    /// Fraction of the premium guaranteed by the minimum contract value.
    pub mcv_fraction: f64,
    /// Guaranteed minimum annual rate.
    pub guaranteed_rate: f64,
    /// Participation rate applied to each periodic return.
    pub participation: f64,
    pub local_floor: f64,
    pub local_cap: f64,
    pub global_floor: f64,
    pub global_cap: f64,
    pub surrender: Surrender,
    /// Surrender penalty at date m (1-based); zero beyond the table.
    pub penalty: Vec<f64>,
}

impl EiaContract {
    /// Monitoring date `t_m = m T / M` in years.
    pub fn monitor_time(&self, m: usize) -> f64 {
        m as f64 * self.maturity / self.n_monitoring as f64
    }

    /// Penalty `xi(m)` at monitoring date m; zero once the table runs out.
    pub fn penalty_at(&self, m: usize) -> f64 {
        if m >= 1 {
            self.penalty.get(m - 1).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn surrender_allowed(&self) -> bool {
        self.surrender == Surrender::AtMonitoringDates
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.maturity > 0.0) {
            problems.push("maturity must be positive".to_string());
        }
        if self.n_monitoring == 0 {
            problems.push("n_monitoring must be at least 1".to_string());
        }
        if !(self.notional > 0.0) {
            problems.push("notional must be positive".to_string());
        }
        if self.gross_switch > 1 {
            problems.push("gross_switch must be 0 or 1".to_string());
        }
        if !(self.mcv_fraction >= 0.0) {
            problems.push("mcv_fraction must be nonnegative".to_string());
        }
        if !(self.guaranteed_rate >= 0.0) {
            problems.push("guaranteed_rate must be nonnegative".to_string());
        }
        if !(self.participation > 0.0) {
            problems.push("participation must be positive".to_string());
        }
        if !(self.local_floor <= self.local_cap) {
            problems.push("local floor must not exceed local cap".to_string());
        }
        if !(self.global_floor <= self.global_cap) {
            problems.push("global floor must not exceed global cap".to_string());
        }
        for (i, &xi) in self.penalty.iter().enumerate() {
            if !(0.0..1.0).contains(&xi) {
                problems.push(format!("penalty[{i}] must lie in [0, 1), got {xi}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }

    /// Named presets used throughout the benchmark tables.
    ///
    /// `cui_table1`: monthly-reset one-year net-return contract
    /// (T=1, M=12, H=0, gamma=1, F_l=0, F_g=0, C_l=8%, C_g=9 C_l).
    /// `kw_table3`: seven-year gross-return ratchet
    /// (T=7, M=7, H=1, gamma=0.9, g=3%, F_l=0, no global clips, C_l=16%);
    /// `kw_table3_cl20` is the same with C_l=20%.
    /// `table2`: monthly net-return contract with C_g=10.8 C_l.
    pub fn preset(name: &str) -> Option<Self> {
        let base = EiaContract {
            maturity: 1.0,
            n_monitoring: 12,
            notional: 1.0,
            gross_switch: 0,
            mcv_fraction: 1.0,
            guaranteed_rate: 0.03,
            participation: 1.0,
            local_floor: 0.0,
            local_cap: 0.08,
            global_floor: 0.0,
            global_cap: 9.0 * 0.08,
            surrender: Surrender::None,
            penalty: Vec::new(),
        };
        match name {
            "cui_table1" => Some(base),
            "table2" => Some(EiaContract {
                global_cap: 10.8 * 0.08,
                ..base
            }),
            "kw_table3" | "kw_table3_cl20" => {
                let local_cap = if name == "kw_table3" { 0.16 } else { 0.20 };
                Some(EiaContract {
                    maturity: 7.0,
                    n_monitoring: 7,
                    gross_switch: 1,
                    mcv_fraction: 0.9,
                    local_cap,
                    global_floor: f64::NEG_INFINITY,
                    global_cap: f64::INFINITY,
                    ..base
                })
            }
            _ => None,
        }
    }
}

/// Periodic credit `max(F_l, min(C_l, alpha * raw_return))`.
#[inline]
pub fn clipped_return(raw_return: f64, c: &EiaContract) -> f64 {
    (c.participation * raw_return).min(c.local_cap).max(c.local_floor)
}

/// Global account `X = K [H + max(F_g, min(C_g, z))]`; infinite clips are no-ops.
#[inline]
pub fn global_account(z: f64, c: &EiaContract) -> f64 {
    c.notional * (c.gross_switch as f64 + z.min(c.global_cap).max(c.global_floor))
}

/// Minimum contract value `G_m = gamma [(1+g)^{t_m} + 1 - H]`.
pub fn mcv(m: usize, c: &EiaContract) -> f64 {
    c.mcv_fraction
        * ((1.0 + c.guaranteed_rate).powf(c.monitor_time(m)) + 1.0 - c.gross_switch as f64)
}

/// Surrender payoff `max((1 - xi(m)) X_m, G_m)` at monitoring date m.
pub fn surrender_value(m: usize, z: f64, c: &EiaContract) -> Result<f64> {
    if !c.surrender_allowed() {
        return Err(Error::SurrenderDisabled);
    }
    if m < 1 || m >= c.n_monitoring {
        return Err(Error::InvalidConfig(format!(
            "surrender date m = {m} outside 1..{}",
            c.n_monitoring - 1
        )));
    }
    Ok(((1.0 - c.penalty_at(m)) * global_account(z, c)).max(mcv(m, c)))
}

/// Maturity payoff `max(X_M, G_M)`.
pub fn maturity_payoff(z: f64, c: &EiaContract) -> f64 {
    global_account(z, c).max(mcv(c.n_monitoring, c))
}
