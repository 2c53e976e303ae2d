use rayon::prelude::*;
use serde::Serialize;

use super::{run_hhl, LinearSystem, Result, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub r: u32,
    pub t0: f64,
    pub max_rel_error: Option<f64>,
    pub success_probability: f64,
    pub fidelity_4q: f64,
    pub clock_residual: f64,
}

fn row(sys: &LinearSystem, cfg: SolverConfig) -> Result<SweepRow> {
    let report = run_hhl(sys, &cfg)?;
    Ok(SweepRow {
        r: cfg.r,
        t0: cfg.t0,
        max_rel_error: report.max_rel_error,
        success_probability: report.success_probability,
        fidelity_4q: report.fidelity_4q,
        clock_residual: report.clock_residual,
    })
}

/// One run per `r`, in the order given. Runs execute in parallel.
pub fn sweep_r(sys: &LinearSystem, base: &SolverConfig, r_values: &[u32]) -> Result<Vec<SweepRow>> {
    r_values
        .par_iter()
        .map(|&r| row(sys, SolverConfig { r, ..base.clone() }))
        .collect()
}

/// One run per `t0`, in the order given. Runs execute in parallel.
pub fn sweep_t0(
    sys: &LinearSystem,
    base: &SolverConfig,
    t0_values: &[f64],
) -> Result<Vec<SweepRow>> {
    t0_values
        .par_iter()
        .map(|&t0| row(sys, SolverConfig { t0, ..base.clone() }))
        .collect()
}
