use std::io::Write;

use crate::error::{HopfieldError, Result};
use crate::harness::fmt_real;
use crate::theory::{capacity_lower_bound, dense_capacity_lower_bound, CapacityEstimate, CapacityParams, DenseCapacityEstimate};

/// Pattern norm m as a function of d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    Fixed(f64),
    SqrtD,
}

impl NormSpec {
    pub fn at(&self, d: usize) -> f64 {
        match *self {
            NormSpec::Fixed(m) => m,
            NormSpec::SqrtD => (d as f64).sqrt(),
        }
    }
}

/// Sphere radius R, either absolute or as a multiple of m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSpec {
    Absolute(f64),
    RelativeToNorm(f64),
}

impl RadiusSpec {
    pub fn at(&self, m: f64) -> f64 {
        match *self {
            RadiusSpec::Absolute(r) => r,
            RadiusSpec::RelativeToNorm(k) => k * m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Feasible(CapacityEstimate),
    /// `reason` is a short machine-readable code.
    Infeasible { reason: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub params: CapacityParams,
    pub sparse: CellOutcome,
    pub dense: Option<DenseCapacityEstimate>,
}

impl CapacityRow {
    pub fn is_feasible(&self) -> bool {
        matches!(self.sparse, CellOutcome::Feasible(_))
    }
}

/// Sparse and dense capacity lower bounds over a (d, β) grid.
///
/// Per-cell infeasibility is reported in the row; invalid parameters abort.
pub fn capacity_bound_table(
    dims: &[usize],
    betas: &[f64],
    norm: NormSpec,
    radius: RadiusSpec,
    delta: f64,
    p_fail: f64,
) -> Result<Vec<CapacityRow>> {
    if dims.is_empty() || betas.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    let mut rows = Vec::with_capacity(dims.len() * betas.len());
    for &d in dims {
        for &beta in betas {
            let m = norm.at(d);
            let params = CapacityParams {
                d,
                m,
                beta,
                p_fail,
                radius: radius.at(m),
                delta,
            };
            let sparse = match capacity_lower_bound(params) {
                Ok(est) => CellOutcome::Feasible(est),
                Err(HopfieldError::InfeasibleBound(message)) => CellOutcome::Infeasible {
                    reason: "infeasible",
                    message,
                },
                Err(HopfieldError::NoConvergence(message)) => CellOutcome::Infeasible {
                    reason: "no-convergence",
                    message,
                },
                Err(e) => return Err(e),
            };
            let dense = dense_capacity_lower_bound(params).ok();
            rows.push(CapacityRow { params, sparse, dense });
        }
    }
    Ok(rows)
}

pub const CAPACITY_HEADER: &str = "d,beta,m,p_fail,radius,delta,status,a,b,c,m_bound,log_m_bound,residual,iterations,dense_a,dense_c,dense_m_bound,dense_log_m_bound";

pub fn write_capacity_csv<W: Write>(mut out: W, rows: &[CapacityRow]) -> Result<()> {
    writeln!(out, "# sparse-hopfield capacity lower bounds")?;
    writeln!(out, "{CAPACITY_HEADER}")?;
    let na = || "n/a".to_string();
    for r in rows {
        let p = &r.params;
        let sparse = match &r.sparse {
            CellOutcome::Feasible(e) => [
                "ok".to_string(),
                fmt_real(e.a),
                fmt_real(e.b),
                fmt_real(e.c),
                fmt_real(e.m_bound),
                fmt_real(e.log_m_bound),
                fmt_real(e.residual),
                e.iterations.to_string(),
            ],
            CellOutcome::Infeasible { reason, .. } => {
                [reason.to_string(), na(), fmt_real(p.b()), na(), na(), na(), na(), na()]
            }
        };
        let dense = match &r.dense {
            Some(e) => [fmt_real(e.a), fmt_real(e.c), fmt_real(e.m_bound), fmt_real(e.log_m_bound)],
            None => [na(), na(), na(), na()],
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.d,
            fmt_real(p.beta),
            fmt_real(p.m),
            fmt_real(p.p_fail),
            fmt_real(p.radius),
            fmt_real(p.delta),
            sparse.join(","),
            dense.join(",")
        )?;
    }
    Ok(())
}
