//! Evaluators for the analytic retrieval-error bounds, the well-separation
//! condition and the Lambert-W memory-capacity lower bound.
//!
//! All bounds are evaluated exactly as written, including regimes where they
//! are loose or vacuous; the caller decides what to make of the numbers.

use std::f64::consts::{E, LN_2};

use crate::error::{HopfieldError, Result};
use crate::hopfield::{self, Mode, PatternStore, QueryState};

/// Relative tolerance on the identity a·C + C·ln C − b = 0.
pub const LINEAR_LOG_RTOL: f64 = 1e-8;

/// Iteration cap for the self-consistent capacity fixed point.
pub const CAPACITY_MAX_ITERS: usize = 200;

// ---------------------------------------------------------------------------
// Lambert W
// ---------------------------------------------------------------------------

/// Principal branch W₀ of the Lambert W function: the w ≥ −1 with w·eʷ = x.
///
/// Halley iteration. The starting point comes from the branch-point series
/// near −1/e, from ln(1 + x) on the middle range and from ln x − ln ln x
/// above e.
pub fn lambert_w0(x: f64) -> Result<f64> {
    let branch = -1.0 / E;
    if x.is_nan() || x < branch {
        return Err(HopfieldError::Domain(format!(
            "W0 is defined for x >= -1/e, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }

    let mut w = if x < -0.25 {
        let p = (2.0 * (E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x <= E {
        x.ln_1p()
    } else {
        let l = x.ln();
        l - l.ln()
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 || f == 0.0 {
            break;
        }
        let dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// W₀(e^l) without forming e^l, so arguments like exp(a + ln b) with a large
/// exponent do not overflow.
pub fn lambert_w0_exp(ln_x: f64) -> Result<f64> {
    if ln_x.is_nan() {
        return Err(HopfieldError::Domain("log-argument is NaN".into()));
    }
    if ln_x <= 500.0 {
        return lambert_w0(ln_x.exp());
    }
    if ln_x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    // w + ln w = l with w > 0; Newton from the asymptotic guess
    let mut w = ln_x - ln_x.ln();
    for _ in 0..64 {
        let g = w + w.ln() - ln_x;
        let dw = g / (1.0 + 1.0 / w);
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    Ok(w)
}

/// Solves a·c + c·ln c − b = 0 as c = b / W₀(exp(a + ln b)).
pub fn solve_linear_log(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(HopfieldError::InvalidParameter(format!(
            "a·C + C·ln C = b needs finite a and b > 0, got a = {a}, b = {b}"
        )));
    }
    Ok(b / lambert_w0_exp(a + b.ln())?)
}

/// Residual a·c + c·ln c − b.
pub fn linear_log_residual(a: f64, b: f64, c: f64) -> f64 {
    a * c + c * c.ln() - b
}

// ---------------------------------------------------------------------------
// Retrieval-error bounds
// ---------------------------------------------------------------------------

fn check_mu(store: &PatternStore, x: &QueryState, mu: usize) -> Result<()> {
    store.check_query(x)?;
    store.check_index(mu)
}

/// κ of sparsemax(βΞᵀx) together with the κ-th largest raw overlap [Ξᵀx]_(κ).
fn kappa_and_order_stat(store: &PatternStore, x: &QueryState, beta: f64) -> Result<(usize, f64, f64)> {
    let overlaps = store.overlaps(x)?;
    let p = hopfield::weights(store, x, beta, Mode::Sparse)?;
    let mut sorted: Vec<f64> = overlaps.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok((p.kappa, sorted[p.kappa - 1], sorted[0]))
}

/// m + √d·m·β·[κ(max_ν⟨ξ_ν,x⟩ − [Ξᵀx]_(κ)) + 1/β].
pub fn sparse_error_bound(store: &PatternStore, x: &QueryState, beta: f64, mu: usize) -> Result<f64> {
    check_mu(store, x, mu)?;
    let (kappa, z_kappa, z_max) = kappa_and_order_stat(store, x, beta)?;
    let m = store.max_norm();
    let root_d = (store.dim() as f64).sqrt();
    Ok(m + root_d * m * beta * (kappa as f64 * (z_max - z_kappa) + 1.0 / beta))
}

fn max_cross_overlap(store: &PatternStore, mu: usize) -> f64 {
    let xi = store.xi();
    (0..store.len())
        .filter(|&nu| nu != mu)
        .map(|nu| xi.column(mu).dot(&xi.column(nu)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// 2m(M−1)·exp{−β(⟨ξ_μ,x⟩ − max_{ν≠μ}⟨ξ_μ,ξ_ν⟩)}.
///
/// With a single pattern the bound is reported as 0 (both dynamics are exact).
pub fn dense_exp_error_bound(store: &PatternStore, x: &QueryState, beta: f64, mu: usize) -> Result<f64> {
    check_mu(store, x, mu)?;
    let count = store.len();
    if count < 2 {
        return Ok(0.0);
    }
    let gap = store.xi().column(mu).dot(x.vector()) - max_cross_overlap(store, mu);
    let m = store.max_norm();
    Ok(2.0 * m * (count - 1) as f64 * (-beta * gap).exp())
}

/// Whether the dense exponential bound is guaranteed for this query.
///
/// The dense error is at most 2m(1 − p_μ) ≤ 2m(M−1)·exp(−βΔ̃_μ), which is no
/// larger than [`dense_exp_error_bound`] once
/// max_{ν≠μ}⟨x,ξ_ν⟩ ≤ max_{ν≠μ}⟨ξ_μ,ξ_ν⟩. This holds at x = ξ_μ and fails for
/// some queries inside S_μ, where the printed bound can be exceeded.
pub fn dense_bound_applies(store: &PatternStore, x: &QueryState, mu: usize) -> Result<bool> {
    check_mu(store, x, mu)?;
    if store.len() < 2 {
        return Ok(true);
    }
    let overlaps = store.overlaps(x)?;
    let query_cross = (0..store.len())
        .filter(|&nu| nu != mu)
        .map(|nu| overlaps[nu])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(query_cross <= max_cross_overlap(store, mu))
}

/// 2m(M−1)·exp{−β(Δ_μ − 2m·max[‖x−ξ_μ‖, ‖x−x*‖])} for a caller-supplied
/// fixed point x*.
pub fn exp_suppressed_bound(
    store: &PatternStore,
    x: &QueryState,
    x_star: &QueryState,
    beta: f64,
    mu: usize,
) -> Result<f64> {
    check_mu(store, x, mu)?;
    store.check_query(x_star)?;
    let count = store.len();
    if count < 2 {
        return Ok(0.0);
    }
    let xi_mu = store.pattern(mu);
    let delta_mu = xi_mu.dot(&xi_mu) - max_cross_overlap(store, mu);
    let spread = (x.vector() - &xi_mu).norm().max((x.vector() - x_star.vector()).norm());
    let m = store.max_norm();
    Ok(2.0 * m * (count - 1) as f64 * (-beta * (delta_mu - 2.0 * m * spread)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundReport {
    pub sparse_bound: f64,
    pub dense_exp_bound: f64,
    /// See [`dense_bound_applies`].
    pub dense_bound_applies: bool,
    /// ‖T(x) − ξ_μ‖ after one sparse step.
    pub actual_sparse: f64,
    /// ‖T_dense(x) − ξ_μ‖ after one dense step.
    pub actual_dense: f64,
    /// δ = actual_dense − actual_sparse.
    pub delta_gap: f64,
    pub kappa: usize,
    /// [Ξᵀx]_(κ).
    pub z_kappa: f64,
}

pub fn error_bound_report(store: &PatternStore, x: &QueryState, beta: f64, mu: usize) -> Result<ErrorBoundReport> {
    check_mu(store, x, mu)?;
    let xi_mu = store.pattern(mu);
    let actual_sparse = (hopfield::sparse_step(store, x, beta)?.vector() - &xi_mu).norm();
    let actual_dense = (hopfield::dense_step(store, x, beta)?.vector() - &xi_mu).norm();
    let (kappa, z_kappa, _) = kappa_and_order_stat(store, x, beta)?;
    Ok(ErrorBoundReport {
        sparse_bound: sparse_error_bound(store, x, beta, mu)?,
        dense_exp_bound: dense_exp_error_bound(store, x, beta, mu)?,
        dense_bound_applies: dense_bound_applies(store, x, mu)?,
        actual_sparse,
        actual_dense,
        delta_gap: actual_dense - actual_sparse,
        kappa,
        z_kappa,
    })
}

// ---------------------------------------------------------------------------
// Well-separation
// ---------------------------------------------------------------------------

/// (1/β)·ln(2(M−1)m/(R+δ)) + 2mR.
pub fn gap_aware_well_separation_rhs(beta: f64, count: usize, m: f64, radius: f64, delta: f64) -> f64 {
    (2.0 * (count as f64 - 1.0) * m / (radius + delta)).ln() / beta + 2.0 * m * radius
}

/// The dense-model condition: the gap-aware form at δ = 0.
pub fn dense_well_separation_rhs(beta: f64, count: usize, m: f64, radius: f64) -> f64 {
    gap_aware_well_separation_rhs(beta, count, m, radius, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WellSeparation {
    pub satisfied: bool,
    /// Δ_μ − rhs.
    pub margin: f64,
    pub delta_mu: f64,
    /// mn + 2mR − [Ξᵀx]_(κ) − (1/κ)·(R − m − m√d)/(mβ√d).
    pub rhs: f64,
    pub kappa: usize,
    pub radius: f64,
    /// One-step δ = ‖T_dense(x)−ξ_μ‖ − ‖T(x)−ξ_μ‖ at the query.
    pub delta_gap: f64,
    /// Gap-aware form evaluated with `delta_gap`.
    pub gap_aware_rhs: f64,
    /// Gap-aware form at δ = 0.
    pub dense_rhs: f64,
}

/// Evaluates the sparse well-separation condition for pattern `mu` at query
/// `x`. The query must lie in the storage sphere S_μ.
pub fn well_separation_check(store: &PatternStore, x: &QueryState, beta: f64, mu: usize) -> Result<WellSeparation> {
    check_mu(store, x, mu)?;
    let count = store.len();
    if count < 2 {
        return Err(HopfieldError::InvalidParameter(
            "well-separation needs at least two patterns".into(),
        ));
    }
    let report = hopfield::separation_report(store, Some(x))?;
    let radius = report.radius.expect("defined for M >= 2");
    let delta_mu = report.delta.as_ref().expect("defined for M >= 2")[mu];
    let xi_mu = store.pattern(mu);
    if (x.vector() - &xi_mu).norm() > radius {
        return Err(HopfieldError::PreconditionViolated {
            mu,
            nearest: report.sphere_member,
        });
    }

    let (kappa, z_kappa, _) = kappa_and_order_stat(store, x, beta)?;
    let m = store.max_norm();
    let n = x.norm();
    let root_d = (store.dim() as f64).sqrt();
    let rhs = m * n + 2.0 * m * radius
        - z_kappa
        - (radius - m - m * root_d) / (m * beta * root_d) / kappa as f64;
    let margin = delta_mu - rhs;

    let bounds = error_bound_report(store, x, beta, mu)?;
    Ok(WellSeparation {
        satisfied: margin >= 0.0,
        margin,
        delta_mu,
        rhs,
        kappa,
        radius,
        delta_gap: bounds.delta_gap,
        gap_aware_rhs: gap_aware_well_separation_rhs(beta, count, m, radius, bounds.delta_gap),
        dense_rhs: dense_well_separation_rhs(beta, count, m, radius),
    })
}

// ---------------------------------------------------------------------------
// Memory capacity
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityParams {
    pub d: usize,
    /// Pattern norm m (patterns live on the sphere of this radius).
    pub m: f64,
    pub beta: f64,
    /// Failure probability p.
    pub p_fail: f64,
    pub radius: f64,
    pub delta: f64,
}

impl CapacityParams {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HopfieldError::InvalidParameter(msg));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if !(self.m > 0.0) || !(self.beta > 0.0) || !self.m.is_finite() || !self.beta.is_finite() {
            return bad(format!("m and beta must be positive, got m = {}, beta = {}", self.m, self.beta));
        }
        if !(self.p_fail > 0.0 && self.p_fail < 1.0) {
            return bad(format!("p_fail must lie in (0, 1), got {}", self.p_fail));
        }
        if !(self.radius >= 0.0) || !(self.delta >= 0.0) || !(self.radius + self.delta > 0.0) {
            return bad(format!(
                "need R >= 0, delta >= 0 and R + delta > 0, got R = {}, delta = {}",
                self.radius, self.delta
            ));
        }
        Ok(())
    }

    /// b = 4m²β / (5(d−1)), shared by the sparse and dense bounds.
    pub fn b(&self) -> f64 {
        4.0 * self.m * self.m * self.beta / (5.0 * (self.d - 1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub params: CapacityParams,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// a + ln b, the log of the Lambert argument.
    pub w0_arg: f64,
    /// √p·C^{(d−1)/4}; may be `inf` when it exceeds f64 range.
    pub m_bound: f64,
    pub log_m_bound: f64,
    /// a·C + C·ln C − b.
    pub residual: f64,
    pub iterations: usize,
}

/// Lower bound M ≥ √p·C^{(d−1)/4} on the number of storable patterns.
///
/// C solves a·C + C·ln C = b with b = 4m²β/(5(d−1)) and the self-consistent
///
/// ```text
/// a(C) = 4/(d−1) · { ln[ 2(√p·C^{(d−1)/4} − 1)·m / (R+δ) ] + 1 }
/// ```
///
/// found by fixed-point iteration on C = b / W₀(exp(a(C) + ln b)), starting
/// from √p·C^{(d−1)/4} = 2. Everything runs in log space so large d does not
/// overflow.
pub fn capacity_lower_bound(params: CapacityParams) -> Result<CapacityEstimate> {
    params.validate()?;
    let d1 = (params.d - 1) as f64;
    let b = params.b();
    let ln_b = b.ln();
    let half_ln_p = 0.5 * params.p_fail.ln();
    let ln_scale = LN_2 + params.m.ln() - (params.radius + params.delta).ln();

    let mut log_m = LN_2;
    for iteration in 1..=CAPACITY_MAX_ITERS {
        if !(log_m > 0.0) {
            return Err(HopfieldError::InfeasibleBound(format!(
                "pattern count {:e} <= 1 leaves ln(2(M-1)m/(R+delta)) undefined",
                log_m.exp()
            )));
        }
        let ln_m_minus_1 = log_m + (-(-log_m).exp()).ln_1p();
        let a = 4.0 / d1 * (ln_scale + ln_m_minus_1 + 1.0);
        let w0_arg = a + ln_b;
        let c = b / lambert_w0_exp(w0_arg)?;
        let next = half_ln_p + d1 / 4.0 * c.ln();
        if (next - log_m).abs() <= 1e-13 * next.abs().max(1.0) {
            if !(next > 0.0) {
                return Err(HopfieldError::InfeasibleBound(format!(
                    "fixed point gives M = {:e} <= 1",
                    next.exp()
                )));
            }
            let residual = linear_log_residual(a, b, c);
            if residual.abs() > LINEAR_LOG_RTOL * b.max(1.0) {
                return Err(HopfieldError::InternalConsistency(format!(
                    "a·C + C·ln C − b residual {residual:e} exceeds tolerance"
                )));
            }
            return Ok(CapacityEstimate {
                params,
                a,
                b,
                c,
                w0_arg,
                m_bound: next.exp(),
                log_m_bound: next,
                residual,
                iterations: iteration,
            });
        }
        log_m = next;
    }
    Err(HopfieldError::NoConvergence(format!(
        "capacity fixed point did not settle in {CAPACITY_MAX_ITERS} iterations"
    )))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseCapacityEstimate {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub m_bound: f64,
    pub log_m_bound: f64,
}

/// Dense-model counterpart with ã = 2/(d−1)·[1 + ln(2βm²p)] and the same b.
pub fn dense_capacity_lower_bound(params: CapacityParams) -> Result<DenseCapacityEstimate> {
    params.validate()?;
    let d1 = (params.d - 1) as f64;
    let b = params.b();
    let a = 2.0 / d1 * (1.0 + (2.0 * params.beta * params.m * params.m * params.p_fail).ln());
    let c = solve_linear_log(a, b)?;
    let log_m_bound = 0.5 * params.p_fail.ln() + d1 / 4.0 * c.ln();
    Ok(DenseCapacityEstimate {
        a,
        b,
        c,
        m_bound: log_m_bound.exp(),
        log_m_bound,
    })
}
