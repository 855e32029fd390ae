//! Sparse and dense Hopfield energies, their one-step retrieval maps, iterated
//! retrieval and pattern-separation statistics.
//!
//! Memory patterns are the columns of Ξ ∈ ℝ^{d×M}. The sparse model uses
//!
//! ```text
//! H(x)  = −β⁻¹ Ψ*(βΞᵀx) + ½⟨x, x⟩
//! T(x)  = Ξ · sparsemax(βΞᵀx)
//! ```
//!
//! and the dense model the log-sum-exp energy with T_dense(x) = Ξ·softmax(βΞᵀx).
//! Each map is a concave-convex step for its own energy, so the energy of a
//! trace never increases.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{shape_err, HopfieldError, Result};
use crate::simplex;

/// Relative slack allowed on energy increases along a trace.
pub const MONOTONICITY_RTOL: f64 = 1e-9;

/// Stored memory patterns Ξ (columns) with cached column norms.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStore {
    xi: DMatrix<f64>,
    norms: Vec<f64>,
    m: f64,
}

impl PatternStore {
    pub fn new(xi: DMatrix<f64>) -> Result<Self> {
        if xi.nrows() == 0 || xi.ncols() == 0 {
            return Err(HopfieldError::EmptyInput);
        }
        if let Some(pos) = xi.iter().position(|v| !v.is_finite()) {
            return Err(HopfieldError::InvalidData(format!(
                "pattern entry ({}, {}) is not finite",
                pos % xi.nrows(),
                pos / xi.nrows()
            )));
        }
        let norms: Vec<f64> = xi.column_iter().map(|c| c.norm()).collect();
        let m = norms.iter().copied().fold(0.0, f64::max);
        Ok(Self { xi, norms, m })
    }

    /// Builds a store from patterns given as equally long rows.
    pub fn from_patterns(patterns: &[Vec<f64>]) -> Result<Self> {
        let first = patterns.first().ok_or(HopfieldError::EmptyInput)?;
        let d = first.len();
        for (mu, p) in patterns.iter().enumerate() {
            if p.len() != d {
                return Err(shape_err(&format!("length of pattern {mu}"), d, p.len()));
            }
        }
        Self::new(DMatrix::from_fn(d, patterns.len(), |i, mu| patterns[mu][i]))
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    /// Pattern dimension d.
    pub fn dim(&self) -> usize {
        self.xi.nrows()
    }

    /// Number of stored patterns M.
    pub fn len(&self) -> usize {
        self.xi.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.ncols() == 0
    }

    /// Largest pattern norm m.
    pub fn max_norm(&self) -> f64 {
        self.m
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn pattern(&self, mu: usize) -> DVector<f64> {
        self.xi.column(mu).into_owned()
    }

    /// Keeps the listed columns, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(HopfieldError::InvalidParameter(format!(
                "pattern index {bad} out of range for {} patterns",
                self.len()
            )));
        }
        Self::new(self.xi.select_columns(indices))
    }

    /// Overlaps Ξᵀx.
    pub fn overlaps(&self, x: &QueryState) -> Result<DVector<f64>> {
        self.check_query(x)?;
        Ok(self.xi.tr_mul(&x.x))
    }

    pub(crate) fn check_query(&self, x: &QueryState) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(shape_err("query dimension", self.dim(), x.dim()));
        }
        Ok(())
    }

    pub(crate) fn check_index(&self, mu: usize) -> Result<()> {
        if mu >= self.len() {
            return Err(HopfieldError::InvalidParameter(format!(
                "pattern index {mu} out of range for {} patterns",
                self.len()
            )));
        }
        Ok(())
    }
}

/// A query (state) pattern x and its norm.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState {
    x: DVector<f64>,
    n: f64,
}

impl QueryState {
    pub fn new(x: DVector<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(HopfieldError::EmptyInput);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HopfieldError::InvalidInput("query has non-finite entries".into()));
        }
        let n = x.norm();
        Ok(Self { x, n })
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(x))
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn as_slice(&self) -> &[f64] {
        self.x.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.x
    }
}

/// Which normalization drives the retrieval dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Sparse,
    Dense,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::Sparse, Mode::Dense];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Sparse => "sparse",
            Mode::Dense => "dense",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = HopfieldError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sparse" => Ok(Mode::Sparse),
            "dense" => Ok(Mode::Dense),
            other => Err(HopfieldError::InvalidParameter(format!(
                "unknown mode `{other}` (expected sparse or dense)"
            ))),
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(HopfieldError::InvalidParameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

fn scaled_overlaps(store: &PatternStore, x: &QueryState, beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    Ok(store.overlaps(x)?.iter().map(|v| beta * v).collect())
}

/// Sparse Hopfield energy −β⁻¹Ψ*(βΞᵀx) + ½⟨x,x⟩.
pub fn sparse_energy(store: &PatternStore, x: &QueryState, beta: f64) -> Result<f64> {
    let z = scaled_overlaps(store, x, beta)?;
    Ok(-simplex::psi_star(&z)? / beta + 0.5 * x.x.dot(&x.x))
}

/// Dense energy −lse(β, Ξᵀx) + ½⟨x,x⟩ + β⁻¹ log M + ½m².
pub fn dense_energy(store: &PatternStore, x: &QueryState, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let overlaps = store.overlaps(x)?;
    let lse = simplex::lse(beta, overlaps.as_slice())?;
    let m = store.max_norm();
    Ok(-lse + 0.5 * x.x.dot(&x.x) + (store.len() as f64).ln() / beta + 0.5 * m * m)
}

pub fn energy(store: &PatternStore, x: &QueryState, beta: f64, mode: Mode) -> Result<f64> {
    match mode {
        Mode::Sparse => sparse_energy(store, x, beta),
        Mode::Dense => dense_energy(store, x, beta),
    }
}

/// Attention weights over the stored patterns for query x.
pub fn weights(store: &PatternStore, x: &QueryState, beta: f64, mode: Mode) -> Result<simplex::SimplexVector> {
    match mode {
        Mode::Sparse => simplex::sparsemax(&scaled_overlaps(store, x, beta)?),
        Mode::Dense => {
            check_beta(beta)?;
            simplex::softmax(store.overlaps(x)?.as_slice(), beta)
        }
    }
}

fn mix(store: &PatternStore, p: &[f64]) -> Result<QueryState> {
    QueryState::new(&store.xi * DVector::from_column_slice(p))
}

/// One sparse retrieval step Ξ·sparsemax(βΞᵀx).
pub fn sparse_step(store: &PatternStore, x: &QueryState, beta: f64) -> Result<QueryState> {
    step(store, x, beta, Mode::Sparse)
}

/// One dense retrieval step Ξ·softmax(βΞᵀx).
pub fn dense_step(store: &PatternStore, x: &QueryState, beta: f64) -> Result<QueryState> {
    step(store, x, beta, Mode::Dense)
}

pub fn step(store: &PatternStore, x: &QueryState, beta: f64, mode: Mode) -> Result<QueryState> {
    let p = weights(store, x, beta, mode)?;
    mix(store, &p.p)
}

/// Stopping rule for [`retrieve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalConfig {
    pub max_iters: usize,
    /// Stop when ‖x_{t+1} − x_t‖∞ falls to this value.
    pub step_tol: f64,
    /// Stop when |H(x_t) − H(x_{t+1})| falls to this value.
    pub energy_tol: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            step_tol: 1e-8,
            energy_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    StepTolerance,
    EnergyTolerance,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct RetrievalTrace {
    /// x_0, …, x_T.
    pub iterates: Vec<QueryState>,
    /// H(x_t) under the energy matching the mode.
    pub energies: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub beta: f64,
    pub mode: Mode,
}

impl RetrievalTrace {
    pub fn final_state(&self) -> &QueryState {
        self.iterates.last().expect("trace holds at least x_0")
    }

    /// Number of retrieval steps taken.
    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Iterates the retrieval map of `mode` from `x0` until a tolerance or the
/// iteration cap is hit.
///
/// Every step is checked against the energy descent property; an increase
/// beyond `MONOTONICITY_RTOL·(1 + |H|)` is reported as an internal
/// consistency error.
pub fn retrieve(
    store: &PatternStore,
    x0: &QueryState,
    beta: f64,
    mode: Mode,
    config: &RetrievalConfig,
) -> Result<RetrievalTrace> {
    if config.max_iters == 0 {
        return Err(HopfieldError::InvalidParameter("max_iters must be at least 1".into()));
    }
    if !(config.step_tol > 0.0) || !(config.energy_tol > 0.0) {
        return Err(HopfieldError::InvalidParameter("tolerances must be positive".into()));
    }
    store.check_query(x0)?;

    let mut iterates = vec![x0.clone()];
    let mut energies = vec![energy(store, x0, beta, mode)?];
    let mut stop_reason = StopReason::MaxIters;

    for _ in 0..config.max_iters {
        let current = iterates.last().unwrap();
        let h_now = *energies.last().unwrap();
        let next = step(store, current, beta, mode)?;
        let h_next = energy(store, &next, beta, mode)?;
        if h_next > h_now + MONOTONICITY_RTOL * (1.0 + h_now.abs()) {
            return Err(HopfieldError::InternalConsistency(format!(
                "{mode} energy increased from {h_now:e} to {h_next:e} at step {}",
                iterates.len()
            )));
        }
        let moved = (&next.x - &current.x).amax();
        iterates.push(next);
        energies.push(h_next);
        if moved <= config.step_tol {
            stop_reason = StopReason::StepTolerance;
            break;
        }
        if (h_now - h_next).abs() <= config.energy_tol {
            stop_reason = StopReason::EnergyTolerance;
            break;
        }
    }

    Ok(RetrievalTrace {
        iterates,
        energies,
        converged: stop_reason != StopReason::MaxIters,
        stop_reason,
        beta,
        mode,
    })
}

/// Separation statistics of a pattern set, optionally relative to a query.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    /// Δ_μ = ⟨ξ_μ,ξ_μ⟩ − max_{ν≠μ}⟨ξ_μ,ξ_ν⟩; `None` when M = 1.
    pub delta: Option<Vec<f64>>,
    /// Δ̃_μ = min_{ν≠μ}(⟨x,ξ_μ⟩ − ⟨x,ξ_ν⟩); present when a query was given and M ≥ 2.
    pub delta_tilde: Option<Vec<f64>>,
    /// R = ½ min_{μ≠ν}‖ξ_μ − ξ_ν‖; `None` when M = 1.
    pub radius: Option<f64>,
    /// The μ with ‖x − ξ_μ‖ ≤ R (the nearest one if several qualify).
    pub sphere_member: Option<usize>,
}

pub fn separation_report(store: &PatternStore, x: Option<&QueryState>) -> Result<SeparationReport> {
    if let Some(x) = x {
        store.check_query(x)?;
    }
    let count = store.len();
    if count < 2 {
        return Ok(SeparationReport {
            delta: None,
            delta_tilde: None,
            radius: None,
            sphere_member: None,
        });
    }
    let gram = store.xi.tr_mul(&store.xi);
    let delta = (0..count)
        .map(|mu| {
            let cross = (0..count)
                .filter(|&nu| nu != mu)
                .map(|nu| gram[(mu, nu)])
                .fold(f64::NEG_INFINITY, f64::max);
            gram[(mu, mu)] - cross
        })
        .collect();

    let mut min_dist = f64::INFINITY;
    for mu in 0..count {
        for nu in mu + 1..count {
            let dist = (store.xi.column(mu) - store.xi.column(nu)).norm();
            min_dist = min_dist.min(dist);
        }
    }
    let radius = 0.5 * min_dist;

    let (delta_tilde, sphere_member) = match x {
        Some(x) => {
            let overlaps = store.xi.tr_mul(&x.x);
            let tilde = (0..count)
                .map(|mu| {
                    (0..count)
                        .filter(|&nu| nu != mu)
                        .map(|nu| overlaps[mu] - overlaps[nu])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            (Some(tilde), sphere_member(store, x, radius))
        }
        None => (None, None),
    };

    Ok(SeparationReport {
        delta: Some(delta),
        delta_tilde,
        radius: Some(radius),
        sphere_member,
    })
}

/// Index of the nearest pattern and its distance to x.
pub(crate) fn nearest_pattern(store: &PatternStore, x: &QueryState) -> (usize, f64) {
    store
        .xi
        .column_iter()
        .map(|c| (c - &x.x).norm())
        .enumerate()
        .fold((0, f64::INFINITY), |best, (mu, dist)| if dist < best.1 { (mu, dist) } else { best })
}

fn sphere_member(store: &PatternStore, x: &QueryState, radius: f64) -> Option<usize> {
    let (mu, dist) = nearest_pattern(store, x);
    (dist <= radius).then_some(mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(cols: &[&[f64]]) -> PatternStore {
        let rows: Vec<Vec<f64>> = cols.iter().map(|c| c.to_vec()).collect();
        PatternStore::from_patterns(&rows).unwrap()
    }

    fn q(x: &[f64]) -> QueryState {
        QueryState::from_slice(x).unwrap()
    }

    #[test]
    fn store_caches_norms() {
        let s = store(&[&[3.0, 4.0], &[1.0, 0.0]]);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.norms(), &[5.0, 1.0]);
        assert_eq!(s.max_norm(), 5.0);
        assert!(PatternStore::from_patterns(&[]).is_err());
        assert!(PatternStore::from_patterns(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(PatternStore::from_patterns(&[vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn sparse_energy_examples() {
        let s = store(&[&[1.0, 0.0]]);
        assert!((sparse_energy(&s, &q(&[1.0, 0.0]), 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(sparse_energy(&s, &q(&[0.0, 0.0]), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sparse_energy_is_locally_minimal_at_a_stored_pattern() {
        let s = store(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        let at = sparse_energy(&s, &q(&[1.0, 0.0, 0.0]), 20.0).unwrap();
        for dx in [[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0], [0.0, 0.03, -0.02]] {
            let x = q(&[1.0 + dx[0], dx[1], dx[2]]);
            assert!(at <= sparse_energy(&s, &x, 20.0).unwrap());
        }
    }

    #[test]
    fn dense_energy_examples() {
        let s = store(&[&[1.0, 0.0]]);
        assert!(dense_energy(&s, &q(&[1.0, 0.0]), 1.0).unwrap().abs() < 1e-15);
        assert!((dense_energy(&s, &q(&[0.0, 0.0]), 1.0).unwrap() - 0.5).abs() < 1e-15);

        let twin = store(&[&[0.6, 0.8], &[0.6, 0.8]]);
        for beta in [0.5, 1.0, 3.0] {
            assert!(dense_energy(&twin, &q(&[0.6, 0.8]), beta).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn shape_errors() {
        let s = store(&[&[1.0, 0.0]]);
        assert!(matches!(
            sparse_energy(&s, &q(&[1.0]), 1.0),
            Err(HopfieldError::Shape(_))
        ));
        assert!(matches!(dense_step(&s, &q(&[1.0, 2.0, 3.0]), 1.0), Err(HopfieldError::Shape(_))));
        assert!(separation_report(&s, Some(&q(&[1.0]))).is_err());
    }

    #[test]
    fn single_pattern_steps_land_on_it() {
        let s = store(&[&[0.3, -1.2, 2.0]]);
        for x in [[5.0, 5.0, 5.0], [0.0, 0.0, 0.0], [-1.0, 0.2, 0.1]] {
            assert_eq!(sparse_step(&s, &q(&x), 0.7).unwrap().as_slice(), &[0.3, -1.2, 2.0]);
            assert_eq!(dense_step(&s, &q(&x), 0.7).unwrap().as_slice(), &[0.3, -1.2, 2.0]);
        }
    }

    #[test]
    fn symmetric_pair_steps_to_the_mean() {
        let s = store(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let x = q(&[0.4, 0.4]);
        for mode in Mode::ALL {
            let out = step(&s, &x, 2.0, mode).unwrap();
            assert!((out.as_slice()[0] - 0.5).abs() < 1e-15);
            assert!((out.as_slice()[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn one_dimensional_three_pattern_steps() {
        let s = store(&[&[1.5], &[1.0], &[0.5]]);
        let sparse = sparse_step(&s, &q(&[1.0]), 1.0).unwrap();
        assert!((sparse.as_slice()[0] - 1.375).abs() < 1e-15);

        let w: Vec<f64> = [1.5f64, 1.0, 0.5].iter().map(|v| v.exp()).collect();
        let expected = (1.5 * w[0] + 1.0 * w[1] + 0.5 * w[2]) / w.iter().sum::<f64>();
        let dense = dense_step(&s, &q(&[1.0]), 1.0).unwrap();
        assert!((dense.as_slice()[0] - expected).abs() < 1e-15);
        assert!((dense.as_slice()[0] - 1.16008).abs() < 1e-5);
    }

    #[test]
    fn retrieve_single_pattern() {
        let s = store(&[&[2.0, -1.0]]);
        for mode in Mode::ALL {
            let trace = retrieve(&s, &q(&[9.0, 9.0]), 1.0, mode, &RetrievalConfig::default()).unwrap();
            assert!(trace.converged);
            assert_eq!(trace.iterates[1].as_slice(), &[2.0, -1.0]);
            assert_eq!(trace.final_state().as_slice(), &[2.0, -1.0]);
            assert_eq!(trace.iterates.len(), trace.energies.len());
        }
    }

    #[test]
    fn retrieve_recovers_a_well_separated_pattern() {
        let scale = 4.0;
        let s = store(&[
            &[scale, 0.0, 0.0, 0.0],
            &[0.0, scale, 0.0, 0.0],
            &[0.0, 0.0, scale, 0.0],
        ]);
        let x0 = q(&[scale - 0.3, 0.2, -0.1, 0.25]);
        let trace = retrieve(&s, &x0, 1.0, Mode::Sparse, &RetrievalConfig::default()).unwrap();
        assert!(trace.converged);
        assert!(trace.iterations() <= 3);
        let err = (trace.final_state().vector() - s.pattern(0)).norm();
        assert!(err <= 1e-6, "error {err}");
    }

    #[test]
    fn retrieve_keeps_exact_symmetry_at_the_mean() {
        let s = store(&[&[1.0, 0.0], &[0.0, 1.0]]);
        for mode in Mode::ALL {
            let trace = retrieve(&s, &q(&[0.3, 0.3]), 0.5, mode, &RetrievalConfig::default()).unwrap();
            assert!(trace.converged);
            assert_eq!(trace.final_state().as_slice(), &[0.5, 0.5]);
        }
    }

    #[test]
    fn retrieve_validates_config() {
        let s = store(&[&[1.0]]);
        let bad = RetrievalConfig { max_iters: 0, ..Default::default() };
        assert!(retrieve(&s, &q(&[1.0]), 1.0, Mode::Sparse, &bad).is_err());
        let bad = RetrievalConfig { step_tol: 0.0, ..Default::default() };
        assert!(retrieve(&s, &q(&[1.0]), 1.0, Mode::Sparse, &bad).is_err());
    }

    #[test]
    fn max_iters_stop_is_not_converged() {
        let s = store(&[&[1.0, 0.0], &[0.0, 1.0], &[0.7, 0.7]]);
        let cfg = RetrievalConfig { max_iters: 1, step_tol: 1e-300, energy_tol: 1e-300 };
        let trace = retrieve(&s, &q(&[3.0, -2.0]), 0.3, Mode::Dense, &cfg).unwrap();
        assert_eq!(trace.stop_reason, StopReason::MaxIters);
        assert!(!trace.converged);
        assert_eq!(trace.iterations(), 1);
    }

    #[test]
    fn separation_examples() {
        let id = store(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = separation_report(&id, None).unwrap();
        assert_eq!(r.delta, Some(vec![1.0, 1.0]));
        assert!((r.radius.unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-15);

        let r = separation_report(&id, Some(&q(&[1.0, 0.0]))).unwrap();
        assert_eq!(r.delta_tilde.as_ref().unwrap()[0], 1.0);
        assert_eq!(r.sphere_member, Some(0));

        let dup = store(&[&[1.0, 2.0], &[1.0, 2.0], &[0.0, 1.0]]);
        let r = separation_report(&dup, None).unwrap();
        assert_eq!(r.delta.as_ref().unwrap()[0], 0.0);
        assert_eq!(r.radius, Some(0.0));

        let single = store(&[&[1.0, 2.0]]);
        let r = separation_report(&single, Some(&q(&[1.0, 2.0]))).unwrap();
        assert_eq!(r.delta, None);
        assert_eq!(r.radius, None);
        assert_eq!(r.sphere_member, None);
    }

    #[test]
    fn query_outside_every_sphere() {
        let id = store(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = separation_report(&id, Some(&q(&[0.6, 0.6]))).unwrap();
        assert_eq!(r.sphere_member, None);
    }

    #[test]
    fn mode_round_trips_through_strings() {
        for mode in Mode::ALL {
            assert_eq!(mode.to_string().parse::<Mode>().unwrap(), mode);
        }
        assert!("both".parse::<Mode>().is_err());
    }
}
