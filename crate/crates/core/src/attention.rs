//! Hopfield layers as attention forward passes.
//!
//! Layout is row-major: queries and memories are rows. With raw queries R,
//! raw memories Y and projections W_Q, W_K, W_V the multi-step layer runs
//!
//! ```text
//! Q ← R W_Q
//! repeat U times:  Q ← N(β Q W_Kᵀ Yᵀ) Y W_V W_K
//! ```
//!
//! where N normalizes each row with sparsemax (or softmax in dense mode).
//! [`hopfield_attention`] gives the one-shot attention form
//! Z = N(β R W_Q W_Kᵀ Yᵀ) Y W_K W_V. The two orderings of W_V and W_K
//! differ and agree only when the projections commute; both are provided
//! as written.

use nalgebra::DMatrix;

use crate::error::{HopfieldError, Result};
use crate::hopfield::Mode;
use crate::simplex;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    /// raw-query dim × associative dim.
    pub w_q: DMatrix<f64>,
    /// raw-memory dim × associative dim.
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
}

impl ProjectionSet {
    pub fn new(w_q: DMatrix<f64>, w_k: DMatrix<f64>, w_v: DMatrix<f64>) -> Result<Self> {
        for (name, w) in [("W_Q", &w_q), ("W_K", &w_k), ("W_V", &w_v)] {
            check_matrix(name, w)?;
        }
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn identity(dim: usize) -> Self {
        let eye = DMatrix::identity(dim, dim);
        Self {
            w_q: eye.clone(),
            w_k: eye.clone(),
            w_v: eye,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    /// Raw queries, one per row.
    pub r: DMatrix<f64>,
    /// Raw memories, one per row.
    pub y: DMatrix<f64>,
}

impl SequenceBatch {
    pub fn new(r: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        check_matrix("R", &r)?;
        check_matrix("Y", &y)?;
        Ok(Self { r, y })
    }
}

fn check_matrix(name: &str, w: &DMatrix<f64>) -> Result<()> {
    if w.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(HopfieldError::InvalidInput(format!("{name} has non-finite entries")));
    }
    Ok(())
}

fn product(name: &str, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.nrows() {
        return Err(HopfieldError::Shape(format!(
            "{name}: cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(HopfieldError::InvalidParameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(HopfieldError::InvalidParameter("steps must be at least 1".into()));
    }
    Ok(())
}

/// Row-wise sparsemax (or softmax) of β·scores.
pub fn normalize_rows(scores: &DMatrix<f64>, beta: f64, mode: Mode) -> Result<DMatrix<f64>> {
    check_beta(beta)?;
    let mut out = DMatrix::zeros(scores.nrows(), scores.ncols());
    let mut row = vec![0.0; scores.ncols()];
    for i in 0..scores.nrows() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = scores[(i, j)];
        }
        let p = match mode {
            Mode::Sparse => {
                row.iter_mut().for_each(|v| *v *= beta);
                simplex::sparsemax(&row)?
            }
            Mode::Dense => simplex::softmax(&row, beta)?,
        };
        for (j, v) in p.p.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Runs `steps` Hopfield updates Q ← N(βQW_KᵀYᵀ)·Y·W_V·W_K from `q`.
fn iterate_updates(
    mut q: DMatrix<f64>,
    y: &DMatrix<f64>,
    w_k: &DMatrix<f64>,
    w_v: &DMatrix<f64>,
    beta: f64,
    steps: usize,
    mode: Mode,
) -> Result<DMatrix<f64>> {
    check_beta(beta)?;
    check_steps(steps)?;
    // keys Y·W_K and per-memory update rows Y·W_V·W_K are fixed across steps
    let keys = product("Y W_K", y, w_k)?;
    let values = product("Y W_V W_K", &product("Y W_V", y, w_v)?, w_k)?;
    for _ in 0..steps {
        if q.ncols() != keys.ncols() {
            return Err(HopfieldError::Shape(format!(
                "query width {} does not match key width {}",
                q.ncols(),
                keys.ncols()
            )));
        }
        let weights = normalize_rows(&(&q * keys.transpose()), beta, mode)?;
        q = &weights * &values;
    }
    Ok(q)
}

/// Multi-step Hopfield layer; returns the final associative-space queries.
pub fn sparse_hopfield_layer(
    batch: &SequenceBatch,
    proj: &ProjectionSet,
    beta: f64,
    steps: usize,
    mode: Mode,
) -> Result<DMatrix<f64>> {
    check_steps(steps)?;
    let q = product("R W_Q", &batch.r, &proj.w_q)?;
    iterate_updates(q, &batch.y, &proj.w_k, &proj.w_v, beta, steps, mode)
}

/// One-shot attention output N(β R W_Q W_Kᵀ Yᵀ)·Y·W_K·W_V.
pub fn hopfield_attention(batch: &SequenceBatch, proj: &ProjectionSet, beta: f64, mode: Mode) -> Result<DMatrix<f64>> {
    let q = product("R W_Q", &batch.r, &proj.w_q)?;
    let keys = product("Y W_K", &batch.y, &proj.w_k)?;
    let values = product("Y W_K W_V", &keys, &proj.w_v)?;
    if q.ncols() != keys.ncols() {
        return Err(HopfieldError::Shape(format!(
            "query width {} does not match key width {}",
            q.ncols(),
            keys.ncols()
        )));
    }
    let weights = normalize_rows(&(&q * keys.transpose()), beta, mode)?;
    Ok(weights * values)
}

/// Pooling variant: a static prototype matrix replaces R·W_Q.
pub fn sparse_hopfield_pooling(
    y: &DMatrix<f64>,
    q_static: &DMatrix<f64>,
    w_k: &DMatrix<f64>,
    w_v: &DMatrix<f64>,
    beta: f64,
    steps: usize,
    mode: Mode,
) -> Result<DMatrix<f64>> {
    check_matrix("Y", y)?;
    check_matrix("Q", q_static)?;
    iterate_updates(q_static.clone(), y, w_k, w_v, beta, steps, mode)
}

/// Layer variant whose stored patterns are the rows of `w_k` (Y = I):
/// N(β R W_Kᵀ)·W_V.
pub fn sparse_hopfield_dense_layer_variant(
    r: &DMatrix<f64>,
    w_k: &DMatrix<f64>,
    w_v: &DMatrix<f64>,
    beta: f64,
    mode: Mode,
) -> Result<DMatrix<f64>> {
    check_matrix("R", r)?;
    check_matrix("W_K", w_k)?;
    check_matrix("W_V", w_v)?;
    if r.ncols() != w_k.ncols() {
        return Err(HopfieldError::Shape(format!(
            "query width {} does not match stored pattern width {}",
            r.ncols(),
            w_k.ncols()
        )));
    }
    if w_k.nrows() != w_v.nrows() {
        return Err(HopfieldError::Shape(format!(
            "W_K has {} rows but W_V has {}",
            w_k.nrows(),
            w_v.nrows()
        )));
    }
    let weights = normalize_rows(&(r * w_k.transpose()), beta, mode)?;
    Ok(weights * w_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopfield::{sparse_step, PatternStore, QueryState};

    #[test]
    fn identity_layer_is_one_retrieval_step() {
        let y = DMatrix::from_row_slice(3, 2, &[1.5, 0.2, 1.0, -0.4, 0.5, 0.9]);
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.7]);
        let batch = SequenceBatch::new(r.clone(), y.clone()).unwrap();
        let out = sparse_hopfield_layer(&batch, &ProjectionSet::identity(2), 1.3, 1, Mode::Sparse).unwrap();
        let store = PatternStore::new(y.transpose()).unwrap();
        for i in 0..2 {
            let x = QueryState::from_slice(&[r[(i, 0)], r[(i, 1)]]).unwrap();
            let expected = sparse_step(&store, &x, 1.3).unwrap();
            for j in 0..2 {
                assert!((out[(i, j)] - expected.as_slice()[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_memory_returns_its_projection() {
        let y = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        let r = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 5.0, 1.0, -3.0, 2.0]);
        let w_k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let w_v = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.0, 1.0]);
        let proj = ProjectionSet::new(DMatrix::identity(2, 2), w_k.clone(), w_v.clone()).unwrap();
        let batch = SequenceBatch::new(r, y.clone()).unwrap();
        let expected = &y * &w_v * &w_k;
        for steps in [1, 2, 5] {
            let out = sparse_hopfield_layer(&batch, &proj, 0.8, steps, Mode::Sparse).unwrap();
            for i in 0..3 {
                for j in 0..2 {
                    assert!((out[(i, j)] - expected[(0, j)]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_zero_steps_and_bad_shapes() {
        let batch = SequenceBatch::new(DMatrix::identity(2, 2), DMatrix::identity(3, 2)).unwrap();
        assert!(matches!(
            sparse_hopfield_layer(&batch, &ProjectionSet::identity(2), 1.0, 0, Mode::Sparse),
            Err(HopfieldError::InvalidParameter(_))
        ));
        assert!(matches!(
            sparse_hopfield_layer(&batch, &ProjectionSet::identity(3), 1.0, 1, Mode::Sparse),
            Err(HopfieldError::Shape(_))
        ));
    }

    #[test]
    fn pooling_prototype_selects_a_memory() {
        let y = DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 4.0]);
        let eye = DMatrix::identity(3, 3);
        let q = DMatrix::from_row_slice(1, 3, &[0.0, 4.0, 0.0]);
        let out = sparse_hopfield_pooling(&y, &q, &eye, &eye, 10.0, 1, Mode::Sparse).unwrap();
        assert_eq!(out.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 4.0, 0.0]);
    }

    #[test]
    fn pooling_with_uniform_overlaps_averages() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        let eye = DMatrix::identity(2, 2);
        let q = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        for mode in Mode::ALL {
            let out = sparse_hopfield_pooling(&y, &q, &eye, &eye, 2.0, 1, mode).unwrap();
            assert!((out[(0, 0)] - 2.0).abs() < 1e-15);
            assert!((out[(0, 1)] - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dense_variant_examples() {
        let r = DMatrix::from_row_slice(2, 2, &[0.3, -2.0, 5.0, 5.0]);
        let w_v = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let out = sparse_hopfield_dense_layer_variant(&r, &DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &w_v, 1.0, Mode::Sparse)
            .unwrap();
        assert_eq!(out, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]));

        let w_k = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let w_v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 5.0, 5.0]);
        let r = DMatrix::from_row_slice(1, 3, &[0.0, 0.0, 2.0]);
        let out = sparse_hopfield_dense_layer_variant(&r, &w_k, &w_v, 1.0, Mode::Sparse).unwrap();
        assert_eq!(out, DMatrix::from_row_slice(1, 2, &[5.0, 5.0]));

        let zero = DMatrix::zeros(1, 3);
        let out = sparse_hopfield_dense_layer_variant(&zero, &w_k, &w_v, 1.0, Mode::Sparse).unwrap();
        assert!((out[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((out[(0, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn attention_form_with_identity_matches_layer() {
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.2, 0.9, -0.5, 0.4]);
        let r = DMatrix::from_row_slice(1, 2, &[0.6, 0.1]);
        let batch = SequenceBatch::new(r, y).unwrap();
        let proj = ProjectionSet::identity(2);
        for mode in Mode::ALL {
            let a = hopfield_attention(&batch, &proj, 2.0, mode).unwrap();
            let b = sparse_hopfield_layer(&batch, &proj, 2.0, 1, mode).unwrap();
            assert!((a - b).amax() < 1e-15);
        }
    }
}
