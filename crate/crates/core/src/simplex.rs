//! Normalization maps onto the probability simplex.
//!
//! Sparsemax is the Euclidean projection of a score vector onto the simplex,
//!
//! ```text
//! sparsemax(z) = argmin_{p ∈ Δ} ‖p − z‖² = [z − τ(z)·1]_+
//! ```
//!
//! with the threshold τ found from the sorted cumulative sums. It is the
//! gradient of Ψ*, the convex conjugate of the negative Gini entropy
//! Ψ(p) = ½‖p‖² − ½, which in closed form reads
//!
//! ```text
//! Ψ*(z) = ½‖z‖² − ½‖sparsemax(z) − z‖² + ½
//! ```
//!
//! Softmax and log-sum-exp play the same roles for the dense model.

use nalgebra::DMatrix;

use crate::error::{HopfieldError, Result};

/// Relative tolerance deciding support membership: μ ∈ S(z) iff
/// z_μ − τ > SUPPORT_RTOL·max(1, ‖z‖∞).
pub const SUPPORT_RTOL: f64 = 1e-12;

/// Tolerance for accepting a vector as lying on the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Exhaustive support enumeration is used by the oracle up to this length.
pub const ORACLE_EXHAUSTIVE_MAX: usize = 20;

/// A point on the probability simplex together with the sparsity bookkeeping
/// of the map that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector {
    pub p: Vec<f64>,
    /// Threshold subtracted before clipping. Softmax has no threshold and
    /// reports `f64::NEG_INFINITY`.
    pub tau: f64,
    /// Support size, `support.len()`.
    pub kappa: usize,
    /// Indices with strictly positive mass, ascending.
    pub support: Vec<usize>,
}

impl SimplexVector {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }
}

pub(crate) fn check_scores(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(HopfieldError::InvalidInput(format!(
            "score entry {i} is not finite ({})",
            z[i]
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(HopfieldError::InvalidParameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

fn inf_norm(z: &[f64]) -> f64 {
    z.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Indices of `z` sorted by descending value; ties keep their original order.
fn descending_order(z: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..z.len()).collect();
    idx.sort_by(|&a, &b| z[b].total_cmp(&z[a]));
    idx
}

/// Sparsemax with the sorted cumulative-sum threshold rule.
///
/// The support size is κ = max{k : 1 + k·z_(k) > Σ_{ν≤k} z_(ν)}, evaluated
/// with the support tolerance, and τ = (Σ_{ν≤κ} z_(ν) − 1)/κ.
pub fn sparsemax(z: &[f64]) -> Result<SimplexVector> {
    check_scores(z)?;
    let tol = SUPPORT_RTOL * inf_norm(z).max(1.0);
    let order = descending_order(z);

    // work relative to the largest score so a constant shift cancels exactly
    let top = z[order[0]];
    let mut cumsum = 0.0;
    let mut kappa = 1;
    let mut kappa_sum = 0.0;
    for (k0, &i) in order.iter().enumerate() {
        let k = (k0 + 1) as f64;
        let s = z[i] - top;
        cumsum += s;
        // z_(k) − τ_k > tol  ⇔  1 + k·z_(k) − Σ_{ν≤k} z_(ν) > k·tol
        if 1.0 + k * s - cumsum > k * tol {
            kappa = k0 + 1;
            kappa_sum = cumsum;
        }
    }
    let shifted_tau = (kappa_sum - 1.0) / kappa as f64;
    let tau = top + shifted_tau;

    let mut p = vec![0.0; z.len()];
    let mut support: Vec<usize> = order[..kappa].to_vec();
    support.sort_unstable();
    for &i in &support {
        p[i] = (z[i] - top) - shifted_tau;
    }
    Ok(SimplexVector {
        p,
        tau,
        kappa,
        support,
    })
}

/// Softmax of βz, stabilized by subtracting max(βz).
pub fn softmax(z: &[f64], beta: f64) -> Result<SimplexVector> {
    check_scores(z)?;
    check_beta(beta)?;
    let max = z.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|v| (beta * v - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    let support = (0..z.len()).collect();
    Ok(SimplexVector {
        p,
        tau: f64::NEG_INFINITY,
        kappa: z.len(),
        support,
    })
}

/// Log-sum-exp at inverse temperature β: β⁻¹ log Σ exp(βz_μ).
pub fn lse(beta: f64, z: &[f64]) -> Result<f64> {
    check_scores(z)?;
    check_beta(beta)?;
    let max = z.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|v| (beta * v - max).exp()).sum();
    Ok((max + sum.ln()) / beta)
}

/// Negative Gini entropy Ψ(p) = −½ Σ p_ν(1 − p_ν) = ½‖p‖² − ½.
pub fn gini_entropy_neg(p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(HopfieldError::EmptyInput);
    }
    let total: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < -SIMPLEX_TOL) || (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(HopfieldError::InvalidInput(format!(
            "vector is not on the simplex (sum = {total})"
        )));
    }
    Ok(-0.5 * p.iter().map(|v| v * (1.0 - v)).sum::<f64>())
}

/// Convex conjugate of the negative Gini entropy,
/// Ψ*(z) = ½‖z‖² − ½‖p* − z‖² + ½ with p* = sparsemax(z).
pub fn psi_star(z: &[f64]) -> Result<f64> {
    let p = sparsemax(z)?;
    Ok(psi_star_with(z, &p.p))
}

pub(crate) fn psi_star_with(z: &[f64], p: &[f64]) -> f64 {
    let zz: f64 = z.iter().map(|v| v * v).sum();
    let gap: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * zz - 0.5 * gap + 0.5
}

/// Euclidean projection onto the simplex computed without the threshold
/// rule, for cross-checking [`sparsemax`].
///
/// Up to [`ORACLE_EXHAUSTIVE_MAX`] entries every non-empty support set is
/// tried: the minimizer of ‖p − z‖² on the affine slice {Σp = 1, p_i = 0
/// off-support} is kept when feasible and the best objective wins. Longer
/// inputs fall back to bisection on Σ[z − τ]_+ = 1.
pub fn simplex_projection_oracle(z: &[f64]) -> Result<SimplexVector> {
    check_scores(z)?;
    let (p, tau) = if z.len() <= ORACLE_EXHAUSTIVE_MAX {
        enumerate_supports(z)
    } else {
        bisect_threshold(z)
    };
    let support: Vec<usize> = (0..z.len()).filter(|&i| p[i] > 0.0).collect();
    Ok(SimplexVector {
        kappa: support.len(),
        p,
        tau,
        support,
    })
}

fn enumerate_supports(z: &[f64]) -> (Vec<f64>, f64) {
    let m = z.len();
    let sq_total: f64 = z.iter().map(|v| v * v).sum();
    let mut best: Option<(f64, u32, f64)> = None;
    for mask in 1u32..(1u32 << m) {
        let k = mask.count_ones() as f64;
        let mut sum = 0.0;
        let mut sq_in = 0.0;
        for (i, v) in z.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum += v;
                sq_in += v * v;
            }
        }
        let shift = (sum - 1.0) / k;
        let feasible = z
            .iter()
            .enumerate()
            .all(|(i, v)| mask & (1 << i) == 0 || v - shift >= 0.0);
        if !feasible {
            continue;
        }
        // on-support residual is the constant shift, off-support it is z itself
        let objective = k * shift * shift + (sq_total - sq_in);
        if best.is_none_or(|(obj, _, _)| objective < obj) {
            best = Some((objective, mask, shift));
        }
    }
    // the singleton {argmax z} is always feasible
    let (_, mask, shift) = best.expect("at least one feasible support");
    let p = z
        .iter()
        .enumerate()
        .map(|(i, v)| if mask & (1 << i) != 0 { v - shift } else { 0.0 })
        .collect();
    (p, shift)
}

fn bisect_threshold(z: &[f64]) -> (Vec<f64>, f64) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mass = |t: f64| z.iter().map(|v| (v - t).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    (z.iter().map(|v| (v - tau).max(0.0)).collect(), tau)
}

/// Central finite-difference Jacobian of sparsemax, `J[(i, j)] = ∂p_i/∂z_j`.
///
/// Requires every entry to sit more than 10h away from the threshold so the
/// support is constant on the stencil.
pub fn sparsemax_jacobian_fd(z: &[f64], h: f64) -> Result<DMatrix<f64>> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(HopfieldError::InvalidParameter(format!(
            "step h must lie in [1e-8, 1e-4], got {h}"
        )));
    }
    let center = sparsemax(z)?;
    let closest = z
        .iter()
        .map(|v| (v - center.tau).abs())
        .fold(f64::INFINITY, f64::min);
    if closest <= 10.0 * h {
        return Err(HopfieldError::DegeneratePoint(format!(
            "an entry lies {closest:e} from the threshold, within 10h = {:e}",
            10.0 * h
        )));
    }
    let m = z.len();
    let mut jac = DMatrix::zeros(m, m);
    let mut zp = z.to_vec();
    for j in 0..m {
        zp[j] = z[j] + h;
        let plus = sparsemax(&zp)?;
        zp[j] = z[j] - h;
        let minus = sparsemax(&zp)?;
        zp[j] = z[j];
        for i in 0..m {
            jac[(i, j)] = (plus.p[i] - minus.p[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn sparsemax_examples() {
        let s = sparsemax(&[0.0, 0.0]).unwrap();
        assert!(close(&s.p, &[0.5, 0.5], 1e-15));
        assert_eq!(s.tau, -0.5);
        assert_eq!(s.kappa, 2);

        let s = sparsemax(&[1.5, 1.0, 0.5]).unwrap();
        assert!(close(&s.p, &[0.75, 0.25, 0.0], 1e-15));
        assert!((s.tau - 0.75).abs() < 1e-15);
        assert_eq!(s.kappa, 2);
        assert_eq!(s.support, vec![0, 1]);

        let s = sparsemax(&[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(s.p, vec![1.0, 0.0, 0.0]);
        assert_eq!(s.tau, 1.0);
        assert_eq!(s.kappa, 1);
    }

    #[test]
    fn single_entry_is_one() {
        let s = sparsemax(&[3.25]).unwrap();
        assert_eq!(s.p, vec![1.0]);
        assert_eq!(s.tau, 2.25);
        assert_eq!(s.kappa, 1);
        assert_eq!(softmax(&[3.25], 0.7).unwrap().p, vec![1.0]);
    }

    #[test]
    fn rejects_bad_scores() {
        assert!(matches!(sparsemax(&[]), Err(HopfieldError::EmptyInput)));
        assert!(matches!(
            sparsemax(&[1.0, f64::NAN]),
            Err(HopfieldError::InvalidInput(_))
        ));
        assert!(matches!(
            softmax(&[1.0], 0.0),
            Err(HopfieldError::InvalidParameter(_))
        ));
        assert!(matches!(
            lse(-1.0, &[1.0]),
            Err(HopfieldError::InvalidParameter(_))
        ));
    }

    #[test]
    fn ties_get_equal_mass_whatever_their_position() {
        let a = sparsemax(&[1.0, 0.2, 1.0, 0.2]).unwrap();
        assert_eq!(a.p[0], a.p[2]);
        assert_eq!(a.p[1], a.p[3]);
        let b = sparsemax(&[0.2, 1.0, 0.2, 1.0]).unwrap();
        assert_eq!(a.p[0], b.p[1]);
    }

    #[test]
    fn softmax_examples() {
        assert!(close(&softmax(&[0.0, 0.0], 1.0).unwrap().p, &[0.5, 0.5], 1e-15));
        assert!(close(
            &softmax(&[0.0; 4], 1.0).unwrap().p,
            &[0.25; 4],
            1e-15
        ));
        let s = softmax(&[2f64.ln(), 0.0], 1.0).unwrap();
        assert!(close(&s.p, &[2.0 / 3.0, 1.0 / 3.0], 1e-15));
        assert_eq!(s.kappa, 2);
    }

    #[test]
    fn softmax_survives_large_scores() {
        let s = softmax(&[1000.0, 999.0], 5.0).unwrap();
        assert!(s.p.iter().all(|v| v.is_finite()));
        assert!((s.p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_entropy_neg(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_entropy_neg(&[0.5, 0.5]).unwrap(), -0.25);
        assert_eq!(gini_entropy_neg(&[0.25; 4]).unwrap(), -0.375);
        assert!(gini_entropy_neg(&[0.6, 0.6]).is_err());
        assert!(gini_entropy_neg(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn psi_star_examples() {
        assert!((psi_star(&[0.0, 0.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!((psi_star(&[2.0, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(psi_star(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn lse_examples() {
        assert!((lse(1.0, &[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(lse(2.0, &[5.0]).unwrap(), 5.0);
        assert!((lse(1.0, &[1.0; 4]).unwrap() - (1.0 + 4f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        assert!(close(
            &simplex_projection_oracle(&[0.0, 0.0]).unwrap().p,
            &[0.5, 0.5],
            1e-15
        ));
        let o = simplex_projection_oracle(&[1.5, 1.0, 0.5]).unwrap();
        assert!(close(&o.p, &[0.75, 0.25, 0.0], 1e-15));
        assert_eq!(o.support, vec![0, 1]);
    }

    #[test]
    fn oracle_bisection_branch_matches_sparsemax() {
        let z: Vec<f64> = (0..40).map(|i| ((i * 37 % 23) as f64 * 0.31).sin() * 3.0).collect();
        let o = simplex_projection_oracle(&z).unwrap();
        let s = sparsemax(&z).unwrap();
        assert!(close(&o.p, &s.p, 1e-12));
    }

    #[test]
    fn jacobian_examples() {
        let j = sparsemax_jacobian_fd(&[4.0], 1e-6).unwrap();
        assert_eq!(j.shape(), (1, 1));
        assert_eq!(j[(0, 0)], 0.0);

        let j = sparsemax_jacobian_fd(&[2.0, 0.0, 0.0], 1e-6).unwrap();
        assert!(j.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn jacobian_rejects_boundary_points() {
        // (1, 0) sits exactly on the one-hot boundary: τ = 0 = z_2
        assert!(matches!(
            sparsemax_jacobian_fd(&[1.0, 0.0], 1e-6),
            Err(HopfieldError::DegeneratePoint(_))
        ));
        assert!(matches!(
            sparsemax_jacobian_fd(&[1.0, 0.0], 1e-2),
            Err(HopfieldError::InvalidParameter(_))
        ));
    }
}
