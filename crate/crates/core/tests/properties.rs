use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use sparse_hopfield::harness::{corrupt, save_patterns, load_patterns, Corruption, PatternFormat};
use sparse_hopfield::theory::{lambert_w0, linear_log_residual, solve_linear_log};
use sparse_hopfield::{
    energy, gini_entropy_neg, psi_star, retrieve, simplex_projection_oracle, softmax, sparse_step, sparsemax, Mode,
    PatternStore, QueryState, RetrievalConfig,
};

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..16)
}

fn store_and_query() -> impl Strategy<Value = (PatternStore, QueryState)> {
    (1usize..8, 1usize..10).prop_flat_map(|(d, m)| {
        (
            prop::collection::vec(-2.0..2.0f64, d * m),
            prop::collection::vec(-2.0..2.0f64, d),
        )
            .prop_map(move |(xi, x)| {
                (
                    PatternStore::new(DMatrix::from_vec(d, m, xi)).unwrap(),
                    QueryState::new(DVector::from_vec(x)).unwrap(),
                )
            })
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn sparsemax_lies_on_the_simplex(z in scores()) {
        let p = sparsemax(&z).unwrap();
        prop_assert!(p.p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(p.kappa, p.support.len());
        for (i, &v) in p.p.iter().enumerate() {
            if p.support.contains(&i) {
                prop_assert!(v > 0.0);
            } else {
                prop_assert_eq!(v, 0.0);
                prop_assert!(z[i] <= p.tau + 1e-12);
            }
        }
    }

    #[test]
    fn sparsemax_matches_the_oracle(z in scores()) {
        let p = sparsemax(&z).unwrap();
        let o = simplex_projection_oracle(&z).unwrap();
        prop_assert!(max_abs_diff(&p.p, &o.p) <= 1e-9);
    }

    #[test]
    fn sparsemax_is_shift_invariant(z in scores(), c in -100.0..100.0f64) {
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let a = sparsemax(&z).unwrap();
        let b = sparsemax(&shifted).unwrap();
        prop_assert!(max_abs_diff(&a.p, &b.p) <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn sparsemax_commutes_with_permutations(z in scores(), seed in any::<u64>()) {
        let n = z.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates driven by a simple LCG so the permutation depends on `seed`
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<f64> = perm.iter().map(|&i| z[i]).collect();
        let p = sparsemax(&z).unwrap();
        let q = sparsemax(&permuted).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((q.p[k] - p.p[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn psi_star_dominates_every_simplex_point(z in scores(), w in prop::collection::vec(0.0..1.0f64, 16)) {
        let w = &w[..z.len()];
        let total: f64 = w.iter().sum();
        prop_assume!(total > 1e-6);
        let q: Vec<f64> = w.iter().map(|v| v / total).collect();
        let value: f64 = q.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - gini_entropy_neg(&q).unwrap();
        prop_assert!(psi_star(&z).unwrap() >= value - 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution(z in scores(), beta in 0.01..50.0f64) {
        let p = softmax(&z, beta).unwrap();
        prop_assert!(p.p.iter().all(|&v| v > 0.0 || beta * 10.0 > 700.0));
        prop_assert!((p.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sparse_step_stays_in_the_pattern_hull((store, x) in store_and_query(), beta in 0.1..10.0f64) {
        let t = sparse_step(&store, &x, beta).unwrap();
        prop_assert!(t.norm() <= store.max_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn retrieval_never_increases_energy((store, x) in store_and_query(), beta in 0.1..10.0f64) {
        for mode in Mode::ALL {
            let trace = retrieve(&store, &x, beta, mode, &RetrievalConfig::default()).unwrap();
            for w in trace.energies.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
            }
            let last = energy(&store, trace.final_state(), beta, mode).unwrap();
            prop_assert_eq!(last, *trace.energies.last().unwrap());
        }
    }

    #[test]
    fn lambert_w_inverts_w_exp_w(x in -0.36787944117144..1e9f64) {
        let w = lambert_w0(x).unwrap();
        prop_assert!(w >= -1.0);
        prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn linear_log_solution_has_small_residual(a in -2.0..20.0f64, b in 0.01..1e4f64) {
        let c = solve_linear_log(a, b).unwrap();
        prop_assert!(c > 0.0);
        prop_assert!(linear_log_residual(a, b, c).abs() <= 1e-8 * b.max(1.0));
    }

    #[test]
    fn half_mask_is_idempotent(x in prop::collection::vec(-3.0..3.0f64, 1..20)) {
        let q = QueryState::from_slice(&x).unwrap();
        let once = corrupt(&q, Corruption::HalfMask, 0).unwrap();
        prop_assert_eq!(corrupt(&once, Corruption::HalfMask, 1).unwrap(), once.clone());
        let zeros = once.as_slice().iter().filter(|v| **v == 0.0).count();
        prop_assert!(zeros >= x.len().div_ceil(2));
    }

    #[test]
    fn pattern_files_round_trip((store, _) in store_and_query()) {
        let dir = tempfile::tempdir().unwrap();
        for format in [PatternFormat::Csv, PatternFormat::F64Le] {
            let path = dir.path().join(format!("p.{format}"));
            save_patterns(&store, &path, format).unwrap();
            let back = load_patterns(&path, format).unwrap();
            prop_assert_eq!(back.xi().as_slice(), store.xi().as_slice());
            prop_assert_eq!(back.dim(), store.dim());
        }
    }
}
