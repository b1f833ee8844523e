use gossipgd::algorithm::comm_rounds;
use gossipgd::analysis::{average_part, disagreement_part, lyapunov, StackedVector};
use gossipgd::{GossipMatrix, GossipMatrix64, GossipSchedule};
use proptest::prelude::*;

/// Nonnegative doubly stochastic matrix as a convex combination of
/// permutations given by `perms` with weights `coeffs`.
fn from_perms(n: usize, perms: &[Vec<usize>], coeffs: &[f64]) -> GossipMatrix64 {
    let total: f64 = coeffs.iter().sum();
    let mut w = vec![0.0; n * n];
    for (p, c) in perms.iter().zip(coeffs) {
        for (i, &j) in p.iter().enumerate() {
            w[i * n + j] += c / total;
        }
    }
    GossipMatrix::new(n, w).unwrap()
}

fn doubly_stochastic() -> impl Strategy<Value = GossipMatrix64> {
    (2usize..8).prop_flat_map(|n| {
        let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
        (Just(n), prop::collection::vec(perm, 1..5), prop::collection::vec(0.05f64..1.0, 5))
            .prop_map(|(n, perms, coeffs)| from_perms(n, &perms, &coeffs[..perms.len()]))
    })
}

fn stacked() -> impl Strategy<Value = (StackedVector<f64>, StackedVector<f64>)> {
    (1usize..6, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-10.0f64..10.0, n * d),
            prop::collection::vec(-10.0f64..10.0, n * d),
        )
            .prop_map(move |(a, b)| (StackedVector::new(n, d, a).unwrap(), StackedVector::new(n, d, b).unwrap()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gap_of_nonnegative_doubly_stochastic_is_at_most_one(w in doubly_stochastic()) {
        let g = w.spectral_gap();
        prop_assert!(g >= 0.0);
        prop_assert!(g <= 1.0 + 1e-10);
    }

    #[test]
    fn product_gap_is_submultiplicative(a in doubly_stochastic(), seed in any::<u64>(), m in 1usize..5) {
        let n = a.n();
        let b = GossipMatrix64::ring(n).unwrap();
        let s = GossipSchedule::seeded_random(vec![a, b], seed).unwrap();
        let bound: f64 = (1..=m).map(|l| s.matrix_at(3, l, m).spectral_gap()).product();
        prop_assert!(s.product_gap(3, m).unwrap() <= bound + 1e-9);
    }

    #[test]
    fn validation_is_transpose_symmetric(w in doubly_stochastic(), i in 0usize..8, j in 0usize..8, eps in -0.2f64..0.2) {
        let n = w.n();
        let mut weights = w.weights().to_vec();
        weights[(i % n) * n + j % n] += eps;
        let p = GossipMatrix::new(n, weights).unwrap();
        let a = p.validate_doubly_stochastic(1e-9).unwrap().passed;
        let b = p.transpose().validate_doubly_stochastic(1e-9).unwrap().passed;
        prop_assert_eq!(a, b);
        prop_assert!(w.validate_doubly_stochastic(1e-9).unwrap().passed);
    }

    #[test]
    fn schedule_queries_are_deterministic(seed in any::<u64>(), k in 0usize..10_000, m in 1usize..10, l in 1usize..10) {
        let l = 1 + (l - 1) % m;
        let mats = vec![GossipMatrix64::ring(5).unwrap(), GossipMatrix64::complete(5).unwrap(), GossipMatrix64::identity(5).unwrap()];
        let s1 = GossipSchedule::seeded_random(mats.clone(), seed).unwrap();
        let s2 = GossipSchedule::seeded_random(mats, seed).unwrap();
        let first = s1.index_at(k, l, m);
        // unrelated queries in between change nothing
        for kk in 0..5 {
            let _ = s1.index_at(kk, 1, m);
        }
        prop_assert_eq!(first, s1.index_at(k, l, m));
        prop_assert_eq!(first, s2.index_at(k, l, m));
    }

    #[test]
    fn average_and_disagreement_are_complementary_projections((z, w) in stacked()) {
        let a = average_part(&z);
        let d = disagreement_part(&z);
        let sum = a.add(&d).unwrap();
        for (x, y) in sum.as_slice().iter().zip(z.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(average_part(&a).sub(&a).unwrap().norm_sq() <= 1e-24);
        prop_assert!(disagreement_part(&d).sub(&d).unwrap().norm_sq() <= 1e-20);
        prop_assert!(average_part(&d).norm_sq() <= 1e-20);
        prop_assert!(disagreement_part(&a).norm_sq() <= 1e-20);
        let scale = 1.0 + z.norm_sq().sqrt() * w.norm_sq().sqrt();
        prop_assert!(a.dot(&disagreement_part(&w)).abs() <= 1e-12 * scale);
    }

    #[test]
    fn lyapunov_is_nonnegative((x, y) in stacked(), lambda in 0.01f64..0.99) {
        prop_assert!(lyapunov(&x, &y, lambda).unwrap() >= -1e-12);
    }

    #[test]
    fn comm_rounds_is_monotone(rho in 0.01f64..0.98, sigma in 0.01f64..0.98, dr in 0.0f64..0.3, ds in 0.0f64..0.3) {
        let m = comm_rounds(rho, sigma).unwrap();
        prop_assert!(m >= 1);
        if rho + dr < 1.0 {
            prop_assert!(comm_rounds(rho + dr, sigma).unwrap() <= m);
        }
        if sigma + ds < 1.0 {
            prop_assert!(comm_rounds(rho, sigma + ds).unwrap() >= m);
        }
    }
}

#[test]
fn lyapunov_vanishes_only_on_consensual_tracking_error() {
    let n = 4;
    let zero = StackedVector::<f64>::zeros(n, 2);
    let consensual = StackedVector::repeat(n, &[1.0, -2.0]);
    // x̄ = 0 with ȳ purely consensual: V = 0
    assert!(lyapunov(&zero, &consensual, 0.5).unwrap().abs() < 1e-12);
    // any nonzero x̄ gives V > 0
    assert!(lyapunov(&consensual, &zero, 0.5).unwrap() > 0.0);
    let spread = StackedVector::new(n, 2, vec![1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    assert!(lyapunov(&zero, &spread, 0.5).unwrap() > 0.0);
    // minimise over directions: the smallest eigenvalue of [1 λ; λ λ] bounds V below
    let lambda: f64 = 0.6;
    let lo = (1.0 + lambda - ((1.0 - lambda).powi(2) + 4.0 * lambda * lambda).sqrt()) / 2.0;
    for t in 0..360 {
        let th = (t as f64).to_radians();
        let x = spread.scale(th.cos());
        let y = spread.scale(th.sin());
        let v = lyapunov(&x, &y, lambda).unwrap();
        assert!(v >= lo * spread.norm_sq() - 1e-12);
    }
}
