use permround::gaussian::{gaussian_cdf, gaussian_icdf, haar_orthogonal};
use permround::nconv::{approximate_from_samples, ApproxOptions, Orientation};
use permround::qap::{eigenvalue_bound, objective, objective_orthogonal, random_instance};
use permround::rounding::{residual, round_at};
use permround::{OrthogonalMatrix, Permutation, RandomStream, SquareMatrix};
use proptest::prelude::*;

fn perm_and_vec(max_n: usize) -> impl Strategy<Value = (Permutation, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            Just(n).prop_perturb(|n, mut rng| {
                let mut image: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    image.swap(i, rng.random_range(0..=i));
                }
                Permutation::new(image).unwrap()
            }),
            prop::collection::vec(-1e3f64..1e3, n),
        )
    })
}

fn two_perms(max_n: usize) -> impl Strategy<Value = (Permutation, Permutation)> {
    (1..=max_n, any::<u64>(), any::<u64>()).prop_map(|(n, a, b)| {
        (
            Permutation::random(n, &mut RandomStream::new(a, 0)),
            Permutation::random(n, &mut RandomStream::new(b, 0)),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn apply_agrees_with_matrix((p, x) in perm_and_vec(64)) {
        let direct = p.apply(&x).unwrap();
        let via_matrix = p.to_matrix().matvec(&x).unwrap();
        prop_assert_eq!(direct, via_matrix);
    }

    #[test]
    fn composition_is_matrix_product((p, q) in two_perms(24)) {
        let pq = p.compose(&q).unwrap();
        prop_assert_eq!(pq.to_matrix(), p.to_matrix().matmul(&q.to_matrix()).unwrap());
        prop_assert!(p.compose(&p.inverse()).unwrap().is_identity());
        prop_assert_eq!(p.inverse().to_matrix(), p.to_matrix().transpose());
        prop_assert_eq!(Permutation::from_matrix(&pq.to_matrix()).unwrap(), pq);
    }

    #[test]
    fn permutation_text_round_trip((p, _) in two_perms(40)) {
        prop_assert_eq!(p.to_string().parse::<Permutation>().unwrap(), p.clone());
        let json = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<Permutation>(&json).unwrap(), p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_text_and_json_round_trip(n in 1usize..8, seed: u64) {
        let mut s = RandomStream::new(seed, 0);
        let mut data = s.sample_gaussian_vector(n * n);
        data[0] *= 1e-9;
        let m = SquareMatrix::new(n, data).unwrap();
        prop_assert_eq!(SquareMatrix::parse_text(&m.to_text()).unwrap(), m.clone());
        let json = serde_json::to_string(&m).unwrap();
        prop_assert_eq!(SquareMatrix::parse_any(&json).unwrap(), m);
    }

    #[test]
    fn rounding_invariants(n in 2usize..32, seed: u64, lambda in 1e-3f64..1e3) {
        let mut s = RandomStream::new(seed, 1);
        let u = haar_orthogonal(n, &mut s);
        let rho = Permutation::random(n, &mut s);
        let x = s.sample_gaussian_vector(n);
        let sigma = round_at(&u, &x).unwrap();

        let rho_u = u.left_permute(&rho).unwrap();
        prop_assert_eq!(round_at(&rho_u, &x).unwrap(), rho.compose(&sigma).unwrap());

        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert_eq!(round_at(&u, &neg).unwrap(), sigma.clone());

        let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
        prop_assert_eq!(round_at(&u, &scaled).unwrap(), sigma.clone());

        let p = OrthogonalMatrix::from_permutation(&rho);
        prop_assert_eq!(round_at(&p, &x).unwrap(), rho.clone());

        // the rounding is the best matching: |Ux - σx| ≤ |Ux - τx| for any τ
        let z = residual(&u, &x, &sigma).unwrap();
        let z_rho = residual(&u, &x, &rho).unwrap();
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>();
        prop_assert!(norm(&z) <= norm(&z_rho) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn icdf_is_monotone_inverse(a in 1e-300f64..1.0, b in 1e-300f64..1.0) {
        prop_assume!(a < 1.0 && b < 1.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (x, y) = (gaussian_icdf(lo).unwrap(), gaussian_icdf(hi).unwrap());
        prop_assert!(x <= y);
        prop_assert!((gaussian_cdf(x) - lo).abs() <= 1e-10);
    }

    #[test]
    fn approximation_is_resolution_of_sample_covariance(n in 1usize..6, seed: u64) {
        let mut s = RandomStream::new(seed, 2);
        let u = haar_orthogonal(n, &mut s);
        let xs: Vec<Vec<f64>> = (0..40).map(|_| s.sample_gaussian_vector(n)).collect();
        for orientation in [Orientation::WeightFirst, Orientation::PermutationFirst] {
            let opts = ApproxOptions { orientation, track_permutations: true, keep_weight_matrices: true };
            let approx = approximate_from_samples(&u, &xs, opts).unwrap();
            let mut sum = SquareMatrix::zeros(n);
            for w in approx.weight_matrices.as_ref().unwrap().values() {
                sum = sum.add(w).unwrap();
            }
            prop_assert!(sum.sub(&approx.weight_sum).unwrap().norm_inf() < 1e-12);
            let traces: f64 = approx.per_perm_trace.as_ref().unwrap().values().sum();
            prop_assert!((traces - approx.weight_sum.trace()).abs() < 1e-10);
            prop_assert_eq!(approx.perm_counts.as_ref().unwrap().total(), 40);
        }
    }

    #[test]
    fn qap_restriction_and_bound(n in 2usize..6, seed: u64) {
        let mut s = RandomStream::new(seed, 3);
        let inst = random_instance(n, &mut s);
        let sigma = Permutation::random(n, &mut s);
        let f = objective(&inst, &sigma).unwrap();
        let g = objective_orthogonal(&inst, &OrthogonalMatrix::from_permutation(&sigma)).unwrap();
        prop_assert!((f - g).abs() <= 1e-12 * f.abs().max(1.0));
        prop_assert!(eigenvalue_bound(&inst).unwrap() <= f + 1e-9);
    }
}
