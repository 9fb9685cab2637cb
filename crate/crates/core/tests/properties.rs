use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use polydisc::boundary::{julia_quotient, BoundaryPoint};
use polydisc::derivative::{slope, Direction};
use polydisc::desingularize::{desingularize, DesingularizedModel, IDomain};
use polydisc::function::FnOnPolydisc;
use polydisc::numerics::{
    c64, identity, kernel_basis, min_norm_solve, op_norm, ComplexMatrix, DEFAULT_RANK_TOL,
};
use polydisc::pencil::{cauchy_bound, one_minus_bound, positive_cauchy_bound, PositivePartition};
use polydisc::phi3::{lift_path, phi3_eval, phi3_realization, G3Point, Phi3, ROOT_TOL};
use polydisc::realization::random_realization;
use polydisc::sampling::{
    half_polyplane_point, random_matrix, random_partition_ops, random_vector, rng_from_seed,
};

fn model() -> &'static DesingularizedModel {
    static MODEL: OnceLock<DesingularizedModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let r = phi3_realization().unwrap().realization;
        desingularize(&r, &BoundaryPoint::ones(3)).unwrap()
    })
}

fn disc_point() -> impl Strategy<Value = Complex64> {
    (0.0f64..0.999, 0.0f64..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn tridisc_point() -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(disc_point(), 3)
}

/// A point with every real part below 1.
fn left_half_point(d: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-6.0f64..0.999, -5.0f64..5.0).prop_map(|(x, y)| c64(x, y)), d)
}

/// A random matrix of the given rank as a product of thin factors.
fn low_rank(seed: u64, n: usize, rank: usize) -> ComplexMatrix {
    let mut rng = rng_from_seed(seed);
    random_matrix(&mut rng, n, rank) * random_matrix(&mut rng, rank, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_basis_is_orthonormal_and_annihilated(seed in any::<u64>(), n in 2usize..9, deficit in 0usize..4) {
        let rank = n.saturating_sub(deficit).max(1);
        let a = low_rank(seed, n, rank);
        let basis = kernel_basis(&a, DEFAULT_RANK_TOL).unwrap();
        prop_assert_eq!(basis.len(), n - rank);
        let norm = op_norm(&a).unwrap();
        for (i, x) in basis.iter().enumerate() {
            prop_assert!((&a * x).norm() <= 2.0 * DEFAULT_RANK_TOL * norm);
            for (j, y) in basis.iter().enumerate() {
                let g = y.dotc(x);
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g - target).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn min_norm_solution_is_orthogonal_to_the_kernel(seed in any::<u64>(), n in 2usize..9) {
        let a = low_rank(seed, n, (n / 2).max(1));
        let b = random_vector(&mut rng_from_seed(seed ^ 1), n);
        let (x, _) = min_norm_solve(&a, &b, DEFAULT_RANK_TOL).unwrap();
        for k in kernel_basis(&a, DEFAULT_RANK_TOL).unwrap() {
            prop_assert!(k.dotc(&x).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn op_norm_is_submultiplicative(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let a = random_matrix(&mut rng, 8, 8);
        let b = random_matrix(&mut rng, 8, 8);
        let lhs = op_norm(&(&a * &b)).unwrap();
        prop_assert!(lhs <= op_norm(&a).unwrap() * op_norm(&b).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn pencil_inverses_obey_their_bounds(seed in any::<u64>(), n in 1usize..10, lambda in left_half_point(3)) {
        let y = PositivePartition::from_ops(random_partition_ops(&mut rng_from_seed(seed), n, 3)).unwrap();
        let slack = 1.0 + 1e-9;
        prop_assert!(op_norm(&y.one_minus_inverse(&lambda).unwrap()).unwrap() <= one_minus_bound(&lambda) * slack);
        prop_assert!(op_norm(&y.cauchy_inverse(&lambda).unwrap()).unwrap() <= cauchy_bound(&lambda) * slack);
        let z: Vec<Complex64> = lambda.iter().map(|l| 1.0 - l).collect();
        prop_assert!(op_norm(&y.positive_cauchy_inverse(&z).unwrap()).unwrap() <= positive_cauchy_bound(&z) * slack);
    }

    #[test]
    fn unitary_realizations_are_schur(seed in any::<u64>(), n in 1usize..8, lambda in tridisc_point()) {
        let r = random_realization(&mut rng_from_seed(seed), n, 3).unwrap();
        prop_assert!(r.eval(&lambda).unwrap().norm() <= 1.0 + 1e-10);
        prop_assert!(r.model_residual(&lambda, &lambda).unwrap() < 1e-8);
    }

    #[test]
    fn symmetric_lift_recovers_the_point(lambda in tridisc_point()) {
        let sep = (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .map(|(i, j)| (lambda[i] - lambda[j]).norm())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(sep > 0.05);
        let point = [lambda[0], lambda[1], lambda[2]];
        let roots = G3Point::from_point(&point).roots().unwrap();
        for l in &lambda {
            let nearest = roots.iter().map(|z| (z - l).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest <= ROOT_TOL);
        }
    }

    #[test]
    fn lifted_path_invariants(t in 1e-6f64..0.999) {
        let s = lift_path(t).unwrap();
        let [l1, l2, l3] = s.lambda;
        prop_assert!((l1 + s.b1 - s.s.s1).norm() <= ROOT_TOL);
        prop_assert!((l1 * s.b1 + s.b0 - s.s.s2).norm() <= ROOT_TOL);
        prop_assert!((l1 * s.b0 - s.s.s3).norm() <= ROOT_TOL);
        prop_assert!((1.0 - l1).norm() <= (1.0 - l2).norm() && (1.0 - l2).norm() <= (1.0 - l3).norm());
        prop_assert!((s.phi_value - s.closed_form).norm() <= 1e-8);
    }

    #[test]
    fn julia_quotient_ignores_unimodular_factors(lambda in tridisc_point(), angle in 0.0f64..6.3) {
        let rot = Complex64::from_polar(1.0, angle);
        let rotated = FnOnPolydisc::new(3, |l: &[Complex64]| rot * phi3_eval(l).unwrap());
        let a = julia_quotient(&Phi3, &lambda).unwrap();
        let b = julia_quotient(&rotated, &lambda).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn slope_has_positive_real_part_and_degree_one(seed in any::<u64>(), c in 0.01f64..100.0) {
        let m = model();
        let one = BoundaryPoint::ones(3);
        let z = half_polyplane_point(&mut rng_from_seed(seed), one.coords());
        let h = slope(m, &Direction::new(z.clone(), &one).unwrap()).unwrap();
        prop_assert!((-h).re > 0.0);
        let scaled: Vec<Complex64> = z.iter().map(|w| w * c).collect();
        let hc = slope(m, &Direction::new(scaled, &one).unwrap()).unwrap();
        prop_assert!((hc - h * c).norm() <= 1e-10 * (h * c).norm().max(1.0));
    }

    #[test]
    fn i_is_a_strict_contraction(lambda in tridisc_point()) {
        let m = model();
        prop_assert!(m.contraction_margin(&lambda).unwrap() > 0.0);
        let i = m.eval_i(&lambda, IDomain::OpenPolydisc).unwrap();
        prop_assert!(op_norm(&i).unwrap() < 1.0);
        prop_assert!(op_norm(&(identity(m.dim()) - &i)).unwrap() > 0.0);
    }
}
