use invreg::estimation::{center, fit_forward};
use invreg::inference::{confidence_region, prediction_region, theta};
use invreg::linalg::{
    chi2_cdf, chi2_quantile, commutation_matrix, rel_frobenius, vec, Ellipsoid, Matrix,
    PermutationMatrix, SpdMatrix, Vector,
};
use invreg::model::{psi, psi_involution_check, InverseParams};
use invreg::simulation::{simulate_dataset, substream};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = InverseParams> {
    (1usize..=3, 1usize..=6).prop_flat_map(|(l, d)| {
        (
            prop::collection::vec(-1.0f64..1.0, l * l),
            prop::collection::vec(-2.0f64..2.0, d * l),
            prop::collection::vec(0.2f64..3.0, d),
        )
            .prop_map(move |(g, a, s)| {
                let g = Matrix::from_vec(l, l, g);
                let gamma = SpdMatrix::from_symmetrized(
                    &g * g.transpose() + Matrix::identity(l, l) * 0.3,
                    "g",
                )
                .unwrap();
                InverseParams::new(gamma, Matrix::from_vec(d, l, a), Vector::from_vec(s)).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psi_is_an_involution(p in params()) {
        prop_assert!(psi_involution_check(&p).unwrap() < 1e-8);
    }

    #[test]
    fn forward_covariances_are_spd(p in params()) {
        let f = psi(&p).unwrap();
        prop_assert!(f.sigma_star().as_matrix().symmetric_eigenvalues().min() > 0.0);
        prop_assert!(f.gamma_star().as_matrix().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn theta_is_symmetric(p in params(), k in 1.0f64..100.0) {
        let yty = SpdMatrix::from_symmetrized(p.gamma().as_matrix() * k, "yty").unwrap();
        let th = theta(&p, &yty).unwrap();
        let m = th.matrix().as_matrix();
        prop_assert_eq!(m, &m.transpose());
        prop_assert_eq!(m.nrows(), p.l() * p.d());
    }

    #[test]
    fn commutation_swaps_vec(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let m = Matrix::from_fn(rows, cols, |i, j| ((seed >> ((i + 3 * j) % 60)) & 0xff) as f64 - 100.0);
        let k = commutation_matrix(rows, cols);
        prop_assert_eq!(k.apply(&vec(&m)).unwrap(), vec(&m.transpose()));
        prop_assert!(k.compose(&k.inverse()).unwrap().is_identity());
    }

    #[test]
    fn chi2_quantile_inverts_cdf(df in 1usize..60, p in 0.01f64..0.99) {
        let q = chi2_quantile(df, p).unwrap();
        prop_assert!((chi2_cdf(df, q) - p).abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_membership_is_congruence_invariant(
        diag in prop::collection::vec(0.1f64..4.0, 3),
        y in prop::collection::vec(-3.0f64..3.0, 3),
        t in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let t = Matrix::from_vec(3, 3, t) + Matrix::identity(3, 3) * 3.0;
        let shape = SpdMatrix::from_diagonal(&Vector::from_vec(diag), "s").unwrap();
        let e = Ellipsoid::new(Vector::zeros(3), shape.clone(), 7.8).unwrap();
        let moved = SpdMatrix::from_symmetrized(&t * shape.as_matrix() * t.transpose(), "ts").unwrap();
        let f = Ellipsoid::new(Vector::zeros(3), moved, 7.8).unwrap();
        let y = Vector::from_vec(y);
        let a = e.statistic(&y).unwrap();
        let b = f.statistic(&(&t * &y)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn regions_contain_their_centers(p in params(), seed in any::<u64>()) {
        let data = simulate_dataset(&p, 40, &mut substream(seed, 0)).unwrap();
        let fit = fit_forward(&center(&data)).unwrap();
        let x = data.x().row(0).transpose();
        let r = prediction_region(&fit, &x, 0.9).unwrap();
        prop_assert!(r.contains(r.center()).unwrap());
        let c = confidence_region(&fit, 0.9).unwrap();
        prop_assert!(c.statistic(fit.forward.slope_star()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn confidence_statistic_ignores_predictor_labels(p in params(), seed in any::<u64>()) {
        let d = p.d();
        let data = simulate_dataset(&p, 40, &mut substream(seed, 1)).unwrap();
        let map: Vec<usize> = (0..d).rev().collect();
        let perm = PermutationMatrix::new(map).unwrap();
        let x_perm = perm.right_mul(&data.x().clone()).unwrap();
        let fit = fit_forward(&center(&data)).unwrap();
        let fit_perm = fit_forward(&center(&invreg::estimation::Dataset::new(x_perm, data.y().clone()).unwrap())).unwrap();
        let cand = fit.forward.slope_star().map(|v| v + 0.05);
        let cand_perm = perm.right_mul(&cand).unwrap();
        let a = confidence_region(&fit, 0.95).unwrap().statistic(&cand).unwrap();
        let b = confidence_region(&fit_perm, 0.95).unwrap().statistic(&cand_perm).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{} vs {}", a, b);
        prop_assert!(rel_frobenius(&perm.right_mul(fit.forward.slope_star()).unwrap(), fit_perm.forward.slope_star()) < 1e-10);
    }
}
