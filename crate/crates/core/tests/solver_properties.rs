use proptest::prelude::*;
use psz_core::{cost, pressure_matching, CMatrix64, Complex64, TargetMatrix64, TransferMatrix64};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMatrix64> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        CMatrix64::from_row_major(rows, cols, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    })
}

fn solve(h: &CMatrix64, mt: &CMatrix64, beta: f64) -> CMatrix64 {
    pressure_matching(&TransferMatrix64::new(500.0, h.clone()), &TargetMatrix64::new(500.0, mt.clone()), beta)
        .unwrap()
        .entries
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn linear_in_target(h in matrix(4, 8), mt in matrix(4, 2), beta in 1e-4..1.0f64, re in -5.0..5.0f64, im in -5.0..5.0f64) {
        let a = Complex64::new(re, im);
        let c = solve(&h, &mt, beta);
        let scaled = solve(&h, &mt.scale(a), beta);
        let diff = scaled.sub(&c.scale(a)).unwrap().frobenius();
        prop_assert!(diff <= 1e-9 * (1.0 + c.scale(a).frobenius()));
    }

    #[test]
    fn filter_norm_shrinks_with_beta(h in matrix(4, 8), mt in matrix(4, 2), beta in 1e-4..1.0f64, factor in 1.1..10.0f64) {
        let small = solve(&h, &mt, beta).frobenius();
        let large = solve(&h, &mt, beta * factor).frobenius();
        prop_assert!(large <= small * (1.0 + 1e-12));
    }

    #[test]
    fn gradient_vanishes(h in matrix(4, 8), mt in matrix(4, 3), beta in 1e-4..1.0f64) {
        // d/dC of the cost is Hᴴ(HC − M_T) + βC
        let c = solve(&h, &mt, beta);
        let r = h.matmul(&c).unwrap().sub(&mt).unwrap();
        let g = h.adjoint().matmul(&r).unwrap().add(&c.scale(Complex64::new(beta, 0.0))).unwrap();
        let scale = h.adjoint().matmul(&mt).unwrap().frobenius();
        prop_assert!(g.frobenius() <= 1e-10 * scale.max(1e-300));
    }

    #[test]
    fn no_cheaper_neighbour(h in matrix(4, 8), mt in matrix(4, 2), beta in 1e-3..1.0f64, e in matrix(8, 2), step in 1e-3..1.0f64) {
        let c = solve(&h, &mt, beta);
        let best = cost(&h, &c, &mt, beta).unwrap();
        let probe = c.add(&e.scale(Complex64::new(step, 0.0))).unwrap();
        prop_assert!(cost(&h, &probe, &mt, beta).unwrap() >= best);
    }

    #[test]
    fn columns_solve_independently(h in matrix(4, 8), mt in matrix(4, 3), beta in 1e-4..1.0f64) {
        let c = solve(&h, &mt, beta);
        let mut total = 0.0;
        for j in 0..3 {
            let col = CMatrix64::from_row_major(4, 1, mt.column(j));
            let cj = solve(&h, &col, beta);
            for l in 0..8 {
                prop_assert!((cj[(l, 0)] - c[(l, j)]).norm() <= 1e-10 * (1.0 + c.frobenius()));
            }
            total += cost(&h, &cj, &col, beta).unwrap();
        }
        let joint = cost(&h, &c, &mt, beta).unwrap();
        prop_assert!((total - joint).abs() <= 1e-10 * joint.max(1e-300));
    }
}
