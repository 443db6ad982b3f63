use homoflow::config::ExperimentConfig;
use homoflow::fields::{cross_product, rot_perp, PeriodicCellMap, TrigMode};
use homoflow::homogenize::{cell_average, cofactor_matrix};
use homoflow::linalg::det;
use nalgebra::DMatrix;
use proptest::prelude::*;

// Leibniz expansion over all permutations, as an independent determinant.
fn leibniz(a: &DMatrix<f64>) -> f64 {
    fn perms(n: usize) -> Vec<(Vec<usize>, f64)> {
        if n == 1 {
            return vec![(vec![0], 1.0)];
        }
        let mut out = Vec::new();
        for (p, s) in perms(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                // inserting at pos moves the new element past n-1-pos others
                let sign = if (n - 1 - pos) % 2 == 0 { s } else { -s };
                out.push((q, sign));
            }
        }
        out
    }
    let n = a.nrows();
    perms(n)
        .into_iter()
        .map(|(p, s)| s * (0..n).map(|i| a[(i, p[i])]).product::<f64>())
        .sum()
}

fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #[test]
    fn cofactor_inverts_up_to_determinant(a in (2usize..5).prop_flat_map(square)) {
        let n = a.nrows();
        let d = leibniz(&a);
        prop_assert!((det(&a) - d).abs() < 1e-10 * (1.0 + d.abs()));
        let prod = &a * cofactor_matrix(&a).transpose();
        let target = DMatrix::<f64>::identity(n, n) * d;
        prop_assert!((prod - target).amax() < 1e-10 * (1.0 + d.abs()));
        let dc = leibniz(&cofactor_matrix(&a));
        let expected = d.powi(n as i32 - 1);
        prop_assert!((dc - expected).abs() < 1e-9 * (1.0 + expected.abs()));
    }

    #[test]
    fn cross_product_is_alternating_and_multilinear(
        v in prop::collection::vec(-1.0f64..1.0, 9),
        alpha in -3.0f64..3.0,
    ) {
        let (a, b, c) = (&v[0..3], &v[3..6], &v[6..9]);
        let ab = cross_product(&[a, b]).unwrap();
        let ba = cross_product(&[b, a]).unwrap();
        for k in 0..3 {
            prop_assert!((ab[k] + ba[k]).abs() < 1e-14);
        }
        prop_assert!(dot(&ab, a).abs() < 1e-14 && dot(&ab, b).abs() < 1e-14);
        let mix: Vec<f64> = a.iter().zip(c).map(|(x, y)| alpha * x + y).collect();
        let lhs = cross_product(&[&mix, b]).unwrap();
        let cb = cross_product(&[c, b]).unwrap();
        for k in 0..3 {
            prop_assert!((lhs[k] - (alpha * ab[k] + cb[k])).abs() < 1e-13);
        }
    }

    #[test]
    fn four_dimensional_cross_product_matches_determinant(v in prop::collection::vec(-1.0f64..1.0, 16)) {
        let rows: Vec<&[f64]> = (0..4).map(|i| &v[4 * i..4 * i + 4]).collect();
        let w = cross_product(&rows[1..]).unwrap();
        let lhs = dot(rows[0], &w);
        let oracle = leibniz(&DMatrix::from_column_slice(4, 4, &v));
        prop_assert!((lhs - oracle).abs() < 1e-12);
    }

    #[test]
    fn rot_perp_is_a_quarter_turn(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let r = rot_perp(&[x, y]).unwrap();
        prop_assert!(dot(&r, &[x, y]).abs() < 1e-12);
        let rr = rot_perp(&r).unwrap();
        prop_assert_eq!(rr, [-x, -y]);
    }

    #[test]
    fn periodic_gradients_average_to_the_linear_part(
        amp in 0.01f64..0.1,
        k1 in -3i32..4,
        k2 in 1i32..4,
        phase in 0.0f64..6.0,
        c in 0usize..2,
        axis in 0usize..2,
    ) {
        let cell = PeriodicCellMap::new(
            DMatrix::identity(2, 2),
            vec![TrigMode { component: c, amplitude: amp, wavevector: vec![k1, k2], phase }],
        ).unwrap();
        let mean = cell_average(2, 16, &|y| {
            let mut g = [0.0; 2];
            cell.component_gradient_into(c, y, &mut g);
            g[axis]
        }).unwrap();
        // only the periodic part averages out; the linear part M y contributes M[c][axis]
        let linear = if c == axis { 1.0 } else { 0.0 };
        prop_assert!((mean - linear).abs() < 1e-12);
    }

    #[test]
    fn config_round_trips(
        delta in -0.9f64..0.9,
        gamma in -0.9f64..0.9,
        p in 1.1f64..6.0,
        h in 1e-4f64..1e-2,
        eps in prop::collection::vec(0.01f64..1.0, 1..5),
        seed in any::<u64>(),
    ) {
        let mut eps = eps;
        eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
        eps.dedup();
        let mut c = ExperimentConfig::default();
        c.family.name = "deltagamma".into();
        c.family.delta = delta;
        c.family.gamma = gamma;
        c.p = p;
        c.integrator_h = h;
        c.eps_list = eps;
        c.seed = seed;
        let again = ExperimentConfig::parse(&c.serialize()).unwrap();
        prop_assert_eq!(c, again);
    }
}
