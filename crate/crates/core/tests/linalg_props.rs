#![allow(clippy::needless_range_loop)]

use depthrisk_core::linalg::{build_spd, operator_norm, quad_form, squared_norm, SpdMatrix};
use depthrisk_core::RngStream;
use proptest::prelude::*;

/// Random SPD matrix `A Aᵀ + εI` with entries of A in [-2, 2].
fn random_spd(rng: &mut RngStream, d: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.uniform_in(-2.0, 2.0)).collect())
        .collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Inverse by the adjugate (cofactor) formula, 2×2 and 3×3 only.
fn cofactor_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    match m.len() {
        2 => {
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            vec![vec![m[1][1] / det, -m[0][1] / det], vec![-m[1][0] / det, m[0][0] / det]]
        }
        3 => {
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let cof = [
                [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
                [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
                [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
            ];
            let det: f64 = (0..3).map(|j| m[0][j] * cof[0][j]).sum();
            (0..3).map(|i| (0..3).map(|j| cof[j][i] / det).collect()).collect()
        }
        _ => unreachable!(),
    }
}

#[test]
fn quad_form_matches_cofactor_inverse() {
    let mut rng = RngStream::new(2024, 0);
    for trial in 0..1000 {
        let d = 2 + trial % 2;
        let rows = random_spd(&mut rng, d);
        let m = build_spd(&rows).unwrap();
        let v: Vec<f64> = (0..d).map(|_| rng.uniform_in(-3.0, 3.0)).collect();
        let inv = cofactor_inverse(m.rows().as_slice());
        let oracle: f64 = (0..d)
            .map(|i| (0..d).map(|j| v[i] * inv[i][j] * v[j]).sum::<f64>())
            .sum();
        let got = quad_form(&m, &v).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-10 * oracle.abs().max(1e-300),
            "trial {trial}: {got} vs {oracle}"
        );
    }
}

#[test]
fn cholesky_reconstructs_entries() {
    let mut rng = RngStream::new(5, 1);
    for d in 1..8 {
        let m = build_spd(&random_spd(&mut rng, d)).unwrap();
        let l = m.chol();
        let mut err = 0.0;
        let mut norm = 0.0;
        for i in 0..d {
            for j in 0..d {
                let r: f64 = (0..d).map(|k| l[i * d + k] * l[j * d + k]).sum();
                err += (r - m.get(i, j)).powi(2);
                norm += m.get(i, j).powi(2);
            }
            assert!(l[i * d + i] > 0.0);
        }
        assert!((err / norm).sqrt() < 1e-10);
    }
}

proptest! {
    #[test]
    fn quad_form_nonnegative_and_zero_only_at_origin(seed in any::<u64>(), d in 1usize..6, scale in 0.0f64..10.0) {
        let mut rng = RngStream::new(seed, 0);
        let m = build_spd(&random_spd(&mut rng, d)).unwrap();
        let v: Vec<f64> = (0..d).map(|_| scale * rng.uniform_in(-1.0, 1.0)).collect();
        let q = quad_form(&m, &v).unwrap();
        prop_assert!(q >= 0.0);
        prop_assert_eq!(quad_form(&m, &vec![0.0; d]).unwrap(), 0.0);
        if v.iter().any(|x| *x != 0.0) {
            prop_assert!(q > 0.0);
        }
    }

    #[test]
    fn identity_quad_form_is_squared_norm(v in prop::collection::vec(-1e3f64..1e3, 1..8)) {
        let id = SpdMatrix::identity(v.len());
        prop_assert_eq!(quad_form(&id, &v).unwrap(), squared_norm(&v));
    }

    #[test]
    fn operator_norm_is_absolutely_homogeneous(seed in any::<u64>(), d in 1usize..7, c in -50.0f64..50.0) {
        let mut rng = RngStream::new(seed, 9);
        let mut a = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let x = rng.uniform_in(-3.0, 3.0);
                a[i][j] = x;
                a[j][i] = x;
            }
        }
        let base = operator_norm(&a).unwrap();
        let neg: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        let scaled: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
        prop_assert!((operator_norm(&neg).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
        prop_assert!((operator_norm(&scaled).unwrap() - c.abs() * base).abs() <= 1e-12 * (c.abs() * base).max(1.0));
    }
}
