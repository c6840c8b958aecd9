use brecs::selection::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn archive_of_entry(values: &[f64]) -> SparseDrawArchive {
    SparseDrawArchive::from_sparse(
        values
            .iter()
            .map(|v| DMatrix::from_element(1, 1, *v))
            .collect(),
    )
    .unwrap()
}

#[test]
fn savs_examples() {
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.5, 0.0]);
    let s = savs_sparsify_draw(&c, &[4.0]).unwrap();
    assert_eq!(s[(0, 0)], 0.75);
    assert_eq!(s[(0, 1)], 0.0);
    assert_eq!(s[(0, 2)], 0.0);
}

#[test]
fn pip_and_point_estimate_examples() {
    let a = archive_of_entry(&[0.0, 1.2, 0.9, 0.0]);
    let pip = compute_pip(&a);
    assert_eq!(pip[(0, 0)], 0.5);
    assert_eq!(sparse_point_estimate(&a, &pip).unwrap()[(0, 0)], 0.0);

    let a = archive_of_entry(&[1.0, 1.0, 1.0, 1.0]);
    let pip = compute_pip(&a);
    assert_eq!(pip[(0, 0)], 1.0);
    assert_eq!(sparse_point_estimate(&a, &pip).unwrap()[(0, 0)], 1.0);

    let a = archive_of_entry(&[0.0, 2.0, 2.0, 2.0]);
    let pip = compute_pip(&a);
    assert_eq!(pip[(0, 0)], 0.75);
    assert_eq!(sparse_point_estimate(&a, &pip).unwrap()[(0, 0)], 1.5);

    assert_eq!(compute_pip(&archive_of_entry(&[0.0, 0.0]))[(0, 0)], 0.0);
}

#[test]
fn zeta_example_values() {
    let pip = DMatrix::from_row_slice(1, 5, &[0.49, 0.94, 0.01, 0.5, 0.0]);
    let z = pip_uncertainty(&pip).unwrap();
    let expected = [0.98, 0.12, 0.02, 1.0, 0.0];
    for (k, e) in expected.iter().enumerate() {
        assert!((z[(0, k)] - e).abs() < 1e-12, "zeta {} vs {e}", z[(0, k)]);
    }
}

#[test]
fn relevance_index_examples() {
    // q = 2, row nonzero counts {2, 1}
    let draws = vec![
        DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 2.0]),
    ];
    let a = SparseDrawArchive::from_sparse(draws).unwrap();
    let ri = relevance_index(&a);
    assert_eq!(
        ri.row(0).iter().copied().collect::<Vec<_>>(),
        vec![0.0, 0.5, 0.5]
    );
    assert_eq!(a.row_counts(), &[vec![2], vec![1]]);

    let dense = SparseDrawArchive::from_sparse(vec![DMatrix::from_element(1, 3, 1.0); 4]).unwrap();
    assert_eq!(relevance_index(&dense)[(0, 3)], 1.0);
}

#[test]
fn rule_of_thumb_examples() {
    let (v, s) = rule_of_thumb(&[0.5, 0.0, 0.5], DEFAULT_SR_BAR, DEFAULT_P_BAR).unwrap();
    assert_eq!(v, Verdict::Exclude);
    assert!((s - 0.5).abs() < 1e-12);
    let (v, s) = rule_of_thumb(&[0.0, 0.0, 1.0], 0.99, 1.0).unwrap();
    assert_eq!(v, Verdict::Keep);
    assert_eq!(s, 1.0);
    assert_eq!((DEFAULT_SR_BAR, DEFAULT_P_BAR), (0.70, 0.60));
}

#[test]
fn survival_is_strict_at_grid_points() {
    // sr_bar = 0.5 is a support point of q = 2; its mass is excluded
    let (_, s) = rule_of_thumb(&[0.2, 0.5, 0.3], 0.5, 0.5).unwrap();
    assert!((s - 0.3).abs() < 1e-12);
}

#[test]
fn ri_summary_examples() {
    // point mass at 5/6
    let mut row = vec![0.0; 7];
    row[5] = 1.0;
    let s = ri_summary(&row).unwrap();
    let v = 5.0 / 6.0;
    for x in [s.mode, s.mean, s.q25, s.q50, s.q75] {
        assert!((x - v).abs() < 1e-12);
    }
    assert!(s.std.abs() < 1e-12);

    let s = ri_summary(&[0.5, 0.5]).unwrap();
    assert!((s.mean - 0.5).abs() < 1e-12);
    assert!((s.std - 0.5).abs() < 1e-12);
    assert_eq!((s.q25, s.q50, s.q75), (0.0, 0.0, 1.0));

    let third = 1.0 / 3.0;
    let s = ri_summary(&[third, third, third]).unwrap();
    assert!((s.mean - 0.5).abs() < 1e-12);
    assert_eq!(s.mode, 0.0);
    assert!((s.std - (1.0f64 / 6.0).sqrt()).abs() < 1e-12);
}

#[test]
fn report_is_consistent_and_serializes() {
    let draws: Vec<DMatrix<f64>> = (0..10)
        .map(|m| {
            DMatrix::from_fn(3, 2, |j, k| {
                if (j + k + m) % 3 == 0 {
                    1.0 + j as f64
                } else {
                    0.0
                }
            })
        })
        .collect();
    let a = SparseDrawArchive::from_sparse(draws).unwrap();
    let r = SelectionReport::build(&a, 0.4, 0.3, None).unwrap();
    assert_eq!(r.covariates[2].name, "x3");
    for row in &r.ri {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    let pip = r.pip_matrix();
    let c_hat = r.c_hat_matrix();
    for (p, c) in pip.iter().zip(c_hat.iter()) {
        if *p <= 0.5 {
            assert_eq!(*c, 0.0);
        }
    }
    let json = serde_json::to_string(&r).unwrap();
    let back: SelectionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    let text = r.to_text();
    assert!(text.contains("P(RI>sr)"));
    assert!(r.covariate_table().lines().count() == 4);
}

fn entry() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), -5.0..5.0f64, -0.1..0.1f64]
}

proptest! {
    #[test]
    fn savs_nonzero_criterion_and_shrinkage(c in entry(), norm in 0.01..50.0f64) {
        let s = savs_sparsify_draw(&DMatrix::from_element(1, 1, c), &[norm]).unwrap()[(0, 0)];
        prop_assert_eq!(s != 0.0, c.abs().powi(3) * norm > 1.0);
        prop_assert!(s.abs() <= c.abs());
        prop_assert!(s == 0.0 || s.signum() == c.signum());
    }

    #[test]
    fn savs_monotone(a in 0.0..5.0f64, b in 0.0..5.0f64, norm in 0.01..50.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f = |v: f64| savs_sparsify_draw(&DMatrix::from_element(1, 1, v), &[norm]).unwrap()[(0, 0)];
        prop_assert!(f(lo).abs() <= f(hi).abs());
    }

    #[test]
    fn archive_invariants(
        seed in prop::collection::vec(entry(), 12 * 4),
        norms in prop::collection::vec(0.1..20.0f64, 4),
    ) {
        // 4 draws of a 4 x 3 coefficient matrix
        let draws: Vec<DMatrix<f64>> = seed
            .chunks(12)
            .map(|c| DMatrix::from_row_slice(4, 3, c))
            .collect();
        let a = SparseDrawArchive::from_draws(&draws, &norms).unwrap();
        let pip = compute_pip(&a);
        let zeta = pip_uncertainty(&pip).unwrap();
        let ri = relevance_index(&a);
        for j in 0..4 {
            let row: Vec<f64> = ri.row(j).iter().copied().collect();
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // mean of the RI equals the average PIP of the covariate
            let s = ri_summary(&row).unwrap();
            let avg_pip = pip.row(j).iter().sum::<f64>() / 3.0;
            prop_assert!((s.mean - avg_pip).abs() < 1e-12);
            // and the average nonzero count over M q
            let total: usize = a.row_counts().iter().map(|c| c[j]).sum();
            prop_assert!((s.mean - total as f64 / 12.0).abs() < 1e-12);
            // a tiny threshold keeps every covariate with any nonzero draw
            let (v, _) = rule_of_thumb(&row, 0.0, 1e-9).unwrap();
            prop_assert_eq!(v == Verdict::Keep, total > 0);
        }
        for (p, z) in pip.iter().zip(zeta.iter()) {
            prop_assert!((0.0..=1.0).contains(p) && (0.0..=1.0).contains(z));
            prop_assert!((zeta_of(1.0 - p) - z).abs() < 1e-12);
        }
        for d in a.draws() {
            for v in d.iter() {
                prop_assert!(v.is_finite());
            }
        }
    }
}
