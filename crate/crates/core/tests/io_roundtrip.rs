use std::fs;
use std::path::Path;

use brecs::io::*;
use brecs::{Error, RngHandle};
use nalgebra::DMatrix;
use rand::Rng;

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn csv_of(m: &DMatrix<f64>, header: Option<&str>) -> String {
    let mut s = header.map(|h| format!("{h}\n")).unwrap_or_default();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[test]
fn header_detection() {
    let dir = tempfile::tempdir().unwrap();
    let with = dir.path().join("with.csv");
    write(&with, "a,b\n1,2\n3,4\n");
    let t = read_matrix_csv(&with).unwrap();
    assert_eq!(t.header, Some(vec!["a".to_string(), "b".to_string()]));
    assert_eq!(
        t.values,
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])
    );

    let without = dir.path().join("without.csv");
    write(&without, "1,2\n3,4\n");
    let t = read_matrix_csv(&without).unwrap();
    assert_eq!(t.header, None);
    assert_eq!(t.names("x"), vec!["x1", "x2"]);
    assert_eq!(t.values.nrows(), 2);
}

#[test]
fn tobacco_shaped_load_with_intercept_and_centering() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngHandle::new(1);
    let y = DMatrix::from_fn(25, 3, |_, _| rng.random::<f64>() * 10.0);
    let x = DMatrix::from_fn(25, 6, |_, _| rng.random::<f64>());
    let (yp, xp) = (dir.path().join("y.csv"), dir.path().join("x.csv"));
    write(&yp, &csv_of(&y, Some("y1,y2,y3")));
    write(&xp, &csv_of(&x, Some("a,b,c,d,e,f")));
    let opts = LoadOptions {
        center: true,
        intercept: true,
        ..Default::default()
    };
    let d = load_dataset(&yp, &xp, &opts).unwrap();
    assert_eq!((d.data.n(), d.data.q(), d.data.p()), (25, 3, 7));
    assert_eq!(d.covariate_names[0], "a");
    assert_eq!(d.covariate_names[6], "intercept");
    assert!(d.data.x().column(6).iter().all(|v| *v == 1.0));
    for col in d.data.y().column_iter() {
        assert!(col.mean().abs() < 1e-12);
    }
    assert!(d.data.centered() && d.data.intercept_added());
}

#[test]
fn row_count_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (yp, xp) = (dir.path().join("y.csv"), dir.path().join("x.csv"));
    write(&yp, &csv_of(&DMatrix::from_element(10, 2, 1.0), None));
    write(&xp, &csv_of(&DMatrix::from_element(9, 3, 1.0), None));
    let err = load_dataset(&yp, &xp, &LoadOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Data(_)));
    let msg = err.to_string();
    assert!(msg.contains("10") && msg.contains('9'), "{msg}");
}

#[test]
fn malformed_rows_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    write(&ragged, "a,b\n1,2\n3\n");
    match read_matrix_csv(&ragged).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
    let bad = dir.path().join("bad.csv");
    write(&bad, "1,2\n3,oops\n");
    let err = read_matrix_csv(&bad).unwrap_err();
    match &err {
        Error::Parse { line, msg, .. } => {
            assert_eq!(*line, 2);
            assert!(msg.contains("oops"));
        }
        e => panic!("unexpected {e}"),
    }
    assert!(err.to_string().contains("bad.csv"));
}

#[test]
fn more_responses_than_covariates_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (yp, xp) = (dir.path().join("y.csv"), dir.path().join("x.csv"));
    write(&yp, &csv_of(&DMatrix::from_element(5, 3, 1.0), None));
    write(&xp, &csv_of(&DMatrix::from_element(5, 2, 1.0), None));
    assert!(matches!(
        load_dataset(&yp, &xp, &LoadOptions::default()),
        Err(Error::Data(_))
    ));
}

#[test]
fn write_read_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let mut rng = RngHandle::new(2);
    let mut m = DMatrix::from_fn(20, 4, |_, _| {
        (rng.random::<f64>() - 0.5) * 10f64.powi(rng.random_range(-300..300))
    });
    m[(0, 0)] = f64::MIN_POSITIVE;
    m[(0, 1)] = -0.0;
    m[(0, 2)] = 0.1 + 0.2;
    let names: Vec<String> = ["w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
    write_matrix_csv(&path, &m, Some(&names)).unwrap();
    let t = read_matrix_csv(&path).unwrap();
    assert_eq!(t.header.as_deref(), Some(&names[..]));
    for (a, b) in m.iter().zip(t.values.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn subsampling_keeps_sorted_matching_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (yp, xp) = (dir.path().join("y.csv"), dir.path().join("x.csv"));
    let y = DMatrix::from_fn(50, 2, |i, k| (i * 10 + k) as f64);
    let x = DMatrix::from_fn(50, 3, |i, _| i as f64);
    write(&yp, &csv_of(&y, None));
    write(&xp, &csv_of(&x, None));
    let opts = LoadOptions {
        subsample: Some(20),
        seed: 7,
        ..Default::default()
    };
    let d = load_dataset(&yp, &xp, &opts).unwrap();
    let rows = d.rows.clone().unwrap();
    assert_eq!(rows.len(), 20);
    assert!(rows.windows(2).all(|w| w[0] < w[1]));
    for (r, &i) in rows.iter().enumerate() {
        assert_eq!(d.data.x()[(r, 0)], i as f64);
        assert_eq!(d.data.y()[(r, 1)], (i * 10 + 1) as f64);
    }
    let again = load_dataset(&yp, &xp, &opts).unwrap();
    assert_eq!(again.rows, d.rows);
}

#[test]
fn comment_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    write(
        &path,
        "# seed: 5\n# chain_seed: 7\nrank,probability\n1,0.25\n2,0.75\n",
    );
    let t = read_matrix_csv(&path).unwrap();
    assert_eq!(t.header.unwrap(), vec!["rank", "probability"]);
    assert_eq!(
        t.values,
        DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 2.0, 0.75])
    );
    write(&path, "# note\n1,2\n3,x\n");
    match read_matrix_csv(&path).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
}
