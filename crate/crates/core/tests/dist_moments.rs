mod common;

use brecs::dist::*;
use brecs::stats::ks_two_sample;
use brecs::{RngHandle, SpdMatrix};
use common::*;
use nalgebra::{DMatrix, DVector};

const N: usize = 100_000;

#[test]
fn bessel_quadrature_matches_closed_form() {
    for x in [0.01, 0.5, 2.0, 10.0] {
        let exact = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x as f64).exp();
        let k = bessel_k(0.5, x);
        assert!(
            (k - exact).abs() < 1e-9 * exact,
            "K_0.5({x}) = {k}, expected {exact}"
        );
        // K_1.5(x) = K_0.5(x) (1 + 1/x)
        let k15 = bessel_k(1.5, x);
        assert!((k15 - exact * (1.0 + 1.0 / x)).abs() < 1e-9 * k15);
    }
}

#[test]
fn gig_moments_across_regimes() {
    // one case per sampler branch plus the near-degenerate limits
    let cases = [
        (-1.0, 1.0, 8.0),
        (0.3, 1.0, 0.01),
        (0.8, 1.0, 0.2),
        (3.0, 2.0, 5.0),
        (-2.5, 1.0, 10.0),
        (0.5, 1.0, 1e-8),
        (-0.45, 1.0, 2e-3),
        (-3.0, 1.0, 0.5),
        (0.0, 4.0, 0.25),
    ];
    let mut rng = RngHandle::new(11);
    for (order, a, b) in cases {
        let draws: Vec<f64> = (0..N)
            .map(|_| sample_gig(order, a, b, &mut rng).unwrap())
            .collect();
        assert!(draws.iter().all(|x| *x > 0.0 && x.is_finite()));
        let m1 = gig_moment(order, a, b, 1.0);
        let m2 = gig_moment(order, a, b, 2.0);
        let label = format!("GiG({order}, {a}, {b})");
        assert_mean_within_3se(&label, &draws, m1, Some(m2 - m1 * m1));
        let inv: Vec<f64> = draws.iter().map(|x| 1.0 / x).collect();
        let r1 = gig_moment(order, a, b, -1.0);
        let r2 = gig_moment(order, a, b, -2.0);
        if r2.is_finite() {
            assert_mean_within_3se(&format!("{label} reciprocal"), &inv, r1, Some(r2 - r1 * r1));
        }
    }
}

#[test]
fn gig_dl_tau_case() {
    // tau step with p = 2, alpha = 0.5, b = (1, 1), phi = (1/2, 1/2)
    let mut rng = RngHandle::new(12);
    let draws: Vec<f64> = (0..N)
        .map(|_| sample_gig(-1.0, 1.0, 8.0, &mut rng).unwrap())
        .collect();
    let m1 = gig_moment(-1.0, 1.0, 8.0, 1.0);
    let m2 = gig_moment(-1.0, 1.0, 8.0, 2.0);
    assert_mean_within_3se("GiG(-1, 1, 8)", &draws, m1, Some(m2 - m1 * m1));
}

#[test]
fn gig_minus_half_is_inverse_gaussian() {
    let (mu, lambda) = (1.7, 2.3);
    let mut rng = RngHandle::new(13);
    let a: Vec<f64> = (0..20_000)
        .map(|_| sample_gig(-0.5, lambda / (mu * mu), lambda, &mut rng).unwrap())
        .collect();
    let b: Vec<f64> = (0..20_000)
        .map(|_| sample_inverse_gaussian(mu, lambda, &mut rng).unwrap())
        .collect();
    let ks = ks_two_sample(&a, &b).unwrap();
    assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
}

#[test]
fn gig_reciprocal_symmetry() {
    // 1/X ~ GiG(-order, b, a)
    let mut rng = RngHandle::new(14);
    let a: Vec<f64> = (0..20_000)
        .map(|_| 1.0 / sample_gig(0.7, 2.0, 0.3, &mut rng).unwrap())
        .collect();
    let b: Vec<f64> = (0..20_000)
        .map(|_| sample_gig(-0.7, 0.3, 2.0, &mut rng).unwrap())
        .collect();
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

#[test]
fn inverse_gaussian_moments() {
    let mut rng = RngHandle::new(15);
    for (mu, lambda) in [(2.0, 1.0), (1e-3, 1.0), (50.0, 1.0), (1.0, 20.0)] {
        let draws: Vec<f64> = (0..N)
            .map(|_| sample_inverse_gaussian(mu, lambda, &mut rng).unwrap())
            .collect();
        assert!(draws.iter().all(|x| *x > 0.0));
        let v = mu.powi(3) / lambda;
        assert_mean_within_3se(&format!("iG({mu}, {lambda})"), &draws, mu, Some(v));
        // E[1/X] = 1/mu + 1/lambda, Var[1/X] = 1/(mu lambda) + 2/lambda^2
        let inv: Vec<f64> = draws.iter().map(|x| 1.0 / x).collect();
        let inv_var = 1.0 / (mu * lambda) + 2.0 / (lambda * lambda);
        assert_mean_within_3se(
            "iG reciprocal",
            &inv,
            1.0 / mu + 1.0 / lambda,
            Some(inv_var),
        );
    }
}

#[test]
fn gamma_and_exponential_moments() {
    let mut rng = RngHandle::new(16);
    for (shape, rate) in [(0.05, 0.5), (1.0, 2.0), (7.5, 0.5)] {
        let d: Vec<f64> = (0..N)
            .map(|_| sample_gamma(shape, rate, &mut rng).unwrap())
            .collect();
        let label = format!("Gamma({shape}, {rate})");
        assert_mean_within_3se(&label, &d, shape / rate, Some(shape / (rate * rate)));
        assert_var_within_3se(&label, &d, shape / (rate * rate));
    }
    let d: Vec<f64> = (0..N)
        .map(|_| sample_exponential(0.5, &mut rng).unwrap())
        .collect();
    assert_mean_within_3se("Exp(1/2)", &d, 2.0, Some(4.0));
}

#[test]
fn dirichlet_moments() {
    let mut rng = RngHandle::new(17);
    for alpha in [
        vec![0.1, 0.1, 0.1],
        vec![1.0, 2.0, 3.0, 4.0],
        vec![0.02; 10],
    ] {
        let a0: f64 = alpha.iter().sum();
        let draws: Vec<Vec<f64>> = (0..N)
            .map(|_| sample_dirichlet(&alpha, &mut rng).unwrap())
            .collect();
        for d in &draws {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for (i, &ai) in alpha.iter().enumerate() {
            let xi: Vec<f64> = draws.iter().map(|d| d[i]).collect();
            let v = ai * (a0 - ai) / (a0 * a0 * (a0 + 1.0));
            assert_mean_within_3se(&format!("Dir {alpha:?} [{i}]"), &xi, ai / a0, Some(v));
            assert_var_within_3se(&format!("Dir {alpha:?} [{i}]"), &xi, v);
        }
    }
}

#[test]
fn inverse_wishart_moments() {
    let scale = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let scale_spd = SpdMatrix::new(scale.clone()).unwrap();
    let (df, q) = (8.0, 2.0);
    let mut rng = RngHandle::new(18);
    let draws: Vec<DMatrix<f64>> = (0..N)
        .map(|_| {
            sample_inverse_wishart(df, &scale_spd, &mut rng)
                .unwrap()
                .into_matrix()
        })
        .collect();
    let c = df - q - 1.0;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let e: Vec<f64> = draws.iter().map(|d| d[(i, j)]).collect();
        // Var(W_ij) = ((df - q + 1) s_ij^2 + (df - q - 1) s_ii s_jj) / ((df - q) c^2 (df - q - 3))
        let v = ((df - q + 1.0) * scale[(i, j)].powi(2) + c * scale[(i, i)] * scale[(j, j)])
            / ((df - q) * c * c * (df - q - 3.0));
        assert_mean_within_3se(&format!("IW[{i},{j}]"), &e, scale[(i, j)] / c, Some(v));
    }
}

#[test]
fn mvn_precision_moments() {
    let omega = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.4, 0.5, -0.4, 2.0]);
    let h = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    let cov = omega.clone().try_inverse().unwrap();
    let mu = &cov * &h;
    let mut rng = RngHandle::new(19);
    let draws: Vec<DVector<f64>> = (0..N)
        .map(|_| sample_mvn_precision(&h, &omega, &mut rng).unwrap())
        .collect();
    for i in 0..3 {
        let xi: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        assert_mean_within_3se(&format!("MVN mean[{i}]"), &xi, mu[i], Some(cov[(i, i)]));
        assert_var_within_3se(&format!("MVN var[{i}]"), &xi, cov[(i, i)]);
    }
    // covariance of coordinates 0 and 1 through the variance of their sum
    let s: Vec<f64> = draws.iter().map(|d| d[0] + d[1]).collect();
    assert_var_within_3se(
        "MVN var[0+1]",
        &s,
        cov[(0, 0)] + cov[(1, 1)] + 2.0 * cov[(0, 1)],
    );
}

#[test]
fn categorical_frequencies() {
    let w = [0.1, 0.6, 0.3];
    let lw: Vec<f64> = w.iter().map(|x: &f64| x.ln() + 500.0).collect();
    let mut rng = RngHandle::new(20);
    let mut counts = [0usize; 3];
    for _ in 0..N {
        counts[sample_categorical_log(&lw, &mut rng).unwrap()] += 1;
    }
    for (c, p) in counts.iter().zip(w) {
        let ind: f64 = *c as f64 / N as f64;
        let se = (p * (1.0 - p) / N as f64).sqrt();
        assert!((ind - p).abs() <= 3.0 * se, "freq {ind} vs {p}");
    }
}

#[test]
fn kernels_reproducible_under_seed() {
    let run = |seed| {
        let mut rng = RngHandle::new(seed);
        let scale = SpdMatrix::identity(3);
        let mut out = Vec::new();
        out.push(sample_gig(0.4, 1.0, 2.0, &mut rng).unwrap());
        out.push(sample_inverse_gaussian(1.0, 2.0, &mut rng).unwrap());
        out.push(sample_gamma(0.3, 0.5, &mut rng).unwrap());
        out.extend(sample_dirichlet(&[0.2, 0.3], &mut rng).unwrap());
        out.extend(
            sample_inverse_wishart(5.0, &scale, &mut rng)
                .unwrap()
                .as_matrix()
                .iter(),
        );
        out
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}
