#![allow(dead_code)]

/// Modified Bessel function of the second kind, by trapezoidal quadrature of
/// `int_0^inf exp(-x cosh t) cosh(nu t) dt`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let h: f64 = 1e-3;
    let mut sum = 0.5 * (-x).exp();
    let mut t = h;
    loop {
        let f = (-x * t.cosh() + nu.abs() * t).exp() * 0.5 * (1.0 + (-2.0 * nu.abs() * t).exp());
        sum += f;
        if x * t.cosh() > 750.0 + nu.abs() * t || t > 200.0 {
            break;
        }
        t += h;
    }
    sum * h
}

/// `E[X^k]` of `GiG(order, a, b)`, density proportional to
/// `x^(order-1) exp(-(a x + b / x) / 2)`.
pub fn gig_moment(order: f64, a: f64, b: f64, k: f64) -> f64 {
    let w = (a * b).sqrt();
    (b / a).powf(k / 2.0) * bessel_k(order + k, w) / bessel_k(order, w)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Asserts the sample mean lies within 3 standard errors of `expected`,
/// using the exact variance when supplied.
pub fn assert_mean_within_3se(label: &str, draws: &[f64], expected: f64, true_var: Option<f64>) {
    let v = true_var.unwrap_or_else(|| var(draws));
    let se = (v / draws.len() as f64).sqrt();
    let m = mean(draws);
    assert!(
        (m - expected).abs() <= 3.0 * se,
        "{label}: sample mean {m} vs expected {expected} (3 SE = {})",
        3.0 * se
    );
}

/// Asserts the sample variance is within 3 standard errors of `expected`,
/// with the SE estimated from the fourth central moment.
pub fn assert_var_within_3se(label: &str, draws: &[f64], expected: f64) {
    let m = mean(draws);
    let n = draws.len() as f64;
    let s2 = var(draws);
    let m4 = draws.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let se = ((m4 - s2 * s2) / n).sqrt();
    assert!(
        (s2 - expected).abs() <= 3.0 * se,
        "{label}: sample variance {s2} vs expected {expected} (3 SE = {})",
        3.0 * se
    );
}
